use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{SampleCloud, StatReport};
use crate::dynamics::StreamId;
use crate::error::{Result, VortexError};

/// Pooled size above which the distance matrix would exceed about 1 GB.
const POOLED_CAP: usize = 16_000;

fn euclid(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Empirical energy distance `2E|X−Y| − E|X−X'| − E|Y−Y'|`, with the
/// within-sample means taken over all ordered pairs including `X = X'`.
pub fn energy_statistic(a: &SampleCloud, b: &SampleCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(VortexError::SizeMismatch { left: a.dim(), right: b.dim() });
    }
    let mean_between = |p: &SampleCloud, q: &SampleCloud| {
        p.rows().map(|x| q.rows().map(|y| euclid(x, y)).sum::<f64>()).sum::<f64>() / (p.len() * q.len()) as f64
    };
    Ok(2.0 * mean_between(a, b) - mean_between(a, a) - mean_between(b, b))
}

/// Dot product of an `f32` row with a 0/1 mask, eight lanes at a time.
#[inline]
fn masked_sum(row: &[f32], mask: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let mut rc = row.chunks_exact(8);
    let mut mc = mask.chunks_exact(8);
    for (r, m) in (&mut rc).zip(&mut mc) {
        for k in 0..8 {
            acc[k] += r[k] * m[k];
        }
    }
    let tail: f32 = rc.remainder().iter().zip(mc.remainder()).map(|(r, m)| r * m).sum();
    acc.iter().sum::<f32>() + tail
}

struct PooledDistances {
    n: usize,
    dist: Vec<f32>,
    row_sums: Vec<f64>,
    total: f64,
}

impl PooledDistances {
    fn new(a: &SampleCloud, b: &SampleCloud) -> Self {
        let n = a.len() + b.len();
        let row = |i: usize| if i < a.len() { a.row(i) } else { b.row(i - a.len()) };
        let mut dist = vec![0.0f32; n * n];
        dist.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
            let x = row(i);
            for (j, o) in out.iter_mut().enumerate() {
                *o = euclid(x, row(j)) as f32;
            }
        });
        let row_sums: Vec<f64> = dist.par_chunks(n).map(|r| r.iter().map(|&x| x as f64).sum()).collect();
        let total = row_sums.iter().sum();
        Self { n, dist, row_sums, total }
    }

    /// Energy statistic for the split whose first group is `group_a`.
    fn statistic(&self, group_a: &[usize], mask: &[f32]) -> f64 {
        let (na, nb) = (group_a.len() as f64, (self.n - group_a.len()) as f64);
        let mut s_aa = 0.0;
        let mut rows_a = 0.0;
        for &i in group_a {
            s_aa += masked_sum(&self.dist[i * self.n..(i + 1) * self.n], mask) as f64;
            rows_a += self.row_sums[i];
        }
        let s_ab = rows_a - s_aa;
        let s_bb = self.total - 2.0 * s_ab - s_aa;
        2.0 * s_ab / (na * nb) - s_aa / (na * na) - s_bb / (nb * nb)
    }
}

/// Two-sample energy test with a permutation p-value.
///
/// Shuffle `p` draws from stream `(seed, p)`; the p-value is
/// `(1 + #{permuted ≥ observed}) / (1 + n_permutations)`.
pub fn energy_distance_test(a: &SampleCloud, b: &SampleCloud, n_permutations: usize, seed: u64) -> Result<StatReport> {
    if a.len() < 100 || b.len() < 100 {
        return Err(VortexError::domain(format!("energy test needs at least 100 points per side, got {} and {}", a.len(), b.len())));
    }
    if a.len() + b.len() > POOLED_CAP {
        return Err(VortexError::domain(format!("pooled size {} exceeds {POOLED_CAP}", a.len() + b.len())));
    }
    if n_permutations == 0 {
        return Err(VortexError::domain("need at least one permutation"));
    }
    let estimate = energy_statistic(a, b)?;
    let pooled = PooledDistances::new(a, b);
    let n = pooled.n;
    let na = a.len();

    let split_stat = |order: &[usize]| {
        let mut mask = vec![0.0f32; n];
        for &i in &order[..na] {
            mask[i] = 1.0;
        }
        pooled.statistic(&order[..na], &mask)
    };
    let identity: Vec<usize> = (0..n).collect();
    let observed = split_stat(&identity);
    let permuted: Vec<f64> = (0..n_permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = StreamId { seed, index: p as u64 }.rng();
            let mut order = identity.clone();
            order.shuffle(&mut rng);
            split_stat(&order)
        })
        .collect();
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    let null_mean = permuted.iter().sum::<f64>() / n_permutations as f64;
    let null_sd = (permuted.iter().map(|s| (s - null_mean).powi(2)).sum::<f64>() / n_permutations as f64).sqrt();
    Ok(StatReport {
        estimate,
        std_error: null_sd,
        statistic: estimate * (na * (n - na)) as f64 / n as f64,
        p_value: Some((1 + exceed) as f64 / (1 + n_permutations) as f64),
        n_samples: n,
        method: "energy distance permutation test",
    })
}

/// Centers both clouds on their pooled mean and scales each coordinate by
/// its pooled standard deviation, so no coordinate dominates the distances.
pub fn standardize_pooled(a: &SampleCloud, b: &SampleCloud) -> Result<(SampleCloud, SampleCloud)> {
    if a.dim() != b.dim() {
        return Err(VortexError::SizeMismatch { left: a.dim(), right: b.dim() });
    }
    let d = a.dim();
    let n = (a.len() + b.len()) as f64;
    let mut mean = vec![0.0; d];
    for r in a.rows().chain(b.rows()) {
        for k in 0..d {
            mean[k] += r[k] / n;
        }
    }
    let mut var = vec![0.0; d];
    for r in a.rows().chain(b.rows()) {
        for k in 0..d {
            var[k] += (r[k] - mean[k]).powi(2) / (n - 1.0);
        }
    }
    if let Some(k) = var.iter().position(|&v| !(v > 0.0)) {
        return Err(VortexError::Degenerate(format!("coordinate {k} is constant across both clouds")));
    }
    let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let scale = |c: &SampleCloud| {
        c.map_rows(d, |x, o| {
            for k in 0..d {
                o[k] = (x[k] - mean[k]) / sd[k];
            }
        })
    };
    Ok((scale(a)?, scale(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ks_test_uniform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, shift: f64, seed: u64) -> SampleCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .flat_map(|_| {
                let g: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
                [g[0] + shift, g[1]]
            })
            .collect();
        SampleCloud::new(pts, 2).unwrap()
    }

    #[test]
    fn two_point_statistic() {
        let x = SampleCloud::new(vec![0.0, 0.0, 0.0, 0.0], 2).unwrap();
        let y = SampleCloud::new(vec![3.0, 4.0, 3.0, 4.0], 2).unwrap();
        assert!((energy_statistic(&x, &y).unwrap() - 10.0).abs() < 1e-12);
        assert!(energy_statistic(&x, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn permutation_statistic_matches_direct() {
        let (a, b) = (gaussian(150, 0.3, 1), gaussian(120, 0.0, 2));
        let pooled = PooledDistances::new(&a, &b);
        let order: Vec<usize> = (0..270).collect();
        let mut mask = vec![0.0f32; 270];
        mask[..150].fill(1.0);
        let fast = pooled.statistic(&order[..150], &mask);
        let direct = energy_statistic(&a, &b).unwrap();
        assert!((fast - direct).abs() < 1e-4 * direct.abs().max(1e-3), "{fast} vs {direct}");
    }

    #[test]
    fn halves_of_one_batch_do_not_reject() {
        let mut passes = 0;
        for rep in 0..100u64 {
            let c = gaussian(200, 0.0, 100 + rep);
            let a = SampleCloud::new(c.as_flat()[..200].to_vec(), 2).unwrap();
            let b = SampleCloud::new(c.as_flat()[200..].to_vec(), 2).unwrap();
            let r = energy_distance_test(&a, &b, 199, rep).unwrap();
            if r.p_value.unwrap() >= 0.01 {
                passes += 1;
            }
        }
        assert!(passes >= 98, "{passes}/100");
    }

    #[test]
    fn null_p_values_are_uniform() {
        let ps: Vec<f64> = (0..200u64)
            .map(|rep| energy_distance_test(&gaussian(100, 0.0, 2 * rep), &gaussian(100, 0.0, 2 * rep + 1), 999, rep).unwrap().p_value.unwrap())
            .collect();
        let ks = ks_test_uniform(&ps).unwrap();
        assert!(!ks.rejects_at(0.01), "{ks:?}");
    }

    #[test]
    fn detects_unit_shift() {
        let r = energy_distance_test(&gaussian(500, 0.0, 7), &gaussian(500, 1.0, 8), 2000, 3).unwrap();
        assert!(r.p_value.unwrap() < 0.001, "{r:?}");
        assert_eq!(r, energy_distance_test(&gaussian(500, 0.0, 7), &gaussian(500, 1.0, 8), 2000, 3).unwrap());
    }

    #[test]
    fn standardization() {
        let (a, b) = standardize_pooled(&gaussian(300, 5.0, 1), &gaussian(300, 5.0, 2)).unwrap();
        let joined: Vec<f64> = a.column(0).into_iter().chain(b.column(0)).collect();
        let m = joined.iter().sum::<f64>() / 600.0;
        let v = joined.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 599.0;
        assert!(m.abs() < 1e-12 && (v - 1.0).abs() < 1e-12);
        assert!(energy_distance_test(&gaussian(50, 0.0, 1), &gaussian(200, 0.0, 2), 10, 0).is_err());
    }
}
