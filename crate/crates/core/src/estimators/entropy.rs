use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use super::knn::KdTree;
use super::{SampleCloud, StatReport};
use crate::error::{Result, VortexError};

const FOLDS: usize = 10;

/// Per-point Kozachenko–Leonenko contributions; their mean is the entropy estimate.
fn kl_contributions(cloud: &SampleCloud, k: usize) -> Result<Vec<f64>> {
    let n = cloud.len();
    let d = cloud.dim() as f64;
    if k == 0 || k >= n {
        return Err(VortexError::domain(format!("need 1 ≤ k < N, got k = {k}, N = {n}")));
    }
    let tree = KdTree::new(cloud.as_flat(), cloud.dim());
    // ψ(N) − ψ(k) + ln V_d, with V_d the unit-ball volume
    let offset = digamma(n as f64) - digamma(k as f64) + 0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d + 1.0);
    let dist: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let nn = tree.knn_excluding_self(i, k);
            (nn[0], nn[k - 1])
        })
        .collect();
    if let Some(i) = dist.iter().position(|&(nearest, _)| nearest == 0.0) {
        return Err(VortexError::Degenerate(format!("point {i} coincides with another sample point")));
    }
    Ok(dist.into_iter().map(|(_, dk)| offset + 0.5 * d * dk.ln()).collect())
}

fn fold_se(values: &[f64]) -> f64 {
    let size = values.len() / FOLDS;
    let means: Vec<f64> = values.chunks_exact(size).take(FOLDS).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let m = means.iter().sum::<f64>() / FOLDS as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (FOLDS - 1) as f64;
    (var / FOLDS as f64).sqrt()
}

fn check_entropy_args(cloud: &SampleCloud, k: usize) -> Result<()> {
    if cloud.len() < 100 {
        return Err(VortexError::domain(format!("entropy estimation needs N ≥ 100, got {}", cloud.len())));
    }
    if !(3..=20).contains(&k) {
        return Err(VortexError::domain(format!("k must lie in [3, 20], got {k}")));
    }
    Ok(())
}

/// Kozachenko–Leonenko differential entropy with the `k`-th neighbour.
pub fn knn_entropy(cloud: &SampleCloud, k: usize) -> Result<StatReport> {
    check_entropy_args(cloud, k)?;
    let c = kl_contributions(cloud, k)?;
    Ok(StatReport {
        estimate: c.iter().sum::<f64>() / c.len() as f64,
        std_error: fold_se(&c),
        statistic: f64::NAN,
        p_value: None,
        n_samples: cloud.len(),
        method: "kozachenko-leonenko entropy",
    })
}

/// Relative entropy `H(p | N(mean, cov_scale·I))` of the law behind `cloud`.
///
/// The cross-entropy term `−E ln φ(X)` is averaged exactly over the sample
/// and the differential entropy comes from [`knn_entropy`]. The standard
/// error is the spread of 10 contiguous fold means of the per-point terms.
pub fn relative_entropy_vs_gaussian(cloud: &SampleCloud, mean: &[f64], cov_scale: f64, k: usize) -> Result<StatReport> {
    check_entropy_args(cloud, k)?;
    if mean.len() != cloud.dim() {
        return Err(VortexError::SizeMismatch { left: cloud.dim(), right: mean.len() });
    }
    if !(cov_scale > 0.0) || !cov_scale.is_finite() {
        return Err(VortexError::domain(format!("cov_scale must be positive, got {cov_scale}")));
    }
    let h = kl_contributions(cloud, k)?;
    let log_norm = 0.5 * cloud.dim() as f64 * (2.0 * std::f64::consts::PI * cov_scale).ln();
    let terms: Vec<f64> = cloud
        .rows()
        .zip(&h)
        .map(|(x, hi)| {
            let r2: f64 = x.iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum();
            log_norm + r2 / (2.0 * cov_scale) - hi
        })
        .collect();
    Ok(StatReport {
        estimate: terms.iter().sum::<f64>() / terms.len() as f64,
        std_error: fold_se(&terms),
        statistic: f64::NAN,
        p_value: None,
        n_samples: cloud.len(),
        method: "gaussian cross-entropy minus knn entropy",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_cloud(n: usize, mean: [f64; 2], sd: f64, seed: u64) -> SampleCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = (0..n)
            .flat_map(|_| {
                let (g1, g2): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                [mean[0] + sd * g1, mean[1] + sd * g2]
            })
            .collect();
        SampleCloud::new(pts, 2).unwrap()
    }

    #[test]
    fn entropy_of_standard_gaussian() {
        let c = gaussian_cloud(50_000, [0.0, 0.0], 1.0, 1);
        let h = knn_entropy(&c, 5).unwrap();
        // (d/2) ln(2πe)
        let exact = (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((h.estimate - exact).abs() < 3.0 * h.std_error + 0.01, "{h:?} vs {exact}");
    }

    #[test]
    fn self_relative_entropy_is_zero() {
        let nu: f64 = 1.0;
        let c = gaussian_cloud(50_000, [0.0, 0.0], (4.0 * nu).sqrt(), 2);
        let r = relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 4.0 * nu, 5).unwrap();
        assert!(r.estimate.abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn shifted_gaussian() {
        let nu = 1.0;
        let m = [2.0, 0.0];
        let c = gaussian_cloud(50_000, m, 2.0, 3);
        let r = relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 4.0 * nu, 5).unwrap();
        let exact = 4.0 / (8.0 * nu);
        assert!((r.estimate - exact).abs() < 3.0 * r.std_error + 0.05 * exact, "{r:?}");
    }

    #[test]
    fn narrower_gaussian() {
        let nu: f64 = 1.0;
        let c = gaussian_cloud(50_000, [0.0, 0.0], (2.0 * nu).sqrt(), 4);
        let r = relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 4.0 * nu, 5).unwrap();
        let exact = 2f64.ln() - 0.5;
        assert!((r.estimate - exact).abs() < 3.0 * r.std_error + 0.05 * exact, "{r:?} vs {exact}");
    }

    #[test]
    fn rotation_invariance() {
        let c = gaussian_cloud(2_000, [1.0, -0.5], 1.5, 5);
        let (s, co) = (0.7f64.sin(), 0.7f64.cos());
        let rot = |x: &[f64], o: &mut [f64]| {
            o[0] = co * x[0] - s * x[1];
            o[1] = s * x[0] + co * x[1];
        };
        let rc = c.map_rows(2, rot).unwrap();
        let a = relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 2.0, 5).unwrap();
        let b = relative_entropy_vs_gaussian(&rc, &[0.0, 0.0], 2.0, 5).unwrap();
        assert!((a.estimate - b.estimate).abs() < 1e-9);
    }

    #[test]
    fn argument_errors() {
        let c = gaussian_cloud(200, [0.0, 0.0], 1.0, 6);
        assert!(relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 1.0, 2).is_err());
        assert!(relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 1.0, 21).is_err());
        assert!(relative_entropy_vs_gaussian(&c, &[0.0], 1.0, 5).is_err());
        assert!(relative_entropy_vs_gaussian(&c, &[0.0, 0.0], 0.0, 5).is_err());
        let small = gaussian_cloud(50, [0.0, 0.0], 1.0, 6);
        assert!(knn_entropy(&small, 5).is_err());
        let mut pts = c.as_flat().to_vec();
        pts[2] = pts[0];
        pts[3] = pts[1];
        let dup = SampleCloud::new(pts, 2).unwrap();
        assert!(matches!(knn_entropy(&dup, 5), Err(VortexError::Degenerate(_))));
    }
}
