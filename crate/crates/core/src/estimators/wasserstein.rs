use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::SampleCloud;
use crate::dynamics::StreamId;
use crate::error::{Result, VortexError};

/// Largest cloud size accepted by [`wasserstein_exact`].
const EXACT_CAP: usize = 2000;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(VortexError::domain(format!("alpha must be a finite real ≥ 1, got {alpha}")));
    }
    Ok(())
}

fn check_pair(a: &SampleCloud, b: &SampleCloud) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(VortexError::SizeMismatch { left: a.dim(), right: b.dim() });
    }
    Ok(())
}

/// Minimum-cost perfect matching on a dense `n × n` cost matrix
/// (shortest augmenting paths with dual potentials, `O(n³)`).
/// Returns `assign[row] = column`.
pub(crate) fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    // 1-based duals; column 0 is the virtual root of each augmenting search
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let costs = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = costs[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    assign
}

/// Empirical `W_α` between two 1D samples of equal size by sorted matching.
pub fn wasserstein_1d(a: &[f64], b: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if a.len() != b.len() {
        return Err(VortexError::SizeMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(VortexError::domain("empty samples"));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let total: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs().powf(alpha)).sum();
    Ok((total / a.len() as f64).powf(alpha.recip()))
}

/// Exact empirical `W_α` between two clouds of equal size `N ≤ 2000`.
///
/// Solves the optimal assignment on `|x − y|^α` costs; in one dimension the
/// sorted matching is optimal and is used directly.
pub fn wasserstein_exact(a: &SampleCloud, b: &SampleCloud, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(a, b)?;
    let n = a.len();
    if n != b.len() {
        return Err(VortexError::SizeMismatch { left: n, right: b.len() });
    }
    if n > EXACT_CAP {
        return Err(VortexError::domain(format!("exact transport is capped at N = {EXACT_CAP}, got {n}")));
    }
    if a.dim() == 1 {
        return wasserstein_1d(a.as_flat(), b.as_flat(), alpha);
    }
    let cost_of = |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        if alpha == 2.0 {
            d2
        } else {
            d2.sqrt().powf(alpha)
        }
    };
    let mut cost = vec![0.0; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let x = a.row(i);
        for (j, c) in row.iter_mut().enumerate() {
            *c = cost_of(x, b.row(j));
        }
    });
    let assign = min_cost_assignment(&cost, n);
    let total: f64 = assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    Ok((total / n as f64).powf(alpha.recip()))
}

/// Sliced `W_α`: the average over `n_projections` random unit directions of
/// the 1D `W_α` between the projected clouds. Direction `p` is drawn from
/// stream `(seed, p)`.
pub fn sliced_wasserstein(a: &SampleCloud, b: &SampleCloud, alpha: f64, n_projections: usize, seed: u64) -> Result<f64> {
    check_alpha(alpha)?;
    check_pair(a, b)?;
    if a.len() != b.len() {
        return Err(VortexError::SizeMismatch { left: a.len(), right: b.len() });
    }
    if n_projections < 16 {
        return Err(VortexError::domain(format!("need at least 16 projections, got {n_projections}")));
    }
    let d = a.dim();
    let values: Vec<Result<f64>> = (0..n_projections)
        .into_par_iter()
        .map(|p| {
            let mut rng = StreamId { seed, index: p as u64 }.rng();
            let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|x| *x /= norm);
            let proj = |c: &SampleCloud| c.rows().map(|r| r.iter().zip(&dir).map(|(x, u)| x * u).sum()).collect::<Vec<f64>>();
            wasserstein_1d(&proj(a), &proj(b), alpha)
        })
        .collect();
    let mut total = 0.0;
    for v in values {
        total += v?;
    }
    Ok(total / n_projections as f64)
}
