use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{SampleCloud, StatReport};
use crate::error::{Result, VortexError};

/// Mardia's multivariate skewness and kurtosis with their asymptotic tests.
#[derive(Debug, Clone, PartialEq)]
pub struct MardiaComponents {
    /// `b₁ = N⁻² Σ_{ij} (y_i · y_j)³` on whitened data.
    pub skewness: f64,
    /// `b₂ = N⁻¹ Σ_i |y_i|⁴` on whitened data.
    pub kurtosis: f64,
    /// `N b₁ / 6`, chi-square with `d(d+1)(d+2)/6` degrees of freedom.
    pub skew_statistic: f64,
    pub skew_dof: f64,
    /// `(b₂ − d(d+2)) / √(8d(d+2)/N)`, standard normal.
    pub kurt_z: f64,
    pub p_skew: f64,
    pub p_kurt: f64,
    pub n_samples: usize,
}

/// Lower Cholesky factor of a symmetric positive definite `d × d` matrix.
fn cholesky(c: &[f64], d: usize) -> Option<Vec<f64>> {
    let trace: f64 = (0..d).map(|k| c[k * d + k]).sum();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = c[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if !(s > 1e-12 * trace) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Computes both Mardia statistics in `O(N d³)` via the third-moment tensor
/// `M_abc = N⁻¹ Σ_i y_ia y_ib y_ic`, using `b₁ = Σ_abc M_abc²`.
pub fn mardia_components(cloud: &SampleCloud) -> Result<MardiaComponents> {
    let (n, d) = (cloud.len(), cloud.dim());
    if n < 500 {
        return Err(VortexError::domain(format!("Mardia's test needs N ≥ 500, got {n}")));
    }
    if d > 8 {
        return Err(VortexError::domain(format!("Mardia's test supports d ≤ 8, got {d}")));
    }
    let nf = n as f64;
    let mean = cloud.mean();
    // maximum-likelihood covariance (divisor N), as in Mardia's definition
    let mut cov = cloud.covariance();
    cov.iter_mut().for_each(|c| *c *= (nf - 1.0) / nf);
    let l = cholesky(&cov, d).ok_or_else(|| VortexError::Degenerate("sample covariance is singular".into()))?;

    let mut m3 = vec![0.0; d * d * d];
    let mut b2 = 0.0;
    let mut y = vec![0.0; d];
    for row in cloud.rows() {
        // forward substitution: y = L⁻¹ (x − mean)
        for i in 0..d {
            let s: f64 = row[i] - mean[i] - (0..i).map(|k| l[i * d + k] * y[k]).sum::<f64>();
            y[i] = s / l[i * d + i];
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        b2 += r2 * r2;
        for a in 0..d {
            for b in a..d {
                let yab = y[a] * y[b];
                for c in b..d {
                    m3[(a * d + b) * d + c] += yab * y[c];
                }
            }
        }
    }
    b2 /= nf;
    // Σ over all index orderings: weight each sorted triple by its multiplicity
    let mut b1 = 0.0;
    for a in 0..d {
        for b in a..d {
            for c in b..d {
                let m = m3[(a * d + b) * d + c] / nf;
                let mult = match (a == b, b == c) {
                    (true, true) => 1.0,
                    (false, false) => 6.0,
                    _ => 3.0,
                };
                b1 += mult * m * m;
            }
        }
    }
    let df = d as f64;
    let skew_statistic = nf * b1 / 6.0;
    let skew_dof = df * (df + 1.0) * (df + 2.0) / 6.0;
    let kurt_z = (b2 - df * (df + 2.0)) / (8.0 * df * (df + 2.0) / nf).sqrt();
    let chi = ChiSquared::new(skew_dof).map_err(|e| VortexError::domain(e.to_string()))?;
    let normal = Normal::standard();
    Ok(MardiaComponents {
        skewness: b1,
        kurtosis: b2,
        skew_statistic,
        skew_dof,
        kurt_z,
        p_skew: chi.sf(skew_statistic),
        p_kurt: 2.0 * normal.sf(kurt_z.abs()),
        n_samples: n,
    })
}

/// Mardia's normality test. The estimate is the kurtosis `b₂` with its
/// asymptotic standard error, the statistic is the skewness statistic, and
/// the p-value is the Bonferroni combination `min(1, 2 min(p_skew, p_kurt))`.
pub fn mardia_normality(cloud: &SampleCloud) -> Result<StatReport> {
    let m = mardia_components(cloud)?;
    let d = cloud.dim() as f64;
    Ok(StatReport {
        estimate: m.kurtosis,
        std_error: (8.0 * d * (d + 2.0) / m.n_samples as f64).sqrt(),
        statistic: m.skew_statistic,
        p_value: Some((2.0 * m.p_skew.min(m.p_kurt)).min(1.0)),
        n_samples: m.n_samples,
        method: "mardia skewness and kurtosis",
    })
}
