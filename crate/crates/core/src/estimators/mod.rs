//! Statistical estimators over sample clouds: relative entropy against an
//! isotropic Gaussian, Wasserstein and energy distances, normality tests,
//! exponential-rate fits and histogram total variation.
//!
//! Every randomized estimator takes an explicit seed and draws from
//! per-task streams, so results do not depend on the thread schedule.

mod energy;
mod entropy;
mod knn;
mod ks;
mod normality;
mod rate;
mod tv;
mod wasserstein;

pub use energy::{energy_distance_test, energy_statistic, standardize_pooled};
pub use entropy::{knn_entropy, relative_entropy_vs_gaussian};
pub use ks::{kolmogorov_sf, ks_test, ks_test_uniform};
pub use normality::{mardia_components, mardia_normality, MardiaComponents};
pub use rate::{fit_exponential_rate, linear_fit, LinearFit};
pub use tv::histogram_tv;
pub use wasserstein::{sliced_wasserstein, wasserstein_1d, wasserstein_exact};

use crate::error::{Result, VortexError};
use crate::kernel::Vec2;

/// `N` points of `ℝ^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCloud {
    points: Vec<f64>,
    d: usize,
    seed: Option<u64>,
}

impl SampleCloud {
    /// `points` holds `N` rows of `d` coordinates each; `N ≥ 2` and every
    /// entry finite.
    pub fn new(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(VortexError::domain("cloud dimension must be at least 1"));
        }
        if !points.len().is_multiple_of(d) {
            return Err(VortexError::domain(format!("{} values do not split into rows of {d}", points.len())));
        }
        let n = points.len() / d;
        if n < 2 {
            return Err(VortexError::domain(format!("a cloud needs at least 2 points, got {n}")));
        }
        if let Some(i) = points.iter().position(|x| !x.is_finite()) {
            return Err(VortexError::domain(format!("non-finite entry in row {}", i / d)));
        }
        Ok(Self { points, d, seed: None })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut points = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(VortexError::SizeMismatch { left: d, right: r.len() });
            }
            points.extend_from_slice(r);
        }
        Self::new(points, d)
    }

    /// Cloud in `ℝ^{2m}` from configurations of `m` planar points each.
    pub fn from_configurations<'a, I>(configs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [Vec2<f64>]>,
    {
        let mut points = Vec::new();
        let mut d = None;
        for z in configs {
            match d {
                None => d = Some(2 * z.len()),
                Some(d) if d != 2 * z.len() => return Err(VortexError::SizeMismatch { left: d, right: 2 * z.len() }),
                _ => {}
            }
            points.extend(z.iter().flat_map(|p| [p.x1, p.x2]));
        }
        Self::new(points, d.unwrap_or(0))
    }

    pub fn from_vec2(points: &[Vec2<f64>]) -> Result<Self> {
        Self::new(points.iter().flat_map(|p| [p.x1, p.x2]).collect(), 2)
    }

    /// Records the seed the cloud was generated from.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.points.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Column `k` as a vector.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (acc, x) in m.iter_mut().zip(r) {
                *acc += x;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }

    /// Sample covariance (divisor `N − 1`), row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for a in 0..d {
                let da = r[a] - m[a];
                for b in a..d {
                    c[a * d + b] += da * (r[b] - m[b]);
                }
            }
        }
        let denom = (self.len() - 1) as f64;
        for a in 0..d {
            for b in a..d {
                c[a * d + b] /= denom;
                c[b * d + a] = c[a * d + b];
            }
        }
        c
    }

    /// Applies `f` to every row, producing a cloud of dimension `d_out`.
    pub fn map_rows(&self, d_out: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut out = vec![0.0; self.len() * d_out];
        for (r, o) in self.rows().zip(out.chunks_exact_mut(d_out)) {
            f(r, o);
        }
        let mut cloud = Self::new(out, d_out)?;
        cloud.seed = self.seed;
        Ok(cloud)
    }

    /// Joins two clouds of equal size column-wise.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.len() != other.len() {
            return Err(VortexError::SizeMismatch { left: self.len(), right: other.len() });
        }
        let d = self.d + other.d;
        let mut points = Vec::with_capacity(self.len() * d);
        for (a, b) in self.rows().zip(other.rows()) {
            points.extend_from_slice(a);
            points.extend_from_slice(b);
        }
        Self::new(points, d)
    }
}

/// Outcome of an estimator or test.
#[derive(Debug, Clone, PartialEq)]
pub struct StatReport {
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    /// Present for hypothesis tests only.
    pub p_value: Option<f64>,
    pub n_samples: usize,
    pub method: &'static str,
}

impl StatReport {
    /// Whether a test rejects at `level`; `false` for non-test reports.
    pub fn rejects_at(&self, level: f64) -> bool {
        self.p_value.is_some_and(|p| p < level)
    }
}

/// Sample mean and its standard error.
pub fn mean_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Sample variance (divisor `N − 1`) and its standard error under a
/// fourth-moment plug-in.
pub fn variance_with_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let dev2: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
    let (m2, se_m2) = mean_with_se(&dev2);
    (m2 * n / (n - 1.0), se_m2)
}

/// Median of a non-empty slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
