//! Samplers for the long-time limit of a vortex pair, the time-reversal
//! equality check, the scaling identity and the collision-probability bound.
//!
//! The separation `Z̄` of the reversed pair solves
//! `dZ̄ = 2√ν dB − a K(Z̄) dt − Z̄/2 dt` from a stationary start. Along it the
//! functionals
//!
//! - `drift_int = ∫₀^T e^{−s/2} (Z̄_s/√(4ν) ds − dB_s)`
//! - `kernel_int = ∫₀^T e^{−s/2} K(Z̄_s) ds`
//!
//! are accumulated, and `drift_int` is recovered from the exact identity
//! `2√ν · drift_int = Z̄₀ − e^{−T/2} Z̄_T − a · kernel_int`.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::{
    derive_seed, simulate, Init, MinSeparation, PathObserver, SimParams, StepRecord, StreamId, SystemSpec, Variant,
};
use crate::error::{Result, VortexError};
use crate::estimators::{SampleCloud, StatReport};
use crate::kernel::Vec2;
use crate::observables::FunctionalObserver;

/// One draw of the triplet `(Z̄₀, drift_int, kernel_int)` truncated at `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletSample {
    pub zbar0: Vec2<f64>,
    pub drift_int: Vec2<f64>,
    pub kernel_int: Vec2<f64>,
    pub truncation_t: f64,
}

impl TripletSample {
    pub fn to_array(&self) -> [f64; 6] {
        [self.zbar0.x1, self.zbar0.x2, self.drift_int.x1, self.drift_int.x2, self.kernel_int.x1, self.kernel_int.x2]
    }
}

/// One draw of the two limit vortex positions, a point of `ℝ⁴`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitPairSample {
    pub z1: Vec2<f64>,
    pub z2: Vec2<f64>,
}

impl LimitPairSample {
    pub fn to_array(&self) -> [f64; 4] {
        [self.z1.x1, self.z1.x2, self.z2.x1, self.z2.x2]
    }
}

/// Cloud in `ℝ⁶` of triplets.
pub fn triplet_cloud(samples: &[TripletSample]) -> Result<SampleCloud> {
    SampleCloud::new(samples.iter().flat_map(|s| s.to_array()).collect(), 6)
}

/// Cloud in `ℝ⁴` of vortex pairs.
pub fn pair_cloud(samples: &[LimitPairSample]) -> Result<SampleCloud> {
    SampleCloud::new(samples.iter().flat_map(|s| s.to_array()).collect(), 4)
}

/// Forward-weighted integrals `∫ e^{−s/2} K(Z̄_s) ds` along a separation path;
/// the kernel is frozen over each step and its weight integrated exactly.
#[derive(Debug, Clone, Copy)]
struct ForwardTriplet {
    signed_strength: f64,
    noise_scale: f64,
}

#[derive(Debug, Clone, Copy)]
struct ForwardAcc {
    z0: Vec2<f64>,
    kernel_int: Vec2<f64>,
    drift_int: Vec2<f64>,
}

impl PathObserver<f64> for ForwardTriplet {
    type Acc = ForwardAcc;

    fn start(&self, z0: &[Vec2<f64>]) -> ForwardAcc {
        ForwardAcc { z0: z0[0], kernel_int: Vec2::zero(), drift_int: Vec2::zero() }
    }

    #[inline]
    fn observe(&self, acc: &mut ForwardAcc, step: &StepRecord<'_, f64>) {
        if let Some(k) = step.raw_kernel {
            acc.kernel_int += k * ((-0.5 * step.t).exp() * step.drift_weight);
        }
    }

    fn finish(&self, acc: &mut ForwardAcc, z: &[Vec2<f64>], t: f64) {
        let rest = acc.z0 - z[0] * (-0.5 * t).exp() + acc.kernel_int * self.signed_strength;
        acc.drift_int = rest * self.noise_scale.recip();
    }
}

fn check_truncation(t_trunc: f64) -> Result<()> {
    if !(t_trunc >= 10.0) || !t_trunc.is_finite() {
        return Err(VortexError::domain(format!("truncation time must be at least 10, got {t_trunc}")));
    }
    Ok(())
}

/// Triplets along a stationary-start separation path of `spec` over `[0, horizon]`.
fn forward_triplets(spec: &SystemSpec<f64>, params: &SimParams<f64>, horizon: f64) -> Result<Vec<TripletSample>> {
    let observer = ForwardTriplet { signed_strength: spec.signed_strength(), noise_scale: spec.noise_scale() };
    let params = params.clone().with_horizon(horizon);
    let out = simulate(spec, &Init::Stationary, &params, &observer)?;
    Ok(out
        .observations
        .iter()
        .map(|acc| TripletSample { zbar0: acc.z0, drift_int: acc.drift_int, kernel_int: acc.kernel_int, truncation_t: horizon })
        .collect())
}

/// Draws `params.replicas` triplets of the limit law, truncating both
/// integrals at `t_trunc ≥ 10`. `params.horizon` is ignored.
pub fn sample_mu_inf(nu: f64, a: f64, params: &SimParams<f64>, t_trunc: f64) -> Result<Vec<TripletSample>> {
    check_truncation(t_trunc)?;
    forward_triplets(&SystemSpec::reversed(a, nu)?, params, t_trunc)
}

/// The two limit positions built from one triplet and an independent
/// `G⊥ ~ N(0, νI₂)`:
/// `z1 = Z̄₀/2 + G⊥ + c·kernel_int`, `z2 = −Z̄₀/2 + G⊥ + c·kernel_int`
/// with `c = (a₂ − a₁)/2`.
pub fn assemble_limit_pair(triplet: &TripletSample, g_perp: Vec2<f64>, a1: f64, a2: f64) -> LimitPairSample {
    let common = g_perp + triplet.kernel_int * (0.5 * (a2 - a1));
    let half = triplet.zbar0 * 0.5;
    LimitPairSample { z1: half + common, z2: common - half }
}

/// One configuration per replica.
pub type Configurations = Vec<Vec<Vec2<f64>>>;

/// Limit-law samples with the triplets and Gaussian terms behind them.
pub type LimitParts = (Vec<LimitPairSample>, Vec<TripletSample>, Vec<Vec2<f64>>);

/// Draws `params.replicas` samples of the two-vortex limit law together with
/// the triplets and Gaussian terms they were assembled from.
pub fn sample_limit12_parts(
    a1: f64,
    a2: f64,
    nu: f64,
    params: &SimParams<f64>,
    t_trunc: f64,
) -> Result<LimitParts> {
    if !(nu > 0.0) {
        return Err(VortexError::domain(format!("viscosity must be positive, got {nu}")));
    }
    let triplets = sample_mu_inf(nu, a1 + a2, params, t_trunc)?;
    let gseed = derive_seed(params.master_seed, "limit-pair-gaussian");
    let sd = nu.sqrt();
    let gaussians: Vec<Vec2<f64>> = (0..triplets.len())
        .into_par_iter()
        .map(|r| {
            let mut rng = StreamId { seed: gseed, index: r as u64 }.rng();
            Vec2::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)) * sd
        })
        .collect();
    let pairs = triplets.iter().zip(&gaussians).map(|(t, g)| assemble_limit_pair(t, *g, a1, a2)).collect();
    Ok((pairs, triplets, gaussians))
}

/// Draws `params.replicas` samples of the two-vortex limit law.
pub fn sample_limit12(a1: f64, a2: f64, nu: f64, params: &SimParams<f64>, t_trunc: f64) -> Result<Vec<LimitPairSample>> {
    Ok(sample_limit12_parts(a1, a2, nu, params, t_trunc)?.0)
}

/// Positions `(Z_t¹, Z_t²)` of the rescaled two-vortex system at `t`.
pub fn forward_pair(a1: f64, a2: f64, nu: f64, init: &Init<f64>, params: &SimParams<f64>, t: f64) -> Result<Vec<LimitPairSample>> {
    let spec = SystemSpec::rescaled(vec![a1, a2], nu)?;
    let out = simulate(&spec, init, &params.clone().with_horizon(t), &())?;
    Ok(out.batch.iter().map(|z| LimitPairSample { z1: z[0], z2: z[1] }).collect())
}

/// The two triplet batches whose laws coincide by time reversal.
///
/// `T1` runs the separation with drift `+aK` from a stationary start over a
/// window of length `t/2` and records `(Z, ∫ e^{(s−t)/2} dB_s, ∫ e^{(s−t)/2} K(Z_s) ds)`
/// at its end (stored in the `zbar0`, `drift_int`, `kernel_int` slots).
/// `T2` runs the reversed separation (drift `−aK`) over `[0, t/2]` and records
/// the forward triplet. With `flip_sign`, `T2` keeps the `+aK` drift instead,
/// which breaks the equality for `a ≠ 0`. The sides use disjoint stream
/// families derived from `params.master_seed`.
pub fn time_reversal_pair(
    a: f64,
    nu: f64,
    t: f64,
    params: &SimParams<f64>,
    flip_sign: bool,
) -> Result<(Vec<TripletSample>, Vec<TripletSample>)> {
    if !(t >= 2.0) || !t.is_finite() {
        return Err(VortexError::domain(format!("reversal time must be at least 2, got {t}")));
    }
    let half = 0.5 * t;
    let forward_spec = SystemSpec::difference(a, nu)?;
    let p1 = params.clone().with_seed(derive_seed(params.master_seed, "reversal-forward")).with_horizon(half);
    let observer = FunctionalObserver::new(vec![], nu, params.eps)?;
    let out = simulate(&forward_spec, &Init::Stationary, &p1, &observer)?;
    let t1 = out
        .batch
        .iter()
        .zip(&out.observations)
        .map(|(z, f)| TripletSample { zbar0: z[0], drift_int: f.ib, kernel_int: f.ik, truncation_t: half })
        .collect();

    let backward_spec = if flip_sign { forward_spec } else { SystemSpec::reversed(a, nu)? };
    let p2 = params.clone().with_seed(derive_seed(params.master_seed, "reversal-backward"));
    let t2 = forward_triplets(&backward_spec, &p2, half)?;
    Ok((t1, t2))
}

/// Batches for the scaling identity `Z_t = e^{−t/2} X_{e^t − 1}`: the first
/// is the original system run to `e^t − 1` and rescaled, the second the
/// rescaled system run to `t`. Both start from `init` and use disjoint stream
/// families.
pub fn scaling_pair(
    a: &[f64],
    nu: f64,
    t: f64,
    init: &Init<f64>,
    params: &SimParams<f64>,
) -> Result<(Configurations, Configurations)> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(VortexError::domain(format!("time must be positive, got {t}")));
    }
    let original = SystemSpec::original(a.to_vec(), nu)?;
    let p1 = params.clone().with_seed(derive_seed(params.master_seed, "scaling-original")).with_horizon(t.exp_m1());
    let x = simulate(&original, init, &p1, &())?;
    let shrink = (-0.5 * t).exp();
    let from_original = x.batch.iter().map(|c| c.iter().map(|p| *p * shrink).collect()).collect();

    let rescaled = SystemSpec::rescaled(a.to_vec(), nu)?;
    let p2 = params.clone().with_seed(derive_seed(params.master_seed, "scaling-rescaled")).with_horizon(t);
    let z = simulate(&rescaled, init, &p2, &())?;
    Ok((from_original, z.batch.iter().map(|c| c.to_vec()).collect()))
}

/// Closed-form upper bound on `E[sup_{s ≤ t} R_s²]` for `R = Σ|a_i||Z^i|²`
/// started at `z0`, from Doob's inequality.
pub fn sup_radius_square_bound(z0: &[Vec2<f64>], a: &[f64], nu: f64, t: f64) -> f64 {
    let abar = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let total: f64 = a.iter().map(|x| x.abs()).sum();
    let first: f64 = z0.iter().zip(a).map(|(z, ai)| ai.abs() * (z.norm2() + 4.0 * nu * t)).sum();
    let weighted: f64 = z0.iter().zip(a).map(|(z, ai)| ai.abs() * z.norm2()).sum();
    let second = 32.0 * nu * abar * (weighted * (-(-t).exp_m1()) + 4.0 * nu * total * (t + (-t).exp_m1()));
    2.0 * (first * first + second)
}

/// Right-hand side of the collision-probability bound
/// `P(τ^ε ≤ t) ≤ [Σ_{i≠j} a_i a_j (t/2 − ln|z^i − z^j|) + 2 Σ_i √|a_i| (Σ_{j≠i} |a_j|) E^{1/4}[sup R²]] / [min_{i≠j} a_i a_j ln(1/ε)]`.
pub fn collision_bound(z0: &[Vec2<f64>], a: &[f64], nu: f64, eps: f64, t: f64) -> Result<f64> {
    check_same_sign(a)?;
    if z0.len() != a.len() {
        return Err(VortexError::SizeMismatch { left: z0.len(), right: a.len() });
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(VortexError::domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = a.len();
    let mut log_part = 0.0;
    let mut min_product = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = (z0[i] - z0[j]).norm();
                if d == 0.0 {
                    return Err(VortexError::domain(format!("initial positions {i} and {j} coincide")));
                }
                log_part += a[i] * a[j] * (0.5 * t - d.ln());
                min_product = min_product.min(a[i] * a[j]);
            }
        }
    }
    let total: f64 = a.iter().map(|x| x.abs()).sum();
    let root = sup_radius_square_bound(z0, a, nu, t).powf(0.25);
    let radius_part: f64 = a.iter().map(|ai| 2.0 * ai.abs().sqrt() * (total - ai.abs()) * root).sum();
    Ok((log_part + radius_part) / (min_product * (1.0 / eps).ln()))
}

fn check_same_sign(a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(VortexError::domain("the collision experiment needs at least two vortices"));
    }
    if !(a.iter().all(|&x| x > 0.0) || a.iter().all(|&x| x < 0.0)) {
        return Err(VortexError::domain("the collision bound requires same-sign vorticities"));
    }
    Ok(())
}

/// Empirical collision probability and its bound for one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRow {
    pub eps: f64,
    /// Estimate: fraction of replicas whose minimal pairwise distance drops
    /// to `eps` or below before `t`, with its binomial standard error.
    pub empirical: StatReport,
    pub bound: f64,
}

/// Collision probabilities for every threshold in `eps_list`.
///
/// One simulation of the original-time system, rescaled, serves all
/// thresholds: it runs with regularization `min(eps_list)/10`, so up to each
/// hitting time it coincides with the unregularized dynamics, and the
/// hitting events are nested across thresholds. Distances are monitored at
/// step ends.
pub fn collision_bound_experiment(
    z0: &[Vec2<f64>],
    a: &[f64],
    nu: f64,
    eps_list: &[f64],
    t: f64,
    params: &SimParams<f64>,
) -> Result<Vec<CollisionRow>> {
    check_same_sign(a)?;
    if eps_list.is_empty() {
        return Err(VortexError::domain("no eps values given"));
    }
    let bounds = eps_list.iter().map(|&e| collision_bound(z0, a, nu, e, t)).collect::<Result<Vec<f64>>>()?;
    let eps_min = eps_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let spec = SystemSpec::new(Variant::Rescaled, a.to_vec(), nu)?;
    let p = params.clone().with_horizon(t).with_eps(eps_min / 10.0);
    let out = simulate(&spec, &Init::Point(z0.to_vec()), &p, &MinSeparation)?;
    let m = out.observations.len() as f64;
    Ok(eps_list
        .iter()
        .zip(bounds)
        .map(|(&eps, bound)| {
            let hits = out.observations.iter().filter(|&&d| d <= eps).count() as f64;
            let prob = hits / m;
            CollisionRow {
                eps,
                empirical: StatReport {
                    estimate: prob,
                    std_error: (prob * (1.0 - prob) / m).sqrt(),
                    statistic: hits,
                    p_value: None,
                    n_samples: out.observations.len(),
                    method: "collision frequency",
                },
                bound,
            }
        })
        .collect())
}
