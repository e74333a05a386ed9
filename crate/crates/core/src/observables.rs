//! Path functionals and closed-form moment formulas.

use std::f64::consts::PI;

use crate::dynamics::{PathObserver, StepRecord};
use crate::error::{Result, VortexError};
use crate::kernel::{k_eps, RegularizationLevel, Vec2};
use crate::scalar::Scalar;

/// `V(z) = Σ |a_i| |z^i|²`.
pub fn lyapunov<S: Scalar>(z: &[Vec2<S>], a: &[S]) -> S {
    z.iter().zip(a).fold(S::zero(), |acc, (p, ai)| acc + ai.abs() * p.norm2())
}

/// `Σ_{i≠j} a_i a_j ln|z^i − z^j|` over ordered pairs.
pub fn pair_log<S: Scalar>(z: &[Vec2<S>], a: &[S]) -> Result<S> {
    if z.len() != a.len() {
        return Err(VortexError::SizeMismatch { left: z.len(), right: a.len() });
    }
    let mut acc = S::zero();
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            let d2 = (z[i] - z[j]).norm2();
            if d2 == S::zero() {
                return Err(VortexError::domain(format!("positions {i} and {j} coincide")));
            }
            // ln|d| counted for (i, j) and (j, i)
            acc = acc + a[i] * a[j] * d2.ln();
        }
    }
    Ok(acc)
}

/// Drift constant of [`pair_log`] along the exact-kernel dynamics:
/// `−(1/2) Σ_{i≠j} a_i a_j`.
pub fn pair_log_drift<S: Scalar>(a: &[S]) -> S {
    let total: S = a.iter().fold(S::zero(), |acc, &x| acc + x);
    let squares: S = a.iter().fold(S::zero(), |acc, &x| acc + x * x);
    -(total * total - squares) * S::lit(0.5)
}

/// `Σ |a_i| z^i · D_i`: the kernel-drift contribution to `dV/2`. Zero for
/// same-sign vorticities because the kernel is odd and tangential.
pub fn radius_kernel_work<S: Scalar>(z: &[Vec2<S>], drift: &[Vec2<S>], a: &[S]) -> S {
    z.iter().zip(drift).zip(a).fold(S::zero(), |acc, ((p, d), ai)| acc + ai.abs() * p.dot(*d))
}

/// `E[V(Z_t)] = e^{−t} V(z0) + (1 − e^{−t}) 4ν Σ|a_i|` for same-sign vorticities.
pub fn expected_radius<S: Scalar>(z0: &[Vec2<S>], a: &[S], nu: S, t: S) -> S {
    let total: S = a.iter().fold(S::zero(), |acc, x| acc + x.abs());
    let decay = (-t).exp();
    decay * lyapunov(z0, a) + (-(-t).exp_m1()) * S::lit(4.0) * nu * total
}

/// Moments `E|Z_t|^{2k}`, `k = 1..=K`, of a pair separation, from the closed
/// recursion `d m_k = (8ν k² m_{k−1} − k m_k) dt`, `m_0 = 1`.
///
/// `initial[k−1]` holds `E|Z_0|^{2k}`.
pub fn separation_moments(initial: &[f64], nu: f64, t: f64) -> Vec<f64> {
    // m_k(t) = Σ_{j ≤ k} c[k][j] e^{−j t}
    let mut prev = vec![1.0];
    let mut out = Vec::with_capacity(initial.len());
    for (idx, &m0) in initial.iter().enumerate() {
        let k = idx + 1;
        let mut coeffs = vec![0.0; k + 1];
        for (j, &c) in prev.iter().enumerate() {
            coeffs[j] = 8.0 * nu * (k * k) as f64 * c / (k - j) as f64;
        }
        coeffs[k] = m0 - coeffs[..k].iter().sum::<f64>();
        out.push(coeffs.iter().enumerate().map(|(j, c)| c * (-(j as f64) * t).exp()).sum());
        prev = coeffs;
    }
    out
}

/// Per-replica path functionals.
///
/// `ib` and `ik` are the backward-weighted integrals `∫₀ᵗ e^{(s−t)/2} dB_s`
/// and `∫₀ᵗ e^{(s−t)/2} K(Z_s) ds` of the separation coordinate; `zeta` and
/// `xi` are `2√ν · ib` and `ik`. `r` and `m` are the Lyapunov value and the
/// pairwise log-interaction of the configuration at the end of the path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FunctionalSample<S> {
    pub r: S,
    pub m: S,
    pub ib: Vec2<S>,
    pub ik: Vec2<S>,
    pub zeta: Vec2<S>,
    pub xi: Vec2<S>,
}

/// Inputs of one exponential-integral update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpIncrements<S> {
    /// `∫ e^{(s−t−dt)/2} dB_s` over the step: the same draw the scheme used.
    pub noise: Vec2<S>,
    /// Kernel value at the start of the step.
    pub kernel: Vec2<S>,
}

/// `I ← e^{−dt/2} I + increment` for both integrals; the kernel increment is
/// weighted by `2(1 − e^{−dt/2})`.
pub fn update_exp_integrals<S: Scalar>(f: &mut FunctionalSample<S>, inc: &ExpIncrements<S>, dt: S, noise_scale: S) {
    let half = dt * S::lit(0.5);
    update_exp_integrals_with(f, inc, (-half).exp(), S::lit(-2.0) * (-half).exp_m1(), noise_scale);
}

#[inline]
pub(crate) fn update_exp_integrals_with<S: Scalar>(
    f: &mut FunctionalSample<S>,
    inc: &ExpIncrements<S>,
    decay: S,
    weight: S,
    noise_scale: S,
) {
    f.ib = f.ib * decay + inc.noise;
    f.ik = f.ik * decay + inc.kernel * weight;
    f.zeta = f.ib * noise_scale;
    f.xi = f.ik;
}

/// Accumulates a [`FunctionalSample`] along rescaled-family paths.
///
/// For a pair-separation variant the separation is the particle itself; for
/// an n-particle system it is `z¹ − z²`, driven by `(B¹ − B²)/√2`.
#[derive(Debug, Clone)]
pub struct FunctionalObserver<S> {
    a: Vec<S>,
    noise_scale: S,
    lvl: RegularizationLevel<S>,
}

impl<S: Scalar> FunctionalObserver<S> {
    /// `a` are the vorticities used for `r` and `m` (for a separation, pass
    /// the pair `(a1, a2)` or leave empty).
    pub fn new(a: Vec<S>, nu: S, eps: S) -> Result<Self> {
        Ok(Self { a, noise_scale: S::lit(2.0) * nu.sqrt(), lvl: RegularizationLevel::new(eps)? })
    }
}

impl<S: Scalar> PathObserver<S> for FunctionalObserver<S> {
    type Acc = FunctionalSample<S>;

    fn start(&self, _z0: &[Vec2<S>]) -> Self::Acc {
        FunctionalSample::default()
    }

    #[inline]
    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>) {
        let inc = match step.raw_kernel {
            Some(k) => ExpIncrements { noise: step.unit_noise[0], kernel: k },
            None => ExpIncrements {
                noise: (step.unit_noise[0] - step.unit_noise[1]) * S::FRAC_1_SQRT_2(),
                kernel: k_eps(step.before[0] - step.before[1], &self.lvl),
            },
        };
        update_exp_integrals_with(acc, &inc, step.decay, step.drift_weight, self.noise_scale);
    }

    fn finish(&self, acc: &mut Self::Acc, z: &[Vec2<S>], _t: S) {
        if self.a.len() == z.len() {
            acc.r = lyapunov(z, &self.a);
            acc.m = pair_log(z, &self.a).unwrap_or(S::neg_infinity());
        }
    }
}

/// Left-point accumulation of `∫₀ᵗ e^{−s/2}/|ζ_s| ds` and `∫₀ᵗ ds/|ζ_s|`
/// for a pair separation `ζ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InverseRadius;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InverseRadiusAcc<S> {
    pub weighted: S,
    pub plain: S,
}

impl<S: Scalar> PathObserver<S> for InverseRadius {
    type Acc = InverseRadiusAcc<S>;

    fn start(&self, _z0: &[Vec2<S>]) -> Self::Acc {
        InverseRadiusAcc { weighted: S::zero(), plain: S::zero() }
    }

    #[inline]
    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>) {
        let inv = step.before[0].norm().recip();
        acc.plain = acc.plain + inv * step.dt;
        // exact weight ∫_t^{t+dt} e^{−s/2} ds
        let w = (-step.t * S::lit(0.5)).exp() * step.drift_weight;
        acc.weighted = acc.weighted + inv * w;
    }
}

/// One stationary draw of the separation and its two functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSample {
    pub z: Vec2<f64>,
    pub zeta: Vec2<f64>,
    pub xi: Vec2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedEstimate {
    pub name: &'static str,
    pub estimate: f64,
    pub std_error: f64,
}

/// Residuals of the stationary generator identities `E[Lf] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub residuals: Vec<NamedEstimate>,
    /// Sample correlations `corr(ζ₁, Z₁)` and `corr(ζ₁, Z₂)`.
    pub correlations: (f64, f64),
    pub n_samples: usize,
}

impl MomentReport {
    pub fn get(&self, name: &str) -> Option<&NamedEstimate> {
        self.residuals.iter().find(|r| r.name == name)
    }
}

fn mean_and_se(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Stationary moment identities from draws of `(Z, ζ, ξ)` at a large time.
///
/// Always reports
/// - `r1 = 4ν − E[Z₁ζ₁] − (a/2π) E[Z₂ζ₁/|Z|²]`
/// - `r2 = −E[ζ₁Z₂] + (a/2π) E[ζ₁Z₁/|Z|²]`
///
/// and for `a = 0` additionally
/// - `cov_z2_xi1 = E[ξ₁Z₂]` (target `−1/4π`), `r3 = E[ξ₁Z₂] + 1/4π`
/// - `r4 = 4ν E[ξ₁²] − 2(4ν E[ξ₁²] + 2 E[ξ₁Z₂]²) − (3/4π) E[ξ₁Z₂]`
///
/// Standard errors are plain sample SEs, except `r4` (nonlinear in the
/// means), whose SE comes from 20 contiguous batches.
pub fn moment_identity_residuals(samples: &[MomentSample], a: f64, nu: f64) -> Result<MomentReport> {
    if samples.len() < 20 {
        return Err(VortexError::Degenerate(format!("need at least 20 samples, got {}", samples.len())));
    }
    let floor = 10.0 * f64::EPSILON;
    if let Some(i) = samples.iter().position(|s| s.z.norm() < floor) {
        return Err(VortexError::Degenerate(format!("sample {i} has |Z| below {floor:e}")));
    }
    let c = a / (2.0 * PI);
    let four_nu = 4.0 * nu;
    let mut residuals = Vec::new();

    let (e, se) = mean_and_se(samples.iter().map(|s| {
        four_nu - s.z.x1 * s.zeta.x1 - c * s.z.x2 * s.zeta.x1 / s.z.norm2()
    }));
    residuals.push(NamedEstimate { name: "r1", estimate: e, std_error: se });
    let (e, se) = mean_and_se(samples.iter().map(|s| -s.zeta.x1 * s.z.x2 + c * s.zeta.x1 * s.z.x1 / s.z.norm2()));
    residuals.push(NamedEstimate { name: "r2", estimate: e, std_error: se });

    if a == 0.0 {
        let (cov, se) = mean_and_se(samples.iter().map(|s| s.xi.x1 * s.z.x2));
        residuals.push(NamedEstimate { name: "cov_z2_xi1", estimate: cov, std_error: se });
        residuals.push(NamedEstimate { name: "r3", estimate: cov + 1.0 / (4.0 * PI), std_error: se });

        let r4 = |chunk: &[MomentSample]| {
            let n = chunk.len() as f64;
            let var_xi = chunk.iter().map(|s| s.xi.x1 * s.xi.x1).sum::<f64>() / n;
            let cov = chunk.iter().map(|s| s.xi.x1 * s.z.x2).sum::<f64>() / n;
            four_nu * var_xi - 2.0 * (four_nu * var_xi + 2.0 * cov * cov) - 3.0 / (4.0 * PI) * cov
        };
        let batches = 20;
        let size = samples.len() / batches;
        let (_, batch_se) = mean_and_se(samples.chunks_exact(size).take(batches).map(r4));
        residuals.push(NamedEstimate { name: "r4", estimate: r4(samples), std_error: batch_se });
    }

    let zeta1: Vec<f64> = samples.iter().map(|s| s.zeta.x1).collect();
    let z1: Vec<f64> = samples.iter().map(|s| s.z.x1).collect();
    let z2: Vec<f64> = samples.iter().map(|s| s.z.x2).collect();
    Ok(MomentReport {
        residuals,
        correlations: (correlation(&zeta1, &z1), correlation(&zeta1, &z2)),
        n_samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{kernel_drift, simulate, Init, SimParams, Snapshots, SystemSpec};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x1: f64, x2: f64) -> Vec2<f64> {
        Vec2::new(x1, x2)
    }

    #[test]
    fn lyapunov_values() {
        assert_eq!(lyapunov(&[v(0.0, 0.0), v(0.0, 0.0)], &[1.0, 2.0]), 0.0);
        assert_eq!(lyapunov(&[v(1.0, 0.0), v(0.0, 1.0)], &[1.0, 2.0]), 3.0);
        assert_eq!(lyapunov(&[v(1.0, 0.0), v(0.0, 1.0)], &[-1.0, -2.0]), 3.0);
    }

    /// Central-difference generator ν Δf − (z/2)·∇f + Σ_i D_i·∇_{z^i} f with the exact kernel.
    fn generator_fd(f: &dyn Fn(&[Vec2<f64>]) -> f64, z: &[Vec2<f64>], a: &[f64], nu: f64, h: f64) -> f64 {
        let spec = SystemSpec::rescaled(a.to_vec(), nu).unwrap();
        let lvl = RegularizationLevel::new(1e-12).unwrap();
        let mut d = vec![Vec2::zero(); z.len()];
        kernel_drift(&spec, z, &lvl, &mut d);
        let f0 = f(z);
        let mut out = 0.0;
        for i in 0..z.len() {
            for axis in 0..2 {
                let e = if axis == 0 { v(h, 0.0) } else { v(0.0, h) };
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[i] += e;
                zm[i] -= e;
                let (fp, fm) = (f(&zp), f(&zm));
                let grad = (fp - fm) / (2.0 * h);
                let lap = (fp - 2.0 * f0 + fm) / (h * h);
                let (zc, dc) = if axis == 0 { (z[i].x1, d[i].x1) } else { (z[i].x2, d[i].x2) };
                out += nu * lap + (dc - zc / 2.0) * grad;
            }
        }
        out
    }

    #[test]
    fn generator_of_lyapunov() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..3.0)).collect();
            let z: Vec<_> = (0..4).map(|_| v(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            let nu = rng.random_range(0.3..2.0);
            let f = |x: &[Vec2<f64>]| lyapunov(x, &a);
            let lv = generator_fd(&f, &z, &a, nu, 1e-4);
            let expected = 4.0 * nu * a.iter().sum::<f64>() - lyapunov(&z, &a);
            assert!((lv - expected).abs() < 1e-5 * (1.0 + expected.abs()), "{lv} vs {expected}");
        }
    }

    #[test]
    fn generator_of_pair_log_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..2.0)).collect();
            let z: Vec<_> = (0..3).map(|_| v(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))).collect();
            if (0..3).any(|i| (0..i).any(|j| (z[i] - z[j]).norm() < 0.3)) {
                continue;
            }
            let f = |x: &[Vec2<f64>]| pair_log(x, &a).unwrap();
            let lm = generator_fd(&f, &z, &a, 1.0, 1e-4);
            assert!((lm - pair_log_drift(&a)).abs() < 1e-4, "{lm}");
        }
    }

    #[test]
    fn pair_log_values() {
        assert_eq!(pair_log(&[v(0.0, 0.0), v(1.0, 0.0)], &[1.0, 1.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(pair_log(&[v(0.0, 0.0), v(0.0, e)], &[1.0, 3.0]).unwrap(), 6.0, epsilon = 1e-14);
        assert!(pair_log(&[v(1.0, 0.0), v(1.0, 0.0)], &[1.0, 3.0]).is_err());
        assert_eq!(pair_log_drift(&[1.0, 1.0]), -1.0);
        assert_eq!(pair_log_drift(&[1.0, 2.0, 3.0]), -11.0);
    }

    #[test]
    fn expected_radius_values() {
        let z0 = [v(1.0, 0.0), v(0.0, 1.0)];
        let a = [1.0, 1.0];
        assert_eq!(expected_radius(&z0, &a, 1.0, 0.0), lyapunov(&z0, &a));
        assert_relative_eq!(expected_radius(&z0, &a, 1.0, 2f64.ln()), 5.0, epsilon = 1e-14);
        let far = expected_radius(&z0, &a, 0.7, 50.0);
        assert_relative_eq!(far, 4.0 * 0.7 * 2.0, max_relative = 1e-15);
    }

    #[test]
    fn separation_moment_recursion() {
        // k = 1: e^{−t} m0 + 8ν(1 − e^{−t})
        let t = 0.8;
        let m = separation_moments(&[3.0, 20.0], 0.5, t);
        assert_relative_eq!(m[0], 3.0 * (-t).exp() + 4.0 * (1.0 - (-t).exp()), epsilon = 1e-14);
        // stationary Gaussian N(0, 4νI): E|Z|² = 8ν, E|Z|⁴ = 2(8ν)² stay fixed
        let nu = 1.3;
        let stat = [8.0 * nu, 2.0 * 64.0 * nu * nu, 6.0 * 512.0 * nu * nu * nu];
        for t in [0.1, 1.0, 7.0] {
            let m = separation_moments(&stat, nu, t);
            for (x, y) in m.iter().zip(&stat) {
                assert_relative_eq!(x, y, max_relative = 1e-12);
            }
        }
        // RK4 on the triangular ODE as an independent check
        let nu = 0.9;
        let init = [1.0, 4.0, 10.0];
        let rhs = |m: &[f64; 3]| {
            let mut d = [0.0; 3];
            let mut prev = 1.0;
            for k in 0..3 {
                let kk = (k + 1) as f64;
                d[k] = 8.0 * nu * kk * kk * prev - kk * m[k];
                prev = m[k];
            }
            d
        };
        let mut m = init;
        let h = 1e-3;
        for _ in 0..2000 {
            let k1 = rhs(&m);
            let mk = |k: &[f64; 3], s: f64| [m[0] + s * k[0], m[1] + s * k[1], m[2] + s * k[2]];
            let k2 = rhs(&mk(&k1, h / 2.0));
            let k3 = rhs(&mk(&k2, h / 2.0));
            let k4 = rhs(&mk(&k3, h));
            for i in 0..3 {
                m[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        let closed = separation_moments(&init, nu, 2.0);
        for i in 0..3 {
            assert_relative_eq!(closed[i], m[i], max_relative = 1e-9);
        }
    }

    #[test]
    fn exp_integrals_decay_without_input() {
        let mut f = FunctionalSample { ib: v(1.0, -2.0), ik: v(0.5, 0.5), ..Default::default() };
        let zero = ExpIncrements { noise: Vec2::zero(), kernel: Vec2::zero() };
        for _ in 0..10 {
            update_exp_integrals(&mut f, &zero, 0.1, 2.0);
        }
        let d = (-0.5f64).exp();
        assert_relative_eq!(f.ib.x1, d, max_relative = 1e-13);
        assert_relative_eq!(f.ik.x2, 0.5 * d, max_relative = 1e-13);
        assert_relative_eq!(f.zeta.x2, -4.0 * d, max_relative = 1e-13);
    }

    #[test]
    fn zeta_law_on_ou_paths() {
        let nu = 1.0;
        let t = 1.5;
        let spec = SystemSpec::ou(nu).unwrap();
        let params = SimParams::new(t, 20_000, 21).with_dt(1e-2);
        let obs = FunctionalObserver::new(vec![], nu, 0.01).unwrap();
        let out = simulate(&spec, &Init::Point(vec![v(1.0, 1.0)]), &params, &obs).unwrap();
        let m = out.observations.len() as f64;
        let var = 4.0 * nu * (1.0 - (-t).exp());
        for pick in [|f: &FunctionalSample<f64>| f.zeta.x1, |f: &FunctionalSample<f64>| f.zeta.x2] {
            let s2 = out.observations.iter().map(|f| pick(f).powi(2)).sum::<f64>() / m;
            assert!((s2 - var).abs() < 4.0 * var * (2.0 / m).sqrt(), "{s2} vs {var}");
        }
        let cross = out.observations.iter().map(|f| f.zeta.x1 * f.zeta.x2).sum::<f64>() / m;
        assert!(cross.abs() < 4.0 * var / m.sqrt());
    }

    #[test]
    fn reconstruction_along_difference_paths() {
        let nu = 0.8;
        let a = 2.5;
        let t = 3.0;
        let spec = SystemSpec::difference(a, nu).unwrap();
        let params = SimParams::new(t, 200, 5);
        let z0 = v(0.7, -0.2);
        let obs = FunctionalObserver::new(vec![], nu, params.eps).unwrap();
        let out = simulate(&spec, &Init::Point(vec![z0]), &params, &obs).unwrap();
        for (z, f) in out.batch.iter().zip(&out.observations) {
            let resid = z[0] - z0 * (-t / 2.0f64).exp() - f.ik * a - f.zeta;
            assert!(resid.norm() < 1e-10, "{resid:?}");
        }
    }

    #[test]
    fn kernel_work_vanishes_for_same_sign() {
        let spec = SystemSpec::rescaled(vec![1.0, 2.0, 0.5], 1.0).unwrap();
        let lvl = RegularizationLevel::new(0.01).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let z: Vec<_> = (0..3).map(|_| v(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let mut d = vec![Vec2::zero(); 3];
            kernel_drift(&spec, &z, &lvl, &mut d);
            let w = radius_kernel_work(&z, &d, spec.a());
            let scale: f64 = d.iter().map(|x| x.norm()).sum::<f64>() + 1.0;
            assert!(w.abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn mean_radius_tracks_closed_form() {
        let a = vec![1.0, 0.5];
        let nu = 0.6;
        let z0 = vec![v(1.0, 0.5), v(-1.0, 0.0)];
        let spec = SystemSpec::rescaled(a.clone(), nu).unwrap();
        let times = vec![0.5, 1.0, 2.0];
        let params = SimParams::new(2.0, 4000, 77).with_dt(5e-3);
        let out = simulate(&spec, &Init::Point(z0.clone()), &params, &Snapshots::new(times.clone())).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let rs: Vec<f64> = out.observations.iter().map(|s| lyapunov(&s.frames[k], &a)).collect();
            let (mean, se) = mean_and_se(rs.into_iter());
            let expected = expected_radius(&z0, &a, nu, t);
            assert!((mean - expected).abs() < 4.0 * se, "t={t}: {mean} vs {expected} (se {se})");
        }
    }

    #[test]
    fn second_moment_ode_for_difference_process() {
        let nu = 1.0;
        let spec = SystemSpec::difference(2.0, nu).unwrap();
        let times = vec![0.5, 1.0, 2.0, 5.0];
        let params = SimParams::new(5.0, 4000, 31).with_dt(5e-3);
        let z0 = v(0.5, 0.0);
        let out = simulate(&spec, &Init::Point(vec![z0]), &params, &Snapshots::new(times.clone())).unwrap();
        for (k, &t) in times.iter().enumerate() {
            let (mean, se) = mean_and_se(out.observations.iter().map(|s| s.frames[k][0].norm2()));
            let expected = separation_moments(&[z0.norm2()], nu, t)[0];
            assert!((mean - expected).abs() < 4.0 * se, "t={t}: {mean} vs {expected}");
        }
    }

    #[test]
    fn synthetic_a0_samples_satisfy_r1() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let nu: f64 = 1.0;
        let sd = (4.0 * nu).sqrt();
        let samples: Vec<MomentSample> = (0..50_000)
            .map(|_| {
                let z = v(rng.sample::<f64, _>(rand_distr::StandardNormal) * sd, rng.sample::<f64, _>(rand_distr::StandardNormal) * sd);
                let xi = v(rng.sample::<f64, _>(rand_distr::StandardNormal), rng.sample::<f64, _>(rand_distr::StandardNormal));
                MomentSample { z, zeta: z, xi }
            })
            .collect();
        let rep = moment_identity_residuals(&samples, 0.0, nu).unwrap();
        let r1 = rep.get("r1").unwrap();
        assert!(r1.estimate.abs() < 4.0 * r1.std_error, "{r1:?}");
        assert!((rep.correlations.0 - 1.0).abs() < 1e-12);
        assert!(rep.correlations.1.abs() < 0.02);
        assert!(rep.get("r4").is_some());

        let mut bad = samples[..100].to_vec();
        bad[3].z = Vec2::zero();
        assert!(matches!(moment_identity_residuals(&bad, 0.0, nu), Err(VortexError::Degenerate(_))));
    }
}
