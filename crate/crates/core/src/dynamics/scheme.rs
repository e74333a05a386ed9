//! One-step maps.
//!
//! The rescaled family uses a splitting integrator: the linear drift `−z/2`
//! and the noise are advanced with the exact Ornstein–Uhlenbeck transition,
//! the kernel drift explicitly with weight `2(1 − e^{−dt/2})`. With `a = 0`
//! the step is exact in law. The original system uses Euler–Maruyama.

use rand_chacha::ChaCha8Rng;

use super::{SimParams, StateBatch, SystemSpec, Variant};
use crate::error::{Result, VortexError};
use crate::kernel::{k_eps, RegularizationLevel, Vec2};
use crate::scalar::Scalar;

/// Coefficients of the exponential integrator for one step of length `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCoefficients<S> {
    pub dt: S,
    /// `e^{−dt/2}`
    pub decay: S,
    /// `2(1 − e^{−dt/2})`
    pub drift_weight: S,
    /// `√(1 − e^{−dt})`, the standard deviation of `∫ e^{(s−t−dt)/2} dB_s` over the step.
    pub noise_sd: S,
}

impl<S: Scalar> ExpCoefficients<S> {
    pub fn new(dt: S) -> Self {
        let half = dt * S::lit(0.5);
        let one_minus_decay = -(-half).exp_m1();
        Self {
            dt,
            decay: (-half).exp(),
            drift_weight: S::lit(2.0) * one_minus_decay,
            noise_sd: (-(-dt).exp_m1()).sqrt(),
        }
    }
}

/// Kernel drift `D(z)` of every particle.
///
/// For the n-particle variants `D_i = Σ_{j≠i} a_j K_ε(z^i − z^j)`, summed over
/// pairs `i < j` in index order. For a separation `D = ±a K_ε(z)`, and the
/// unsigned `K_ε(z)` is returned as well.
#[inline]
pub fn kernel_drift<S: Scalar>(
    spec: &SystemSpec<S>,
    z: &[Vec2<S>],
    lvl: &RegularizationLevel<S>,
    out: &mut [Vec2<S>],
) -> Option<Vec2<S>> {
    if spec.variant().is_pair_separation() {
        let k = k_eps(z[0], lvl);
        out[0] = k * spec.signed_strength();
        return Some(k);
    }
    let a = spec.a();
    out.iter_mut().for_each(|d| *d = Vec2::zero());
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            let k = k_eps(z[i] - z[j], lvl);
            out[i] += k * a[j];
            out[j] -= k * a[i];
        }
    }
    None
}

/// `z ← e^{−dt/2} z + 2(1 − e^{−dt/2}) D + σ u` with `u` the unit-scale noise increment.
#[inline]
pub fn exp_integrator_step<S: Scalar>(
    z: &mut [Vec2<S>],
    drift: &[Vec2<S>],
    unit_noise: &[Vec2<S>],
    sigma: S,
    c: &ExpCoefficients<S>,
) {
    for ((zi, d), u) in z.iter_mut().zip(drift).zip(unit_noise) {
        *zi = *zi * c.decay + *d * c.drift_weight + *u * sigma;
    }
}

/// `x ← x + dt D + σ u` with `u ~ N(0, dt I)`.
#[inline]
pub fn euler_maruyama_step<S: Scalar>(x: &mut [Vec2<S>], drift: &[Vec2<S>], unit_noise: &[Vec2<S>], sigma: S, dt: S) {
    for ((xi, d), u) in x.iter_mut().zip(drift).zip(unit_noise) {
        *xi += *d * dt + *u * sigma;
    }
}

/// Per-replica integrator state shared by the batch steps and `simulate`.
pub(crate) struct Stepper<'a, S: Scalar> {
    pub spec: &'a SystemSpec<S>,
    pub lvl: RegularizationLevel<S>,
    pub sigma: S,
    pub before: Vec<Vec2<S>>,
    pub drift: Vec<Vec2<S>>,
    pub noise: Vec<Vec2<S>>,
    pub raw_kernel: Option<Vec2<S>>,
}

impl<'a, S: Scalar> Stepper<'a, S> {
    pub fn new(spec: &'a SystemSpec<S>, eps: S) -> Result<Self> {
        let n = spec.n();
        Ok(Self {
            spec,
            lvl: RegularizationLevel::new(eps)?,
            sigma: spec.noise_scale(),
            before: vec![Vec2::zero(); n],
            drift: vec![Vec2::zero(); n],
            noise: vec![Vec2::zero(); n],
            raw_kernel: None,
        })
    }

    /// Advances `z` by one step, keeping the pre-step state, drift and noise
    /// in the scratch buffers for observers.
    #[inline]
    pub fn advance(&mut self, z: &mut [Vec2<S>], rng: &mut ChaCha8Rng, c: &ExpCoefficients<S>) {
        self.before.copy_from_slice(z);
        self.raw_kernel = kernel_drift(self.spec, z, &self.lvl, &mut self.drift);
        if self.spec.variant() == Variant::Original {
            let sd = c.dt.sqrt();
            for u in self.noise.iter_mut() {
                *u = Vec2::new(S::standard_normal(rng), S::standard_normal(rng)) * sd;
            }
            euler_maruyama_step(z, &self.drift, &self.noise, self.sigma, c.dt);
        } else {
            for u in self.noise.iter_mut() {
                *u = Vec2::new(S::standard_normal(rng), S::standard_normal(rng)) * c.noise_sd;
            }
            exp_integrator_step(z, &self.drift, &self.noise, self.sigma, c);
        }
    }
}

fn step_batch<S: Scalar>(batch: &mut StateBatch<S>, spec: &SystemSpec<S>, params: &SimParams<S>) -> Result<()> {
    params.validate()?;
    if batch.n() != spec.n() {
        return Err(VortexError::SizeMismatch { left: batch.n(), right: spec.n() });
    }
    let mut stepper = Stepper::new(spec, params.eps)?;
    let c = ExpCoefficients::new(params.dt);
    let n = batch.n();
    let t_end = batch.time + params.dt;
    for (r, (z, rng)) in batch.states.chunks_mut(n).zip(batch.rngs.iter_mut()).enumerate() {
        stepper.advance(z, rng, &c);
        if z.iter().any(|p| !p.is_finite()) {
            return Err(VortexError::NumericalFailure { replica: r, time: t_end.to_f64_lossy() });
        }
    }
    batch.time = t_end;
    Ok(())
}

/// One exponential-integrator step of every replica of a rescaled-family batch.
pub fn step_rescaled<S: Scalar>(batch: &mut StateBatch<S>, spec: &SystemSpec<S>, params: &SimParams<S>) -> Result<()> {
    if spec.variant() == Variant::Original {
        return Err(VortexError::domain("step_rescaled does not apply to the original system"));
    }
    step_batch(batch, spec, params)
}

/// One Euler–Maruyama step of every replica of an original-system batch.
pub fn step_original<S: Scalar>(batch: &mut StateBatch<S>, spec: &SystemSpec<S>, params: &SimParams<S>) -> Result<()> {
    if spec.variant() != Variant::Original {
        return Err(VortexError::domain("step_original applies only to the original system"));
    }
    step_batch(batch, spec, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Init;
    use approx::assert_relative_eq;

    #[test]
    fn coefficients() {
        let c = ExpCoefficients::new(0.1f64);
        assert_relative_eq!(c.decay, (-0.05f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(c.drift_weight, 2.0 * (1.0 - (-0.05f64).exp()), epsilon = 1e-15);
        assert_relative_eq!(c.noise_sd * c.noise_sd, 1.0 - (-0.1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn zero_noise_ou_step_is_the_linear_flow() {
        let spec = SystemSpec::ou(1.0).unwrap();
        let lvl = RegularizationLevel::new(0.01).unwrap();
        let c = ExpCoefficients::new(1e-3);
        let mut z = [Vec2::new(2.0, 0.0)];
        let mut d = [Vec2::zero()];
        kernel_drift(&spec, &z, &lvl, &mut d);
        exp_integrator_step(&mut z, &d, &[Vec2::zero()], spec.noise_scale(), &c);
        assert_eq!(z[0], Vec2::new(2.0 * (-5e-4f64).exp(), 0.0));
    }

    #[test]
    fn pairwise_drift_matches_direct_sum() {
        let spec = SystemSpec::rescaled(vec![1.0, -2.0, 0.5], 1.0).unwrap();
        let lvl = RegularizationLevel::new(0.01).unwrap();
        let z = [Vec2::new(0.3, 1.0), Vec2::new(-0.5, 0.2), Vec2::new(1.1, -0.7)];
        let mut d = [Vec2::zero(); 3];
        kernel_drift(&spec, &z, &lvl, &mut d);
        for i in 0..3 {
            let mut direct = Vec2::zero();
            for j in 0..3 {
                if i != j {
                    direct += k_eps(z[i] - z[j], &lvl) * spec.a()[j];
                }
            }
            assert!((direct - d[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn one_step_noise_variance() {
        let nu = 0.7;
        let dt = 0.05;
        let spec = SystemSpec::ou(nu).unwrap();
        let params = SimParams::new(1.0, 200_000, 17).with_dt(dt);
        let init = Init::Point(vec![Vec2::zero()]);
        let mut b = StateBatch::initialize(&spec, &init, &params).unwrap();
        step_rescaled(&mut b, &spec, &params).unwrap();
        let m = b.replicas() as f64;
        let var = b.states.iter().map(|z| z.norm2()).sum::<f64>() / (2.0 * m);
        let expected = 4.0 * nu * (1.0 - (-dt).exp());
        // SE of a variance estimate from 2M Gaussian coordinates
        let se = expected * (2.0 / (2.0 * m)).sqrt();
        assert!((var - expected).abs() < 4.0 * se, "{var} vs {expected}");
        assert!(step_original(&mut b, &spec, &params).is_err());
    }

    /// (E[z_dt] − z)/dt → D(z) − z/2, checked by Richardson extrapolation of the
    /// conditional mean, which the scheme gives in closed form.
    #[test]
    fn drift_consistency() {
        let spec = SystemSpec::difference(1.0, 1.0).unwrap();
        let lvl = RegularizationLevel::new(0.01).unwrap();
        let z = [Vec2::new(1.0, 0.0)];
        let mut d = [Vec2::zero()];
        kernel_drift(&spec, &z, &lvl, &mut d);
        let target = d[0] - z[0] * 0.5;
        let quotient = |dt: f64| {
            let c = ExpCoefficients::new(dt);
            let mut next = z;
            exp_integrator_step(&mut next, &d, &[Vec2::zero()], 0.0, &c);
            (next[0] - z[0]) * (1.0 / dt)
        };
        let (q2, q3, q4) = (quotient(1e-2), quotient(1e-3), quotient(1e-4));
        let rich = q4 * (10.0 / 9.0) - q3 * (1.0 / 9.0);
        assert!((q2 - target).norm() > (q3 - target).norm());
        assert!((q3 - target).norm() > (q4 - target).norm());
        assert!((rich - target).norm() < 1e-7, "{:?}", rich - target);

        // Monte Carlo mean of one noisy step agrees with the closed form.
        let params = SimParams::new(1.0, 100_000, 4).with_dt(1e-2);
        let mut b = StateBatch::initialize(&spec, &Init::Point(z.to_vec()), &params).unwrap();
        step_rescaled(&mut b, &spec, &params).unwrap();
        let m = b.replicas() as f64;
        let mean = b.states.iter().fold(Vec2::zero(), |acc, p| acc + *p) * (1.0 / m);
        let se = 2.0 * (1.0 - (-1e-2f64).exp()).sqrt() / m.sqrt();
        let exact = z[0] + quotient(1e-2) * 1e-2;
        assert!((mean.x1 - exact.x1).abs() < 4.0 * se && (mean.x2 - exact.x2).abs() < 4.0 * se);
    }

    #[test]
    fn non_finite_state_is_reported() {
        let spec = SystemSpec::rescaled(vec![1.0, 1.0], 1.0).unwrap();
        let params = SimParams::new(1.0, 2, 1);
        let mut b = StateBatch::from_states(2, vec![Vec2::zero(), Vec2::zero(), Vec2::new(f64::NAN, 0.0), Vec2::zero()], 1)
            .unwrap();
        match step_rescaled(&mut b, &spec, &params) {
            Err(VortexError::NumericalFailure { replica, .. }) => assert_eq!(replica, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
