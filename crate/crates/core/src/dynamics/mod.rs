//! Seeded Monte Carlo integration of the vortex SDE family.
//!
//! Five variants share one engine:
//!
//! | variant      | particles | drift                          | noise per particle |
//! |--------------|-----------|--------------------------------|--------------------|
//! | `Original`   | n         | `Σ_j a_j K_ε(x^i − x^j)`        | `√(2ν) dW`         |
//! | `Rescaled`   | n         | `Σ_j a_j K_ε(z^i − z^j) − z^i/2`| `√(2ν) dB`         |
//! | `Difference` | 1         | `+a K_ε(z) − z/2`               | `2√ν dB`           |
//! | `Reversed`   | 1         | `−a K_ε(z) − z/2`               | `2√ν dB`           |
//! | `Ou`         | 1         | `−z/2`                         | `2√ν dB`           |
//!
//! The one-particle variants describe the separation `Z¹ − Z²` of a vortex
//! pair, with `a = a₁ + a₂`.

mod cir;
mod scheme;
mod simulate;
mod streams;

pub use cir::cir_exact_transition;
pub use scheme::{
    euler_maruyama_step, exp_integrator_step, kernel_drift, step_original, step_rescaled, ExpCoefficients,
};
pub use simulate::{simulate, MinSeparation, PathObserver, SimOutput, SnapshotAcc, Snapshots, StepRecord};
pub use streams::{derive_seed, make_streams, StreamId};

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VortexError};
use crate::kernel::Vec2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Rescaled,
    Difference,
    Reversed,
    Ou,
}

impl Variant {
    /// Whether the variant evolves a single separation vector.
    pub fn is_pair_separation(self) -> bool {
        matches!(self, Variant::Difference | Variant::Reversed | Variant::Ou)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Variant::Original => "original",
            Variant::Rescaled => "rescaled",
            Variant::Difference => "difference",
            Variant::Reversed => "reversed",
            Variant::Ou => "ou",
        };
        f.write_str(s)
    }
}

impl FromStr for Variant {
    type Err = VortexError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" => Ok(Variant::Original),
            "rescaled" => Ok(Variant::Rescaled),
            "difference" => Ok(Variant::Difference),
            "reversed" => Ok(Variant::Reversed),
            "ou" => Ok(Variant::Ou),
            other => Err(VortexError::domain(format!(
                "unknown variant '{other}' (expected original, rescaled, difference, reversed or ou)"
            ))),
        }
    }
}

/// The physical model: vorticities, viscosity and SDE variant.
///
/// For the pair-separation variants `a` holds the single interaction strength
/// `a₁ + a₂` (zero for `Ou`).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec<S> {
    a: Vec<S>,
    nu: S,
    variant: Variant,
}

impl<S: Scalar> SystemSpec<S> {
    pub fn new(variant: Variant, a: Vec<S>, nu: S) -> Result<Self> {
        if !(nu > S::zero()) || !nu.is_finite() {
            return Err(VortexError::domain(format!("viscosity must be positive and finite, got {nu}")));
        }
        if a.is_empty() {
            return Err(VortexError::domain("at least one vortex is required"));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(VortexError::domain("vorticities must be finite"));
        }
        if variant.is_pair_separation() && a.len() != 1 {
            return Err(VortexError::domain(format!(
                "variant {variant} takes one interaction strength a = a1 + a2, got {} values",
                a.len()
            )));
        }
        if variant == Variant::Ou && a[0] != S::zero() {
            return Err(VortexError::domain("the ou variant has no interaction (a = 0)"));
        }
        Ok(Self { a, nu, variant })
    }

    pub fn original(a: Vec<S>, nu: S) -> Result<Self> {
        Self::new(Variant::Original, a, nu)
    }

    pub fn rescaled(a: Vec<S>, nu: S) -> Result<Self> {
        Self::new(Variant::Rescaled, a, nu)
    }

    pub fn difference(a: S, nu: S) -> Result<Self> {
        Self::new(Variant::Difference, vec![a], nu)
    }

    pub fn reversed(a: S, nu: S) -> Result<Self> {
        Self::new(Variant::Reversed, vec![a], nu)
    }

    pub fn ou(nu: S) -> Result<Self> {
        Self::new(Variant::Ou, vec![S::zero()], nu)
    }

    /// Number of simulated planar particles.
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[S] {
        &self.a
    }

    pub fn nu(&self) -> S {
        self.nu
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Diffusion coefficient of each particle: `√(2ν)` or `2√ν`.
    pub fn noise_scale(&self) -> S {
        if self.variant.is_pair_separation() {
            S::lit(2.0) * self.nu.sqrt()
        } else {
            (S::lit(2.0) * self.nu).sqrt()
        }
    }

    /// Per-coordinate variance of the Gaussian stationary law
    /// (`2ν` for the rescaled system, `4ν` for a separation).
    pub fn stationary_variance(&self) -> S {
        let s = self.noise_scale();
        s * s
    }

    /// Signed kernel coefficient of a pair-separation variant.
    pub(crate) fn signed_strength(&self) -> S {
        match self.variant {
            Variant::Difference => self.a[0],
            Variant::Reversed => -self.a[0],
            _ => S::zero(),
        }
    }
}

/// Numerical controls shared by every simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams<S> {
    pub dt: S,
    pub horizon: S,
    pub eps: S,
    pub replicas: usize,
    pub master_seed: u64,
}

impl<S: Scalar> SimParams<S> {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_EPS: f64 = 1e-2;

    /// Defaults `dt = 1e-3`, `eps = 1e-2`.
    pub fn new(horizon: S, replicas: usize, master_seed: u64) -> Self {
        Self { dt: S::lit(Self::DEFAULT_DT), horizon, eps: S::lit(Self::DEFAULT_EPS), replicas, master_seed }
    }

    pub fn with_dt(mut self, dt: S) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_eps(mut self, eps: S) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_horizon(mut self, horizon: S) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > S::zero()) || !self.dt.is_finite() {
            return Err(VortexError::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > S::zero()) || !self.horizon.is_finite() {
            return Err(VortexError::domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dt > self.horizon {
            return Err(VortexError::domain(format!("dt = {} exceeds horizon = {}", self.dt, self.horizon)));
        }
        if !(self.eps > S::zero()) || !self.eps.is_finite() {
            return Err(VortexError::domain(format!("eps must be positive, got {}", self.eps)));
        }
        if self.replicas == 0 {
            return Err(VortexError::domain("replicas must be at least 1"));
        }
        Ok(())
    }

    /// Step lengths covering `[0, horizon]`; the last one absorbs the remainder.
    pub(crate) fn step_count(&self) -> usize {
        let ratio = (self.horizon / self.dt).to_f64_lossy();
        let n = ratio.round();
        if (ratio - n).abs() < 1e-9 * ratio.max(1.0) {
            n as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

/// `M` replicas of an `n`-particle configuration together with their streams.
#[derive(Debug, Clone)]
pub struct StateBatch<S> {
    n: usize,
    pub states: Vec<Vec2<S>>,
    pub time: S,
    pub stream_ids: Vec<StreamId>,
    pub(crate) rngs: Vec<ChaCha8Rng>,
}

impl<S: Scalar> StateBatch<S> {
    /// Fresh batch at time zero with one stream per replica and initial
    /// positions drawn from `init`.
    pub fn initialize<I: InitSampler<S>>(spec: &SystemSpec<S>, init: &I, params: &SimParams<S>) -> Result<Self> {
        params.validate()?;
        init.check(spec)?;
        let n = spec.n();
        let stream_ids = make_streams(params.master_seed, params.replicas);
        let mut rngs: Vec<ChaCha8Rng> = stream_ids.iter().map(StreamId::rng).collect();
        let mut states = vec![Vec2::zero(); n * params.replicas];
        for (z, rng) in states.chunks_mut(n).zip(rngs.iter_mut()) {
            init.sample(spec, rng, z);
        }
        Ok(Self { n, states, time: S::zero(), stream_ids, rngs })
    }

    /// Batch from explicit states; streams start at the given seed.
    pub fn from_states(n: usize, states: Vec<Vec2<S>>, master_seed: u64) -> Result<Self> {
        if n == 0 || !states.len().is_multiple_of(n) {
            return Err(VortexError::SizeMismatch { left: states.len(), right: n });
        }
        let stream_ids = make_streams(master_seed, states.len() / n);
        let rngs = stream_ids.iter().map(StreamId::rng).collect();
        Ok(Self { n, states, time: S::zero(), stream_ids, rngs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn replicas(&self) -> usize {
        self.states.len() / self.n
    }

    pub fn replica(&self, r: usize) -> &[Vec2<S>] {
        &self.states[r * self.n..(r + 1) * self.n]
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, Vec2<S>> {
        self.states.chunks(self.n)
    }
}

/// Draws initial configurations.
pub trait InitSampler<S: Scalar>: Sync {
    /// Rejects samplers whose shape does not fit `spec`.
    fn check(&self, _spec: &SystemSpec<S>) -> Result<()> {
        Ok(())
    }

    fn sample(&self, spec: &SystemSpec<S>, rng: &mut ChaCha8Rng, out: &mut [Vec2<S>]);
}

/// Built-in initial laws.
#[derive(Debug, Clone, PartialEq)]
pub enum Init<S> {
    /// Every replica starts at the same configuration.
    Point(Vec<Vec2<S>>),
    /// Independent `N(mean_i, var·I₂)` per particle.
    Gaussian { mean: Vec<Vec2<S>>, var: S },
    /// `N(0, 2ν I_{2n})` for the n-particle systems, `N(0, 4ν I₂)` for a separation.
    Stationary,
}

impl<S: Scalar> InitSampler<S> for Init<S> {
    fn check(&self, spec: &SystemSpec<S>) -> Result<()> {
        let len = match self {
            Init::Point(p) => p.len(),
            Init::Gaussian { mean, var } => {
                if !(*var >= S::zero()) {
                    return Err(VortexError::domain("initial variance must be non-negative"));
                }
                mean.len()
            }
            Init::Stationary => return Ok(()),
        };
        if len != spec.n() {
            return Err(VortexError::SizeMismatch { left: len, right: spec.n() });
        }
        Ok(())
    }

    fn sample(&self, spec: &SystemSpec<S>, rng: &mut ChaCha8Rng, out: &mut [Vec2<S>]) {
        match self {
            Init::Point(p) => out.copy_from_slice(p),
            Init::Gaussian { mean, var } => {
                let sd = var.sqrt();
                for (z, m) in out.iter_mut().zip(mean) {
                    *z = *m + Vec2::new(S::standard_normal(rng), S::standard_normal(rng)) * sd;
                }
            }
            Init::Stationary => {
                let sd = spec.noise_scale();
                for z in out.iter_mut() {
                    *z = Vec2::new(S::standard_normal(rng), S::standard_normal(rng)) * sd;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(SystemSpec::rescaled(vec![1.0, 1.0], 1.0).is_ok());
        assert!(SystemSpec::rescaled(vec![1.0], 0.0).is_err());
        assert!(SystemSpec::<f64>::rescaled(vec![], 1.0).is_err());
        assert!(SystemSpec::new(Variant::Difference, vec![1.0, 2.0], 1.0).is_err());
        assert!(SystemSpec::new(Variant::Ou, vec![1.0], 1.0).is_err());
        let s = SystemSpec::difference(2.0, 1.0).unwrap();
        assert_eq!(s.noise_scale(), 2.0);
        assert_eq!(s.stationary_variance(), 4.0);
        assert_eq!(SystemSpec::reversed(2.0, 1.0).unwrap().signed_strength(), -2.0);
        let r = SystemSpec::<f64>::rescaled(vec![1.0, 3.0], 2.0).unwrap();
        assert!((r.stationary_variance() - 4.0).abs() < 1e-15);
        assert_eq!("Reversed".parse::<Variant>().unwrap(), Variant::Reversed);
        assert!("sideways".parse::<Variant>().is_err());
    }

    #[test]
    fn params_validation_and_steps() {
        let p = SimParams::<f64>::new(1.0, 10, 0);
        assert_eq!((p.dt, p.eps), (1e-3, 1e-2));
        assert_eq!(p.step_count(), 1000);
        assert_eq!(p.clone().with_dt(0.3).step_count(), 4);
        assert!(p.clone().with_dt(2.0).validate().is_err());
        assert!(p.clone().with_eps(0.0).validate().is_err());
        assert!(p.clone().with_replicas(0).validate().is_err());
        assert_eq!(SimParams::<f64>::new(10.0, 1, 0).step_count(), 10_000);
    }

    #[test]
    fn init_shapes_are_checked() {
        let spec = SystemSpec::rescaled(vec![1.0, 1.0], 1.0).unwrap();
        let params = SimParams::new(1.0, 3, 9);
        let bad = Init::Point(vec![Vec2::new(0.0, 0.0)]);
        assert!(StateBatch::initialize(&spec, &bad, &params).is_err());
        let good = Init::Point(vec![Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)]);
        let b = StateBatch::initialize(&spec, &good, &params).unwrap();
        assert_eq!(b.replicas(), 3);
        assert_eq!(b.replica(2)[1], Vec2::new(-1.0, 0.0));
    }
}
