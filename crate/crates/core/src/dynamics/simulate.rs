use rayon::prelude::*;

use super::scheme::{ExpCoefficients, Stepper};
use super::{InitSampler, SimParams, StateBatch, SystemSpec};
use crate::error::{Result, VortexError};
use crate::kernel::Vec2;
use crate::scalar::Scalar;

/// Everything an observer may read about one completed step.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a, S> {
    /// Time at the start of the step.
    pub t: S,
    pub dt: S,
    pub before: &'a [Vec2<S>],
    pub after: &'a [Vec2<S>],
    /// Kernel drift evaluated at `before`, as applied by the scheme.
    pub drift: &'a [Vec2<S>],
    /// Unsigned `K_ε(before)` for the pair-separation variants.
    pub raw_kernel: Option<Vec2<S>>,
    /// Unit-scale Brownian increment per particle. For the exponential
    /// integrator this is the exact `∫_t^{t+dt} e^{(s−t−dt)/2} dB_s`; for
    /// Euler–Maruyama it is `B_{t+dt} − B_t`.
    pub unit_noise: &'a [Vec2<S>],
    /// `e^{−dt/2}`
    pub decay: S,
    /// `2(1 − e^{−dt/2})`
    pub drift_weight: S,
}

/// Per-replica path functional, updated after every step.
pub trait PathObserver<S: Scalar>: Sync {
    type Acc: Send;

    fn start(&self, z0: &[Vec2<S>]) -> Self::Acc;

    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>);

    fn finish(&self, _acc: &mut Self::Acc, _z: &[Vec2<S>], _t: S) {}
}

impl<S: Scalar> PathObserver<S> for () {
    type Acc = ();

    fn start(&self, _z0: &[Vec2<S>]) {}

    #[inline]
    fn observe(&self, _acc: &mut (), _step: &StepRecord<'_, S>) {}
}

impl<S: Scalar, A: PathObserver<S>, B: PathObserver<S>> PathObserver<S> for (A, B) {
    type Acc = (A::Acc, B::Acc);

    fn start(&self, z0: &[Vec2<S>]) -> Self::Acc {
        (self.0.start(z0), self.1.start(z0))
    }

    #[inline]
    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>) {
        self.0.observe(&mut acc.0, step);
        self.1.observe(&mut acc.1, step);
    }

    fn finish(&self, acc: &mut Self::Acc, z: &[Vec2<S>], t: S) {
        self.0.finish(&mut acc.0, z, t);
        self.1.finish(&mut acc.1, z, t);
    }
}

impl<S: Scalar, A: PathObserver<S>, B: PathObserver<S>, C: PathObserver<S>> PathObserver<S> for (A, B, C) {
    type Acc = (A::Acc, B::Acc, C::Acc);

    fn start(&self, z0: &[Vec2<S>]) -> Self::Acc {
        (self.0.start(z0), self.1.start(z0), self.2.start(z0))
    }

    #[inline]
    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>) {
        self.0.observe(&mut acc.0, step);
        self.1.observe(&mut acc.1, step);
        self.2.observe(&mut acc.2, step);
    }

    fn finish(&self, acc: &mut Self::Acc, z: &[Vec2<S>], t: S) {
        self.0.finish(&mut acc.0, z, t);
        self.1.finish(&mut acc.1, z, t);
        self.2.finish(&mut acc.2, z, t);
    }
}

/// Records the configuration at the step ends closest to the requested times.
#[derive(Debug, Clone)]
pub struct Snapshots<S> {
    times: Vec<S>,
}

impl<S: Scalar> Snapshots<S> {
    /// `times` must be non-decreasing; a time of zero records the initial state.
    pub fn new(times: Vec<S>) -> Self {
        Self { times }
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }
}

/// Recorded configurations, one per requested time, in request order.
#[derive(Debug, Clone, Default)]
pub struct SnapshotAcc<S> {
    pub frames: Vec<Vec<Vec2<S>>>,
}

impl<S: Scalar> PathObserver<S> for Snapshots<S> {
    type Acc = SnapshotAcc<S>;

    fn start(&self, z0: &[Vec2<S>]) -> Self::Acc {
        let frames = self.times.iter().take_while(|&&t| t <= S::zero()).map(|_| z0.to_vec()).collect();
        SnapshotAcc { frames }
    }

    #[inline]
    fn observe(&self, acc: &mut Self::Acc, step: &StepRecord<'_, S>) {
        let t_end = step.t + step.dt;
        let half = step.dt * S::lit(0.5);
        while let Some(&target) = self.times.get(acc.frames.len()) {
            if target <= t_end + half {
                acc.frames.push(step.after.to_vec());
            } else {
                break;
            }
        }
    }
}

/// Smallest pairwise distance seen along the path (the norm of the
/// separation for the pair-separation variants), checked at every step end.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinSeparation;

fn min_separation<S: Scalar>(z: &[Vec2<S>]) -> S {
    if z.len() == 1 {
        return z[0].norm();
    }
    let mut m2 = S::infinity();
    for i in 0..z.len() {
        for j in (i + 1)..z.len() {
            m2 = m2.min((z[i] - z[j]).norm2());
        }
    }
    m2.sqrt()
}

impl<S: Scalar> PathObserver<S> for MinSeparation {
    type Acc = S;

    fn start(&self, z0: &[Vec2<S>]) -> S {
        min_separation(z0)
    }

    #[inline]
    fn observe(&self, acc: &mut S, step: &StepRecord<'_, S>) {
        *acc = acc.min(min_separation(step.after));
    }
}

/// Final batch plus one observer accumulator per replica, in replica order.
#[derive(Debug, Clone)]
pub struct SimOutput<S, A> {
    pub batch: StateBatch<S>,
    pub observations: Vec<A>,
}

/// Integrates every replica from time zero to `params.horizon`.
///
/// Replicas run data-parallel; each owns its stream, so the output is
/// bit-identical for any number of worker threads. On failure the error names
/// the lowest-indexed failing replica and the time of its first non-finite
/// coordinate.
pub fn simulate<S, I, O>(
    spec: &SystemSpec<S>,
    init: &I,
    params: &SimParams<S>,
    observer: &O,
) -> Result<SimOutput<S, O::Acc>>
where
    S: Scalar,
    I: InitSampler<S>,
    O: PathObserver<S>,
{
    let mut batch = StateBatch::initialize(spec, init, params)?;
    let n = spec.n();
    let steps = params.step_count();
    let full = ExpCoefficients::new(params.dt);
    // validated up front so the workers cannot fail on it
    Stepper::new(spec, params.eps)?;

    let results: Vec<Result<O::Acc>> = batch
        .states
        .par_chunks_mut(n)
        .zip(batch.rngs.par_iter_mut())
        .enumerate()
        .map(|(r, (z, rng))| {
            let mut stepper = Stepper::new(spec, params.eps)?;
            let mut acc = observer.start(z);
            for k in 0..steps {
                let t = S::lit(k as f64) * params.dt;
                let c = if k + 1 == steps {
                    let h = params.horizon - t;
                    if (h - params.dt).abs() <= params.dt * S::lit(1e-9) {
                        full
                    } else {
                        ExpCoefficients::new(h)
                    }
                } else {
                    full
                };
                stepper.advance(z, rng, &c);
                if z.iter().any(|p| !p.is_finite()) {
                    return Err(VortexError::NumericalFailure { replica: r, time: (t + c.dt).to_f64_lossy() });
                }
                let rec = StepRecord {
                    t,
                    dt: c.dt,
                    before: &stepper.before,
                    after: z,
                    drift: &stepper.drift,
                    raw_kernel: stepper.raw_kernel,
                    unit_noise: &stepper.noise,
                    decay: c.decay,
                    drift_weight: c.drift_weight,
                };
                observer.observe(&mut acc, &rec);
            }
            observer.finish(&mut acc, z, params.horizon);
            Ok(acc)
        })
        .collect();

    let mut observations = Vec::with_capacity(results.len());
    for res in results {
        observations.push(res?);
    }
    batch.time = params.horizon;
    Ok(SimOutput { batch, observations })
}
