use rand::Rng;

use crate::error::{Result, VortexError};
use crate::scalar::Scalar;

/// Exact draw of `R_t` given `R_0 = r0` for the squared-radius diffusion
/// `dR = 4√(νR) dβ + (8ν − R) dt`.
///
/// The transition is `c` times a noncentral chi-square with two degrees of
/// freedom, `c = 4ν(1 − e^{−t})`, noncentrality `λ = r0 e^{−t} / c`; it is
/// drawn as the squared norm of a planar Gaussian with mean of norm `√λ`.
pub fn cir_exact_transition<S: Scalar, R: Rng + ?Sized>(r0: S, t: S, nu: S, rng: &mut R) -> Result<S> {
    if !(t > S::zero()) || !t.is_finite() {
        return Err(VortexError::domain(format!("transition time must be positive, got {t}")));
    }
    if !(r0 >= S::zero()) || !r0.is_finite() {
        return Err(VortexError::domain(format!("initial squared radius must be non-negative, got {r0}")));
    }
    if !(nu > S::zero()) {
        return Err(VortexError::domain(format!("viscosity must be positive, got {nu}")));
    }
    let c = S::lit(4.0) * nu * (-(-t).exp_m1());
    let lambda = r0 * (-t).exp() / c;
    let g1 = lambda.sqrt() + S::standard_normal(rng);
    let g2 = S::standard_normal(rng);
    Ok(c * (g1 * g1 + g2 * g2))
}
