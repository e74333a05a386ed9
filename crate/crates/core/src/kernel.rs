//! Biot–Savart kernel, its smooth regularization and the stationarity-defect
//! functional of the product Gaussian under unequal vorticities.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Result, VortexError};
use crate::scalar::Scalar;

/// A point or vector of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<S> {
    pub x1: S,
    pub x2: S,
}

impl<S: Scalar> Vec2<S> {
    #[inline]
    pub fn new(x1: S, x2: S) -> Self {
        Self { x1, x2 }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero())
    }

    /// Rotation by +π/2: `(x1, x2) ↦ (−x2, x1)`.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.x2, self.x1)
    }

    #[inline]
    pub fn dot(self, other: Self) -> S {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    #[inline]
    pub fn norm2(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    pub fn cast<T: Scalar>(self) -> Vec2<T> {
        Vec2::new(T::lit(self.x1.to_f64_lossy()), T::lit(self.x2.to_f64_lossy()))
    }
}

impl<S: Scalar> Add for Vec2<S> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl<S: Scalar> Sub for Vec2<S> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl<S: Scalar> Mul<S> for Vec2<S> {
    type Output = Self;
    #[inline]
    fn mul(self, k: S) -> Self {
        Self::new(self.x1 * k, self.x2 * k)
    }
}

impl<S: Scalar> Neg for Vec2<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x1, -self.x2)
    }
}

impl<S: Scalar> AddAssign for Vec2<S> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.x1 = self.x1 + rhs.x1;
        self.x2 = self.x2 + rhs.x2;
    }
}

impl<S: Scalar> SubAssign for Vec2<S> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.x1 = self.x1 - rhs.x1;
        self.x2 = self.x2 - rhs.x2;
    }
}

/// Length scale `eps > 0` below which the kernel is smoothed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationLevel<S> {
    eps: S,
    eps2: S,
    half_eps2: S,
}

impl<S: Scalar> RegularizationLevel<S> {
    pub fn new(eps: S) -> Result<Self> {
        if !(eps > S::zero()) || !eps.is_finite() {
            return Err(VortexError::domain(format!("regularization eps must be positive and finite, got {eps}")));
        }
        let half = eps * S::lit(0.5);
        Ok(Self { eps, eps2: eps * eps, half_eps2: half * half })
    }

    #[inline]
    pub fn eps(&self) -> S {
        self.eps
    }
}

/// Exact kernel `z^⊥ / (2π|z|²)`.
pub fn biot_savart<S: Scalar>(z: Vec2<S>) -> Result<Vec2<S>> {
    let r2 = z.norm2();
    if r2 == S::zero() {
        return Err(VortexError::domain("Biot-Savart kernel evaluated at the origin"));
    }
    Ok(exact_unchecked(z, r2))
}

#[inline(always)]
fn exact_unchecked<S: Scalar>(z: Vec2<S>, r2: S) -> Vec2<S> {
    z.perp() * (S::FRAC_1_PI() * S::lit(0.5) / r2)
}

#[inline(always)]
fn smoothstep<S: Scalar>(s: S) -> S {
    // 6s⁵ − 15s⁴ + 10s³
    s * s * s * (s * (s * S::lit(6.0) - S::lit(15.0)) + S::lit(10.0))
}

#[inline(always)]
fn smoothstep_prime<S: Scalar>(s: S) -> S {
    let t = s * (s - S::one());
    S::lit(30.0) * t * t
}

/// Radial profile of the regularized stream function: `1/2` on `[0, 1/2]`,
/// the identity on `[1, ∞)` and a C² monotone quintic blend in between.
pub fn blend_phi<S: Scalar>(r: S) -> S {
    let half = S::lit(0.5);
    if r <= half {
        half
    } else if r >= S::one() {
        r
    } else {
        let s = r + r - S::one();
        half + half * s * smoothstep(s)
    }
}

/// Derivative of [`blend_phi`]; zero on `[0, 1/2]`, one on `[1, ∞)`.
pub fn blend_phi_prime<S: Scalar>(r: S) -> S {
    let half = S::lit(0.5);
    if r <= half {
        S::zero()
    } else if r >= S::one() {
        S::one()
    } else {
        let s = r + r - S::one();
        smoothstep(s) + s * smoothstep_prime(s)
    }
}

/// Regularized kernel `(1/2π) ∇^⊥ ln φ_ε(|z|)`.
///
/// Bit-identical to [`biot_savart`] for `|z| ≥ eps`, zero for `|z| ≤ eps/2`,
/// and bounded by roughly `0.5 / eps` everywhere.
#[inline]
pub fn k_eps<S: Scalar>(z: Vec2<S>, lvl: &RegularizationLevel<S>) -> Vec2<S> {
    let r2 = z.norm2();
    if r2 >= lvl.eps2 {
        return exact_unchecked(z, r2);
    }
    if r2 <= lvl.half_eps2 {
        return Vec2::zero();
    }
    let r = r2.sqrt();
    let u = r / lvl.eps;
    let factor = blend_phi_prime(u) / (lvl.eps * blend_phi(u) * r);
    z.perp() * (factor * S::FRAC_1_PI() * S::lit(0.5))
}

/// `L* p_∞ / p_∞` at `z` for the product Gaussian `N(0, 2ν I)`:
/// `(1/2ν) Σ_{i≠j} a_j K(z^i − z^j) · z^i`.
///
/// Vanishes identically when all vorticities are equal.
pub fn stationarity_defect<S: Scalar>(z: &[Vec2<S>], a: &[S], nu: S) -> Result<S> {
    if z.len() != a.len() {
        return Err(VortexError::SizeMismatch { left: z.len(), right: a.len() });
    }
    if !(nu > S::zero()) {
        return Err(VortexError::domain(format!("viscosity must be positive, got {nu}")));
    }
    let mut acc = S::zero();
    for i in 0..z.len() {
        for j in 0..z.len() {
            if i == j {
                continue;
            }
            let k = biot_savart(z[i] - z[j])
                .map_err(|_| VortexError::domain(format!("positions {i} and {j} coincide")))?;
            acc = acc + a[j] * k.dot(z[i]);
        }
    }
    Ok(acc / (nu + nu))
}
