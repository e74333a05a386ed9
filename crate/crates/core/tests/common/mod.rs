//! Closed forms shared by the integration tests.

/// Exponential integral `E₁(x) = ∫_x^∞ e^{−u}/u du` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0);
    if x <= 1.0 {
        // power series E₁(x) = −γ − ln x − Σ (−x)^k / (k·k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            sum += term / k as f64;
        }
        -0.577_215_664_901_532_9 - x.ln() - sum
    } else {
        // continued fraction, evaluated bottom-up
        let mut f = 0.0;
        for k in (1..80).rev() {
            let k = k as f64;
            f = k / (1.0 + k / (x + f));
        }
        (-x).exp() / (x + f)
    }
}

/// `E[ln|X|²]` for `X ~ N(μ, σ²I₂)`.
pub fn mean_log_norm2(mu_norm2: f64, sigma2: f64) -> f64 {
    mu_norm2.ln() + exp_integral_e1(mu_norm2 / (2.0 * sigma2))
}

/// `E[pair_log]` at time `t` for two unit vortices started `d0` apart in the
/// rescaled system. The kernel only rotates the separation, so its norm is
/// that of a planar Ornstein–Uhlenbeck process with noise `2√ν`.
pub fn equal_pair_log_mean(d0: f64, nu: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 2.0 * d0.ln();
    }
    mean_log_norm2(d0 * d0 * (-t).exp(), 4.0 * nu * (1.0 - (-t).exp()))
}
