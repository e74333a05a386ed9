use super::StatReport;
use crate::error::{Result, VortexError};

/// Survival function of the Kolmogorov distribution,
/// `P(K > λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        // the alternating series converges slowly here and the value is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF, with the
/// asymptotic p-value including the usual small-sample correction
/// `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<StatReport> {
    if sample.len() < 2 {
        return Err(VortexError::domain("KS test needs at least 2 values"));
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut stat: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        stat = stat.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    Ok(StatReport {
        estimate: stat,
        std_error: 0.0,
        statistic: stat,
        p_value: Some(kolmogorov_sf((sn + 0.12 + 0.11 / sn) * stat)),
        n_samples: v.len(),
        method: "kolmogorov-smirnov",
    })
}

/// KS test of values against the uniform law on `[0, 1]`.
pub fn ks_test_uniform(values: &[f64]) -> Result<StatReport> {
    ks_test(values, |x| x.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values: P(K > 1.3581) = 0.05, P(K > 1.6276) = 0.01
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert_eq!(kolmogorov_sf(0.0), 1.0);
    }

    #[test]
    fn uniform_sample_passes_and_skewed_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        assert!(!ks_test_uniform(&u).unwrap().rejects_at(0.01));
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_test_uniform(&sq).unwrap().rejects_at(0.001));
    }
}
