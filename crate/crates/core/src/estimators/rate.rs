use statrs::distribution::{ContinuousCDF, StudentsT};

use super::StatReport;
use crate::error::{Result, VortexError};

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the slope from the residual variance (`n − 2` dof).
    pub slope_se: f64,
    pub residual_sd: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(VortexError::SizeMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(VortexError::domain(format!("a line fit with a standard error needs 3 points, got {n}")));
    }
    let nf = n as f64;
    let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(VortexError::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let residual_sd = (rss / (nf - 2.0)).sqrt();
    Ok(LinearFit { intercept, slope, slope_se: residual_sd / sxx.sqrt(), residual_sd })
}

/// Decay rate of `values` over `times`: minus the least-squares slope of
/// `ln(values)`. The statistic is the slope's t-ratio and the p-value is
/// the two-sided t-test of a zero slope.
pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<StatReport> {
    if times.len() < 4 {
        return Err(VortexError::domain(format!("need at least 4 time points, got {}", times.len())));
    }
    if let Some(v) = values.iter().find(|&&v| !(v > 0.0)) {
        return Err(VortexError::domain(format!("values must be positive, got {v}")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(times, &logs)?;
    let rate = -fit.slope;
    let dof = (times.len() - 2) as f64;
    let (statistic, p_value) = if fit.slope_se > 0.0 {
        let t = rate / fit.slope_se;
        let dist = StudentsT::new(0.0, 1.0, dof).map_err(|e| VortexError::domain(e.to_string()))?;
        (t, 2.0 * dist.sf(t.abs()))
    } else if rate == 0.0 {
        (0.0, 1.0)
    } else {
        (rate.signum() * f64::INFINITY, 0.0)
    };
    Ok(StatReport {
        estimate: rate,
        std_error: fit.slope_se,
        statistic,
        p_value: Some(p_value),
        n_samples: times.len(),
        method: "log-linear rate fit",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_exponential() {
        let t: [f64; 5] = [0.0, 0.5, 1.0, 1.5, 2.0];
        let v: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        let r = fit_exponential_rate(&t, &v).unwrap();
        assert!((r.estimate - 1.0).abs() < 1e-14);
        assert!(r.std_error < 1e-14);
    }

    #[test]
    fn constant_values() {
        let r = fit_exponential_rate(&[0.0, 1.0, 2.0, 3.0], &[2.0; 4]).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert_eq!(r.p_value, Some(1.0));
    }

    #[test]
    fn noisy_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: Vec<f64> = (0..20).map(|k| 0.25 * k as f64).collect();
        let v: Vec<f64> = t.iter().map(|x| (-x).exp() * (1.0 + 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng))).collect();
        let r = fit_exponential_rate(&t, &v).unwrap();
        assert!((r.estimate - 1.0).abs() < 3.0 * r.std_error, "{r:?}");
        assert!(r.p_value.unwrap() < 1e-10);
    }

    #[test]
    fn argument_errors() {
        assert!(fit_exponential_rate(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_exponential_rate(&[0.0, 1.0, 2.0, 3.0], &[1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(fit_exponential_rate(&[0.0, 1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        let fit = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert_eq!((fit.intercept, fit.slope), (1.0, 2.0));
    }
}
