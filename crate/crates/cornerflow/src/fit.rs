//! Least-squares exponential rate of a positive time series.

use crate::error::{Error, Result};

/// Result of [`fit_exponential`]: `value ≈ exp(intercept + rate · t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialFit {
    pub rate: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-linear fit; 1 when the
    /// logarithms are constant.
    pub r_squared: f64,
}

/// Ordinary least squares of `ln(value)` against `t`.
pub fn fit_exponential(series: &[(f64, f64)]) -> Result<ExponentialFit> {
    if series.len() < 4 {
        return Err(Error::TooFewPoints(series.len()));
    }
    if let Some(&(t, value)) = series.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::NonPositive { t, value });
    }
    let n = series.len() as f64;
    let mean_t = series.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = series.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, v) in series {
        let (dt, dy) = (t - mean_t, v.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InvalidParameter(
            "exponential fit needs at least two distinct times".into(),
        ));
    }
    let rate = sty / stt;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sty * sty / (stt * syy)).min(1.0)
    };
    Ok(ExponentialFit {
        rate,
        intercept: mean_y - rate * mean_t,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_series_has_zero_rate() {
        let f = fit_exponential(&[(0.0, 3.0), (1.0, 3.0), (2.0, 3.0), (3.0, 3.0)]).unwrap();
        assert_eq!(f.rate, 0.0);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-15);
        assert_eq!(f.r_squared, 1.0);
    }

    #[test]
    fn exact_exponential() {
        let s: Vec<_> = [0.0f64, 0.5, 1.0, 1.5]
            .iter()
            .map(|&t| (t, (2.0 * t).exp()))
            .collect();
        let f = fit_exponential(&s).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_exponential_within_five_percent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let c = 0.7;
        let s: Vec<_> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, (c * t).exp() * (1.0 + rng.random_range(-0.01..0.01)))
            })
            .collect();
        let f = fit_exponential(&s).unwrap();
        assert!((f.rate - c).abs() < 0.05 * c, "{f:?}");
    }

    #[test]
    fn rejects_bad_series() {
        assert_eq!(
            fit_exponential(&[(0.0, 1.0); 3]),
            Err(Error::TooFewPoints(3))
        );
        let s = [(0.0, 1.0), (1.0, 0.0), (2.0, 1.0), (3.0, 1.0)];
        assert_eq!(
            fit_exponential(&s),
            Err(Error::NonPositive { t: 1.0, value: 0.0 })
        );
        assert!(fit_exponential(&[(1.0, 1.0); 4]).is_err());
    }
}
