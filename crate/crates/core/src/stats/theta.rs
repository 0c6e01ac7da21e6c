//! Classic Theta method (theta = 2) in its SES-with-drift form:
//!
//! `F(h) = l_n + (b / 2) * (h - 1 + 1/alpha - (1 - alpha)^n / alpha)`
//!
//! where `l_n` is the final SES level (initialised at the first observation)
//! and `b` the OLS slope of the series on `1..n`. This equals the average of
//! the extrapolated regression line and SES applied to `2y - line`.

use super::{aicc, check, FittedStatModel, StatKind, StatsError, ALPHA_MAX, ALPHA_MIN};
use crate::optim::golden_section;

/// One-step SSE and final level of SES with `l_1 = y_1`.
pub fn ses(y: &[f64], alpha: f64) -> (f64, f64) {
    let mut level = y[0];
    let mut sse = 0.0;
    for &x in &y[1..] {
        let e = x - level;
        sse += e * e;
        level += alpha * e;
    }
    (sse, level)
}

pub fn optimal_alpha(y: &[f64]) -> f64 {
    golden_section(|a| ses(y, a).0, ALPHA_MIN, ALPHA_MAX, 1e-8).0
}

/// `(intercept, slope)` of the least-squares line through `(t, y_t)`, `t = 1..n`.
pub fn ols_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let tbar = (n + 1.0) / 2.0;
    let ybar = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dt = (i + 1) as f64 - tbar;
        sxy += dt * (v - ybar);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (ybar - slope * tbar, slope)
}

/// Forecast with a given smoothing parameter.
pub fn theta_with_alpha(y: &[f64], alpha: f64, horizon: usize) -> Vec<f64> {
    let (_, slope) = ols_line(y);
    let (_, level) = ses(y, alpha);
    let n = y.len() as i32;
    let tail = 1.0 / alpha - (1.0 - alpha).powi(n) / alpha;
    (1..=horizon).map(|h| level + 0.5 * slope * (h as f64 - 1.0 + tail)).collect()
}

pub fn fit(train: &[f64], horizon: usize) -> Result<(FittedStatModel, Vec<f64>), StatsError> {
    check(StatKind::Theta, train)?;
    let alpha = optimal_alpha(train);
    let (sse, level) = ses(train, alpha);
    let (_, slope) = ols_line(train);
    let model = FittedStatModel {
        kind: StatKind::Theta,
        params: vec![alpha, slope, level],
        orders: vec![],
        sse,
        aicc: aicc(sse, train.len() - 1, 3),
    };
    Ok((model, theta_with_alpha(train, alpha, horizon)))
}

pub fn theta_forecast(train: &[f64], horizon: usize) -> Result<Vec<f64>, StatsError> {
    fit(train, horizon).map(|(_, f)| f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Brute-force Theta: extrapolate the theta=0 line, run SES on the
    /// theta=2 line, average the two.
    fn two_line_oracle(y: &[f64], alpha: f64, horizon: usize) -> Vec<f64> {
        let n = y.len();
        let nf = n as f64;
        let tbar = (nf + 1.0) / 2.0;
        let ybar = y.iter().sum::<f64>() / nf;
        let num: f64 = (1..=n).map(|t| (t as f64 - tbar) * (y[t - 1] - ybar)).sum();
        let den: f64 = (1..=n).map(|t| (t as f64 - tbar).powi(2)).sum();
        let b = num / den;
        let a = ybar - b * tbar;
        let line: Vec<f64> = (1..=n).map(|t| a + b * t as f64).collect();
        let theta2: Vec<f64> = y.iter().zip(&line).map(|(y, l)| 2.0 * y - l).collect();
        let mut level = theta2[0];
        for &z in &theta2[1..] {
            level = alpha * z + (1.0 - alpha) * level;
        }
        (1..=horizon).map(|h| 0.5 * (a + b * (n + h) as f64) + 0.5 * level).collect()
    }

    #[test]
    fn constant_series() {
        assert_eq!(theta_forecast(&[0.4; 12], 5).unwrap(), vec![0.4; 5]);
    }

    #[test]
    fn ar1_matches_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut y = vec![0.0];
        for _ in 1..120 {
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(0.6 * y.last().unwrap() + e);
        }
        let (m, f) = fit(&y, 6).unwrap();
        let oracle = two_line_oracle(&y, m.params[0], 6);
        for (a, b) in f.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((ALPHA_MIN..=ALPHA_MAX).contains(&m.params[0]));
    }

    #[test]
    fn linear_series_matches_oracle_with_half_drift() {
        let (a, b) = (1.5, 0.2);
        let y: Vec<f64> = (1..=30).map(|t| a + b * t as f64).collect();
        let (m, f) = fit(&y, 4).unwrap();
        let oracle = two_line_oracle(&y, m.params[0], 4);
        for (x, o) in f.iter().zip(&oracle) {
            assert!((x - o).abs() < 1e-9);
        }
        // SES on a pure line picks alpha at the upper bound; the theta=2 drift is half the slope.
        assert!((m.params[0] - ALPHA_MAX).abs() < 1e-6);
        for (h, x) in f.iter().enumerate() {
            let expected = a + b * 30.0 + 0.5 * b * (h + 1) as f64;
            assert!((x - expected).abs() < 1e-3, "h={} {x} {expected}", h + 1);
        }
    }

    #[test]
    fn too_short() {
        assert!(theta_forecast(&[1.0, 2.0, 3.0], 2).is_err());
    }
}
