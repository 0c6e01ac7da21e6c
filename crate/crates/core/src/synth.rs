//! Seeded synthetic fund panels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{ReturnSeries, RiskFreeSeries};
use crate::month::MonthStamp;
use crate::seed::derive;

pub const AR_PHI: f64 = 0.5;
pub const TARGET_SD: f64 = 4.0;
pub const TARGET_MEAN: f64 = 0.7;
pub const RISK_FREE_RANGE: (f64, f64) = (0.011, 6.356);
pub const MIN_MONTHS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Ar1,
    #[serde(rename = "trend+ar1")]
    TrendAr1,
    RandomWalk,
}

impl std::str::FromStr for Regime {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ar1" => Ok(Regime::Ar1),
            "trend+ar1" | "trend-ar1" => Ok(Regime::TrendAr1),
            "random-walk" => Ok(Regime::RandomWalk),
            _ => Err(format!("unknown regime `{s}` (ar1, trend+ar1, random-walk)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_funds: usize,
    pub n_months: usize,
    pub seed: u64,
    pub regime: Regime,
    pub cross_corr: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("n_months must be at least {MIN_MONTHS}, got {0}")]
    TooShort(usize),
    #[error("n_funds must be positive")]
    NoFunds,
    #[error("cross_corr must lie in [0, 1), got {0}")]
    CrossCorr(f64),
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_months < MIN_MONTHS {
            return Err(SynthError::TooShort(self.n_months));
        }
        if self.n_funds == 0 {
            return Err(SynthError::NoFunds);
        }
        if !(0.0..1.0).contains(&self.cross_corr) {
            return Err(SynthError::CrossCorr(self.cross_corr));
        }
        Ok(())
    }
}

pub fn start_month() -> MonthStamp {
    MonthStamp::new(2000, 1).expect("valid month")
}

pub fn fund_id(i: usize) -> String {
    format!("F{:03}", i + 1)
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Unit-variance stationary AR(1).
fn ar1(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let innov = (1.0 - AR_PHI * AR_PHI).sqrt();
    let mut x = normal(rng);
    (0..n)
        .map(|_| {
            x = AR_PHI * x + innov * normal(rng);
            x
        })
        .collect()
}

/// Funds `F001..` and a risk-free series, all starting January 2000.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<ReturnSeries>, RiskFreeSeries), SynthError> {
    spec.validate()?;
    let n = spec.n_months;
    let factor = ar1(&mut ChaCha8Rng::seed_from_u64(derive(spec.seed, "synth/factor")), n);
    let (wf, wi) = (spec.cross_corr.sqrt(), (1.0 - spec.cross_corr).sqrt());
    let series = (0..spec.n_funds)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(spec.seed, &format!("synth/fund/{i}")));
            let mean = TARGET_MEAN + rng.random_range(-0.3..0.3);
            let sd = TARGET_SD * rng.random_range(0.8..1.2);
            let idio = ar1(&mut rng, n);
            let level: Vec<f64> = match spec.regime {
                Regime::Ar1 => vec![0.0; n],
                Regime::TrendAr1 => {
                    let slope = rng.random_range(-2.0..2.0) / n as f64;
                    (0..n).map(|t| slope * (t as f64 - n as f64 / 2.0)).collect()
                }
                Regime::RandomWalk => {
                    let mut m = 0.0;
                    (0..n)
                        .map(|_| {
                            m += 0.3 * normal(&mut rng);
                            m
                        })
                        .collect()
                }
            };
            let values =
                (0..n).map(|t| mean + level[t] + sd * (wf * factor[t] + wi * idio[t])).collect();
            ReturnSeries { fund_id: fund_id(i), start: start_month(), values }
        })
        .collect();
    Ok((series, risk_free(spec.seed, n)))
}

/// Bounded slowly varying yield: a logistic transform of a Gaussian random walk.
fn risk_free(seed: u64, n: usize) -> RiskFreeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "synth/risk-free"));
    let (lo, hi) = RISK_FREE_RANGE;
    let mut z = 0.5 * normal(&mut rng);
    let values = (0..n)
        .map(|_| {
            z += 0.08 * normal(&mut rng);
            let v = lo + (hi - lo) / (1.0 + (-z).exp());
            // Three decimals, as in published yields.
            ((v * 1000.0).round() / 1000.0).clamp(lo, hi)
        })
        .collect();
    RiskFreeSeries { start: start_month(), values }
}
