//! Rolling-origin train/validation splits with equal-length validation blocks.
//!
//! The last validation block is the final `H` observations; earlier origins
//! step backwards by `m = floor(H / p)`.

use serde::{Deserialize, Serialize};

use crate::data::SharpePanel;

pub const DEFAULT_SPLITS: usize = 6;
pub const DEFAULT_MIN_TRAIN: usize = 60;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CvError {
    #[error("need horizon >= splits >= 1, got horizon {horizon}, splits {splits}")]
    InvalidSplits { horizon: usize, splits: usize },
    #[error("series length {n} must exceed horizon {horizon}")]
    TooShort { n: usize, horizon: usize },
    #[error("first origin {first_origin} is below the minimum train length {min_train}; need n >= {required_n}")]
    InsufficientHistory { first_origin: i64, min_train: usize, required_n: usize },
    #[error("split index {index} out of range 1..={splits}")]
    SplitOutOfRange { index: usize, splits: usize },
    #[error("panel has {found} columns but the plan was built for {expected}")]
    LengthMismatch { expected: usize, found: usize },
}

/// Origins are 1-based indices of the last train observation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub n: usize,
    pub horizon: usize,
    pub splits: usize,
    pub spacing: usize,
    pub origins: Vec<usize>,
}

impl CvPlan {
    /// 1-based inclusive validation range of split `i` (1-based).
    pub fn validation_range(&self, i: usize) -> (usize, usize) {
        let o = self.origins[i - 1];
        (o + 1, o + self.horizon)
    }
}

pub fn plan_splits(n: usize, horizon: usize, splits: usize, min_train: usize) -> Result<CvPlan, CvError> {
    if splits == 0 || horizon < splits {
        return Err(CvError::InvalidSplits { horizon, splits });
    }
    if n <= horizon {
        return Err(CvError::TooShort { n, horizon });
    }
    let spacing = horizon / splits;
    let last = (n - horizon) as i64;
    let first = last - (spacing * (splits - 1)) as i64;
    if first < min_train as i64 {
        return Err(CvError::InsufficientHistory {
            first_origin: first,
            min_train,
            required_n: min_train + horizon + spacing * (splits - 1),
        });
    }
    let origins = (0..splits).map(|k| first as usize + k * spacing).collect();
    Ok(CvPlan { n, horizon, splits, spacing, origins })
}

/// Train columns `1..=n_i` and validation columns `n_i+1..=n_i+H` of split `i` (1-based).
pub fn split_view(panel: &SharpePanel, plan: &CvPlan, i: usize) -> Result<(SharpePanel, SharpePanel), CvError> {
    if i == 0 || i > plan.splits {
        return Err(CvError::SplitOutOfRange { index: i, splits: plan.splits });
    }
    if panel.len() != plan.n {
        return Err(CvError::LengthMismatch { expected: plan.n, found: panel.len() });
    }
    let origin = plan.origins[i - 1];
    Ok((panel.slice(0..origin), panel.slice(origin..origin + plan.horizon)))
}

/// `split,origin,val_start,val_end`
pub fn write_plan<W: std::io::Write>(mut w: W, plan: &CvPlan) -> std::io::Result<()> {
    writeln!(w, "split,origin,val_start,val_end")?;
    for i in 1..=plan.splits {
        let (a, b) = plan.validation_range(i);
        writeln!(w, "{i},{},{a},{b}", plan.origins[i - 1])?;
    }
    Ok(())
}
