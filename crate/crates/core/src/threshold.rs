//! Size thresholds and how strictly they are applied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// A failed threshold is an error.
    #[default]
    Enforce,
    /// A failed threshold is recorded; the construction proceeds and its
    /// output is still verified exactly.
    ReportOnly,
}

/// One threshold inequality `measured > required` with its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub what: String,
    pub measured: f64,
    pub required: f64,
    pub satisfied: bool,
    /// Logarithms in thresholds are natural.
    pub log: String,
}

impl ThresholdCheck {
    pub fn new(what: impl Into<String>, measured: f64, required: f64) -> Self {
        Self {
            what: what.into(),
            measured,
            required,
            satisfied: measured > required,
            log: "natural".into(),
        }
    }

    /// `measured >= required`, for counts against a largeness function.
    pub fn at_least(what: impl Into<String>, measured: f64, required: f64) -> Self {
        Self {
            satisfied: measured >= required,
            ..Self::new(what, measured, required)
        }
    }

    pub fn margin(&self) -> f64 {
        self.measured - self.required
    }
}

impl ThresholdPolicy {
    pub fn apply(self, check: &ThresholdCheck) -> Result<()> {
        if check.satisfied || self == ThresholdPolicy::ReportOnly {
            Ok(())
        } else {
            Err(Error::Threshold {
                what: check.what.clone(),
                measured: check.measured,
                required: check.required,
            })
        }
    }
}
