//! The two iterative constructions, each producing a trace of per-level
//! invariant checks that can be re-verified from the stored data.

pub mod family;
pub mod full_measure;
pub mod rrp;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use family::{family_cover_centres, family_covering_number, BiLipschitzReport, CoveringBound, FunctionFamily, MapSpec};
pub use full_measure::{full_measure_run, verify_full_measure, FullMeasureConfig, FullMeasureLevel, FullMeasureTrace};
pub use rrp::{rrp_run, rrp_step, verify_rrp, LargenessFunction, RrpConfig, RrpContext, RrpLevel, RrpStep, RrpStepRecord, RrpTrace};

/// One named invariant at one level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "kebab-case")]
pub enum ConstructionTrace {
    Rrp(RrpTrace),
    FullMeasure(FullMeasureTrace),
}

impl ConstructionTrace {
    pub fn pass(&self) -> bool {
        match self {
            ConstructionTrace::Rrp(t) => t.pass,
            ConstructionTrace::FullMeasure(t) => t.pass,
        }
    }
}

/// Problems found when re-validating a stored trace; empty when it verifies.
pub fn verify_trace(trace: &ConstructionTrace) -> Result<Vec<String>> {
    match trace {
        ConstructionTrace::Rrp(t) => {
            let mut problems = Vec::new();
            if t.schema != crate::SCHEMA {
                problems.push(format!("schema {} is not {}", t.schema, crate::SCHEMA));
            }
            let recomputed = verify_rrp(t)?;
            if recomputed.len() != t.levels.len() {
                problems.push("level count differs".into());
            }
            for (level, checks) in t.levels.iter().zip(&recomputed) {
                for c in checks.iter().filter(|c| !c.holds) {
                    problems.push(format!("level {}: check {} fails: {}", level.j, c.name, c.detail));
                }
                if &level.checks != checks {
                    problems.push(format!("level {}: stored checks differ from the recomputed ones", level.j));
                }
            }
            if !t.pass {
                problems.push("trace is marked failing".into());
            }
            Ok(problems)
        }
        ConstructionTrace::FullMeasure(t) => {
            let mut problems = verify_full_measure(t)?;
            if t.schema != crate::SCHEMA {
                problems.push(format!("schema {} is not {}", t.schema, crate::SCHEMA));
            }
            if !t.pass {
                problems.push("trace is marked failing".into());
            }
            Ok(problems)
        }
    }
}
