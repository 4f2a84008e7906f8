//! Tendon slack prevention.
//!
//! An equal tension added to the three tendons of a segment produces no net
//! moment on any disk, so it does not move the tip. All three strategies use
//! that to keep commanded tensions non-negative.

use serde::{Deserialize, Serialize};

use crate::kinematics::SEGMENTS;
use crate::numerics::Vec6;
use crate::plant::{tendons_of_segment, TendonTensions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlackStrategy {
    /// Fixed pretension (N) added to all six tendons.
    GlobalPretension { pretension: f64 },
    /// Each segment's triple is lifted by its own most negative tension.
    PerSegmentSymmetric,
    /// All six tendons are lifted by the most negative tension overall.
    AllSegmentsSymmetric,
}

impl SlackStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SlackStrategy::GlobalPretension { .. } => "global_pretension",
            SlackStrategy::PerSegmentSymmetric => "per_segment_symmetric",
            SlackStrategy::AllSegmentsSymmetric => "all_segments_symmetric",
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            SlackStrategy::GlobalPretension { pretension } => *pretension >= 0.0 && pretension.is_finite(),
            _ => true,
        }
    }
}

pub fn apply_slack_strategy(t: &TendonTensions, strategy: &SlackStrategy) -> TendonTensions {
    match *strategy {
        SlackStrategy::GlobalPretension { pretension } => TendonTensions(t.0.add_scalar(pretension)),
        SlackStrategy::AllSegmentsSymmetric => {
            let lift = (-t.min()).max(0.0);
            TendonTensions(t.0.add_scalar(lift))
        }
        SlackStrategy::PerSegmentSymmetric => {
            let mut out: Vec6 = t.0;
            for s in 0..SEGMENTS {
                let range = tendons_of_segment(s);
                let lift = (-range.clone().map(|i| t.0[i]).fold(f64::INFINITY, f64::min)).max(0.0);
                for i in range {
                    out[i] += lift;
                }
            }
            TendonTensions(out)
        }
    }
}
