//! Sense, repair, decide, act.
//!
//! 1. Repair: when the incoming CSI has gaps, fill them with NNCF; a
//!    complete matrix passes through untouched. Either way the solvers only
//!    ever see a complete matrix.
//! 2. Schedule: dispatch on the intent's objective.
//! 3. Execute: package the allocation and its report.

use std::time::Instant;

use serde_json::json;

use crate::channel::{ChannelMatrix, Index, MaskedChannelMatrix};
use crate::config::ScenarioConfig;
use crate::error::{Phase, Result};
use crate::repair::nncf_repair;
use crate::scheduler::{
    solve_max_ee, solve_max_rate, solve_min_power, CsiSource, Objective, Solution,
};

use super::Intent;

#[derive(Debug, Clone, PartialEq)]
pub enum CsiInput {
    Complete(ChannelMatrix),
    Masked(MaskedChannelMatrix),
}

impl CsiInput {
    pub fn shape(&self) -> (usize, usize) {
        match self {
            CsiInput::Complete(m) => m.shape(),
            CsiInput::Masked(m) => m.shape(),
        }
    }
}

impl From<ChannelMatrix> for CsiInput {
    fn from(m: ChannelMatrix) -> Self {
        CsiInput::Complete(m)
    }
}

impl From<MaskedChannelMatrix> for CsiInput {
    fn from(m: MaskedChannelMatrix) -> Self {
        CsiInput::Masked(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairSummary {
    pub filled_indices: Vec<Index>,
    pub iterations_used: usize,
    pub fallback_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTimings {
    pub repair_ms: f64,
    pub schedule_ms: f64,
    pub execute_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowResult {
    pub intent: Intent,
    /// `None` when the input was complete and no repair ran.
    pub repair: Option<RepairSummary>,
    pub solution: Solution,
    /// Power level picked by the energy-efficiency search.
    pub chosen_power_level: Option<f64>,
    pub timings: PhaseTimings,
}

impl WorkflowResult {
    /// Allocation JSON plus intent and repair details. Wall-clock timings
    /// are only included on request since they differ between runs.
    pub fn to_json_value(&self, include_timings: bool) -> serde_json::Value {
        let mut value = self.solution.to_json_value();
        let obj = value.as_object_mut().expect("allocation JSON is an object");
        obj.insert("intent".into(), json!(self.intent.objective));
        obj.insert("query".into(), json!(self.intent.raw_query));
        obj.insert("matched_rule".into(), json!(self.intent.matched_rule));
        let repair = match &self.repair {
            None => json!("perfect"),
            Some(r) => json!({
                "filled_indices": r.filled_indices,
                "iterations_used": r.iterations_used,
                "fallback_count": r.fallback_count,
            }),
        };
        obj.insert("repair".into(), repair);
        if let Some(level) = self.chosen_power_level {
            obj.insert("chosen_power_level".into(), json!(level));
        }
        if include_timings {
            obj.insert(
                "timings_ms".into(),
                json!({
                    "repair": self.timings.repair_ms,
                    "schedule": self.timings.schedule_ms,
                    "execute": self.timings.execute_ms,
                }),
            );
        }
        value
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the full pipeline for one request.
pub fn run_workflow(
    input: &CsiInput,
    intent: &Intent,
    cfg: &ScenarioConfig,
) -> Result<WorkflowResult> {
    cfg.validate()?;

    let start = Instant::now();
    let expected = (cfg.num_users, cfg.num_subcarriers);
    let (channel, repair) = match input {
        CsiInput::Complete(m) => {
            m.ensure_shape(expected)
                .map_err(|e| e.in_phase(Phase::Repair))?;
            (std::borrow::Cow::Borrowed(m), None)
        }
        CsiInput::Masked(raw) => {
            if raw.shape() != expected {
                return Err(crate::Error::ShapeMismatch {
                    expected,
                    actual: raw.shape(),
                }
                .in_phase(Phase::Repair));
            }
            match raw.to_complete() {
                Some(m) => (std::borrow::Cow::Owned(m), None),
                None => {
                    let out = nncf_repair(raw, cfg.neighbor_weights(), cfg.repair_iters())
                        .map_err(|e| e.in_phase(Phase::Repair))?;
                    let summary = RepairSummary {
                        filled_indices: out.filled_indices,
                        iterations_used: out.iterations_used,
                        fallback_count: out.fallback_count,
                    };
                    (std::borrow::Cow::Owned(out.repaired), Some(summary))
                }
            }
        }
    };
    let repair_ms = elapsed_ms(start);

    let start = Instant::now();
    let scheduled = match intent.objective {
        Objective::MaxRate => solve_max_rate(&channel, cfg, cfg.max_power).map(|s| (s, None)),
        Objective::MinPower => solve_min_power(&channel, cfg).map(|s| (s, None)),
        Objective::MaxEe => {
            solve_max_ee(&channel, cfg).map(|ee| (ee.solution, Some(ee.chosen_level)))
        }
    };
    let (solution, chosen_power_level) = scheduled.map_err(|e| e.in_phase(Phase::Schedule))?;
    let schedule_ms = elapsed_ms(start);

    let start = Instant::now();
    let source = if repair.is_some() {
        CsiSource::Nncf
    } else {
        CsiSource::Perfect
    };
    let solution = solution.with_csi_source(source);
    let mut result = WorkflowResult {
        intent: intent.clone(),
        repair,
        solution,
        chosen_power_level,
        timings: PhaseTimings::default(),
    };
    result.timings = PhaseTimings {
        repair_ms,
        schedule_ms,
        execute_ms: elapsed_ms(start),
    };
    Ok(result)
}
