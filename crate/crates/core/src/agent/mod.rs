//! Request handling: intent recognition and the repair-then-schedule pipeline.

mod intent;
mod workflow;

pub use intent::{parse_intent, Intent, Rule, RuleTable};
pub use workflow::{run_workflow, CsiInput, PhaseTimings, RepairSummary, WorkflowResult};
