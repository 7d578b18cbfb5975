//! Planners turn an utterance plus fresh state into a [`PlannerOutcome`].

use dawzy_core::engine::ProjectStateDoc;
use dawzy_core::planner::{plan, PlannerOutcome};
use dawzy_core::units::UnitRegistry;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("planner unavailable: {0}")]
    Unavailable(String),
    #[error("planner produced no parseable script: {}", .errors.join(" / "))]
    ScriptRejected { errors: Vec<String> },
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::Unavailable(_) => "planner_unavailable",
            PlanError::ScriptRejected { .. } => "script_rejected",
        }
    }
}

pub trait Planner: Send + Sync {
    fn name(&self) -> &str;
    fn plan(&self, text: &str, doc: &ProjectStateDoc, registry: &UnitRegistry) -> Result<PlannerOutcome, PlanError>;
}

/// The deterministic pattern planner; needs no network.
#[derive(Debug, Default, Clone, Copy)]
pub struct RulesPlanner;

impl Planner for RulesPlanner {
    fn name(&self) -> &str {
        "rules"
    }

    fn plan(&self, text: &str, doc: &ProjectStateDoc, registry: &UnitRegistry) -> Result<PlannerOutcome, PlanError> {
        Ok(plan(text, doc, registry))
    }
}
