use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;
use thiserror::Error;

use super::validate::{ResolvedPlan, UiHint};
use crate::engine::{Engine, EngineError, TransportState};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecutionReport {
    pub new_revision: u64,
    pub applied_steps: usize,
    pub explanation: Vec<String>,
    pub ui_hints: Vec<UiHint>,
    pub transport: TransportState,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecuteError {
    #[error("plan was resolved at revision {expected} but the session is at {actual}")]
    StaleRevision { expected: u64, actual: u64 },
    #[error("step {index} failed: {cause}")]
    StepFailed { index: usize, cause: EngineError },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl ExecuteError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecuteError::StaleRevision { .. } => "stale_revision",
            ExecuteError::StepFailed { .. } => "step_failed",
            ExecuteError::Engine(_) => "engine_error",
        }
    }
}

/// Runs a plan as one transaction: every step lands or none does.
pub fn execute(engine: &mut Engine, plan: &ResolvedPlan) -> Result<ExecutionReport, ExecuteError> {
    execute_with_hook(engine, plan, |_| Ok(()))
}

/// [`execute`] with `before_step(i)` called ahead of step `i`; an error from
/// the hook fails that step. Used to inject faults.
pub fn execute_with_hook(
    engine: &mut Engine,
    plan: &ResolvedPlan,
    mut before_step: impl FnMut(usize) -> Result<(), EngineError>,
) -> Result<ExecutionReport, ExecuteError> {
    if plan.base_revision != engine.revision() {
        return Err(ExecuteError::StaleRevision { expected: plan.base_revision, actual: engine.revision() });
    }
    if plan.is_edit() {
        engine.begin(plan.label.clone())?;
        for (index, step) in plan.steps.iter().enumerate() {
            if let Err(cause) = before_step(index).and_then(|_| engine.apply_step(step)) {
                engine.rollback()?;
                return Err(ExecuteError::StepFailed { index, cause });
            }
        }
        engine.commit()?;
    }
    for action in &plan.transport {
        engine.transport_control(*action);
    }
    Ok(ExecutionReport {
        new_revision: engine.revision(),
        applied_steps: plan.steps.len(),
        explanation: plan.explanation.clone(),
        ui_hints: plan.ui_hints.clone(),
        transport: *engine.transport(),
    })
}
