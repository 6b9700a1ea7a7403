//! Evaluating `require` statements against a finished trace.

use super::collision::CollisionKind;
use super::trace::SimTrace;
use super::EGO;
use crate::dsl::Requirement;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RequirementError {
    #[error("unsupported requirement: {0}")]
    UnsupportedRequirement(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequirementOutcome {
    pub requirement: Requirement,
    pub passed: bool,
    pub detail: String,
}

/// Evaluate each requirement. Collision kinds are checked against every
/// event; the ego-speed form looks at the first event involving ego.
pub fn check_requirements(
    trace: &SimTrace,
    requirements: &[Requirement],
) -> Result<Vec<RequirementOutcome>, RequirementError> {
    requirements.iter().map(|r| check_one(trace, r)).collect()
}

fn check_one(trace: &SimTrace, req: &Requirement) -> Result<RequirementOutcome, RequirementError> {
    let (passed, detail) = match req {
        Requirement::Collision => match trace.events.first() {
            Some(e) => (true, format!("{} collision at t={:.2}s", e.classification, e.time)),
            None => (false, "no collision".to_string()),
        },
        Requirement::CollisionOf { collision } => {
            let kind = CollisionKind::from_name(collision)
                .ok_or_else(|| RequirementError::UnsupportedRequirement(format!("collision of {collision}")))?;
            match trace.events.iter().find(|e| e.classification == kind) {
                Some(e) => (true, format!("{kind} collision at t={:.2}s", e.time)),
                None if trace.events.is_empty() => (false, "no collision".to_string()),
                None => {
                    let seen: Vec<&str> = trace.events.iter().map(|e| e.classification.as_str()).collect();
                    (false, format!("expected {kind}, saw {}", seen.join(", ")))
                }
            }
        }
        Requirement::EgoSpeedAbove { speed } => {
            if !speed.is_finite() {
                return Err(RequirementError::UnsupportedRequirement(format!("ego speed above {speed}")));
            }
            let hit = trace.events.iter().find(|e| e.involves(EGO));
            let ego_speed = hit.and_then(|e| {
                let frame = trace.frames.iter().find(|f| f.index == e.frame)?;
                frame.agents.iter().find(|a| a.id == EGO).map(|a| a.speed)
            });
            match ego_speed {
                Some(v) => (v > *speed, format!("ego speed {v:.2} m/s at collision")),
                None => (false, "ego was not in a collision".to_string()),
            }
        }
    };
    Ok(RequirementOutcome { requirement: req.clone(), passed, detail })
}
