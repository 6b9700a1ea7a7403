//! Contact detection and collision classification.

use super::geometry::{impact_point, relative_heading_deg, sat_overlap, Face, Vec2};
use super::AgentState;
use crate::dsl::AgentClass;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CollisionKind {
    #[serde(rename = "vehicle-cyclist")]
    VehicleCyclist,
    #[serde(rename = "vehicle-pedestrian")]
    VehiclePedestrian,
    #[serde(rename = "t-bone")]
    TBone,
    #[serde(rename = "rear-end")]
    RearEnd,
    #[serde(rename = "other")]
    Other,
}

impl CollisionKind {
    pub const ALL: [CollisionKind; 5] = [
        CollisionKind::VehicleCyclist,
        CollisionKind::VehiclePedestrian,
        CollisionKind::TBone,
        CollisionKind::RearEnd,
        CollisionKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollisionKind::VehicleCyclist => "vehicle-cyclist",
            CollisionKind::VehiclePedestrian => "vehicle-pedestrian",
            CollisionKind::TBone => "t-bone",
            CollisionKind::RearEnd => "rear-end",
            CollisionKind::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<CollisionKind> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl std::fmt::Display for CollisionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Angle thresholds in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Rear-end needs a relative heading strictly below this.
    pub rear_end_max_deg: f64,
    /// T-bone needs a relative heading within this closed band.
    pub tbone_min_deg: f64,
    pub tbone_max_deg: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig { rear_end_max_deg: 25.0, tbone_min_deg: 65.0, tbone_max_deg: 115.0 }
    }
}

/// Overlap between agents `a < b` (indices into the frame's agent list).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contact {
    pub a: usize,
    pub b: usize,
    pub impact_point: Vec2,
    pub faces: (Face, Face),
    pub relative_heading: f64,
}

/// Contact for one ordered pair, or `None` if the rectangles are apart.
pub fn contact_between(agents: &[AgentState], a: usize, b: usize) -> Option<Contact> {
    let (oa, ob) = (agents[a].obb(), agents[b].obb());
    if !sat_overlap(&oa, &ob) {
        return None;
    }
    let d = ob.center - oa.center;
    Some(Contact {
        a,
        b,
        impact_point: impact_point(&oa, &ob),
        faces: (oa.face_toward(d), ob.face_toward(-d)),
        relative_heading: relative_heading_deg(oa.heading, ob.heading),
    })
}

/// Every overlapping pair of active agents, in index order.
pub fn detect_collisions(agents: &[AgentState]) -> Vec<Contact> {
    let mut out = Vec::new();
    for a in 0..agents.len() {
        for b in a + 1..agents.len() {
            if agents[a].active && agents[b].active {
                out.extend(contact_between(agents, a, b));
            }
        }
    }
    out
}

pub fn classify_collision(contact: &Contact, agents: &[AgentState], config: &ClassifierConfig) -> CollisionKind {
    classify_parts(
        agents[contact.a].class,
        agents[contact.b].class,
        contact.relative_heading,
        contact.faces,
        config,
    )
}

/// Classification from the raw ingredients of a contact.
pub fn classify_parts(
    ca: AgentClass,
    cb: AgentClass,
    relative_heading: f64,
    faces: (Face, Face),
    config: &ClassifierConfig,
) -> CollisionKind {
    let pair = |x: AgentClass| (ca.is_vehicle() && cb == x) || (cb.is_vehicle() && ca == x);
    if pair(AgentClass::Bicycle) {
        return CollisionKind::VehicleCyclist;
    }
    if pair(AgentClass::Pedestrian) {
        return CollisionKind::VehiclePedestrian;
    }
    let front_rear = matches!(faces, (Face::Front, Face::Rear) | (Face::Rear, Face::Front));
    if relative_heading < config.rear_end_max_deg && front_rear {
        return CollisionKind::RearEnd;
    }
    let in_band = (config.tbone_min_deg..=config.tbone_max_deg).contains(&relative_heading);
    if in_band && (faces.0.is_side() || faces.1.is_side()) {
        return CollisionKind::TBone;
    }
    CollisionKind::Other
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Action, BehaviorMachine, Pose};
    use crate::dsl::TriggerCondition;

    fn agent(class: AgentClass, x: f64, y: f64, heading_deg: f64) -> AgentState {
        let (length, width) = class.default_dims();
        AgentState {
            id: format!("{class:?}"),
            class,
            pose: Pose { x, y, heading: heading_deg.to_radians() },
            speed: 0.0,
            length,
            width,
            behavior_state: BehaviorMachine::new(Action::Idle, TriggerCondition::Always),
            active: true,
            lane: None,
        }
    }

    #[test]
    fn class_pair_takes_precedence() {
        let agents = [agent(AgentClass::Car, 0.0, 0.0, 0.0), agent(AgentClass::Bicycle, 2.5, 0.0, 90.0)];
        let c = detect_collisions(&agents);
        assert_eq!(c.len(), 1);
        assert_eq!(classify_collision(&c[0], &agents, &ClassifierConfig::default()), CollisionKind::VehicleCyclist);
    }

    #[test]
    fn front_to_rear_is_rear_end() {
        let agents = [agent(AgentClass::Car, 0.0, 0.0, 0.0), agent(AgentClass::Car, 4.4, 0.0, 0.0)];
        let c = detect_collisions(&agents);
        assert_eq!(c[0].faces, (Face::Front, Face::Rear));
        assert_eq!(classify_collision(&c[0], &agents, &ClassifierConfig::default()), CollisionKind::RearEnd);
    }

    #[test]
    fn front_into_side_is_tbone() {
        let agents = [agent(AgentClass::Car, 0.0, 0.0, 0.0), agent(AgentClass::Car, 3.2, 0.0, 90.0)];
        let c = detect_collisions(&agents);
        assert_eq!(c[0].faces, (Face::Front, Face::Left));
        assert_eq!(classify_collision(&c[0], &agents, &ClassifierConfig::default()), CollisionKind::TBone);
    }

    #[test]
    fn inactive_agents_ignored() {
        let mut agents = [agent(AgentClass::Car, 0.0, 0.0, 0.0), agent(AgentClass::Car, 0.0, 0.0, 0.0)];
        agents[1].active = false;
        assert!(detect_collisions(&agents).is_empty());
    }

    #[test]
    fn thresholds_are_configurable() {
        let wide = ClassifierConfig { rear_end_max_deg: 40.0, ..ClassifierConfig::default() };
        let faces = (Face::Front, Face::Rear);
        assert_eq!(classify_parts(AgentClass::Car, AgentClass::Car, 30.0, faces, &Default::default()), CollisionKind::Other);
        assert_eq!(classify_parts(AgentClass::Car, AgentClass::Car, 30.0, faces, &wide), CollisionKind::RearEnd);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in CollisionKind::ALL {
            assert_eq!(CollisionKind::from_name(k.as_str()), Some(k));
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }
}
