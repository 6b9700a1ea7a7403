//! Fixed-timestep kinematic simulation of concrete scenarios.
//!
//! Vehicles follow the kinematic unicycle model with pure-pursuit steering
//! toward their lane centerline; pedestrians and bicycles move in straight
//! lines. Frame `k` is at time `k * dt`. Each step evaluates triggers on the
//! previous frame, updates speeds from the behavior machines, then moves
//! every agent.

pub mod collision;
pub mod geometry;
pub mod map;
pub mod requirements;
pub mod trace;

pub use collision::{classify_collision, detect_collisions, ClassifierConfig, CollisionKind, Contact};
pub use geometry::{Face, Obb, Vec2};
pub use map::{load_map, MapError, WorldMap};
pub use requirements::{check_requirements, RequirementError, RequirementOutcome};
pub use trace::{CollisionEvent, Frame, SimTrace, TerminationReason};

use crate::dsl::{Action, AgentClass, ConcreteScenario, Placement, TriggerCondition};
use geometry::normalize_angle;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

pub const EGO: &str = "ego";

/// Minimum pure-pursuit lookahead, meters.
const MIN_LOOKAHEAD: f64 = 4.0;
/// Lookahead grows with speed at this many seconds of travel.
const LOOKAHEAD_TIME: f64 = 0.8;
/// Tightest turn a vehicle may steer, meters.
const MIN_TURN_RADIUS: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("object `{object}` references unknown lane `{lane}`")]
    UnknownLane { object: String, lane: String },
    #[error("object `{object}` is placed relative to `{target}`, which is not placed before it")]
    UnknownTarget { object: String, target: String },
    #[error("objects `{a}` and `{b}` overlap at t=0")]
    Overlap { a: String, b: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub max_duration: f64,
    pub collision_stop: bool,
    #[serde(default)]
    pub classifier: ClassifierConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 0.05, max_duration: 30.0, collision_stop: true, classifier: ClassifierConfig::default() }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.max_duration >= self.dt && self.max_duration.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "max_duration {} must be at least dt {}",
                self.max_duration, self.dt
            )));
        }
        Ok(())
    }

    /// Number of steps after frame 0.
    pub fn max_steps(&self) -> u64 {
        ((self.max_duration / self.dt) + 1e-9).floor().max(1.0) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum Phase {
    /// Trigger not yet satisfied; the agent keeps its current speed.
    Waiting,
    /// Running since frame `since`; `entry_speed` is the speed on entry and
    /// `lateral` the sideways distance covered so far (cut-ins only).
    Active { since: u64, entry_speed: f64, lateral: f64 },
    /// Finished: a brake that reached zero or a completed cut-in.
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMachine {
    pub action: Action,
    pub trigger: TriggerCondition,
    pub phase: Phase,
}

impl BehaviorMachine {
    pub fn new(action: Action, trigger: TriggerCondition) -> Self {
        BehaviorMachine { action, trigger, phase: Phase::Waiting }
    }

    pub fn is_waiting(&self) -> bool {
        self.phase == Phase::Waiting
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: String,
    pub class: AgentClass,
    pub pose: Pose,
    pub speed: f64,
    pub length: f64,
    pub width: f64,
    pub behavior_state: BehaviorMachine,
    pub active: bool,
    /// Lane being followed, for vehicles.
    pub lane: Option<String>,
}

impl AgentState {
    pub fn obb(&self) -> Obb {
        Obb::new(self.pose.position(), self.pose.heading, self.length, self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub frame: u64,
    pub agents: Vec<AgentState>,
}

impl SimState {
    pub fn agent(&self, id: &str) -> Option<&AgentState> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.frame as f64 * dt
    }
}

/// Resolve placements in declaration order and build frame 0.
pub fn instantiate(scenario: &ConcreteScenario, map: &WorldMap) -> Result<SimState, PlacementError> {
    let mut agents: Vec<AgentState> = Vec::with_capacity(scenario.objects.len());
    for obj in &scenario.objects {
        let target_pose = |target: &str| {
            agents.iter().find(|a| a.id == target).map(|a| a.pose).ok_or_else(|| PlacementError::UnknownTarget {
                object: obj.name.clone(),
                target: target.to_string(),
            })
        };
        let offset = |t: Pose, along: f64, left: f64| {
            let f = Vec2::from_heading(t.heading);
            let p = t.position() + f * along + f.perp() * left;
            Pose { x: p.x, y: p.y, heading: t.heading }
        };
        let mut pose = match &obj.placement {
            Placement::Absolute { x, y, heading } => Pose { x: *x, y: *y, heading: *heading },
            Placement::AheadOf { target, distance } => offset(target_pose(target)?, *distance, 0.0),
            Placement::Behind { target, distance } => offset(target_pose(target)?, -*distance, 0.0),
            Placement::LeftOf { target, offset: o } => offset(target_pose(target)?, 0.0, *o),
            Placement::RightOf { target, offset: o } => offset(target_pose(target)?, 0.0, -*o),
            Placement::OnLane { lane, s } => {
                let l = map
                    .lane(lane)
                    .ok_or_else(|| PlacementError::UnknownLane { object: obj.name.clone(), lane: lane.clone() })?;
                let p = l.pose_at(*s);
                Pose { x: p.position.x, y: p.position.y, heading: p.heading }
            }
        };
        if let Some(h) = obj.heading_override {
            pose.heading = h;
        }
        pose.heading = normalize_angle(pose.heading);
        let lane = match &obj.placement {
            Placement::OnLane { lane, .. } if obj.class.is_vehicle() && obj.heading_override.is_none() => {
                Some(lane.clone())
            }
            _ if obj.class.is_vehicle() => map.lane_for_pose(pose.position(), pose.heading).map(|l| l.id.clone()),
            _ => None,
        };
        let behavior_state = match &obj.behavior {
            Some(b) => BehaviorMachine::new(b.action, b.trigger.clone()),
            None => BehaviorMachine::new(Action::Idle, TriggerCondition::Always),
        };
        agents.push(AgentState {
            id: obj.name.clone(),
            class: obj.class,
            pose,
            speed: obj.speed.max(0.0),
            length: obj.length,
            width: obj.width,
            behavior_state,
            active: true,
            lane,
        });
    }
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            if geometry::sat_overlap(&a.obb(), &b.obb()) {
                return Err(PlacementError::Overlap { a: a.id.clone(), b: b.id.clone() });
            }
        }
    }
    Ok(SimState { frame: 0, agents })
}

/// Whether `cond` holds on `state`. `TimeElapsed` compares the state's own
/// time; a distance trigger naming an agent that does not exist never holds.
pub fn condition_holds(cond: &TriggerCondition, state: &SimState, dt: f64) -> bool {
    match cond {
        TriggerCondition::Always => true,
        TriggerCondition::TimeElapsed { seconds } => state.time(dt) >= *seconds,
        TriggerCondition::DistanceToEgoBelow { subject, meters } => {
            match (state.agent(subject), state.agent(EGO)) {
                (Some(s), Some(e)) => s.pose.position().dist(e.pose.position()) < *meters,
                _ => false,
            }
        }
    }
}

/// Point `dist` meters past arc length `s` on `lane`, continuing onto first
/// successors; clamps at the end of the chain.
fn lookahead_point(map: &WorldMap, lane: &map::Lane, s: f64, dist: f64) -> Vec2 {
    let mut cur = lane;
    let mut at = s + dist;
    for _ in 0..64 {
        if at <= cur.length() {
            break;
        }
        match cur.successors.first().and_then(|id| map.lane(id)) {
            Some(next) => {
                at -= cur.length();
                cur = next;
            }
            None => break,
        }
    }
    cur.pose_at(at).position
}

fn advance(pose: &mut Pose, speed: f64, dt: f64) {
    pose.x += speed * pose.heading.cos() * dt;
    pose.y += speed * pose.heading.sin() * dt;
}

/// One pure-pursuit step along the agent's lane.
fn follow_lane(agent: &mut AgentState, map: &WorldMap, dt: f64) {
    let Some(lane) = agent.lane.as_deref().and_then(|id| map.lane(id)) else {
        advance(&mut agent.pose, agent.speed, dt);
        return;
    };
    let proj = lane.project(agent.pose.position());
    if lane.successors.is_empty() && lane.length() - proj.s <= agent.speed * dt {
        // End of the road: stop on the last centerline point.
        let end = lane.pose_at(lane.length());
        agent.pose = Pose { x: end.position.x, y: end.position.y, heading: normalize_angle(end.heading) };
        agent.speed = 0.0;
        return;
    }
    let ld = MIN_LOOKAHEAD.max(LOOKAHEAD_TIME * agent.speed);
    let target = lookahead_point(map, lane, proj.s, ld);
    let to = target - agent.pose.position();
    let dist = to.norm();
    let heading = agent.pose.heading;
    advance(&mut agent.pose, agent.speed, dt);
    if dist > 0.0 {
        let alpha = normalize_angle(to.y.atan2(to.x) - heading);
        let max_k = 1.0 / MIN_TURN_RADIUS;
        let curvature = (2.0 * alpha.sin() / dist).clamp(-max_k, max_k);
        agent.pose.heading = normalize_angle(heading + agent.speed * curvature * dt);
    }
    let after = lane.project(agent.pose.position());
    if after.s >= lane.length() {
        if let Some(next) = lane.successors.first() {
            agent.lane = Some(next.clone());
        }
    }
}

/// Advance the whole scene by one frame.
pub fn step(state: &SimState, map: &WorldMap, dt: f64) -> SimState {
    let k = state.frame + 1;
    let mut agents = state.agents.clone();
    for agent in agents.iter_mut() {
        let machine = &mut agent.behavior_state;
        if machine.is_waiting() && condition_holds(&machine.trigger, state, dt) {
            machine.phase = Phase::Active { since: k, entry_speed: agent.speed, lateral: 0.0 };
            if let Action::Crossing { side, .. } = machine.action {
                agent.pose.heading = normalize_angle(agent.pose.heading + side.sign() * FRAC_PI_2);
                agent.lane = None;
            }
        }

        match (machine.action, machine.phase) {
            (_, Phase::Waiting) | (Action::Idle, _) | (Action::CutIn { .. }, _) => {}
            (Action::FollowLane { target_speed }, _) => agent.speed = target_speed.max(0.0),
            (Action::Crossing { speed, .. }, _) => agent.speed = speed.max(0.0),
            (Action::Stopped, _) => agent.speed = 0.0,
            (Action::Brake { decel }, Phase::Active { since, entry_speed, .. }) => {
                let elapsed = (k - since + 1) as f64 * dt;
                agent.speed = (entry_speed - decel * elapsed).max(0.0);
                if agent.speed == 0.0 {
                    machine.phase = Phase::Done;
                }
            }
            (Action::Brake { .. }, Phase::Done) => agent.speed = 0.0,
        }

        let cutting = match (machine.action, &mut machine.phase) {
            (Action::CutIn { side, lateral_rate }, Phase::Active { lateral, .. }) => Some((side, lateral_rate, lateral)),
            _ => None,
        };
        if let Some((side, rate, lateral)) = cutting {
            let lane = agent.lane.as_deref().and_then(|id| map.lane(id));
            let (tangent, width) = match lane {
                Some(l) => (l.project(agent.pose.position()).heading, l.width),
                None => (agent.pose.heading, 3.5),
            };
            let f = Vec2::from_heading(tangent);
            let step_lat = (rate * dt).min(width - *lateral);
            let p = agent.pose.position() + f * (agent.speed * dt) + f.perp() * (side.sign() * step_lat);
            *lateral += step_lat;
            agent.pose = Pose {
                x: p.x,
                y: p.y,
                heading: normalize_angle(tangent + side.sign() * rate.atan2(agent.speed.max(0.1))),
            };
            if *lateral >= width {
                machine.phase = Phase::Done;
                agent.lane = map.lane_for_pose(agent.pose.position(), tangent).map(|l| l.id.clone());
            }
        } else if agent.class.is_vehicle() {
            follow_lane(agent, map, dt);
        } else {
            advance(&mut agent.pose, agent.speed, dt);
        }
        agent.speed = agent.speed.max(0.0);
    }
    SimState { frame: k, agents }
}

/// Simulate until collision (when `collision_stop`), the scenario's
/// termination condition, or `max_duration`.
pub fn run(scenario: &ConcreteScenario, map: &WorldMap, config: &SimConfig) -> Result<SimTrace, SimError> {
    config.validate()?;
    let dt = config.dt;
    let mut state = instantiate(scenario, map)?;
    let mut frames = vec![Frame::from_state(&state, dt)];
    let mut events = Vec::new();
    let mut touching: BTreeSet<(usize, usize)> = BTreeSet::new();
    let max_steps = config.max_steps();
    let reason = loop {
        state = step(&state, map, dt);
        let contacts = detect_collisions(&state.agents);
        let mut new_contact = false;
        let mut now = BTreeSet::new();
        for c in &contacts {
            now.insert((c.a, c.b));
            if !touching.contains(&(c.a, c.b)) {
                new_contact = true;
                events.push(CollisionEvent::new(c, &state, dt, &config.classifier));
            }
        }
        touching = now;
        frames.push(Frame::from_state(&state, dt));
        if config.collision_stop && new_contact {
            break TerminationReason::Collision;
        }
        if scenario.termination.as_ref().is_some_and(|t| condition_holds(t, &state, dt)) {
            break TerminationReason::ScriptTerminate;
        }
        if state.frame >= max_steps {
            break TerminationReason::Timeout;
        }
    };
    Ok(SimTrace { dt, frames, events, termination_reason: reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{BehaviorSpec, ConcreteObject, Side};

    fn car(name: &str, placement: Placement, speed: f64, behavior: Option<BehaviorSpec>) -> ConcreteObject {
        ConcreteObject {
            name: name.into(),
            class: AgentClass::Car,
            placement,
            length: 4.5,
            width: 2.0,
            heading_override: None,
            speed,
            behavior,
        }
    }

    fn scenario(objects: Vec<ConcreteObject>) -> ConcreteScenario {
        ConcreteScenario { seed: 0, params: vec![], objects, requirements: vec![], termination: None }
    }

    fn always(action: Action) -> Option<BehaviorSpec> {
        Some(BehaviorSpec { action, trigger: TriggerCondition::Always })
    }

    #[test]
    fn ahead_of_geometry() {
        let mut ped = car("ped", Placement::AheadOf { target: "ego".into(), distance: 20.0 }, 0.0, None);
        ped.class = AgentClass::Pedestrian;
        let s = scenario(vec![car("ego", Placement::Absolute { x: 0.0, y: 0.0, heading: 0.0 }, 0.0, None), ped]);
        let st = instantiate(&s, &map::builtin_straight()).unwrap();
        assert_eq!(st.agents[1].pose, Pose { x: 20.0, y: 0.0, heading: 0.0 });
    }

    #[test]
    fn coincident_cars_rejected() {
        let p = Placement::Absolute { x: 0.0, y: 0.0, heading: 0.0 };
        let s = scenario(vec![car("ego", p.clone(), 0.0, None), car("b", p, 0.0, None)]);
        assert_eq!(
            instantiate(&s, &map::builtin_straight()),
            Err(PlacementError::Overlap { a: "ego".into(), b: "b".into() })
        );
    }

    #[test]
    fn unknown_lane_rejected() {
        let s = scenario(vec![car("ego", Placement::OnLane { lane: "nope".into(), s: 1.0 }, 0.0, None)]);
        assert!(matches!(instantiate(&s, &map::builtin_straight()), Err(PlacementError::UnknownLane { .. })));
    }

    #[test]
    fn follow_lane_displacement() {
        let m = map::builtin_straight();
        let s = scenario(vec![car(
            "ego",
            Placement::OnLane { lane: "slow".into(), s: 50.0 },
            10.0,
            always(Action::FollowLane { target_speed: 10.0 }),
        )]);
        let s0 = instantiate(&s, &m).unwrap();
        let s1 = step(&s0, &m, 0.05);
        let d = s1.agents[0].pose.position() - s0.agents[0].pose.position();
        assert!((d.x - 0.5).abs() < 1e-12 && d.y == 0.0, "{d:?}");
        assert_eq!(s1.agents[0].pose.heading, 0.0);
    }

    #[test]
    fn brake_reaches_zero_at_two_seconds() {
        let m = map::builtin_straight();
        let s = scenario(vec![car(
            "ego",
            Placement::OnLane { lane: "slow".into(), s: 0.0 },
            10.0,
            always(Action::Brake { decel: 5.0 }),
        )]);
        let mut st = instantiate(&s, &m).unwrap();
        for k in 1..=60u64 {
            st = step(&st, &m, 0.05);
            let v = st.agents[0].speed;
            let expect = (10.0 - 5.0 * k as f64 * 0.05).max(0.0);
            assert!((v - expect).abs() < 1e-9, "k={k}: {v} vs {expect}");
            if k >= 40 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn lane_end_holds_pose() {
        let m = map::builtin_straight();
        let s = scenario(vec![car(
            "ego",
            Placement::OnLane { lane: "slow".into(), s: 399.0 },
            10.0,
            always(Action::FollowLane { target_speed: 10.0 }),
        )]);
        let mut st = instantiate(&s, &m).unwrap();
        for _ in 0..10 {
            st = step(&st, &m, 0.05);
        }
        let a = &st.agents[0];
        assert_eq!((a.pose.x, a.pose.y), (300.0, -1.75));
        assert!(a.speed <= 10.0);
    }

    #[test]
    fn cut_in_changes_lane() {
        let m = map::builtin_straight();
        let s = scenario(vec![car(
            "ego",
            Placement::OnLane { lane: "slow".into(), s: 0.0 },
            10.0,
            always(Action::CutIn { side: Side::Left, lateral_rate: 1.0 }),
        )]);
        let mut st = instantiate(&s, &m).unwrap();
        for _ in 0..200 {
            st = step(&st, &m, 0.05);
        }
        let a = &st.agents[0];
        assert_eq!(a.lane.as_deref(), Some("fast"));
        assert!((a.pose.y - 1.75).abs() < 0.05, "{:?}", a.pose);
        assert_eq!(a.behavior_state.phase, Phase::Done);
    }

    #[test]
    fn idle_scene_times_out() {
        let s = scenario(vec![
            car("ego", Placement::Absolute { x: 0.0, y: 0.0, heading: 0.0 }, 0.0, None),
            car("b", Placement::Absolute { x: 20.0, y: 0.0, heading: 0.0 }, 0.0, None),
        ]);
        let cfg = SimConfig { max_duration: 2.0, ..SimConfig::default() };
        let t = run(&s, &map::builtin_straight(), &cfg).unwrap();
        assert_eq!(t.termination_reason, TerminationReason::Timeout);
        assert!(t.events.is_empty());
        assert_eq!(t.frames.len(), 41);
        let poses = |f: &Frame| f.agents.iter().map(|a| a.pose).collect::<Vec<_>>();
        assert_eq!(poses(&t.frames[0]), poses(&t.frames[40]));
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { dt: 0.0, ..SimConfig::default() }.validate().is_err());
        assert!(SimConfig { max_duration: 0.01, ..SimConfig::default() }.validate().is_err());
        assert_eq!(SimConfig::default().max_steps(), 600);
    }
}
