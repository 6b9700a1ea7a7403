//! Resolving distributions into concrete scenarios.
//!
//! # Generator
//!
//! Sampling uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64(seed)`).
//! A uniform draw is `(next_u64() >> 11) * 2^-53`, giving `u` in `[0, 1)`.
//!
//! * `Constant(v)` consumes no randomness.
//! * `Range(lo, hi)` draws once: `lo + u * (hi - lo)`, nudged below `hi` if
//!   rounding lands on it.
//! * `Choice[v0..vn]` draws once: index `floor(u * n)`.
//!
//! # Resolution order
//!
//! Parameters first, in declaration order (each exactly once, however often
//! referenced). Then objects in declaration order; within an object:
//! placement scalars in source order, size (length, width), heading, speed,
//! then behavior call arguments left to right, then the behavior body's
//! literal arguments, then the trigger threshold.

use super::ast::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("object `{object}`: lane arc-length {s} is outside lane `{lane}` (length {length:?})")]
    LaneOutOfRange { object: String, lane: String, s: f64, length: Option<f64> },
    #[error("unresolved name `{0}`; run validation first")]
    Unresolved(String),
    #[error("object `{object}`: {message}")]
    InvalidValue { object: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationError {
    #[error("requested zero variations")]
    ZeroCount,
    #[error("could not draw a distinct variation #{index} after {attempts} attempts")]
    NotDistinct { index: usize, attempts: u32 },
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Lane length lookup used to bound `on lane` placements.
pub trait LaneExtents {
    fn lane_length(&self, lane: &str) -> Option<f64>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Placement {
    /// Heading in radians.
    Absolute { x: f64, y: f64, heading: f64 },
    AheadOf { target: String, distance: f64 },
    Behind { target: String, distance: f64 },
    LeftOf { target: String, offset: f64 },
    RightOf { target: String, offset: f64 },
    OnLane { lane: String, s: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Idle,
    FollowLane { target_speed: f64 },
    Brake { decel: f64 },
    Crossing { side: Side, speed: f64 },
    CutIn { side: Side, lateral_rate: f64 },
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TriggerCondition {
    DistanceToEgoBelow { subject: String, meters: f64 },
    TimeElapsed { seconds: f64 },
    Always,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    pub action: Action,
    pub trigger: TriggerCondition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteObject {
    pub name: String,
    pub class: AgentClass,
    pub placement: Placement,
    pub length: f64,
    pub width: f64,
    /// Radians; replaces the heading the placement would give.
    pub heading_override: Option<f64>,
    pub speed: f64,
    pub behavior: Option<BehaviorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Requirement {
    Collision,
    CollisionOf { collision: String },
    EgoSpeedAbove { speed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteScenario {
    pub seed: u64,
    pub params: Vec<(String, f64)>,
    pub objects: Vec<ConcreteObject>,
    pub requirements: Vec<Requirement>,
    pub termination: Option<TriggerCondition>,
}

impl ConcreteScenario {
    /// Equality ignoring the seed that produced the sample.
    pub fn same_content(&self, other: &ConcreteScenario) -> bool {
        self.params == other.params
            && self.objects == other.objects
            && self.requirements == other.requirements
            && self.termination == other.termination
    }

    pub fn object(&self, name: &str) -> Option<&ConcreteObject> {
        self.objects.iter().find(|o| o.name == name)
    }
}

pub(crate) struct Uniform(ChaCha8Rng);

impl Uniform {
    pub(crate) fn new(seed: u64) -> Self {
        Uniform(ChaCha8Rng::seed_from_u64(seed))
    }

    pub(crate) fn next_unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn draw(&mut self, d: &Distribution) -> f64 {
        match d {
            Distribution::Constant(v) => *v,
            Distribution::Range(lo, hi) => {
                let v = lo + self.next_unit() * (hi - lo);
                if v >= *hi {
                    hi.next_down().max(*lo)
                } else {
                    v
                }
            }
            Distribution::Choice(vs) => {
                let i = ((self.next_unit() * vs.len() as f64) as usize).min(vs.len() - 1);
                vs[i]
            }
        }
    }
}

enum Bound {
    Number(f64),
    Side(Side),
}

struct Sampler<'a> {
    ast: &'a ScenarioAst,
    rng: Uniform,
    params: HashMap<&'a str, f64>,
}

impl<'a> Sampler<'a> {
    fn scalar(&mut self, s: &Scalar, formals: &HashMap<&str, Bound>, object: &str) -> Result<f64, SampleError> {
        match s {
            Scalar::Lit(d) => Ok(self.rng.draw(d)),
            Scalar::Ref(name) => match formals.get(name.as_str()) {
                Some(Bound::Number(v)) => Ok(*v),
                Some(Bound::Side(_)) => Err(SampleError::InvalidValue {
                    object: object.to_string(),
                    message: format!("`{name}` is a side, not a number"),
                }),
                None => self.params.get(name.as_str()).copied().ok_or_else(|| SampleError::Unresolved(name.clone())),
            },
        }
    }

    fn arg(&mut self, a: &Arg, formals: &HashMap<&str, Bound>, object: &str) -> Result<Bound, SampleError> {
        match a {
            Arg::Side(s) => Ok(Bound::Side(*s)),
            Arg::Scalar(Scalar::Ref(name)) if matches!(formals.get(name.as_str()), Some(Bound::Side(_))) => {
                match formals.get(name.as_str()) {
                    Some(Bound::Side(s)) => Ok(Bound::Side(*s)),
                    _ => unreachable!(),
                }
            }
            Arg::Scalar(s) => Ok(Bound::Number(self.scalar(s, formals, object)?)),
        }
    }

    fn trigger(&mut self, t: &Trigger, formals: &HashMap<&str, Bound>, owner: &str) -> Result<TriggerCondition, SampleError> {
        Ok(match t {
            Trigger::DistanceToEgoBelow { subject, meters } => TriggerCondition::DistanceToEgoBelow {
                subject: subject.as_ref().map(|s| s.node.clone()).unwrap_or_else(|| owner.to_string()),
                meters: self.scalar(&meters.node, formals, owner)?,
            },
            Trigger::TimeElapsed { seconds } => {
                TriggerCondition::TimeElapsed { seconds: self.scalar(&seconds.node, formals, owner)? }
            }
        })
    }

    fn behavior(&mut self, obj: &ObjectDecl, use_: &BehaviorUse) -> Result<BehaviorSpec, SampleError> {
        let owner = obj.name.node.as_str();
        let none = HashMap::new();
        let mut call_args = Vec::new();
        for a in &use_.call.args {
            call_args.push(self.arg(&a.node, &none, owner)?);
        }
        let (action_name, body_args, def_trigger, formals): (&str, Vec<Bound>, Option<&Trigger>, HashMap<&str, Bound>) =
            match self.ast.behavior(&use_.call.name.node) {
                Some(def) if builtin_signature(&use_.call.name.node).is_none() => {
                    let formals: HashMap<&str, Bound> =
                        def.params.iter().map(|p| p.node.as_str()).zip(call_args).collect();
                    let mut body = Vec::new();
                    for a in &def.body.args {
                        body.push(self.arg(&a.node, &formals, owner)?);
                    }
                    (def.body.name.node.as_str(), body, def.trigger.as_ref().map(|t| &t.node), formals)
                }
                _ => (use_.call.name.node.as_str(), call_args, None, HashMap::new()),
            };
        let trigger = match (use_.trigger.as_ref(), def_trigger) {
            (Some(t), _) => self.trigger(&t.node, &none, owner)?,
            (None, Some(t)) => self.trigger(t, &formals, owner)?,
            (None, None) => TriggerCondition::Always,
        };
        let bad = |m: &str| SampleError::InvalidValue { object: owner.to_string(), message: m.to_string() };
        let num = |b: &Bound| match b {
            Bound::Number(v) => Ok(*v),
            Bound::Side(_) => Err(bad("expected a number, found a side")),
        };
        let side = |b: &Bound| match b {
            Bound::Side(s) => Ok(*s),
            Bound::Number(_) => Err(bad("expected `left` or `right`")),
        };
        let action = match (action_name, body_args.as_slice()) {
            ("Idle", []) => Action::Idle,
            ("Stopped", []) => Action::Stopped,
            ("FollowLane", [v]) => Action::FollowLane { target_speed: num(v)? },
            ("Brake", [d]) => Action::Brake { decel: num(d)? },
            ("Crossing", [s, v]) => Action::Crossing { side: side(s)?, speed: num(v)? },
            ("CutIn", [s, r]) => Action::CutIn { side: side(s)?, lateral_rate: num(r)? },
            (name, _) => return Err(bad(&format!("`{name}` is not a built-in action with that arity"))),
        };
        match action {
            Action::Brake { decel } if decel <= 0.0 => return Err(bad("brake deceleration must be positive")),
            Action::CutIn { lateral_rate, .. } if lateral_rate <= 0.0 => {
                return Err(bad("cut-in lateral rate must be positive"))
            }
            Action::FollowLane { target_speed: v } | Action::Crossing { speed: v, .. } if v < 0.0 => {
                return Err(bad("speed must be non-negative"))
            }
            _ => {}
        }
        Ok(BehaviorSpec { action, trigger })
    }

    fn object(&mut self, obj: &ObjectDecl, lanes: Option<&dyn LaneExtents>) -> Result<ConcreteObject, SampleError> {
        let name = obj.name.node.as_str();
        let none = HashMap::new();
        let placement = match &obj.spatial.node {
            SpatialSpec::Absolute { x, y, heading } => {
                let x = self.scalar(&x.node, &none, name)?;
                let y = self.scalar(&y.node, &none, name)?;
                let h = match heading {
                    Some(h) => self.scalar(&h.node, &none, name)?,
                    None => 0.0,
                };
                Placement::Absolute { x, y, heading: h.to_radians() }
            }
            SpatialSpec::AheadOf { target, distance } => Placement::AheadOf {
                target: target.node.clone(),
                distance: self.scalar(&distance.node, &none, name)?,
            },
            SpatialSpec::Behind { target, distance } => Placement::Behind {
                target: target.node.clone(),
                distance: self.scalar(&distance.node, &none, name)?,
            },
            SpatialSpec::LeftOf { target, offset } => {
                Placement::LeftOf { target: target.node.clone(), offset: self.scalar(&offset.node, &none, name)? }
            }
            SpatialSpec::RightOf { target, offset } => {
                Placement::RightOf { target: target.node.clone(), offset: self.scalar(&offset.node, &none, name)? }
            }
            SpatialSpec::OnLane { lane, s } => {
                let s = self.scalar(&s.node, &none, name)?;
                let length = lanes.and_then(|l| l.lane_length(&lane.node));
                let out_of_range = s < 0.0 || length.is_some_and(|len| s > len);
                if out_of_range {
                    return Err(SampleError::LaneOutOfRange {
                        object: name.to_string(),
                        lane: lane.node.clone(),
                        s,
                        length,
                    });
                }
                Placement::OnLane { lane: lane.node.clone(), s }
            }
        };
        let (length, width) = match &obj.size {
            Some((l, w)) => (self.scalar(&l.node, &none, name)?, self.scalar(&w.node, &none, name)?),
            None => obj.class.node.default_dims(),
        };
        if length <= 0.0 || width <= 0.0 {
            return Err(SampleError::InvalidValue {
                object: name.to_string(),
                message: format!("size ({length}, {width}) must be positive"),
            });
        }
        let heading_override = match &obj.heading {
            Some(h) => Some(self.scalar(&h.node, &none, name)?.to_radians()),
            None => None,
        };
        let speed = match &obj.speed {
            Some(v) => self.scalar(&v.node, &none, name)?,
            None => 0.0,
        };
        if speed < 0.0 {
            return Err(SampleError::InvalidValue { object: name.to_string(), message: "speed must be non-negative".into() });
        }
        let behavior = match &obj.behavior {
            Some(b) => Some(self.behavior(obj, b)?),
            None => None,
        };
        Ok(ConcreteObject {
            name: name.to_string(),
            class: obj.class.node,
            placement,
            length,
            width,
            heading_override,
            speed,
            behavior,
        })
    }
}

/// Resolve every distribution in `ast` under `seed`. `on lane` arc-lengths
/// are only checked for non-negativity; use [`sample_parameters_on`] to
/// check them against real lane lengths.
pub fn sample_parameters(ast: &ScenarioAst, seed: u64) -> Result<ConcreteScenario, SampleError> {
    sample_inner(ast, seed, None)
}

pub fn sample_parameters_on(ast: &ScenarioAst, seed: u64, lanes: &dyn LaneExtents) -> Result<ConcreteScenario, SampleError> {
    sample_inner(ast, seed, Some(lanes))
}

fn sample_inner(ast: &ScenarioAst, seed: u64, lanes: Option<&dyn LaneExtents>) -> Result<ConcreteScenario, SampleError> {
    let mut s = Sampler { ast, rng: Uniform::new(seed), params: HashMap::new() };
    let mut params = Vec::with_capacity(ast.params.len());
    for p in &ast.params {
        let v = s.rng.draw(&p.value.node);
        s.params.insert(p.name.node.as_str(), v);
        params.push((p.name.node.clone(), v));
    }
    let mut objects = Vec::with_capacity(ast.objects.len());
    for o in &ast.objects {
        objects.push(s.object(o, lanes)?);
    }
    let requirements = ast
        .requirements
        .iter()
        .map(|r| match &r.node {
            RequireStmt::Collision => Requirement::Collision,
            RequireStmt::CollisionOf(k) => Requirement::CollisionOf { collision: k.node.clone() },
            RequireStmt::EgoSpeedAbove(v) => Requirement::EgoSpeedAbove { speed: v.node },
        })
        .collect();
    let termination = match &ast.termination {
        Some(t) => {
            let none = HashMap::new();
            Some(s.trigger(&t.trigger.node, &none, EGO)?)
        }
        None => None,
    };
    Ok(ConcreteScenario { seed, params, objects, requirements, termination })
}

/// Maximum re-draws per variation before giving up on distinctness.
pub const MAX_VARIATION_RETRIES: u32 = 64;

/// Draw `n` pairwise-distinct samples. Variation `i` first uses seed
/// `base_seed + i`; if that duplicates an earlier variation, retry `r`
/// (0-based) uses `base_seed + i + n + r`. All arithmetic wraps.
pub fn sample_variations(
    ast: &ScenarioAst,
    n: usize,
    base_seed: u64,
    lanes: Option<&dyn LaneExtents>,
) -> Result<Vec<ConcreteScenario>, VariationError> {
    if n == 0 {
        return Err(VariationError::ZeroCount);
    }
    let mut out: Vec<ConcreteScenario> = Vec::with_capacity(n);
    for i in 0..n {
        let seed_i = base_seed.wrapping_add(i as u64);
        let mut candidate = sample_inner(ast, seed_i, lanes)?;
        let mut retry = 0u32;
        while out.iter().any(|prev| prev.same_content(&candidate)) {
            if retry >= MAX_VARIATION_RETRIES {
                return Err(VariationError::NotDistinct { index: i, attempts: retry + 1 });
            }
            let seed = seed_i.wrapping_add(n as u64).wrapping_add(retry as u64);
            candidate = sample_inner(ast, seed, lanes)?;
            retry += 1;
        }
        out.push(candidate);
    }
    Ok(out)
}
