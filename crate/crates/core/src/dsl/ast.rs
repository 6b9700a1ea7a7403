//! Syntax tree for scenario scripts.
//!
//! Every node that can be pointed at by a diagnostic is wrapped in
//! [`Spanned`]. Equality on `Spanned` ignores the span, so two trees are equal
//! exactly when they are structurally equal; that is what the formatter
//! round-trip relies on.

use super::diagnostics::Span;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone)]
pub struct Spanned<T> {
    pub node: T,
    pub span: Span,
}

impl<T> Spanned<T> {
    pub fn new(node: T, span: Span) -> Self {
        Spanned { node, span }
    }

    /// Node with a default span, for trees built in code.
    pub fn bare(node: T) -> Self {
        Spanned { node, span: Span::default() }
    }
}

impl<T: PartialEq> PartialEq for Spanned<T> {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

pub type Ident = Spanned<String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentClass {
    Car,
    Truck,
    Pedestrian,
    Bicycle,
}

impl AgentClass {
    pub const ALL: [AgentClass; 4] =
        [AgentClass::Car, AgentClass::Truck, AgentClass::Pedestrian, AgentClass::Bicycle];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentClass::Car => "Car",
            AgentClass::Truck => "Truck",
            AgentClass::Pedestrian => "Pedestrian",
            AgentClass::Bicycle => "Bicycle",
        }
    }

    pub fn from_name(s: &str) -> Option<AgentClass> {
        AgentClass::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Default footprint as (length, width) in meters.
    pub fn default_dims(self) -> (f64, f64) {
        match self {
            AgentClass::Car => (4.5, 2.0),
            AgentClass::Truck => (8.0, 2.5),
            AgentClass::Pedestrian => (0.5, 0.5),
            AgentClass::Bicycle => (1.8, 0.6),
        }
    }

    pub fn is_vehicle(self) -> bool {
        matches!(self, AgentClass::Car | AgentClass::Truck)
    }
}

impl fmt::Display for AgentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Constant(f64),
    Range(f64, f64),
    Choice(Vec<f64>),
}

impl Distribution {
    pub fn is_constant(&self) -> bool {
        matches!(self, Distribution::Constant(_))
    }

    /// Inclusive lower and upper bound of the values this can produce.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self {
            Distribution::Constant(v) => Some((*v, *v)),
            Distribution::Range(lo, hi) => Some((*lo, *hi)),
            Distribution::Choice(vs) if !vs.is_empty() => {
                let lo = vs.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Some((lo, hi))
            }
            Distribution::Choice(_) => None,
        }
    }
}

/// A scalar position in the script: a literal distribution or a name.
/// Names resolve to a `param` or, inside a behavior body, to one of the
/// behavior's formal parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Lit(Distribution),
    Ref(String),
}

pub type Expr = Spanned<Scalar>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// +1 for left (counter-clockwise), -1 for right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Scalar(Scalar),
    Side(Side),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpatialSpec {
    /// `at (x, y)` or `at (x, y, heading_degrees)`
    Absolute { x: Expr, y: Expr, heading: Option<Expr> },
    AheadOf { target: Ident, distance: Expr },
    Behind { target: Ident, distance: Expr },
    LeftOf { target: Ident, offset: Expr },
    RightOf { target: Ident, offset: Expr },
    OnLane { lane: Ident, s: Expr },
}

impl SpatialSpec {
    /// The object this placement is relative to, if any.
    pub fn target(&self) -> Option<&Ident> {
        match self {
            SpatialSpec::AheadOf { target, .. }
            | SpatialSpec::Behind { target, .. }
            | SpatialSpec::LeftOf { target, .. }
            | SpatialSpec::RightOf { target, .. } => Some(target),
            SpatialSpec::Absolute { .. } | SpatialSpec::OnLane { .. } => None,
        }
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            SpatialSpec::Absolute { x, y, heading } => {
                let mut v = vec![x, y];
                v.extend(heading.as_ref());
                v
            }
            SpatialSpec::AheadOf { distance, .. } | SpatialSpec::Behind { distance, .. } => vec![distance],
            SpatialSpec::LeftOf { offset, .. } | SpatialSpec::RightOf { offset, .. } => vec![offset],
            SpatialSpec::OnLane { s, .. } => vec![s],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    /// `distance to ego < m` (subject is the agent running the behavior) or
    /// `distance from <subject> to ego < m`.
    DistanceToEgoBelow { subject: Option<Ident>, meters: Expr },
    /// `time > s`
    TimeElapsed { seconds: Expr },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorCall {
    pub name: Ident,
    pub args: Vec<Spanned<Arg>>,
}

/// Behavior attached to an object: `with behavior Name(args) [when trigger]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorUse {
    pub call: BehaviorCall,
    pub trigger: Option<Spanned<Trigger>>,
}

/// `behavior Name(p, q) = Action(args) [when trigger]`
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorDef {
    pub name: Ident,
    pub params: Vec<Ident>,
    pub body: BehaviorCall,
    pub trigger: Option<Spanned<Trigger>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: Ident,
    pub value: Spanned<Distribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectDecl {
    pub name: Ident,
    pub class: Spanned<AgentClass>,
    pub spatial: Spanned<SpatialSpec>,
    /// `with size (length, width)`; absent means the class default.
    pub size: Option<(Expr, Expr)>,
    /// `with heading deg`; overrides the heading a placement would give.
    pub heading: Option<Expr>,
    /// `with speed v`; initial speed, default 0.
    pub speed: Option<Expr>,
    pub behavior: Option<BehaviorUse>,
}

impl ObjectDecl {
    pub fn is_ego(&self) -> bool {
        self.name.node == EGO
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequireStmt {
    /// `require collision`
    Collision,
    /// `require collision of <kind>`
    CollisionOf(Ident),
    /// `require ego speed above v at collision`
    EgoSpeedAbove(Spanned<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminateStmt {
    pub trigger: Spanned<Trigger>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioAst {
    pub params: Vec<ParamDecl>,
    pub behaviors: Vec<BehaviorDef>,
    pub objects: Vec<ObjectDecl>,
    pub requirements: Vec<Spanned<RequireStmt>>,
    pub termination: Option<TerminateStmt>,
}

pub const EGO: &str = "ego";

/// Collision kinds accepted by `require collision of`.
pub const COLLISION_KINDS: [&str; 5] =
    ["vehicle-cyclist", "vehicle-pedestrian", "t-bone", "rear-end", "other"];

impl ScenarioAst {
    pub fn object(&self, name: &str) -> Option<&ObjectDecl> {
        self.objects.iter().find(|o| o.name.node == name)
    }

    pub fn behavior(&self, name: &str) -> Option<&BehaviorDef> {
        self.behaviors.iter().find(|b| b.name.node == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name.node == name)
    }

    /// Number of triggers attached anywhere (behavior definitions, use sites,
    /// and the termination condition).
    pub fn trigger_count(&self) -> usize {
        self.behaviors.iter().filter(|b| b.trigger.is_some()).count()
            + self
                .objects
                .iter()
                .filter(|o| o.behavior.as_ref().is_some_and(|b| b.trigger.is_some()))
                .count()
            + usize::from(self.termination.is_some())
    }
}

/// Built-in behavior actions and their parameter kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Number,
    Side,
}

pub fn builtin_signature(name: &str) -> Option<&'static [ArgKind]> {
    use ArgKind::*;
    Some(match name {
        "Idle" | "Stopped" => &[],
        "FollowLane" | "Brake" => &[Number],
        "Crossing" | "CutIn" => &[Side, Number],
        _ => return None,
    })
}
