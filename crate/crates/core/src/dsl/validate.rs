//! Name resolution and semantic checks over a parsed script.
//!
//! Each failed check produces exactly one diagnostic. Behavior definitions
//! are checked both on their own and at every use site, with the call's
//! arguments substituted for the definition's formals, so a bad value passed
//! through a user behavior is reported at the call.

use super::ast::*;
use super::diagnostics::{Code, Diagnostic, Span};
use std::collections::{HashMap, HashSet};

pub fn validate(ast: &ScenarioAst) -> Vec<Diagnostic> {
    let mut v = Validator { ast, diags: Vec::new(), used_params: HashSet::new() };
    v.check_objects();
    v.check_spatial_graph();
    v.check_behavior_defs();
    v.check_termination();
    v.check_requirements();
    v.warn_unused();
    v.diags.sort_by_key(|d| (d.span.start, d.span.end));
    v.diags
}

struct Validator<'a> {
    ast: &'a ScenarioAst,
    diags: Vec<Diagnostic>,
    used_params: HashSet<&'a str>,
}

/// What a scalar position evaluates to after name resolution.
enum Value {
    Number(Option<(f64, f64)>),
    Side,
    Unresolved,
}

type Bindings<'a> = HashMap<&'a str, &'a Spanned<Arg>>;

#[derive(Clone, Copy)]
enum Constraint {
    NonNegative,
    Positive,
}

impl Constraint {
    fn holds(self, lo: f64) -> bool {
        match self {
            Constraint::NonNegative => lo >= 0.0,
            Constraint::Positive => lo > 0.0,
        }
    }

    fn describe(self) -> &'static str {
        match self {
            Constraint::NonNegative => "non-negative",
            Constraint::Positive => "strictly positive",
        }
    }
}

fn builtin_constraint(name: &str, index: usize) -> Option<Constraint> {
    match (name, index) {
        ("FollowLane", 0) | ("Crossing", 1) => Some(Constraint::NonNegative),
        ("Brake", 0) | ("CutIn", 1) => Some(Constraint::Positive),
        _ => None,
    }
}

impl<'a> Validator<'a> {
    fn push(&mut self, code: Code, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::new(code, span, msg));
    }

    /// Resolve a scalar; `formals` are the enclosing behavior's parameter
    /// names, `bindings` the use-site arguments bound to them (if known).
    fn value_of(
        &mut self,
        scalar: &'a Scalar,
        span: Span,
        formals: &[&'a str],
        bindings: Option<&Bindings<'a>>,
        report: bool,
    ) -> Value {
        match scalar {
            Scalar::Lit(d) => Value::Number(d.bounds()),
            Scalar::Ref(name) => {
                if formals.contains(&name.as_str()) {
                    return match bindings.and_then(|b| b.get(name.as_str())) {
                        Some(arg) => match &arg.node {
                            Arg::Side(_) => Value::Side,
                            // call-site arguments were resolved (and reported) at the call
                            Arg::Scalar(s) => self.value_of(s, arg.span, &[], None, false),
                        },
                        None => Value::Number(None),
                    };
                }
                match self.ast.param(name) {
                    Some(p) => {
                        self.used_params.insert(p.name.node.as_str());
                        Value::Number(p.value.node.bounds())
                    }
                    None => {
                        if report {
                            self.push(Code::UnresolvedRef, span, format!("`{name}` is not a declared parameter"));
                        }
                        Value::Unresolved
                    }
                }
            }
        }
    }

    fn check_number(&mut self, expr: &'a Expr, constraint: Option<Constraint>, code: Code, what: &str) {
        if let Value::Number(Some((lo, _))) = self.value_of(&expr.node, expr.span, &[], None, true) {
            if let Some(c) = constraint {
                if !c.holds(lo) {
                    self.push(code, expr.span, format!("{what} must be {}", c.describe()));
                }
            }
        }
    }

    fn check_objects(&mut self) {
        let ast = self.ast;
        for obj in &ast.objects {
            for e in obj.spatial.node.exprs() {
                self.check_number(e, None, Code::ArgRange, "");
            }
            if let SpatialSpec::OnLane { s, .. } = &obj.spatial.node {
                self.check_number(s, Some(Constraint::NonNegative), Code::ArgRange, "lane arc-length");
            }
            if let Some((l, w)) = &obj.size {
                for e in [l, w] {
                    // literal sizes were checked by the parser
                    if matches!(e.node, Scalar::Ref(_)) {
                        self.check_number(e, Some(Constraint::Positive), Code::NonPositiveDims, "size");
                    }
                }
            }
            if let Some(h) = &obj.heading {
                self.check_number(h, None, Code::ArgRange, "");
            }
            if let Some(v) = &obj.speed {
                self.check_number(v, Some(Constraint::NonNegative), Code::ArgRange, "initial speed");
            }
            if let Some(b) = &obj.behavior {
                self.check_use(obj, b);
            }
        }
    }

    fn check_use(&mut self, obj: &'a ObjectDecl, use_: &'a BehaviorUse) {
        let call = &use_.call;
        let name = call.name.node.as_str();
        // Resolve every call argument once, at the call site.
        let mut arg_values = Vec::new();
        for arg in &call.args {
            let v = match &arg.node {
                Arg::Side(_) => Value::Side,
                Arg::Scalar(s) => self.value_of(s, arg.span, &[], None, true),
            };
            arg_values.push(v);
        }

        if let Some(sig) = builtin_signature(name) {
            if call.args.len() != sig.len() {
                self.push(
                    Code::Arity,
                    call.name.span,
                    format!("`{name}` takes {} argument(s), {} given", sig.len(), call.args.len()),
                );
            } else {
                for (i, (arg, value)) in call.args.iter().zip(&arg_values).enumerate() {
                    self.check_arg(name, i, sig[i], value, arg.span);
                }
            }
            if let Some(t) = &use_.trigger {
                self.check_trigger(&t.node, t.span, Some(obj), &[], None);
            }
            return;
        }

        let Some(def) = self.ast.behavior(name) else {
            self.push(Code::UnresolvedRef, call.name.span, format!("`{name}` is not a defined or built-in behavior"));
            return;
        };
        if call.args.len() != def.params.len() {
            self.push(
                Code::Arity,
                call.name.span,
                format!("`{name}` takes {} argument(s), {} given", def.params.len(), call.args.len()),
            );
            return;
        }
        if let (Some(t), Some(_)) = (&use_.trigger, &def.trigger) {
            self.push(
                Code::DoubleTrigger,
                t.span,
                format!("`{name}` already has a trigger in its definition; remove one of them"),
            );
        }

        let formals: Vec<&str> = def.params.iter().map(|p| p.node.as_str()).collect();
        let bindings: Bindings = formals.iter().copied().zip(call.args.iter()).collect();

        // Check the body's built-in positions against the substituted arguments.
        if let Some(sig) = builtin_signature(&def.body.name.node) {
            if def.body.args.len() == sig.len() {
                for (i, body_arg) in def.body.args.iter().enumerate() {
                    let Arg::Scalar(Scalar::Ref(formal)) = &body_arg.node else { continue };
                    let Some(k) = formals.iter().position(|f| f == formal) else { continue };
                    self.check_arg(&def.body.name.node, i, sig[i], &arg_values[k], call.args[k].span);
                }
            }
        }
        if let Some(t) = &use_.trigger {
            self.check_trigger(&t.node, t.span, Some(obj), &[], None);
        } else if let Some(t) = &def.trigger {
            // literal thresholds were checked with the definition; only the
            // ones bound to a formal depend on this call
            let threshold = match &t.node {
                Trigger::DistanceToEgoBelow { meters, .. } => meters,
                Trigger::TimeElapsed { seconds } => seconds,
            };
            if matches!(&threshold.node, Scalar::Ref(n) if formals.contains(&n.as_str())) {
                self.check_trigger_values(&t.node, call.name.span, &formals, Some(&bindings));
            }
            self.check_trigger_subject(&t.node, call.name.span, Some(obj));
        }
    }

    fn check_arg(&mut self, builtin: &str, index: usize, kind: ArgKind, value: &Value, span: Span) {
        match (kind, value) {
            (ArgKind::Number, Value::Side) => {
                self.push(Code::ArgType, span, format!("argument {} of `{builtin}` must be a number", index + 1))
            }
            (ArgKind::Side, Value::Number(_)) => self.push(
                Code::ArgType,
                span,
                format!("argument {} of `{builtin}` must be `left` or `right`", index + 1),
            ),
            (ArgKind::Number, Value::Number(Some((lo, _)))) => {
                if let Some(c) = builtin_constraint(builtin, index) {
                    if !c.holds(*lo) {
                        self.push(
                            Code::ArgRange,
                            span,
                            format!("argument {} of `{builtin}` must be {}", index + 1, c.describe()),
                        );
                    }
                }
            }
            _ => {}
        }
    }

    fn check_trigger(
        &mut self,
        t: &'a Trigger,
        span: Span,
        owner: Option<&'a ObjectDecl>,
        formals: &[&'a str],
        bindings: Option<&Bindings<'a>>,
    ) {
        self.check_trigger_values(t, span, formals, bindings);
        self.check_trigger_subject(t, span, owner);
    }

    fn check_trigger_values(&mut self, t: &'a Trigger, span: Span, formals: &[&'a str], bindings: Option<&Bindings<'a>>) {
        let (expr, constraint, what) = match t {
            Trigger::DistanceToEgoBelow { meters, .. } => (meters, Constraint::Positive, "trigger distance"),
            Trigger::TimeElapsed { seconds } => (seconds, Constraint::NonNegative, "trigger time"),
        };
        let report_refs = bindings.is_none();
        match self.value_of(&expr.node, expr.span, formals, bindings, report_refs) {
            Value::Number(Some((lo, _))) if !constraint.holds(lo) => {
                let at = if bindings.is_some() { span } else { expr.span };
                self.push(Code::TriggerValue, at, format!("{what} must be {}", constraint.describe()));
            }
            Value::Side => self.push(Code::ArgType, expr.span, format!("{what} must be a number")),
            _ => {}
        }
    }

    /// `owner` is the object the behavior runs on; `None` for `terminate`.
    fn check_trigger_subject(&mut self, t: &'a Trigger, span: Span, owner: Option<&'a ObjectDecl>) {
        let Trigger::DistanceToEgoBelow { subject, .. } = t else { return };
        match (subject, owner) {
            (Some(s), _) => {
                if self.ast.object(&s.node).is_none() {
                    self.push(Code::UnresolvedRef, s.span, format!("`{}` is not a declared object", s.node));
                } else if s.node == EGO {
                    self.push(Code::TriggerSubject, s.span, "distance from ego to ego is always zero");
                }
            }
            (None, None) => self.push(
                Code::TriggerSubject,
                span,
                "`terminate when distance` needs a subject: `distance from <object> to ego < d`",
            ),
            (None, Some(o)) if o.is_ego() => {
                self.push(Code::TriggerSubject, span, "a distance-to-ego trigger cannot run on ego itself")
            }
            (None, Some(_)) => {}
        }
    }

    fn check_behavior_defs(&mut self) {
        let ast = self.ast;
        for def in &ast.behaviors {
            let formals: Vec<&str> = def.params.iter().map(|p| p.node.as_str()).collect();
            let body = &def.body;
            match builtin_signature(&body.name.node) {
                None => {
                    self.push(
                        Code::NotBuiltin,
                        body.name.span,
                        format!(
                            "behavior bodies must be a built-in action (Idle, FollowLane, Brake, Crossing, CutIn, Stopped), not `{}`",
                            body.name.node
                        ),
                    );
                }
                Some(sig) if sig.len() != body.args.len() => {
                    self.push(
                        Code::Arity,
                        body.name.span,
                        format!("`{}` takes {} argument(s), {} given", body.name.node, sig.len(), body.args.len()),
                    );
                }
                Some(sig) => {
                    for (i, arg) in body.args.iter().enumerate() {
                        let value = match &arg.node {
                            Arg::Side(_) => Value::Side,
                            Arg::Scalar(s) => self.value_of(s, arg.span, &formals, None, true),
                        };
                        self.check_arg(&body.name.node, i, sig[i], &value, arg.span);
                    }
                }
            }
            if let Some(t) = &def.trigger {
                // subject-less distance is bound per use site
                self.check_trigger_values(&t.node, t.span, &formals, None);
                if let Trigger::DistanceToEgoBelow { subject: Some(_), .. } = &t.node {
                    self.check_trigger_subject(&t.node, t.span, None);
                }
            }
        }
    }

    fn check_termination(&mut self) {
        if let Some(term) = &self.ast.termination {
            self.check_trigger(&term.trigger.node, term.trigger.span, None, &[], None);
        }
    }

    fn check_requirements(&mut self) {
        for req in &self.ast.requirements {
            if let RequireStmt::CollisionOf(kind) = &req.node {
                if !COLLISION_KINDS.contains(&kind.node.as_str()) {
                    self.push(
                        Code::UnsupportedRequirement,
                        kind.span,
                        format!("unknown collision kind `{}`; expected one of {}", kind.node, COLLISION_KINDS.join(", ")),
                    );
                }
            }
        }
    }

    /// Every relative placement must point at an earlier declaration. Cycles
    /// are reported once each (at their earliest member); remaining
    /// backwards-in-file references are forward references.
    fn check_spatial_graph(&mut self) {
        let ast = self.ast;
        let index: HashMap<&str, usize> =
            ast.objects.iter().enumerate().map(|(i, o)| (o.name.node.as_str(), i)).collect();
        let mut edges: Vec<Option<usize>> = vec![None; ast.objects.len()];
        for (i, obj) in ast.objects.iter().enumerate() {
            if let Some(target) = obj.spatial.node.target() {
                match index.get(target.node.as_str()) {
                    Some(&j) => edges[i] = Some(j),
                    None => self.push(
                        Code::UnresolvedRef,
                        target.span,
                        format!("`{}` is not a declared object", target.node),
                    ),
                }
            }
        }

        // Each node has out-degree <= 1, so walking from each node either ends
        // or revisits a node of the current walk.
        let mut on_cycle = vec![false; edges.len()];
        let mut state = vec![0u8; edges.len()]; // 0 new, 1 on current walk, 2 done
        for start in 0..edges.len() {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(n) = cur {
                match state[n] {
                    0 => {
                        state[n] = 1;
                        path.push(n);
                        cur = edges[n];
                    }
                    1 => {
                        let from = path.iter().position(|&p| p == n).expect("node on walk");
                        let members = &path[from..];
                        for &m in members {
                            on_cycle[m] = true;
                        }
                        let first = *members.iter().min().expect("non-empty cycle");
                        let names: Vec<&str> = cycle_order(members, first, &edges)
                            .iter()
                            .map(|&m| ast.objects[m].name.node.as_str())
                            .collect();
                        self.push(
                            Code::CircularSpatial,
                            ast.objects[first].spatial.span,
                            format!("circular relative placement: {} -> {}", names.join(" -> "), names[0]),
                        );
                        break;
                    }
                    _ => break,
                }
            }
            for n in path {
                state[n] = 2;
            }
        }

        for (i, obj) in ast.objects.iter().enumerate() {
            if let Some(j) = edges[i] {
                if j >= i && !on_cycle[i] {
                    let target = obj.spatial.node.target().expect("edge implies target");
                    self.push(
                        Code::ForwardRef,
                        target.span,
                        format!(
                            "`{}` is placed relative to `{}`, which is declared later; move `{}` above it",
                            obj.name.node, target.node, target.node
                        ),
                    );
                }
            }
        }
    }

    fn warn_unused(&mut self) {
        let ast = self.ast;
        // behavior bodies may reference params without any use site
        for def in &ast.behaviors {
            let formals: Vec<&str> = def.params.iter().map(|p| p.node.as_str()).collect();
            let mut exprs: Vec<&Scalar> = def
                .body
                .args
                .iter()
                .filter_map(|a| match &a.node {
                    Arg::Scalar(s) => Some(s),
                    Arg::Side(_) => None,
                })
                .collect();
            if let Some(t) = &def.trigger {
                exprs.push(match &t.node {
                    Trigger::DistanceToEgoBelow { meters, .. } => &meters.node,
                    Trigger::TimeElapsed { seconds } => &seconds.node,
                });
            }
            for s in exprs {
                if let Scalar::Ref(n) = s {
                    if !formals.contains(&n.as_str()) && ast.param(n).is_some() {
                        self.used_params.insert(n.as_str());
                    }
                }
            }
        }
        if let Some(term) = &ast.termination {
            let e = match &term.trigger.node {
                Trigger::DistanceToEgoBelow { meters, .. } => meters,
                Trigger::TimeElapsed { seconds } => seconds,
            };
            if let Scalar::Ref(n) = &e.node {
                self.used_params.insert(n.as_str());
            }
        }
        for p in &ast.params {
            if !self.used_params.contains(p.name.node.as_str()) {
                self.push(Code::UnusedParam, p.name.span, format!("parameter `{}` is never used", p.name.node));
            }
        }
        let used: HashSet<&str> = ast
            .objects
            .iter()
            .filter_map(|o| o.behavior.as_ref().map(|b| b.call.name.node.as_str()))
            .collect();
        for def in &ast.behaviors {
            if !used.contains(def.name.node.as_str()) {
                self.push(Code::UnusedBehavior, def.name.span, format!("behavior `{}` is never used", def.name.node));
            }
        }
    }
}

/// Cycle members starting at `first`, in edge order.
fn cycle_order(members: &[usize], first: usize, edges: &[Option<usize>]) -> Vec<usize> {
    let mut out = vec![first];
    let mut cur = edges[first];
    while let Some(n) = cur {
        if n == first || out.len() > members.len() {
            break;
        }
        out.push(n);
        cur = edges[n];
    }
    out
}
