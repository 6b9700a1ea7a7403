//! Canonical pretty-printer.
//!
//! Layout: parameters, behavior definitions, objects, requirements, then the
//! termination condition, each group separated by a blank line. Object
//! properties are printed in the order size, heading, speed, behavior.
//! Numbers use the shortest representation that reads back to the same
//! `f64` and always carry a decimal point or exponent (`5.0`, `1e-7`).

use super::ast::*;
use std::fmt::Write;

pub fn format_number(v: f64) -> String {
    format!("{v:?}")
}

fn dist(d: &Distribution) -> String {
    match d {
        Distribution::Constant(v) => format_number(*v),
        Distribution::Range(lo, hi) => format!("Range({}, {})", format_number(*lo), format_number(*hi)),
        Distribution::Choice(vs) => {
            let items: Vec<String> = vs.iter().copied().map(format_number).collect();
            format!("Choice[{}]", items.join(", "))
        }
    }
}

fn scalar(s: &Scalar) -> String {
    match s {
        Scalar::Lit(d) => dist(d),
        Scalar::Ref(name) => name.clone(),
    }
}

fn call(c: &BehaviorCall) -> String {
    let args: Vec<String> = c
        .args
        .iter()
        .map(|a| match &a.node {
            Arg::Side(side) => side.as_str().to_string(),
            Arg::Scalar(s) => scalar(s),
        })
        .collect();
    format!("{}({})", c.name.node, args.join(", "))
}

fn trigger(t: &Trigger) -> String {
    match t {
        Trigger::DistanceToEgoBelow { subject: None, meters } => {
            format!("distance to ego < {}", scalar(&meters.node))
        }
        Trigger::DistanceToEgoBelow { subject: Some(s), meters } => {
            format!("distance from {} to ego < {}", s.node, scalar(&meters.node))
        }
        Trigger::TimeElapsed { seconds } => format!("time > {}", scalar(&seconds.node)),
    }
}

fn spatial(s: &SpatialSpec) -> String {
    match s {
        SpatialSpec::Absolute { x, y, heading: None } => {
            format!("at ({}, {})", scalar(&x.node), scalar(&y.node))
        }
        SpatialSpec::Absolute { x, y, heading: Some(h) } => {
            format!("at ({}, {}, {})", scalar(&x.node), scalar(&y.node), scalar(&h.node))
        }
        SpatialSpec::AheadOf { target, distance } => {
            format!("ahead of {} by {}", target.node, scalar(&distance.node))
        }
        SpatialSpec::Behind { target, distance } => format!("behind {} by {}", target.node, scalar(&distance.node)),
        SpatialSpec::LeftOf { target, offset } => format!("left of {} by {}", target.node, scalar(&offset.node)),
        SpatialSpec::RightOf { target, offset } => format!("right of {} by {}", target.node, scalar(&offset.node)),
        SpatialSpec::OnLane { lane, s } => format!("on lane {} at {}", lane.node, scalar(&s.node)),
    }
}

pub fn format_ast(ast: &ScenarioAst) -> String {
    let mut groups: Vec<String> = Vec::new();

    let mut g = String::new();
    for p in &ast.params {
        writeln!(g, "param {} = {}", p.name.node, dist(&p.value.node)).unwrap();
    }
    groups.push(g);

    let mut g = String::new();
    for b in &ast.behaviors {
        let params: Vec<&str> = b.params.iter().map(|p| p.node.as_str()).collect();
        write!(g, "behavior {}({}) = {}", b.name.node, params.join(", "), call(&b.body)).unwrap();
        if let Some(t) = &b.trigger {
            write!(g, " when {}", trigger(&t.node)).unwrap();
        }
        g.push('\n');
    }
    groups.push(g);

    let mut g = String::new();
    for o in &ast.objects {
        write!(g, "{} = new {} {}", o.name.node, o.class.node, spatial(&o.spatial.node)).unwrap();
        if let Some((l, w)) = &o.size {
            write!(g, " with size ({}, {})", scalar(&l.node), scalar(&w.node)).unwrap();
        }
        if let Some(h) = &o.heading {
            write!(g, " with heading {}", scalar(&h.node)).unwrap();
        }
        if let Some(v) = &o.speed {
            write!(g, " with speed {}", scalar(&v.node)).unwrap();
        }
        if let Some(b) = &o.behavior {
            write!(g, " with behavior {}", call(&b.call)).unwrap();
            if let Some(t) = &b.trigger {
                write!(g, " when {}", trigger(&t.node)).unwrap();
            }
        }
        g.push('\n');
    }
    groups.push(g);

    let mut g = String::new();
    for r in &ast.requirements {
        match &r.node {
            RequireStmt::Collision => g.push_str("require collision\n"),
            RequireStmt::CollisionOf(kind) => writeln!(g, "require collision of {}", kind.node).unwrap(),
            RequireStmt::EgoSpeedAbove(v) => {
                writeln!(g, "require ego speed above {} at collision", format_number(v.node)).unwrap()
            }
        }
    }
    if let Some(t) = &ast.termination {
        writeln!(g, "terminate when {}", trigger(&t.trigger.node)).unwrap();
    }
    groups.push(g);

    let non_empty: Vec<String> = groups.into_iter().filter(|g| !g.is_empty()).collect();
    non_empty.join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{lexer::tokenize, parser::parse};

    #[test]
    fn constant_formats_with_decimal_point() {
        assert_eq!(format_number(5.0), "5.0");
        assert_eq!(format_number(-0.5), "-0.5");
        let src = "ego = new Car at (0, 0)\nnpc = new Car ahead of ego by 5";
        let ast = parse(&tokenize(src)).unwrap();
        let text = format_ast(&ast);
        assert!(text.contains("ahead of ego by 5.0"), "{text}");
        assert!(text.starts_with("ego = new Car at (0.0, 0.0)\n"));
    }

    #[test]
    fn groups_and_property_order() {
        let src = "\
require collision
ego = new Car at (0.0, 0.0) with behavior Go(3.0) with speed 2.0 with size (4.0, 1.9)
behavior Go(v) = FollowLane(v) when time > 1.0
param p = Choice[1.0, 2.0]
terminate when distance from ego to ego < 1.0
";
        let ast = parse(&tokenize(src)).unwrap();
        let expected = "\
param p = Choice[1.0, 2.0]

behavior Go(v) = FollowLane(v) when time > 1.0

ego = new Car at (0.0, 0.0) with size (4.0, 1.9) with speed 2.0 with behavior Go(3.0)

require collision
terminate when distance from ego to ego < 1.0
";
        assert_eq!(format_ast(&ast), expected);
    }
}
