use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenforge::dsl::ast::*;
use scenforge::dsl::{format_ast, parse, sample_parameters, tokenize, validate, Code, Diagnostic};

fn b<T>(node: T) -> Spanned<T> {
    Spanned::bare(node)
}

fn lit(v: f64) -> Expr {
    b(Scalar::Lit(Distribution::Constant(v)))
}

/// Short decimals keep the generated scripts readable in failure output.
fn num(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let v: f64 = rng.gen_range(lo..hi);
    (v * 100.0).round() / 100.0
}

fn positive_dist(rng: &mut ChaCha8Rng) -> Distribution {
    match rng.gen_range(0..3) {
        0 => Distribution::Constant(num(rng, 0.5, 40.0)),
        1 => {
            let lo = num(rng, 0.5, 20.0);
            Distribution::Range(lo, lo + num(rng, 0.5, 20.0))
        }
        _ => Distribution::Choice((0..rng.gen_range(1..4)).map(|_| num(rng, 0.5, 40.0)).collect()),
    }
}

fn positive_expr(rng: &mut ChaCha8Rng, params: &[String]) -> Expr {
    if !params.is_empty() && rng.gen_bool(0.3) {
        b(Scalar::Ref(params[rng.gen_range(0..params.len())].clone()))
    } else {
        b(Scalar::Lit(positive_dist(rng)))
    }
}

fn action(rng: &mut ChaCha8Rng, number: Scalar) -> BehaviorCall {
    let side = b(Arg::Side(if rng.gen_bool(0.5) { Side::Left } else { Side::Right }));
    let n = b(Arg::Scalar(number));
    let (name, args) = match rng.gen_range(0..5) {
        0 => ("FollowLane", vec![n]),
        1 => ("Brake", vec![n]),
        2 => ("Crossing", vec![side, n]),
        3 => ("CutIn", vec![side, n]),
        _ => ("Idle", vec![]),
    };
    BehaviorCall { name: b(name.to_string()), args }
}

fn time_trigger(rng: &mut ChaCha8Rng) -> Spanned<Trigger> {
    b(Trigger::TimeElapsed { seconds: lit(num(rng, 0.0, 10.0)) })
}

/// A random script that should pass validation with no errors.
fn valid_ast(seed: u64) -> ScenarioAst {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ast = ScenarioAst::default();
    let params: Vec<String> = (0..rng.gen_range(0..3)).map(|i| format!("p{i}")).collect();
    for p in &params {
        ast.params.push(ParamDecl { name: b(p.clone()), value: b(positive_dist(&mut rng)) });
    }
    let n_defs = rng.gen_range(0..3);
    for i in 0..n_defs {
        let body = action(&mut rng, Scalar::Ref("d".into()));
        let uses_d = !body.args.is_empty();
        let trigger = rng.gen_bool(0.5).then(|| time_trigger(&mut rng));
        ast.behaviors.push(BehaviorDef {
            name: b(format!("B{i}")),
            params: if uses_d { vec![b("d".to_string())] } else { vec![] },
            body,
            trigger,
        });
    }

    let n_objects = rng.gen_range(1..6);
    let mut names: Vec<String> = Vec::new();
    for i in 0..n_objects {
        let name = if i == 0 { EGO.to_string() } else { format!("obj{i}") };
        let class = if i == 0 {
            if rng.gen_bool(0.8) { AgentClass::Car } else { AgentClass::Truck }
        } else {
            AgentClass::ALL[rng.gen_range(0..4)]
        };
        let spatial = if i == 0 || rng.gen_bool(0.3) {
            if rng.gen_bool(0.5) {
                SpatialSpec::Absolute {
                    x: lit(num(&mut rng, -100.0, 100.0)),
                    y: lit(num(&mut rng, -100.0, 100.0)),
                    heading: rng.gen_bool(0.5).then(|| lit(num(&mut rng, -180.0, 180.0))),
                }
            } else {
                SpatialSpec::OnLane { lane: b("l0".into()), s: positive_expr(&mut rng, &params) }
            }
        } else {
            let target = b(names[rng.gen_range(0..names.len())].clone());
            let d = positive_expr(&mut rng, &params);
            match rng.gen_range(0..4) {
                0 => SpatialSpec::AheadOf { target, distance: d },
                1 => SpatialSpec::Behind { target, distance: d },
                2 => SpatialSpec::LeftOf { target, offset: d },
                _ => SpatialSpec::RightOf { target, offset: d },
            }
        };
        let size = rng.gen_bool(0.2).then(|| (lit(num(&mut rng, 0.5, 9.0)), lit(num(&mut rng, 0.5, 3.0))));
        let heading = rng.gen_bool(0.1).then(|| lit(num(&mut rng, -90.0, 90.0)));
        let speed = rng.gen_bool(0.6).then(|| positive_expr(&mut rng, &params));
        let behavior = if rng.gen_bool(0.7) {
            let use_def = n_defs > 0 && rng.gen_bool(0.5);
            let (call, def_has_trigger) = if use_def {
                let def = &ast.behaviors[rng.gen_range(0..n_defs)];
                let args = if def.params.is_empty() {
                    vec![]
                } else {
                    vec![b(Arg::Scalar(positive_expr(&mut rng, &params).node))]
                };
                (BehaviorCall { name: def.name.clone(), args }, def.trigger.is_some())
            } else {
                let number = positive_expr(&mut rng, &params).node;
                (action(&mut rng, number), false)
            };
            let trigger = if def_has_trigger || rng.gen_bool(0.5) {
                None
            } else if i > 0 && rng.gen_bool(0.5) {
                Some(b(Trigger::DistanceToEgoBelow { subject: None, meters: lit(num(&mut rng, 1.0, 30.0)) }))
            } else {
                Some(time_trigger(&mut rng))
            };
            Some(BehaviorUse { call, trigger })
        } else {
            None
        };
        ast.objects.push(ObjectDecl {
            name: b(name.clone()),
            class: b(class),
            spatial: b(spatial),
            size,
            heading,
            speed,
            behavior,
        });
        names.push(name);
    }

    for _ in 0..rng.gen_range(0..3) {
        ast.requirements.push(b(match rng.gen_range(0..3) {
            0 => RequireStmt::Collision,
            1 => RequireStmt::CollisionOf(b(COLLISION_KINDS[rng.gen_range(0..5)].to_string())),
            _ => RequireStmt::EgoSpeedAbove(b(num(&mut rng, 0.0, 20.0))),
        }));
    }
    if rng.gen_bool(0.7) {
        ast.termination = Some(TerminateStmt { trigger: time_trigger(&mut rng) });
    }
    ast
}

fn reparse(text: &str) -> ScenarioAst {
    let stream = tokenize(text);
    assert!(stream.diagnostics.is_empty(), "lexer rejected formatter output:\n{text}\n{:?}", stream.diagnostics);
    parse(&stream).unwrap_or_else(|d| panic!("parser rejected formatter output:\n{text}\n{d:?}"))
}

fn errors(d: &[Diagnostic]) -> Vec<&Diagnostic> {
    d.iter().filter(|d| d.is_error()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_scripts_validate(seed in any::<u64>()) {
        let ast = valid_ast(seed);
        let d = validate(&ast);
        prop_assert!(errors(&d).is_empty(), "{}\n{:?}", format_ast(&ast), d);
    }

    #[test]
    fn format_round_trips(seed in any::<u64>()) {
        let ast = valid_ast(seed);
        let text = format_ast(&ast);
        prop_assert_eq!(reparse(&text), ast);
    }

    #[test]
    fn format_is_a_fixed_point(seed in any::<u64>()) {
        let text = format_ast(&valid_ast(seed));
        prop_assert_eq!(format_ast(&reparse(&text)), text);
    }

    #[test]
    fn sampling_is_pure(seed in any::<u64>(), s in any::<u64>()) {
        let ast = valid_ast(seed);
        prop_assert_eq!(sample_parameters(&ast, s), sample_parameters(&ast, s));
    }

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,200}") {
        check_total(&text);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        check_total(&String::from_utf8_lossy(&bytes));
    }

    #[test]
    fn mutated_scripts_never_panic(seed in any::<u64>(), cut in any::<prop::sample::Index>(), len in 0usize..20, insert in "[ -~\n]{0,8}") {
        let text = format_ast(&valid_ast(seed));
        let mut at = cut.index(text.len() + 1);
        while !text.is_char_boundary(at) { at -= 1; }
        let end = (at + len).min(text.len());
        let mutated = format!("{}{}{}", &text[..at], insert, &text[end..]);
        check_total(&mutated);
    }

    #[test]
    fn circular_placement_matches_graph_oracle(targets in proptest::collection::vec(0usize..8, 1..8)) {
        // object i is placed relative to object targets[i] (mod count); ego is absolute
        let n = targets.len() + 1;
        let mut ast = ScenarioAst::default();
        let name = |i: usize| if i == 0 { EGO.to_string() } else { format!("o{i}") };
        ast.objects.push(ObjectDecl {
            name: b(name(0)), class: b(AgentClass::Car),
            spatial: b(SpatialSpec::Absolute { x: lit(0.0), y: lit(0.0), heading: None }),
            size: None, heading: None, speed: None, behavior: None,
        });
        let mut graph = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for (k, t) in targets.iter().enumerate() {
            let i = k + 1;
            let t = t % n;
            graph.add_edge(nodes[i], nodes[t], ());
            ast.objects.push(ObjectDecl {
                name: b(name(i)), class: b(AgentClass::Car),
                spatial: b(SpatialSpec::AheadOf { target: b(name(t)), distance: lit(5.0) }),
                size: None, heading: None, speed: None, behavior: None,
            });
        }
        let d = validate(&ast);
        let flagged = d.iter().any(|d| d.code == Code::CircularSpatial);
        prop_assert_eq!(flagged, is_cyclic_directed(&graph), "{:?}", d);
        let forward = targets.iter().enumerate().any(|(k, t)| t % n > k + 1);
        if !is_cyclic_directed(&graph) {
            prop_assert_eq!(d.iter().any(|d| d.code == Code::ForwardRef), forward);
        }
    }
}

fn check_total(text: &str) {
    let stream = tokenize(text);
    for d in &stream.diagnostics {
        assert!(d.span.is_within(text), "lexer span {:?} outside {:?}", d.span, text);
    }
    for t in &stream.tokens {
        assert!(t.span.is_within(text));
    }
    match parse(&stream) {
        Ok(ast) => {
            for d in validate(&ast) {
                assert!(d.span.is_within(text), "validator span {:?} outside {:?}", d.span, text);
            }
        }
        Err(diags) => {
            assert!(diags.iter().any(|d| d.is_error()), "failed parse without an error for {text:?}");
            for d in diags {
                assert!(d.span.is_within(text), "parser span {:?} outside {:?}", d.span, text);
            }
        }
    }
}

#[test]
fn twenty_seeds_give_distinct_samples() {
    let src = "param gap = Range(25.0, 35.0)\nego = new Car at (0.0, 0.0)\nlead = new Car ahead of ego by gap";
    let ast = parse(&tokenize(src)).unwrap();
    let samples: Vec<_> = (0..20).map(|s| sample_parameters(&ast, s).unwrap()).collect();
    for i in 0..20 {
        for j in i + 1..20 {
            assert!(!samples[i].same_content(&samples[j]), "seeds {i} and {j} coincide");
        }
    }
}
