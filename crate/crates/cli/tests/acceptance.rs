//! End-to-end acceptance checks. Each criterion prints one line:
//! `[PASS] <n> <name> (<detail>)` or `[FAIL] ...`.

mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenforge::condgen::{init_latent, run_diffusion, BackendError, Denoiser, MockDenoiser};
use scenforge::dsl::{parse, tokenize, validate, ConcreteScenario, SourceScript};
use scenforge::prompt::{assemble_texts, PromptTemplate, ScenarioType, StubReply, StubServer};
use scenforge::render::{combine_controls, preset, ControlMapSet, Modality, Raster, PRESET_NAMES};
use scenforge::sim::geometry::sat_overlap;
use scenforge::sim::{CollisionKind, Obb, SimConfig, Vec2};
use scenforge_cli::commands::{compile_script, simulate};
use scenforge_cli::config::{FileConfig, PipelineConfig};
use scenforge_cli::pipeline::{run_pipeline, PipelineReport};
use scenforge_cli::map_for_script;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Run one criterion, print its line outside the test harness's capture,
/// and fail the test when the check or its time budget fails.
fn criterion(n: u32, name: &str, budget: Duration, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
        .unwrap_or_else(|e| Err(e.downcast_ref::<String>().cloned().or(e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()));
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
        Ok(d) => Ok(format!("{d}; {elapsed:.2?}")),
        Err(e) => Err(e),
    };
    let line = match &outcome {
        Ok(d) => format!("[PASS] {n:>2} {name} ({d})\n"),
        Err(e) => format!("[FAIL] {n:>2} {name} ({e})\n"),
    };
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    if let Err(e) = outcome {
        panic!("criterion {n} failed: {e}");
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn pipeline_config(script: &Path, n: usize, stride: usize, out: &Path) -> PipelineConfig {
    let cfg = FileConfig {
        script: Some(script.to_path_buf()),
        variations: Some(n),
        frame_stride: Some(stride),
        out: Some(out.to_path_buf()),
        ..Default::default()
    };
    PipelineConfig::resolve(&cfg).unwrap()
}

#[test]
fn c01_template_fidelity() {
    criterion(1, "prompt template matches the reference text", Duration::from_secs(1), || {
        let blocks = ["{Scenic script example}", "{Scenic script example}"];
        let got = assemble_texts(&PromptTemplate::default(), ScenarioType::RearEndCollision, &blocks);
        let want = std::fs::read(golden("default_prompt.txt")).unwrap();
        ensure(got.as_bytes() == want.as_slice(), || format!("assembled prompt differs:\n{got}"))?;
        Ok(format!("{} bytes identical", want.len()))
    });
}

#[test]
fn c02_variation_distinctness() {
    criterion(2, "pipeline n=20 yields pairwise-distinct scenarios", Duration::from_secs(5), || {
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&pipeline_config(&fixture("rear_end_range.scn"), 20, 1000, dir.path())).map_err(|e| e.to_string())?;
        let s: &[ConcreteScenario] = &report.scenarios;
        ensure(s.len() == 20, || format!("{} scenarios", s.len()))?;
        let mut pairs = 0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                ensure(!s[i].same_content(&s[j]), || format!("variations {i} and {j} coincide"))?;
                pairs += 1;
            }
        }
        Ok(format!("{pairs} pairs distinct"))
    });
}

/// Rear-end fixture: follower 15 m/s, leader 10 m/s starting 30 m ahead
/// (centers), leader brakes at 6 m/s² from t = 1 s, contact at a 4.5 m
/// center gap. Returns the predicted contact time in seconds.
fn rear_end_closed_form() -> f64 {
    let (v_f, v_l, a, t_brake, gap0, contact) = (15.0, 10.0, 6.0, 1.0, 30.0, 4.5);
    let gap_at_brake = gap0 - (v_f - v_l) * t_brake;
    let stop = v_l / a;
    let leader = |tau: f64| {
        let t = f64::min(tau, stop);
        v_l * t - 0.5 * a * t * t
    };
    let gap = |tau: f64| gap_at_brake + leader(tau) - v_f * tau;
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > contact { lo = mid } else { hi = mid }
    }
    t_brake + 0.5 * (lo + hi)
}

#[test]
fn c03_collision_taxonomy() {
    criterion(3, "fixtures classify correctly; rear-end time matches closed form", Duration::from_secs(10), || {
        let mut details = Vec::new();
        for (file, kind) in [
            ("cyclist.scn", CollisionKind::VehicleCyclist),
            ("tbone.scn", CollisionKind::TBone),
            ("rear_end.scn", CollisionKind::RearEnd),
        ] {
            let script = SourceScript::read(&fixture(file)).unwrap();
            let ast = compile_script(&script).map_err(|e| e.to_string())?;
            let map = map_for_script(None, &script.text).map_err(|e| e.to_string())?;
            let scenario = scenforge::dsl::sample_parameters_on(&ast, 0, &map).map_err(|e| e.to_string())?;
            let report = simulate(&scenario, &map, &SimConfig::default()).map_err(|e| e.to_string())?;
            let event = report.trace.first_collision().ok_or_else(|| format!("{file}: no collision"))?;
            ensure(event.classification == kind, || format!("{file}: {:?}, expected {kind:?}", event.classification))?;
            ensure(report.passed(), || format!("{file}: requirements failed"))?;
            if kind == CollisionKind::RearEnd {
                let predicted = rear_end_closed_form() / report.trace.dt;
                ensure((event.frame as f64 - predicted).abs() <= 1.0, || {
                    format!("rear-end at frame {}, predicted {predicted:.2}", event.frame)
                })?;
                details.push(format!("rear-end frame {} vs {predicted:.2}", event.frame));
            }
        }
        Ok(details.join(", "))
    });
}

#[test]
fn c04_preset_weighted_sum() {
    criterion(4, "presets equal the per-pixel weighted-sum oracle", Duration::from_secs(5), || {
        let expected = BTreeMap::from([
            ("preset-a", (0.3f32, 0.4f32)),
            ("preset-b", (0.2, 0.4)),
            ("preset-c", (0.1, 0.4)),
            ("preset-d", (0.5, 0.5)),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (w, h) = (40, 25);
        for name in PRESET_NAMES {
            let (wd, we) = expected[name];
            let depth: Vec<f32> = (0..w * h).map(|_| rng.gen::<f32>()).collect();
            let edge: Vec<f32> = (0..w * h).map(|_| rng.gen_range(0..2) as f32).collect();
            let maps = BTreeMap::from([
                (Modality::Depth, Raster::from_vec(w, h, depth.clone()).unwrap()),
                (Modality::Edge, Raster::from_vec(w, h, edge.clone()).unwrap()),
            ]);
            let combined = combine_controls(&ControlMapSet::new(maps, preset(name).unwrap()).unwrap()).unwrap();
            for i in 0..w * h {
                let mut oracle = 0.0f32;
                oracle += wd * depth[i];
                oracle += we * edge[i];
                ensure(combined.data()[i].to_bits() == oracle.to_bits(), || {
                    format!("{name} pixel {i}: {} vs {oracle}", combined.data()[i])
                })?;
            }
        }
        Ok(format!("{} pixels x {} presets bitwise equal", w * h, PRESET_NAMES.len()))
    });
}

struct Spy {
    calls: Mutex<Vec<u32>>,
    inner: MockDenoiser,
}

impl Denoiser for Spy {
    fn denoise(&self, z: &Raster<f32>, c: &Raster<f32>, t: u32, prompt: &str, strength: f32)
        -> Result<Raster<f32>, BackendError> {
        self.calls.lock().unwrap().push(t);
        self.inner.denoise(z, c, t, prompt, strength)
    }
}

#[test]
fn c05_denoising_loop_contract() {
    criterion(5, "50 descending backend calls; mock converges to strength*C", Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Raster::from_vec(64, 64, (0..64 * 64).map(|_| rng.gen::<f32>()).collect()).unwrap();
        let spy = Spy { calls: Mutex::new(Vec::new()), inner: MockDenoiser::new(true) };
        let z = run_diffusion(&spy, &c, "sunny day", 50, 0.8, 7).map_err(|e| e.to_string())?;
        let calls = spy.calls.into_inner().unwrap();
        ensure(calls == (1..=50).rev().collect::<Vec<u32>>(), || format!("calls {calls:?}"))?;
        let err = z.data().iter().zip(c.data()).map(|(z, c)| (z - 0.8 * c).abs()).fold(0.0f32, f32::max);
        ensure(err <= 0.01, || format!("L-inf error {err}"))?;
        Ok(format!("50 calls, L-inf {err:.2e}"))
    });
}

/// Closed-box membership in the box's own frame.
fn contains(o: &Obb, px: f64, py: f64) -> bool {
    let (dx, dy) = (px - o.center.x, py - o.center.y);
    let (s, c) = o.heading.sin_cos();
    let lx = dx * c + dy * s;
    let ly = -dx * s + dy * c;
    lx.abs() <= o.length / 2.0 && ly.abs() <= o.width / 2.0
}

/// Points every `step` meters along the boundary of `o`.
fn boundary(o: &Obb, step: f64) -> Vec<(f64, f64)> {
    let (s, c) = o.heading.sin_cos();
    let (hl, hw) = (o.length / 2.0, o.width / 2.0);
    let corners = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)];
    let mut pts = Vec::new();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        let len = ((b.0 - a.0) as f64).hypot(b.1 - a.1);
        let n = (len / step).ceil() as usize;
        for i in 0..=n {
            let f = i as f64 / n as f64;
            let (lx, ly) = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
            pts.push((o.center.x + lx * c - ly * s, o.center.y + lx * s + ly * c));
        }
    }
    pts
}

/// Two convex regions meet iff a boundary point of one lies in the other.
fn sampled_overlap(a: &Obb, b: &Obb) -> bool {
    boundary(a, 0.01).into_iter().any(|(x, y)| contains(b, x, y))
        || boundary(b, 0.01).into_iter().any(|(x, y)| contains(a, x, y))
}

fn resized(o: &Obb, delta: f64) -> Obb {
    Obb::new(o.center, o.heading, o.length + 2.0 * delta, o.width + 2.0 * delta)
}

#[test]
fn c06_sat_matches_sampling_oracle() {
    criterion(6, "SAT agrees with the 1 cm sampling oracle", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let obb = |rng: &mut ChaCha8Rng| {
            let center = Vec2 { x: rng.gen_range(-4.0..4.0), y: rng.gen_range(-4.0..4.0) };
            Obb::new(center, rng.gen_range(-3.2..3.2), rng.gen_range(0.3..5.0), rng.gen_range(0.3..2.5))
        };
        let (mut checked, mut banded, mut overlapping) = (0, 0, 0);
        for i in 0..1000 {
            let (a, b) = (obb(&mut rng), obb(&mut rng));
            // within 2 cm of touching, sampling error can flip the verdict
            if sampled_overlap(&resized(&a, 0.02), &resized(&b, 0.02)) != sampled_overlap(&resized(&a, -0.02), &resized(&b, -0.02)) {
                banded += 1;
                continue;
            }
            let oracle = sampled_overlap(&a, &b);
            ensure(sat_overlap(&a, &b) == oracle, || format!("pair {i}: SAT {} vs oracle {oracle}: {a:?} {b:?}", !oracle))?;
            checked += 1;
            overlapping += oracle as usize;
        }
        ensure(checked >= 900, || format!("only {checked} pairs outside the band"))?;
        Ok(format!("{checked} pairs agree ({overlapping} overlapping), {banded} in the tangency band"))
    });
}

fn snapshot_run(out: &Path) -> PipelineReport {
    run_pipeline(&pipeline_config(&fixture("rear_end_range.scn"), 3, 10, out)).unwrap()
}

#[test]
fn c07_determinism() {
    criterion(7, "identical seeds give byte-identical traces, rasters and manifests", Duration::from_secs(60), || {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        snapshot_run(a.path());
        snapshot_run(b.path());
        let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
        ensure(sa.len() == sb.len(), || format!("{} vs {} files", sa.len(), sb.len()))?;
        for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
            ensure(na == nb && ba == bb, || format!("{na} differs"))?;
        }
        let count = |suffix: &str| sa.iter().filter(|(n, _)| n.ends_with(suffix)).count();
        ensure(count("trace.json") == 3 && count("manifest.json") == 3 && count(".pfm") > 0, || "missing outputs".into())?;
        Ok(format!("{} files identical", sa.len()))
    });
}

#[test]
fn c08_hermetic_end_to_end() {
    criterion(8, "stub LLM run repairs once and yields a passing bundle", Duration::from_secs(60), || {
        let replies = vec![
            StubReply::Content(fenced("ego = new Car on lane slow at 20.0 with speed\n")),
            StubReply::Content(fenced(VALID_REAR_END)),
        ];
        let server = StubServer::start(replies, 0).map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = FileConfig {
            variations: Some(2),
            frame_stride: Some(20),
            out: Some(dir.path().to_path_buf()),
            scenario_type: Some(ScenarioType::RearEndCollision),
            ..Default::default()
        };
        cfg.llm.base_url = Some(server.base_url());
        let report = run_pipeline(&PipelineConfig::resolve(&cfg).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let transcript: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("transcript.json")).unwrap()).unwrap();
        let rounds = transcript["rounds"].as_array().map_or(0, |r| r.len());
        ensure(rounds == 2, || format!("{rounds} rounds"))?;
        ensure(report.summary.passing_bundles >= 1, || "no passing bundle".into())?;
        Ok(format!("{rounds} rounds, {} passing bundles", report.summary.passing_bundles))
    });
}

#[test]
fn c09_parser_robustness() {
    criterion(9, "10,000 random byte strings never abort the front end", Duration::from_secs(60), || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut failures = 0;
        for i in 0..10_000 {
            let len = rng.gen_range(0..256);
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let text = String::from_utf8_lossy(&bytes).into_owned();
            let stream = std::panic::catch_unwind(|| tokenize(&text)).map_err(|_| format!("input {i}: lexer panicked"))?;
            for d in &stream.diagnostics {
                ensure(d.span.is_within(&text), || format!("input {i}: span {:?} out of bounds", d.span))?;
            }
            match std::panic::catch_unwind(|| parse(&stream)).map_err(|_| format!("input {i}: parser panicked"))? {
                Ok(ast) => {
                    for d in std::panic::catch_unwind(|| validate(&ast)).map_err(|_| format!("input {i}: validator panicked"))? {
                        ensure(d.span.is_within(&text), || format!("input {i}: span {:?} out of bounds", d.span))?;
                    }
                }
                Err(diags) => {
                    failures += 1;
                    ensure(diags.iter().any(|d| d.is_error()), || format!("input {i}: failure without an error"))?;
                    for d in &diags {
                        ensure(d.span.is_within(&text), || format!("input {i}: span {:?} out of bounds", d.span))?;
                    }
                }
            }
        }
        Ok(format!("{failures} rejected with in-bounds diagnostics"))
    });
}

#[test]
fn c10_latent_statistics() {
    criterion(10, "512x512 latent has mean 0 and variance 1", Duration::from_secs(1), || {
        let z = init_latent(512, 512, 0).map_err(|e| e.to_string())?;
        let n = z.data().len() as f64;
        let mean = z.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = z.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        ensure(mean.abs() <= 0.02, || format!("mean {mean}"))?;
        ensure((var - 1.0).abs() <= 0.02, || format!("variance {var}"))?;
        Ok(format!("mean {mean:.4}, variance {var:.4}"))
    });
}
