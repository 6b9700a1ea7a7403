//! End-to-end run: script (from the LLM or a file), `n` distinct
//! variations, and one simulated, rendered and diffused bundle per
//! variation.
//!
//! Output layout under `out`:
//!
//! ```text
//! scenario.scn            the script every variation was drawn from
//! transcript.json         generation transcript (LLM runs only)
//! summary.json            one row per variation
//! variations/NNN/scenario.json
//! variations/NNN/trace.json
//! variations/NNN/bundle/  conditioning bundle
//! ```
//!
//! `summary.json`:
//!
//! ```json
//! {
//!   "scenario_type": "rear-end-collision",
//!   "script_origin": "llm",
//!   "map": "straight",
//!   "base_seed": 0,
//!   "variations": 20,
//!   "passing_bundles": 20,
//!   "rows": [
//!     { "index": 0, "seed": 0, "classification": "rear-end",
//!       "requirements": [{ "requirement": {...}, "passed": true, "detail": "..." }],
//!       "requirements_passed": true, "bundle": "variations/000/bundle", "error": null }
//!   ]
//! }
//! ```

use crate::commands::{compile_script, load_library, make_bundle, resolve_weights, simulate, to_json, DiffusionOptions, RenderOptions};
use crate::config::{CameraChoice, PipelineConfig};
use crate::{env_err, map_hint, resolve_map, write_file, CliError};
use scenforge::dsl::{sample_variations, ConcreteScenario, SourceScript};
use scenforge::prompt::{generate_scenario, GenerationRequest, GenerationTranscript, Outcome, PromptTemplate, ScenarioType};
use scenforge::sim::{CollisionKind, RequirementOutcome, WorldMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub index: usize,
    pub seed: u64,
    pub classification: Option<CollisionKind>,
    pub requirements: Vec<RequirementOutcome>,
    pub requirements_passed: bool,
    /// Relative to the output root.
    pub bundle: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario_type: ScenarioType,
    pub script_origin: String,
    pub map: String,
    pub base_seed: u64,
    pub variations: usize,
    pub passing_bundles: usize,
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// A run succeeds when at least one bundle meets its requirements.
    pub fn succeeded(&self) -> bool {
        self.passing_bundles > 0
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub summary: Summary,
    pub scenarios: Vec<ConcreteScenario>,
    pub transcript: Option<GenerationTranscript>,
}

fn obtain_script(cfg: &PipelineConfig) -> Result<(SourceScript, Option<GenerationTranscript>), CliError> {
    if let Some(path) = &cfg.script {
        return Ok((SourceScript::read(path).map_err(env_err(path.display()))?, None));
    }
    let endpoint = cfg.endpoint.as_ref().ok_or_else(|| CliError::Environment("no LLM endpoint configured".into()))?;
    let library = load_library(cfg.library.as_deref())?;
    let request = GenerationRequest {
        scenario_type: cfg.scenario_type,
        k_examples: cfg.k_examples,
        temperature: cfg.temperature,
        seed: cfg.seed,
        max_repair_rounds: cfg.max_repair_rounds,
    };
    let transcript = generate_scenario(&request, &library, &PromptTemplate::default(), endpoint)
        .map_err(|e| CliError::Environment(e.to_string()))?;
    write_file(&cfg.out.join("transcript.json"), transcript.to_json())?;
    match &transcript.outcome {
        Outcome::Success { script } => Ok((SourceScript::new(script.clone(), "llm"), Some(transcript))),
        Outcome::Exhausted => Err(CliError::Domain(format!(
            "no valid script after {} round(s); see {}",
            transcript.rounds.len(),
            cfg.out.join("transcript.json").display()
        ))),
    }
}

pub fn variation_dir(index: usize) -> String {
    format!("variations/{index:03}")
}

fn run_variation(
    index: usize,
    scenario: &ConcreteScenario,
    map: &WorldMap,
    cfg: &PipelineConfig,
    render: &RenderOptions,
) -> SummaryRow {
    let mut row = SummaryRow {
        index,
        seed: scenario.seed,
        classification: None,
        requirements: Vec::new(),
        requirements_passed: false,
        bundle: None,
        error: None,
    };
    let rel = variation_dir(index);
    let dir = cfg.out.join(&rel);
    let result = (|| {
        write_file(&dir.join("scenario.json"), to_json(scenario))?;
        let report = simulate(scenario, map, &cfg.sim)?;
        write_file(&dir.join("trace.json"), report.trace.to_json())?;
        row.classification = report.trace.first_collision().map(|e| e.classification);
        row.requirements_passed = report.passed();
        row.requirements = report.requirements.clone();
        let diffusion =
            DiffusionOptions { prompt: cfg.prompt.clone(), steps: cfg.steps, strength: cfg.strength, seed: scenario.seed };
        make_bundle(&report.trace, map, render, &diffusion, &dir.join("bundle"))?;
        row.bundle = Some(format!("{rel}/bundle"));
        Ok::<(), CliError>(())
    })();
    if let Err(e) = result {
        log::warn!("variation {index}: {e}");
        row.error = Some(e.to_string());
    }
    row
}

/// Run every stage and write `summary.json`. Per-variation failures are
/// recorded in the summary rather than aborting the run.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).map_err(env_err(cfg.out.display()))?;
    let (script, transcript) = obtain_script(cfg)?;
    write_file(&cfg.out.join("scenario.scn"), &script.text)?;
    let ast = compile_script(&script)?;

    let map_name = cfg
        .map
        .clone()
        .or_else(|| map_hint(&script.text))
        .ok_or_else(|| CliError::Environment("no map configured and the script has no `# map:` line".into()))?;
    let map = resolve_map(&map_name)?;
    let scenarios =
        sample_variations(&ast, cfg.variations, cfg.seed, Some(&map)).map_err(|e| CliError::Domain(e.to_string()))?;

    let render = RenderOptions {
        camera: match &cfg.camera {
            CameraChoice::Fixed(c) => Some(c.clone()),
            CameraChoice::Auto(_) => None,
        },
        auto: match cfg.camera {
            CameraChoice::Auto(a) => a,
            CameraChoice::Fixed(_) => Default::default(),
        },
        weights: resolve_weights(Some(&cfg.preset), None)?,
        frame_stride: cfg.frame_stride,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Environment(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<SummaryRow> = pool.install(|| {
        scenarios.par_iter().enumerate().map(|(i, s)| run_variation(i, s, &map, cfg, &render)).collect()
    });

    let summary = Summary {
        scenario_type: cfg.scenario_type,
        script_origin: script.origin.clone(),
        map: map_name,
        base_seed: cfg.seed,
        variations: rows.len(),
        passing_bundles: rows.iter().filter(|r| r.requirements_passed && r.bundle.is_some()).count(),
        rows,
    };
    write_file(&cfg.out.join("summary.json"), to_json(&summary))?;
    Ok(PipelineReport { summary, scenarios, transcript })
}

pub fn read_summary(out: &Path) -> Result<Summary, CliError> {
    let text = crate::read_text(&out.join("summary.json"))?;
    serde_json::from_str(&text).map_err(|e| CliError::Environment(format!("bad summary: {e}")))
}
