//! One function per subcommand. Each writes its files and returns what it
//! produced; the binary turns the result into an exit code.

use crate::config::{AutoCamera, FileConfig};
use crate::{auto_camera, env_err, map_for_script, read_text, resolve_map, write_file, CliError};
use scenforge::condgen::{diffuse_frames, export_bundle, BundleConfig, Manifest, MockDenoiser};
use scenforge::dsl::{self, diagnostics, ConcreteScenario, SourceScript};
use scenforge::prompt::{generate_scenario, ExampleLibrary, GenerationError, GenerationRequest, GenerationTranscript, PromptTemplate, ScenarioType};
use scenforge::render::{self, preset, render_trace, strided, weights_from_json, CameraModel, FrameMaps, Weights};
use scenforge::sim::{self, check_requirements, RequirementOutcome, SimConfig, SimError, SimTrace, WorldMap};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Print the diagnostics as a JSON array; `Domain` error if any is an error.
pub fn validate(path: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let script = SourceScript::read(path).map_err(env_err(path.display()))?;
    let checked = dsl::check(&script);
    writeln!(stdout, "{}", diagnostics::to_json_array(&checked.diagnostics)).map_err(env_err("stdout"))?;
    if checked.is_ok() {
        Ok(())
    } else {
        let n = checked.diagnostics.iter().filter(|d| d.is_error()).count();
        Err(CliError::Domain(format!("{}: {n} error(s)", path.display())))
    }
}

pub fn load_library(path: Option<&Path>) -> Result<ExampleLibrary, CliError> {
    match path {
        Some(p) => ExampleLibrary::load(p).map_err(|e| CliError::Environment(e.to_string())),
        None => Ok(ExampleLibrary::builtin()),
    }
}

fn generation_error(e: GenerationError) -> CliError {
    CliError::Environment(e.to_string())
}

/// Run the generate/repair loop and write `transcript.json`, plus
/// `scenario.scn` on success, under `out`.
pub fn gen(cfg: &FileConfig, scenario_type: ScenarioType, out: &Path) -> Result<GenerationTranscript, CliError> {
    let endpoint = cfg.endpoint().ok_or_else(|| {
        CliError::Environment(format!("no LLM endpoint configured (set llm.base_url or {})", crate::config::ENV_BASE_URL))
    })?;
    let library = load_library(cfg.library.as_deref())?;
    let mut request = GenerationRequest::new(scenario_type);
    request.seed = cfg.seed.unwrap_or(0);
    request.k_examples = cfg.llm.k.unwrap_or(request.k_examples);
    request.temperature = cfg.llm.temperature.unwrap_or(request.temperature);
    request.max_repair_rounds = cfg.llm.max_repair_rounds.unwrap_or(request.max_repair_rounds);
    let transcript = generate_scenario(&request, &library, &PromptTemplate::default(), &endpoint).map_err(generation_error)?;
    write_file(&out.join("transcript.json"), transcript.to_json())?;
    if let scenforge::prompt::Outcome::Success { script } = &transcript.outcome {
        write_file(&out.join("scenario.scn"), script)?;
    }
    Ok(transcript)
}

pub fn compile_script(script: &SourceScript) -> Result<dsl::ScenarioAst, CliError> {
    dsl::compile(script).map_err(|diags| {
        let first = diags.iter().find(|d| d.is_error()).map_or(String::new(), |d| format!(": {}", d.message));
        CliError::Domain(format!("{} does not validate{first}", script.origin))
    })
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Placement(p) => CliError::Domain(p.to_string()),
        SimError::InvalidConfig(m) => CliError::Environment(m),
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub scenario: ConcreteScenario,
    pub trace: SimTrace,
    pub requirements: Vec<RequirementOutcome>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.requirements.iter().all(|r| r.passed)
    }
}

/// Simulate one concrete scenario and check its requirements.
pub fn simulate(scenario: &ConcreteScenario, map: &WorldMap, config: &SimConfig) -> Result<SimReport, CliError> {
    let trace = sim::run(scenario, map, config).map_err(sim_error)?;
    let requirements =
        check_requirements(&trace, &scenario.requirements).map_err(|e| CliError::Domain(e.to_string()))?;
    Ok(SimReport { scenario: scenario.clone(), trace, requirements })
}

/// Sample `script` with `seed`, simulate, and write `scenario.json`,
/// `trace.json`, `trace.sffl` and `requirements.json` under `out`.
pub fn sim(script: &Path, map: Option<&str>, seed: u64, config: &SimConfig, out: &Path) -> Result<SimReport, CliError> {
    let source = SourceScript::read(script).map_err(env_err(script.display()))?;
    let ast = compile_script(&source)?;
    let map = map_for_script(map, &source.text)?;
    let scenario = dsl::sample_parameters_on(&ast, seed, &map).map_err(|e| CliError::Domain(e.to_string()))?;
    let report = simulate(&scenario, &map, config)?;
    write_sim_outputs(&report, out)?;
    Ok(report)
}

pub fn write_sim_outputs(report: &SimReport, out: &Path) -> Result<(), CliError> {
    write_file(&out.join("scenario.json"), to_json(&report.scenario))?;
    write_file(&out.join("trace.json"), report.trace.to_json())?;
    write_file(&out.join("trace.sffl"), report.trace.to_frame_log())?;
    write_file(&out.join("requirements.json"), to_json(&report.requirements))
}

pub fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("value serializes")
}

/// Weights from a preset name or a JSON file; the file wins when both are
/// given, and `preset-a` is used when neither is.
pub fn resolve_weights(preset_name: Option<&str>, weights_file: Option<&Path>) -> Result<Weights, CliError> {
    let bad = |e: render::ControlError| CliError::Environment(e.to_string());
    match (weights_file, preset_name) {
        (Some(p), _) => weights_from_json(&read_text(p)?).map_err(bad),
        (None, Some(name)) => preset(name).map_err(bad),
        (None, None) => preset(crate::config::DEFAULT_PRESET).map_err(bad),
    }
}

/// Rendering options shared by `render`, `bundle` and `pipeline`.
#[derive(Debug, Clone)]
pub struct RenderOptions {
    /// Explicit camera; otherwise `auto` is centred on the trace.
    pub camera: Option<CameraModel>,
    pub auto: AutoCamera,
    pub weights: Weights,
    pub frame_stride: usize,
}

impl RenderOptions {
    pub fn camera_for(&self, trace: &SimTrace) -> CameraModel {
        self.camera.clone().unwrap_or_else(|| auto_camera(trace, self.auto.width, self.auto.height, self.auto.meters_per_pixel))
    }
}

pub fn render_frames(trace: &SimTrace, map: &WorldMap, opts: &RenderOptions) -> Result<(CameraModel, Vec<FrameMaps>), CliError> {
    if opts.frame_stride == 0 {
        return Err(CliError::Environment("frame stride must be at least 1".into()));
    }
    let camera = opts.camera_for(trace);
    let frames = strided(trace.frames.len(), opts.frame_stride);
    let maps = render_trace(trace, map, &camera, &opts.weights, &frames).map_err(|e| CliError::Environment(e.to_string()))?;
    Ok((camera, maps))
}

/// Render a trace file into `out/frames/`.
pub fn render(trace: &Path, map: &str, opts: &RenderOptions, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let trace = crate::read_trace(trace)?;
    let map = resolve_map(map)?;
    let (_, frames) = render_frames(&trace, &map, opts)?;
    render::write_frames(out, &frames).map_err(|e| CliError::Environment(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionOptions {
    pub prompt: String,
    pub steps: u32,
    pub strength: f32,
    pub seed: u64,
}

/// Render, run the mock denoiser on every exported frame, and export a
/// bundle into `out`.
pub fn make_bundle(
    trace: &SimTrace,
    map: &WorldMap,
    opts: &RenderOptions,
    diffusion: &DiffusionOptions,
    out: &Path,
) -> Result<Manifest, CliError> {
    let (camera, frames) = render_frames(trace, map, opts)?;
    let config = BundleConfig {
        steps: diffusion.steps,
        strength: diffusion.strength,
        weights: opts.weights.clone(),
        camera,
        seed: diffusion.seed,
    };
    config.validate().map_err(|e| CliError::Environment(e.to_string()))?;
    let controls: Vec<_> = frames.iter().map(|f| &f.combined).collect();
    let backend = MockDenoiser::new(true);
    let latents = diffuse_frames(&backend, &controls, &diffusion.prompt, diffusion.steps, diffusion.strength, diffusion.seed)
        .map_err(|e| CliError::Environment(e.to_string()))?;
    export_bundle(trace, &frames, &latents, &diffusion.prompt, &config, out).map_err(|e| CliError::Environment(e.to_string()))
}

pub fn bundle(trace: &Path, map: &str, opts: &RenderOptions, diffusion: &DiffusionOptions, out: &Path) -> Result<Manifest, CliError> {
    let trace = crate::read_trace(trace)?;
    let map = resolve_map(map)?;
    make_bundle(&trace, &map, opts, diffusion, out)
}
