use clap::{Args, Parser, Subcommand};
use scenforge::prompt::{stub, ScenarioType, StubServer};
use scenforge::sim::SimConfig;
use scenforge_cli::commands::{self, DiffusionOptions, RenderOptions};
use scenforge_cli::config::{process_env, AutoCamera, FileConfig, PipelineConfig};
use scenforge_cli::pipeline::run_pipeline;
use scenforge_cli::{read_camera, read_text, CliError};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "scenforge", version, about = "Generate, simulate and render safety-critical driving scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a script; prints diagnostics as JSON.
    Validate { script: PathBuf },
    /// Ask the LLM for a script of the given type.
    Gen(GenArgs),
    /// Sample and simulate a script.
    Sim(SimArgs),
    /// Render control maps for a trace.
    Render(RenderArgs),
    /// Render, diffuse and export a conditioning bundle for a trace.
    Bundle(BundleArgs),
    /// Full run: generate, sample variations, simulate, render, bundle.
    Pipeline(PipelineArgs),
    /// Serve scripted chat-completion replies for offline runs.
    StubLlm(StubArgs),
}

#[derive(Args, Default)]
struct LlmArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_repair_rounds: Option<u32>,
    /// Example library directory (default: bundled library).
    #[arg(long)]
    library: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl LlmArgs {
    fn overrides(&self) -> FileConfig {
        let mut f = FileConfig { library: self.library.clone(), seed: self.seed, ..Default::default() };
        f.llm.base_url = self.base_url.clone();
        f.llm.model = self.model.clone();
        f.llm.temperature = self.temperature;
        f.llm.max_repair_rounds = self.max_repair_rounds;
        f
    }
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    llm: LlmArgs,
    /// Scenario type, e.g. rear-end-collision.
    #[arg(long = "type")]
    scenario_type: ScenarioType,
    /// Number of few-shot examples.
    #[arg(short, long)]
    k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    script: PathBuf,
    /// Builtin map name or .map.json path (default: the script's `# map:` line).
    #[arg(long)]
    map: Option<String>,
    /// Simulation config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderFlags {
    /// Builtin map name or .map.json path.
    #[arg(long)]
    map: String,
    /// Camera JSON; default is a top-down view centred on the first impact.
    #[arg(long)]
    camera: Option<PathBuf>,
    #[arg(long, default_value_t = 512)]
    width: usize,
    #[arg(long, default_value_t = 512)]
    height: usize,
    #[arg(long, default_value_t = 0.1)]
    meters_per_pixel: f64,
    /// preset-a, preset-b, preset-c or preset-d.
    #[arg(long)]
    preset: Option<String>,
    /// Weights JSON such as {"depth": 0.3, "edge": 0.4}.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    frame_stride: usize,
}

impl RenderFlags {
    fn options(&self) -> Result<RenderOptions, CliError> {
        Ok(RenderOptions {
            camera: self.camera.as_deref().map(read_camera).transpose()?,
            auto: AutoCamera { width: self.width, height: self.height, meters_per_pixel: self.meters_per_pixel },
            weights: commands::resolve_weights(self.preset.as_deref(), self.weights.as_deref())?,
            frame_stride: self.frame_stride,
        })
    }
}

#[derive(Args)]
struct RenderArgs {
    trace: PathBuf,
    #[command(flatten)]
    flags: RenderFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BundleArgs {
    trace: PathBuf,
    #[command(flatten)]
    flags: RenderFlags,
    #[arg(long, default_value = scenforge_cli::config::DEFAULT_PROMPT)]
    prompt: String,
    #[arg(long, default_value_t = scenforge::condgen::DEFAULT_STEPS)]
    steps: u32,
    #[arg(long, default_value_t = scenforge::condgen::DEFAULT_STRENGTH)]
    strength: f32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    llm: LlmArgs,
    /// Use this script instead of asking the LLM.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long = "type")]
    scenario_type: Option<ScenarioType>,
    #[arg(short = 'n', long)]
    variations: Option<usize>,
    #[arg(long)]
    map: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    prompt: Option<String>,
    #[arg(long)]
    frame_stride: Option<usize>,
    /// Worker threads (default: one per logical CPU).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StubArgs {
    /// JSON array of replies: strings, or {"status": N, "body": "..."}.
    #[arg(long)]
    replies: PathBuf,
    #[arg(long, default_value_t = 8089)]
    port: u16,
}

fn sim_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let Some(p) = path else { return Ok(SimConfig::default()) };
    serde_json::from_str(&read_text(p)?).map_err(|e| CliError::Environment(format!("bad sim config {}: {e}", p.display())))
}

fn domain(ok: bool, message: impl FnOnce() -> String) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Domain(message()))
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { script } => commands::validate(&script, &mut std::io::stdout()),
        Command::Gen(a) => {
            let mut flags = a.llm.overrides();
            flags.llm.k = a.k;
            let cfg = FileConfig::layered(a.llm.config.as_deref(), &process_env, flags)?;
            let t = commands::gen(&cfg, a.scenario_type, &a.out)?;
            println!("{}", a.out.join("transcript.json").display());
            domain(t.is_success(), || format!("repair loop exhausted after {} round(s)", t.rounds.len()))
        }
        Command::Sim(a) => {
            let config = sim_config(a.config.as_deref())?;
            let r = commands::sim(&a.script, a.map.as_deref(), a.seed, &config, &a.out)?;
            println!("{}", commands::to_json(&r.requirements));
            domain(r.passed(), || "requirement failed".into())
        }
        Command::Render(a) => {
            let written = commands::render(&a.trace, &a.flags.map, &a.flags.options()?, &a.out)?;
            println!("{}", commands::to_json(&written));
            Ok(())
        }
        Command::Bundle(a) => {
            let diffusion = DiffusionOptions { prompt: a.prompt, steps: a.steps, strength: a.strength, seed: a.seed };
            let manifest = commands::bundle(&a.trace, &a.flags.map, &a.flags.options()?, &diffusion, &a.out)?;
            println!("{}", commands::to_json(&manifest));
            Ok(())
        }
        Command::Pipeline(a) => {
            let mut flags = a.llm.overrides();
            flags.script = a.script;
            flags.scenario_type = a.scenario_type;
            flags.variations = a.variations;
            flags.map = a.map;
            flags.preset = a.preset;
            flags.prompt = a.prompt;
            flags.frame_stride = a.frame_stride;
            flags.workers = a.workers;
            flags.out = a.out;
            let cfg = FileConfig::layered(a.llm.config.as_deref(), &process_env, flags)?;
            let cfg = PipelineConfig::resolve(&cfg)?;
            let report = run_pipeline(&cfg)?;
            println!("{}", cfg.out.join("summary.json").display());
            domain(report.summary.succeeded(), || "no variation produced a bundle that meets its requirements".into())
        }
        Command::StubLlm(a) => {
            let replies = stub::parse_script(&read_text(&a.replies)?)
                .map_err(|e| CliError::Environment(format!("bad replies file: {e}")))?;
            let server = StubServer::start(replies, a.port).map_err(scenforge_cli::env_err("cannot bind stub server"))?;
            println!("{}", server.base_url());
            server.join();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

