//! Pipeline configuration.
//!
//! Values come from three layers, highest first: command-line flags, the
//! `SCENFORGE_LLM_*` environment variables (endpoint settings only), and a
//! TOML file. Anything left unset takes the built-in default.
//!
//! ```toml
//! seed = 7
//! out = "runs/rear-end"
//! map = "straight"              # builtin name or path to a .map.json
//! script = "my.scn"             # optional; skips the LLM stage
//! scenario_type = "rear-end-collision"
//! variations = 20
//! frame_stride = 1
//! preset = "preset-a"
//! prompt = "rainy night"
//!
//! [llm]
//! base_url = "http://127.0.0.1:8089/v1"
//! model = "gpt-4o"
//! k = 3
//!
//! [sim]
//! dt = 0.05
//! max_duration = 30.0
//! collision_stop = true
//!
//! [diffusion]
//! steps = 50
//! strength = 0.8
//!
//! [auto_camera]                 # top-down view centred on the first impact
//! width = 512
//! height = 512
//! meters_per_pixel = 0.1
//! ```
//!
//! A `[camera]` table (same fields as a camera JSON file) replaces the
//! automatic camera.

use crate::CliError;
use scenforge::condgen::{DEFAULT_STEPS, DEFAULT_STRENGTH};
use scenforge::prompt::{EndpointConfig, ScenarioType, DEFAULT_K, DEFAULT_REPAIR_ROUNDS, DEFAULT_TEMPERATURE};
use scenforge::render::CameraModel;
use scenforge::sim::SimConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const ENV_BASE_URL: &str = "SCENFORGE_LLM_BASE_URL";
pub const ENV_MODEL: &str = "SCENFORGE_LLM_MODEL";
pub const ENV_API_KEY: &str = "SCENFORGE_LLM_API_KEY";
pub const ENV_TIMEOUT: &str = "SCENFORGE_LLM_TIMEOUT_S";

pub const DEFAULT_VARIATIONS: usize = 20;
pub const DEFAULT_PRESET: &str = "preset-a";
pub const DEFAULT_PROMPT: &str = "sunny day";
pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub api_key: Option<String>,
    pub timeout_s: Option<f64>,
    pub send_seed: Option<bool>,
    pub k: Option<usize>,
    pub temperature: Option<f64>,
    pub max_repair_rounds: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub steps: Option<u32>,
    pub strength: Option<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoCamera {
    pub width: usize,
    pub height: usize,
    pub meters_per_pixel: f64,
}

impl Default for AutoCamera {
    fn default() -> Self {
        AutoCamera { width: 512, height: 512, meters_per_pixel: 0.1 }
    }
}

/// The TOML file, every field optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub map: Option<String>,
    pub library: Option<PathBuf>,
    pub script: Option<PathBuf>,
    pub scenario_type: Option<ScenarioType>,
    pub variations: Option<usize>,
    pub workers: Option<usize>,
    pub frame_stride: Option<usize>,
    pub preset: Option<String>,
    pub prompt: Option<String>,
    pub llm: LlmSection,
    pub sim: Option<SimConfig>,
    pub diffusion: DiffusionSection,
    pub camera: Option<CameraModel>,
    pub auto_camera: Option<AutoCamera>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Environment(format!("cannot read config {}: {e}", path.display())))?;
        FileConfig::parse(&text).map_err(|e| CliError::Environment(format!("bad config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<FileConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Overlay the endpoint variables found through `env`.
    pub fn apply_env(&mut self, env: &dyn Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(v) = env(ENV_BASE_URL) {
            self.llm.base_url = Some(v);
        }
        if let Some(v) = env(ENV_MODEL) {
            self.llm.model = Some(v);
        }
        if let Some(v) = env(ENV_API_KEY) {
            self.llm.api_key = Some(v);
        }
        if let Some(v) = env(ENV_TIMEOUT) {
            let t = v.parse().map_err(|_| CliError::Environment(format!("{ENV_TIMEOUT}={v} is not a number")))?;
            self.llm.timeout_s = Some(t);
        }
        Ok(())
    }

    /// Overlay values set in `flags`.
    pub fn apply(&mut self, flags: FileConfig) {
        macro_rules! take {
            ($($f:ident).+) => {
                if flags.$($f).+.is_some() {
                    self.$($f).+ = flags.$($f).+;
                }
            };
        }
        take!(seed);
        take!(out);
        take!(map);
        take!(library);
        take!(script);
        take!(scenario_type);
        take!(variations);
        take!(workers);
        take!(frame_stride);
        take!(preset);
        take!(prompt);
        take!(llm.base_url);
        take!(llm.model);
        take!(llm.api_key);
        take!(llm.timeout_s);
        take!(llm.send_seed);
        take!(llm.k);
        take!(llm.temperature);
        take!(llm.max_repair_rounds);
        take!(sim);
        take!(diffusion.steps);
        take!(diffusion.strength);
        take!(camera);
        take!(auto_camera);
    }

    /// Layer `file` (if any), then the environment, then `flags`.
    pub fn layered(
        file: Option<&Path>,
        env: &dyn Fn(&str) -> Option<String>,
        flags: FileConfig,
    ) -> Result<FileConfig, CliError> {
        let mut cfg = match file {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        cfg.apply_env(env)?;
        cfg.apply(flags);
        Ok(cfg)
    }

    pub fn endpoint(&self) -> Option<EndpointConfig> {
        let base = self.llm.base_url.clone()?;
        let mut e = EndpointConfig::new(base, self.llm.model.clone().unwrap_or_else(|| DEFAULT_MODEL.to_string()));
        e.api_key = self.llm.api_key.clone();
        if let Some(t) = self.llm.timeout_s {
            e.timeout_s = t;
        }
        if let Some(s) = self.llm.send_seed {
            e.send_seed = s;
        }
        Some(e)
    }
}

pub fn process_env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

#[derive(Debug, Clone, PartialEq)]
pub enum CameraChoice {
    Fixed(CameraModel),
    Auto(AutoCamera),
}

/// Fully resolved settings for `pipeline`.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub endpoint: Option<EndpointConfig>,
    pub k_examples: usize,
    pub temperature: f64,
    pub max_repair_rounds: u32,
    pub library: Option<PathBuf>,
    /// `None` means: use the `# map:` hint in the script.
    pub map: Option<String>,
    pub script: Option<PathBuf>,
    pub scenario_type: ScenarioType,
    pub variations: usize,
    /// 0 means one worker per logical CPU.
    pub workers: usize,
    pub frame_stride: usize,
    pub sim: SimConfig,
    pub camera: CameraChoice,
    pub preset: String,
    pub steps: u32,
    pub strength: f32,
    pub prompt: String,
    pub out: PathBuf,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn resolve(cfg: &FileConfig) -> Result<PipelineConfig, CliError> {
        let env_err = CliError::Environment;
        let out = cfg.out.clone().ok_or_else(|| env_err("no output directory given (--out or `out`)".into()))?;
        let p = PipelineConfig {
            endpoint: cfg.endpoint(),
            k_examples: cfg.llm.k.unwrap_or(DEFAULT_K),
            temperature: cfg.llm.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            max_repair_rounds: cfg.llm.max_repair_rounds.unwrap_or(DEFAULT_REPAIR_ROUNDS),
            library: cfg.library.clone(),
            map: cfg.map.clone(),
            script: cfg.script.clone(),
            scenario_type: cfg.scenario_type.unwrap_or(ScenarioType::RearEndCollision),
            variations: cfg.variations.unwrap_or(DEFAULT_VARIATIONS),
            workers: cfg.workers.unwrap_or(0),
            frame_stride: cfg.frame_stride.unwrap_or(1),
            sim: cfg.sim.clone().unwrap_or_default(),
            camera: match &cfg.camera {
                Some(c) => CameraChoice::Fixed(c.clone()),
                None => CameraChoice::Auto(cfg.auto_camera.unwrap_or_default()),
            },
            preset: cfg.preset.clone().unwrap_or_else(|| DEFAULT_PRESET.to_string()),
            steps: cfg.diffusion.steps.unwrap_or(DEFAULT_STEPS),
            strength: cfg.diffusion.strength.unwrap_or(DEFAULT_STRENGTH),
            prompt: cfg.prompt.clone().unwrap_or_else(|| DEFAULT_PROMPT.to_string()),
            out,
            seed: cfg.seed.unwrap_or(0),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Environment(m));
        if self.variations == 0 {
            return bad("variations must be at least 1".into());
        }
        if self.frame_stride == 0 {
            return bad("frame_stride must be at least 1".into());
        }
        if self.k_examples == 0 {
            return bad("llm.k must be at least 1".into());
        }
        for path in [&self.script, &self.library].into_iter().flatten() {
            if !path.exists() {
                return bad(format!("{} does not exist", path.display()));
            }
        }
        if let Some(m) = &self.map {
            if crate::builtin_map(m).is_none() && !Path::new(m).exists() {
                return bad(format!("map {m} is neither a builtin map nor an existing file"));
            }
        }
        if self.script.is_none() && self.endpoint.is_none() {
            return bad(format!("no script given and no LLM endpoint configured (set llm.base_url or {ENV_BASE_URL})"));
        }
        if let CameraChoice::Auto(a) = self.camera {
            if a.width == 0 || a.height == 0 || !(a.meters_per_pixel > 0.0) {
                return bad("auto_camera needs positive width, height and meters_per_pixel".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn flags_beat_env_beat_file() {
        let mut cfg = FileConfig::parse(
            r#"
            seed = 1
            variations = 5
            [llm]
            base_url = "http://file/v1"
            model = "file-model"
            "#,
        )
        .unwrap();
        let env: HashMap<&str, &str> = [(ENV_BASE_URL, "http://env/v1"), (ENV_MODEL, "env-model")].into();
        cfg.apply_env(&|k| env.get(k).map(|v| v.to_string())).unwrap();
        let mut flags = FileConfig::default();
        flags.llm.model = Some("flag-model".into());
        flags.seed = Some(9);
        cfg.apply(flags);
        let e = cfg.endpoint().unwrap();
        assert_eq!(e.base_url, "http://env/v1");
        assert_eq!(e.model, "flag-model");
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.variations, Some(5));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::parse("sede = 1").is_err());
    }

    #[test]
    fn defaults() {
        let mut cfg = FileConfig { out: Some("o".into()), ..Default::default() };
        cfg.llm.base_url = Some("http://x/v1".into());
        let p = PipelineConfig::resolve(&cfg).unwrap();
        assert_eq!((p.variations, p.steps, p.strength), (20, 50, 0.8));
        assert_eq!(p.camera, CameraChoice::Auto(AutoCamera::default()));
    }

    #[test]
    fn needs_script_or_endpoint() {
        let cfg = FileConfig { out: Some("o".into()), ..Default::default() };
        assert!(matches!(PipelineConfig::resolve(&cfg), Err(CliError::Environment(_))));
    }

    #[test]
    fn camera_table_parses() {
        let cfg = FileConfig::parse(
            r#"
            [camera]
            type = "top_down"
            center = [1.0, 2.0]
            meters_per_pixel = 0.5
            width = 32
            height = 16
            "#,
        )
        .unwrap();
        assert_eq!(cfg.camera, Some(CameraModel::top_down([1.0, 2.0], 0.5, 32, 16)));
    }
}
