//! Implementation of the `scenforge` command line.
//!
//! Exit codes: 0 success, 1 domain failure (invalid script, failed
//! requirement, exhausted repair loop), 2 environment failure (I/O,
//! network, bad configuration).

pub mod commands;
pub mod config;
pub mod pipeline;

use scenforge::render::CameraModel;
use scenforge::sim::map::{builtin_intersection, builtin_straight};
use scenforge::sim::{load_map, SimTrace, WorldMap, EGO};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Environment(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Environment(_) => 2,
        }
    }
}

pub fn env_err(context: impl std::fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Environment(format!("{context}: {e}"))
}

pub const BUILTIN_MAPS: [&str; 2] = ["intersection4", "straight"];

pub fn builtin_map(name: &str) -> Option<WorldMap> {
    match name.strip_prefix("builtin:").unwrap_or(name) {
        "intersection4" => Some(builtin_intersection()),
        "straight" => Some(builtin_straight()),
        _ => None,
    }
}

/// A builtin map name or a path to a `.map.json` file.
pub fn resolve_map(spec: &str) -> Result<WorldMap, CliError> {
    if let Some(m) = builtin_map(spec) {
        return Ok(m);
    }
    load_map(Path::new(spec)).map_err(|e| CliError::Environment(e.to_string()))
}

/// The `# map: NAME` comment on a script's first non-blank line, if any.
pub fn map_hint(script: &str) -> Option<String> {
    let line = script.lines().find(|l| !l.trim().is_empty())?;
    let rest = line.trim().strip_prefix('#')?.trim().strip_prefix("map:")?;
    Some(rest.trim().to_string()).filter(|s| !s.is_empty())
}

/// Map named by `explicit`, else by the script's hint.
pub fn map_for_script(explicit: Option<&str>, script: &str) -> Result<WorldMap, CliError> {
    match explicit.map(str::to_string).or_else(|| map_hint(script)) {
        Some(spec) => resolve_map(&spec),
        None => Err(CliError::Environment("no map given and the script has no `# map:` line".into())),
    }
}

/// Top-down camera centred on the first impact point, or on ego's start
/// position when there is no collision.
pub fn auto_camera(trace: &SimTrace, width: usize, height: usize, meters_per_pixel: f64) -> CameraModel {
    let center = match trace.first_collision() {
        Some(e) => e.impact_point,
        None => trace
            .frames
            .first()
            .and_then(|f| f.agents.iter().find(|a| a.id == EGO))
            .map_or([0.0, 0.0], |a| [a.pose.x, a.pose.y]),
    };
    CameraModel::top_down(center, meters_per_pixel, width, height)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(env_err(path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(env_err(parent.display()))?;
    }
    std::fs::write(path, bytes).map_err(env_err(path.display()))
}

pub fn read_trace(path: &Path) -> Result<SimTrace, CliError> {
    SimTrace::from_json(&read_text(path)?).map_err(|e| CliError::Environment(format!("bad trace {}: {e}", path.display())))
}

pub fn read_camera(path: &Path) -> Result<CameraModel, CliError> {
    let cam: CameraModel = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::Environment(format!("bad camera {}: {e}", path.display())))?;
    cam.validate().map_err(CliError::Environment)?;
    Ok(cam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hint_parsing() {
        assert_eq!(map_hint("\n# map: straight\nego = ...").as_deref(), Some("straight"));
        assert_eq!(map_hint("#map:intersection4"), Some("intersection4".into()));
        assert_eq!(map_hint("ego = new Car at (0.0, 0.0)\n# map: straight"), None);
        assert_eq!(map_hint("# a comment"), None);
    }

    #[test]
    fn builtin_names() {
        for n in BUILTIN_MAPS {
            assert!(builtin_map(n).is_some());
            assert!(builtin_map(&format!("builtin:{n}")).is_some());
        }
        assert!(matches!(resolve_map("/nonexistent.map.json"), Err(CliError::Environment(_))));
    }
}
