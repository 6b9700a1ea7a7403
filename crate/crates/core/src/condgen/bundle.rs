//! Conditioning bundles.
//!
//! ```text
//! <out>/manifest.json       {"files": [{"path", "sha256", "bytes"}...]}, sorted by path
//! <out>/prompt.txt
//! <out>/config.json         {steps, strength, weights, camera, seed}
//! <out>/trace_meta.json
//! <out>/frames/NNNNNN/{seg.pgm, depth.pfm, edge.pgm, combined.pfm, latent_final.pfm}
//! ```

use crate::render::raster::{encode_pfm, encode_pgm};
use crate::render::{frame_stem, CameraModel, FrameMaps, Raster, Weights};
use crate::sim::{CollisionEvent, SimTrace, TerminationReason};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("I/O error on {path}: {source}")]
    IoError { path: String, source: std::io::Error },
    #[error("frame {frame} has dimensions {got:?}, expected {expected:?}")]
    InconsistentDims { frame: u64, expected: (usize, usize), got: (usize, usize) },
    #[error("bundle needs at least one frame")]
    NoFrames,
    #[error("{frames} frames but {latents} latents")]
    LatentCount { frames: usize, latents: usize },
    #[error("invalid bundle config: {0}")]
    InvalidConfig(String),
    #[error("manifest is unreadable: {0}")]
    Manifest(String),
    #[error("hash mismatch for {0}")]
    HashMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleConfig {
    pub steps: u32,
    pub strength: f32,
    pub weights: Weights,
    pub camera: CameraModel,
    pub seed: u64,
}

impl BundleConfig {
    pub fn validate(&self) -> Result<(), BundleError> {
        if self.steps == 0 {
            return Err(BundleError::InvalidConfig("steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(BundleError::InvalidConfig(format!("strength {} outside [0, 1]", self.strength)));
        }
        if let Some((m, w)) = self.weights.iter().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(BundleError::InvalidConfig(format!("weight {w} for {} outside [0, 1]", m.as_str())));
        }
        self.camera.validate().map_err(BundleError::InvalidConfig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct TraceMeta<'a> {
    dt: f64,
    frame_count: usize,
    duration: f64,
    termination_reason: TerminationReason,
    exported_frames: Vec<u64>,
    events: &'a [CollisionEvent],
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::IoError { path: path.display().to_string(), source }
}

/// Write the bundle; `latents[k]` is the final latent for `frames[k]`.
/// Output depends only on the inputs, so re-exporting is byte-identical.
pub fn export_bundle(
    trace: &SimTrace,
    frames: &[FrameMaps],
    latents: &[Raster<f32>],
    prompt: &str,
    config: &BundleConfig,
    out: &Path,
) -> Result<Manifest, BundleError> {
    config.validate()?;
    let first = frames.first().ok_or(BundleError::NoFrames)?;
    if latents.len() != frames.len() {
        return Err(BundleError::LatentCount { frames: frames.len(), latents: latents.len() });
    }
    let expected = first.seg.dims();
    for (f, z) in frames.iter().zip(latents) {
        let dims = [f.seg.dims(), f.depth.dims(), f.edge.dims(), f.combined.dims(), z.dims()];
        if let Some(got) = dims.into_iter().find(|d| *d != expected) {
            return Err(BundleError::InconsistentDims { frame: f.index, expected, got });
        }
    }

    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    files.insert("prompt.txt".into(), prompt.as_bytes().to_vec());
    files.insert("config.json".into(), serde_json::to_vec_pretty(config).expect("config serializes"));
    let meta = TraceMeta {
        dt: trace.dt,
        frame_count: trace.frames.len(),
        duration: trace.duration(),
        termination_reason: trace.termination_reason,
        exported_frames: frames.iter().map(|f| f.index).collect(),
        events: &trace.events,
    };
    files.insert("trace_meta.json".into(), serde_json::to_vec_pretty(&meta).expect("meta serializes"));
    for (f, z) in frames.iter().zip(latents) {
        let dir = format!("frames/{}", frame_stem(f.index));
        files.insert(format!("{dir}/seg.pgm"), encode_pgm(&f.seg));
        files.insert(format!("{dir}/depth.pfm"), encode_pfm(&f.depth));
        files.insert(format!("{dir}/edge.pgm"), encode_pgm(&f.edge));
        files.insert(format!("{dir}/combined.pfm"), encode_pfm(&f.combined));
        files.insert(format!("{dir}/latent_final.pfm"), encode_pfm(z));
    }

    let mut entries = Vec::with_capacity(files.len());
    for (rel, bytes) in &files {
        let path: PathBuf = out.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io(parent))?;
        }
        std::fs::write(&path, bytes).map_err(io(&path))?;
        entries.push(ManifestEntry { path: rel.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let manifest = Manifest { files: entries };
    let mpath = out.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_vec_pretty(&manifest).expect("manifest serializes")).map_err(io(&mpath))?;
    Ok(manifest)
}

/// Re-hash every file listed in `<dir>/manifest.json`.
pub fn verify_bundle(dir: &Path) -> Result<Manifest, BundleError> {
    let mpath = dir.join("manifest.json");
    let text = std::fs::read(&mpath).map_err(io(&mpath))?;
    let manifest: Manifest = serde_json::from_slice(&text).map_err(|e| BundleError::Manifest(e.to_string()))?;
    for e in &manifest.files {
        let p = dir.join(&e.path);
        let bytes = std::fs::read(&p).map_err(io(&p))?;
        if sha256_hex(&bytes) != e.sha256 {
            return Err(BundleError::HashMismatch(e.path.clone()));
        }
    }
    Ok(manifest)
}
