//! Control-map rendering: segmentation, depth, and edge rasters per frame,
//! normalized and combined under modality weights.
//!
//! Files for frame `k` are written as `frames/NNNNNN.seg.pgm`,
//! `.depth.pfm` (meters), `.edge.pgm`, and `.combined.pfm`, with `NNNNNN`
//! the zero-padded frame index.

pub mod camera;
pub mod control;
pub mod draw;
pub mod raster;

pub use camera::{CameraModel, Projection};
pub use control::{
    combine_controls, normalize_modality, preset, weights_from_json, ControlError, ControlMapSet, Modality,
    RawModality, Weights, PRESET_NAMES,
};
pub use draw::{edge_from_seg, render_depth, render_segmentation, Renderer, SegClass, FAR_PLANE};
pub use raster::{Raster, RasterError};

use crate::dsl::AgentClass;
use crate::sim::trace::{Frame, FrameLog};
use crate::sim::{SimTrace, WorldMap};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("cannot create {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// What the renderers need to know about an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderAgent {
    pub class: AgentClass,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
    pub active: bool,
}

impl RenderAgent {
    pub fn from_frame(frame: &Frame) -> Vec<RenderAgent> {
        frame
            .agents
            .iter()
            .map(|a| RenderAgent {
                class: a.class,
                x: a.pose.x,
                y: a.pose.y,
                heading: a.pose.heading,
                length: a.length,
                width: a.width,
                active: a.active,
            })
            .collect()
    }

    pub fn from_log(log: &FrameLog, frame: usize) -> Vec<RenderAgent> {
        log.frames[frame]
            .agents
            .iter()
            .map(|a| RenderAgent {
                class: a.class,
                x: a.x,
                y: a.y,
                heading: a.heading,
                length: f64::from(a.length),
                width: f64::from(a.width),
                active: a.active,
            })
            .collect()
    }
}

/// All rasters for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMaps {
    pub index: u64,
    pub seg: Raster<u8>,
    pub depth: Raster<f32>,
    pub edge: Raster<u8>,
    pub combined: Raster<f32>,
}

impl FrameMaps {
    pub fn control_set(&self, weights: &Weights) -> Result<ControlMapSet, ControlError> {
        control_set(&self.seg, &self.depth, &self.edge, weights)
    }
}

/// Normalized modalities; only weighted modalities are included.
pub fn control_set(
    seg: &Raster<u8>,
    depth: &Raster<f32>,
    edge: &Raster<u8>,
    weights: &Weights,
) -> Result<ControlMapSet, ControlError> {
    let maps: BTreeMap<Modality, Raster<f32>> = weights
        .keys()
        .map(|m| {
            let raw = match m {
                Modality::Seg => RawModality::Seg(seg),
                Modality::Depth => RawModality::Depth(depth),
                Modality::Edge => RawModality::Edge(edge),
            };
            (*m, normalize_modality(raw))
        })
        .collect();
    ControlMapSet::new(maps, weights.clone())
}

pub fn render_frame(
    renderer: &Renderer<'_>,
    index: u64,
    agents: &[RenderAgent],
    weights: &Weights,
) -> Result<FrameMaps, ControlError> {
    let seg = renderer.segmentation(agents);
    let depth = renderer.depth(agents);
    let edge = edge_from_seg(&seg);
    let combined = combine_controls(&control_set(&seg, &depth, &edge, weights)?)?;
    Ok(FrameMaps { index, seg, depth, edge, combined })
}

/// Indices `0, stride, 2*stride, ...` below `n`; stride 0 is treated as 1.
pub fn strided(n: usize, stride: usize) -> Vec<usize> {
    (0..n).step_by(stride.max(1)).collect()
}

/// Render the selected trace frames in parallel; output is in frame order.
pub fn render_trace(
    trace: &SimTrace,
    map: &WorldMap,
    camera: &CameraModel,
    weights: &Weights,
    frames: &[usize],
) -> Result<Vec<FrameMaps>, RenderError> {
    camera.validate().map_err(RenderError::InvalidCamera)?;
    let renderer = Renderer::new(map, camera);
    frames
        .par_iter()
        .map(|&k| {
            let f = &trace.frames[k];
            Ok(render_frame(&renderer, f.index, &RenderAgent::from_frame(f), weights)?)
        })
        .collect()
}

pub fn frame_stem(index: u64) -> String {
    format!("{index:06}")
}

fn mkdir(path: &Path) -> Result<(), RenderError> {
    std::fs::create_dir_all(path).map_err(|source| RenderError::Io { path: path.display().to_string(), source })
}

/// Write `frames/NNNNNN.*` under `out`; returns the paths written.
pub fn write_frames(out: &Path, frames: &[FrameMaps]) -> Result<Vec<PathBuf>, RenderError> {
    let dir = out.join("frames");
    mkdir(&dir)?;
    let mut written = Vec::new();
    for f in frames {
        let stem = frame_stem(f.index);
        let paths = [
            dir.join(format!("{stem}.seg.pgm")),
            dir.join(format!("{stem}.depth.pfm")),
            dir.join(format!("{stem}.edge.pgm")),
            dir.join(format!("{stem}.combined.pfm")),
        ];
        raster::write_pgm(&paths[0], &f.seg)?;
        raster::write_pfm(&paths[1], &f.depth)?;
        raster::write_pgm(&paths[2], &f.edge)?;
        raster::write_pfm(&paths[3], &f.combined)?;
        written.extend(paths);
    }
    Ok(written)
}
