//! Normalized control modalities and their weighted combination.

use super::draw::{SegClass, FAR_PLANE};
use super::raster::Raster;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Seg,
    Depth,
    Edge,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Seg, Modality::Depth, Modality::Edge];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Seg => "seg",
            Modality::Depth => "depth",
            Modality::Edge => "edge",
        }
    }
}

pub type Weights = BTreeMap<Modality, f32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("{modality} raster is {got:?}, expected {expected:?}")]
    DimensionMismatch { modality: &'static str, expected: (usize, usize), got: (usize, usize) },
    #[error("weight given for absent modality `{0}`")]
    AbsentModality(&'static str),
    #[error("weight for `{modality}` must lie in [0, 1], got {weight}")]
    WeightRange { modality: &'static str, weight: f32 },
    #[error("unknown weight preset `{0}`; expected preset-a, preset-b, preset-c or preset-d")]
    UnknownPreset(String),
    #[error("invalid weight preset: {0}")]
    PresetFormat(String),
}

/// A raw modality raster before normalization.
#[derive(Debug, Clone, Copy)]
pub enum RawModality<'a> {
    Seg(&'a Raster<u8>),
    Depth(&'a Raster<f32>),
    Edge(&'a Raster<u8>),
}

/// Map a raw raster into [0, 1]: seg ids on a linear ramp over the palette,
/// depth with near = 1 and the far plane = 0, edges unchanged.
pub fn normalize_modality(raw: RawModality<'_>) -> Raster<f32> {
    let top = (SegClass::PALETTE.len() - 1) as f32;
    match raw {
        RawModality::Seg(r) => r.map(|id| id as f32 / top),
        RawModality::Depth(r) => r.map(|d| 1.0 - (d / FAR_PLANE).clamp(0.0, 1.0)),
        RawModality::Edge(r) => r.map(f32::from),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMapSet {
    maps: BTreeMap<Modality, Raster<f32>>,
    weights: Weights,
}

impl ControlMapSet {
    pub fn new(maps: BTreeMap<Modality, Raster<f32>>, weights: Weights) -> Result<Self, ControlError> {
        let expected = maps.values().next().map(Raster::dims);
        for (m, r) in &maps {
            if Some(r.dims()) != expected {
                return Err(ControlError::DimensionMismatch {
                    modality: m.as_str(),
                    expected: expected.unwrap(),
                    got: r.dims(),
                });
            }
        }
        for (m, w) in &weights {
            if !maps.contains_key(m) {
                return Err(ControlError::AbsentModality(m.as_str()));
            }
            if !(0.0..=1.0).contains(w) {
                return Err(ControlError::WeightRange { modality: m.as_str(), weight: *w });
            }
        }
        Ok(ControlMapSet { maps, weights })
    }

    pub fn maps(&self) -> &BTreeMap<Modality, Raster<f32>> {
        &self.maps
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.maps.values().next().map(Raster::dims)
    }
}

/// Per pixel `C = sum_m w_m * C_m`, accumulated in `f32` over weighted
/// modalities in `Modality` order, starting from zero. Weights are not
/// renormalized.
pub fn combine_controls(set: &ControlMapSet) -> Result<Raster<f32>, ControlError> {
    let (w, h) = set.dims().unwrap_or((0, 0));
    let mut acc = vec![0f32; w * h];
    for (m, weight) in &set.weights {
        let r = &set.maps[m];
        if r.dims() != (w, h) {
            return Err(ControlError::DimensionMismatch { modality: m.as_str(), expected: (w, h), got: r.dims() });
        }
        for (a, v) in acc.iter_mut().zip(r.data()) {
            *a += weight * v;
        }
    }
    Ok(Raster::from_vec(w, h, acc).expect("sized above"))
}

pub const PRESET_NAMES: [&str; 4] = ["preset-a", "preset-b", "preset-c", "preset-d"];

/// Depth/edge weightings shipped as named presets.
pub fn preset(name: &str) -> Result<Weights, ControlError> {
    let (depth, edge) = match name {
        "preset-a" => (0.3, 0.4),
        "preset-b" => (0.2, 0.4),
        "preset-c" => (0.1, 0.4),
        "preset-d" => (0.5, 0.5),
        _ => return Err(ControlError::UnknownPreset(name.to_string())),
    };
    Ok(BTreeMap::from([(Modality::Depth, depth), (Modality::Edge, edge)]))
}

/// Parse `{ "depth": 0.3, "edge": 0.4 }`.
pub fn weights_from_json(text: &str) -> Result<Weights, ControlError> {
    let w: Weights = serde_json::from_str(text).map_err(|e| ControlError::PresetFormat(e.to_string()))?;
    if let Some((m, v)) = w.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(ControlError::WeightRange { modality: m.as_str(), weight: *v });
    }
    Ok(w)
}

pub fn weights_to_json(w: &Weights) -> String {
    serde_json::to_string(w).expect("weights serialize")
}
