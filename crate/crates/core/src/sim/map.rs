//! Lane-network maps.
//!
//! # File format (`.map.json`)
//!
//! ```json
//! {
//!   "name": "straight",
//!   "lanes": [
//!     { "id": "east", "centerline": [[-100.0, -1.75], [100.0, -1.75]],
//!       "width": 3.5, "successors": [] }
//!   ],
//!   "anchors": [ { "name": "start", "x": -50.0, "y": -1.75, "heading_deg": 0.0 } ]
//! }
//! ```
//!
//! Centerlines are polylines in meters and need at least two distinct
//! points. A lane's direction of travel is the polyline order.

use super::geometry::Vec2;
use crate::dsl::LaneExtents;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("cannot read map {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("map format error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("map format error in lane `{lane}`: {message}")]
    MapFormatError { lane: String, message: String },
    #[error("lane `{lane}` lists successor `{successor}`, which does not exist")]
    DanglingSuccessor { lane: String, successor: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub name: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub id: String,
    pub centerline: Vec<[f64; 2]>,
    pub width: f64,
    #[serde(default)]
    pub successors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MapFile {
    #[serde(default)]
    name: String,
    lanes: Vec<LaneSpec>,
    #[serde(default)]
    anchors: Vec<Anchor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    pub id: String,
    pub points: Vec<Vec2>,
    pub width: f64,
    pub successors: Vec<String>,
    /// Arc length at each polyline vertex; `cum[0] == 0`.
    cum: Vec<f64>,
}

/// A point on a lane: position and tangent heading (radians).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanePose {
    pub position: Vec2,
    pub heading: f64,
}

/// Closest-point projection onto a lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneProjection {
    pub s: f64,
    /// Signed distance, positive to the left of travel direction.
    pub lateral: f64,
    pub heading: f64,
}

impl Lane {
    fn new(spec: LaneSpec) -> Result<Lane, MapError> {
        let fail = |message: String| MapError::MapFormatError { lane: spec.id.clone(), message };
        if spec.centerline.len() < 2 {
            return Err(fail(format!("centerline has {} point(s), need at least 2", spec.centerline.len())));
        }
        if !(spec.width > 0.0 && spec.width.is_finite()) {
            return Err(fail(format!("width must be positive, got {}", spec.width)));
        }
        let points: Vec<Vec2> = spec.centerline.iter().map(|p| Vec2::new(p[0], p[1])).collect();
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(fail("centerline has a non-finite coordinate".into()));
        }
        let mut cum = vec![0.0];
        for w in points.windows(2) {
            let d = w[0].dist(w[1]);
            if d == 0.0 {
                return Err(fail("centerline repeats a point".into()));
            }
            cum.push(cum.last().unwrap() + d);
        }
        Ok(Lane { id: spec.id, points, width: spec.width, successors: spec.successors, cum })
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Pose at arc length `s`, clamped to the lane's extent.
    pub fn pose_at(&self, s: f64) -> LanePose {
        let s = s.clamp(0.0, self.length());
        let seg = match self.cum.partition_point(|&c| c <= s) {
            0 => 0,
            i => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[seg], self.points[seg + 1]);
        let seg_len = self.cum[seg + 1] - self.cum[seg];
        let t = (s - self.cum[seg]) / seg_len;
        let d = b - a;
        LanePose { position: a + d * t, heading: d.y.atan2(d.x) }
    }

    pub fn project(&self, p: Vec2) -> LaneProjection {
        let mut best: Option<(f64, LaneProjection)> = None;
        for (i, w) in self.points.windows(2).enumerate() {
            let d = w[1] - w[0];
            let len2 = d.dot(d);
            let t = ((p - w[0]).dot(d) / len2).clamp(0.0, 1.0);
            let q = w[0] + d * t;
            let dist = p.dist(q);
            if best.as_ref().is_none_or(|(bd, _)| dist < *bd) {
                let lateral = d.cross(p - w[0]).signum() * dist;
                let proj = LaneProjection { s: self.cum[i] + t * len2.sqrt(), lateral, heading: d.y.atan2(d.x) };
                best = Some((dist, proj));
            }
        }
        best.unwrap().1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub name: String,
    pub lanes: Vec<Lane>,
    pub anchors: Vec<Anchor>,
}

impl WorldMap {
    pub fn from_json(text: &str) -> Result<WorldMap, MapError> {
        let file: MapFile = serde_json::from_str(text)?;
        let mut seen = HashSet::new();
        let mut lanes = Vec::with_capacity(file.lanes.len());
        for spec in file.lanes {
            if !seen.insert(spec.id.clone()) {
                return Err(MapError::MapFormatError { lane: spec.id, message: "duplicate lane id".into() });
            }
            lanes.push(Lane::new(spec)?);
        }
        for lane in &lanes {
            if let Some(missing) = lane.successors.iter().find(|s| !seen.contains(*s)) {
                return Err(MapError::DanglingSuccessor { lane: lane.id.clone(), successor: missing.clone() });
            }
        }
        Ok(WorldMap { name: file.name, lanes, anchors: file.anchors })
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    pub fn anchor(&self, name: &str) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.name == name)
    }

    /// Lane whose centerline is nearest to `p` among lanes running within
    /// 45 degrees of `heading` and containing `p` within half their width.
    pub fn lane_for_pose(&self, p: Vec2, heading: f64) -> Option<&Lane> {
        let mut best: Option<(f64, &Lane)> = None;
        for lane in &self.lanes {
            let proj = lane.project(p);
            let aligned = super::geometry::normalize_angle(proj.heading - heading).abs() < std::f64::consts::FRAC_PI_4;
            let inside = proj.lateral.abs() <= lane.width / 2.0 + 1e-9;
            if aligned && inside && best.is_none_or(|(d, _)| proj.lateral.abs() < d) {
                best = Some((proj.lateral.abs(), lane));
            }
        }
        best.map(|(_, l)| l)
    }
}

impl LaneExtents for WorldMap {
    fn lane_length(&self, lane: &str) -> Option<f64> {
        self.lane(lane).map(Lane::length)
    }
}

pub fn load_map(path: &Path) -> Result<WorldMap, MapError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| MapError::Io { path: path.display().to_string(), source })?;
    WorldMap::from_json(&text)
}

/// The bundled four-way intersection.
pub fn builtin_intersection() -> WorldMap {
    WorldMap::from_json(include_str!("../../assets/maps/intersection4.map.json")).expect("bundled map is valid")
}

/// The bundled straight two-lane road.
pub fn builtin_straight() -> WorldMap {
    WorldMap::from_json(include_str!("../../assets/maps/straight.map.json")).expect("bundled map is valid")
}
