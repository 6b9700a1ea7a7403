//! Segmentation, depth, and edge rasterization.
//!
//! A pixel belongs to a shape when its center does. Layers paint in the
//! order background, road, lane marking, agents; among agents later
//! declarations paint over earlier ones.

use super::camera::{CameraModel, Projection};
use super::raster::Raster;
use super::RenderAgent;
use crate::dsl::AgentClass;
use crate::sim::geometry::{Obb, Vec2};
use crate::sim::WorldMap;
use serde::{Deserialize, Serialize};

/// Depth written where nothing is hit, meters.
pub const FAR_PLANE: f32 = 100.0;
/// Height of the virtual top-down camera above the road, meters.
pub const TOP_DOWN_CAMERA_HEIGHT: f32 = 50.0;
/// Painted lane-boundary stripe: full width and dash period, meters.
const MARKING_WIDTH: f64 = 0.15;
const DASH_LENGTH: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SegClass {
    Background = 0,
    Road = 1,
    LaneMarking = 2,
    Vehicle = 3,
    Pedestrian = 4,
    Bicycle = 5,
}

impl SegClass {
    pub const PALETTE: [SegClass; 6] = [
        SegClass::Background,
        SegClass::Road,
        SegClass::LaneMarking,
        SegClass::Vehicle,
        SegClass::Pedestrian,
        SegClass::Bicycle,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<SegClass> {
        Self::PALETTE.get(id as usize).copied()
    }

    pub fn of_agent(class: AgentClass) -> SegClass {
        match class {
            AgentClass::Car | AgentClass::Truck => SegClass::Vehicle,
            AgentClass::Pedestrian => SegClass::Pedestrian,
            AgentClass::Bicycle => SegClass::Bicycle,
        }
    }
}

/// Box height used for depth, meters.
pub fn class_height(class: AgentClass) -> f64 {
    match class {
        AgentClass::Car => 1.5,
        AgentClass::Truck => 3.5,
        AgentClass::Pedestrian => 1.8,
        AgentClass::Bicycle => 1.6,
    }
}

/// Road surface class at a ground point.
pub fn ground_class(map: &WorldMap, p: Vec2) -> SegClass {
    let mut road = false;
    for lane in &map.lanes {
        let mut s0 = 0.0;
        for w in lane.points.windows(2) {
            let d = w[1] - w[0];
            let len = d.norm();
            let t = d * (1.0 / len);
            let rel = p - w[0];
            let along = rel.dot(t);
            if (0.0..=len).contains(&along) {
                let lat = rel.dot(t.perp());
                let s = s0 + along;
                let dash_on = (s / DASH_LENGTH).floor() as i64 % 2 == 0;
                if dash_on && (lat - lane.width / 2.0).abs() <= MARKING_WIDTH / 2.0 {
                    return SegClass::LaneMarking;
                }
                road |= lat.abs() <= lane.width / 2.0;
            }
            s0 += len;
        }
    }
    if road {
        SegClass::Road
    } else {
        SegClass::Background
    }
}

/// Distance along a unit ray to the agent's box, if it is hit in front of
/// the origin.
pub fn ray_box_hit(origin: [f64; 3], dir: [f64; 3], agent: &RenderAgent) -> Option<f64> {
    let (c, s) = (agent.heading.cos(), agent.heading.sin());
    let to_local = |v: [f64; 3], translate: bool| {
        let (x, y) = if translate { (v[0] - agent.x, v[1] - agent.y) } else { (v[0], v[1]) };
        [x * c + y * s, -x * s + y * c, v[2]]
    };
    let o = to_local(origin, true);
    let d = to_local(dir, false);
    let lo = [-agent.length / 2.0, -agent.width / 2.0, 0.0];
    let hi = [agent.length / 2.0, agent.width / 2.0, class_height(agent.class)];
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        if d[k] == 0.0 {
            if o[k] < lo[k] || o[k] > hi[k] {
                return None;
            }
        } else {
            let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Precomputed static layer for one map and camera; agent layers are drawn
/// on top per frame.
pub struct Renderer<'a> {
    camera: &'a CameraModel,
    ground: Raster<u8>,
}

impl<'a> Renderer<'a> {
    pub fn new(map: &WorldMap, camera: &'a CameraModel) -> Self {
        let mut ground = Raster::filled(camera.width, camera.height, SegClass::Background.id());
        for j in 0..camera.height {
            for i in 0..camera.width {
                let point = match camera.projection {
                    Projection::TopDown { .. } => camera.pixel_to_ground(i, j).map(|(x, y)| Vec2::new(x, y)),
                    Projection::Pinhole { .. } => camera.pixel_ray(i, j).and_then(|(o, d)| {
                        (d[2] < 0.0 && o[2] > 0.0).then(|| {
                            let t = -o[2] / d[2];
                            Vec2::new(o[0] + t * d[0], o[1] + t * d[1])
                        })
                    }),
                };
                if let Some(p) = point {
                    ground.set(i, j, ground_class(map, p).id());
                }
            }
        }
        Renderer { camera, ground }
    }

    /// Index into `agents` of the agent seen at pixel `(i, j)`, with depth.
    fn agent_at(&self, agents: &[RenderAgent], i: usize, j: usize) -> Option<(usize, f64)> {
        match self.camera.projection {
            Projection::TopDown { .. } => {
                let (x, y) = self.camera.pixel_to_ground(i, j)?;
                let p = Vec2::new(x, y);
                agents.iter().enumerate().rev().find(|(_, a)| a.active && a.obb().contains(p)).map(|(k, a)| {
                    (k, f64::from(TOP_DOWN_CAMERA_HEIGHT) - class_height(a.class))
                })
            }
            Projection::Pinhole { .. } => {
                let (o, d) = self.camera.pixel_ray(i, j)?;
                let mut best: Option<(usize, f64)> = None;
                for (k, a) in agents.iter().enumerate().filter(|(_, a)| a.active) {
                    if let Some(t) = ray_box_hit(o, d, a) {
                        // ties go to the later agent, matching painter's order
                        if best.is_none_or(|(_, bt)| t <= bt) {
                            best = Some((k, t));
                        }
                    }
                }
                best
            }
        }
    }

    pub fn segmentation(&self, agents: &[RenderAgent]) -> Raster<u8> {
        let mut seg = self.ground.clone();
        for j in 0..self.camera.height {
            for i in 0..self.camera.width {
                if let Some((k, _)) = self.agent_at(agents, i, j) {
                    seg.set(i, j, SegClass::of_agent(agents[k].class).id());
                }
            }
        }
        seg
    }

    /// Top-down: camera height minus surface height (road = 0). Pinhole:
    /// ray distance to the nearest agent box. Everything else is the far
    /// plane.
    pub fn depth(&self, agents: &[RenderAgent]) -> Raster<f32> {
        let mut depth = Raster::filled(self.camera.width, self.camera.height, FAR_PLANE);
        let top_down = matches!(self.camera.projection, Projection::TopDown { .. });
        for j in 0..self.camera.height {
            for i in 0..self.camera.width {
                if let Some((_, d)) = self.agent_at(agents, i, j) {
                    depth.set(i, j, d as f32);
                } else if top_down && self.ground.get(i, j) != SegClass::Background.id() {
                    depth.set(i, j, TOP_DOWN_CAMERA_HEIGHT);
                }
            }
        }
        depth
    }
}

impl RenderAgent {
    pub fn obb(&self) -> Obb {
        Obb::new(Vec2::new(self.x, self.y), self.heading, self.length, self.width)
    }
}

pub fn render_segmentation(agents: &[RenderAgent], map: &WorldMap, camera: &CameraModel) -> Raster<u8> {
    Renderer::new(map, camera).segmentation(agents)
}

pub fn render_depth(agents: &[RenderAgent], map: &WorldMap, camera: &CameraModel) -> Raster<f32> {
    Renderer::new(map, camera).depth(agents)
}

/// 1 where any 4-neighbor carries a different class id, else 0. Both sides
/// of a boundary are marked; pixels outside the image are ignored.
pub fn edge_from_seg(seg: &Raster<u8>) -> Raster<u8> {
    let (w, h) = seg.dims();
    let mut out = Raster::filled(w, h, 0u8);
    for y in 0..h {
        for x in 0..w {
            let v = seg.get(x, y);
            let differs = (x > 0 && seg.get(x - 1, y) != v)
                || (x + 1 < w && seg.get(x + 1, y) != v)
                || (y > 0 && seg.get(x, y - 1) != v)
                || (y + 1 < h && seg.get(x, y + 1) != v);
            if differs {
                out.set(x, y, 1);
            }
        }
    }
    out
}
