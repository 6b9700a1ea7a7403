//! Planar geometry: vectors, oriented rectangles, and the separating-axis
//! overlap test.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_heading(theta: f64) -> Self {
        Vec2 { x: theta.cos(), y: theta.sin() }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Rotated a quarter turn counter-clockwise.
    pub fn perp(self) -> Vec2 {
        Vec2 { x: -self.y, y: self.x }
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    // rem_euclid maps -pi to pi already; guard the open end
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Unsigned angle between two headings, in degrees within [0, 180].
pub fn relative_heading_deg(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs().to_degrees().min(180.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Front,
    Rear,
    Left,
    Right,
}

impl Face {
    pub fn is_side(self) -> bool {
        matches!(self, Face::Left | Face::Right)
    }
}

/// Oriented rectangle: center, heading (radians, direction of `length`),
/// full length and width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Vec2,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    pub fn new(center: Vec2, heading: f64, length: f64, width: f64) -> Self {
        Obb { center, heading, length, width }
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_heading(self.heading)
    }

    pub fn left(&self) -> Vec2 {
        self.forward().perp()
    }

    /// Corners counter-clockwise starting front-right.
    pub fn corners(&self) -> [Vec2; 4] {
        let f = self.forward() * (self.length / 2.0);
        let l = self.left() * (self.width / 2.0);
        let c = self.center;
        [c + f - l, c + f + l, c - f + l, c - f - l]
    }

    /// Point in the rectangle's own frame (x forward, y left).
    pub fn to_local(&self, p: Vec2) -> Vec2 {
        let d = p - self.center;
        Vec2::new(d.dot(self.forward()), d.dot(self.left()))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.length / 2.0 && l.y.abs() <= self.width / 2.0
    }

    fn project(&self, axis: Vec2) -> (f64, f64) {
        let c = self.center.dot(axis);
        let r = (self.length / 2.0) * self.forward().dot(axis).abs() + (self.width / 2.0) * self.left().dot(axis).abs();
        (c - r, c + r)
    }

    /// Face whose outward normal best aligns with `dir` (world frame).
    pub fn face_toward(&self, dir: Vec2) -> Face {
        let local = Vec2::new(dir.dot(self.forward()), dir.dot(self.left()));
        let candidates = [
            (Face::Front, local.x),
            (Face::Rear, -local.x),
            (Face::Left, local.y),
            (Face::Right, -local.y),
        ];
        // first maximum wins, so ties resolve front, rear, left, right
        candidates
            .into_iter()
            .fold((Face::Front, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
            .0
    }

    pub fn aabb(&self) -> (Vec2, Vec2) {
        let cs = self.corners();
        let mut lo = cs[0];
        let mut hi = cs[0];
        for c in &cs[1..] {
            lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
            hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
        }
        (lo, hi)
    }
}

/// Separating-axis test over both rectangles' edge normals. Touching
/// rectangles (zero-width overlap) count as overlapping.
pub fn sat_overlap(a: &Obb, b: &Obb) -> bool {
    let axes = [a.forward(), a.left(), b.forward(), b.left()];
    axes.iter().all(|&axis| {
        let (a0, a1) = a.project(axis);
        let (b0, b1) = b.project(axis);
        a1 >= b0 && b1 >= a0
    })
}

/// Intersection polygon of two rectangles (Sutherland-Hodgman clipping of
/// `a` against `b`'s edges). Empty when they do not overlap.
pub fn overlap_polygon(a: &Obb, b: &Obb) -> Vec<Vec2> {
    let mut poly: Vec<Vec2> = a.corners().to_vec();
    let clip = b.corners();
    for i in 0..4 {
        let e0 = clip[i];
        let e1 = clip[(i + 1) % 4];
        let edge = e1 - e0;
        let inside = |p: Vec2| edge.cross(p - e0) >= 0.0;
        let input = std::mem::take(&mut poly);
        if input.is_empty() {
            break;
        }
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci != pi {
                let d = cur - prev;
                let denom = edge.cross(d);
                if denom != 0.0 {
                    let t = edge.cross(e0 - prev) / denom;
                    poly.push(prev + d * t);
                }
            }
            if ci {
                poly.push(cur);
            }
        }
    }
    poly
}

/// Average of the overlap polygon's vertices; falls back to the midpoint of
/// the two centers when clipping degenerates.
pub fn impact_point(a: &Obb, b: &Obb) -> Vec2 {
    let poly = overlap_polygon(a, b);
    if poly.is_empty() {
        return (a.center + b.center) * 0.5;
    }
    let sum = poly.iter().fold(Vec2::default(), |acc, &p| acc + p);
    sum * (1.0 / poly.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_normalization() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((relative_heading_deg(0.0, PI / 2.0) - 90.0).abs() < 1e-9);
        assert!((relative_heading_deg(170f64.to_radians(), -170f64.to_radians()) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn identical_rectangles_overlap() {
        let a = Obb::new(Vec2::new(1.0, 2.0), 0.3, 4.5, 2.0);
        assert!(sat_overlap(&a, &a));
    }

    #[test]
    fn distant_squares_separate() {
        let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 1.0, 1.0);
        let b = Obb::new(Vec2::new(10.0, 0.0), 0.7, 1.0, 1.0);
        assert!(!sat_overlap(&a, &b));
    }

    #[test]
    fn bumper_overlap_faces() {
        let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 4.5, 2.0);
        let b = Obb::new(Vec2::new(4.4, 0.0), 0.0, 4.5, 2.0);
        assert!(sat_overlap(&a, &b));
        let d = b.center - a.center;
        assert_eq!(a.face_toward(d), Face::Front);
        assert_eq!(b.face_toward(-d), Face::Rear);
        let p = impact_point(&a, &b);
        assert!((p.x - 2.2).abs() < 1e-9 && p.y.abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn diagonal_corner_case() {
        // Axis-aligned AABBs would overlap, rotated boxes do not.
        let a = Obb::new(Vec2::new(0.0, 0.0), PI / 4.0, 2.0, 2.0);
        let b = Obb::new(Vec2::new(1.5, 1.5), PI / 4.0, 2.0, 2.0);
        let (alo, ahi) = a.aabb();
        let (blo, bhi) = b.aabb();
        assert!(ahi.x > blo.x && ahi.y > blo.y && bhi.x > alo.x);
        assert!(!sat_overlap(&a, &b));
    }

    #[test]
    fn corners_are_ccw() {
        let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 4.0, 2.0);
        let c = a.corners();
        assert_eq!(c[0], Vec2::new(2.0, -1.0));
        assert_eq!(c[1], Vec2::new(2.0, 1.0));
        let area2: f64 = (0..4).map(|i| c[i].cross(c[(i + 1) % 4])).sum();
        assert!((area2 / 2.0 - 8.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_polygon_area() {
        let a = Obb::new(Vec2::new(0.0, 0.0), 0.0, 2.0, 2.0);
        let b = Obb::new(Vec2::new(1.0, 1.0), 0.0, 2.0, 2.0);
        let poly = overlap_polygon(&a, &b);
        let area: f64 = (0..poly.len()).map(|i| poly[i].cross(poly[(i + 1) % poly.len()])).sum::<f64>() / 2.0;
        assert!((area - 1.0).abs() < 1e-12, "{poly:?}");
        let p = impact_point(&a, &b);
        assert!((p.x - 0.5).abs() < 1e-12 && (p.y - 0.5).abs() < 1e-12);
    }
}
