use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Projection {
    /// Looking straight down; `center` is the world point under the image
    /// center, +x to the right and +y up in the image.
    TopDown { center: [f64; 2], meters_per_pixel: f64 },
    /// Angles in radians; positive pitch tilts the view toward the ground.
    Pinhole { position: [f64; 3], yaw: f64, pitch: f64, focal_px: f64, principal_point: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    #[serde(flatten)]
    pub projection: Projection,
    pub width: usize,
    pub height: usize,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel::top_down([0.0, 0.0], 0.1, 512, 512)
    }
}

impl CameraModel {
    pub fn top_down(center: [f64; 2], meters_per_pixel: f64, width: usize, height: usize) -> Self {
        CameraModel { projection: Projection::TopDown { center, meters_per_pixel }, width, height }
    }

    /// Pinhole with the principal point at the image center.
    pub fn pinhole(position: [f64; 3], yaw: f64, pitch: f64, focal_px: f64, width: usize, height: usize) -> Self {
        CameraModel {
            projection: Projection::Pinhole {
                position,
                yaw,
                pitch,
                focal_px,
                principal_point: [width as f64 / 2.0, height as f64 / 2.0],
            },
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err(format!("image size must be positive, got {}x{}", self.width, self.height));
        }
        match &self.projection {
            Projection::TopDown { center, meters_per_pixel } => {
                if !(*meters_per_pixel > 0.0 && meters_per_pixel.is_finite()) {
                    return Err(format!("meters_per_pixel must be positive, got {meters_per_pixel}"));
                }
                if !center.iter().all(|v| v.is_finite()) {
                    return Err("camera center must be finite".into());
                }
            }
            Projection::Pinhole { position, yaw, pitch, focal_px, principal_point } => {
                if !(*focal_px > 0.0 && focal_px.is_finite()) {
                    return Err(format!("focal length must be positive, got {focal_px}"));
                }
                let all = position.iter().chain(principal_point).chain([yaw, pitch]);
                if !all.into_iter().all(|v| v.is_finite()) {
                    return Err("camera parameters must be finite".into());
                }
            }
        }
        Ok(())
    }

    /// World coordinates under the center of pixel `(i, j)` (top-down only).
    pub fn pixel_to_ground(&self, i: usize, j: usize) -> Option<(f64, f64)> {
        match self.projection {
            Projection::TopDown { center, meters_per_pixel: m } => Some((
                center[0] + (i as f64 + 0.5 - self.width as f64 / 2.0) * m,
                center[1] - (j as f64 + 0.5 - self.height as f64 / 2.0) * m,
            )),
            Projection::Pinhole { .. } => None,
        }
    }

    /// Camera center and unit ray direction through pixel `(i, j)` (pinhole only).
    pub fn pixel_ray(&self, i: usize, j: usize) -> Option<([f64; 3], [f64; 3])> {
        let Projection::Pinhole { position, yaw, pitch, focal_px, principal_point } = self.projection else {
            return None;
        };
        let forward = [yaw.cos() * pitch.cos(), yaw.sin() * pitch.cos(), -pitch.sin()];
        let right = [yaw.sin(), -yaw.cos(), 0.0];
        let down = cross(forward, right);
        let u = (i as f64 + 0.5 - principal_point[0]) / focal_px;
        let v = (j as f64 + 0.5 - principal_point[1]) / focal_px;
        let d = [0, 1, 2].map(|k| forward[k] + u * right[k] + v * down[k]);
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        Some((position, d.map(|c| c / n)))
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_down_pixel_centers() {
        let c = CameraModel::top_down([10.0, 5.0], 0.5, 4, 2);
        assert_eq!(c.pixel_to_ground(0, 0), Some((9.25, 5.25)));
        assert_eq!(c.pixel_to_ground(3, 1), Some((10.75, 4.75)));
    }

    #[test]
    fn pinhole_axes() {
        let c = CameraModel::pinhole([0.0, 0.0, 1.0], 0.0, 0.0, 100.0, 2, 2);
        let (_, d) = c.pixel_ray(1, 1).unwrap();
        // below and right of center: +x forward, -y right, -z down
        assert!(d[0] > 0.99 && d[1] < 0.0 && d[2] < 0.0, "{d:?}");
    }

    #[test]
    fn json_shape() {
        let c = CameraModel::default();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["type"], "top_down");
        assert_eq!(v["meters_per_pixel"], 0.1);
        assert_eq!(serde_json::from_value::<CameraModel>(v).unwrap(), c);
        assert!(CameraModel::top_down([0.0, 0.0], 0.0, 1, 1).validate().is_err());
        assert!(CameraModel::pinhole([0.0; 3], 0.0, 0.0, 10.0, 0, 1).validate().is_err());
    }
}
