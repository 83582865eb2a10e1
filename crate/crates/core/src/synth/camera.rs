use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Rigid camera-to-world transform. Camera axes follow the image: +x right,
/// +y down, +z forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: Mat3,
    pub position: Vec3,
}

impl Pose {
    pub fn look_at(position: Vec3, target: Vec3) -> Result<Pose> {
        let fwd = target - position;
        if fwd.norm() < 1e-12 {
            return Err(Error::Geometry("camera coincides with its target".into()));
        }
        let fwd = fwd.normalized();
        let up_hint = if fwd.z.abs() > 0.99 { Vec3::Y } else { Vec3::Z };
        let right = fwd.cross(up_hint).normalized();
        let down = fwd.cross(right);
        Ok(Pose { rotation: Mat3::from_cols(right, down, fwd), position })
    }

    pub fn forward(&self) -> Vec3 {
        self.rotation.col(2)
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.transpose().mul_vec(p - self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels, principal point at the image centre.
    pub fn from_fov(width: usize, height: usize, vertical_fov_deg: f64) -> Intrinsics {
        let f = height as f64 / (2.0 * (vertical_fov_deg.to_radians() / 2.0).tan());
        Intrinsics { fx: f, fy: f, cx: width as f64 / 2.0, cy: height as f64 / 2.0, width, height }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.width > 0
            && self.height > 0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.fx > 0.0
            && self.fy > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid intrinsics {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub pose: Pose,
    pub intrinsics: Intrinsics,
}

impl Camera {
    /// World-space unit ray through continuous pixel coordinates.
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        let k = &self.intrinsics;
        let d = Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        self.pose.rotation.mul_vec(d).normalized()
    }

    /// Continuous pixel coordinates of a world point in front of the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let c = self.pose.to_camera(p);
        if c.z <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy))
    }

    pub fn in_image(&self, u: f64, v: f64) -> bool {
        let k = &self.intrinsics;
        (0.0..k.width as f64).contains(&u) && (0.0..k.height as f64).contains(&v)
    }
}
