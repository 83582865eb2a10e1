use serde::{Deserialize, Serialize};

use super::geometry::Shape;
use crate::brdf::{Rgb, WardBrdf};
use crate::error::{Error, Result};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalLight {
    /// Unit vector pointing towards the light.
    pub direction: Vec3,
    /// Contribution `f · radiance · cosθi` at the lit point.
    pub radiance: Rgb,
}

/// Uniform ambient radiance plus a handful of directional lights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub ambient: Rgb,
    pub lights: Vec<DirectionalLight>,
}

impl Environment {
    pub fn uniform(ambient: Rgb) -> Self {
        Environment { ambient, lights: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        let non_neg = |c: &Rgb| c.iter().all(|v| v.is_finite() && *v >= 0.0);
        if !non_neg(&self.ambient) || !self.lights.iter().all(|l| non_neg(&l.radiance)) {
            return Err(Error::Config("negative or non-finite illumination".into()));
        }
        if self.lights.iter().any(|l| (l.direction.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Config("light direction is not a unit vector".into()));
        }
        if self.ambient.iter().all(|&v| v == 0.0) && self.lights.is_empty() {
            return Err(Error::Config("environment has no light".into()));
        }
        Ok(())
    }

    /// All radiances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Environment {
        Environment {
            ambient: self.ambient.map(|v| v * factor),
            lights: self
                .lights
                .iter()
                .map(|l| DirectionalLight { direction: l.direction, radiance: l.radiance.map(|v| v * factor) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub shape: Shape,
    pub material: WardBrdf,
    pub environment: Environment,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.material.validate()?;
        self.environment.validate()
    }
}
