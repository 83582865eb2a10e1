use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ParamVec, Rgb};
use crate::error::{Error, Result};
use crate::math::Vec3;

/// Directions with cosine below this are rejected by [`eval_ward`].
pub const GRAZING_REJECT: f64 = 1e-6;
/// Lower bound applied to both cosines inside the specular denominator.
pub const GRAZING_CLAMP: f64 = 1e-4;

/// Unit direction in the local shading frame, normal along +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vec3);

impl Direction {
    pub fn new(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDirection(format!("norm {n} is not 1")));
        }
        Ok(Direction(v))
    }

    /// Normalizes `v` first; fails only for a zero or non-finite vector.
    pub fn normalize(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidDirection(format!("cannot normalize {v:?}")));
        }
        Ok(Direction(v / n))
    }

    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        Direction(Vec3::from_spherical(theta, phi))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }

    pub fn cos_theta(self) -> f64 {
        self.0.z
    }

    pub fn theta(self) -> f64 {
        self.0.z.clamp(-1.0, 1.0).acos()
    }

    pub fn phi(self) -> f64 {
        self.0.y.atan2(self.0.x)
    }
}

/// Physical Ward parameters. `rho_s` is a single achromatic coefficient
/// broadcast over the three channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WardBrdf {
    pub rho_d: Rgb,
    pub rho_s: f64,
    pub alpha: f64,
}

impl WardBrdf {
    pub fn new(rho_d: Rgb, rho_s: f64, alpha: f64) -> Result<Self> {
        let w = WardBrdf { rho_d, rho_s, alpha };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !self.rho_d.iter().all(|&c| unit(c)) {
            return Err(Error::InvalidBrdf(format!("rho_d {:?} outside [0,1]", self.rho_d)));
        }
        if !unit(self.rho_s) {
            return Err(Error::InvalidBrdf(format!("rho_s {} outside [0,1]", self.rho_s)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidBrdf(format!("alpha {} outside (0,1]", self.alpha)));
        }
        Ok(())
    }

    /// `[r, g, b, rho_s, alpha]`.
    pub fn to_vec(&self) -> ParamVec {
        [self.rho_d[0], self.rho_d[1], self.rho_d[2], self.rho_s, self.alpha]
    }

    /// Inverse of [`WardBrdf::to_vec`]; performs no validation.
    pub fn from_vec(v: &ParamVec) -> Self {
        WardBrdf { rho_d: [v[0], v[1], v[2]], rho_s: v[3], alpha: v[4] }
    }

    /// Channelwise `rho_d + rho_s`, the quantity pinned by image statistics.
    pub fn albedo_sum(&self) -> Rgb {
        self.rho_d.map(|c| c + self.rho_s)
    }

    /// Clamp into the range the dataset generator samples from.
    pub fn clamped(&self) -> WardBrdf {
        WardBrdf {
            rho_d: self.rho_d.map(|c| c.clamp(0.0, 1.0)),
            rho_s: self.rho_s.clamp(0.0, 1.0),
            alpha: self.alpha.clamp(0.03, 1.0),
        }
    }

    /// Evaluate without direction validation. Cosines are clamped inside the
    /// specular denominator; callers pass directions in the upper hemisphere.
    #[inline]
    pub fn eval_unchecked(&self, wi: Vec3, wo: Vec3) -> Rgb {
        let spec = self.rho_s * specular_lobe(wi, wo, self.alpha);
        self.rho_d.map(|c| c / PI + spec)
    }
}

/// Specular lobe of the isotropic Ward model without the `rho_s` factor:
/// `exp(-tan²θh/α²) / (4πα² sqrt(cosθi cosθo))`.
#[inline]
pub fn specular_lobe(wi: Vec3, wo: Vec3, alpha: f64) -> f64 {
    let h = wi + wo;
    let tan2 = (h.x * h.x + h.y * h.y) / (h.z * h.z);
    lobe_from_tan2(tan2, wi.z, wo.z, alpha)
}

/// The lobe in terms of `tan²θh` and the two cosines, so callers can work in
/// any frame (`tan²θh = (|h|² − (h·n)²) / (h·n)²` for the unnormalized half-vector).
#[inline]
pub fn lobe_from_tan2(tan2: f64, cos_i: f64, cos_o: f64, alpha: f64) -> f64 {
    let a2 = alpha * alpha;
    let denom = 4.0 * PI * a2 * (cos_i.max(GRAZING_CLAMP) * cos_o.max(GRAZING_CLAMP)).sqrt();
    (-tan2 / a2).exp() / denom
}

/// Lobe value and its derivative with respect to alpha.
#[inline]
pub fn specular_lobe_grad(wi: Vec3, wo: Vec3, alpha: f64) -> (f64, f64) {
    let h = wi + wo;
    let tan2 = (h.x * h.x + h.y * h.y) / (h.z * h.z);
    let v = specular_lobe(wi, wo, alpha);
    (v, v * (2.0 * tan2 / (alpha * alpha * alpha) - 2.0 / alpha))
}

/// Evaluate the Ward BRDF for a pair of local-frame directions.
pub fn eval_ward(wi: Direction, wo: Direction, theta: &WardBrdf) -> Result<Rgb> {
    if wi.cos_theta() < GRAZING_REJECT || wo.cos_theta() < GRAZING_REJECT {
        return Err(Error::InvalidDirection(format!(
            "grazing or back-facing direction (cos_i = {}, cos_o = {})",
            wi.cos_theta(),
            wo.cos_theta()
        )));
    }
    if !(theta.alpha > 0.0) {
        return Err(Error::InvalidBrdf(format!("alpha {} must be positive", theta.alpha)));
    }
    Ok(theta.eval_unchecked(wi.vec(), wo.vec()))
}
