use serde::{Deserialize, Serialize};

use super::color::{lab_to_rgb, lab_to_rgb_jacobian, luminance, rgb_to_lab, LUMINANCE_WEIGHTS};
use super::{ParamVec, WardBrdf};

/// Perceptually uniform Ward coordinates: CIE Lab of the diffuse albedo plus
/// gloss contrast `c` and distinctness `d = 1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptualBrdf {
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PerceptualBrdf {
    pub fn to_vec(&self) -> ParamVec {
        [self.l, self.a, self.b, self.c, self.d]
    }

    pub fn from_vec(v: &ParamVec) -> Self {
        PerceptualBrdf { l: v[0], a: v[1], b: v[2], c: v[3], d: v[4] }
    }
}

/// Result of inverting the perceptual map. `clamped` is set when the gloss
/// contrast implied a negative `rho_s`, which was replaced by zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FromPerceptual {
    pub brdf: WardBrdf,
    pub clamped: bool,
}

/// Gloss contrast with the luminance of `rho_d` standing in for a scalar albedo.
fn gloss_contrast(rho_s: f64, lum: f64) -> f64 {
    (rho_s + lum / 2.0).cbrt() - (lum / 2.0).cbrt()
}

pub fn to_perceptual(theta: &WardBrdf) -> PerceptualBrdf {
    let [l, a, b] = rgb_to_lab(&theta.rho_d);
    PerceptualBrdf {
        l,
        a,
        b,
        c: gloss_contrast(theta.rho_s, luminance(&theta.rho_d)),
        d: 1.0 - theta.alpha,
    }
}

pub fn from_perceptual(p: &PerceptualBrdf) -> FromPerceptual {
    let rho_d = lab_to_rgb(&[p.l, p.a, p.b]);
    let half = luminance(&rho_d) / 2.0;
    let rho_s = (p.c + half.cbrt()).powi(3) - half;
    let clamped = rho_s < 0.0;
    FromPerceptual {
        brdf: WardBrdf { rho_d, rho_s: rho_s.max(0.0), alpha: 1.0 - p.d },
        clamped,
    }
}

/// Jacobian of `from_perceptual` as a map `[L,a,b,c,d] -> [r,g,b,rho_s,alpha]`,
/// row-major. A clamped `rho_s` has a zero row.
pub fn from_perceptual_jacobian(p: &PerceptualBrdf) -> [[f64; 5]; 5] {
    let lab = [p.l, p.a, p.b];
    let rho_d = lab_to_rgb(&lab);
    let jrgb = lab_to_rgb_jacobian(&lab);
    let half = luminance(&rho_d) / 2.0;
    let u = half.cbrt();
    let rho_s = (p.c + u).powi(3) - half;

    let mut jac = [[0.0; 5]; 5];
    for r in 0..3 {
        jac[r][..3].copy_from_slice(&jrgb[r]);
    }
    if rho_s >= 0.0 {
        // rho_s = (c + u)^3 - Y/2 with u = (Y/2)^(1/3); du/dY = 1 / (6u^2).
        let u_safe = if u.abs() < 1e-6 { 1e-6f64.copysign(u) } else { u };
        let ds_dy = (p.c + u).powi(2) / (2.0 * u_safe * u_safe) - 0.5;
        for col in 0..3 {
            let dy: f64 = (0..3).map(|k| LUMINANCE_WEIGHTS[k] * jrgb[k][col]).sum();
            jac[3][col] = ds_dy * dy;
        }
        jac[3][3] = 3.0 * (p.c + u).powi(2);
    }
    jac[4][4] = -1.0;
    jac
}
