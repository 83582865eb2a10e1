use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::brdf::{
    from_perceptual, from_perceptual_jacobian, to_perceptual, CubeRootQuadrature, Metric, ParamVec, PerceptualBrdf, Rgb,
    WardBrdf, LAMBDA_G,
};
use crate::error::{Error, Result};
use crate::synth::GAMMA;

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_LAB_SCALE: f64 = 0.01;
/// Training-time CubeRoot grid (per hemisphere axis); evaluation uses 16.
pub const TRAIN_CUBE_ROOT_GRID: usize = 8;
/// Below this roughness the CubeRoot loss sees a smooth floor (bounded below by
/// half this value) instead of the raw prediction, so the lobe stays finite.
pub const ALPHA_SOFT_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameterization {
    /// `[r, g, b, rho_s, alpha]`
    Physical,
    /// `[L, a, b, c, d]`
    Perceptual,
}

impl Parameterization {
    pub fn for_metric(metric: Metric) -> Self {
        match metric {
            Metric::Rmse2 => Parameterization::Perceptual,
            Metric::Rmse1 | Metric::CubeRoot => Parameterization::Physical,
        }
    }

    pub fn encode(self, brdf: &WardBrdf) -> ParamVec {
        match self {
            Parameterization::Physical => brdf.to_vec(),
            Parameterization::Perceptual => to_perceptual(brdf).to_vec(),
        }
    }

    /// Physical BRDF for a vector in this parameterization. Perceptual vectors
    /// with negative implied `rho_s` are clamped; the flag reports it.
    pub fn decode(self, v: &ParamVec) -> (WardBrdf, bool) {
        match self {
            Parameterization::Physical => (WardBrdf::from_vec(v), false),
            Parameterization::Perceptual => {
                let r = from_perceptual(&PerceptualBrdf::from_vec(v));
                (r.brdf, r.clamped)
            }
        }
    }

    /// Prediction clamped to the generator's ranges, re-expressed in this
    /// parameterization.
    pub fn clamp_prediction(self, v: &ParamVec) -> ParamVec {
        self.encode(&self.decode(v).0.clamped())
    }

    pub fn dim_names(self) -> [&'static str; 5] {
        match self {
            Parameterization::Physical => ["rho_d_r", "rho_d_g", "rho_d_b", "rho_s", "alpha"],
            Parameterization::Perceptual => ["L", "a", "b", "c", "d"],
        }
    }
}

impl fmt::Display for Parameterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parameterization::Physical => "physical",
            Parameterization::Perceptual => "perceptual",
        })
    }
}

impl FromStr for Parameterization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "physical" => Ok(Parameterization::Physical),
            "perceptual" => Ok(Parameterization::Perceptual),
            other => Err(Error::Config(format!("unknown parameterization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub metric: Metric,
    /// Weight of the image-statistics term.
    pub lambda: f64,
    /// Gloss weight inside RMSE2.
    pub lambda_g: f64,
    /// Multiplies L, a, b inside the RMSE2 training loss (0.01 puts Lab on
    /// the unit scale of c and d).
    pub lab_scale: f64,
    pub parameterization: Parameterization,
    /// CubeRoot quadrature size used while training.
    pub cube_root_grid: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig::new(Metric::Rmse1, DEFAULT_LAMBDA)
    }
}

impl LossConfig {
    pub fn new(metric: Metric, lambda: f64) -> Self {
        LossConfig {
            metric,
            lambda,
            lambda_g: LAMBDA_G,
            lab_scale: DEFAULT_LAB_SCALE,
            parameterization: Parameterization::for_metric(metric),
            cube_root_grid: TRAIN_CUBE_ROOT_GRID,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be finite and ≥ 0, got {}", self.lambda)));
        }
        if !(self.lambda_g >= 0.0 && self.lambda_g.is_finite()) {
            return Err(Error::Config(format!("lambda_g must be finite and ≥ 0, got {}", self.lambda_g)));
        }
        if !(self.lab_scale > 0.0 && self.lab_scale.is_finite()) {
            return Err(Error::Config(format!("lab_scale must be finite and positive, got {}", self.lab_scale)));
        }
        if self.parameterization != Parameterization::for_metric(self.metric) {
            return Err(Error::Config(format!(
                "metric {} requires the {} parameterization",
                self.metric,
                Parameterization::for_metric(self.metric)
            )));
        }
        if self.metric == Metric::CubeRoot && self.cube_root_grid == 0 {
            return Err(Error::Config("CubeRoot grid must be positive".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Option<CubeRootQuadrature> {
        (self.metric == Metric::CubeRoot).then(|| CubeRootQuadrature::new(self.cube_root_grid, self.cube_root_grid))
    }
}

/// `Σ_i ‖(ρ_d + ρ_s)·B̄_i^γ − F̄_i^γ‖²` and its gradient with respect to
/// `[ρ_d (3), ρ_s]`.
pub fn loss_ec(rho_d: &Rgb, rho_s: f64, stats: &[(Rgb, Rgb)]) -> (f64, [f64; 4]) {
    let mut value = 0.0;
    let mut grad = [0.0; 4];
    for (f_bar, b_bar) in stats {
        for c in 0..3 {
            let b = b_bar[c].powf(GAMMA);
            let r = (rho_d[c] + rho_s) * b - f_bar[c].powf(GAMMA);
            value += r * r;
            grad[c] += 2.0 * r * b;
            grad[3] += 2.0 * r * b;
        }
    }
    (value, grad)
}

fn soft_floor(alpha: f64) -> (f64, f64) {
    if alpha >= ALPHA_SOFT_FLOOR {
        (alpha, 1.0)
    } else {
        let half = ALPHA_SOFT_FLOOR / 2.0;
        let e = (2.0 * (alpha - ALPHA_SOFT_FLOOR) / ALPHA_SOFT_FLOOR).exp();
        (half + half * e, e)
    }
}

/// Loss value, its parts, and the gradient with respect to the prediction
/// vector (in the active parameterization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub e_d: f64,
    pub e_c: f64,
    pub grad: ParamVec,
    /// The perceptual inverse clamped a negative `rho_s` inside `E_c`.
    pub clamped: bool,
}

/// `J = E_d(Θ, Θ̂) + λ·E_c(Θ̂)`.
pub fn loss_total(
    pred: &ParamVec,
    target: &WardBrdf,
    stats: &[(Rgb, Rgb)],
    cfg: &LossConfig,
    quadrature: Option<&CubeRootQuadrature>,
) -> Result<LossValue> {
    cfg.validate()?;
    let param = cfg.parameterization;
    let t = param.encode(target);
    let mut grad = [0.0; 5];
    let e_d = match cfg.metric {
        Metric::Rmse1 => {
            let mut e = 0.0;
            for k in 0..5 {
                let d = pred[k] - t[k];
                e += d * d;
                grad[k] = 2.0 * d;
            }
            e
        }
        Metric::Rmse2 => {
            let mut e = 0.0;
            for k in 0..5 {
                let w = if k < 3 { cfg.lab_scale * cfg.lab_scale } else { cfg.lambda_g };
                let d = pred[k] - t[k];
                e += w * d * d;
                grad[k] = 2.0 * w * d;
            }
            e
        }
        Metric::CubeRoot => {
            let quad = quadrature.ok_or_else(|| Error::Config("CubeRoot loss needs a quadrature".into()))?;
            let (alpha, dalpha) = soft_floor(pred[4]);
            let p = WardBrdf { rho_d: [pred[0], pred[1], pred[2]], rho_s: pred[3], alpha };
            let (v, g) = quad.loss_and_grad(target, &p);
            grad = g;
            grad[4] *= dalpha;
            v
        }
    };
    let mut clamped = false;
    let mut e_c = 0.0;
    if cfg.lambda > 0.0 && !stats.is_empty() {
        let (phys, jac) = match param {
            Parameterization::Physical => (*pred, None),
            Parameterization::Perceptual => {
                let p = PerceptualBrdf::from_vec(pred);
                let r = from_perceptual(&p);
                clamped = r.clamped;
                (r.brdf.to_vec(), Some(from_perceptual_jacobian(&p)))
            }
        };
        let (v, g) = loss_ec(&[phys[0], phys[1], phys[2]], phys[3], stats);
        e_c = v;
        let g_phys = [g[0], g[1], g[2], g[3], 0.0];
        for k in 0..5 {
            let gk = match &jac {
                None => g_phys[k],
                Some(j) => (0..5).map(|r| j[r][k] * g_phys[r]).sum(),
            };
            grad[k] += cfg.lambda * gk;
        }
    }
    Ok(LossValue { total: e_d + cfg.lambda * e_c, e_d, e_c, grad, clamped })
}
