use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::perceptual::to_perceptual;
use super::ward::{specular_lobe, specular_lobe_grad};
use super::{ParamVec, WardBrdf};
use crate::error::Error;
use crate::math::Vec3;

/// Weight of the gloss term in the perceptual distance.
pub const LAMBDA_G: f64 = 1.0;
/// Added under the cube root in the training loss so its gradient stays finite.
pub const CUBE_ROOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rmse1,
    Rmse2,
    CubeRoot,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rmse1 => "rmse1",
            Metric::Rmse2 => "rmse2",
            Metric::CubeRoot => "cuberoot",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rmse1" => Ok(Metric::Rmse1),
            "rmse2" => Ok(Metric::Rmse2),
            "cuberoot" | "cube-root" | "cube_root" => Ok(Metric::CubeRoot),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Distance between two Ward BRDFs. `CubeRoot` uses the standard 16×16
/// quadrature and is exactly zero for identical arguments.
pub fn brdf_distance(theta: &WardBrdf, theta_hat: &WardBrdf, metric: Metric) -> f64 {
    match metric {
        Metric::Rmse1 => sq_dist(&theta.to_vec(), &theta_hat.to_vec()),
        Metric::Rmse2 => {
            let (p, q) = (to_perceptual(theta), to_perceptual(theta_hat));
            let lab = sq_dist(&[p.l, p.a, p.b], &[q.l, q.a, q.b]);
            lab + LAMBDA_G * sq_dist(&[p.c, p.d], &[q.c, q.d])
        }
        Metric::CubeRoot => CubeRootQuadrature::standard().distance(theta, theta_hat),
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, Copy)]
struct QuadPair {
    wi: Vec3,
    wo: Vec3,
    /// `cosθi` times the cell solid angles times the azimuth multiplicity.
    weight: f64,
}

/// Deterministic equal-solid-angle quadrature of
/// `∫∫ ‖f(ωi,ωo;Θ) − f(ωi,ωo;Θ̂)‖ cosθi dωi dωo` over both hemispheres.
///
/// Cells are uniform in `cosθ` and `φ`. Because the model is isotropic the
/// integrand depends on `φi − φo` only, so the `n_phi²` azimuth pairs collapse
/// to `n_phi` relative azimuths, each counted `n_phi` times.
#[derive(Debug, Clone)]
pub struct CubeRootQuadrature {
    n_theta: usize,
    n_phi: usize,
    pairs: Vec<QuadPair>,
}

impl CubeRootQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        assert!(n_theta > 0 && n_phi > 0, "quadrature needs at least one cell");
        let cell = 2.0 * PI / (n_theta * n_phi) as f64;
        let mu = |k: usize| (k as f64 + 0.5) / n_theta as f64;
        let mut pairs = Vec::with_capacity(n_theta * n_theta * n_phi);
        for ti in 0..n_theta {
            let cos_i = mu(ti);
            let sin_i = (1.0 - cos_i * cos_i).sqrt();
            for to in 0..n_theta {
                let cos_o = mu(to);
                let wo = Vec3::new((1.0 - cos_o * cos_o).sqrt(), 0.0, cos_o);
                for dphi in 0..n_phi {
                    let phi = dphi as f64 * 2.0 * PI / n_phi as f64;
                    let wi = Vec3::new(sin_i * phi.cos(), sin_i * phi.sin(), cos_i);
                    pairs.push(QuadPair { wi, wo, weight: cos_i * cell * cell * n_phi as f64 });
                }
            }
        }
        CubeRootQuadrature { n_theta, n_phi, pairs }
    }

    /// The 16 θ × 16 φ grid used by the metric.
    pub fn standard() -> &'static CubeRootQuadrature {
        static Q: OnceLock<CubeRootQuadrature> = OnceLock::new();
        Q.get_or_init(|| CubeRootQuadrature::new(16, 16))
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    /// Number of (ωi, ωo) cell pairs the rule represents.
    pub fn direction_pairs(&self) -> usize {
        (self.n_theta * self.n_phi).pow(2)
    }

    pub fn integral(&self, a: &WardBrdf, b: &WardBrdf) -> f64 {
        let dd = [0, 1, 2].map(|c| (a.rho_d[c] - b.rho_d[c]) / PI);
        self.pairs
            .iter()
            .map(|p| {
                let ds = a.rho_s * specular_lobe(p.wi, p.wo, a.alpha)
                    - b.rho_s * specular_lobe(p.wi, p.wo, b.alpha);
                let n2: f64 = dd.iter().map(|d| (d + ds) * (d + ds)).sum();
                n2.sqrt() * p.weight
            })
            .sum()
    }

    pub fn distance(&self, a: &WardBrdf, b: &WardBrdf) -> f64 {
        self.integral(a, b).cbrt()
    }

    /// `cbrt(integral + eps)` and its gradient with respect to the physical
    /// parameter vector of `pred`.
    pub fn loss_and_grad(&self, target: &WardBrdf, pred: &WardBrdf) -> (f64, ParamVec) {
        let dd = [0, 1, 2].map(|c| (target.rho_d[c] - pred.rho_d[c]) / PI);
        let mut integral = 0.0;
        let mut grad = [0.0; 5];
        for p in &self.pairs {
            let st = specular_lobe(p.wi, p.wo, target.alpha);
            let (sp, dsp) = specular_lobe_grad(p.wi, p.wo, pred.alpha);
            let ds = target.rho_s * st - pred.rho_s * sp;
            let diff = dd.map(|d| d + ds);
            let n = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
            integral += n * p.weight;
            if n > 0.0 {
                let w = p.weight / n;
                let sum: f64 = diff.iter().sum();
                for c in 0..3 {
                    grad[c] -= w * diff[c] / PI;
                }
                grad[3] -= w * sum * sp;
                grad[4] -= w * sum * pred.rho_s * dsp;
            }
        }
        let inner = integral + CUBE_ROOT_EPS;
        let value = inner.cbrt();
        let outer = 1.0 / (3.0 * value * value);
        (value, grad.map(|g| g * outer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_brdf(rng: &mut ChaCha8Rng) -> WardBrdf {
        WardBrdf::new([rng.gen(), rng.gen(), rng.gen()], rng.gen_range(0.0..0.6), rng.gen_range(0.1..1.0))
            .unwrap()
    }

    #[test]
    fn identity_is_zero_for_every_metric() {
        let w = WardBrdf::new([0.3, 0.2, 0.7], 0.2, 0.25).unwrap();
        for m in [Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot] {
            assert_eq!(brdf_distance(&w, &w, m), 0.0);
        }
    }

    #[test]
    fn rmse1_single_channel_offset() {
        let a = WardBrdf::new([0.5, 0.2, 0.2], 0.1, 0.3).unwrap();
        let b = WardBrdf::new([0.4, 0.2, 0.2], 0.1, 0.3).unwrap();
        assert!((brdf_distance(&a, &b, Metric::Rmse1) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rmse2_is_lab_plus_gloss() {
        let a = WardBrdf::new([0.5, 0.5, 0.5], 0.1, 0.3).unwrap();
        let b = WardBrdf::new([0.5, 0.5, 0.5], 0.1, 0.5).unwrap();
        // Same albedo and rho_s: only d differs, by 0.2.
        assert!((brdf_distance(&a, &b, Metric::Rmse2) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn cube_root_diffuse_closed_form() {
        let a = WardBrdf::new([0.5, 0.4, 0.3], 0.0, 0.5).unwrap();
        let b = WardBrdf::new([0.6, 0.5, 0.4], 0.0, 0.5).unwrap();
        let delta = (3.0f64 * 0.01).sqrt();
        // ∫∫ cosθi dωi dωo = π · 2π
        let want = (delta / PI * PI * 2.0 * PI).cbrt();
        let got = brdf_distance(&a, &b, Metric::CubeRoot);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn unknown_metric_is_config_error() {
        assert!(matches!("rmse3".parse::<Metric>(), Err(Error::Config(_))));
        assert_eq!("CubeRoot".parse::<Metric>().unwrap(), Metric::CubeRoot);
    }

    #[test]
    fn symmetric_reduction_matches_full_grid() {
        // Brute-force the full (θi, φi, θo, φo) grid without the azimuth reduction.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random_brdf(&mut rng), random_brdf(&mut rng));
        let n = 6;
        let cell = 2.0 * PI / (n * n) as f64;
        let mut full = 0.0;
        for ti in 0..n {
            for pi in 0..n {
                for to in 0..n {
                    for po in 0..n {
                        let mu_i = (ti as f64 + 0.5) / n as f64;
                        let mu_o = (to as f64 + 0.5) / n as f64;
                        let wi = Vec3::from_spherical(mu_i.acos(), (pi as f64 + 0.5) * 2.0 * PI / n as f64);
                        let wo = Vec3::from_spherical(mu_o.acos(), (po as f64 + 0.5) * 2.0 * PI / n as f64);
                        let (fa, fb) = (a.eval_unchecked(wi, wo), b.eval_unchecked(wi, wo));
                        let d: f64 = (0..3).map(|c| (fa[c] - fb[c]).powi(2)).sum::<f64>().sqrt();
                        full += d * mu_i * cell * cell;
                    }
                }
            }
        }
        let q = CubeRootQuadrature::new(n, n).integral(&a, &b);
        assert!((q - full).abs() < 1e-9 * full, "{q} vs {full}");
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let q = CubeRootQuadrature::new(8, 8);
        let t = WardBrdf::new([0.4, 0.3, 0.2], 0.3, 0.2).unwrap();
        let p = WardBrdf::new([0.2, 0.5, 0.3], 0.1, 0.4).unwrap();
        let (_, g) = q.loss_and_grad(&t, &p);
        let base = p.to_vec();
        let h = 1e-6;
        for k in 0..5 {
            let (mut hi, mut lo) = (base, base);
            hi[k] += h;
            lo[k] -= h;
            let fh = q.loss_and_grad(&t, &WardBrdf::from_vec(&hi)).0;
            let fl = q.loss_and_grad(&t, &WardBrdf::from_vec(&lo)).0;
            let fd = (fh - fl) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * fd.abs().max(1e-8), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn metric_axioms_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (a, b) = (random_brdf(&mut rng), random_brdf(&mut rng));
            for m in [Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot] {
                let ab = brdf_distance(&a, &b, m);
                let ba = brdf_distance(&b, &a, m);
                assert!(ab >= 0.0);
                assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
                assert!(ab > 0.0);
            }
        }
    }
}
