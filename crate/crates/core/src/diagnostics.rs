//! Gradient checks over every differentiable piece, shared by the CLI and the
//! test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brdf::{Metric, WardBrdf};
use crate::grouplet::{Grouplet, GroupletConfig, NodeBatch, OBS_FEATURES};
use crate::hemicnn::{HemiCnn, HemiCnnConfig};
use crate::math::Vec3;
use crate::nn::{
    grad_check, maxpool2x2, moment_pool, moment_pool_backward, relu, relu_backward, scatter_backward, setmax, tanh,
    tanh_backward, Conv3x3, ImageShape, Linear, Module,
};
use crate::training::{loss_ec, loss_total, LossConfig};

/// Tolerance for smooth operations.
pub const SMOOTH_TOL: f64 = 1e-6;
/// Tolerance for kinked operations, composed networks and losses.
pub const COMPOSITE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn probe(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}

/// Pushes values away from zero so no input sits on the ReLU kink.
fn off_kink(x: &mut [f64]) {
    for v in x {
        if v.abs() < 0.05 {
            *v = 0.05f64.copysign(*v) + *v;
        }
    }
}

fn check<F>(out: &mut Vec<GradCheck>, name: &str, tol: f64, f: F, x: &[f64], h: f64)
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let e = grad_check(f, x, h);
    out.push(GradCheck { name: name.into(), max_rel_error: e, tolerance: tol, passed: e < tol });
}

fn random_brdf(rng: &mut ChaCha8Rng) -> WardBrdf {
    WardBrdf::new([rng.gen(), rng.gen(), rng.gen()], rng.gen_range(0.0..0.6), rng.gen_range(0.1..1.0)).unwrap()
}

/// Runs every check at 64-bit with the given seed.
pub fn gradient_suite(seed: u64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let layer = Linear::<f64>::new(5, 7, &mut rng);
    let (np, x, w) = (layer.num_params(), uniform(&mut rng, 10), uniform(&mut rng, 14));
    let mut v = layer.flatten();
    v.extend(&x);
    check(&mut out, "fc", SMOOTH_TOL, |p| {
        let mut l = layer.clone();
        l.load_flat(&p[..np]).unwrap();
        let y = l.forward(&p[np..]).unwrap();
        let mut g = l.zeros_like();
        let dx = l.backward(&p[np..], &w, &mut g, true).unwrap().unwrap();
        let mut grad = g.flatten();
        grad.extend(dx);
        (probe(&y, &w), grad)
    }, &v, 1e-5);

    let conv = Conv3x3::<f64>::new(2, 3, &mut rng);
    let s = ImageShape { batch: 2, height: 4, width: 3, channels: 2 };
    let (np, x, w) = (conv.num_params(), uniform(&mut rng, s.len()), uniform(&mut rng, 2 * 4 * 3 * 3));
    let mut v = conv.flatten();
    v.extend(&x);
    check(&mut out, "conv3x3", SMOOTH_TOL, |p| {
        let mut c = conv.clone();
        c.load_flat(&p[..np]).unwrap();
        let y = c.forward(&p[np..], s).unwrap();
        let mut g = c.zeros_like();
        let dx = c.backward(&p[np..], s, &w, &mut g, true).unwrap().unwrap();
        let mut grad = g.flatten();
        grad.extend(dx);
        (probe(&y, &w), grad)
    }, &v, 1e-5);

    let s = ImageShape { batch: 2, height: 4, width: 4, channels: 3 };
    let (x, w) = (uniform(&mut rng, s.len()), uniform(&mut rng, s.len() / 4));
    check(&mut out, "maxpool2x2", COMPOSITE_TOL, |p| {
        let m = maxpool2x2(p, s).unwrap();
        (probe(&m.y, &w), scatter_backward(&m.argmax, &w, p.len()))
    }, &x, 1e-6);

    let (mut x, w) = (uniform(&mut rng, 20), uniform(&mut rng, 20));
    check(&mut out, "tanh", SMOOTH_TOL, |p| {
        let y = tanh(p);
        (probe(&y, &w), tanh_backward(&y, &w))
    }, &x, 1e-5);
    off_kink(&mut x);
    check(&mut out, "relu", COMPOSITE_TOL, |p| (probe(&relu(p), &w), relu_backward(p, &w)), &x, 1e-6);

    let (x, w) = (uniform(&mut rng, 20), uniform(&mut rng, 8));
    check(&mut out, "setmax", COMPOSITE_TOL, |p| {
        let (y, arg) = setmax(p, 4, &[2, 3]).unwrap();
        (probe(&y, &w), scatter_backward(&arg, &w, p.len()))
    }, &x, 1e-6);

    let (x, w) = (uniform(&mut rng, 21), uniform(&mut rng, 12));
    check(&mut out, "moment_pool", SMOOTH_TOL, |p| {
        let y = moment_pool(p, 3, &[3, 4]).unwrap();
        (probe(&y, &w), moment_pool_backward(p, 3, &[3, 4], &y, &w))
    }, &x, 1e-5);

    let hemi = HemiCnn::<f64>::new(HemiCnnConfig { resolution: 4, voxels: 3 }, &mut rng).unwrap();
    let images: Vec<f64> = (0..5 * 4 * 4 * 3).map(|_| rng.gen()).collect();
    let target = uniform(&mut rng, 10);
    check(&mut out, "hemicnn", COMPOSITE_TOL, |p| {
        let mut n = hemi.clone();
        n.load_flat(p).unwrap();
        let (y, cache) = n.forward(&images, &[3, 2]).unwrap();
        let dy: Vec<f64> = y.iter().zip(&target).map(|(a, t)| 2.0 * (a - t)).collect();
        let mut g = n.zeros_like();
        n.backward(&cache, &dy, &mut g).unwrap();
        (y.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum(), g.flatten())
    }, &hemi.flatten(), 1e-6);

    let cfg = GroupletConfig { nodes: 3, train_nodes: 3, observations: 3 };
    let net = Grouplet::<f64>::new(cfg, &mut rng).unwrap();
    let mut batch = NodeBatch::<f64>::new(3);
    batch.observations = uniform(&mut rng, 5 * 3 * OBS_FEATURES);
    batch.normals = (0..5)
        .flat_map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0).normalized().to_array())
        .collect();
    batch.groups = vec![3, 2];
    let target = uniform(&mut rng, 10);
    let full = net.flatten();
    let mut picks = Vec::new();
    let mut at = 0;
    for (_, t) in net.tensors() {
        for _ in 0..8 {
            picks.push(at + rng.gen_range(0..t.len()));
        }
        at += t.len();
    }
    picks.sort();
    picks.dedup();
    let x0: Vec<f64> = picks.iter().map(|&i| full[i]).collect();
    check(&mut out, "grouplet", COMPOSITE_TOL, |x| {
        let mut p = full.clone();
        for (&i, &v) in picks.iter().zip(x) {
            p[i] = v;
        }
        let mut n = net.clone();
        n.load_flat(&p).unwrap();
        let (y, cache) = n.forward(&batch).unwrap();
        let dy: Vec<f64> = y.iter().zip(&target).map(|(a, t)| 2.0 * (a - t)).collect();
        let mut g = n.zeros_like();
        n.backward(&cache, &dy, &mut g).unwrap();
        let flat = g.flatten();
        (y.iter().zip(&target).map(|(a, t)| (a - t) * (a - t)).sum(), picks.iter().map(|&i| flat[i]).collect())
    }, &x0, 1e-6);

    let stats: Vec<_> = (0..3)
        .map(|_| ([0, 1, 2].map(|_| rng.gen_range(0.05..0.9)), [0, 1, 2].map(|_| rng.gen_range(0.2..0.9))))
        .collect();
    let p = random_brdf(&mut rng);
    let x = vec![p.rho_d[0], p.rho_d[1], p.rho_d[2], p.rho_s];
    check(&mut out, "loss_ec", SMOOTH_TOL, |v| {
        let (e, g) = loss_ec(&[v[0], v[1], v[2]], v[3], &stats);
        (e, g.to_vec())
    }, &x, 1e-6);

    for (name, metric) in [("loss_rmse1", Metric::Rmse1), ("loss_rmse2", Metric::Rmse2), ("loss_cuberoot", Metric::CubeRoot)] {
        let cfg = LossConfig::new(metric, 0.5);
        let quad = cfg.quadrature();
        let (t, p) = (random_brdf(&mut rng), random_brdf(&mut rng));
        check(&mut out, name, COMPOSITE_TOL, |v| {
            let r = loss_total(&std::array::from_fn(|k| v[k]), &t, &stats, &cfg, quad.as_ref()).unwrap();
            (r.total, r.grad.to_vec())
        }, &cfg.parameterization.encode(&p), 1e-6);
    }
    out
}
