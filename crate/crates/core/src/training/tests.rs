use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::brdf::{to_perceptual, Metric, WardBrdf};
use crate::nn::{grad_check, Module};
use crate::synth::{generate_dataset, Dataset, DatasetConfig};

fn random_brdf(rng: &mut ChaCha8Rng) -> WardBrdf {
    WardBrdf::new([rng.gen(), rng.gen(), rng.gen()], rng.gen_range(0.0..0.6), rng.gen_range(0.1..1.0)).unwrap()
}

fn random_stats(rng: &mut ChaCha8Rng, n: usize) -> Vec<([f64; 3], [f64; 3])> {
    (0..n)
        .map(|_| {
            let b = [rng.gen_range(0.2..0.9), rng.gen_range(0.2..0.9), rng.gen_range(0.2..0.9)];
            let f = [rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9)];
            (f, b)
        })
        .collect()
}

#[test]
fn ec_cancels_when_statistics_agree() {
    let stats = vec![([0.4, 0.5, 0.6], [0.4, 0.5, 0.6]); 3];
    let (v, _) = loss_ec(&[0.7; 3], 0.3, &stats);
    assert!(v.abs() < 1e-30);
}

#[test]
fn ec_single_view_value() {
    let (v, _) = loss_ec(&[0.8; 3], 0.2, &[([0.0; 3], [0.5; 3])]);
    let want = 3.0 * 0.5f64.powf(2.4).powi(2);
    assert!((v - want).abs() < 1e-14);
    assert!((v - 0.10769).abs() < 1e-4, "{v}");
}

#[test]
fn ec_is_additive_and_split_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let stats = random_stats(&mut rng, 5);
    let doubled: Vec<_> = stats.iter().chain(&stats).copied().collect();
    let (a, _) = loss_ec(&[0.3, 0.2, 0.5], 0.1, &stats);
    let (b, _) = loss_ec(&[0.3, 0.2, 0.5], 0.1, &doubled);
    assert!((2.0 * a - b).abs() <= 1e-12 * b);
    // Same channelwise ρ_d + ρ_s, different split.
    let (c, _) = loss_ec(&[0.2, 0.1, 0.4], 0.2, &stats);
    assert!((a - c).abs() <= 1e-12 * a.max(1.0));
}

#[test]
fn lab_scale_weights_only_colour() {
    let t = WardBrdf::new([0.5; 3], 0.1, 0.3).unwrap();
    let p = WardBrdf::new([0.3, 0.5, 0.6], 0.2, 0.5).unwrap();
    let (pt, pp) = (to_perceptual(&t), to_perceptual(&p));
    let lab: f64 = [pt.l - pp.l, pt.a - pp.a, pt.b - pp.b].iter().map(|d| d * d).sum();
    let gloss = (pt.c - pp.c).powi(2) + (pt.d - pp.d).powi(2);
    let cfg = LossConfig::new(Metric::Rmse2, 0.0);
    let v = loss_total(&pp.to_vec(), &t, &[], &cfg, None).unwrap();
    assert!((v.e_d - (1e-4 * lab + gloss)).abs() < 1e-12);
}

#[test]
fn lambda_zero_gives_distance_only() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let stats = random_stats(&mut rng, 4);
    for metric in [Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot] {
        let mut cfg = LossConfig::new(metric, 0.0);
        cfg.lab_scale = 1.0;
        let quad = cfg.quadrature();
        let (t, p) = (random_brdf(&mut rng), random_brdf(&mut rng));
        let v = loss_total(&cfg.parameterization.encode(&p), &t, &stats, &cfg, quad.as_ref()).unwrap();
        assert_eq!(v.total, v.e_d);
        let direct = match metric {
            Metric::CubeRoot => quad.as_ref().unwrap().distance(&t, &p),
            _ => crate::brdf::brdf_distance(&t, &p, metric),
        };
        assert!((v.e_d - direct).abs() <= 1e-9 * direct.max(1.0), "{metric}: {} vs {direct}", v.e_d);
    }
}

#[test]
fn exact_prediction_leaves_only_ec() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stats = random_stats(&mut rng, 3);
    for metric in [Metric::Rmse1, Metric::Rmse2] {
        let cfg = LossConfig::new(metric, DEFAULT_LAMBDA);
        let t = random_brdf(&mut rng);
        let v = loss_total(&cfg.parameterization.encode(&t), &t, &stats, &cfg, None).unwrap();
        assert!(v.e_d.abs() < 1e-20);
        assert!((v.total - DEFAULT_LAMBDA * v.e_c).abs() < 1e-15);
        assert!(v.total >= 0.0);
    }
}

#[test]
fn loss_grows_monotonically_with_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let stats = random_stats(&mut rng, 3);
    let (t, p) = (random_brdf(&mut rng), random_brdf(&mut rng));
    let mut last = -1.0;
    for k in 0..20 {
        let cfg = LossConfig::new(Metric::Rmse1, k as f64 * 0.05);
        let v = loss_total(&p.to_vec(), &t, &stats, &cfg, None).unwrap();
        assert!(v.total >= last);
        last = v.total;
    }
}

#[test]
fn metric_parameterization_mismatch_is_rejected() {
    let mut cfg = LossConfig::new(Metric::Rmse2, 0.01);
    cfg.parameterization = Parameterization::Physical;
    let t = WardBrdf::new([0.5; 3], 0.1, 0.3).unwrap();
    assert!(loss_total(&t.to_vec(), &t, &[], &cfg, None).is_err());
    assert!(LossConfig::new(Metric::Rmse1, -1.0).validate().is_err());
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for metric in [Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot] {
        let cfg = LossConfig::new(metric, 0.5);
        let quad = cfg.quadrature();
        for _ in 0..4 {
            let stats = random_stats(&mut rng, 3);
            let t = random_brdf(&mut rng);
            let p = random_brdf(&mut rng);
            let x = cfg.parameterization.encode(&p);
            let err = grad_check(
                |v| {
                    let r = loss_total(&std::array::from_fn(|k| v[k]), &t, &stats, &cfg, quad.as_ref()).unwrap();
                    (r.total, r.grad.to_vec())
                },
                &x,
                1e-6,
            );
            assert!(err < 1e-3, "{metric}: {err}");
        }
    }
}

#[test]
fn norm_stats_example() {
    let a = WardBrdf::new([0.5; 3], 0.1, 0.2).unwrap();
    let mut b = a;
    b.alpha = 0.4;
    b.rho_d = [0.3, 0.2, 0.6];
    b.rho_s = 0.3;
    let n = compute_norm_stats([&a, &b], Parameterization::Physical).unwrap();
    assert!((n.mean[4] - 0.3).abs() < 1e-12);
    assert!((n.std[4] - 0.1).abs() < 1e-12);
    assert!(compute_norm_stats([&a, &a], Parameterization::Physical).is_err());
    let z = n.normalize(&b.to_vec());
    let back = n.denormalize(&z);
    for k in 0..5 {
        assert!((back[k] - b.to_vec()[k]).abs() < 1e-12);
    }
}

#[test]
fn perceptual_norm_stats_use_perceptual_targets() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let brdfs: Vec<_> = (0..20).map(|_| random_brdf(&mut rng)).collect();
    let n = compute_norm_stats(&brdfs, Parameterization::Perceptual).unwrap();
    let mean_l = brdfs.iter().map(|b| to_perceptual(b).l).sum::<f64>() / 20.0;
    assert!((n.mean[0] - mean_l).abs() < 1e-9);
}

fn tiny_dataset() -> (tempfile::TempDir, Dataset) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = DatasetConfig {
        scenes: 10,
        views: 8,
        voxels: 40,
        width: 32,
        height: 32,
        train_fraction: 0.8,
        seed: 3,
        ..Default::default()
    };
    generate_dataset(&cfg, dir.path()).unwrap();
    let ds = Dataset::open(dir.path()).unwrap();
    (dir, ds)
}

fn small_grouplet() -> Architecture {
    Architecture::Grouplet(crate::grouplet::GroupletConfig { nodes: 4, train_nodes: 3, observations: 10 })
}

#[test]
fn zero_budget_checkpoint_is_the_initialization() {
    let (_d, ds) = tiny_dataset();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::new(ModelKind::GroupletFast);
    cfg.minibatches = 0;
    cfg.seed = 9;
    cfg.architecture = Some(small_grouplet());
    let r = train(&ds, &cfg, &LossConfig::default(), out.path()).unwrap();
    let saved = TrainedModel::<f32>::load(&r.final_checkpoint).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(crate::synth::dataset::derive_seed(9, 0));
    let init = Network::<f32>::new(&small_grouplet(), &mut rng).unwrap();
    assert_eq!(saved.network.flatten(), init.flatten());
    assert_eq!(saved.meta.step, 0);
}

#[test]
fn f64_training_is_bit_reproducible() {
    let (_d, ds) = tiny_dataset();
    let mut cfg = TrainConfig::new(ModelKind::HemiCnn);
    cfg.minibatches = 6;
    cfg.batch_size = 4;
    cfg.eval_every = 3;
    cfg.precision = Precision::F64;
    cfg.architecture = Some(Architecture::HemiCnn(crate::hemicnn::HemiCnnConfig { resolution: 4, voxels: 5 }));
    let loss = LossConfig::new(Metric::Rmse1, 0.01);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = train(&ds, &cfg, &loss, a.path()).unwrap();
    let rb = train(&ds, &cfg, &loss, b.path()).unwrap();
    assert_eq!(std::fs::read(&ra.final_checkpoint).unwrap(), std::fs::read(&rb.final_checkpoint).unwrap());
    assert_eq!(std::fs::read(&ra.log).unwrap(), std::fs::read(&rb.log).unwrap());
    let init = TrainedModel::<f64>::load(&ra.final_checkpoint).unwrap();
    assert_eq!(init.meta.step, 6);
}

#[test]
fn loss_falls_during_short_runs() {
    let (_d, ds) = tiny_dataset();
    for (model, metric) in [(ModelKind::GroupletFast, Metric::Rmse2), (ModelKind::HemiCnn, Metric::CubeRoot)] {
        let mut cfg = TrainConfig::new(model);
        cfg.minibatches = 40;
        cfg.batch_size = 4;
        cfg.eval_every = 40;
        if model == ModelKind::GroupletFast {
            cfg.architecture = Some(small_grouplet());
        } else {
            cfg.optimizer = Some(crate::nn::OptimizerConfig::rmsprop(1e-3));
        }
        let out = tempfile::tempdir().unwrap();
        let r = train(&ds, &cfg, &LossConfig::new(metric, 0.01), out.path()).unwrap();
        let losses: Vec<f64> = std::fs::read_to_string(&r.log)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .filter(|v| v["event"] == "step")
            .map(|v| v["loss"].as_f64().unwrap())
            .collect();
        assert_eq!(losses.len(), 40);
        let head = losses[..10].iter().sum::<f64>();
        let tail = losses[30..].iter().sum::<f64>();
        assert!(tail < head, "{model} {metric}: {head} -> {tail}");
    }
}

#[test]
fn cube_root_loss_stays_finite_for_wild_roughness() {
    let cfg = LossConfig::new(Metric::CubeRoot, 0.0);
    let quad = cfg.quadrature().unwrap();
    let t = WardBrdf::new([0.3; 3], 0.4, 0.2).unwrap();
    for alpha in [-50.0, -1.0, 0.0, 0.005, 0.01, 3.0] {
        let v = loss_total(&[0.2, 0.2, 0.2, 0.9, alpha], &t, &[], &cfg, Some(&quad)).unwrap();
        assert!(v.total.is_finite() && v.grad.iter().all(|g| g.is_finite()), "{alpha}");
    }
}
