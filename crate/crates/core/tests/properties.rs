//! Property tests over the public API.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use reflectance::brdf::{
    brdf_distance, from_perceptual, lab_to_rgb, rgb_to_lab, to_perceptual, Direction, Metric, WardBrdf,
};
use reflectance::grouplet::{sample_node_inputs, Grouplet, GroupletConfig, NodeBatch};
use reflectance::math::{Mat3, Vec3};
use reflectance::synth::{srgb_decode, srgb_encode, Observation, VoxelSample};
use reflectance::training::loss_ec;

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn brdf() -> impl Strategy<Value = WardBrdf> {
    ([unit(), unit(), unit()], 0.0..=1.0f64, 0.03..=1.0f64)
        .prop_map(|(rho_d, rho_s, alpha)| WardBrdf { rho_d, rho_s, alpha })
}

/// Upper-hemisphere direction away from grazing.
fn upper() -> impl Strategy<Value = Vec3> {
    (0.0..1.45f64, 0.0..std::f64::consts::TAU).prop_map(|(t, p)| Vec3::from_spherical(t, p))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #[test]
    fn ward_is_reciprocal(t in brdf(), wi in upper(), wo in upper()) {
        let a = t.eval_unchecked(wi, wo);
        let b = t.eval_unchecked(wo, wi);
        for c in 0..3 {
            prop_assert!(close(a[c], b[c], 1e-12), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn ward_is_isotropic(t in brdf(), wi in upper(), wo in upper(), angle in 0.0..6.3f64) {
        let r = Mat3::rotation(Vec3::Z, angle);
        let a = t.eval_unchecked(wi, wo);
        let b = t.eval_unchecked(r.mul_vec(wi), r.mul_vec(wo));
        for c in 0..3 {
            prop_assert!(close(a[c], b[c], 1e-9));
        }
    }

    #[test]
    fn ward_is_nonnegative(t in brdf(), wi in upper(), wo in upper()) {
        let v = reflectance::brdf::eval_ward(Direction::normalize(wi).unwrap(), Direction::normalize(wo).unwrap(), &t).unwrap();
        prop_assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
    }

    #[test]
    fn perceptual_roundtrip(t in brdf()) {
        let back = from_perceptual(&to_perceptual(&t));
        prop_assert!(!back.clamped);
        let (a, b) = (t.to_vec(), back.brdf.to_vec());
        for k in 0..5 {
            prop_assert!((a[k] - b[k]).abs() < 1e-9, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn lab_roundtrip(rgb in [unit(), unit(), unit()]) {
        let back = lab_to_rgb(&rgb_to_lab(&rgb));
        for c in 0..3 {
            prop_assert!((back[c] - rgb[c]).abs() < 1e-9);
        }
    }

    #[test]
    fn gamma_roundtrip(x in unit()) {
        prop_assert!((srgb_decode(srgb_encode(x)) - x).abs() < 1e-12);
    }

    #[test]
    fn distances_are_semimetrics(a in brdf(), b in brdf()) {
        for m in [Metric::Rmse1, Metric::Rmse2, Metric::CubeRoot] {
            prop_assert_eq!(brdf_distance(&a, &a, m), 0.0);
            let ab = brdf_distance(&a, &b, m);
            let ba = brdf_distance(&b, &a, m);
            prop_assert!(ab >= 0.0 && ab.is_finite());
            prop_assert!(close(ab, ba, 1e-12), "{m}: {ab} vs {ba}");
        }
    }

    #[test]
    fn ec_vanishes_on_consistent_statistics(
        rho_d in [0.0..0.5f64, 0.0..0.5f64, 0.0..0.5f64],
        rho_s in 0.0..0.5f64,
        backgrounds in prop::collection::vec([0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64], 1..8),
    ) {
        let g = reflectance::synth::GAMMA;
        let stats: Vec<_> = backgrounds
            .iter()
            .map(|b| {
                let f = [0, 1, 2].map(|c| ((rho_d[c] + rho_s) * b[c].powf(g)).powf(1.0 / g));
                (f, *b)
            })
            .collect();
        let (v, grad) = loss_ec(&rho_d, rho_s, &stats);
        prop_assert!(v < 1e-20);
        prop_assert!(grad.iter().all(|x| x.abs() < 1e-9));
        let (shifted, _) = loss_ec(&[rho_d[0] + 0.1, rho_d[1], rho_d[2]], rho_s, &stats);
        prop_assert!(shifted > 0.0);
    }
}

fn voxel(rng: &mut ChaCha8Rng, count: u32) -> VoxelSample {
    use rand::Rng;
    let normal = reflectance::synth::geometry::uniform_sphere(rng);
    let observations = (0..count)
        .map(|frame_id| Observation {
            color: [rng.gen(), rng.gen(), rng.gen()],
            view_dir: reflectance::synth::geometry::uniform_sphere(rng),
            frame_id,
            f_bar: [rng.gen(), rng.gen(), rng.gen()],
            b_bar: [rng.gen(), rng.gen(), rng.gen()],
        })
        .collect();
    VoxelSample { position: Vec3::ZERO, normal, observations }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn grouplet_ignores_node_order(seed in any::<u64>(), n in 1usize..12, perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GroupletConfig::default();
        let net = Grouplet::<f64>::new(cfg.clone(), &mut rng).unwrap();
        let m = cfg.observations;
        let nodes: Vec<_> = (0..n)
            .map(|_| {
                let v = voxel(&mut rng, 6);
                (v.normal, sample_node_inputs(&v, m, &mut rng).unwrap())
            })
            .collect();
        let mut shuffled = nodes.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let run = |g: &[(Vec3, Vec<Observation>)]| {
            let mut b = NodeBatch::new(m);
            b.push_group(g).unwrap();
            net.predict(&b).unwrap()
        };
        let (a, b) = (run(&nodes), run(&shuffled));
        for k in 0..5 {
            prop_assert!((a[k] - b[k]).abs() < 1e-12);
        }
    }
}
