use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::math::{Mat3, Vec3};
use crate::nn::{grad_check, Module};
use crate::synth::{Observation, VoxelSample};

fn obs(view_dir: Vec3, color: [f64; 3], frame_id: u32) -> Observation {
    Observation { color, view_dir, frame_id, f_bar: [0.5; 3], b_bar: [0.4; 3] }
}

fn voxel(normal: Vec3, observations: Vec<Observation>) -> VoxelSample {
    VoxelSample { position: Vec3::ZERO, normal, observations }
}

fn in_disk(r: usize, i: usize, j: usize) -> bool {
    let (x, y) = (pixel_center(r, i), pixel_center(r, j));
    x * x + y * y <= 1.0
}

fn tilted() -> Vec3 {
    Vec3::new(0.3, -0.5, 0.8).normalized()
}

#[test]
fn single_observation_fills_disk() {
    let n = tilted();
    let v = voxel(n, vec![obs(n, [0.2, 0.4, 0.6], 0)]);
    let im = build_hemisphere_image(&v, 8).unwrap();
    for j in 0..8 {
        for i in 0..8 {
            let want = if in_disk(8, i, j) { [0.2, 0.4, 0.6] } else { [0.0; 3] };
            assert_eq!(im.pixel(i, j), want);
            assert_eq!(im.mask[j * 8 + i], in_disk(8, i, j));
        }
    }
    let sites = project_observations(&v);
    assert!(sites[0].0[0].abs() < 1e-12 && sites[0].0[1].abs() < 1e-12);
}

#[test]
fn two_opposite_sites_split_at_bisector() {
    let n = tilted();
    let back = alignment(n).transpose();
    let s = 0.5f64;
    let c = (1.0 - s * s).sqrt();
    let a = back.mul_vec(Vec3::new(s, 0.0, c));
    let b = back.mul_vec(Vec3::new(-s, 0.0, c));
    let v = voxel(n, vec![obs(a, [1.0, 0.0, 0.0], 0), obs(b, [0.0, 0.0, 1.0], 1)]);
    let im = build_hemisphere_image(&v, 8).unwrap();
    for j in 0..8 {
        for i in 0..8 {
            if !in_disk(8, i, j) {
                continue;
            }
            let want = if pixel_center(8, i) > 0.0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
            assert_eq!(im.pixel(i, j), want);
        }
    }
}

#[test]
fn nearest_neighbour_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = tilted();
    let back = alignment(n).transpose();
    let observations: Vec<Observation> = (0..50)
        .map(|k| {
            let phi = rng.gen_range(0.0..std::f64::consts::TAU);
            let sin_t = rng.gen_range(0.0f64..1.0).sqrt();
            let local = Vec3::new(sin_t * phi.cos(), sin_t * phi.sin(), (1.0 - sin_t * sin_t).sqrt());
            obs(back.mul_vec(local), [rng.gen(), rng.gen(), rng.gen()], k)
        })
        .collect();
    let v = voxel(n, observations.clone());
    let im = build_hemisphere_image(&v, 8).unwrap();
    for j in 0..8 {
        for i in 0..8 {
            if !in_disk(8, i, j) {
                continue;
            }
            let (x, y) = (pixel_center(8, i), pixel_center(8, j));
            let nearest = observations
                .iter()
                .map(|o| {
                    let d = alignment(n).mul_vec(o.view_dir);
                    ((d.x - x).hypot(d.y - y), o.color)
                })
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .unwrap();
            assert_eq!(im.pixel(i, j), nearest.1);
        }
    }
}

#[test]
fn back_facing_observations_are_discarded() {
    let n = Vec3::Z;
    let v = voxel(n, vec![obs(-Vec3::Z, [1.0; 3], 0)]);
    assert!(matches!(build_hemisphere_image(&v, 8), Err(crate::Error::EmptyHemisphere(_))));
    let v = voxel(n, vec![]);
    assert!(build_hemisphere_image(&v, 8).is_err());
}

#[test]
fn quarter_turn_about_normal_rotates_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = tilted();
    let align = alignment(n);
    let back = align.transpose();
    let r = 8;
    let lift = |i: usize, j: usize| {
        let (x, y) = (pixel_center(r, i), pixel_center(r, j));
        back.mul_vec(Vec3::new(x, y, (1.0 - x * x - y * y).max(0.0).sqrt()))
    };
    let mut sites = Vec::new();
    while sites.len() < 6 {
        let (i, j) = (rng.gen_range(0..r), rng.gen_range(0..r));
        if in_disk(r, i, j) && !sites.contains(&(i, j)) {
            sites.push((i, j));
        }
    }
    let colors: Vec<[f64; 3]> = (0..sites.len()).map(|k| [k as f64 / 10.0, 0.5, 1.0 - k as f64 / 10.0]).collect();
    let make = |q: &Mat3| {
        let o = sites.iter().zip(&colors).enumerate().map(|(k, (&(i, j), &c))| obs(q.mul_vec(lift(i, j)), c, k as u32));
        build_hemisphere_image(&voxel(n, o.collect()), r).unwrap()
    };
    let base = make(&Mat3::IDENTITY);
    let turned = make(&Mat3::rotation(n, std::f64::consts::FRAC_PI_2));
    // (x, y) → (−y, x) maps pixel (i, j) to (r−1−j, i).
    for j in 0..r {
        for i in 0..r {
            if !in_disk(r, i, j) {
                continue;
            }
            let (x, y) = (pixel_center(r, i), pixel_center(r, j));
            let mut d: Vec<f64> =
                sites.iter().map(|&(a, b)| (pixel_center(r, a) - x).hypot(pixel_center(r, b) - y)).collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if d[1] - d[0] < 1e-9 {
                continue;
            }
            assert_eq!(base.pixel(i, j), turned.pixel(r - 1 - j, i));
        }
    }
}

fn sphere_samples(n: usize, seed: u64) -> Vec<VoxelSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let normal = crate::synth::geometry::uniform_sphere(&mut rng);
            let count = 1 + k % 7;
            voxel(normal, (0..count).map(|f| obs(normal, [0.5; 3], f as u32)).collect())
        })
        .collect()
}

#[test]
fn selecting_everything_is_a_permutation() {
    let s = sphere_samples(30, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut idx = select_voxels(&s, 30, &mut rng).unwrap();
    assert_eq!(s[idx[0]].observations.len(), 7);
    idx.sort();
    assert_eq!(idx, (0..30).collect::<Vec<_>>());
    assert!(select_voxels(&[], 3, &mut rng).is_err());
    let few = select_voxels(&s[..3], 25, &mut rng).unwrap();
    assert_eq!(few.len(), 25);
    assert!(few.iter().all(|&i| i < 3));
}

#[test]
fn antipodal_clusters_each_contribute() {
    let mut s = sphere_samples(0, 0);
    for k in 0..10 {
        let e = 0.01 * k as f64;
        s.push(voxel(Vec3::new(e, 0.0, 1.0).normalized(), vec![obs(Vec3::Z, [0.0; 3], 0)]));
        s.push(voxel(Vec3::new(0.0, e, -1.0).normalized(), vec![obs(-Vec3::Z, [0.0; 3], 0)]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let idx = select_voxels(&s, 2, &mut rng).unwrap();
    assert!(s[idx[0]].normal.z * s[idx[1]].normal.z < 0.0);
}

#[test]
fn farthest_point_spreads_better_than_random_subsets() {
    let s = sphere_samples(100, 2);
    let min_angle = |idx: &[usize]| {
        let mut m = f64::INFINITY;
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                m = m.min(s[idx[a]].normal.dot(s[idx[b]].normal).clamp(-1.0, 1.0).acos());
            }
        }
        m
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let chosen = min_angle(&select_voxels(&s, 25, &mut rng).unwrap());
    let mut random: Vec<f64> = (0..1000)
        .map(|_| min_angle(&rand::seq::index::sample(&mut rng, 100, 25).into_vec()))
        .collect();
    random.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert!(chosen >= random[500], "{chosen} vs median {}", random[500]);
}

fn random_images(rng: &mut ChaCha8Rng, count: usize, r: usize) -> Vec<f64> {
    (0..count * r * r * 3).map(|_| rng.gen()).collect()
}

#[test]
fn parameter_count_matches_layer_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let net = HemiCnn::<f32>::new(HemiCnnConfig::default(), &mut rng).unwrap();
    assert_eq!(net.num_params(), 448 + 2320 + 16_448 + 2080 + 165);
    assert_eq!(net.num_params(), 21_461);
    assert_eq!(HemiCnnConfig::default().param_count(), 21_461);
}

#[test]
fn set_invariances() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = HemiCnn::<f64>::new(HemiCnnConfig::default(), &mut rng).unwrap();
    let per = 8 * 8 * 3;
    let one = random_images(&mut rng, 1, 8);
    let repeated: Vec<f64> = one.iter().copied().cycle().take(25 * per).collect();
    assert_eq!(net.predict(&one, &[1]).unwrap(), net.predict(&repeated, &[25]).unwrap());
    let imgs = random_images(&mut rng, 5, 8);
    let mut shuffled = Vec::new();
    for k in [3, 0, 4, 1, 2] {
        shuffled.extend_from_slice(&imgs[k * per..(k + 1) * per]);
    }
    assert_eq!(net.predict(&imgs, &[5]).unwrap(), net.predict(&shuffled, &[5]).unwrap());
    assert!(net.predict(&imgs, &[4]).is_err());
    assert!(net.predict(&imgs, &[5, 0]).is_err());
}

#[test]
fn full_network_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = HemiCnnConfig { resolution: 4, voxels: 3 };
    let net = HemiCnn::<f64>::new(cfg, &mut rng).unwrap();
    let imgs = random_images(&mut rng, 5, 4);
    let groups = [3, 2];
    let target: Vec<f64> = (0..10).map(|_| rng.gen()).collect();
    let f = |p: &[f64]| {
        let mut n = net.clone();
        n.load_flat(p).unwrap();
        let (y, cache) = n.forward(&imgs, &groups).unwrap();
        let loss: f64 = y.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
        let dy: Vec<f64> = y.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
        let mut g = n.zeros_like();
        n.backward(&cache, &dy, &mut g).unwrap();
        (loss, g.flatten())
    };
    let err = grad_check(f, &net.flatten(), 1e-6);
    assert!(err < 1e-3, "{err}");
}
