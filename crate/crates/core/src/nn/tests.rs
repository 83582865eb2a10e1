use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(42)
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Scalar probe `Σ r ⊙ y` used to turn vector outputs into a loss.
fn probe(y: &[f64], r: &[f64]) -> f64 {
    y.iter().zip(r).map(|(a, b)| a * b).sum()
}

#[test]
fn linear_identity_and_bias_gradient() {
    let mut l = Linear::<f64>::zeros(3, 3);
    for i in 0..3 {
        l.w.data[i * 3 + i] = 1.0;
    }
    let x = vec![0.5, -2.0, 3.0, 1.0, 2.0, 3.0];
    assert_eq!(l.forward(&x).unwrap(), x);
    let mut g = l.zeros_like();
    l.backward(&x, &[1.0; 6], &mut g, false).unwrap();
    assert_eq!(g.b.data, vec![2.0; 3]);
    let mut g = Linear::<f64>::zeros(3, 3);
    l.backward(&x[..3], &[1.0; 3], &mut g, false).unwrap();
    assert_eq!(g.b.data, vec![1.0; 3]);
}

#[test]
fn linear_shape_mismatch() {
    let l = Linear::<f64>::zeros(3, 2);
    assert!(l.forward(&[1.0; 4]).is_err());
    let mut g = l.zeros_like();
    assert!(l.backward(&[1.0; 3], &[1.0; 3], &mut g, true).is_err());
}

#[test]
fn linear_gradients_match_finite_differences() {
    let mut r = rng();
    let layer = Linear::<f64>::new(5, 7, &mut r);
    let x = random(&mut r, 2 * 5);
    let w = random(&mut r, 2 * 7);
    let n_params = layer.num_params();
    let f = |v: &[f64]| {
        let mut l = layer.clone();
        l.load_flat(&v[..n_params]).unwrap();
        let xi = &v[n_params..];
        let y = l.forward(xi).unwrap();
        let mut g = l.zeros_like();
        let dx = l.backward(xi, &w, &mut g, true).unwrap().unwrap();
        let mut grad = g.flatten();
        grad.extend(dx);
        (probe(&y, &w), grad)
    };
    let mut v = layer.flatten();
    v.extend(&x);
    assert!(grad_check(f, &v, 1e-5) < 1e-6);
}

#[test]
fn conv_delta_filter_is_identity() {
    let mut c = Conv3x3::<f64>::zeros(1, 1);
    c.w.data[4] = 1.0;
    let s = ImageShape { batch: 1, height: 4, width: 5, channels: 1 };
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.3 - 2.0).collect();
    assert_eq!(c.forward(&x, s).unwrap(), x);
}

#[test]
fn conv_ones_kernel_on_constant_interior() {
    let mut c = Conv3x3::<f64>::zeros(1, 1);
    c.w.fill(1.0);
    let s = ImageShape { batch: 1, height: 5, width: 5, channels: 1 };
    let y = c.forward(&[0.7; 25], s).unwrap();
    assert!((y[2 * 5 + 2] - 6.3).abs() < 1e-12);
    // Corner sees four pixels.
    assert!((y[0] - 2.8).abs() < 1e-12);
}

#[test]
fn conv_rejects_bad_shapes() {
    let c = Conv3x3::<f64>::zeros(2, 4);
    let s = ImageShape { batch: 1, height: 2, width: 4, channels: 2 };
    assert!(c.forward(&[0.0; 16], s).is_err());
    let s = ImageShape { batch: 1, height: 4, width: 4, channels: 3 };
    assert!(c.forward(&[0.0; 48], s).is_err());
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut r = rng();
    let conv = Conv3x3::<f64>::new(2, 3, &mut r);
    let s = ImageShape { batch: 2, height: 4, width: 3, channels: 2 };
    let x = random(&mut r, s.len());
    let w = random(&mut r, s.batch * 4 * 3 * 3);
    let np = conv.num_params();
    let f = |v: &[f64]| {
        let mut c = conv.clone();
        c.load_flat(&v[..np]).unwrap();
        let xi = &v[np..];
        let y = c.forward(xi, s).unwrap();
        let mut g = c.zeros_like();
        let dx = c.backward(xi, s, &w, &mut g, true).unwrap().unwrap();
        let mut grad = g.flatten();
        grad.extend(dx);
        (probe(&y, &w), grad)
    };
    let mut v = conv.flatten();
    v.extend(&x);
    assert!(grad_check(f, &v, 1e-5) < 1e-6);
}

#[test]
fn maxpool_basics() {
    let s = ImageShape { batch: 1, height: 2, width: 2, channels: 1 };
    let p = maxpool2x2(&[1.0, 2.0, 3.0, 4.0], s).unwrap();
    assert_eq!(p.y, vec![4.0]);
    assert_eq!(scatter_backward(&p.argmax, &[1.5], 4), vec![0.0, 0.0, 0.0, 1.5]);
    let tie = maxpool2x2(&[2.0, 2.0, 2.0, 2.0], s).unwrap();
    assert_eq!(tie.argmax, vec![0]);
    let odd = ImageShape { batch: 1, height: 3, width: 2, channels: 1 };
    assert!(maxpool2x2(&[0.0; 6], odd).is_err());
}

#[test]
fn maxpool_gradient_away_from_ties() {
    let mut r = rng();
    let s = ImageShape { batch: 2, height: 4, width: 4, channels: 3 };
    let x = random(&mut r, s.len());
    let w = random(&mut r, s.len() / 4);
    let f = |v: &[f64]| {
        let p = maxpool2x2(v, s).unwrap();
        (probe(&p.y, &w), scatter_backward(&p.argmax, &w, v.len()))
    };
    assert!(grad_check(f, &x, 1e-6) < 1e-6);
}

#[test]
fn relu_and_tanh() {
    assert_eq!(relu(&[-2.0, 0.0, 3.0]), vec![0.0, 0.0, 3.0]);
    let mut r = rng();
    let x = random(&mut r, 20);
    let w = random(&mut r, 20);
    let f = |v: &[f64]| {
        let y = tanh(v);
        (probe(&y, &w), tanh_backward(&y, &w))
    };
    assert!(grad_check(f, &x, 1e-5) < 1e-8);
    let xr: Vec<f64> = x.iter().map(|v| if v.abs() < 0.05 { 0.3 } else { *v }).collect();
    let f = |v: &[f64]| (probe(&relu(v), &w), relu_backward(v, &w));
    assert!(grad_check(f, &xr, 1e-6) < 1e-6);
}

#[test]
fn setmax_examples() {
    let (y, _) = setmax(&[1.0, 5.0, 3.0, 2.0], 2, &[2]).unwrap();
    assert_eq!(y, vec![3.0, 5.0]);
    let (y, _) = setmax(&[4.0, -1.0], 2, &[1]).unwrap();
    assert_eq!(y, vec![4.0, -1.0]);
    let (y, _) = setmax(&[3.0, 2.0, 1.0, 5.0], 2, &[2]).unwrap();
    assert_eq!(y, vec![3.0, 5.0]);
    assert!(setmax::<f64>(&[], 2, &[0]).is_err());
    let (_, arg) = setmax(&[1.0, 1.0], 1, &[2]).unwrap();
    assert_eq!(arg, vec![0]);
}

#[test]
fn setmax_gradient_routes_to_winner() {
    let mut r = rng();
    let x = random(&mut r, 5 * 4);
    let w = random(&mut r, 2 * 4);
    let f = |v: &[f64]| {
        let (y, arg) = setmax(v, 4, &[2, 3]).unwrap();
        (probe(&y, &w), scatter_backward(&arg, &w, v.len()))
    };
    assert!(grad_check(f, &x, 1e-6) < 1e-6);
}

#[test]
fn moment_pool_examples() {
    assert_eq!(moment_pool(&[1.0, 2.0, 3.0, 4.0], 2, &[2]).unwrap(), vec![2.0, 3.0, 1.0, 1.0]);
    assert_eq!(moment_pool(&[7.0, -2.0], 2, &[1]).unwrap(), vec![7.0, -2.0, 0.0, 0.0]);
    assert!(moment_pool::<f64>(&[], 3, &[]).is_err());
}

#[test]
fn moment_pool_gradient() {
    let mut r = rng();
    let x = random(&mut r, 7 * 3);
    let w = random(&mut r, 2 * 6);
    let groups = [3, 4];
    let f = |v: &[f64]| {
        let y = moment_pool(v, 3, &groups).unwrap();
        (probe(&y, &w), moment_pool_backward(v, 3, &groups, &y, &w))
    };
    assert!(grad_check(f, &x, 1e-5) < 1e-6);
}

#[test]
fn optimizer_first_steps() {
    let mut p = [1.0f64];
    let mut v = [0.0];
    sgd_momentum_step(&mut p, &[1.0], &mut v, 0.01, 0.9);
    assert!((p[0] - 0.99).abs() < 1e-15);
    let mut p = [1.0f64];
    let mut s = [0.0];
    rmsprop_step(&mut p, &[1.0], &mut s, 1e-4, 0.9, 1e-8);
    let expected = 1e-4 / (0.1f64.sqrt() + 1e-8);
    assert!((1.0 - p[0] - expected).abs() < 1e-15);
    assert!((expected - 0.000316).abs() < 1e-6);
    let mut p = [0.3f64, -0.2];
    let mut s = [0.0; 2];
    rmsprop_step(&mut p, &[0.0, 0.0], &mut s, 0.1, 0.9, 1e-8);
    assert_eq!(p, [0.3, -0.2]);
}

#[test]
fn optimizer_rejects_non_finite_gradient() {
    let mut r = rng();
    let mut l = Linear::<f64>::new(2, 2, &mut r);
    let before = l.clone();
    let mut g = l.zeros_like();
    g.w.data[1] = f64::NAN;
    let mut opt = Optimizer::new(OptimizerConfig::sgd(0.01, 0.9));
    assert!(matches!(opt.step(&mut l, &g), Err(crate::Error::NonFinite(_))));
    assert_eq!(l, before);
}

#[test]
fn grad_check_linear_function_is_exact() {
    let a = [0.3, -1.2, 2.5];
    let f = |v: &[f64]| (v.iter().zip(&a).map(|(x, y)| x * y).sum(), a.to_vec());
    assert!(grad_check(f, &[1.0, 2.0, 3.0], 1e-3) < 1e-10);
}

#[test]
fn checkpoint_roundtrip_and_corruption() {
    let mut r = rng();
    let l = Linear::<f64>::new(4, 3, &mut r);
    let meta = serde_json::json!({"arch": "test"});
    let bytes = encode_checkpoint(&meta, &named("fc", &l)).unwrap();
    let raw = decode_checkpoint(&bytes).unwrap();
    assert_eq!(raw.meta, meta);
    assert_eq!(raw.num_params(), 15);
    assert_eq!(bytes.len(), raw.header_bytes + 4 * 15);
    assert_eq!(raw.tensors[0].0.name, "fc.w");
    assert_eq!(raw.tensors[0].1[5], l.w.data[5] as f32);
    assert!(decode_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    assert!(decode_checkpoint(&bytes[..4]).is_err());
}
