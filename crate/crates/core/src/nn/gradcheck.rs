/// Largest elementwise relative error between the analytic gradient returned
/// by `f` and central differences with step `h`, using the denominator
/// `max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(mut f: F, x: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(x);
    assert_eq!(analytic.len(), x.len(), "gradient length must match the input");
    let mut probe = x.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let (fp, _) = f(&probe);
        probe[i] = x[i] - h;
        let (fm, _) = f(&probe);
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}
