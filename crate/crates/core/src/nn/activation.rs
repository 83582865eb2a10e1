use super::tensor::Real;

pub fn relu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect()
}

/// Gradient through ReLU given the forward input; zero at the kink.
pub fn relu_backward<T: Real>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter().zip(dy).map(|(&v, &d)| if v > T::zero() { d } else { T::zero() }).collect()
}

pub fn tanh<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|v| v.tanh()).collect()
}

/// Gradient through tanh given the forward output `y`.
pub fn tanh_backward<T: Real>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter().zip(dy).map(|(&v, &d)| d * (T::one() - v * v)).collect()
}
