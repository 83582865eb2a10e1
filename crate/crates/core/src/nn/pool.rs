use super::conv::ImageShape;
use super::tensor::Real;
use crate::error::{Error, Result};

/// 2×2 max pooling with stride 2; `argmax` holds the source index of each output.
#[derive(Debug, Clone)]
pub struct MaxPool<T> {
    pub y: Vec<T>,
    pub argmax: Vec<usize>,
    pub shape: ImageShape,
}

pub fn maxpool2x2<T: Real>(x: &[T], s: ImageShape) -> Result<MaxPool<T>> {
    if s.height % 2 != 0 || s.width % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("max pooling needs even sizes, got {}×{}", s.height, s.width)));
    }
    if x.len() != s.len() {
        return Err(Error::ShapeMismatch("max pooling input size".into()));
    }
    let out = ImageShape { height: s.height / 2, width: s.width / 2, ..s };
    let c = s.channels;
    let mut y = Vec::with_capacity(out.len());
    let mut argmax = Vec::with_capacity(out.len());
    for n in 0..s.batch {
        for oy in 0..out.height {
            for ox in 0..out.width {
                for k in 0..c {
                    let mut best = usize::MAX;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let idx = ((n * s.height + 2 * oy + dy) * s.width + 2 * ox + dx) * c + k;
                        if best == usize::MAX || x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    y.push(x[best]);
                    argmax.push(best);
                }
            }
        }
    }
    Ok(MaxPool { y, argmax, shape: out })
}

/// Routes each output gradient to its argmax; `len` is the input size.
pub fn scatter_backward<T: Real>(argmax: &[usize], dy: &[T], len: usize) -> Vec<T> {
    let mut dx = vec![T::zero(); len];
    for (&i, &d) in argmax.iter().zip(dy) {
        dx[i] += d;
    }
    dx
}

fn check_groups<T>(x: &[T], dim: usize, groups: &[usize]) -> Result<()> {
    if groups.is_empty() || groups.contains(&0) {
        return Err(Error::Empty("set pooling needs at least one element per set".into()));
    }
    if dim == 0 || x.len() != groups.iter().sum::<usize>() * dim {
        return Err(Error::ShapeMismatch("set pooling input size".into()));
    }
    Ok(())
}

/// Element-wise max over each consecutive group of `dim`-vectors. Ties go to
/// the earliest element.
pub fn setmax<T: Real>(x: &[T], dim: usize, groups: &[usize]) -> Result<(Vec<T>, Vec<usize>)> {
    check_groups(x, dim, groups)?;
    let mut y = Vec::with_capacity(groups.len() * dim);
    let mut arg = Vec::with_capacity(groups.len() * dim);
    let mut start = 0;
    for &g in groups {
        for d in 0..dim {
            let mut best = start * dim + d;
            for r in start + 1..start + g {
                let idx = r * dim + d;
                if x[idx] > x[best] {
                    best = idx;
                }
            }
            y.push(x[best]);
            arg.push(best);
        }
        start += g;
    }
    Ok((y, arg))
}

/// Mean and population variance over each group: output rows are
/// `[mean (dim), variance (dim)]`.
pub fn moment_pool<T: Real>(x: &[T], dim: usize, groups: &[usize]) -> Result<Vec<T>> {
    check_groups(x, dim, groups)?;
    let mut y = Vec::with_capacity(groups.len() * 2 * dim);
    let mut start = 0;
    for &g in groups {
        let inv = T::one() / T::of(g as f64);
        let rows = &x[start * dim..(start + g) * dim];
        let mut mean = vec![T::zero(); dim];
        for row in rows.chunks_exact(dim) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv);
        let mut var = vec![T::zero(); dim];
        for row in rows.chunks_exact(dim) {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s *= inv);
        y.extend(mean);
        y.extend(var);
        start += g;
    }
    Ok(y)
}

/// Gradient of [`moment_pool`]: `dx = dmean/N + 2(x − mean)·dvar/N`.
pub fn moment_pool_backward<T: Real>(x: &[T], dim: usize, groups: &[usize], y: &[T], dy: &[T]) -> Vec<T> {
    let mut dx = vec![T::zero(); x.len()];
    let mut start = 0;
    for (gi, &g) in groups.iter().enumerate() {
        let inv = T::one() / T::of(g as f64);
        let mean = &y[gi * 2 * dim..gi * 2 * dim + dim];
        let dmean = &dy[gi * 2 * dim..gi * 2 * dim + dim];
        let dvar = &dy[gi * 2 * dim + dim..(gi + 1) * 2 * dim];
        for r in start..start + g {
            for d in 0..dim {
                let two = T::of(2.0);
                dx[r * dim + d] = (dmean[d] + two * (x[r * dim + d] - mean[d]) * dvar[d]) * inv;
            }
        }
        start += g;
    }
    dx
}
