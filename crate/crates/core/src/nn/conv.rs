use rand::Rng;

use super::linear::glorot;
use super::ops::{matmul_a_bt, matmul_acc, matmul_at_b_acc};
use super::tensor::{Module, Real, Tensor};
use crate::error::{Error, Result};

/// 3×3 same-padded convolution over a batch of `H×W×C` images.
/// Filters are stored `[3, 3, C_in, C_out]`, i.e. an `(9·C_in) × C_out` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3<T> {
    pub w: Tensor<T>,
    pub b: Tensor<T>,
}

/// Spatial layout of a batch of images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageShape {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.batch * self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_channels(self, channels: usize) -> Self {
        ImageShape { channels, ..self }
    }
}

impl<T: Real> Conv3x3<T> {
    pub fn new<R: Rng>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let n = 9 * c_in * c_out;
        Conv3x3 {
            w: Tensor::from_vec(&[3, 3, c_in, c_out], glorot(rng, n, 9 * c_in, 9 * c_out)).unwrap(),
            b: Tensor::zeros(&[c_out]),
        }
    }

    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Conv3x3 { w: Tensor::zeros(&[3, 3, c_in, c_out]), b: Tensor::zeros(&[c_out]) }
    }

    pub fn c_in(&self) -> usize {
        self.w.shape()[2]
    }

    pub fn c_out(&self) -> usize {
        self.w.shape()[3]
    }

    fn check(&self, x: &[T], s: ImageShape) -> Result<()> {
        if s.channels != self.c_in() || x.len() != s.len() {
            return Err(Error::ShapeMismatch(format!(
                "conv expects {} channels and {} values, got {:?} with {}",
                self.c_in(),
                s.len(),
                s,
                x.len()
            )));
        }
        if s.height < 3 || s.width < 3 {
            return Err(Error::ShapeMismatch(format!("conv needs at least 3×3 images, got {}×{}", s.height, s.width)));
        }
        Ok(())
    }

    /// Unrolled patches, one row of `9·C_in` values per output pixel.
    fn im2col(x: &[T], s: ImageShape) -> Vec<T> {
        let (h, w, c) = (s.height, s.width, s.channels);
        let mut cols = vec![T::zero(); s.batch * h * w * 9 * c];
        for n in 0..s.batch {
            for y in 0..h {
                for xx in 0..w {
                    let row = ((n * h + y) * w + xx) * 9 * c;
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let src = ((n * h + sy as usize) * w + sx as usize) * c;
                            let dst = row + (ky * 3 + kx) * c;
                            cols[dst..dst + c].copy_from_slice(&x[src..src + c]);
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(cols: &[T], s: ImageShape) -> Vec<T> {
        let (h, w, c) = (s.height, s.width, s.channels);
        let mut x = vec![T::zero(); s.len()];
        for n in 0..s.batch {
            for y in 0..h {
                for xx in 0..w {
                    let row = ((n * h + y) * w + xx) * 9 * c;
                    for ky in 0..3 {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= w as isize {
                                continue;
                            }
                            let dst = ((n * h + sy as usize) * w + sx as usize) * c;
                            let src = row + (ky * 3 + kx) * c;
                            for k in 0..c {
                                x[dst + k] += cols[src + k];
                            }
                        }
                    }
                }
            }
        }
        x
    }

    pub fn forward(&self, x: &[T], s: ImageShape) -> Result<Vec<T>> {
        self.check(x, s)?;
        let pixels = s.batch * s.height * s.width;
        let cols = Self::im2col(x, s);
        let co = self.c_out();
        let mut y: Vec<T> = self.b.data.iter().copied().cycle().take(pixels * co).collect();
        matmul_acc(&cols, &self.w.data, &mut y, pixels, 9 * s.channels, co);
        Ok(y)
    }

    pub fn backward(&self, x: &[T], s: ImageShape, dy: &[T], grad: &mut Conv3x3<T>, need_dx: bool) -> Result<Option<Vec<T>>> {
        self.check(x, s)?;
        let pixels = s.batch * s.height * s.width;
        let co = self.c_out();
        if dy.len() != pixels * co {
            return Err(Error::ShapeMismatch("conv upstream gradient size".into()));
        }
        let cols = Self::im2col(x, s);
        let k = 9 * s.channels;
        matmul_at_b_acc(&cols, dy, &mut grad.w.data, pixels, k, co);
        for row in dy.chunks_exact(co) {
            for (g, &d) in grad.b.data.iter_mut().zip(row) {
                *g += d;
            }
        }
        if !need_dx {
            return Ok(None);
        }
        let dcols = matmul_a_bt(dy, &self.w.data, pixels, co, k);
        Ok(Some(Self::col2im(&dcols, s)))
    }
}

impl<T: Real> Module<T> for Conv3x3<T> {
    fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        vec![("w".into(), &self.w), ("b".into(), &self.b)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.w, &mut self.b]
    }
}
