//! Unitary discrete Fourier transforms on the periodic lattice.
//!
//! Forward: `f~(k) = N^(-1/2) sum_j f(j) e^{-2 pi i k j / N}`; the inverse uses
//! `e^{+...}`. Two-dimensional grids are row-major `N x N` and use the same
//! convention on each axis.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Cached forward and inverse plans for one lattice size.
#[derive(Clone)]
pub struct Spectral<T: Real> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::<T>::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            scale: T::from_usize_exact(n).sqrt().recip(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, x: &mut [Complex<T>]) {
        self.fwd.process(x);
        scale(x, self.scale);
    }

    pub fn inverse(&self, x: &mut [Complex<T>]) {
        self.inv.process(x);
        scale(x, self.scale);
    }

    /// Transforms every row of a row-major `N x N` grid, then every column.
    pub fn forward_2d(&self, grid: &mut [Complex<T>]) {
        self.transform_2d(grid, &self.fwd);
    }

    pub fn inverse_2d(&self, grid: &mut [Complex<T>]) {
        self.transform_2d(grid, &self.inv);
    }

    fn transform_2d(&self, grid: &mut [Complex<T>], plan: &Arc<dyn Fft<T>>) {
        let n = self.n;
        assert_eq!(grid.len(), n * n);
        // rustfft processes consecutive chunks of length n in one call
        plan.process(grid);
        transpose_square(grid, n);
        plan.process(grid);
        transpose_square(grid, n);
        scale(grid, self.scale * self.scale);
    }

    /// Circular convolution `(s * x)(m) = sum_n s(m - n) x(n)` with a real even
    /// kernel given by its unnormalized spectrum `s_hat(k) = sum_n s(n) e^{-2 pi i k n / N}`.
    pub fn convolve(&self, s_hat: &[T], x: &mut [Complex<T>]) {
        self.fwd.process(x);
        for (z, &w) in x.iter_mut().zip(s_hat) {
            *z = *z * w;
        }
        self.inv.process(x);
        scale(x, self.scale * self.scale);
    }

    /// Applies [`Self::convolve`] along both axes of a row-major grid:
    /// `out = S g S` for the circulant `S`.
    pub fn convolve_2d(&self, s_hat: &[T], grid: &mut [Complex<T>]) {
        let n = self.n;
        self.fwd.process(grid);
        transpose_square(grid, n);
        self.fwd.process(grid);
        for row in grid.chunks_exact_mut(n) {
            for (z, &w) in row.iter_mut().zip(s_hat) {
                *z = *z * w;
            }
        }
        for (r, row) in grid.chunks_exact_mut(n).enumerate() {
            let w = s_hat[r];
            for z in row.iter_mut() {
                *z = *z * w;
            }
        }
        self.inv.process(grid);
        transpose_square(grid, n);
        self.inv.process(grid);
        let s = self.scale * self.scale;
        scale(grid, s * s);
    }

    /// Unnormalized spectrum of a real even kernel given in position space.
    pub fn kernel_spectrum(&self, kernel: &[T]) -> Vec<T> {
        let mut buf: Vec<Complex<T>> = kernel.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fwd.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }
}

fn scale<T: Real>(x: &mut [Complex<T>], s: T) {
    for z in x {
        *z = *z * s;
    }
}

/// In-place transpose of a row-major square grid.
pub fn transpose_square<V: Copy>(grid: &mut [V], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            grid.swap(i * n + j, j * n + i);
        }
    }
}
