//! Hamiltonian kernels and matrix-free operators on the truncated Fock space.
//!
//! Amplitudes are stored in the orthonormal configuration basis `|c>`. For one
//! particle this is `psi_c = a^(1/2) psi(x)`. Two-particle states live on a
//! symmetric `N x N` grid `phi` with `sum_ij |phi_ij|^2 = P2`; the ordered-pair
//! amplitudes are `psi_c(i<j) = sqrt(2) phi_ij` and `psi_c(i,i) = phi_ii`.
//!
//! In this basis the one-particle hopping is `A(n) = a h1(n)`, whose spectrum is
//! exactly `omega_k`, and the creation element is
//! `<c_m|H|c_ij> = 2 g N_ij sum_n s(m-n) s(i-n) s(j-n)` with `g = lambda a`,
//! `s(n) = a^(1/2) S(n a)` and `N_ij = 1/sqrt(2)` on the diagonal.

use std::sync::OnceLock;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::lattice::{even_kernel_from_spectrum, k_to_bin, wrap_separation, LatticeSpec};
use crate::scalar::{czero, Real};
use crate::spectral::Spectral;

/// Translation-invariant kernels indexed by separation `n mod N`.
#[derive(Debug, Clone)]
pub struct KernelTable<T: Real> {
    spec: LatticeSpec<T>,
    h1: Vec<T>,
    k: Vec<T>,
    s: Option<Vec<T>>,
}

impl<T: Real> KernelTable<T> {
    pub fn build(spec: &LatticeSpec<T>) -> Self {
        Self {
            spec: *spec,
            h1: build_h1(spec),
            k: kernel_k_table(spec.n_sites()),
            s: spec.two_point_s().ok(),
        }
    }

    pub fn spec(&self) -> &LatticeSpec<T> {
        &self.spec
    }

    /// `h1(n) = sum_p omega_p e^{i p a n}` without the vacuum term.
    pub fn h1(&self, n: i64) -> T {
        self.h1[wrap_index(n, self.h1.len())]
    }

    pub fn k(&self, n: i64) -> T {
        self.k[wrap_index(n, self.k.len())]
    }

    /// Two-point function `S(n a)`; `None` when `mu = 0`.
    pub fn s(&self, n: i64) -> Option<T> {
        self.s.as_ref().map(|s| s[wrap_index(n, s.len())])
    }

    pub fn h1_table(&self) -> &[T] {
        &self.h1
    }

    pub fn k_table(&self) -> &[T] {
        &self.k
    }

    pub fn s_table(&self) -> Option<&[T]> {
        self.s.as_deref()
    }
}

#[inline]
fn wrap_index(n: i64, len: usize) -> usize {
    n.rem_euclid(len as i64) as usize
}

/// `h1(n)` for `n = 0 .. N-1`.
pub fn build_h1<T: Real>(spec: &LatticeSpec<T>) -> Vec<T> {
    let l = spec.length();
    even_kernel_from_spectrum(spec.n_sites(), |k| spec.dispersion_k(k))
        .into_iter()
        .map(|v| v / l)
        .collect()
}

/// Closed-form massless kernel `K(n) = (4/N) sin(pi/N) / (cos(2 pi n/N) - cos(pi/N))`.
///
/// With `n` reduced into `(-N/2, N/2]`, the denominator is evaluated as
/// `-2 sin(pi(2n+1)/2N) sin(pi(2n-1)/2N)` and the numerator as
/// `2 sin(pi/2N) cos(pi/2N)`, which keeps full relative precision at large `N`.
pub fn kernel_k<T: Real>(n_sites: usize, n: i64) -> T {
    let nn = wrap_separation(n, n_sites).abs();
    let big_n = T::from_usize_exact(n_sites);
    let two_n = T::lit(2.0) * big_n;
    let pi = T::PI();
    let plus = (pi * T::from_i64_exact(2 * nn + 1) / two_n).sin();
    let minus = (pi * T::from_i64_exact(2 * nn - 1) / two_n).sin();
    let half = pi / two_n;
    let num = T::lit(4.0) / big_n * T::lit(2.0) * half.sin() * half.cos();
    num / (-T::lit(2.0) * plus * minus)
}

pub fn kernel_k_table<T: Real>(n_sites: usize) -> Vec<T> {
    (0..n_sites as i64).map(|n| kernel_k(n_sites, n)).collect()
}

/// All Hamiltonian blocks for one spec, with the spectral data needed by the
/// matrix-free operators.
#[derive(Debug)]
pub struct HamiltonianBlocks<T: Real> {
    spec: LatticeSpec<T>,
    kernels: KernelTable<T>,
    e0: T,
    g: T,
    hop: Vec<T>,
    omega: Vec<T>,
    s_hat: Option<Vec<T>>,
    sigma: Option<Vec<T>>,
    spectral: Spectral<T>,
    creation_cache: OnceLock<Vec<T>>,
}

impl<T: Real> HamiltonianBlocks<T> {
    /// Builds every block. A non-zero coupling requires `mu > 0`.
    pub fn new(spec: &LatticeSpec<T>) -> Result<Self> {
        if spec.lambda() > T::zero() && spec.mu() <= T::zero() {
            return Err(Error::DivergentMode);
        }
        let n = spec.n_sites();
        let a = spec.spacing();
        let kernels = KernelTable::build(spec);
        let hop = kernels.h1_table().iter().map(|&h| h * a).collect();
        let omega = spec.dispersion_by_bin();
        let (s_hat, sigma) = if spec.mu() > T::zero() {
            let sigma: Vec<T> = omega.iter().map(|&w| (T::lit(2.0) * a * w).sqrt().recip()).collect();
            let nf = T::from_usize_exact(n);
            let s_hat = even_kernel_from_spectrum(n, |k| sigma[k_to_bin(k, n)])
                .into_iter()
                .map(|v| v / nf)
                .collect();
            (Some(s_hat), Some(sigma))
        } else {
            (None, None)
        };
        Ok(Self {
            spec: *spec,
            kernels,
            e0: spec.vacuum_energy(),
            g: spec.lambda() * a,
            hop,
            omega,
            s_hat,
            sigma,
            spectral: Spectral::new(n),
            creation_cache: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &LatticeSpec<T> {
        &self.spec
    }

    pub fn kernels(&self) -> &KernelTable<T> {
        &self.kernels
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    pub fn vacuum_energy(&self) -> T {
        self.e0
    }

    /// Coupling in the configuration basis, `g = lambda a`.
    pub fn coupling(&self) -> T {
        self.g
    }

    pub fn is_interacting(&self) -> bool {
        self.g > T::zero() && self.spec.m_max() >= 2
    }

    pub fn spectral(&self) -> &Spectral<T> {
        &self.spectral
    }

    /// Hopping element `<c_m|H|c_n> = A(m - n)` for `m != n`; `A(0) + E0` on the diagonal.
    #[inline]
    pub fn hop(&self, d: i64) -> T {
        self.hop[wrap_index(d, self.hop.len())]
    }

    pub fn hop_table(&self) -> &[T] {
        &self.hop
    }

    /// `omega_k` indexed by FFT bin.
    pub fn omega_by_bin(&self) -> &[T] {
        &self.omega
    }

    /// `sigma_k = (2 a omega_k)^(-1/2)` by FFT bin, the spectrum of `s(n)`.
    pub fn sigma_by_bin(&self) -> Option<&[T]> {
        self.sigma.as_deref()
    }

    /// `s(n) = a^(1/2) S(n a)` for `n = 0 .. N-1`.
    pub fn s_hat(&self) -> Option<&[T]> {
        self.s_hat.as_deref()
    }

    /// `T3(d1, d2) = sum_n s(n) s(n + d1) s(n + d2)`, row-major in `(d1, d2)`.
    ///
    /// Built on first use with one two-dimensional transform.
    pub fn creation_tensor(&self) -> Result<&[T]> {
        let sigma = self.sigma.as_ref().ok_or(Error::DivergentMode)?;
        Ok(self.creation_cache.get_or_init(|| {
            let n = self.n_sites();
            let mut grid: Vec<Complex<T>> = Vec::with_capacity(n * n);
            for k in 0..n {
                for l in 0..n {
                    grid.push(Complex::new(sigma[k] * sigma[l] * sigma[(k + l) % n], T::zero()));
                }
            }
            self.spectral.inverse_2d(&mut grid);
            let nf = T::from_usize_exact(n);
            grid.into_iter().map(|z| z.re / nf).collect()
        }))
    }

    /// `<c_m|H|c_ij> = <c_ij|H|c_m>` for `i <= j`.
    pub fn creation_element(&self, m: usize, i: usize, j: usize) -> Result<T> {
        let n = self.n_sites();
        let t3 = self.creation_tensor()?;
        let d1 = (i + n - m) % n;
        let d2 = (j + n - m) % n;
        let norm = if i == j { T::SQRT_2().recip() } else { T::one() };
        Ok(T::lit(2.0) * self.g * norm * t3[d1 * n + d2])
    }

    /// `(H psi)_m = sum_n A(m - n) psi_n + E0 psi_m` on the one-particle sector.
    pub fn apply_h1(&self, psi1: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.n_sites();
        check_len(psi1.len(), n)?;
        let mut out = psi1.to_vec();
        self.spectral.convolve(&self.omega, &mut out);
        for (o, &p) in out.iter_mut().zip(psi1) {
            *o += p * self.e0;
        }
        Ok(out)
    }

    /// Free two-particle operator on the symmetric grid, `A phi + phi A + E0 phi`.
    pub fn apply_h2_free(&self, psi2: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let n = self.n_sites();
        check_len(psi2.len(), n * n)?;
        let dev = symmetry_deviation(psi2, n);
        if dev > 1e-10 {
            return Err(Error::AsymmetricGrid(dev));
        }
        Ok(self.apply_h2_free_unchecked(psi2))
    }

    pub(crate) fn apply_h2_free_unchecked(&self, psi2: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.n_sites();
        let mut grid = psi2.to_vec();
        self.spectral.forward_2d(&mut grid);
        for k in 0..n {
            for l in 0..n {
                grid[k * n + l] *= self.omega[k] + self.omega[l];
            }
        }
        self.spectral.inverse_2d(&mut grid);
        for (o, &p) in grid.iter_mut().zip(psi2) {
            *o += p * self.e0;
        }
        grid
    }

    /// Cubic interaction between the sectors, returned as `(delta_psi1, delta_psi2)`.
    ///
    /// `delta_psi1 = sqrt(2) g S F` with `F_n = (S phi S)_nn`, and
    /// `delta_psi2 = sqrt(2) g S diag(S psi1) S`.
    pub fn apply_h_interaction(
        &self,
        psi1: &[Complex<T>],
        psi2: &[Complex<T>],
    ) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
        let n = self.n_sites();
        check_len(psi1.len(), n)?;
        check_len(psi2.len(), n * n)?;
        let sigma = self.sigma.as_ref().ok_or(Error::DivergentMode)?;
        if self.g == T::zero() {
            return Ok((vec![czero(); n], vec![czero(); n * n]));
        }
        let c = T::SQRT_2() * self.g;

        let mut g = psi2.to_vec();
        self.spectral.convolve_2d(sigma, &mut g);
        let mut d1: Vec<Complex<T>> = (0..n).map(|i| g[i * n + i]).collect();
        self.spectral.convolve(sigma, &mut d1);
        d1.iter_mut().for_each(|z| *z = *z * c);

        let mut w = psi1.to_vec();
        self.spectral.convolve(sigma, &mut w);
        let mut d2 = vec![czero(); n * n];
        for i in 0..n {
            d2[i * n + i] = w[i] * c;
        }
        self.spectral.convolve_2d(sigma, &mut d2);
        Ok((d1, d2))
    }

    /// Full operator on `(psi1, psi2)`; the second sector is ignored when the
    /// truncation is one particle.
    pub fn apply(&self, psi1: &[Complex<T>], psi2: &[Complex<T>]) -> Result<(Vec<Complex<T>>, Vec<Complex<T>>)> {
        let mut h1 = self.apply_h1(psi1)?;
        if psi2.is_empty() {
            return Ok((h1, Vec::new()));
        }
        let mut h2 = self.apply_h2_free(psi2)?;
        if self.is_interacting() {
            let (d1, d2) = self.apply_h_interaction(psi1, psi2)?;
            h1.iter_mut().zip(d1).for_each(|(a, b)| *a += b);
            h2.iter_mut().zip(d2).for_each(|(a, b)| *a += b);
        }
        Ok((h1, h2))
    }

    /// Arrowhead data of the total-momentum block `q`.
    pub fn block(&self, q: usize) -> MomentumBlock<'_, T> {
        let n = self.n_sites();
        let coupling = match (&self.sigma, self.is_interacting()) {
            (Some(sigma), true) => {
                let c = T::SQRT_2() * self.g / T::from_usize_exact(n).sqrt() * sigma[q];
                Some((c, sigma.as_slice()))
            }
            _ => None,
        };
        MomentumBlock { q, n, omega: &self.omega, coupling }
    }
}

/// The Hamiltonian restricted to total momentum `q`.
///
/// Coordinates: the one-particle amplitude `u~(q)` and the pair amplitudes
/// `phi~(k, q - k)`, `k = 0 .. N-1`. The block is
/// `[[omega_q, v^T], [v, diag(omega_k + omega_{q-k})]]` with
/// `v_k = sqrt(2) g N^(-1/2) sigma_q sigma_k sigma_{q-k}`; energies exclude `E0`.
#[derive(Debug, Clone, Copy)]
pub struct MomentumBlock<'a, T: Real> {
    q: usize,
    n: usize,
    omega: &'a [T],
    coupling: Option<(T, &'a [T])>,
}

impl<'a, T: Real> MomentumBlock<'a, T> {
    pub fn q(&self) -> usize {
        self.q
    }

    #[inline]
    pub fn single_energy(&self) -> T {
        self.omega[self.q]
    }

    #[inline]
    pub fn pair_energy(&self, k: usize) -> T {
        self.omega[k] + self.omega[(self.q + self.n - k) % self.n]
    }

    #[inline]
    pub fn coupling(&self, k: usize) -> T {
        match self.coupling {
            Some((c, sigma)) => c * sigma[k] * sigma[(self.q + self.n - k) % self.n],
            None => T::zero(),
        }
    }

    pub fn is_coupled(&self) -> bool {
        self.coupling.is_some()
    }

    /// `(out_u, out_pairs) = H' (u, pairs)`.
    pub fn apply(&self, u: Complex<T>, pairs: &[Complex<T>], out_pairs: &mut [Complex<T>]) -> Complex<T> {
        let mut out_u = u * self.single_energy();
        for k in 0..self.n {
            let v = self.coupling(k);
            out_pairs[k] = pairs[k] * self.pair_energy(k) + u * v;
            out_u += pairs[k] * v;
        }
        out_u
    }
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual != expected {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}

/// `max |phi_ij - phi_ji|` relative to `max |phi|` (absolute when the grid is tiny).
pub fn symmetry_deviation<T: Real>(grid: &[Complex<T>], n: usize) -> f64 {
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let a = grid[i * n + j];
            scale = scale.max(a.norm().to_f64_lossy());
            if j > i {
                dev = dev.max((a - grid[j * n + i]).norm().to_f64_lossy());
            }
        }
    }
    if scale > 1.0 {
        dev / scale
    } else {
        dev
    }
}
