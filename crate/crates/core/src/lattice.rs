//! Lattice geometry, units, momentum grid and dispersion.
//!
//! Sites carry physical coordinates `x = n a` with `n = -N/2+1 .. N/2`. Storage
//! uses the offset index `site = n + N/2 - 1` in `[0, N)`; every formula that
//! depends only on separations is insensitive to the offset.
//!
//! The two measures used throughout are
//! `sum_x f = a * sum_n f(n a)` and `sum_p f = (1/L) * sum_k f(2 pi k / L)`.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::summation::compensated_sum;

/// Physical and numerical parameters of the lattice field theory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec<T>", bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct LatticeSpec<T> {
    n_sites: usize,
    spacing: T,
    mu: T,
    lambda: T,
    m_max: usize,
}

#[derive(Deserialize)]
struct RawSpec<T> {
    n_sites: usize,
    spacing: T,
    mu: T,
    lambda: T,
    m_max: usize,
}

impl<T: Real> TryFrom<RawSpec<T>> for LatticeSpec<T> {
    type Error = Error;

    fn try_from(r: RawSpec<T>) -> Result<Self> {
        Self::new(r.n_sites, r.spacing, r.mu, r.lambda, r.m_max)
    }
}

impl<T: Real> LatticeSpec<T> {
    /// Validates and builds a spec.
    ///
    /// `lambda` is the dimensionful coupling; the dimensionless combination
    /// `a^2 lambda` is what scenarios usually quote.
    pub fn new(n_sites: usize, spacing: T, mu: T, lambda: T, m_max: usize) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "site count must be even and >= 2, got {n_sites}"
            )));
        }
        if !(spacing > T::zero()) || !spacing.is_finite() {
            return Err(Error::InvalidSpec(format!("lattice spacing must be positive, got {spacing}")));
        }
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(Error::InvalidSpec(format!("mass parameter must be >= 0, got {mu}")));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidSpec(format!("coupling must be >= 0, got {lambda}")));
        }
        if m_max > 2 {
            return Err(Error::InvalidSpec(format!("Fock truncation above 2 particles is not supported, got {m_max}")));
        }
        Ok(Self { n_sites, spacing, mu, lambda, m_max })
    }

    /// Free theory in lattice units (`a = 1`), truncated at one particle.
    pub fn free(n_sites: usize, a_mu: T) -> Result<Self> {
        Self::new(n_sites, T::one(), a_mu, T::zero(), 1)
    }

    /// Theory in lattice units (`a = 1`), truncated at two particles, with
    /// dimensionless mass `a mu` and coupling `a^2 lambda`.
    pub fn lattice_units(n_sites: usize, a_mu: T, a2_lambda: T) -> Result<Self> {
        Self::new(n_sites, T::one(), a_mu, a2_lambda, 2)
    }

    pub fn with_lambda(self, lambda: T) -> Result<Self> {
        Self::new(self.n_sites, self.spacing, self.mu, lambda, self.m_max)
    }

    pub fn with_m_max(self, m_max: usize) -> Result<Self> {
        Self::new(self.n_sites, self.spacing, self.mu, self.lambda, m_max)
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.spacing
    }

    #[inline]
    pub fn mu(&self) -> T {
        self.mu
    }

    #[inline]
    pub fn lambda(&self) -> T {
        self.lambda
    }

    #[inline]
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// `L = N a`.
    #[inline]
    pub fn length(&self) -> T {
        T::from_usize_exact(self.n_sites) * self.spacing
    }

    /// `a mu`.
    pub fn a_mu(&self) -> T {
        self.spacing * self.mu
    }

    /// `a^2 lambda`.
    pub fn a2_lambda(&self) -> T {
        self.spacing * self.spacing * self.lambda
    }

    pub fn momentum_grid(&self) -> MomentumGrid {
        MomentumGrid::new(self.n_sites)
    }

    /// Physical coordinate `x / a` of a storage site.
    #[inline]
    pub fn coordinate(&self, site: usize) -> i64 {
        site as i64 - (self.n_sites / 2) as i64 + 1
    }

    /// Storage site of a physical coordinate `x / a`, wrapped periodically.
    #[inline]
    pub fn site_of(&self, coordinate: i64) -> usize {
        let n = self.n_sites as i64;
        (coordinate + n / 2 - 1).rem_euclid(n) as usize
    }

    /// Physical position `x` of a storage site.
    pub fn position(&self, site: usize) -> T {
        T::from_i64_exact(self.coordinate(site)) * self.spacing
    }

    /// Minimal-image separation `(to - from) / a`, mapped into `(-N/2, N/2]`.
    #[inline]
    pub fn minimal_image(&self, from: usize, to: usize) -> i64 {
        wrap_separation(to as i64 - from as i64, self.n_sites)
    }

    /// Lattice momentum `p = 2 pi k / L`.
    #[inline]
    pub fn momentum(&self, k: i64) -> T {
        T::lit(2.0) * T::PI() * T::from_i64_exact(k) / self.length()
    }

    /// `omega_p = (mu^2 + a^-2 (2 - 2 cos a p))^(1/2)`.
    pub fn dispersion(&self, p: T) -> T {
        let half = (self.spacing * p * T::lit(0.5)).sin();
        let grad = T::lit(2.0) * half / self.spacing;
        (self.mu * self.mu + grad * grad).sqrt()
    }

    /// Dispersion at grid wave number `k`.
    pub fn dispersion_k(&self, k: i64) -> T {
        // sin(pi k / N) evaluated with an exactly reduced argument
        let n = self.n_sites as i64;
        let mut r = k.rem_euclid(2 * n);
        if r > n {
            // sin^2 is symmetric about pi, so -k and k share one evaluation
            r = 2 * n - r;
        }
        let half = (T::PI() * T::from_i64_exact(r) / T::from_usize_exact(self.n_sites)).sin();
        let grad = T::lit(2.0) * half / self.spacing;
        (self.mu * self.mu + grad * grad).sqrt()
    }

    /// `omega_k` for every grid wave number, in grid order.
    pub fn dispersion_table(&self) -> Vec<T> {
        self.momentum_grid().iter().map(|k| self.dispersion_k(k)).collect()
    }

    /// Dispersion indexed by FFT bin `b` (`k = b` or `b - N`).
    pub fn dispersion_by_bin(&self) -> Vec<T> {
        (0..self.n_sites).map(|b| self.dispersion_k(bin_to_k(b, self.n_sites))).collect()
    }

    /// `E_0 = (1/2) L sum_p omega_p`.
    pub fn vacuum_energy(&self) -> T {
        let l = self.length();
        T::lit(0.5) * l * self.sum_p(|k| self.dispersion_k(k))
    }

    /// `sum_x f(x) = a sum_n f(n a)` over physical coordinates `n = x/a`.
    pub fn sum_x<F: Fn(i64) -> T>(&self, f: F) -> T {
        let lo = -((self.n_sites / 2) as i64) + 1;
        let hi = (self.n_sites / 2) as i64;
        self.spacing * compensated_sum((lo..=hi).map(f))
    }

    /// `sum_p f(p) = (1/L) sum_k f(k)`; the closure receives the wave number `k`.
    pub fn sum_p<F: Fn(i64) -> T>(&self, f: F) -> T {
        compensated_sum(self.momentum_grid().iter().map(f)) / self.length()
    }

    /// Complex version of [`Self::sum_p`].
    pub fn sum_p_complex<F: Fn(i64) -> Complex<T>>(&self, f: F) -> Complex<T> {
        let (re, im): (Vec<T>, Vec<T>) = self.momentum_grid().iter().map(|k| {
            let z = f(k);
            (z.re, z.im)
        }).unzip();
        Complex::new(compensated_sum(re), compensated_sum(im)) / self.length()
    }

    /// Two-point function `S(n a) = sum_p (2 omega_p)^(-1/2) e^{i p a n}`, `n = 0 .. N-1`.
    ///
    /// Rejects `mu = 0`, where the `p = 0` term diverges.
    pub fn two_point_s(&self) -> Result<Vec<T>> {
        if self.mu <= T::zero() {
            return Err(Error::DivergentMode);
        }
        let l = self.length();
        Ok(even_kernel_from_spectrum(self.n_sites, |k| {
            (T::lit(2.0) * self.dispersion_k(k)).sqrt().recip()
        })
        .into_iter()
        .map(|v| v / l)
        .collect())
    }
}

/// Wave numbers `k = -N/2+1 .. N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentumGrid {
    n_sites: usize,
}

impl MomentumGrid {
    pub fn new(n_sites: usize) -> Self {
        Self { n_sites }
    }

    pub fn len(&self) -> usize {
        self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.n_sites == 0
    }

    pub fn k_min(&self) -> i64 {
        -((self.n_sites / 2) as i64) + 1
    }

    pub fn k_max(&self) -> i64 {
        (self.n_sites / 2) as i64
    }

    pub fn iter(&self) -> impl Iterator<Item = i64> {
        self.k_min()..=self.k_max()
    }

    /// Partner `-k` on the grid, `None` for the unpaired endpoint `k = N/2`
    /// (and `k = 0`, which is its own partner, returns itself).
    pub fn partner(&self, k: i64) -> Option<i64> {
        if k == self.k_max() {
            None
        } else {
            Some(-k)
        }
    }

    pub fn momenta<T: Real>(&self, spec: &LatticeSpec<T>) -> Vec<T> {
        self.iter().map(|k| spec.momentum(k)).collect()
    }
}

/// FFT bin of a wave number.
#[inline]
pub fn k_to_bin(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Wave number of an FFT bin, in `(-N/2, N/2]`.
#[inline]
pub fn bin_to_k(b: usize, n: usize) -> i64 {
    if b <= n / 2 {
        b as i64
    } else {
        b as i64 - n as i64
    }
}

/// Maps an integer separation into `(-N/2, N/2]`.
#[inline]
pub fn wrap_separation(d: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = d.rem_euclid(n);
    if r > n / 2 {
        r - n
    } else {
        r
    }
}

/// `sum_k f(k) cos(2 pi k j / N)` for `j = 0 .. N-1`, computed with one FFT.
///
/// `f` must be even in `k` (apart from the unpaired endpoint), which makes the
/// transform real.
pub fn even_kernel_from_spectrum<T: Real, F: Fn(i64) -> T>(n: usize, f: F) -> Vec<T> {
    let mut buf: Vec<Complex<T>> =
        (0..n).map(|b| Complex::new(f(bin_to_k(b, n)), T::zero())).collect();
    let mut planner = FftPlanner::<T>::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}
