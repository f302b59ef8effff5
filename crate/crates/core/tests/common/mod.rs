//! Dense reference implementations shared by the integration tests.
//!
//! Everything here is built from plain momentum sums and explicit bosonic
//! operator matrices on the truncated Fock space, without the transforms used
//! by the library.
#![allow(dead_code)]

use bellfield::evolution::StateVector;
use bellfield::{Configuration, LatticeSpec};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub fn ks(n: usize) -> impl Iterator<Item = i64> {
    let h = (n / 2) as i64;
    -h + 1..=h
}

pub fn omega(spec: &LatticeSpec<f64>, k: i64) -> f64 {
    let a = spec.spacing();
    let p = 2.0 * PI * k as f64 / spec.length();
    (spec.mu().powi(2) + (2.0 - 2.0 * (a * p).cos()) / (a * a)).sqrt()
}

/// `sum_p f(p) e^{i p a n}` with `sum_p = (1/L) sum_k`, real part.
fn momentum_sum(spec: &LatticeSpec<f64>, n: i64, f: impl Fn(i64) -> f64) -> f64 {
    let nn = spec.n_sites();
    ks(nn).map(|k| f(k) * (2.0 * PI * ((k * n).rem_euclid(nn as i64)) as f64 / nn as f64).cos()).sum::<f64>()
        / spec.length()
}

pub fn direct_h1(spec: &LatticeSpec<f64>, n: i64) -> f64 {
    momentum_sum(spec, n, |k| omega(spec, k))
}

pub fn direct_s(spec: &LatticeSpec<f64>, n: i64) -> f64 {
    momentum_sum(spec, n, |k| (2.0 * omega(spec, k)).powf(-0.5))
}

/// `K(n) = 4 a sum_p |sin(a p / 2)| e^{i a p n}` by direct summation.
pub fn direct_k(n_sites: usize, n: i64) -> f64 {
    let terms = ks(n_sites).map(|k| {
        let s = (PI * k as f64 / n_sites as f64).sin().abs();
        4.0 * s * (2.0 * PI * ((k * n).rem_euclid(n_sites as i64)) as f64 / n_sites as f64).cos()
    });
    bellfield::summation::compensated_sum(terms) / n_sites as f64
}

pub fn vacuum_energy(spec: &LatticeSpec<f64>) -> f64 {
    0.5 * ks(spec.n_sites()).map(|k| omega(spec, k)).sum::<f64>()
}

/// One- and two-particle basis: sites `0..N`, then pairs `i <= j` row by row.
pub fn basis(n: usize, pairs: bool) -> Vec<Configuration> {
    let mut b: Vec<_> = (0..n).map(Configuration::one).collect();
    if pairs {
        for i in 0..n {
            for j in i..n {
                b.push(Configuration::two(i, j));
            }
        }
    }
    b
}

/// Occupation-number Fock space with at most two particles, vacuum first.
struct Fock {
    n: usize,
    states: Vec<Vec<usize>>,
}

impl Fock {
    fn new(n: usize, pairs: bool) -> Self {
        let mut states = vec![vec![]];
        states.extend(basis(n, pairs).into_iter().map(|c| c.sites().to_vec()));
        Self { n, states }
    }

    fn index(&self, sites: &[usize]) -> Option<usize> {
        self.states.iter().position(|s| s == sites)
    }

    /// Annihilation operator `c_m` as a dense matrix.
    fn annihilate(&self, m: usize) -> DMatrix<f64> {
        let d = self.states.len();
        let mut out = DMatrix::zeros(d, d);
        for (col, s) in self.states.iter().enumerate() {
            let occ = s.iter().filter(|&&x| x == m).count();
            if occ == 0 {
                continue;
            }
            let mut rest = s.clone();
            let pos = rest.iter().position(|&x| x == m).unwrap();
            rest.remove(pos);
            let row = self.index(&rest).unwrap();
            out[(row, col)] = (occ as f64).sqrt();
        }
        out
    }
}

/// Dense Hamiltonian on the basis of [`basis`] (vacuum removed).
pub fn dense_hamiltonian(spec: &LatticeSpec<f64>) -> DMatrix<f64> {
    let n = spec.n_sites();
    let pairs = spec.m_max() >= 2;
    let fock = Fock::new(n, pairs);
    let d = fock.states.len();
    let c: Vec<DMatrix<f64>> = (0..n).map(|m| fock.annihilate(m)).collect();
    let a = spec.spacing();
    let mut h = DMatrix::identity(d, d) * vacuum_energy(spec);
    for x in 0..n {
        for y in 0..n {
            let hop = a * direct_h1(spec, y as i64 - x as i64);
            h += &c[y].transpose() * &c[x] * hop;
        }
    }
    if pairs && spec.lambda() > 0.0 {
        // B_m = sum_n a^{1/2} S(m - n) c_n; :phi^3: restricted to M <= 2 keeps
        // 3 B^dag B^dag B + 3 B^dag B B
        let s_hat: Vec<f64> = (0..n).map(|d| a.sqrt() * direct_s(spec, d as i64)).collect();
        for m in 0..n {
            let mut b = DMatrix::zeros(d, d);
            for (k, ck) in c.iter().enumerate() {
                b += ck * s_hat[(m + n - k) % n];
            }
            let bt = b.transpose();
            let cube = &bt * &bt * &b * 3.0 + &bt * &b * &b * 3.0;
            h += cube * (spec.lambda() * a / 3.0);
        }
    }
    h.view((1, 1), (d - 1, d - 1)).into_owned()
}

/// Configuration-basis amplitudes of a state, ordered as [`basis`].
pub fn to_c(state: &StateVector<f64>) -> DVector<C> {
    let n = state.n_sites();
    let b = basis(n, state.has_pairs());
    DVector::from_iterator(b.len(), b.iter().map(|c| state.amplitude(c)))
}

pub fn from_c(spec: &LatticeSpec<f64>, v: &DVector<C>) -> StateVector<f64> {
    let n = spec.n_sites();
    let mut s = StateVector::zeros(spec);
    for (cfg, z) in basis(n, spec.m_max() >= 2).iter().zip(v.iter()) {
        match *cfg.sites() {
            [m] => s.psi1_mut()[m] = *z,
            [i, j] => s.set_pair_amplitude(i, j, *z),
            _ => unreachable!(),
        }
    }
    s
}

pub fn random_state(spec: &LatticeSpec<f64>, seed: u64) -> StateVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n_sites();
    let d = basis(n, spec.m_max() >= 2).len();
    let v = DVector::from_iterator(d, (0..d).map(|_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)));
    let mut s = from_c(spec, &v);
    s.normalize();
    s
}

pub fn complexify(h: &DMatrix<f64>) -> DMatrix<C> {
    h.map(|x| C::new(x, 0.0))
}

/// `exp(-i H t) v` through the eigendecomposition of the real symmetric `H`.
pub fn expm_apply(h: &DMatrix<f64>, v: &DVector<C>, t: f64) -> DVector<C> {
    let eig = SymmetricEigen::new(h.clone());
    let q = complexify(&eig.eigenvectors);
    let coeff = q.adjoint() * v;
    let phased = DVector::from_iterator(
        coeff.len(),
        coeff.iter().zip(eig.eigenvalues.iter()).map(|(c, e)| c * C::from_polar(1.0, -e * t)),
    );
    q * phased
}

/// One Cayley step `(1 + i H dt/2)^{-1} (1 - i H dt/2) v` by dense LU.
pub fn cayley_apply(h: &DMatrix<f64>, v: &DVector<C>, dt: f64) -> DVector<C> {
    let d = h.nrows();
    let hc = complexify(h);
    let id = DMatrix::<C>::identity(d, d);
    let half = C::new(0.0, 0.5 * dt);
    let lhs = &id + &hc * half;
    let rhs = (&id - &hc * half) * v;
    lhs.lu().solve(&rhs).expect("Cayley matrix is invertible")
}

pub fn norm_diff(a: &DVector<C>, b: &DVector<C>) -> f64 {
    (a - b).norm()
}
