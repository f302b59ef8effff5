//! Wave-function states and time evolution.
//!
//! The Hamiltonian is block diagonal in total momentum, and every block is an
//! arrowhead matrix (one single-particle mode coupled to `N` pair modes).
//! Both propagators work on those blocks: the free one applies exact phases,
//! the implicit-midpoint one solves each block's Cayley system in `O(N)`.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::{ConfigIndex, Configuration, SectorIndexer};
use crate::hamiltonian::{symmetry_deviation, HamiltonianBlocks, MomentumBlock};
use crate::lattice::LatticeSpec;
use crate::scalar::{cis, czero, Real};

/// Amplitudes on the truncated Fock space at one instant.
///
/// `psi1` holds configuration-basis amplitudes; `psi2` is the symmetric
/// two-particle grid (empty when the truncation is one particle).
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    n: usize,
    psi1: Vec<Complex<T>>,
    psi2: Vec<Complex<T>>,
    time: T,
}

impl<T: Real> StateVector<T> {
    pub fn zeros(spec: &LatticeSpec<T>) -> Self {
        let n = spec.n_sites();
        let len2 = if spec.m_max() >= 2 { n * n } else { 0 };
        Self { n, psi1: vec![czero(); n], psi2: vec![czero(); len2], time: T::zero() }
    }

    pub fn from_parts(n: usize, psi1: Vec<Complex<T>>, psi2: Vec<Complex<T>>, time: T) -> Result<Self> {
        if psi1.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: psi1.len() });
        }
        if !psi2.is_empty() {
            if psi2.len() != n * n {
                return Err(Error::LengthMismatch { expected: n * n, actual: psi2.len() });
            }
            let dev = symmetry_deviation(&psi2, n);
            if dev > 1e-10 {
                return Err(Error::AsymmetricGrid(dev));
            }
        }
        Ok(Self { n, psi1, psi2, time })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn set_time(&mut self, t: T) {
        self.time = t;
    }

    pub fn psi1(&self) -> &[Complex<T>] {
        &self.psi1
    }

    pub fn psi2(&self) -> &[Complex<T>] {
        &self.psi2
    }

    pub fn psi1_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.psi1
    }

    pub fn has_pairs(&self) -> bool {
        !self.psi2.is_empty()
    }

    /// Grid entry `phi_ij`.
    #[inline]
    pub fn phi(&self, i: usize, j: usize) -> Complex<T> {
        self.psi2[i * self.n + j]
    }

    /// Ordered-pair amplitude `psi_c` of the configuration `(i, j)`, `i <= j`.
    #[inline]
    pub fn pair_amplitude(&self, i: usize, j: usize) -> Complex<T> {
        let p = self.psi2[i * self.n + j];
        if i == j {
            p
        } else {
            p * T::SQRT_2()
        }
    }

    /// Sets the ordered-pair amplitude of `(i, j)` and its mirror entry.
    pub fn set_pair_amplitude(&mut self, i: usize, j: usize, value: Complex<T>) {
        let n = self.n;
        if i == j {
            self.psi2[i * n + i] = value;
        } else {
            let v = value / T::SQRT_2();
            self.psi2[i * n + j] = v;
            self.psi2[j * n + i] = v;
        }
    }

    /// Amplitude `<c|Psi>` of a configuration; zero outside the stored sectors.
    pub fn amplitude(&self, cfg: &Configuration) -> Complex<T> {
        match cfg.sites() {
            [m] => self.psi1[*m],
            [i, j] if self.has_pairs() => self.pair_amplitude(*i, *j),
            _ => czero(),
        }
    }

    pub fn probability(&self, cfg: &Configuration) -> T {
        self.amplitude(cfg).norm_sqr()
    }

    pub fn norm_sqr(&self) -> T {
        let (p1, p2) = sector_probabilities(self);
        p1 + p2
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt().recip();
        self.psi1.iter_mut().chain(self.psi2.iter_mut()).for_each(|z| *z = *z * s);
    }

    /// `<self|other>` on the truncated space.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        let mut acc = czero();
        for (a, b) in self.psi1.iter().zip(&other.psi1).chain(self.psi2.iter().zip(&other.psi2)) {
            acc += a.conj() * b;
        }
        acc
    }

    /// Number of basis configurations in the stored sectors.
    pub fn dimension(&self) -> usize {
        self.n + if self.has_pairs() { self.n * (self.n + 1) / 2 } else { 0 }
    }

    /// `(configuration, |psi_c|^2)` over every stored configuration, one-particle
    /// sector first, each in dense rank order.
    pub fn configuration_probabilities(&self) -> Vec<(Configuration, T)> {
        let mut out = Vec::with_capacity(self.dimension());
        for m in 0..self.n {
            out.push((Configuration::one(m), self.psi1[m].norm_sqr()));
        }
        if self.has_pairs() {
            let sector = SectorIndexer::new(2, self.n).expect("two-particle sector");
            for cfg in sector.iter() {
                let p = self.probability(&cfg);
                out.push((cfg, p));
            }
        }
        out
    }

    pub fn symmetry_deviation(&self) -> f64 {
        if self.has_pairs() {
            symmetry_deviation(&self.psi2, self.n)
        } else {
            0.0
        }
    }
}

/// `(P1, P2)`: probabilities of the one- and two-particle sectors.
pub fn sector_probabilities<T: Real>(state: &StateVector<T>) -> (T, T) {
    let p1 = state.psi1.iter().map(|z| z.norm_sqr()).sum();
    let p2 = state.psi2.iter().map(|z| z.norm_sqr()).sum();
    (p1, p2)
}

/// `<Psi|H|Psi>`; the imaginary part vanishes up to roundoff for Hermitian `H`.
pub fn energy_expectation<T: Real>(state: &StateVector<T>, blocks: &HamiltonianBlocks<T>) -> Result<Complex<T>> {
    let (h1, h2) = blocks.apply(&state.psi1, &state.psi2)?;
    let mut acc = czero();
    for (a, b) in state.psi1.iter().zip(&h1).chain(state.psi2.iter().zip(&h2)) {
        acc += a.conj() * b;
    }
    Ok(acc)
}

/// Integration method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactFree,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSchedule<T> {
    pub dt: T,
    pub steps: usize,
    pub method: Method,
}

impl<T: Real> EvolutionSchedule<T> {
    pub fn new(dt: T, steps: usize, method: Method) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidSchedule(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { dt, steps, method })
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_usize_exact(self.steps)
    }
}

/// Inner solver settings for the implicit-midpoint step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: 200 }
    }
}

/// State in momentum-block coordinates: `u[q] = u~(q)` and
/// `pairs[q N + k] = phi~(k, q - k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState<T: Real> {
    n: usize,
    u: Vec<Complex<T>>,
    pairs: Vec<Complex<T>>,
}

impl<T: Real> MomentumState<T> {
    pub fn from_state(state: &StateVector<T>, blocks: &HamiltonianBlocks<T>) -> Self {
        let n = state.n;
        let sp = blocks.spectral();
        let mut u = state.psi1.clone();
        sp.forward(&mut u);
        let pairs = if state.has_pairs() {
            let mut grid = state.psi2.clone();
            sp.forward_2d(&mut grid);
            let mut pairs = vec![czero(); n * n];
            for q in 0..n {
                for k in 0..n {
                    pairs[q * n + k] = grid[k * n + (q + n - k) % n];
                }
            }
            pairs
        } else {
            Vec::new()
        };
        Self { n, u, pairs }
    }

    /// Blocks carrying weight above roundoff level.
    pub fn blocks_active(&self) -> Vec<usize> {
        let floor = 1e-30 * self.block_norm_total();
        (0..self.n).filter(|&q| self.block_norm(q) > floor).collect()
    }

    fn block_norm(&self, q: usize) -> f64 {
        let mut s = self.u[q].norm_sqr().to_f64_lossy();
        if !self.pairs.is_empty() {
            s += self.pairs[q * self.n..(q + 1) * self.n].iter().map(|z| z.norm_sqr().to_f64_lossy()).sum::<f64>();
        }
        s
    }

    /// Writes the position-space amplitudes into `out`.
    pub fn to_state(&self, blocks: &HamiltonianBlocks<T>, time: T, out: &mut StateVector<T>) {
        let n = self.n;
        let sp = blocks.spectral();
        out.psi1.copy_from_slice(&self.u);
        sp.inverse(&mut out.psi1);
        out.time = time;
        if self.pairs.is_empty() {
            return;
        }
        let active = self.blocks_active();
        if active.len() <= 4 {
            // phi_ij = N^-1 sum_q e^{2 pi i q j / N} f_q(i - j), f_q = sum_k p_k e^{2 pi i k d / N}
            out.psi2.iter_mut().for_each(|z| *z = czero());
            let nf = T::from_usize_exact(n);
            let root = nf.sqrt();
            let scale = root.recip();
            for &q in &active {
                let mut f = self.pairs[q * n..(q + 1) * n].to_vec();
                sp.inverse(&mut f);
                f.iter_mut().for_each(|z| *z = *z * scale);
                let tw: Vec<Complex<T>> =
                    (0..n).map(|j| cis(T::lit(2.0) * T::PI() * T::from_usize_exact((q * j) % n) / nf)).collect();
                for i in 0..n {
                    let row = &mut out.psi2[i * n..(i + 1) * n];
                    // f index (i - j) mod N: i, i-1, .., 0 then N-1, .., i+1
                    for j in 0..=i {
                        row[j] += tw[j] * f[i - j];
                    }
                    for j in i + 1..n {
                        row[j] += tw[j] * f[n + i - j];
                    }
                }
            }
        } else {
            for q in 0..n {
                for k in 0..n {
                    out.psi2[k * n + (q + n - k) % n] = self.pairs[q * n + k];
                }
            }
            sp.inverse_2d(&mut out.psi2);
        }
    }

    pub fn to_new_state(&self, blocks: &HamiltonianBlocks<T>, time: T) -> StateVector<T> {
        let mut s = StateVector {
            n: self.n,
            psi1: vec![czero(); self.n],
            psi2: vec![czero(); self.pairs.len()],
            time,
        };
        self.to_state(blocks, time, &mut s);
        s
    }

    /// Distinct energies (excluding `E0`) carried by the free modes with
    /// non-zero weight; used to detect stationary states.
    fn free_energy_spread(&self, blocks: &HamiltonianBlocks<T>) -> f64 {
        let n = self.n;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let tiny = 1e-28 * (self.block_norm_total() + f64::MIN_POSITIVE);
        for q in 0..n {
            let b = blocks.block(q);
            if self.u[q].norm_sqr().to_f64_lossy() > tiny {
                let e = b.single_energy().to_f64_lossy();
                lo = lo.min(e);
                hi = hi.max(e);
            }
            if !self.pairs.is_empty() {
                for k in 0..n {
                    if self.pairs[q * n + k].norm_sqr().to_f64_lossy() > tiny {
                        let e = b.pair_energy(k).to_f64_lossy();
                        lo = lo.min(e);
                        hi = hi.max(e);
                    }
                }
            }
        }
        if hi < lo {
            0.0
        } else {
            hi - lo
        }
    }

    fn block_norm_total(&self) -> f64 {
        (0..self.n).map(|q| self.block_norm(q)).sum()
    }
}

/// Exact free evolution by `t`, including the vacuum phase.
pub fn evolve_free_exact<T: Real>(state: &StateVector<T>, t: T, blocks: &HamiltonianBlocks<T>) -> Result<StateVector<T>> {
    if blocks.is_interacting() {
        return Err(Error::InteractingFreeEvolution);
    }
    check_shape(state, blocks)?;
    let mut mom = MomentumState::from_state(state, blocks);
    apply_free_phases(&mut mom, blocks, t);
    Ok(mom.to_new_state(blocks, state.time + t))
}

fn apply_free_phases<T: Real>(mom: &mut MomentumState<T>, blocks: &HamiltonianBlocks<T>, t: T) {
    let n = mom.n;
    let e0 = blocks.vacuum_energy();
    for q in 0..n {
        let b = blocks.block(q);
        mom.u[q] *= cis(-(b.single_energy() + e0) * t);
        if !mom.pairs.is_empty() {
            for k in 0..n {
                mom.pairs[q * n + k] *= cis(-(b.pair_energy(k) + e0) * t);
            }
        }
    }
}

/// One implicit-midpoint step `(1 + i H dt/2) psi+ = (1 - i H dt/2) psi`.
pub fn step_implicit_midpoint<T: Real>(
    state: &StateVector<T>,
    dt: T,
    blocks: &HamiltonianBlocks<T>,
) -> Result<StateVector<T>> {
    check_shape(state, blocks)?;
    let mut mom = MomentumState::from_state(state, blocks);
    let mut scratch = CayleyScratch::new(state.n);
    cayley_step(&mut mom, blocks, dt, SolverSettings::default(), &mut scratch)?;
    Ok(mom.to_new_state(blocks, state.time + dt))
}

fn check_shape<T: Real>(state: &StateVector<T>, blocks: &HamiltonianBlocks<T>) -> Result<()> {
    let n = blocks.n_sites();
    if state.n != n {
        return Err(Error::LengthMismatch { expected: n, actual: state.n });
    }
    let want = if blocks.spec().m_max() >= 2 { n * n } else { 0 };
    if state.psi2.len() != want {
        return Err(Error::LengthMismatch { expected: want, actual: state.psi2.len() });
    }
    Ok(())
}

struct CayleyScratch<T: Real> {
    rhs: Vec<Complex<T>>,
    x: Vec<Complex<T>>,
    res: Vec<Complex<T>>,
    hx: Vec<Complex<T>>,
    corr: Vec<Complex<T>>,
    tables: Option<CayleyTables<T>>,
}

/// Step-size dependent factors, built once per `dt`.
struct CayleyTables<T: Real> {
    tau: T,
    /// Diagonal Cayley factors `(1 - i tau e) / (1 + i tau e)`, indexed `q`
    /// and `q N + k`.
    single: Vec<Complex<T>>,
    pair: Vec<Complex<T>>,
    /// `1 / (1 + i tau (omega_k + omega_{q-k}))`.
    inv_pair: Vec<Complex<T>>,
    /// Schur complement of each block's pair modes.
    schur: Vec<Complex<T>>,
}

impl<T: Real> CayleyScratch<T> {
    fn new(n: usize) -> Self {
        Self {
            rhs: vec![czero(); n],
            x: vec![czero(); n],
            res: vec![czero(); n],
            hx: vec![czero(); n],
            corr: vec![czero(); n],
            tables: None,
        }
    }
}

fn ensure_tables<'t, T: Real>(
    slot: &'t mut Option<CayleyTables<T>>,
    blocks: &HamiltonianBlocks<T>,
    tau: T,
    pairs: bool,
) -> &'t CayleyTables<T> {
    if slot.as_ref().is_none_or(|t| t.tau != tau || (pairs && t.pair.is_empty())) {
        let n = blocks.n_sites();
        let one = Complex::new(T::one(), T::zero());
        let i_tau = Complex::new(T::zero(), tau);
        let cayley = |e: T| (one - i_tau * e) / (one + i_tau * e);
        let mut t = CayleyTables {
            tau,
            single: (0..n).map(|q| cayley(blocks.block(q).single_energy())).collect(),
            pair: Vec::new(),
            inv_pair: Vec::new(),
            schur: Vec::new(),
        };
        if pairs {
            t.pair.reserve(n * n);
            t.inv_pair.reserve(n * n);
            for q in 0..n {
                let b = blocks.block(q);
                let mut den = one + i_tau * b.single_energy();
                for k in 0..n {
                    let e = b.pair_energy(k);
                    let inv = one / (one + i_tau * e);
                    t.pair.push((one - i_tau * e) * inv);
                    t.inv_pair.push(inv);
                    let v = b.coupling(k);
                    den += inv * (tau * tau * v * v);
                }
                t.schur.push(den);
            }
        }
        *slot = Some(t);
    }
    slot.as_ref().expect("tables built above")
}

/// Advances every block by `dt`. `E0` is removed from the linear solve and
/// applied as an exact global phase.
///
/// Blocks whose weight is below the activity floor of [`MomentumState::blocks_active`]
/// hold transform roundoff only; they get the diagonal phases and skip the
/// coupled solve.
fn cayley_step<T: Real>(
    mom: &mut MomentumState<T>,
    blocks: &HamiltonianBlocks<T>,
    dt: T,
    settings: SolverSettings,
    scratch: &mut CayleyScratch<T>,
) -> Result<()> {
    let n = mom.n;
    let tau = dt * T::lit(0.5);
    let i_tau = Complex::new(T::zero(), tau);
    let global = cis(-blocks.vacuum_energy() * dt);
    let has_pairs = !mom.pairs.is_empty();
    let floor = 1e-30 * mom.block_norm_total();
    let CayleyScratch { rhs, x, res, hx, corr, tables } = scratch;
    let tables = ensure_tables(tables, blocks, tau, has_pairs);
    for q in 0..n {
        let b = blocks.block(q);
        if !has_pairs || !b.is_coupled() || mom.block_norm(q) <= floor {
            mom.u[q] *= tables.single[q] * global;
            if has_pairs {
                for (z, f) in mom.pairs[q * n..(q + 1) * n].iter_mut().zip(&tables.pair[q * n..(q + 1) * n]) {
                    *z *= f * global;
                }
            }
            continue;
        }
        let inv = &tables.inv_pair[q * n..(q + 1) * n];
        let schur = tables.schur[q];
        let pairs = &mut mom.pairs[q * n..(q + 1) * n];
        // rhs = (1 - i tau H') b
        let hu = b.apply(mom.u[q], pairs, hx);
        let rhs_u = mom.u[q] - i_tau * hu;
        for k in 0..n {
            rhs[k] = pairs[k] - i_tau * hx[k];
        }
        let rhs_norm = (rhs_u.norm_sqr() + rhs.iter().map(|z| z.norm_sqr()).sum::<T>()).sqrt();
        let mut x_u = solve_arrowhead(&b, tau, inv, schur, rhs_u, rhs, x);
        let mut iterations = 0;
        loop {
            // residual of (1 + i tau H') x = rhs
            let hxu = b.apply(x_u, x, hx);
            let r_u = rhs_u - (x_u + i_tau * hxu);
            let mut r2 = r_u.norm_sqr();
            for k in 0..n {
                res[k] = rhs[k] - (x[k] + i_tau * hx[k]);
                r2 += res[k].norm_sqr();
            }
            let rel = (r2.sqrt() / rhs_norm).to_f64_lossy();
            if rel <= settings.tolerance {
                break;
            }
            iterations += 1;
            if iterations > settings.max_iterations || !rel.is_finite() {
                return Err(Error::SolverDiverged { iterations, residual: rel });
            }
            // iterative refinement with the exact block inverse
            let c_u = solve_arrowhead(&b, tau, inv, schur, r_u, res, corr);
            x_u += c_u;
            for k in 0..n {
                x[k] += corr[k];
            }
        }
        mom.u[q] = x_u * global;
        for k in 0..n {
            pairs[k] = x[k] * global;
        }
    }
    Ok(())
}

/// Solves `(1 + i tau H') x = r` for one arrowhead block by eliminating the
/// diagonal pair modes; `inv` and `schur` come from [`CayleyTables`].
fn solve_arrowhead<T: Real>(
    b: &MomentumBlock<'_, T>,
    tau: T,
    inv: &[Complex<T>],
    schur: Complex<T>,
    r_u: Complex<T>,
    r: &[Complex<T>],
    x: &mut [Complex<T>],
) -> Complex<T> {
    let i_tau = Complex::new(T::zero(), tau);
    let mut num = r_u;
    for k in 0..r.len() {
        num -= i_tau * r[k] * inv[k] * b.coupling(k);
    }
    let x_u = num / schur;
    for k in 0..r.len() {
        x[k] = (r[k] - i_tau * x_u * b.coupling(k)) * inv[k];
    }
    x_u
}

/// Source of wave-function snapshots on a fixed time grid.
pub trait Propagator<T: Real> {
    /// Snapshot at the current grid time.
    fn state(&self) -> &StateVector<T>;

    /// Advances the wave function by one grid step.
    fn step(&mut self) -> Result<()>;

    fn dt(&self) -> T;

    fn steps_taken(&self) -> usize;

    /// True when every `|psi_c|^2` (and hence every jump rate) is constant in time.
    fn is_stationary(&self) -> bool {
        false
    }
}

/// Propagator over momentum blocks, owning its state (single writer).
pub struct SpectralPropagator<'a, T: Real> {
    blocks: &'a HamiltonianBlocks<T>,
    method: Method,
    dt: T,
    t0: T,
    initial: MomentumState<T>,
    mom: MomentumState<T>,
    snapshot: StateVector<T>,
    steps: usize,
    stationary: bool,
    settings: SolverSettings,
    scratch: CayleyScratch<T>,
}

impl<'a, T: Real> SpectralPropagator<'a, T> {
    pub fn new(blocks: &'a HamiltonianBlocks<T>, state: StateVector<T>, dt: T, method: Method) -> Result<Self> {
        EvolutionSchedule::new(dt, 0, method)?;
        check_shape(&state, blocks)?;
        if method == Method::ExactFree && blocks.is_interacting() {
            return Err(Error::InteractingFreeEvolution);
        }
        let mom = MomentumState::from_state(&state, blocks);
        let stationary = !blocks.is_interacting() && mom.free_energy_spread(blocks) <= 1e-13;
        Ok(Self {
            blocks,
            method,
            dt,
            t0: state.time,
            initial: mom.clone(),
            mom,
            snapshot: state,
            steps: 0,
            stationary,
            settings: SolverSettings::default(),
            scratch: CayleyScratch::new(blocks.n_sites()),
        })
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn momentum_state(&self) -> &MomentumState<T> {
        &self.mom
    }

    pub fn into_state(self) -> StateVector<T> {
        self.snapshot
    }
}

impl<T: Real> Propagator<T> for SpectralPropagator<'_, T> {
    fn state(&self) -> &StateVector<T> {
        &self.snapshot
    }

    fn step(&mut self) -> Result<()> {
        self.steps += 1;
        let t = self.dt * T::from_usize_exact(self.steps);
        match self.method {
            Method::ExactFree => {
                self.mom.clone_from(&self.initial);
                apply_free_phases(&mut self.mom, self.blocks, t);
            }
            Method::ImplicitMidpoint => {
                cayley_step(&mut self.mom, self.blocks, self.dt, self.settings, &mut self.scratch)?;
            }
        }
        self.mom.to_state(self.blocks, self.t0 + t, &mut self.snapshot);
        Ok(())
    }

    fn dt(&self) -> T {
        self.dt
    }

    fn steps_taken(&self) -> usize {
        self.steps
    }

    fn is_stationary(&self) -> bool {
        self.stationary
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"BFCKPT01";

/// Writes `(spec, time, psi1, psi2)` as little-endian binary followed by the
/// SHA-256 digest of every preceding byte.
///
/// Layout: magic (8 bytes), `N` u64, `M_max` u64, `a`, `mu`, `lambda`, `time`
/// as f64, `len(psi1)` u64 then (re, im) f64 pairs, `len(psi2)` u64 then
/// (re, im) pairs, digest (32 bytes).
pub fn write_checkpoint<T: Real, W: Write>(w: &mut W, spec: &LatticeSpec<T>, state: &StateVector<T>) -> Result<()> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    buf.write_u64::<LittleEndian>(spec.n_sites() as u64).map_err(io)?;
    buf.write_u64::<LittleEndian>(spec.m_max() as u64).map_err(io)?;
    for v in [spec.spacing(), spec.mu(), spec.lambda(), state.time] {
        buf.write_f64::<LittleEndian>(v.to_f64_lossy()).map_err(io)?;
    }
    for part in [&state.psi1, &state.psi2] {
        buf.write_u64::<LittleEndian>(part.len() as u64).map_err(io)?;
        for z in part.iter() {
            buf.write_f64::<LittleEndian>(z.re.to_f64_lossy()).map_err(io)?;
            buf.write_f64::<LittleEndian>(z.im.to_f64_lossy()).map_err(io)?;
        }
    }
    let digest = Sha256::digest(&buf);
    w.write_all(&buf).map_err(io)?;
    w.write_all(&digest).map_err(io)?;
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`], verifying the digest.
pub fn read_checkpoint<T: Real, R: Read>(r: &mut R) -> Result<(LatticeSpec<T>, StateVector<T>)> {
    let io = |e: std::io::Error| Error::Checkpoint(e.to_string());
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() < CHECKPOINT_MAGIC.len() + 32 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("digest mismatch".into()));
    }
    let mut c = std::io::Cursor::new(&body[8..]);
    let n = c.read_u64::<LittleEndian>().map_err(io)? as usize;
    let m_max = c.read_u64::<LittleEndian>().map_err(io)? as usize;
    let mut f = || -> Result<T> {
        let v = c.read_f64::<LittleEndian>().map_err(io)?;
        T::from_f64(v).ok_or_else(|| Error::Checkpoint(format!("value {v} not representable")))
    };
    let (a, mu, lambda, time) = (f()?, f()?, f()?, f()?);
    let spec = LatticeSpec::new(n, a, mu, lambda, m_max)?;
    let mut parts: Vec<Vec<Complex<T>>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let len = c.read_u64::<LittleEndian>().map_err(io)? as usize;
        if len > body.len() {
            return Err(Error::Checkpoint("truncated".into()));
        }
        let mut v = Vec::with_capacity(len);
        for _ in 0..len {
            let re = c.read_f64::<LittleEndian>().map_err(io)?;
            let im = c.read_f64::<LittleEndian>().map_err(io)?;
            v.push(Complex::new(T::from_f64(re).unwrap_or(T::nan()), T::from_f64(im).unwrap_or(T::nan())));
        }
        parts.push(v);
    }
    let psi2 = parts.pop().unwrap_or_default();
    let psi1 = parts.pop().unwrap_or_default();
    let state = StateVector::from_parts(n, psi1, psi2, time)?;
    Ok((spec, state))
}

/// Raw index of every stored configuration, aligned with
/// [`StateVector::configuration_probabilities`].
pub fn configuration_indices<T: Real>(spec: &LatticeSpec<T>, state: &StateVector<T>) -> Result<Vec<ConfigIndex>> {
    state
        .configuration_probabilities()
        .iter()
        .map(|(cfg, _)| crate::fock::encode(cfg, spec))
        .collect()
}
