//! Scenario recipes and analysis of trajectory ensembles.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Method, SpectralPropagator, StateVector};
use crate::fock::{decode_sites, one_particle_index, pair_index, ConfigIndex};
use crate::hamiltonian::{kernel_k, HamiltonianBlocks};
use crate::jump::{rates_from_state, run_ensemble, EnsembleOutcome, EnsembleSpec, JumpParams, Start, Trajectory};
use crate::lattice::{wrap_separation, LatticeSpec};
use crate::scalar::Real;
use crate::summation::{chunked_sums, NeumaierSum};

/// `e^{2 pi i r / n}`, exact at multiples of a quarter turn.
///
/// `r` is reduced into `(-n/2, n/2]`, so `r` and `-r` give exact conjugates
/// except at the half turn, which is exactly `-1`.
pub fn unit_phase<T: Real>(r: i64, n: usize) -> Complex<T> {
    let r = wrap_separation(r, n);
    let n = n as i64;
    if r == 0 {
        Complex::new(T::one(), T::zero())
    } else if 2 * r == n {
        Complex::new(-T::one(), T::zero())
    } else if 4 * r == n {
        Complex::new(T::zero(), T::one())
    } else if 4 * r == -n {
        Complex::new(T::zero(), -T::one())
    } else {
        let th = T::lit(2.0) * T::PI() * T::from_i64_exact(r) / T::from_i64_exact(n);
        Complex::new(th.cos(), th.sin())
    }
}

/// Nearest site to position `x/L` (taken modulo 1).
pub fn site_at<T: Real>(spec: &LatticeSpec<T>, x_over_l: T) -> usize {
    let n = spec.n_sites() as i64;
    let c = (x_over_l * T::from_i64_exact(n)).round().to_i64().unwrap_or(0);
    // coordinates run over -N/2+1 .. N/2
    let c = wrap_separation(c, spec.n_sites());
    let c = if c == -n / 2 { n / 2 } else { c };
    spec.site_of(c)
}

/// Wave-function recipe; momenta are integer wave numbers `k` with `p = 2 pi k / L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState<T> {
    /// `psi(x) = L^{-1/2} e^{i p x}`, no pair component.
    PlaneWave { k: i64 },
    /// One-particle packet `exp(-d^2 / 2 sigma^2) e^{i p x}`, `d` the
    /// minimal-image distance to `x0`; `x0` and `sigma` in units of `L`.
    GaussianPacket { x0: T, sigma: T, k: i64 },
    /// Symmetrized two-particle plane wave `e^{i(p1 x1 + p2 x2)} + (x1 <-> x2)`.
    TwoMomentum { k1: i64, k2: i64 },
    /// Symmetrized product of two packets.
    GaussianPair { x1: T, x2: T, sigma: T, k1: i64, k2: i64 },
}

impl<T: Real> InitialState<T> {
    fn check(&self, spec: &LatticeSpec<T>) -> Result<()> {
        let n = spec.n_sites() as i64;
        let ks = match *self {
            Self::PlaneWave { k } | Self::GaussianPacket { k, .. } => vec![k],
            Self::TwoMomentum { k1, k2 } | Self::GaussianPair { k1, k2, .. } => vec![k1, k2],
        };
        if ks.iter().any(|k| *k <= -n / 2 || *k > n / 2) {
            return Err(Error::InvalidScenario(format!("wave number outside the grid (-{}, {}]", n / 2, n / 2)));
        }
        let needs_pairs = matches!(self, Self::TwoMomentum { .. } | Self::GaussianPair { .. });
        if needs_pairs && spec.m_max() < 2 {
            return Err(Error::InvalidScenario("two-particle recipe needs a two-particle truncation".into()));
        }
        if let Self::GaussianPacket { sigma, .. } | Self::GaussianPair { sigma, .. } = self {
            if !(*sigma > T::zero()) {
                return Err(Error::InvalidScenario(format!("packet width must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Normalized state at `t = 0`.
    pub fn build(&self, spec: &LatticeSpec<T>) -> Result<StateVector<T>> {
        self.check(spec)?;
        let n = spec.n_sites();
        let coord = |j: usize| spec.coordinate(j);
        let envelope = |j: usize, x0: T, sigma: T| {
            let x = T::from_i64_exact(coord(j)) / T::from_usize_exact(n);
            let mut d = x - x0;
            d = d - d.round();
            (-(d * d) / (T::lit(2.0) * sigma * sigma)).exp()
        };
        let mut state = StateVector::zeros(spec);
        match *self {
            Self::PlaneWave { k } => {
                for j in 0..n {
                    state.psi1_mut()[j] = unit_phase(k * coord(j), n);
                }
            }
            Self::GaussianPacket { x0, sigma, k } => {
                for j in 0..n {
                    state.psi1_mut()[j] = unit_phase::<T>(k * coord(j), n) * envelope(j, x0, sigma);
                }
            }
            Self::TwoMomentum { k1, k2 } => {
                let mut grid = vec![Complex::new(T::zero(), T::zero()); n * n];
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (coord(i), coord(j));
                        grid[i * n + j] = unit_phase::<T>(k1 * a + k2 * b, n) + unit_phase::<T>(k1 * b + k2 * a, n);
                    }
                }
                state = StateVector::from_parts(n, vec![Complex::new(T::zero(), T::zero()); n], grid, T::zero())?;
            }
            Self::GaussianPair { x1, x2, sigma, k1, k2 } => {
                let mut grid = vec![Complex::new(T::zero(), T::zero()); n * n];
                for i in 0..n {
                    for j in 0..n {
                        let (a, b) = (coord(i), coord(j));
                        let t1 = unit_phase::<T>(k1 * a + k2 * b, n) * (envelope(i, x1, sigma) * envelope(j, x2, sigma));
                        let t2 = unit_phase::<T>(k1 * b + k2 * a, n) * (envelope(j, x1, sigma) * envelope(i, x2, sigma));
                        grid[i * n + j] = t1 + t2;
                    }
                }
                state = StateVector::from_parts(n, vec![Complex::new(T::zero(), T::zero()); n], grid, T::zero())?;
            }
        }
        if state.norm_sqr() == T::zero() {
            return Err(Error::InvalidScenario("initial state vanishes identically".into()));
        }
        state.normalize();
        Ok(state)
    }
}

/// Where walkers begin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StartSpec<T> {
    /// Drawn from `|psi_c(0)|^2`.
    Equilibrium,
    /// One particle at `x/L`.
    Site { x: T },
    /// Two particles at `x1/L`, `x2/L`.
    Pair { x1: T, x2: T },
}

impl<T: Real> StartSpec<T> {
    pub fn resolve(&self, spec: &LatticeSpec<T>) -> Result<Start> {
        let n = spec.n_sites();
        Ok(match *self {
            Self::Equilibrium => Start::Equilibrium,
            Self::Site { x } => Start::Fixed(one_particle_index(site_at(spec, x))),
            Self::Pair { x1, x2 } => {
                if spec.m_max() < 2 {
                    return Err(Error::InvalidScenario("pair start needs a two-particle truncation".into()));
                }
                let (a, b) = (site_at(spec, x1), site_at(spec, x2));
                Start::Fixed(pair_index(a.min(b), a.max(b), n))
            }
        })
    }
}

/// A fully specified simulation setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Scenario<T> {
    pub name: String,
    pub spec: LatticeSpec<T>,
    pub initial: InitialState<T>,
    /// Time step in units of `a`.
    pub dt: T,
    pub steps: usize,
    pub trajectories: usize,
    pub start: StartSpec<T>,
}

impl<T: Real> Scenario<T> {
    /// Exact free evolution when the theory is free, implicit midpoint otherwise.
    pub fn method(&self) -> Method {
        if self.spec.lambda() > T::zero() && self.spec.m_max() >= 2 {
            Method::ImplicitMidpoint
        } else {
            Method::ExactFree
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) {
            return Err(Error::InvalidSchedule(format!("time step must be positive, got {}", self.dt)));
        }
        self.initial.check(&self.spec)?;
        self.start.resolve(&self.spec)?;
        Ok(())
    }

    pub fn time_step(&self) -> T {
        self.dt * self.spec.spacing()
    }

    pub fn duration(&self) -> T {
        self.time_step() * T::from_usize_exact(self.steps)
    }

    /// Evolves the wave function and samples all trajectories in lock step.
    pub fn run(&self, master_seed: u64, params: JumpParams) -> Result<EnsembleOutcome<T>> {
        self.run_observed(master_seed, params, |_, _, _| {})
    }

    pub fn run_observed<F>(&self, master_seed: u64, params: JumpParams, observer: F) -> Result<EnsembleOutcome<T>>
    where
        F: FnMut(usize, &StateVector<T>, &[Option<usize>]),
    {
        self.validate()?;
        let blocks = HamiltonianBlocks::new(&self.spec)?;
        let state = self.initial.build(&self.spec)?;
        let mut prop = SpectralPropagator::new(&blocks, state, self.time_step(), self.method())?;
        let mut ens = EnsembleSpec::new(master_seed, self.trajectories, self.start.resolve(&self.spec)?);
        ens.params = params;
        ens.scenario = self.name.clone();
        run_ensemble(&mut prop, &blocks, &ens, self.steps, observer)
    }

    /// Splits the walkers into `chunks` contiguous id ranges run on the rayon
    /// pool, each with its own copy of the evolution. Walker streams depend
    /// only on the id, so the outcome does not depend on `chunks`.
    pub fn run_chunked(&self, master_seed: u64, params: JumpParams, chunks: usize) -> Result<EnsembleOutcome<T>> {
        self.validate()?;
        let blocks = HamiltonianBlocks::new(&self.spec)?;
        let state = self.initial.build(&self.spec)?;
        let start = self.start.resolve(&self.spec)?;
        let chunks = chunks.clamp(1, self.trajectories.max(1));
        let base = self.trajectories / chunks;
        let extra = self.trajectories % chunks;
        let ranges: Vec<(u64, usize)> = (0..chunks)
            .scan(0u64, |first, c| {
                let len = base + usize::from(c < extra);
                let r = (*first, len);
                *first += len as u64;
                Some(r)
            })
            .collect();
        let parts = ranges
            .into_par_iter()
            .map(|(first_id, len)| {
                let mut prop = SpectralPropagator::new(&blocks, state.clone(), self.time_step(), self.method())?;
                let mut ens = EnsembleSpec::new(master_seed, len, start);
                ens.first_id = first_id;
                ens.params = params;
                ens.scenario = self.name.clone();
                run_ensemble(&mut prop, &blocks, &ens, self.steps, |_, _, _| {})
            })
            .collect::<Result<Vec<_>>>()?;
        let mut it = parts.into_iter();
        let mut out = it.next().expect("at least one chunk");
        for p in it {
            out.trajectories.extend(p.trajectories);
            out.final_slots.extend(p.final_slots);
        }
        Ok(out)
    }

    /// Massive plane wave with a common start at `x/L = -1/2`.
    pub fn massive_plane_wave(a_mu: T, n: usize, k: i64) -> Result<Self> {
        Ok(Self {
            name: format!("massive-plane-wave-amu{a_mu}"),
            spec: LatticeSpec::free(n, a_mu)?,
            initial: InitialState::PlaneWave { k },
            dt: T::lit(0.1),
            steps: 10 * n,
            trajectories: 9,
            start: StartSpec::Site { x: T::lit(-0.5) },
        })
    }

    /// Massless plane wave with equilibrium starts.
    pub fn massless_plane_wave(n: usize, k: i64) -> Result<Self> {
        Ok(Self {
            name: format!("massless-plane-wave-k{k}"),
            spec: LatticeSpec::free(n, T::zero())?,
            initial: InitialState::PlaneWave { k },
            dt: T::lit(0.5),
            steps: 2 * n,
            trajectories: 8,
            start: StartSpec::Equilibrium,
        })
    }

    /// Two free packets at `x/L = 0.25, 0.75`, width `0.075 L`, wave numbers `+-15`.
    pub fn gaussian_pair(n: usize) -> Result<Self> {
        let x1 = T::lit(0.25);
        let x2 = T::lit(0.75);
        Ok(Self {
            name: "gaussian-pair".into(),
            spec: LatticeSpec::lattice_units(n, T::lit(0.25), T::zero())?,
            initial: InitialState::GaussianPair { x1, x2, sigma: T::lit(0.075), k1: 15, k2: -15 },
            dt: T::lit(0.1),
            steps: 10 * n,
            trajectories: 10,
            start: StartSpec::Pair { x1, x2 },
        })
    }

    /// One-particle plane wave with wave number 15 in the interacting theory,
    /// all walkers starting at `x/L = 0`.
    pub fn interacting(a2_lambda: T, n: usize) -> Result<Self> {
        Ok(Self {
            name: format!("interacting-a2lambda{a2_lambda}"),
            spec: LatticeSpec::lattice_units(n, T::lit(0.25), a2_lambda)?,
            initial: InitialState::PlaneWave { k: 15 },
            dt: T::lit(0.1),
            steps: 10 * n,
            trajectories: 10,
            start: StartSpec::Site { x: T::zero() },
        })
    }
}

fn check_table_args(n: usize, k0: i64) -> Result<()> {
    if n < 4 || n % 2 != 0 || k0 < 1 || 2 * k0 >= n as i64 {
        return Err(Error::InvalidSpec(format!("need even N >= 4 and 1 <= k0 < N/2, got N={n}, k0={k0}")));
    }
    Ok(())
}

/// Per-jump rate `max(0, -sin(2 pi k0 n / N) K(n))` of the massless plane wave.
fn massless_rate<T: Real>(n_sites: usize, k0: i64, n: i64) -> T {
    let s = unit_phase::<T>(k0 * n, n_sites).im;
    (-s * kernel_k::<T>(n_sites, n)).max(T::zero())
}

/// Mean displacement per unit time and `<dx^2> / (L dt)` for the massless plane wave.
///
/// `v = sum_n max(0, -sin(2 pi k0 n/N) K(n)) n` and
/// `var = sum_n max(0, -sin(2 pi k0 n/N) K(n)) n^2 / N`, with `n` over
/// `-N/2+1 .. N/2`.
pub fn table1_sums<T: Real>(n: usize, k0: i64) -> Result<(T, T)> {
    check_table_args(n, k0)?;
    let half = (n / 2) as i64;
    let big_n = T::from_usize_exact(n);
    let [v, var] = chunked_sums::<T, _, 2>(-half + 1..half + 1, |m| {
        let r = massless_rate::<T>(n, k0, m);
        let x = T::from_i64_exact(m);
        [r * x, r * x * x / big_n]
    });
    Ok((v, var))
}

/// Table row with `k0 = floor(sqrt(N))`.
pub fn table1_row<T: Real>(n: usize) -> Result<(i64, T, T)> {
    let k0 = n.isqrt() as i64;
    let (v, var) = table1_sums(n, k0)?;
    Ok((k0, v, var))
}

/// Horizontal axis of a jump-distance CDF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CdfMode {
    /// Distance in units of `L`.
    ByX,
    /// Distance in lattice sites.
    ByN,
}

/// Probability that a massless plane-wave particle jumps a distance `|n|` or
/// more, normalized to 1 at `n = 0`.
///
/// Evaluated at `points` log-spaced distances in `1 ..= N/2` plus `0`. The
/// returned abscissa is `n/N` or `n` depending on `mode`.
pub fn cdf_jump_distance<T: Real>(spec: &LatticeSpec<T>, k0: i64, mode: CdfMode, points: usize) -> Result<Vec<(T, T)>> {
    if spec.mu() != T::zero() {
        return Err(Error::InvalidSpec("jump-distance CDF is defined for the massless theory".into()));
    }
    let n = spec.n_sites();
    check_table_args(n, k0)?;
    let half = (n / 2) as i64;
    let [total] = chunked_sums::<T, _, 1>(-half + 1..half + 1, |m| [massless_rate::<T>(n, k0, m)]);
    let mut sample: Vec<i64> = (0..points.max(2))
        .map(|i| {
            let f = i as f64 / (points.max(2) - 1) as f64;
            ((half as f64).powf(f)).round() as i64
        })
        .collect();
    sample.dedup();
    let mut out = vec![(T::zero(), T::one())];
    // running sum of rates with 1 <= |m| < d
    let mut below = NeumaierSum::<T>::new();
    let mut d = 1i64;
    for &s in &sample {
        while d < s {
            below.add(massless_rate::<T>(n, k0, d));
            if d != half {
                below.add(massless_rate::<T>(n, k0, -d));
            }
            d += 1;
        }
        let cdf = (T::one() - below.total() / total).max(T::zero());
        let x = match mode {
            CdfMode::ByX => T::from_i64_exact(s) / T::from_usize_exact(n),
            CdfMode::ByN => T::from_i64_exact(s),
        };
        out.push((x, cdf));
    }
    Ok(out)
}

/// `sin(a p0) / (a mu)`.
pub fn nonrel_velocity<T: Real>(spec: &LatticeSpec<T>, p0: T) -> Result<T> {
    if !(spec.mu() > T::zero()) {
        return Err(Error::InvalidSpec("non-relativistic velocity needs a positive mass".into()));
    }
    Ok((spec.spacing() * p0).sin() / spec.a_mu())
}

/// Ensemble velocity statistics over one time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityStats<T> {
    pub mean: T,
    pub stddev: T,
    /// `stddev^2 * window`, a length.
    pub lambda: T,
    pub window: T,
    pub samples: usize,
}

impl<T: Real> VelocityStats<T> {
    /// Standard error of the mean.
    pub fn mean_error(&self) -> T {
        self.stddev / T::from_usize_exact(self.samples).sqrt()
    }
}

/// Unwrapped displacement of a one-particle trajectory over `(t1, t2]`.
pub fn displacement<T: Real>(traj: &Trajectory<T>, t1: T, t2: T) -> Result<T> {
    let n = traj.spec.n_sites();
    let site = |c: ConfigIndex| -> Result<usize> {
        let cfg = decode_sites(c, n, traj.spec.m_max())?;
        match cfg.sites() {
            [s] => Ok(*s),
            _ => Err(Error::UnsupportedSector(cfg.particle_count())),
        }
    };
    let mut at = site(traj.config_at(t1))?;
    let mut dx = 0i64;
    let first = traj.events.partition_point(|e| e.time <= t1);
    for e in &traj.events[first..] {
        if e.time > t2 {
            break;
        }
        let next = site(e.config)?;
        dx += traj.spec.minimal_image(at, next);
        at = next;
    }
    Ok(T::from_i64_exact(dx) * traj.spec.spacing())
}

/// Mean and spread of `dx/dt` over the window `(t1, t2]`. Needs at least two
/// one-particle trajectories covering the window.
pub fn effective_velocity<T: Real>(trajs: &[Trajectory<T>], window: (T, T)) -> Result<VelocityStats<T>> {
    let live: Vec<_> = trajs.iter().filter(|t| t.aborted.is_none()).collect();
    if live.len() < 2 {
        return Err(Error::EmptyInput("velocity statistics need at least two complete trajectories".into()));
    }
    let (t1, t2) = window;
    let span = t2 - t1;
    if !(span > T::zero()) {
        return Err(Error::InvalidSchedule("empty velocity window".into()));
    }
    let tol = T::lit(1e-9) * (t2.abs() + T::one());
    if live.iter().any(|t| t1 < t.t0 - tol || t2 > t.end_time() + tol) {
        return Err(Error::InvalidSchedule("velocity window exceeds the trajectory span".into()));
    }
    let v: Vec<T> = live.iter().map(|t| displacement(t, t1, t2).map(|d| d / span)).collect::<Result<_>>()?;
    let m = T::from_usize_exact(v.len());
    let mean = v.iter().copied().sum::<T>() / m;
    let var = v.iter().map(|x| (*x - mean) * (*x - mean)).sum::<T>() / (m - T::one());
    let stddev = var.sqrt();
    Ok(VelocityStats { mean, stddev, lambda: var * span, window: span, samples: v.len() })
}

/// Creation and pairing statistics of an interacting ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreationStats<T> {
    pub creations: usize,
    pub annihilations: usize,
    pub trajectories_with_creation: usize,
    /// Time spent at each minimal-image pair separation `0 ..= N/2`.
    pub separation_time: Vec<T>,
    pub dressed_time: T,
    pub dressed_displacement: T,
    /// `dressed_displacement / dressed_time`, if any time was spent dressed.
    pub dressed_velocity: Option<T>,
    pub split_time: T,
    /// Number of transitions from a dressed into a split pair.
    pub splits: usize,
    /// Jumps in which a particle passes over its partner.
    pub crossings: usize,
    /// Trajectories that spent any time as a split pair.
    pub split_trajectories: usize,
    /// Tracked displacement over the full span divided by the span, per trajectory.
    pub track_velocity: Vec<T>,
}

/// Segments trajectories into single, dressed (pair separation at most
/// `threshold` sites) and split pieces.
///
/// The tracked position is the particle itself in the one-particle sector and
/// the pair midpoint in the two-particle sector; displacements are minimal
/// images and a jump is charged to the segment it leaves.
pub fn creation_event_stats<T: Real>(trajs: &[Trajectory<T>], threshold: i64) -> Result<CreationStats<T>> {
    let mut st = CreationStats {
        creations: 0,
        annihilations: 0,
        trajectories_with_creation: 0,
        separation_time: Vec::new(),
        dressed_time: T::zero(),
        dressed_displacement: T::zero(),
        dressed_velocity: None,
        split_time: T::zero(),
        splits: 0,
        crossings: 0,
        split_trajectories: 0,
        track_velocity: Vec::new(),
    };
    let Some(first) = trajs.first() else {
        return Ok(st);
    };
    let n = first.spec.n_sites();
    st.separation_time = vec![T::zero(); n / 2 + 1];
    let half = T::lit(0.5);
    for traj in trajs {
        let spec = &traj.spec;
        let a = spec.spacing();
        let decode = |c: ConfigIndex| decode_sites(c, n, spec.m_max()).map(|c| c.sites().to_vec());
        let mut cur = decode(traj.initial)?;
        let mut t = traj.t0;
        let mut created = false;
        let mut split = false;
        let mut track = T::zero();
        let sep = |s: &[usize]| spec.minimal_image(s[0], s[1]);
        let end = traj.end_time();
        let seg_time = |s: &[usize], dt: T, st: &mut CreationStats<T>| {
            if s.len() == 2 {
                let d = sep(s).unsigned_abs() as usize;
                st.separation_time[d] += dt;
                if (d as i64) <= threshold {
                    st.dressed_time += dt;
                } else {
                    st.split_time += dt;
                }
            }
        };
        for e in traj.events.iter().chain(std::iter::once(&crate::jump::JumpEvent { time: end, config: ConfigIndex(u64::MAX) })) {
            seg_time(&cur, e.time - t, &mut st);
            t = e.time;
            if e.config.0 == u64::MAX {
                break;
            }
            let next = decode(e.config)?;
            let dressed = cur.len() == 2 && sep(&cur).abs() <= threshold;
            match (cur.len(), next.len()) {
                (1, 2) => {
                    st.creations += 1;
                    created = true;
                }
                (2, 1) => st.annihilations += 1,
                (2, 2) => {
                    let next_dressed = sep(&next).abs() <= threshold;
                    if dressed && !next_dressed {
                        st.splits += 1;
                    }
                    if crossed(spec, &cur, &next) {
                        st.crossings += 1;
                    }
                }
                _ => {}
            }
            split |= next.len() == 2 && sep(&next).abs() > threshold;
            let shift = track_shift(spec, &cur, &next) * a * half;
            track += shift;
            if dressed {
                st.dressed_displacement += shift;
            }
            cur = next;
        }
        if created {
            st.trajectories_with_creation += 1;
        }
        if split {
            st.split_trajectories += 1;
        }
        st.track_velocity.push(track / (end - traj.t0));
    }
    if st.dressed_time > T::zero() {
        st.dressed_velocity = Some(st.dressed_displacement / st.dressed_time);
    }
    Ok(st)
}

/// Twice the minimal-image shift of the tracked position.
fn track_shift<T: Real>(spec: &LatticeSpec<T>, from: &[usize], to: &[usize]) -> T {
    let mid2 = |s: &[usize]| -> (usize, i64) {
        // midpoint of a pair measured from its first site, doubled
        match s {
            [x] => (*x, 0),
            [x, y] => (*x, spec.minimal_image(*x, *y)),
            _ => unreachable!(),
        }
    };
    let (fa, fd) = mid2(from);
    let (ta, td) = mid2(to);
    let base = 2 * spec.minimal_image(fa, ta);
    T::from_i64_exact(wrap_separation(base + td - fd, 2 * spec.n_sites()))
}

/// True when a pair-to-pair jump moves one particle over the other.
fn crossed<T: Real>(spec: &LatticeSpec<T>, from: &[usize], to: &[usize]) -> bool {
    // identify the mover: one site is shared between the two configurations
    let (stay, src, dst) = if from[0] == to[0] {
        (from[0], from[1], to[1])
    } else if from[0] == to[1] {
        (from[0], from[1], to[0])
    } else if from[1] == to[0] {
        (from[1], from[0], to[1])
    } else {
        (from[1], from[0], to[0])
    };
    let jump = spec.minimal_image(src, dst);
    let rel = spec.minimal_image(src, stay);
    if jump == 0 || rel == 0 {
        return false;
    }
    rel.signum() == jump.signum() && rel.abs() < jump.abs()
}

/// Bohm-limit comparison for a one-particle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BohmReport {
    pub max_relative_deviation: f64,
    pub sites_checked: usize,
}

/// Mean jump velocity `sum_y T(y,x) (y - x)` per site.
pub fn jump_velocity_field<T: Real>(state: &StateVector<T>, blocks: &HamiltonianBlocks<T>) -> Result<Vec<T>> {
    let spec = blocks.spec();
    (0..spec.n_sites())
        .map(|x| {
            let row = rates_from_state(one_particle_index(x), state, blocks)?;
            Ok(row
                .targets()
                .iter()
                .filter(|t| t.0.value() as usize <= spec.n_sites())
                .map(|(c, r)| *r * T::from_i64_exact(spec.minimal_image(x, c.value() as usize - 1)) * spec.spacing())
                .sum())
        })
        .collect()
}

/// Phase gradient `S'(x)` from the central difference `arg(psi(x+a) / psi(x-a)) / 2a`.
pub fn phase_gradient<T: Real>(state: &StateVector<T>, spec: &LatticeSpec<T>) -> Vec<T> {
    let n = spec.n_sites();
    let psi = state.psi1();
    (0..n)
        .map(|x| {
            let r = psi[(x + 1) % n] * psi[(x + n - 1) % n].conj();
            r.arg() / (T::lit(2.0) * spec.spacing())
        })
        .collect()
}

/// Max relative deviation between the jump velocity field and `S'(x)/mu`
/// over sites with `|psi|^2 >= threshold * max |psi|^2`.
pub fn bohm_limit_check<T: Real>(state: &StateVector<T>, blocks: &HamiltonianBlocks<T>, threshold: f64) -> Result<BohmReport> {
    let spec = blocks.spec();
    if !(spec.mu() > T::zero()) {
        return Err(Error::InvalidSpec("Bohm limit needs a positive mass".into()));
    }
    let jump = jump_velocity_field(state, blocks)?;
    let grad = phase_gradient(state, spec);
    let dens: Vec<f64> = state.psi1().iter().map(|z| z.norm_sqr().to_f64_lossy()).collect();
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut count = 0;
    for x in 0..spec.n_sites() {
        if dens[x] < threshold * peak {
            continue;
        }
        let bohm = (grad[x] / spec.mu()).to_f64_lossy();
        let dev = (jump[x].to_f64_lossy() - bohm).abs() / bohm.abs();
        worst = worst.max(dev);
        count += 1;
    }
    Ok(BohmReport { max_relative_deviation: worst, sites_checked: count })
}
