//! Bell jump rates and the discrete-time configuration chain.
//!
//! For a snapshot `psi` the rate from `c` to `c'` is
//! `T = max(0, 2 Im(psi*_c' H_c'c psi_c)) / |psi_c|^2`. The chain advances on
//! the evolution clock: during a step of length `dt` the rates are frozen at
//! the snapshot taken at the start of the step, and a step whose total jump
//! probability exceeds the cap is split into halves.

use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Propagator, StateVector};
use crate::fock::{decode_sites, one_particle_index, pair_index, pair_rank, ConfigIndex, Configuration};
use crate::hamiltonian::HamiltonianBlocks;
use crate::lattice::LatticeSpec;
use crate::scalar::Real;

pub const DEFAULT_P_CAP: f64 = 0.1;

/// Chain parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpParams {
    /// Largest allowed `dt * total rate` in one (sub)step.
    pub p_cap: f64,
    /// Substeps may shrink to `dt / 2^max_halvings`.
    pub max_halvings: u32,
    /// Node floor relative to the mean `|psi_c|^2` per configuration.
    pub node_epsilon: f64,
}

impl Default for JumpParams {
    fn default() -> Self {
        Self { p_cap: DEFAULT_P_CAP, max_halvings: 10, node_epsilon: 1e-12 }
    }
}

/// Outgoing rates of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow<T> {
    source: ConfigIndex,
    targets: Vec<(ConfigIndex, T)>,
    cumulative: Vec<T>,
}

impl<T: Real> RateRow<T> {
    /// Builds a row from `(target, rate)` pairs; zero rates are dropped.
    pub fn new(source: ConfigIndex, targets: Vec<(ConfigIndex, T)>) -> Self {
        let targets: Vec<_> = targets.into_iter().filter(|t| t.1 > T::zero()).collect();
        let mut acc = T::zero();
        let cumulative = targets
            .iter()
            .map(|t| {
                acc += t.1;
                acc
            })
            .collect();
        Self { source, targets, cumulative }
    }

    pub fn source(&self) -> ConfigIndex {
        self.source
    }

    pub fn targets(&self) -> &[(ConfigIndex, T)] {
        &self.targets
    }

    pub fn total_rate(&self) -> T {
        self.cumulative.last().copied().unwrap_or_else(T::zero)
    }

    pub fn stay_probability(&self, dt: T) -> T {
        T::one() - dt * self.total_rate()
    }

    pub fn rate_to(&self, target: ConfigIndex) -> T {
        self.targets.iter().find(|t| t.0 == target).map(|t| t.1).unwrap_or_else(T::zero)
    }

    /// Target whose cumulative interval contains `x` in `[0, total)`.
    fn pick(&self, x: T) -> ConfigIndex {
        let i = self.cumulative.partition_point(|&c| c <= x);
        self.targets[i.min(self.targets.len() - 1)].0
    }
}

/// Dense slot numbering of the one- and two-particle configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotMap {
    n: usize,
    pairs: bool,
}

impl SlotMap {
    pub fn new(n: usize, pairs: bool) -> Self {
        Self { n, pairs }
    }

    pub fn len(&self) -> usize {
        self.n + if self.pairs { self.n * (self.n + 1) / 2 } else { 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slot(&self, c: ConfigIndex) -> Result<usize> {
        let n = self.n as u64;
        let v = c.0;
        if v >= 1 && v <= n {
            return Ok((v - 1) as usize);
        }
        if self.pairs && v > n {
            let r = v - 1 - n;
            let (i, j) = ((r % n) as usize, (r / n) as usize);
            if i <= j && j < self.n {
                return Ok(self.n + pair_rank(i, j, self.n));
            }
        }
        Err(Error::MalformedIndex(v))
    }

    pub fn index(&self, slot: usize) -> ConfigIndex {
        if slot < self.n {
            one_particle_index(slot)
        } else {
            let (i, j) = crate::fock::pair_unrank(slot - self.n, self.n);
            pair_index(i, j, self.n)
        }
    }
}

/// `2 Im(conj(target) * h * source)`.
#[inline]
fn flux<T: Real>(target: Complex<T>, h: T, source: Complex<T>) -> T {
    T::lit(2.0) * h * (target.re * source.im - target.im * source.re)
}

/// Node floor `eps * |Psi|^2 / dim` for a snapshot.
pub fn node_floor<T: Real>(snapshot: &StateVector<T>, params: &JumpParams) -> T {
    let dim = T::from_usize_exact(snapshot.dimension());
    T::lit(params.node_epsilon) * snapshot.norm_sqr() / dim
}

/// Rates out of configuration `c` for the given snapshot.
pub fn rates_from_state<T: Real>(
    c: ConfigIndex,
    snapshot: &StateVector<T>,
    blocks: &HamiltonianBlocks<T>,
) -> Result<RateRow<T>> {
    let floor = node_floor(snapshot, &JumpParams::default());
    rates_with_floor(c, snapshot, blocks, floor)
}

pub fn rates_with_floor<T: Real>(
    c: ConfigIndex,
    snapshot: &StateVector<T>,
    blocks: &HamiltonianBlocks<T>,
    floor: T,
) -> Result<RateRow<T>> {
    let n = blocks.n_sites();
    let cfg = decode_sites(c, n, blocks.spec().m_max())?;
    let src = snapshot.amplitude(&cfg);
    let p = src.norm_sqr();
    if !(p > floor) {
        return Err(Error::Node { config: c.0, probability: p.to_f64_lossy(), time: snapshot.time().to_f64_lossy() });
    }
    let inv = p.recip();
    let interacting = blocks.is_interacting() && snapshot.has_pairs();
    let mut targets = Vec::new();
    match *cfg.sites() {
        [m] => {
            for y in 0..n {
                if y != m {
                    let h = blocks.hop(y as i64 - m as i64);
                    targets.push((one_particle_index(y), flux(snapshot.psi1()[y], h, src) * inv));
                }
            }
            if interacting {
                creation_targets(m, src, inv, snapshot, blocks, &mut targets)?;
            }
        }
        [i, j] => {
            let r2 = T::SQRT_2();
            if i == j {
                for a in 0..n {
                    if a != i {
                        let h = r2 * blocks.hop(a as i64 - i as i64);
                        let (lo, hi) = (a.min(i), a.max(i));
                        targets.push((pair_index(lo, hi, n), flux(snapshot.pair_amplitude(lo, hi), h, src) * inv));
                    }
                }
            } else {
                // move the particle at i (partner j stays), then the one at j
                for (mover, stay) in [(i, j), (j, i)] {
                    for a in 0..n {
                        if a == mover {
                            continue;
                        }
                        let mut h = blocks.hop(a as i64 - mover as i64);
                        if a == stay {
                            h = h * r2;
                        }
                        let (lo, hi) = (a.min(stay), a.max(stay));
                        targets.push((pair_index(lo, hi, n), flux(snapshot.pair_amplitude(lo, hi), h, src) * inv));
                    }
                }
            }
            if interacting {
                let t3 = blocks.creation_tensor()?;
                let norm = if i == j { T::SQRT_2().recip() } else { T::one() };
                let pre = T::lit(2.0) * blocks.coupling() * norm;
                for m in 0..n {
                    let h = pre * t3[((i + n - m) % n) * n + (j + n - m) % n];
                    targets.push((one_particle_index(m), flux(snapshot.psi1()[m], h, src) * inv));
                }
            }
        }
        _ => return Err(Error::UnsupportedSector(cfg.particle_count())),
    }
    Ok(RateRow::new(c, targets))
}

fn creation_targets<T: Real>(
    m: usize,
    src: Complex<T>,
    inv: T,
    snapshot: &StateVector<T>,
    blocks: &HamiltonianBlocks<T>,
    targets: &mut Vec<(ConfigIndex, T)>,
) -> Result<()> {
    let n = blocks.n_sites();
    let t3 = blocks.creation_tensor()?;
    let two = T::lit(2.0);
    // rate = 2 h Im(conj(target) source) / |source|^2 with h = 2 g N_ij T3
    let pre = two * two * blocks.coupling() * inv;
    let (sr, si) = (src.re, src.im);
    let psi2 = snapshot.psi2();
    for i in 0..n {
        let di = (i + n - m) % n;
        let row = &t3[di * n..(di + 1) * n];
        let phi_row = &psi2[i * n..(i + 1) * n];
        // diagonal (i, i): amplitude phi_ii, element sqrt(2)^-1 2 g T3
        let z = phi_row[i];
        let r = pre * T::SQRT_2().recip() * row[di] * (z.re * si - z.im * sr);
        if r > T::zero() {
            targets.push((pair_index(i, i, n), r));
        }
        // off-diagonal: amplitude sqrt(2) phi_ij, element 2 g T3
        let off = pre * T::SQRT_2();
        let mut push = |j: usize, t: T| {
            let z = phi_row[j];
            let r = off * t * (z.re * si - z.im * sr);
            if r > T::zero() {
                targets.push((pair_index(i, j, n), r));
            }
        };
        if m <= i {
            for j in i + 1..n {
                push(j, row[j - m]);
            }
        } else {
            for j in i + 1..m {
                push(j, row[j + n - m]);
            }
            for j in m.max(i + 1)..n {
                push(j, row[j - m]);
            }
        }
    }
    Ok(())
}

/// One draw of the chain with the default cap.
pub fn sample_step<T: Real, R: Rng + ?Sized>(row: &RateRow<T>, dt: T, rng: &mut R) -> Result<ConfigIndex> {
    sample_step_capped(row, dt, DEFAULT_P_CAP, rng)
}

/// Returns a target with probability `rate * dt`, otherwise the source.
pub fn sample_step_capped<T: Real, R: Rng + ?Sized>(
    row: &RateRow<T>,
    dt: T,
    p_cap: f64,
    rng: &mut R,
) -> Result<ConfigIndex> {
    let p = (dt * row.total_rate()).to_f64_lossy();
    if p > p_cap {
        return Err(Error::SubstepRequired { probability: p });
    }
    let u: f64 = rng.random();
    if u < p {
        Ok(row.pick(T::lit(u) / dt))
    } else {
        Ok(row.source)
    }
}

/// Independent stream for trajectory `id` under `master_seed`.
pub fn trajectory_rng(master_seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(id);
    rng
}

/// One retained jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent<T> {
    pub time: T,
    pub config: ConfigIndex,
}

/// A sampled configuration path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct Trajectory<T> {
    pub id: u64,
    pub seed: u64,
    pub scenario: String,
    pub spec: LatticeSpec<T>,
    pub t0: T,
    pub dt: T,
    /// Grid steps actually completed.
    pub steps: usize,
    pub initial: ConfigIndex,
    pub events: Vec<JumpEvent<T>>,
    /// Diagnostic when the sampler stopped early.
    pub aborted: Option<String>,
}

impl<T: Real> Trajectory<T> {
    pub fn final_config(&self) -> ConfigIndex {
        self.events.last().map(|e| e.config).unwrap_or(self.initial)
    }

    pub fn end_time(&self) -> T {
        self.t0 + self.dt * T::from_usize_exact(self.steps)
    }

    /// Configuration occupied at time `t`.
    pub fn config_at(&self, t: T) -> ConfigIndex {
        let i = self.events.partition_point(|e| e.time <= t);
        if i == 0 {
            self.initial
        } else {
            self.events[i - 1].config
        }
    }

    pub fn decoded(&self, c: ConfigIndex) -> Result<Configuration> {
        decode_sites(c, self.spec.n_sites(), self.spec.m_max())
    }
}

/// How walkers pick their first configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Start {
    /// Draw from `|psi_c|^2` of the initial snapshot.
    Equilibrium,
    /// Common start for every walker.
    Fixed(ConfigIndex),
}

/// Parameters of an ensemble run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub master_seed: u64,
    pub n_walkers: usize,
    pub first_id: u64,
    pub start: Start,
    pub record_events: bool,
    pub params: JumpParams,
    pub scenario: String,
}

impl EnsembleSpec {
    pub fn new(master_seed: u64, n_walkers: usize, start: Start) -> Self {
        Self {
            master_seed,
            n_walkers,
            first_id: 0,
            start,
            record_events: true,
            params: JumpParams::default(),
            scenario: String::new(),
        }
    }
}

/// Result of an ensemble run, ordered by trajectory id.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome<T> {
    pub trajectories: Vec<Trajectory<T>>,
    /// Final dense slot of each walker, `None` when aborted.
    pub final_slots: Vec<Option<usize>>,
    pub slots: SlotMap,
}

impl<T> EnsembleOutcome<T> {
    pub fn aborted(&self) -> usize {
        self.final_slots.iter().filter(|s| s.is_none()).count()
    }
}

struct Walker<T> {
    rng: ChaCha8Rng,
    slot: usize,
    alive: bool,
    steps: usize,
    events: Vec<JumpEvent<T>>,
    abort: Option<String>,
}

/// Per-step cache of rate rows indexed by dense slot.
struct RowCache<T> {
    rows: Vec<Option<Arc<RateRow<T>>>>,
    touched: Vec<usize>,
}

impl<T: Real> RowCache<T> {
    fn new(len: usize) -> Self {
        Self { rows: vec![None; len], touched: Vec::new() }
    }

    fn clear(&mut self) {
        for s in self.touched.drain(..) {
            self.rows[s] = None;
        }
    }

    fn get(
        &mut self,
        slot: usize,
        slots: &SlotMap,
        snapshot: &StateVector<T>,
        blocks: &HamiltonianBlocks<T>,
        floor: T,
    ) -> Result<Arc<RateRow<T>>> {
        if let Some(r) = &self.rows[slot] {
            return Ok(r.clone());
        }
        let row = Arc::new(rates_with_floor(slots.index(slot), snapshot, blocks, floor)?);
        self.rows[slot] = Some(row.clone());
        self.touched.push(slot);
        Ok(row)
    }
}

/// Advances one walker across `[t, t + dt)` with frozen rates, halving the
/// step while `dt * total rate` exceeds the cap.
#[allow(clippy::too_many_arguments)]
fn advance<T: Real>(
    w: &mut Walker<T>,
    t: T,
    dt: T,
    depth: u32,
    cache: &mut RowCache<T>,
    slots: &SlotMap,
    snapshot: &StateVector<T>,
    blocks: &HamiltonianBlocks<T>,
    floor: T,
    params: &JumpParams,
    record: bool,
) -> Result<()> {
    let row = cache.get(w.slot, slots, snapshot, blocks, floor)?;
    let p = (dt * row.total_rate()).to_f64_lossy();
    if p > params.p_cap {
        if depth >= params.max_halvings {
            return Err(Error::SubstepExhausted { config: row.source().0, time: t.to_f64_lossy(), probability: p });
        }
        let half = dt * T::lit(0.5);
        advance(w, t, half, depth + 1, cache, slots, snapshot, blocks, floor, params, record)?;
        return advance(w, t + half, half, depth + 1, cache, slots, snapshot, blocks, floor, params, record);
    }
    let next = sample_step_capped(&row, dt, params.p_cap, &mut w.rng)?;
    if next != row.source() {
        w.slot = slots.slot(next)?;
        if record {
            w.events.push(JumpEvent { time: t + dt, config: next });
        }
    }
    Ok(())
}

/// Draws a slot from `|psi_c|^2`.
fn sample_equilibrium<R: Rng>(cumulative: &[f64], rng: &mut R) -> usize {
    let total = *cumulative.last().expect("non-empty state");
    let x = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= x).min(cumulative.len() - 1)
}

fn slot_cumulative<T: Real>(snapshot: &StateVector<T>) -> Vec<f64> {
    let mut acc = 0.0;
    snapshot
        .configuration_probabilities()
        .into_iter()
        .map(|(_, p)| {
            acc += p.to_f64_lossy();
            acc
        })
        .collect()
}

/// Runs an ensemble of walkers in lock step with the wave-function evolution.
///
/// `observer` sees the snapshot and each walker's slot (`None` when aborted)
/// after every grid step, including step 0.
pub fn run_ensemble<T, P, F>(
    prop: &mut P,
    blocks: &HamiltonianBlocks<T>,
    ens: &EnsembleSpec,
    steps: usize,
    mut observer: F,
) -> Result<EnsembleOutcome<T>>
where
    T: Real,
    P: Propagator<T>,
    F: FnMut(usize, &StateVector<T>, &[Option<usize>]),
{
    let spec = *blocks.spec();
    let slots = SlotMap::new(spec.n_sites(), prop.state().has_pairs());
    let dt = prop.dt();
    let t0 = prop.state().time();
    let cumulative = match ens.start {
        Start::Equilibrium => Some(slot_cumulative(prop.state())),
        Start::Fixed(_) => None,
    };
    let mut walkers: Vec<Walker<T>> = (0..ens.n_walkers as u64)
        .map(|k| {
            let id = ens.first_id + k;
            let mut rng = trajectory_rng(ens.master_seed, id);
            let slot = match (&ens.start, &cumulative) {
                (Start::Fixed(c), _) => slots.slot(*c),
                (Start::Equilibrium, Some(cum)) => Ok(sample_equilibrium(cum, &mut rng)),
                _ => unreachable!(),
            }?;
            Ok(Walker { rng, slot, alive: true, steps: 0, events: Vec::new(), abort: None })
        })
        .collect::<Result<_>>()?;
    let initial: Vec<ConfigIndex> = walkers.iter().map(|w| slots.index(w.slot)).collect();
    let mut cache = RowCache::new(slots.len());
    let mut current: Vec<Option<usize>> = walkers.iter().map(|w| Some(w.slot)).collect();
    observer(0, prop.state(), &current);
    for step in 0..steps {
        let snapshot = prop.state();
        let floor = node_floor(snapshot, &ens.params);
        let t = t0 + dt * T::from_usize_exact(step);
        for w in walkers.iter_mut().filter(|w| w.alive) {
            match advance(w, t, dt, 0, &mut cache, &slots, snapshot, blocks, floor, &ens.params, ens.record_events) {
                Ok(()) => w.steps += 1,
                Err(e) => {
                    w.alive = false;
                    w.abort = Some(e.to_string());
                }
            }
        }
        if !prop.is_stationary() {
            cache.clear();
        }
        prop.step()?;
        for (c, w) in current.iter_mut().zip(&walkers) {
            *c = if w.alive { Some(w.slot) } else { None };
        }
        observer(step + 1, prop.state(), &current);
    }
    let final_slots = current;
    let trajectories = walkers
        .into_iter()
        .zip(initial)
        .enumerate()
        .map(|(k, (w, initial))| Trajectory {
            id: ens.first_id + k as u64,
            seed: ens.master_seed,
            scenario: ens.scenario.clone(),
            spec,
            t0,
            dt,
            steps: w.steps,
            initial,
            events: w.events,
            aborted: w.abort,
        })
        .collect();
    Ok(EnsembleOutcome { trajectories, final_slots, slots })
}

/// Samples a single trajectory; a node or substep failure is returned as an error.
pub fn run_trajectory<T: Real, P: Propagator<T>>(
    prop: &mut P,
    blocks: &HamiltonianBlocks<T>,
    start: Start,
    steps: usize,
    master_seed: u64,
    id: u64,
    params: JumpParams,
) -> Result<Trajectory<T>> {
    let mut ens = EnsembleSpec::new(master_seed, 1, start);
    ens.first_id = id;
    ens.params = params;
    let mut out = run_ensemble(prop, blocks, &ens, steps, |_, _, _| {})?;
    let traj = out.trajectories.pop().expect("one walker");
    if let Some(msg) = &traj.aborted {
        return Err(reconstruct_abort(msg, &traj));
    }
    Ok(traj)
}

fn reconstruct_abort<T: Real>(msg: &str, traj: &Trajectory<T>) -> Error {
    Error::InvalidScenario(format!(
        "trajectory {} aborted at t = {} in configuration {}: {msg}",
        traj.id,
        traj.end_time(),
        traj.final_config()
    ))
}

/// Total-variation distance between walker counts and a probability vector.
pub fn total_variation(counts: &[usize], probabilities: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    let z: f64 = probabilities.iter().sum();
    0.5 * counts
        .iter()
        .zip(probabilities)
        .map(|(&c, &p)| (c as f64 / n as f64 - p / z).abs())
        .sum::<f64>()
}

/// Expected total-variation distance of an `n`-sample multinomial draw,
/// `(1/2) sum_c sqrt(2 p_c (1 - p_c) / (pi n))` to leading order.
pub fn multinomial_tv_noise(probabilities: &[f64], n: usize) -> f64 {
    let z: f64 = probabilities.iter().sum();
    0.5 * probabilities
        .iter()
        .map(|&p| {
            let p = p / z;
            (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n as f64)).sqrt()
        })
        .sum::<f64>()
}

/// Outcome of an equivariance run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub walkers: usize,
    pub aborted: usize,
    pub steps: usize,
    pub tv_distance: f64,
    /// TV distance expected from sampling noise alone.
    pub noise_floor: f64,
    pub empirical_sectors: (f64, f64),
    pub quantum_sectors: (f64, f64),
}

/// Evolves `n_walkers` equilibrium walkers jointly with the wave function and
/// compares their final histogram with `|psi_c(t)|^2`.
pub fn ensemble_equivariance_check<T: Real, P: Propagator<T>>(
    prop: &mut P,
    blocks: &HamiltonianBlocks<T>,
    n_walkers: usize,
    steps: usize,
    master_seed: u64,
    params: JumpParams,
) -> Result<EquivarianceReport> {
    let mut ens = EnsembleSpec::new(master_seed, n_walkers, Start::Equilibrium);
    ens.record_events = false;
    ens.params = params;
    let out = run_ensemble(prop, blocks, &ens, steps, |_, _, _| {})?;
    let final_state = prop.state();
    let probs: Vec<f64> =
        final_state.configuration_probabilities().iter().map(|(_, p)| p.to_f64_lossy()).collect();
    let mut counts = vec![0usize; out.slots.len()];
    for s in out.final_slots.iter().flatten() {
        counts[*s] += 1;
    }
    let alive: usize = counts.iter().sum();
    let n1 = final_state.n_sites();
    let emp1 = counts[..n1].iter().sum::<usize>() as f64 / alive.max(1) as f64;
    let z: f64 = probs.iter().sum();
    let q1 = probs[..n1].iter().sum::<f64>() / z;
    Ok(EquivarianceReport {
        walkers: n_walkers,
        aborted: out.aborted(),
        steps,
        tv_distance: total_variation(&counts, &probs),
        noise_floor: multinomial_tv_noise(&probs, alive.max(1)),
        empirical_sectors: (emp1, 1.0 - emp1),
        quantum_sectors: (q1, 1.0 - q1),
    })
}
