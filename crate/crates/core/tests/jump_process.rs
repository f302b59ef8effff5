mod common;

use bellfield::evolution::{Method, SpectralPropagator, StateVector};
use bellfield::experiments::{InitialState, Scenario, StartSpec};
use bellfield::fock::{encode, one_particle_index, pair_index};
use bellfield::hamiltonian::HamiltonianBlocks;
use bellfield::jump::{
    ensemble_equivariance_check, rates_from_state, run_ensemble, EnsembleSpec, JumpParams, RateRow, Start,
};
use bellfield::{ConfigIndex, LatticeSpec};
use common::*;
use num_complex::Complex64 as C;
use proptest::prelude::*;
use std::collections::HashMap;

fn row_map(row: &RateRow<f64>) -> HashMap<ConfigIndex, f64> {
    row.targets().iter().copied().collect()
}

/// `max(0, 2 Im(conj(psi_t) H_ts psi_s)) / |psi_s|^2` from the dense matrix.
fn dense_rates(spec: &LatticeSpec<f64>, state: &StateVector<f64>) -> Vec<Vec<f64>> {
    let h = dense_hamiltonian(spec);
    let v = to_c(state);
    let d = v.len();
    let mut out = vec![vec![0.0; d]; d];
    for s in 0..d {
        for t in 0..d {
            if s != t {
                let j = 2.0 * (v[t].conj() * h[(t, s)] * v[s]).im;
                out[s][t] = j.max(0.0) / v[s].norm_sqr();
            }
        }
    }
    out
}

#[test]
fn rates_match_dense_flux() {
    for (n, amu, l) in [(6, 0.5, 0.0), (6, 0.5, 0.7), (8, 1.0, 1.5)] {
        let spec = LatticeSpec::lattice_units(n, amu, l).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let state = random_state(&spec, 21);
        let want = dense_rates(&spec, &state);
        let b = basis(n, true);
        let idx: Vec<ConfigIndex> = b.iter().map(|c| encode(c, &spec).unwrap()).collect();
        for (s, cs) in idx.iter().enumerate() {
            let got = row_map(&rates_from_state(*cs, &state, &blocks).unwrap());
            for (t, ct) in idx.iter().enumerate() {
                let g = got.get(ct).copied().unwrap_or(0.0);
                assert!((g - want[s][t]).abs() < 1e-10 * (1.0 + want[s][t]), "N={n} {} -> {}: {g} vs {}", b[s], b[t], want[s][t]);
            }
        }
    }
}

#[test]
fn massless_plane_wave_rates_closed_form() {
    let n = 128;
    let k0 = 7;
    let spec = LatticeSpec::free(n, 0.0).unwrap().with_m_max(1).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let state = InitialState::PlaneWave { k: k0 }.build(&spec).unwrap();
    let p0 = 2.0 * std::f64::consts::PI * k0 as f64 / spec.length();
    for x in [0usize, 17, 64, 127] {
        let row = row_map(&rates_from_state(one_particle_index(x), &state, &blocks).unwrap());
        for y in 0..n {
            if y == x {
                continue;
            }
            let d = spec.minimal_image(x, y);
            let want = (-(p0 * d as f64).sin() * direct_k(n, d)).max(0.0);
            let got = row.get(&one_particle_index(y)).copied().unwrap_or(0.0);
            assert!((got - want).abs() < 1e-12, "x={x} y={y}: {got} vs {want}");
        }
    }
}

#[test]
fn counter_propagating_pair_is_frozen() {
    // N = 2 mod 4 keeps the standing wave free of exact nodes
    let spec = LatticeSpec::lattice_units(62, 0.25, 0.0).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let state = InitialState::TwoMomentum { k1: 5, k2: -5 }.build(&spec).unwrap();
    let mut rows = 0;
    for i in 0..62 {
        for j in i..62 {
            let c = pair_index(i, j, 62);
            let row = rates_from_state(c, &state, &blocks).unwrap();
            assert!(row.targets().is_empty(), "({i},{j}) has {:?}", row.targets());
            rows += 1;
        }
    }
    assert_eq!(rows, 62 * 63 / 2);
}

#[test]
fn equilibrium_start_follows_born_rule() {
    let spec = LatticeSpec::lattice_units(8, 0.5, 0.5).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let state = random_state(&spec, 31);
    let probs: Vec<f64> = state.configuration_probabilities().iter().map(|(_, p)| *p).collect();
    let mut prop = SpectralPropagator::new(&blocks, state, 0.1, Method::ImplicitMidpoint).unwrap();
    let mut ens = EnsembleSpec::new(5, 100_000, Start::Equilibrium);
    ens.record_events = false;
    let out = run_ensemble(&mut prop, &blocks, &ens, 0, |_, _, _| {}).unwrap();
    let mut counts = vec![0usize; probs.len()];
    out.final_slots.iter().flatten().for_each(|s| counts[*s] += 1);
    let tv = bellfield::jump::total_variation(&counts, &probs);
    let noise = bellfield::jump::multinomial_tv_noise(&probs, 100_000);
    assert!(tv < 1.5 * noise, "{tv} vs {noise}");
}

#[test]
fn small_interacting_system_is_equivariant() {
    let spec = LatticeSpec::lattice_units(8, 0.5, 1.0).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let state = InitialState::GaussianPacket { x0: 0.0, sigma: 0.2, k: 1 }.build(&spec).unwrap();
    let mut prop = SpectralPropagator::new(&blocks, state, 0.05, Method::ImplicitMidpoint).unwrap();
    let r = ensemble_equivariance_check(&mut prop, &blocks, 40_000, 200, 3, JumpParams::default()).unwrap();
    assert_eq!(r.aborted, 0);
    assert!(r.quantum_sectors.1 > 0.01, "{r:?}");
    assert!(r.tv_distance < 2.0 * r.noise_floor, "{r:?}");
    assert!((r.empirical_sectors.1 - r.quantum_sectors.1).abs() < 0.01, "{r:?}");
}

#[test]
fn free_ensemble_stays_in_one_particle_sector() {
    let spec = LatticeSpec::lattice_units(32, 0.25, 0.0).unwrap();
    let sc = Scenario {
        name: "free".into(),
        spec,
        initial: InitialState::GaussianPacket { x0: 0.0, sigma: 0.1, k: 4 },
        dt: 0.1,
        steps: 500,
        trajectories: 200,
        start: StartSpec::Equilibrium,
    };
    let out = sc.run(9, JumpParams::default()).unwrap();
    for t in &out.trajectories {
        assert!(t.aborted.is_none());
        for e in &t.events {
            assert_eq!(t.decoded(e.config).unwrap().particle_count(), 1);
        }
    }
}

#[test]
fn chunked_runs_are_bit_identical() {
    let sc = Scenario::<f64>::massive_plane_wave(0.5, 120, 3).unwrap();
    let sc = Scenario { trajectories: 13, steps: 300, ..sc };
    let one = sc.run(77, JumpParams::default()).unwrap();
    let four = sc.run_chunked(77, JumpParams::default(), 4).unwrap();
    assert_eq!(one.trajectories, four.trajectories);
    assert_eq!(one.final_slots, four.final_slots);
    let other = sc.run(78, JumpParams::default()).unwrap();
    assert_ne!(one.trajectories, other.trajectories);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rates_are_nonnegative_and_one_directional(seed in 0u64..100_000, half in 2usize..6, l in 0.0f64..2.0) {
        let n = 2 * half;
        let spec = LatticeSpec::lattice_units(n, 0.5, l).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let state = random_state(&spec, seed);
        let idx: Vec<ConfigIndex> = basis(n, true).iter().map(|c| encode(c, &spec).unwrap()).collect();
        let rows: HashMap<ConfigIndex, HashMap<ConfigIndex, f64>> = idx
            .iter()
            .map(|c| (*c, row_map(&rates_from_state(*c, &state, &blocks).unwrap())))
            .collect();
        for (s, row) in &rows {
            for (t, r) in row {
                prop_assert!(*r > 0.0);
                let back = rows[t].get(s).copied().unwrap_or(0.0);
                prop_assert_eq!(back, 0.0);
            }
        }
    }

    #[test]
    fn trajectory_events_are_well_formed(seed in 0u64..1000) {
        let spec = LatticeSpec::lattice_units(16, 0.5, 0.5).unwrap();
        let sc = Scenario {
            name: "prop".into(),
            spec,
            initial: InitialState::GaussianPacket { x0: 0.0, sigma: 0.15, k: 2 },
            dt: 0.1,
            steps: 100,
            trajectories: 4,
            start: StartSpec::Equilibrium,
        };
        let out = sc.run(seed, JumpParams::default()).unwrap();
        for t in &out.trajectories {
            let mut prev = (t.t0, t.initial);
            for e in &t.events {
                prop_assert!(e.time > prev.0);
                prop_assert_ne!(e.config, prev.1);
                prev = (e.time, e.config);
            }
            prop_assert!(prev.0 <= t.end_time() + 1e-12);
        }
    }

    #[test]
    fn rates_scale_out_global_phase(seed in 0u64..1000, phase in 0.0f64..6.3) {
        let spec = LatticeSpec::lattice_units(6, 0.5, 0.8).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let s = random_state(&spec, seed);
        let rotated = from_c(&spec, &(to_c(&s) * C::from_polar(2.0, phase)));
        for c in [one_particle_index(2), pair_index(1, 4, 6), pair_index(3, 3, 6)] {
            let a = rates_from_state(c, &s, &blocks).unwrap();
            let b = rates_from_state(c, &rotated, &blocks).unwrap();
            prop_assert_eq!(a.targets().len(), b.targets().len());
            for ((ca, ra), (cb, rb)) in a.targets().iter().zip(b.targets()) {
                prop_assert_eq!(ca, cb);
                prop_assert!((ra - rb).abs() < 1e-10 * (1.0 + ra.abs()));
            }
        }
    }
}
