mod common;

use bellfield::evolution::{
    energy_expectation, evolve_free_exact, sector_probabilities, step_implicit_midpoint, Method, Propagator,
    SpectralPropagator, StateVector,
};
use bellfield::experiments::InitialState;
use bellfield::hamiltonian::HamiltonianBlocks;
use bellfield::LatticeSpec;
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn distance(a: &StateVector<f64>, b: &StateVector<f64>) -> f64 {
    norm_diff(&to_c(a), &to_c(b))
}

fn shifted(spec: &LatticeSpec<f64>) -> (DMatrix<f64>, f64) {
    let h = dense_hamiltonian(spec);
    let e0 = vacuum_energy(spec);
    let d = h.nrows();
    (h - DMatrix::identity(d, d) * e0, e0)
}

#[test]
fn midpoint_matches_dense_cayley() {
    let spec = LatticeSpec::lattice_units(6, 0.5, 0.8).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let (h, e0) = shifted(&spec);
    let dt = 0.01;
    let start = random_state(&spec, 5);
    let mut v = to_c(&start);
    let mut prop = SpectralPropagator::new(&blocks, start, dt, Method::ImplicitMidpoint).unwrap();
    for _ in 0..100 {
        v = cayley_apply(&h, &v, dt) * C::from_polar(1.0, -e0 * dt);
        prop.step().unwrap();
    }
    let err = norm_diff(&to_c(prop.state()), &v);
    assert!(err < 1e-10, "{err}");
}

#[test]
fn midpoint_tracks_dense_exponential_within_cayley_bound() {
    let spec = LatticeSpec::lattice_units(6, 0.5, 0.8).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let (h, _) = shifted(&spec);
    let hnorm = h.symmetric_eigenvalues().amax();
    let dt = 0.01;
    let steps = 100;
    let start = random_state(&spec, 6);
    let exact = expm_apply(&dense_hamiltonian(&spec), &to_c(&start), dt * steps as f64);
    let mut prop = SpectralPropagator::new(&blocks, start, dt, Method::ImplicitMidpoint).unwrap();
    for _ in 0..steps {
        prop.step().unwrap();
    }
    let err = norm_diff(&to_c(prop.state()), &exact);
    let bound = steps as f64 * (hnorm * dt).powi(3) / 12.0;
    assert!(err <= bound * 1.01, "{err} > {bound}");
    assert!(err > 0.0);
}

#[test]
fn midpoint_global_error_is_second_order() {
    let spec = LatticeSpec::free(32, 0.5).unwrap().with_m_max(1).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let start = InitialState::GaussianPacket { x0: 0.0, sigma: 0.1, k: 3 }.build(&spec).unwrap();
    let t_end = 4.0;
    let exact = evolve_free_exact(&start, t_end, &blocks).unwrap();
    let mut errs = Vec::new();
    for steps in [20usize, 40, 80, 160] {
        let dt = t_end / steps as f64;
        let mut prop = SpectralPropagator::new(&blocks, start.clone(), dt, Method::ImplicitMidpoint).unwrap();
        for _ in 0..steps {
            prop.step().unwrap();
        }
        errs.push(distance(prop.state(), &exact));
    }
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((slope - 2.0).abs() < 0.1, "slope {slope} from {errs:?}");
    }
}

#[test]
fn long_run_unitarity_and_energy() {
    let spec = LatticeSpec::lattice_units(64, 0.5, 0.5).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let start = random_state(&spec, 64);
    let e_start = energy_expectation(&start, &blocks).unwrap().re;
    let mut prop = SpectralPropagator::new(&blocks, start, 0.1, Method::ImplicitMidpoint).unwrap();
    for _ in 0..1000 {
        prop.step().unwrap();
    }
    let s = prop.state();
    assert!((s.norm_sqr() - 1.0).abs() < 1e-8, "norm {}", s.norm_sqr());
    let e_end = energy_expectation(s, &blocks).unwrap().re;
    assert!(((e_end - e_start) / e_start).abs() < 1e-6, "{e_start} -> {e_end}");
    assert!(s.symmetry_deviation() < 1e-10);
}

#[test]
fn free_midpoint_never_populates_pairs() {
    let spec = LatticeSpec::lattice_units(32, 0.25, 0.0).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let start = InitialState::GaussianPacket { x0: 0.2, sigma: 0.1, k: 4 }.build(&spec).unwrap();
    assert_eq!(sector_probabilities(&start).1, 0.0);
    let mut prop = SpectralPropagator::new(&blocks, start, 0.1, Method::ImplicitMidpoint).unwrap();
    for _ in 0..200 {
        prop.step().unwrap();
        assert_eq!(sector_probabilities(prop.state()).1, 0.0);
    }
}

#[test]
fn interaction_creates_pairs() {
    let spec = LatticeSpec::lattice_units(32, 0.25, 0.5).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let start = InitialState::GaussianPacket { x0: 0.0, sigma: 0.1, k: 2 }.build(&spec).unwrap();
    let mut prop = SpectralPropagator::new(&blocks, start, 0.1, Method::ImplicitMidpoint).unwrap();
    for _ in 0..20 {
        prop.step().unwrap();
    }
    assert!(sector_probabilities(prop.state()).1 > 1e-3);
}

#[test]
fn exact_free_evolution_with_zero_time_is_identity() {
    let spec = LatticeSpec::lattice_units(8, 0.5, 0.0).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let s = random_state(&spec, 8);
    let same = evolve_free_exact(&s, 0.0, &blocks).unwrap();
    assert!(distance(&s, &same) < 1e-13);
}

#[test]
fn exact_free_evolution_matches_dense_exponential() {
    let spec = LatticeSpec::new(8, 0.7, 0.6, 0.0, 2).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let s = random_state(&spec, 9);
    let t = 3.7;
    let got = evolve_free_exact(&s, t, &blocks).unwrap();
    let want = expm_apply(&dense_hamiltonian(&spec), &to_c(&s), t);
    assert!(norm_diff(&to_c(&got), &want) < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn single_step_preserves_norm(seed in 0u64..10_000, dt in 0.01f64..2.0, l in 0.0f64..2.0) {
        let spec = LatticeSpec::lattice_units(8, 0.5, l).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let s = random_state(&spec, seed);
        let next = step_implicit_midpoint(&s, dt, &blocks).unwrap();
        prop_assert!((next.norm_sqr() - s.norm_sqr()).abs() <= 1e-10);
        prop_assert!((next.time() - dt).abs() < 1e-15);
    }

    #[test]
    fn exact_free_evolution_composes(seed in 0u64..10_000, t1 in 0.0f64..20.0, t2 in 0.0f64..20.0) {
        let spec = LatticeSpec::lattice_units(8, 0.3, 0.0).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let s = random_state(&spec, seed);
        let a = evolve_free_exact(&evolve_free_exact(&s, t1, &blocks).unwrap(), t2, &blocks).unwrap();
        let b = evolve_free_exact(&s, t1 + t2, &blocks).unwrap();
        prop_assert!(distance(&a, &b) < 1e-11);
    }
}
