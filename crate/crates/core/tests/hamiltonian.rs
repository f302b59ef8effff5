mod common;

use bellfield::evolution::{energy_expectation, StateVector};
use bellfield::hamiltonian::{kernel_k, HamiltonianBlocks, KernelTable};
use bellfield::LatticeSpec;
use common::*;
use nalgebra::DVector;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn dense_apply(spec: &LatticeSpec<f64>, state: &StateVector<f64>) -> StateVector<f64> {
    let h = dense_hamiltonian(spec);
    from_c(spec, &(complexify(&h) * to_c(state)))
}

fn max_dev(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn dense_oracle_is_real_symmetric() {
    let spec = LatticeSpec::lattice_units(6, 0.4, 0.7).unwrap();
    let h = dense_hamiltonian(&spec);
    assert_eq!(h.nrows(), 6 + 21);
    assert!((&h - h.transpose()).amax() < 1e-13);
}

#[test]
fn one_particle_sector_matches_dense() {
    for (n, amu) in [(4, 0.3), (8, 1.0), (8, 0.0)] {
        let spec = LatticeSpec::free(n, amu).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let s = random_state(&spec, 1);
        let got = blocks.apply_h1(s.psi1()).unwrap();
        let want = dense_apply(&spec, &s);
        assert!(max_dev(&got, want.psi1()) < 1e-10, "N={n}");
    }
}

#[test]
fn free_pair_sector_matches_dense() {
    for (n, amu) in [(4, 0.5), (6, 0.25), (8, 1.0)] {
        let spec = LatticeSpec::lattice_units(n, amu, 0.0).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let mut s = random_state(&spec, 2);
        s.psi1_mut().iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        let got = blocks.apply_h2_free(s.psi2()).unwrap();
        let want = dense_apply(&spec, &s);
        assert!(max_dev(&got, want.psi2()) < 1e-10, "N={n}");
    }
}

#[test]
fn interaction_matches_dense() {
    for (n, amu, l) in [(4, 0.5, 0.3), (6, 0.25, 0.5), (8, 1.0, 2.0)] {
        let spec = LatticeSpec::lattice_units(n, amu, l).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let s = random_state(&spec, 3);
        let (got1, got2) = blocks.apply(s.psi1(), s.psi2()).unwrap();
        let want = dense_apply(&spec, &s);
        assert!(max_dev(&got1, want.psi1()) < 1e-10, "N={n}");
        assert!(max_dev(&got2, want.psi2()) < 1e-10, "N={n}");
        // interaction part alone
        let free = LatticeSpec::lattice_units(n, amu, 0.0).unwrap();
        let free_out = dense_apply(&free, &s);
        let (d1, d2) = blocks.apply_h_interaction(s.psi1(), s.psi2()).unwrap();
        let ref1: Vec<C> = want.psi1().iter().zip(free_out.psi1()).map(|(a, b)| a - b).collect();
        let ref2: Vec<C> = want.psi2().iter().zip(free_out.psi2()).map(|(a, b)| a - b).collect();
        assert!(max_dev(&d1, &ref1) < 1e-10);
        assert!(max_dev(&d2, &ref2) < 1e-10);
    }
}

#[test]
fn non_unit_spacing_matches_dense() {
    let spec = LatticeSpec::new(6, 0.5, 0.8, 1.2, 2).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let s = random_state(&spec, 4);
    let (g1, g2) = blocks.apply(s.psi1(), s.psi2()).unwrap();
    let want = dense_apply(&spec, &s);
    assert!(max_dev(&g1, want.psi1()) < 1e-10);
    assert!(max_dev(&g2, want.psi2()) < 1e-10);
}

#[test]
fn creation_element_hand_expansion() {
    // <y|H|x x> = 2 lambda (1/sqrt 2) sum_x S(y-x) S(x1-x)^2, with sum_x = a sum_n
    // and the c-basis conversion a^{3/2}
    let spec = LatticeSpec::new(6, 0.5, 1.0, 0.7, 2).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let a: f64 = spec.spacing();
    let x1 = 2usize;
    for y in 0..6usize {
        let sum: f64 = (0..6i64)
            .map(|x| direct_s(&spec, y as i64 - x) * direct_s(&spec, x1 as i64 - x).powi(2))
            .sum::<f64>()
            * a;
        let want = 2.0 * spec.lambda() / 2f64.sqrt() * sum * a.powf(1.5);
        let got = blocks.creation_element(y, x1, x1).unwrap();
        assert!((got - want).abs() < 1e-12, "y={y}: {got} vs {want}");
    }
}

#[test]
fn hermiticity_through_apply() {
    let spec = LatticeSpec::lattice_units(6, 0.5, 0.9).unwrap();
    let blocks = HamiltonianBlocks::new(&spec).unwrap();
    let phi = random_state(&spec, 10);
    let psi = random_state(&spec, 11);
    let apply = |s: &StateVector<f64>| {
        let (a, b) = blocks.apply(s.psi1(), s.psi2()).unwrap();
        StateVector::from_parts(6, a, b, 0.0).unwrap()
    };
    let lhs = phi.inner(&apply(&psi));
    let rhs = apply(&phi).inner(&psi);
    assert!((lhs - rhs).norm() < 1e-10);
    assert!(energy_expectation(&psi, &blocks).unwrap().im.abs() < 1e-12);
}

#[test]
fn interaction_requires_mass() {
    let spec = LatticeSpec::lattice_units(8, 0.0, 0.5).unwrap();
    assert!(HamiltonianBlocks::new(&spec).is_err());
}

#[test]
fn kernel_closed_form_matches_direct_sum() {
    for n_sites in [4usize, 10, 128, 1024] {
        for n in -(n_sites as i64) / 2 + 1..=(n_sites as i64) / 2 {
            let c = kernel_k::<f64>(n_sites, n);
            let d = direct_k(n_sites, n);
            assert!(((c - d) / d).abs() < 1e-10, "N={n_sites} n={n}: {c} vs {d}");
        }
    }
    assert_eq!(kernel_k::<f64>(4, 1), -1.0);
    assert_eq!(kernel_k::<f64>(4, -1), kernel_k::<f64>(4, 1));
}

#[test]
fn kernel_tables_match_direct_sums() {
    let spec = LatticeSpec::new(16, 0.5, 0.7, 0.0, 1).unwrap();
    let t = KernelTable::build(&spec);
    for n in 0..16i64 {
        assert!((t.h1(n) - direct_h1(&spec, n)).abs() < 1e-12);
        assert!((t.s(n).unwrap() - direct_s(&spec, n)).abs() < 1e-12);
    }
}

#[test]
fn massive_kernels_decay_exponentially() {
    // log|h1(n)| is linear at intermediate n and the decay rate grows with mass
    let mut rates = Vec::new();
    for amu in [0.25, 0.5, 1.0] {
        let spec = LatticeSpec::<f64>::free(1000, amu).unwrap();
        let t = KernelTable::build(&spec);
        let pts: Vec<(f64, f64)> = (4..=20i64).map(|n| (n as f64, t.h1(n).abs().ln())).collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / m, sy / m);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 > 0.99, "a mu = {amu}: r^2 = {r2}");
        rates.push(-slope);
    }
    assert!(rates[0] < rates[1] && rates[1] < rates[2], "{rates:?}");
}

proptest! {
    #[test]
    fn kernels_are_reflection_symmetric(half in 2usize..64, amu in 0.05f64..3.0, n in 0i64..128) {
        let spec = LatticeSpec::free(2 * half, amu).unwrap();
        let t = KernelTable::build(&spec);
        let nn = 2 * half as i64;
        let n = n % nn;
        prop_assert!((t.h1(n) - t.h1(nn - n)).abs() <= 1e-12 * t.h1(0).abs());
        prop_assert_eq!(t.k(n), t.k(nn - n));
        prop_assert!((t.s(n).unwrap() - t.s(nn - n).unwrap()).abs() <= 1e-12 * t.s(0).unwrap().abs());
    }

    #[test]
    fn apply_is_linear(seed in 0u64..1000, alpha in -2.0f64..2.0) {
        let spec = LatticeSpec::lattice_units(6, 0.5, 0.4).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let x = random_state(&spec, seed);
        let y = random_state(&spec, seed + 1);
        let c = C::new(alpha, 0.3);
        let comb = from_c(&spec, &(to_c(&x) * c + to_c(&y)));
        let h = |s: &StateVector<f64>| {
            let (a, b) = blocks.apply(s.psi1(), s.psi2()).unwrap();
            to_c(&StateVector::from_parts(6, a, b, 0.0).unwrap())
        };
        let lhs: DVector<C> = h(&comb);
        let rhs: DVector<C> = h(&x) * c + h(&y);
        prop_assert!(norm_diff(&lhs, &rhs) < 1e-10);
    }
}
