mod common;

use bellfield::experiments::{
    bohm_limit_check, cdf_jump_distance, creation_event_stats, effective_velocity, nonrel_velocity, table1_row,
    table1_sums, CdfMode, InitialState, Scenario,
};
use bellfield::fock::one_particle_index;
use bellfield::hamiltonian::{kernel_k, HamiltonianBlocks};
use bellfield::jump::{JumpEvent, JumpParams, Trajectory};
use bellfield::LatticeSpec;
use common::direct_k;
use std::f64::consts::PI;

/// Plain sequential sums with the kernel supplied by `k`.
fn table1_oracle(n: usize, k0: i64, k: impl Fn(i64) -> f64) -> (f64, f64) {
    let h = (n / 2) as i64;
    let (mut v, mut var) = (0.0f64, 0.0f64);
    for m in -h + 1..=h {
        let r = (-(2.0 * PI * ((k0 * m).rem_euclid(n as i64)) as f64 / n as f64).sin() * k(m)).max(0.0);
        v += r * m as f64;
        var += r * (m * m) as f64 / n as f64;
    }
    (v, var)
}

#[test]
fn table1_matches_naive_sum() {
    for (n, k0) in [(10usize, 3i64), (100, 10), (1000, 31), (1024, 24)] {
        let (v, var) = table1_sums::<f64>(n, k0).unwrap();
        let (ov, ovar) = table1_oracle(n, k0, |m| direct_k(n, m));
        assert!((v - ov).abs() < 1e-9, "N={n}: {v} vs {ov}");
        assert!((var - ovar).abs() < 1e-9, "N={n}: {var} vs {ovar}");
    }
}

#[test]
fn table1_is_deterministic_to_twelve_digits() {
    let a = table1_row::<f64>(1_000_000).unwrap();
    for _ in 0..3 {
        let b = table1_row::<f64>(1_000_000).unwrap();
        assert_eq!(a, b);
    }
    let rel = |x: f64, y: f64| ((x - y) / y).abs();
    let (_, v, var) = a;
    let (ov, ovar) = table1_oracle(1_000_000, 1000, |m| kernel_k(1_000_000, m));
    assert!(rel(v, ov) < 1e-9 && rel(var, ovar) < 1e-9);
}

#[test]
fn table1_single_precision_agrees() {
    let (_, v64, var64) = table1_row::<f64>(1000).unwrap();
    let (_, v32, var32) = table1_row::<f32>(1000).unwrap();
    assert!((v64 - v32 as f64).abs() < 1e-4);
    assert!((var64 - var32 as f64).abs() < 1e-4);
}

#[test]
fn table1_rejects_bad_arguments() {
    assert!(table1_sums::<f64>(11, 3).is_err());
    assert!(table1_sums::<f64>(100, 0).is_err());
    assert!(table1_sums::<f64>(100, 50).is_err());
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let m = pts.len() as f64;
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn cdf_decays_inversely_with_distance() {
    let spec = LatticeSpec::free(10_000, 0.0).unwrap();
    let cdf = cdf_jump_distance::<f64>(&spec, 1000, CdfMode::ByX, 200).unwrap();
    assert_eq!(cdf[0], (0.0, 1.0));
    assert!(cdf.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 > w[0].0));
    let band: Vec<(f64, f64)> = cdf.iter().copied().filter(|p| p.0 >= 0.003 && p.0 <= 0.05).collect();
    assert!(band.len() > 10);
    let slope = loglog_slope(&band);
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn cdf_collapses_in_lattice_units() {
    let at = |n: usize| {
        let spec = LatticeSpec::free(n, 0.0).unwrap();
        cdf_jump_distance::<f64>(&spec, (n / 12) as i64, CdfMode::ByN, 400).unwrap()
    };
    let small = at(10_000);
    let large = at(100_000);
    let mut compared = 0;
    for (x, c) in &small {
        if *x < 1.0 || *x > 1000.0 {
            continue;
        }
        if let Some((_, c2)) = large.iter().find(|p| p.0 == *x) {
            assert!((c - c2).abs() < 0.02 * c.max(1e-3) + 1e-3, "n={x}: {c} vs {c2}");
            compared += 1;
        }
    }
    assert!(compared > 20, "{compared}");
}

#[test]
fn cdf_requires_massless_theory() {
    let spec = LatticeSpec::free(100, 0.5).unwrap();
    assert!(cdf_jump_distance::<f64>(&spec, 10, CdfMode::ByN, 10).is_err());
}

#[test]
fn nonrelativistic_velocities() {
    let p0 = 30.0 * PI / 600.0;
    let v = |amu: f64| nonrel_velocity(&LatticeSpec::free(600, amu).unwrap(), p0).unwrap();
    assert!((v(0.25) - 0.6257).abs() < 5e-4);
    assert!((v(0.5) - 0.3128).abs() < 5e-4);
    assert_eq!(v(1.0) * 0.0, nonrel_velocity(&LatticeSpec::free(600, 1.0).unwrap(), 0.0).unwrap());
    assert!(nonrel_velocity(&LatticeSpec::free(600, 0.0).unwrap(), p0).is_err());
}

fn drift_walker(id: u64, steps: usize, every: usize) -> Trajectory<f64> {
    let spec = LatticeSpec::free(40, 0.5).unwrap().with_m_max(1).unwrap();
    let events = (1..=steps / every)
        .map(|k| JumpEvent { time: (k * every) as f64 * 0.1, config: one_particle_index((10 + k) % 40) })
        .collect();
    Trajectory {
        id,
        seed: 0,
        scenario: "drift".into(),
        spec,
        t0: 0.0,
        dt: 0.1,
        steps,
        initial: one_particle_index(10),
        events,
        aborted: None,
    }
}

#[test]
fn deterministic_drift_has_no_scatter() {
    // one site every 5 steps of 0.1: velocity 2, wrapping the ring several times
    let trajs: Vec<_> = (0..4).map(|i| drift_walker(i, 1000, 5)).collect();
    let s = effective_velocity(&trajs, (0.0, 100.0)).unwrap();
    assert!((s.mean - 2.0).abs() < 1e-12, "{s:?}");
    assert_eq!(s.stddev, 0.0);
    assert_eq!(s.lambda, 0.0);
    assert_eq!(s.samples, 4);
    assert!(effective_velocity(&trajs[..1], (0.0, 100.0)).is_err());
    assert!(effective_velocity(&trajs, (0.0, 200.0)).is_err());
}

#[test]
fn massive_velocity_decreases_with_mass() {
    let mut means = Vec::new();
    for amu in [0.25, 0.5, 1.0] {
        let sc = Scenario::<f64>::massive_plane_wave(amu, 120, 3).unwrap();
        let sc = Scenario { trajectories: 100, ..sc };
        let out = sc.run(11, JumpParams::default()).unwrap();
        let s = effective_velocity(&out.trajectories, (0.0, sc.duration())).unwrap();
        means.push(s.mean);
    }
    assert!(means[0] > means[1] && means[1] > means[2], "{means:?}");
}

#[test]
fn scatter_follows_diffusive_scaling() {
    let n = 256;
    let k = 16;
    let sc = Scenario::<f64>::massless_plane_wave(n, k).unwrap();
    let sc = Scenario { trajectories: 600, steps: 20 * n, ..sc };
    let out = sc.run_chunked(3, JumpParams::default(), 4).unwrap();
    let l = sc.spec.length();
    let lambda = table1_sums::<f64>(n, k as i64).unwrap().1 * l;
    for frac in [0.25, 0.5, 1.0] {
        let span = frac * sc.duration();
        let s = effective_velocity(&out.trajectories, (0.0, span)).unwrap();
        let predicted = (lambda / span).sqrt();
        assert!(((s.stddev - predicted) / predicted).abs() < 0.2, "span {span}: {} vs {predicted}", s.stddev);
    }
}

#[test]
fn bohm_limit_improves_under_refinement() {
    let check = |n: usize, a: f64| {
        let spec = LatticeSpec::new(n, a, 10.0, 0.0, 1).unwrap();
        let blocks = HamiltonianBlocks::new(&spec).unwrap();
        let state = InitialState::GaussianPacket { x0: 0.0, sigma: 0.15, k: 4 }.build(&spec).unwrap();
        bohm_limit_check(&state, &blocks, 0.1).unwrap()
    };
    let coarse = check(256, 1.0);
    let fine = check(512, 0.5);
    assert!(coarse.sites_checked > 10);
    assert!(fine.max_relative_deviation < 0.6 * coarse.max_relative_deviation, "{coarse:?} {fine:?}");
}

#[test]
fn free_theory_has_no_creation_events() {
    let sc = Scenario::<f64>::interacting(0.0, 60).unwrap();
    let out = sc.run(1, JumpParams::default()).unwrap();
    let st = creation_event_stats(&out.trajectories, 10).unwrap();
    assert_eq!(st.creations, 0);
    assert_eq!(st.annihilations, 0);
    assert_eq!(st.trajectories_with_creation, 0);
    assert!(st.dressed_velocity.is_none());
}
