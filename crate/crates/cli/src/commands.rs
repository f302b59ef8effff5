//! Subcommand implementations. Each validates its whole configuration before
//! creating any output.

use std::fmt::Write as _;

use bellfield::evolution::{Method, SpectralPropagator};
use bellfield::experiments::{
    cdf_jump_distance, creation_event_stats, effective_velocity, nonrel_velocity, table1_sums, CreationStats, Scenario,
    VelocityStats,
};
use bellfield::hamiltonian::{HamiltonianBlocks, KernelTable};
use bellfield::io::{sci, write_trajectories};
use bellfield::jump::{ensemble_equivariance_check, EquivarianceReport, JumpParams, Trajectory};
use bellfield::{Error, LatticeSpec};
use serde::Serialize;

use crate::config::{CdfConfig, EquivarianceConfig, InteractingConfig, KernelsConfig, RunConfig, Table1Config};
use crate::error::{CliError, CliResult};
use crate::manifest::Outputs;
use crate::plot::{self, Track};

/// What a command leaves behind besides its files.
#[derive(Debug, Default)]
pub struct Report {
    pub aborted: usize,
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub seed: u64,
    pub threads: usize,
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn json<T: Serialize>(v: &T) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

// ---- kernels

pub fn kernels(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    let cfg: &KernelsConfig = section(&ctx.config.kernels, "kernels")?;
    if cfg.a_mu.is_empty() {
        return Err(CliError::Config("[kernels] a_mu list is empty".into()));
    }
    let specs: Vec<LatticeSpec<f64>> = cfg
        .a_mu
        .iter()
        .map(|&am| LatticeSpec::new(cfg.n_sites, cfg.spacing, am / cfg.spacing, 0.0, 1))
        .collect::<Result<_, _>>()?;
    let half = (cfg.n_sites / 2) as i64;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for spec in &specs {
        let t = KernelTable::build(spec);
        let a = spec.spacing();
        for n in -half + 1..=half {
            rows.push(vec![
                sci(spec.a_mu()),
                n.to_string(),
                sci(n as f64 * a),
                sci(t.h1(n)),
                sci(t.k(n)),
                t.s(n).map(sci).unwrap_or_default(),
            ]);
        }
        let pts = (1..=half).map(|n| (n as f64, t.h1(n).abs())).collect();
        series.push((format!("a mu = {}", spec.a_mu()), pts));
    }
    let text = csv_text(&["a_mu", "n", "x", "h1", "k", "s"], rows);
    out.write("kernels.csv", text.as_bytes())?;
    if ctx.config.plots {
        plot::lines(&out.path("kernels.svg"), "|h1(x)|", "x/a", "|h1|", &series, false, true)?;
        out.register("kernels.svg")?;
    }
    Ok(Report::default())
}

// ---- table1

pub fn table1(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    let cfg: &Table1Config = section(&ctx.config.table1, "table1")?;
    let k0: Vec<i64> = match &cfg.k0 {
        Some(k) if k.len() == cfg.n_sites.len() => k.clone(),
        Some(_) => return Err(CliError::Config("[table1] k0 must have one entry per N".into())),
        None => cfg.n_sites.iter().map(|n| n.isqrt() as i64).collect(),
    };
    for (&n, &k) in cfg.n_sites.iter().zip(&k0) {
        if n < 4 || n % 2 != 0 || k < 1 || 2 * k >= n as i64 {
            return Err(CliError::Config(format!("[table1] need even N and 1 <= k0 < N/2, got N={n}, k0={k}")));
        }
    }
    let mut rows = Vec::new();
    for (&n, &k) in cfg.n_sites.iter().zip(&k0) {
        let (v, var) = table1_sums::<f64>(n, k)?;
        println!("N = {n:>10}  k0 = {k:>6}  <dx/dt> = {v:.4}  <dx^2>/(L dt) = {var:.4}");
        rows.push(vec![n.to_string(), k.to_string(), sci(v), sci(var)]);
    }
    let text = csv_text(&["n_sites", "k0", "mean_velocity", "variance_over_l"], rows);
    out.write("table1.csv", text.as_bytes())?;
    Ok(Report::default())
}

// ---- trajectories

#[derive(Debug, Serialize)]
struct ScenarioSummary {
    scenario: Scenario<f64>,
    method: Method,
    aborted: usize,
    velocity: Option<VelocityStats<f64>>,
    lambda_over_l: Option<f64>,
    nonrel_velocity: Option<f64>,
    pairs: Option<CreationStats<f64>>,
}

fn tracks(trajs: &[Trajectory<f64>]) -> CliResult<Vec<Track>> {
    trajs
        .iter()
        .map(|t| {
            let n = t.spec.n_sites();
            let l = t.spec.length();
            let x = |s: usize| t.spec.coordinate(s) as f64 / n as f64;
            let recs = std::iter::once((t.t0, t.initial)).chain(t.events.iter().map(|e| (e.time, e.config)));
            let points = recs
                .map(|(time, c)| {
                    let cfg = t.decoded(c)?;
                    let s = cfg.sites();
                    Ok((time / l, x(s[0]), s.get(1).map(|&b| x(b))))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            Ok(Track { points })
        })
        .collect()
}

fn run_scenario(sc: &Scenario<f64>, ctx: &Context, out: &mut Outputs, threshold: i64) -> CliResult<ScenarioSummary> {
    let res = sc.run_chunked(ctx.seed, JumpParams::default(), ctx.threads)?;
    let trajs = &res.trajectories;
    let mut buf = Vec::new();
    write_trajectories(&mut buf, trajs)?;
    out.write(&format!("{}.csv", sc.name), &buf)?;
    if ctx.config.plots {
        let name = format!("{}.svg", sc.name);
        plot::trajectories(&out.path(&name), &sc.name, &tracks(trajs)?, sc.duration() / sc.spec.length())?;
        out.register(&name)?;
    }
    let velocity = if sc.steps == 0 {
        None
    } else {
        match effective_velocity(trajs, (0.0, sc.duration())) {
            Ok(v) => Some(v),
            Err(Error::UnsupportedSector(_)) | Err(Error::EmptyInput(_)) => None,
            Err(e) => return Err(e.into()),
        }
    };
    let p0 = 2.0 * std::f64::consts::PI / sc.spec.length();
    let nonrel = match sc.initial {
        bellfield::experiments::InitialState::PlaneWave { k } if sc.spec.mu() > 0.0 => {
            Some(nonrel_velocity(&sc.spec, p0 * k as f64)?)
        }
        _ => None,
    };
    let pairs = if sc.spec.m_max() >= 2 { Some(creation_event_stats(trajs, threshold)?) } else { None };
    Ok(ScenarioSummary {
        scenario: sc.clone(),
        method: sc.method(),
        aborted: res.aborted(),
        lambda_over_l: velocity.map(|v| v.lambda / sc.spec.length()),
        velocity,
        nonrel_velocity: nonrel,
        pairs,
    })
}

fn velocity_rows(summaries: &[ScenarioSummary]) -> String {
    let rows = summaries.iter().filter_map(|s| {
        let v = s.velocity?;
        let l = s.scenario.spec.length();
        Some(vec![
            s.scenario.name.clone(),
            v.samples.to_string(),
            s.aborted.to_string(),
            sci(v.mean),
            sci(v.stddev),
            sci(v.mean_error()),
            sci(v.lambda / l),
            sci(v.window / l),
            s.nonrel_velocity.map(sci).unwrap_or_default(),
        ])
    });
    csv_text(
        &[
            "scenario",
            "samples",
            "aborted",
            "mean_velocity",
            "stddev",
            "mean_error",
            "lambda_over_l",
            "window_over_l",
            "nonrel_velocity",
        ],
        rows,
    )
}

pub fn trajectories(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    if ctx.config.scenario.is_empty() {
        return Err(CliError::Config("no [[scenario]] entries".into()));
    }
    let scenarios: Vec<Scenario<f64>> = ctx.config.scenario.iter().map(|s| s.resolve()).collect::<CliResult<_>>()?;
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::Config("scenario names must be unique".into()));
    }
    let mut summaries = Vec::new();
    for sc in &scenarios {
        let s = run_scenario(sc, ctx, out, 10)?;
        let mut line = format!("{}: {} trajectories", sc.name, sc.trajectories);
        if let Some(v) = s.velocity {
            let _ = write!(line, ", v_eff = {:.4} +- {:.4}", v.mean, v.mean_error());
        }
        if let Some(p) = &s.pairs {
            let _ = write!(line, ", {} crossings, {} creations", p.crossings, p.creations);
        }
        if s.aborted > 0 {
            let _ = write!(line, ", {} aborted", s.aborted);
        }
        println!("{line}");
        summaries.push(s);
    }
    out.write("velocities.csv", velocity_rows(&summaries).as_bytes())?;
    out.write("summary.json", &json(&summaries)?)?;
    Ok(Report { aborted: summaries.iter().map(|s| s.aborted).sum() })
}

// ---- equivariance

#[derive(Serialize)]
struct EquivarianceOutput<'a> {
    config: &'a EquivarianceConfig,
    report: EquivarianceReport,
}

pub fn equivariance(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    let cfg: &EquivarianceConfig = section(&ctx.config.equivariance, "equivariance")?;
    let spec = cfg.spec()?;
    let blocks = HamiltonianBlocks::new(&spec)?;
    let state = cfg.initial.build(&spec)?;
    let method = if blocks.is_interacting() { Method::ImplicitMidpoint } else { Method::ExactFree };
    let mut prop = SpectralPropagator::new(&blocks, state, cfg.dt * spec.spacing(), method)?;
    let r = ensemble_equivariance_check(&mut prop, &blocks, cfg.walkers, cfg.steps, ctx.seed, JumpParams::default())?;
    println!(
        "N = {}: TV distance {:.4} (sampling noise {:.4}), P2 walkers {:.4} vs |psi|^2 {:.4}, {} aborted",
        spec.n_sites(),
        r.tv_distance,
        r.noise_floor,
        r.empirical_sectors.1,
        r.quantum_sectors.1,
        r.aborted
    );
    let aborted = r.aborted;
    out.write("equivariance.json", &json(&EquivarianceOutput { config: cfg, report: r })?)?;
    Ok(Report { aborted })
}

// ---- cdf

pub fn cdf(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    let cfg: &CdfConfig = section(&ctx.config.cdf, "cdf")?;
    let curves = cfg.curves()?;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for (n, k0) in curves {
        let spec = LatticeSpec::free(n, 0.0)?;
        let pts = cdf_jump_distance(&spec, k0, cfg.mode, cfg.points)?;
        // `mode` selects the plotted axis; the table carries both units
        let by_n = cdf_jump_distance(&spec, k0, bellfield::experiments::CdfMode::ByN, cfg.points)?;
        for ((_, c), (d, _)) in pts.iter().zip(&by_n) {
            rows.push(vec![n.to_string(), k0.to_string(), sci(*d), sci(*d / n as f64), sci(*c)]);
        }
        series.push((format!("N = {n}, k0 = {k0}"), pts.into_iter().skip(1).collect()));
    }
    out.write("cdf.csv", csv_text(&["n_sites", "k0", "n", "x_over_l", "cdf"], rows).as_bytes())?;
    if ctx.config.plots {
        let xl = match cfg.mode {
            bellfield::experiments::CdfMode::ByX => "x/L",
            bellfield::experiments::CdfMode::ByN => "n",
        };
        plot::lines(&out.path("cdf.svg"), "P(jump >= distance)", xl, "cdf", &series, true, true)?;
        out.register("cdf.svg")?;
    }
    Ok(Report::default())
}

// ---- interacting

pub fn interacting(ctx: &Context, out: &mut Outputs) -> CliResult<Report> {
    let cfg: &InteractingConfig = section(&ctx.config.interacting, "interacting")?;
    let sc = cfg.scenario()?;
    let s = run_scenario(&sc, ctx, out, cfg.threshold)?;
    if let Some(p) = &s.pairs {
        println!(
            "{}: {} creations, {} annihilations, {}/{} trajectories with creation, dressed velocity {}",
            sc.name,
            p.creations,
            p.annihilations,
            p.trajectories_with_creation,
            sc.trajectories,
            p.dressed_velocity.map_or("n/a".to_string(), |v| format!("{v:.4}"))
        );
    }
    let aborted = s.aborted;
    out.write("creation.json", &json(&s)?)?;
    Ok(Report { aborted })
}
