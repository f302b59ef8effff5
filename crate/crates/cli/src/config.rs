//! Declarative run configuration read from TOML.

use std::path::{Path, PathBuf};

use bellfield::experiments::{CdfMode, InitialState, Scenario, StartSpec};
use bellfield::LatticeSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default = "default_true")]
    pub plots: bool,
    pub kernels: Option<KernelsConfig>,
    pub table1: Option<Table1Config>,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
    pub equivariance: Option<EquivarianceConfig>,
    pub cdf: Option<CdfConfig>,
    pub interacting: Option<InteractingConfig>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    pub n_sites: usize,
    pub a_mu: Vec<f64>,
    #[serde(default = "one")]
    pub spacing: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    #[serde(default)]
    pub n_sites: Vec<usize>,
    /// Wave numbers per row; `floor(sqrt(N))` when absent.
    pub k0: Option<Vec<i64>>,
}

/// A scenario preset with optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(flatten)]
    pub preset: Preset,
    pub name: Option<String>,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub trajectories: Option<usize>,
    pub start: Option<StartSpec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    Massive { a_mu: f64, n_sites: usize, k: i64 },
    Massless { n_sites: usize, k: i64 },
    GaussianPair { n_sites: usize },
    Interacting { a2_lambda: f64, n_sites: usize },
    Custom { spec: LatticeSpec<f64>, initial: InitialState<f64> },
}

impl ScenarioConfig {
    pub fn resolve(&self) -> CliResult<Scenario<f64>> {
        let mut sc = match &self.preset {
            Preset::Massive { a_mu, n_sites, k } => Scenario::massive_plane_wave(*a_mu, *n_sites, *k)?,
            Preset::Massless { n_sites, k } => Scenario::massless_plane_wave(*n_sites, *k)?,
            Preset::GaussianPair { n_sites } => Scenario::gaussian_pair(*n_sites)?,
            Preset::Interacting { a2_lambda, n_sites } => Scenario::interacting(*a2_lambda, *n_sites)?,
            Preset::Custom { spec, initial } => Scenario {
                name: "custom".into(),
                spec: *spec,
                initial: *initial,
                dt: 0.1,
                steps: self.steps.ok_or_else(|| CliError::Config("custom scenario needs `steps`".into()))?,
                trajectories: 10,
                start: StartSpec::Equilibrium,
            },
        };
        if let Some(n) = &self.name {
            sc.name = n.clone();
        }
        if let Some(dt) = self.dt {
            sc.dt = dt;
        }
        if let Some(s) = self.steps {
            sc.steps = s;
        }
        if let Some(t) = self.trajectories {
            sc.trajectories = t;
        }
        if let Some(s) = self.start {
            sc.start = s;
        }
        if sc.trajectories == 0 {
            return Err(CliError::Config(format!("scenario {}: no trajectories requested", sc.name)));
        }
        if sc.name.is_empty() || sc.name.contains(['/', '\\']) {
            return Err(CliError::Config(format!("scenario name {:?} is not a valid file stem", sc.name)));
        }
        sc.validate()?;
        Ok(sc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivarianceConfig {
    pub n_sites: usize,
    pub a_mu: f64,
    #[serde(default)]
    pub a2_lambda: f64,
    pub initial: InitialState<f64>,
    pub dt: f64,
    pub steps: usize,
    pub walkers: usize,
}

impl EquivarianceConfig {
    pub fn spec(&self) -> CliResult<LatticeSpec<f64>> {
        let spec = if self.a2_lambda > 0.0 {
            LatticeSpec::lattice_units(self.n_sites, self.a_mu, self.a2_lambda)?
        } else {
            LatticeSpec::lattice_units(self.n_sites, self.a_mu, 0.0)?.with_m_max(1)?
        };
        if self.walkers == 0 {
            return Err(CliError::Config("equivariance needs at least one walker".into()));
        }
        if !(self.dt > 0.0) {
            return Err(CliError::Config(format!("time step must be positive, got {}", self.dt)));
        }
        self.initial.build(&spec)?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdfConfig {
    pub mode: CdfMode,
    pub n_sites: Vec<usize>,
    /// Fixed wave number for every curve.
    pub k0: Option<i64>,
    /// Alternatively a fixed wavelength in sites, `k0 = N / wavelength`.
    pub wavelength: Option<usize>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    200
}

impl CdfConfig {
    pub fn curves(&self) -> CliResult<Vec<(usize, i64)>> {
        let k0 = |n: usize| match (self.k0, self.wavelength) {
            (Some(k), None) => Ok(k),
            (None, Some(w)) if w > 0 => Ok((n / w) as i64),
            _ => Err(CliError::Config("cdf needs exactly one of `k0` and `wavelength`".into())),
        };
        self.n_sites
            .iter()
            .map(|&n| {
                let k = k0(n)?;
                if n < 4 || n % 2 != 0 || k < 1 || 2 * k >= n as i64 {
                    return Err(CliError::Config(format!("cdf curve needs even N and 1 <= k0 < N/2, got N={n}, k0={k}")));
                }
                Ok((n, k))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractingConfig {
    pub a2_lambda: f64,
    pub n_sites: usize,
    pub steps: Option<usize>,
    pub trajectories: Option<usize>,
    pub dt: Option<f64>,
    pub start: Option<StartSpec<f64>>,
    /// Pair separation (sites) below which a pair counts as dressed.
    #[serde(default = "default_threshold")]
    pub threshold: i64,
}

fn default_threshold() -> i64 {
    10
}

impl InteractingConfig {
    pub fn scenario(&self) -> CliResult<Scenario<f64>> {
        let cfg = ScenarioConfig {
            preset: Preset::Interacting { a2_lambda: self.a2_lambda, n_sites: self.n_sites },
            name: None,
            dt: self.dt,
            steps: self.steps,
            trajectories: self.trajectories,
            start: self.start,
        };
        if self.threshold < 0 {
            return Err(CliError::Config("separation threshold must be >= 0".into()));
        }
        cfg.resolve()
    }
}

pub fn load(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> CliResult<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_overrides() {
        let cfg = parse(
            r#"
            seed = 4
            [[scenario]]
            preset = "massive"
            a_mu = 0.5
            n_sites = 60
            k = 3
            trajectories = 2
            start = { kind = "site", x = 0.25 }
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert!(cfg.plots);
        let sc = cfg.scenario[0].resolve().unwrap();
        assert_eq!(sc.trajectories, 2);
        assert_eq!(sc.steps, 600);
        assert_eq!(sc.start, StartSpec::Site { x: 0.25 });
    }

    #[test]
    fn custom_spec_is_validated() {
        let bad = r#"
            [[scenario]]
            preset = "custom"
            steps = 10
            spec = { n_sites = 7, spacing = 1.0, mu = 0.5, lambda = 0.0, m_max = 1 }
            initial = { kind = "plane-wave", k = 1 }
            "#;
        assert!(matches!(parse(bad), Err(CliError::Config(_))));
        let good = bad.replace("n_sites = 7", "n_sites = 8");
        let sc = parse(&good).unwrap().scenario[0].resolve().unwrap();
        assert_eq!(sc.spec.n_sites(), 8);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(parse("sead = 1").is_err());
        assert!(parse("[table1]\nn = [10]").is_err());
    }

    #[test]
    fn cdf_wave_number_choice() {
        let c = CdfConfig { mode: CdfMode::ByN, n_sites: vec![120], k0: None, wavelength: Some(12), points: 10 };
        assert_eq!(c.curves().unwrap(), vec![(120, 10)]);
        let both = CdfConfig { k0: Some(3), ..c.clone() };
        assert!(both.curves().is_err());
    }
}
