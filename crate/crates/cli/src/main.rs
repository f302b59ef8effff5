mod commands;
mod config;
mod error;
mod manifest;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::error::{CliError, CliResult};
use crate::manifest::Outputs;

#[derive(Parser)]
#[command(name = "bellfield", version, about = "Bell-type particle trajectories on a lattice scalar field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hopping, kernel and two-point tables with a decay plot.
    Kernels(RunArgs),
    /// Massless plane-wave velocity and spread sums.
    Table1(RunArgs),
    /// Trajectory ensembles for every [[scenario]] entry.
    Trajectories(RunArgs),
    /// Walker histogram against |psi|^2 after joint evolution.
    Equivariance(RunArgs),
    /// Jump-distance distributions of the massless plane wave.
    Cdf(RunArgs),
    /// Interacting-theory trajectories with creation statistics.
    Interacting(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; `0` uses every core.
    #[arg(long, env = "BELLFIELD_THREADS")]
    threads: Option<usize>,
}

fn run(cli: Cli) -> CliResult<()> {
    let (name, args) = match &cli.command {
        Command::Kernels(a) => ("kernels", a),
        Command::Table1(a) => ("table1", a),
        Command::Trajectories(a) => ("trajectories", a),
        Command::Equivariance(a) => ("equivariance", a),
        Command::Cdf(a) => ("cdf", a),
        Command::Interacting(a) => ("interacting", a),
    };
    let config = config::load(&args.config)?;
    let seed = args.seed.unwrap_or(config.seed);
    let dir = args
        .out
        .clone()
        .or_else(|| config.output.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set `output`".into()))?;
    let threads = args.threads.or(config.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let ctx = Context { config: &config, seed, threads: rayon::current_num_threads() };
    let mut resolved = config.clone();
    resolved.seed = seed;
    resolved.output = Some(dir.clone());
    resolved.threads = Some(ctx.threads);

    // validate before touching the output directory
    validate(&cli.command, &config)?;
    let mut out = Outputs::create(&dir)?;
    let report = match &cli.command {
        Command::Kernels(_) => commands::kernels(&ctx, &mut out),
        Command::Table1(_) => commands::table1(&ctx, &mut out),
        Command::Trajectories(_) => commands::trajectories(&ctx, &mut out),
        Command::Equivariance(_) => commands::equivariance(&ctx, &mut out),
        Command::Cdf(_) => commands::cdf(&ctx, &mut out),
        Command::Interacting(_) => commands::interacting(&ctx, &mut out),
    }?;
    out.finish(name, seed, ctx.threads, &resolved)?;
    if report.aborted > 0 {
        return Err(CliError::Numerical(format!(
            "{} trajectories aborted on wave-function nodes or substep limits; see the output files",
            report.aborted
        )));
    }
    Ok(())
}

fn validate(cmd: &Command, config: &config::RunConfig) -> CliResult<()> {
    let need = |present: bool, s: &str| {
        if present {
            Ok(())
        } else {
            Err(CliError::Config(format!("missing [{s}] section")))
        }
    };
    match cmd {
        Command::Kernels(_) => {
            let k = config.kernels.as_ref().ok_or_else(|| CliError::Config("missing [kernels] section".into()))?;
            for &am in &k.a_mu {
                bellfield::LatticeSpec::new(k.n_sites, k.spacing, am / k.spacing, 0.0, 1)?;
            }
            Ok(())
        }
        Command::Table1(_) => need(config.table1.is_some(), "table1"),
        Command::Trajectories(_) => {
            for s in &config.scenario {
                s.resolve()?;
            }
            Ok(())
        }
        Command::Equivariance(_) => {
            config.equivariance.as_ref().ok_or_else(|| CliError::Config("missing [equivariance] section".into()))?.spec()?;
            Ok(())
        }
        Command::Cdf(_) => {
            config.cdf.as_ref().ok_or_else(|| CliError::Config("missing [cdf] section".into()))?.curves()?;
            Ok(())
        }
        Command::Interacting(_) => {
            config.interacting.as_ref().ok_or_else(|| CliError::Config("missing [interacting] section".into()))?.scenario()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bellfield: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
