use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hkfp_cli::{commands, CliError, CliResult, RunConfig};

/// Noisy Hegselmann-Krause mean-field laboratory
#[derive(Parser, Debug)]
#[command(name = "hkfp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Evolve the density with the IMEX stepper
    Solve,
    /// Evolve the density by frozen-drift fixed-point iteration
    Picard,
    /// Simulate the finite agent system
    Particles,
    /// Classify end states over a grid of (radius, sigma2)
    Sweep,
    /// Tabulate the linear growth rate of each Fourier mode
    Dispersion,
    /// Report the stability thresholds for (ell, radius)
    Threshold,
}

/// Flags override values read from `--config`.
#[derive(Args, Debug)]
struct Flags {
    /// flat `key = value` file, or a previous run's meta.json
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// number of grid cells
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    ell: Option<f64>,
    #[arg(long, global = true)]
    radius: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// worker threads (0 = one per core)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// any other config key, as KEY=VALUE
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn build_config(flags: &Flags) -> CliResult<RunConfig> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &flags.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.grid {
        cfg.grid = v;
    }
    if let Some(v) = flags.ell {
        cfg.ell = v;
    }
    if let Some(v) = flags.radius {
        cfg.radius = v;
    }
    if let Some(v) = flags.sigma2 {
        cfg.sigma2 = v;
    }
    if let Some(v) = flags.dt {
        cfg.dt = Some(v);
    }
    if let Some(v) = flags.t_end {
        cfg.t_end = v;
    }
    if let Some(v) = flags.workers {
        cfg.workers = v;
    }
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &RunConfig) -> CliResult<()> {
    match command {
        Command::Solve => commands::solve_cmd(cfg),
        Command::Picard => commands::picard_cmd(cfg),
        Command::Particles => commands::particles_cmd(cfg),
        Command::Sweep => commands::sweep_cmd(cfg),
        Command::Dispersion => commands::dispersion_cmd(cfg),
        Command::Threshold => commands::threshold_cmd(cfg),
    }
}

#[cfg(feature = "parallel")]
fn run(command: Command, cfg: &RunConfig) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    pool.install(|| dispatch(command, cfg))
}

#[cfg(not(feature = "parallel"))]
fn run(command: Command, cfg: &RunConfig) -> CliResult<()> {
    if cfg.workers > 1 {
        log::warn!("built without the `parallel` feature; ignoring workers = {}", cfg.workers);
    }
    dispatch(command, cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match build_config(&cli.flags).and_then(|cfg| run(cli.command, &cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
