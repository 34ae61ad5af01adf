use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ellopt::config::RunConfig;
use ellopt::run::Stage;
use ellopt::CliError;

#[derive(Debug, Parser)]
#[command(name = "ellopt", version, about = "Optimality-condition checks for elliptic problems with controls in the leading coefficient")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the random candidate and direction generators.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Mesh resolution; overrides the config.
    #[arg(long, global = true)]
    mesh: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// State and adjoint at the reference control, plus the first-order check
    Solve,
    /// Replace the reference control by the pointwise improver's fixed point
    Improve,
    /// Singularity classification of the configured candidates
    Classify,
    /// Relaxed-cost expansion tables
    Expand,
    /// Second-order integrals
    Soc,
    /// Laminate ε-sweep against the homogenized solution
    Homogenize,
    /// Every stage; the reference is improved only when the config asks for it
    Run,
    /// Measure of {z : frac(⟨ν, z⟩) < α} on a midpoint grid
    DecimalMeasure {
        /// Integer vector, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        nu: Vec<i64>,
        #[arg(long)]
        alpha: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 1000)]
        grid: usize,
    },
    /// Built-in consistency checks
    Selftest,
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    let path = cli.config.clone().ok_or_else(|| CliError::Config {
        path: PathBuf::from("-"),
        message: "this subcommand needs --config".to_owned(),
    })?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(m) = cli.mesh {
        cfg.mesh = m;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|message| CliError::Config { path, message })?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let stages: Vec<Stage> = match &cli.command {
        Command::Solve => vec![Stage::Solve],
        Command::Improve => vec![Stage::Improve, Stage::Solve],
        Command::Classify => vec![Stage::Classify],
        Command::Expand => vec![Stage::Expand],
        Command::Soc => vec![Stage::Soc],
        Command::Homogenize => vec![Stage::Homogenize],
        Command::Run => Stage::ALL.into_iter().filter(|&s| s != Stage::Improve).collect(),
        Command::DecimalMeasure { nu, alpha, grid } => {
            let v: f64 = ellopt_core::homogenization::decimal_measure(nu, *alpha, *grid)?;
            println!("{v}");
            return Ok(());
        }
        Command::Selftest => {
            let checks = ellopt::selftest::run(cli.seed.unwrap_or(0));
            for c in &checks {
                println!("{} {}: {:e} (tolerance {:e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.tolerance);
            }
            return match checks.iter().find(|c| !c.pass) {
                Some(c) => Err(CliError::Violation { violation: c.value, tolerance: c.tolerance }),
                None => Ok(()),
            };
        }
    };
    let cfg = load(cli)?;
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = ellopt::run(&cfg, &out, &stages)?;
    let tolerance = cfg.tolerances.pontryagin;
    let manifest = outcome.into_result(tolerance)?;
    for s in &manifest.stages {
        log::info!("{:?}: {:?} ({} artifacts)", s.stage, s.status, s.artifacts.len());
    }
    println!("{}", out.join("manifest.json").display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ELLOPT_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
