use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use holoradar::harness::{monte_carlo_pd, run_detection_logged, run_sweep, Antenna, ExperimentConfig};
use holoradar::selftest::run_selftest;
use holoradar::Error;

#[derive(Parser)]
#[command(name = "holoradar", version, about = "Holographic-surface radar detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML, or JSON with a .json extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo trials; overrides the configuration.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    antenna: Option<AntennaArg>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single trial with a per-cycle log.
    Detect,
    /// Monte Carlo probability of detection.
    Pd,
    /// Parameter sweep declared in the configuration's [sweep] section.
    Sweep,
    /// Fast oracle checks.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum AntennaArg {
    Rhs,
    Pa,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(a) = cli.antenna {
        cfg.antenna = match a {
            AntennaArg::Rhs => Antenna::Rhs,
            AntennaArg::Pa => Antenna::Pa,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_out(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Detect => {
            let cfg = load_config(cli)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (result, logs) = run_detection_logged(&cfg, &mut rng)?;
            for l in &logs {
                println!(
                    "cycle {:>2}  map {:<8} p={:.4}  objective={:.4e}  optimizer_iters={}",
                    l.cycle, l.map_hypothesis, l.map_probability, l.objective, l.optimizer_iterations
                );
            }
            println!(
                "accepted {} (truth {}) after {} cycle(s): {}",
                result.accepted,
                result.truth,
                result.cycles,
                if result.correct { "correct" } else { "wrong" }
            );
            if let Some(path) = &cli.out {
                let report = serde_json::json!({ "result": result, "cycles": logs });
                write_out(path, &to_json(&report)?)?;
            }
        }
        Command::Pd => {
            let cfg = load_config(cli)?;
            let est = monte_carlo_pd(&cfg, cfg.trials)?;
            println!(
                "antenna={} trials={} pd={:.4} wilson95=[{:.4}, {:.4}] mean_cycles={:.3}",
                cfg.antenna, est.trials, est.pd, est.wilson_lo, est.wilson_hi, est.mean_cycles
            );
            if let Some(path) = &cli.out {
                write_out(path, &to_json(&est)?)?;
            }
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let table = run_sweep(&cfg)?;
            let csv = table.to_csv()?;
            match &cli.out {
                Some(path) => write_out(path, &csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Selftest => {
            let mut all = true;
            for c in run_selftest() {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                all &= c.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
