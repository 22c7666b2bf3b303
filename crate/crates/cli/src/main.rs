use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gaugeopt::bench::{run_to_dir, sweep, verify, ExperimentConfig};

#[derive(Parser)]
#[command(name = "gaugeopt", version, about = "Projection-free online convex optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write rounds.csv and summary.json.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's `output`, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scan every interval instead of the dyadic grid (T <= 2000).
        #[arg(long)]
        full_interval_scan: bool,
    },
    /// Run the same experiment at several horizons and fit the regret growth.
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', required = true)]
        horizons: Vec<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant checks and print one line per check.
    Verify {
        /// Smaller sample counts.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in negative control (stationary OGD on a sign flip) at this horizon.
    #[arg(long, value_name = "T")]
    negative_control: Option<u64>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, self.negative_control) {
            (Some(path), _) => {
                ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))
            }
            (None, Some(t)) => Ok(ExperimentConfig::negative_control(t, 0)),
            (None, None) => bail!("either --config or --negative-control is required"),
        }
    }
}

fn output_dir(cli: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    cli.or_else(|| cfg.output.clone()).unwrap_or_else(|| Path::new("out").to_path_buf())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { source, seed, out, full_interval_scan } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.full_interval_scan |= full_interval_scan;
            let dir = output_dir(out, &cfg);
            log::info!("running config {} with seed {}", cfg.hash(), cfg.seed);
            let report = run_to_dir(&cfg, &dir)?;
            let s = &report.summary;
            println!("wrote {}", dir.display());
            println!("cumulative regret {:.6}", s.cumulative_regret);
            println!(
                "worst interval [{}, {}] regret {:.6}",
                s.worst_interval.worst.start, s.worst_interval.worst.end, s.worst_interval.worst.regret
            );
            println!("membership calls {}", s.total_oracle_calls);
        }
        Command::Sweep { source, horizons, seed, out } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = output_dir(out, &cfg);
            let report = sweep(&cfg, &horizons, Some(&dir))?;
            println!("{:>10} {:>14} {:>14} {:>12}", "T", "regret", "worst", "calls/round");
            for p in &report.points {
                println!(
                    "{:>10} {:>14.6} {:>14.6} {:>12.2}",
                    p.horizon, p.cumulative_regret, p.worst_interval_regret, p.mean_round_calls
                );
            }
            for (label, fit) in [("cumulative", &report.fit), ("worst interval", &report.interval_fit)] {
                if let Some(fit) = fit {
                    println!(
                        "{label}: log-log slope {:.4} (R^2 {:.4}), vs log T slope {:.4} (R^2 {:.4})",
                        fit.log_log.slope, fit.log_log.r_squared, fit.log_linear.slope, fit.log_linear.r_squared
                    );
                }
            }
        }
        Command::Verify { quick } => {
            let checks = verify::run_all(quick);
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
