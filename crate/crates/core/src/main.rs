use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use spc_relay::bsca::Scheme;
use spc_relay::cli::{self, ExperimentConfig, DEFAULT_MC_SAMPLES};

#[derive(Parser)]
#[command(name = "spc-relay", version, about = "Secure short-packet UAV relay optimizer")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the selected schemes and write their artifacts.
    Run {
        /// Scenario TOML; defaults to the bundled reference table.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Comma-separated subset of JTBD, TDFB, BDFT, Baseline.
        #[arg(long, default_value = "JTBD,TDFB,BDFT,Baseline")]
        schemes: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also render SVG figures.
        #[arg(long)]
        plots: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare the mean-SNR uplink rate against a Monte-Carlo estimate.
    ValidateJensen {
        #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
        samples: usize,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validate a scenario file without optimizing.
    Check {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn run(command: Command) -> spc_relay::Result<()> {
    match command {
        Command::Run { scenario, schemes, out, plots, seed } => {
            let mut cfg = ExperimentConfig::new(out);
            cfg.scenario = scenario;
            cfg.schemes = cli::parse_schemes(&schemes)?;
            cfg.plots = plots;
            cfg.seed = seed;
            let runs = cli::run_experiment(&cfg)?;
            for r in &runs {
                println!(
                    "{:<8} EAST {:>10.4} bps  iterations {:>2}  {:?}",
                    r.scheme.name(),
                    r.final_east(),
                    r.iteration_count(),
                    r.termination
                );
            }
            println!("artifacts in {}", cfg.out_dir.display());
        }
        Command::ValidateJensen { samples, scenario, out, seed } => {
            let mut cfg = ExperimentConfig::new(out);
            cfg.scenario = scenario;
            cfg.schemes = vec![Scheme::Baseline];
            cfg.mc_samples = samples;
            cfg.seed = seed;
            let report = cli::validate_jensen(&cfg)?;
            println!(
                "direction holds on {}/{} slots; rate gap mean {:.4e}, max {:.4e} bits/use",
                report.slots.len() - report.violations,
                report.slots.len(),
                report.mean_gap,
                report.max_gap
            );
            println!("report in {}", cfg.out_dir.join("jensen.csv").display());
        }
        Command::Check { scenario } => {
            let r = cli::check(scenario.as_deref())?;
            println!("scenario {}", r.scenario_hash);
            println!("slots {}", r.slots);
            println!(
                "endpoints {:.3} m apart, {:.3} m reachable",
                r.endpoint_distance_m, r.reachable_distance_m
            );
            println!("mean Eve uplink SNR {:.6e}", r.gamma_bar_ae);
            println!("initial EAST {:.6} bps", r.initial_east_bps);
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
