//! Experiment orchestration behind the `spc-relay` binary.
//!
//! `run` writes one directory per scheme under the output directory:
//!
//! | file | columns |
//! |---|---|
//! | `east_trace.csv` | `iteration, east_bps` (row 0 is the initial point) |
//! | `trajectory.csv` | `n, x_m, y_m, z_m, speed_mps` |
//! | `blocklengths.csv` | `n, l_u, l_d, r_u_bits_per_use, r_d_bits_per_use, b_s_bps` |
//! | `summary.json` | final EAST, iteration count, termination, scenario hash, wall times |
//!
//! CSV files depend only on the scenario and the scheme, so reruns
//! reproduce them byte for byte.

pub mod artifacts;
pub mod jensen;
pub mod plots;
pub mod scenario_file;
pub mod svg;

use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::bsca::{initial_point, run_scheme, RunRecord, Scheme};
use crate::error::{Error, Result};
use crate::fbl::east;
use crate::scenario::Scenario;

pub use jensen::{jensen_report, JensenReport, JensenSlot};
pub use scenario_file::{load_scenario, parse_scenario};

pub const DEFAULT_MC_SAMPLES: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    /// `None` selects the bundled reference scenario.
    pub scenario: Option<PathBuf>,
    pub schemes: Vec<Scheme>,
    pub out_dir: PathBuf,
    /// Seed of the Monte-Carlo fading draws.
    pub seed: u64,
    pub plots: bool,
    pub mc_samples: usize,
}

impl ExperimentConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            scenario: None,
            schemes: Scheme::ALL.to_vec(),
            out_dir: out_dir.into(),
            seed: 0,
            plots: false,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }

    pub fn load_scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => load_scenario(p),
            None => Ok(scenario_file::reference()),
        }
    }

    /// Schemes in canonical order, duplicates dropped.
    fn schemes(&self) -> Result<Vec<Scheme>> {
        let mut s = self.schemes.clone();
        s.sort();
        s.dedup();
        if s.is_empty() {
            return Err(Error::Config("select at least one scheme".into()));
        }
        Ok(s)
    }

    fn prepare_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| {
            Error::Config(format!("output directory {} is not writable: {e}", self.out_dir.display()))
        })
    }
}

/// Parses a comma-separated scheme list such as `JTBD,Baseline`.
pub fn parse_schemes(list: &str) -> Result<Vec<Scheme>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Serialize)]
struct ExperimentIndex<'a> {
    scenario_hash: String,
    schemes: Vec<SchemeIndex<'a>>,
}

#[derive(Debug, Serialize)]
struct SchemeIndex<'a> {
    scheme: Scheme,
    dir: &'a str,
    final_east_bps: f64,
}

fn write_scheme(dir: &Path, scn: &Scenario, rec: &RunRecord, cfg: &ExperimentConfig) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    artifacts::write_east_trace(&dir.join("east_trace.csv"), rec)?;
    artifacts::write_trajectory(&dir.join("trajectory.csv"), scn, rec)?;
    artifacts::write_blocklengths(&dir.join("blocklengths.csv"), rec)?;
    artifacts::write_json(&dir.join("summary.json"), &artifacts::Summary::new(scn, rec, cfg.seed)?)?;
    if cfg.plots {
        plots::scheme_plots(dir, scn, rec)?;
    }
    Ok(())
}

/// Runs the selected schemes concurrently and writes their artifacts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    let schemes = cfg.schemes()?;
    let scn = cfg.load_scenario()?;
    cfg.prepare_out_dir()?;
    info!("scenario {}", scn.fingerprint());
    let runs = schemes
        .par_iter()
        .map(|&scheme| {
            let rec = run_scheme(&scn, scheme)?;
            write_scheme(&cfg.out_dir.join(scheme.name()), &scn, &rec, cfg)?;
            info!("{scheme}: EAST {:.4} bps after {} iterations", rec.final_east(), rec.iteration_count());
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let index = ExperimentIndex {
        scenario_hash: scn.fingerprint(),
        schemes: runs
            .iter()
            .map(|r| SchemeIndex { scheme: r.scheme, dir: r.scheme.name(), final_east_bps: r.final_east() })
            .collect(),
    };
    artifacts::write_json(&cfg.out_dir.join("experiment.json"), &index)?;
    if cfg.plots {
        plots::comparison_plots(&cfg.out_dir, &scn, &runs)?;
    }
    Ok(runs)
}

/// Writes `jensen.csv` and `jensen.json`; fails if the mean log term
/// exceeds the substituted one on any slot.
pub fn validate_jensen(cfg: &ExperimentConfig) -> Result<JensenReport> {
    let scn = cfg.load_scenario()?;
    let report = jensen_report(&scn, cfg.mc_samples, cfg.seed)?;
    cfg.prepare_out_dir()?;
    jensen::write_jensen_csv(&cfg.out_dir.join("jensen.csv"), &report)?;
    artifacts::write_json(&cfg.out_dir.join("jensen.json"), &report)?;
    info!(
        "{} slots, {} samples: mean gap {:.3e}, max gap {:.3e} bits/use",
        report.slots.len(),
        report.samples,
        report.mean_gap,
        report.max_gap
    );
    if report.violations > 0 {
        return Err(Error::Validation(format!(
            "log-term direction fails on {} of {} slots",
            report.violations,
            report.slots.len()
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub scenario_hash: String,
    pub slots: usize,
    pub endpoint_distance_m: f64,
    /// `(N−1)·v_max·δ_t`.
    pub reachable_distance_m: f64,
    pub gamma_bar_ae: f64,
    pub initial_east_bps: f64,
}

/// Loads and validates a scenario, including endpoint reachability.
pub fn check(scenario: Option<&Path>) -> Result<CheckReport> {
    let scn = match scenario {
        Some(p) => load_scenario(p)?,
        None => scenario_file::reference(),
    };
    let (traj, plan) = initial_point(&scn)?;
    Ok(CheckReport {
        scenario_hash: scn.fingerprint(),
        slots: scn.slots,
        endpoint_distance_m: scn.endpoint_distance(),
        reachable_distance_m: scn.slots.saturating_sub(1) as f64 * scn.max_step(),
        gamma_bar_ae: scn.avg_eve_uplink_snr(),
        initial_east_bps: east(&scn, &traj, &plan)?.east,
    })
}
