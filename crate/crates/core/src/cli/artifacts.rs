//! Per-scheme CSV and JSON artifacts.
//!
//! Column order is fixed; units are part of each column name. A layout
//! change bumps [`CSV_SCHEMA_VERSION`], which every `summary.json` records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bsca::{RunRecord, Scheme, Termination};
use crate::error::Result;
use crate::scenario::Scenario;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const EAST_TRACE_HEADER: [&str; 2] = ["iteration", "east_bps"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["n", "x_m", "y_m", "z_m", "speed_mps"];
pub const BLOCKLENGTHS_HEADER: [&str; 6] = ["n", "l_u", "l_d", "r_u_bits_per_use", "r_d_bits_per_use", "b_s_bps"];

/// Twelve significant digits, plain decimal notation.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    // -0 and 0 print the same.
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

/// `east_trace.csv`: one row per entry of the trace, row 0 is the initial
/// point. Wall-clock times live in `summary.json` so this file stays
/// reproducible.
pub fn write_east_trace(path: &Path, rec: &RunRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(EAST_TRACE_HEADER)?;
    for (i, e) in rec.east_trace.iter().enumerate() {
        w.write_record([i.to_string(), fmt_num(*e)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectory(path: &Path, scn: &Scenario, rec: &RunRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    let speeds = rec.trajectory.speeds(scn.delta_t);
    for (n, (q, v)) in rec.trajectory.waypoints().iter().zip(&speeds).enumerate() {
        w.write_record([n.to_string(), fmt_num(q.x), fmt_num(q.y), fmt_num(q.z), fmt_num(*v)])?;
    }
    w.flush()?;
    Ok(())
}

/// Rates are left empty for a hop with zero channel uses.
pub fn write_blocklengths(path: &Path, rec: &RunRecord) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(BLOCKLENGTHS_HEADER)?;
    let opt = |r: Option<f64>| r.map(fmt_num).unwrap_or_default();
    for (n, s) in rec.slots.iter().enumerate() {
        let (l_u, l_d) = rec.plan.slot(n);
        w.write_record([
            n.to_string(),
            l_u.to_string(),
            l_d.to_string(),
            opt(s.r_u),
            opt(s.r_d),
            fmt_num(s.b_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RejectedStep {
    pub iteration: usize,
    pub candidate_east_bps: f64,
}

#[derive(Debug, Serialize)]
pub struct StepFailure {
    pub iteration: usize,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub scenario_hash: String,
    pub csv_schema_version: u32,
    pub final_east_bps: f64,
    pub initial_east_bps: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub wall_seconds_total: f64,
    /// One entry per row of `east_trace.csv`.
    pub wall_seconds: Vec<f64>,
    /// Largest KKT residual reported by an accepted trajectory step.
    pub max_kkt_residual: Option<f64>,
    pub rejected_steps: Vec<RejectedStep>,
    pub step_failures: Vec<StepFailure>,
    pub seed: u64,
}

impl Summary {
    pub fn new(scn: &Scenario, rec: &RunRecord, seed: u64) -> Result<Self> {
        let mut rejected_steps = Vec::new();
        let mut step_failures = Vec::new();
        let mut max_kkt: Option<f64> = None;
        for it in &rec.iterations {
            if let Some(step) = &it.step {
                if step.accepted {
                    max_kkt = Some(max_kkt.map_or(step.kkt_residual, |m| m.max(step.kkt_residual)));
                } else {
                    let cand = crate::fbl::east(scn, &step.trajectory, &it.plan)?.east;
                    rejected_steps.push(RejectedStep { iteration: it.iteration, candidate_east_bps: cand });
                }
            }
            if let Some(msg) = &it.step_failure {
                step_failures.push(StepFailure { iteration: it.iteration, message: msg.clone() });
            }
        }
        Ok(Summary {
            scheme: rec.scheme,
            scenario_hash: scn.fingerprint(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            final_east_bps: rec.final_east(),
            initial_east_bps: rec.east_trace[0],
            iterations: rec.iteration_count(),
            termination: rec.termination,
            wall_seconds_total: rec.wall_seconds.iter().sum(),
            wall_seconds: rec.wall_seconds.clone(),
            max_kkt_residual: max_kkt,
            rejected_steps,
            step_failures,
            seed,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
