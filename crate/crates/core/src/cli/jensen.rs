//! Monte-Carlo check of the mean-SNR substitution for Eve's faded uplink.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bsca::initial_point;
use crate::error::{Error, Result};
use crate::fbl::{mc_secrecy_rate_ul_from_draws, secrecy_rate_ul};
use crate::scenario::{unit_exponential_samples, Scenario};

use super::artifacts::fmt_num;

/// Fewest draws accepted by [`validate_jensen`].
pub const MIN_SAMPLES: usize = 10_000;

pub const JENSEN_HEADER: [&str; 9] = [
    "n",
    "l_u",
    "rate_jensen_bits_per_use",
    "rate_mc_bits_per_use",
    "rate_mc_std_error",
    "rate_gap_bits_per_use",
    "log_eve_mc",
    "log_eve_jensen",
    "direction_holds",
];

#[derive(Clone, Debug, Serialize)]
pub struct JensenSlot {
    pub n: usize,
    pub l_u: u32,
    /// Uplink rate with Eve's SNR replaced by its mean.
    pub rate_jensen: f64,
    /// Sample mean of the uplink rate over faded Eve SNRs.
    pub rate_mc: f64,
    pub rate_mc_std_error: f64,
    /// `rate_jensen − rate_mc`.
    pub gap: f64,
    pub log_eve_mc: f64,
    pub log_eve_jensen: f64,
    /// `log_eve_mc ≤ log_eve_jensen`.
    pub direction_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JensenReport {
    pub samples: usize,
    pub seed: u64,
    pub slots: Vec<JensenSlot>,
    pub violations: usize,
    pub max_gap: f64,
    pub mean_gap: f64,
}

/// Compares the two rates on every slot of the straight-line, even-split
/// starting point. All slots share one set of fading draws.
pub fn jensen_report(scn: &Scenario, samples: usize, seed: u64) -> Result<JensenReport> {
    if samples < MIN_SAMPLES {
        return Err(Error::Config(format!("mc_samples must be at least {MIN_SAMPLES}, got {samples}")));
    }
    let (traj, plan) = initial_point(scn)?;
    let draws: Vec<f64> = unit_exponential_samples(seed).take(samples).collect();
    let slots = traj
        .waypoints()
        .par_iter()
        .enumerate()
        .map(|(n, q)| {
            let (l_u, _) = plan.slot(n);
            let mc = mc_secrecy_rate_ul_from_draws(scn, q, l_u, draws.iter().copied())?;
            let rate_jensen = secrecy_rate_ul(scn, q, l_u)?;
            Ok(JensenSlot {
                n,
                l_u,
                rate_jensen,
                rate_mc: mc.rate,
                rate_mc_std_error: mc.std_error,
                gap: rate_jensen - mc.rate,
                log_eve_mc: mc.mean_log_eve,
                log_eve_jensen: mc.jensen_log_eve,
                direction_holds: mc.mean_log_eve <= mc.jensen_log_eve,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = slots.iter().filter(|s| !s.direction_holds).count();
    let max_gap = slots.iter().map(|s| s.gap).fold(f64::NEG_INFINITY, f64::max);
    let mean_gap = slots.iter().map(|s| s.gap).sum::<f64>() / slots.len().max(1) as f64;
    Ok(JensenReport { samples, seed, slots, violations, max_gap, mean_gap })
}

pub fn write_jensen_csv(path: &Path, report: &JensenReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(JENSEN_HEADER)?;
    for s in &report.slots {
        w.write_record([
            s.n.to_string(),
            s.l_u.to_string(),
            fmt_num(s.rate_jensen),
            fmt_num(s.rate_mc),
            fmt_num(s.rate_mc_std_error),
            fmt_num(s.gap),
            fmt_num(s.log_eve_mc),
            fmt_num(s.log_eve_jensen),
            s.direction_holds.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
