//! Alternating blocklength / trajectory optimization and its benchmarks.
//!
//! Every reported EAST value is recomputed from the true finite-blocklength
//! rates of the current iterate, never taken from the surrogate `τ`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use serde::Serialize;

use crate::blocklength::optimize_plan;
use crate::error::{Error, Result};
use crate::fbl::{east, BlocklengthPlan, SlotMetrics};
use crate::sca::solve_trajectory_step;
use crate::scenario::{Scenario, Trajectory};

/// Outer iterations allowed before a run is cut off.
pub const MAX_ITERATIONS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scheme {
    /// Joint trajectory and blocklength design.
    #[serde(rename = "JTBD")]
    Jtbd,
    /// Trajectory only, blocklengths fixed at the even split.
    #[serde(rename = "TDFB")]
    Tdfb,
    /// Blocklengths only, on the straight-line trajectory.
    #[serde(rename = "BDFT")]
    Bdft,
    /// Straight line and even split, no optimization.
    #[serde(rename = "Baseline")]
    Baseline,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Jtbd, Scheme::Tdfb, Scheme::Bdft, Scheme::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Jtbd => "JTBD",
            Scheme::Tdfb => "TDFB",
            Scheme::Bdft => "BDFT",
            Scheme::Baseline => "Baseline",
        }
    }

    fn optimizes_plan(self) -> bool {
        matches!(self, Scheme::Jtbd | Scheme::Bdft)
    }

    fn optimizes_trajectory(self) -> bool {
        matches!(self, Scheme::Jtbd | Scheme::Tdfb)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?} (expected JTBD, TDFB, BDFT or Baseline)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    /// `|EAST⁽ⁱ⁾ − EAST⁽ⁱ⁻¹⁾| ≤ eps_conv`.
    Converged,
    IterationCap,
    /// BDFT's single exact pass moved EAST by more than `eps_conv`.
    SinglePass,
    /// Baseline: nothing is optimized.
    NoIterations,
}

/// The trajectory step attempted in one outer iteration.
#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    /// The step's trajectory, whether or not it was adopted.
    pub trajectory: Trajectory,
    /// Credited bits per slot from the surrogate.
    pub tau: Vec<f64>,
    /// Slots whose rates were constrained by the step.
    pub active: Vec<bool>,
    pub solver_iterations: usize,
    pub kkt_residual: f64,
    /// `false` when the true EAST of the step fell below the current one.
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub east: f64,
    pub wall_seconds: f64,
    /// Plan used in this iteration.
    pub plan: BlocklengthPlan,
    pub step: Option<StepRecord>,
    /// Why no step was taken, when a trajectory step was due.
    pub step_failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub scheme: Scheme,
    /// EAST in bps; entry 0 is the initial point.
    pub east_trace: Vec<f64>,
    /// Wall-clock seconds per entry of `east_trace` (0 for the initial point).
    pub wall_seconds: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub trajectory: Trajectory,
    pub plan: BlocklengthPlan,
    pub slots: Vec<SlotMetrics>,
    pub termination: Termination,
}

impl RunRecord {
    pub fn final_east(&self) -> f64 {
        *self.east_trace.last().expect("trace holds the initial point")
    }

    /// Outer iterations performed (excluding the initial evaluation).
    pub fn iteration_count(&self) -> usize {
        self.east_trace.len() - 1
    }
}

/// Straight line at constant speed and the even split `L_max/2` (remainder
/// to the downlink).
pub fn initial_point(scn: &Scenario) -> Result<(Trajectory, BlocklengthPlan)> {
    if scn.endpoint_distance() > (scn.slots.saturating_sub(1)) as f64 * scn.max_step() + 1e-6 {
        return Err(Error::scenario(
            "|q_i - q_f| <= (N-1) v_max delta_t",
            format!("endpoints {:.3} m apart", scn.endpoint_distance()),
        ));
    }
    let traj = Trajectory::straight_line(scn);
    let l_u = scn.l_max / 2;
    let plan = BlocklengthPlan::uniform(scn.slots, l_u, scn.l_max - l_u);
    Ok((traj, plan))
}

pub fn run_jtbd(scn: &Scenario) -> Result<RunRecord> {
    run_scheme(scn, Scheme::Jtbd)
}

pub fn run_tdfb(scn: &Scenario) -> Result<RunRecord> {
    run_scheme(scn, Scheme::Tdfb)
}

pub fn run_bdft(scn: &Scenario) -> Result<RunRecord> {
    run_scheme(scn, Scheme::Bdft)
}

pub fn run_baseline(scn: &Scenario) -> Result<RunRecord> {
    run_scheme(scn, Scheme::Baseline)
}

pub fn run_scheme(scn: &Scenario, scheme: Scheme) -> Result<RunRecord> {
    let (mut traj, mut plan) = initial_point(scn)?;
    let mut current = east(scn, &traj, &plan)?.east;
    let mut east_trace = vec![current];
    let mut wall_seconds = vec![0.0];
    let mut iterations = Vec::new();
    let mut termination = Termination::NoIterations;

    if scheme != Scheme::Baseline {
        termination = Termination::IterationCap;
        for i in 1..=MAX_ITERATIONS {
            let started = Instant::now();
            if scheme.optimizes_plan() {
                plan = optimize_plan(scn, &traj);
            }
            // The plan step is exact for the current trajectory, so this is
            // never below the previous EAST.
            let mut value = east(scn, &traj, &plan)?.east;
            let mut step = None;
            let mut step_failure = None;
            if scheme.optimizes_trajectory() {
                match solve_trajectory_step(scn, &traj, &plan) {
                    Ok(s) => {
                        let candidate = east(scn, &s.trajectory, &plan)?.east;
                        let accepted = candidate >= value;
                        if accepted {
                            traj = s.trajectory.clone();
                            value = candidate;
                        } else {
                            debug!("{scheme} iteration {i}: step lowers EAST {value:.6} -> {candidate:.6}; kept");
                        }
                        step = Some(StepRecord {
                            trajectory: s.trajectory,
                            tau: s.tau,
                            active: s.active,
                            solver_iterations: s.iterations,
                            kkt_residual: s.kkt_residual,
                            accepted,
                        });
                    }
                    Err(e @ (Error::Solver { .. } | Error::Degenerate(_))) => {
                        warn!("{scheme} iteration {i}: {e}; keeping the previous trajectory");
                        step_failure = Some(e.to_string());
                    }
                    Err(e) => return Err(e),
                }
            }
            let elapsed = started.elapsed().as_secs_f64();
            info!("{scheme} iteration {i}: EAST {value:.6} bps ({elapsed:.3} s)");
            let delta = (value - current).abs();
            current = value;
            east_trace.push(value);
            wall_seconds.push(elapsed);
            iterations.push(IterationRecord {
                iteration: i,
                east: value,
                wall_seconds: elapsed,
                plan: plan.clone(),
                step,
                step_failure,
            });
            if delta <= scn.eps_conv {
                termination = Termination::Converged;
                break;
            }
            if scheme == Scheme::Bdft {
                termination = Termination::SinglePass;
                break;
            }
        }
    }

    let eval = east(scn, &traj, &plan)?;
    Ok(RunRecord {
        scheme,
        east_trace,
        wall_seconds,
        iterations,
        trajectory: traj,
        plan,
        slots: eval.slots,
        termination,
    })
}
