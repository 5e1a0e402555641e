//! Convex trajectory subproblem around a local point.
//!
//! With the blocklength plan fixed, the per-slot rate constraints are
//! rewritten with slack variables and every nonconvex piece is replaced by a
//! global under-estimator that is tight at the local point. The resulting
//! program is handed to [`crate::solver`].

use std::f64::consts::{LN_2, LOG2_E};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbl::{dispersion_unchecked, secrecy_rate_unchecked, BlocklengthPlan};
use crate::scenario::{Link, Point, Scenario, Trajectory};
use crate::solver::{self, Affine, Constraint, ConvexProblem, SolverOptions, SolverStatus, VarId};

/// Affine global under-estimator of `1/(x·y)` built at `(x0, y0)`.
pub fn f_lb(x: f64, y: f64, x0: f64, y0: f64) -> Result<f64> {
    if !(x > 0.0 && y > 0.0 && x0 > 0.0 && y0 > 0.0) {
        return Err(Error::domain("f_lb needs positive arguments"));
    }
    Ok(-(x * y0 + x0 * y - 3.0 * x0 * y0) / (x0 * x0 * y0 * y0))
}

/// `A0(x) = ½·ln(x(x+2))`.
pub fn a0(x0: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::domain(format!("A0 needs x0 > 0, got {x0}")));
    }
    Ok(0.5 * (x0 * (x0 + 2.0)).ln())
}

/// `A1(x) = (x+1)/(x(x+2))`, the slope of `A0`.
pub fn a1(x0: f64) -> Result<f64> {
    if !(x0 > 0.0) {
        return Err(Error::domain(format!("A1 needs x0 > 0, got {x0}")));
    }
    Ok((x0 + 1.0) / (x0 * (x0 + 2.0)))
}

/// Tangent of `½·ln(x(x+2))` at `x0`, evaluated at `x`. The function is
/// concave, so the tangent lies above it everywhere.
pub fn g_tangent(x: f64, x0: f64) -> Result<f64> {
    Ok(a0(x0)? + a1(x0)? * (x - x0))
}

/// `√(1 − (1+γ)⁻²)`, the dispersion root without the `log₂ e` factor.
fn dispersion_root(gamma: f64) -> f64 {
    let inv = 1.0 / (1.0 + gamma);
    (1.0 - inv * inv).sqrt()
}

/// Slack values of one active slot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotSlacks {
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta1: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub psi1: f64,
    pub u1: f64,
    pub v1: f64,
    pub v2: f64,
    /// Secure bits the slot is credited with.
    pub tau: f64,
}

/// Per-slot slacks; `None` marks a slot excluded from the rate constraints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlackPoint {
    pub slots: Vec<Option<SlotSlacks>>,
}

impl SlackPoint {
    pub fn active_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotCoefficients {
    pub b0: f64,
    /// Eve's mean uplink capacity plus her dispersion penalty; both are
    /// subtracted from Alice's rate, so the penalty enters with a plus.
    pub b1: f64,
    pub b2: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// `‖q_e‖² − ‖q_lo‖²`, m².
    pub d0_lo: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubproblemCoefficients {
    pub slots: Vec<Option<SlotCoefficients>>,
}

fn check_inputs(scn: &Scenario, traj_lo: &Trajectory, plan: &BlocklengthPlan) -> Result<()> {
    if traj_lo.len() != plan.len() || traj_lo.len() != scn.slots {
        return Err(Error::DimensionMismatch(format!(
            "{} waypoints, {} plan entries, {} slots",
            traj_lo.len(),
            plan.len(),
            scn.slots
        )));
    }
    // Re-check C1/C2 against this scenario.
    Trajectory::new(scn, traj_lo.waypoints().to_vec())?;
    Ok(())
}

/// `(1−ε)·min(R_u·l_u, R_d·l_d)` at `q`, or `None` for a slot that cannot be
/// credited (a silent hop or a nonpositive secure payload).
fn credited_bits(scn: &Scenario, q: &Point, l_u: u32, l_d: u32) -> Option<f64> {
    if l_u == 0 || l_d == 0 {
        return None;
    }
    let (qe, qn) = (scn.q_inv_eps(), scn.q_inv_eta());
    let r_u = secrecy_rate_unchecked(scn.snr(q, Link::UplinkRelay), scn.avg_eve_uplink_snr(), l_u as f64, qe, qn);
    let r_d = secrecy_rate_unchecked(
        scn.snr(q, Link::DownlinkBob),
        scn.snr(q, Link::DownlinkEve),
        l_d as f64,
        qe,
        qn,
    );
    let bits = (r_u * l_u as f64).min(r_d * l_d as f64);
    (bits > 0.0).then(|| (1.0 - scn.eps_dec) * bits)
}

pub fn coefficients(scn: &Scenario, traj_lo: &Trajectory, plan: &BlocklengthPlan) -> Result<SubproblemCoefficients> {
    check_inputs(scn, traj_lo, plan)?;
    let gae = scn.avg_eve_uplink_snr();
    let slots = traj_lo
        .waypoints()
        .iter()
        .enumerate()
        .map(|(n, q)| {
            let (l_u, l_d) = plan.slot(n);
            credited_bits(scn, q, l_u, l_d)?;
            let (lu, ld) = (l_u as f64, l_d as f64);
            let keep = 1.0 - scn.eps_dec;
            Some(SlotCoefficients {
                b0: scn.q_inv_eps() * LOG2_E / lu.sqrt(),
                b1: (1.0 + gae).log2() + (dispersion_unchecked(gae) / lu).sqrt() * scn.q_inv_eta(),
                b2: 1.0 / (lu * keep),
                c0: scn.q_inv_eps() * LOG2_E / ld.sqrt(),
                c1: scn.q_inv_eta() * LOG2_E / ld.sqrt(),
                c2: 1.0 / (ld * keep),
                d0_lo: scn.q_e.norm_squared() - q.norm_squared(),
            })
        })
        .collect();
    Ok(SubproblemCoefficients { slots })
}

/// Tight-point slacks at the local trajectory: every reformulated constraint
/// holds with equality or slack, so the point is feasible for the subproblem.
pub fn init_slacks(scn: &Scenario, traj_lo: &Trajectory, plan: &BlocklengthPlan) -> Result<SlackPoint> {
    check_inputs(scn, traj_lo, plan)?;
    let slots = traj_lo
        .waypoints()
        .iter()
        .enumerate()
        .map(|(n, q)| {
            let (l_u, l_d) = plan.slot(n);
            let tau = credited_bits(scn, q, l_u, l_d)?;
            let lambda1 = scn.snr(q, Link::UplinkRelay);
            let omega1 = scn.snr(q, Link::DownlinkBob);
            let v2 = scn.snr(q, Link::DownlinkEve);
            Some(SlotSlacks {
                lambda1,
                lambda2: 1.0 / lambda1,
                beta1: dispersion_root(lambda1),
                omega1,
                omega2: 1.0 / omega1,
                psi1: dispersion_root(omega1),
                u1: 1.0 / v2,
                v1: dispersion_root(v2),
                v2,
                tau,
            })
        })
        .collect();
    Ok(SlackPoint { slots })
}

/// Variable handles of one active slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SlotVars {
    pub tau: VarId,
    pub lambda1: VarId,
    pub lambda2: VarId,
    pub beta1: VarId,
    pub omega1: VarId,
    pub omega2: VarId,
    pub psi1: VarId,
    pub u1: VarId,
    pub v1: VarId,
    pub v2: VarId,
}

/// The assembled program plus what is needed to read its solution back.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub problem: ConvexProblem,
    /// `(x, y)` handles per slot.
    pub positions: Vec<(VarId, VarId)>,
    pub slots: Vec<Option<SlotVars>>,
    pub coefficients: SubproblemCoefficients,
    /// The local point as a variable vector; feasible by construction.
    pub start: Vec<f64>,
}

impl Subproblem {
    pub fn active_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

/// `1 ≤ f_lb(x, y; x0, y0)` as the affine row `1 − f_lb ≤ 0`.
fn product_cap(x: VarId, y: VarId, x0: f64, y0: f64) -> Constraint {
    let k = x0 * y0;
    Constraint::AffineIneq(
        Affine::constant(1.0 - 3.0 / k)
            .plus(x, 1.0 / (x0 * k))
            .plus(y, 1.0 / (y0 * k)),
    )
}

/// `ln a + ln(1 + b) ≥ tangent of ½ln(b(b+2))` at `b0`.
fn tangent_row(a: VarId, b: VarId, b0: f64) -> Result<Constraint> {
    let slope = a1(b0)?;
    Ok(Constraint::LogAffine {
        logs: vec![(1.0, Affine::var(a)), (1.0, Affine::var(b).plus_const(1.0))],
        rhs: Affine::var(b).scaled(slope).plus_const(a0(b0)? - slope * b0),
    })
}

fn distance_args(x: VarId, y: VarId, node: &Point, h: f64) -> Vec<Affine> {
    vec![
        Affine::var(x).plus_const(-node.x),
        Affine::var(y).plus_const(-node.y),
        Affine::constant(h - node.z),
    ]
}

pub fn build_subproblem(
    scn: &Scenario,
    traj_lo: &Trajectory,
    plan: &BlocklengthPlan,
    slacks_lo: &SlackPoint,
) -> Result<Subproblem> {
    let coefficients = coefficients(scn, traj_lo, plan)?;
    if slacks_lo.slots.len() != scn.slots {
        return Err(Error::DimensionMismatch(format!(
            "{} slack entries for {} slots",
            slacks_lo.slots.len(),
            scn.slots
        )));
    }
    if slacks_lo.active_slots() == 0 {
        return Err(Error::Degenerate("every slot is excluded from the rate constraints".into()));
    }
    let h = scn.altitude;
    let tau_cap = scn.l_max as f64 * (1.0 + scn.rho_a() / (h * h)).log2();
    let mut p = ConvexProblem::new();
    let mut start = Vec::new();
    let mut positions = Vec::with_capacity(scn.slots);
    let mut slots = Vec::with_capacity(scn.slots);

    let var = |p: &mut ConvexProblem, start: &mut Vec<f64>, name: String, lo: Option<f64>, hi: Option<f64>, scale: f64, x0: f64| {
        start.push(x0);
        p.add_var(name, lo, hi, scale)
    };

    for (n, q) in traj_lo.waypoints().iter().enumerate() {
        let x = var(&mut p, &mut start, format!("x[{n}]"), None, None, 1000.0, q.x);
        let y = var(&mut p, &mut start, format!("y[{n}]"), None, None, 1000.0, q.y);
        positions.push((x, y));
        let (Some(s), Some(_)) = (slacks_lo.slots[n], coefficients.slots[n]) else {
            slots.push(None);
            continue;
        };
        let zero = Some(0.0);
        let mut pos = |name: &str, v: f64| var(&mut p, &mut start, format!("{name}[{n}]"), zero, None, v, v);
        let lambda1 = pos("lambda1", s.lambda1);
        let lambda2 = pos("lambda2", s.lambda2);
        let beta1 = pos("beta1", s.beta1);
        let omega1 = pos("omega1", s.omega1);
        let omega2 = pos("omega2", s.omega2);
        let psi1 = pos("psi1", s.psi1);
        let u1 = pos("u1", s.u1);
        let v1 = pos("v1", s.v1);
        let v2 = pos("v2", s.v2);
        let tau = var(
            &mut p,
            &mut start,
            format!("tau[{n}]"),
            zero,
            Some(tau_cap),
            s.tau.max(1.0),
            s.tau,
        );
        p.set_objective(tau, 1.0);
        slots.push(Some(SlotVars {
            tau,
            lambda1,
            lambda2,
            beta1,
            omega1,
            omega2,
            psi1,
            u1,
            v1,
            v2,
        }));
    }

    // C1 endpoints.
    let (x_first, y_first) = positions[0];
    let (x_last, y_last) = positions[scn.slots - 1];
    for (v, target) in [(x_first, scn.q_i.x), (y_first, scn.q_i.y), (x_last, scn.q_f.x), (y_last, scn.q_f.y)] {
        p.add_row(Constraint::AffineEq(Affine::var(v).plus_const(-target)), "C1", None);
    }
    // C2 per-slot displacement.
    for n in 0..scn.slots.saturating_sub(1) {
        let (x0, y0) = positions[n];
        let (x1, y1) = positions[n + 1];
        p.add_row(
            Constraint::Soc {
                args: vec![Affine::var(x1).plus(x0, -1.0), Affine::var(y1).plus(y0, -1.0)],
                bound: Affine::constant(scn.max_step()),
            },
            "C2",
            Some(n),
        );
    }

    for (n, q_lo) in traj_lo.waypoints().iter().enumerate() {
        let (Some(v), Some(c), Some(s)) = (slots[n], coefficients.slots[n], slacks_lo.slots[n]) else {
            continue;
        };
        let (x, y) = positions[n];
        let slot = Some(n);
        p.add_row(
            Constraint::LogAffine {
                logs: vec![(1.0 / LN_2, Affine::var(v.lambda1).plus_const(1.0))],
                rhs: Affine::var(v.beta1)
                    .scaled(c.b0)
                    .plus(v.tau, c.b2)
                    .plus_const(c.b1),
            },
            "uplink_rate",
            slot,
        );
        p.add_row(
            Constraint::QuadBall {
                args: distance_args(x, y, &scn.q_a, q_lo.z),
                bound: Affine::var(v.lambda2).scaled(scn.rho_a()),
            },
            "uplink_distance",
            slot,
        );
        p.add_row(product_cap(v.lambda1, v.lambda2, s.lambda1, s.lambda2), "uplink_product", slot);
        p.add_row(tangent_row(v.beta1, v.lambda1, s.lambda1)?, "uplink_dispersion", slot);
        p.add_row(
            Constraint::LogAffine {
                logs: vec![
                    (1.0 / LN_2, Affine::var(v.omega1).plus_const(1.0)),
                    (1.0 / LN_2, Affine::var(v.u1)),
                    (-1.0 / LN_2, Affine::var(v.u1).plus_const(1.0)),
                ],
                rhs: Affine::var(v.psi1)
                    .scaled(c.c0)
                    .plus(v.v1, c.c1)
                    .plus(v.tau, c.c2),
            },
            "downlink_rate",
            slot,
        );
        p.add_row(product_cap(v.omega1, v.omega2, s.omega1, s.omega2), "downlink_product", slot);
        p.add_row(
            Constraint::QuadBall {
                args: distance_args(x, y, &scn.q_b, q_lo.z),
                bound: Affine::var(v.omega2).scaled(scn.rho_r()),
            },
            "downlink_distance",
            slot,
        );
        p.add_row(tangent_row(v.psi1, v.omega1, s.omega1)?, "downlink_dispersion", slot);
        // ρ_r·u1 ≤ 2(q_lo − q_e)ᵀq + d0, with q = [x, y, H].
        let gx = 2.0 * (q_lo.x - scn.q_e.x);
        let gy = 2.0 * (q_lo.y - scn.q_e.y);
        let gz = 2.0 * (q_lo.z - scn.q_e.z) * q_lo.z;
        p.add_row(
            Constraint::AffineIneq(
                Affine::var(v.u1)
                    .scaled(scn.rho_r())
                    .plus(x, -gx)
                    .plus(y, -gy)
                    .plus_const(-gz - c.d0_lo),
            ),
            "eve_distance",
            slot,
        );
        p.add_row(tangent_row(v.v1, v.v2, s.v2)?, "eve_dispersion", slot);
        p.add_row(Constraint::Reciprocal { var: v.u1, denom: v.v2 }, "eve_reciprocal", slot);
    }

    Ok(Subproblem {
        problem: p,
        positions,
        slots,
        coefficients,
        start,
    })
}

/// Writes one CSV line per row: index, kind, family, slot, the row as JSON,
/// and its signed residual at the local point.
pub fn write_debug_dump(sub: &Subproblem, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "kind", "family", "slot", "coefficients", "residual_at_start"])?;
    for (i, row) in sub.problem.rows().iter().enumerate() {
        let residual = row
            .constraint
            .residual(&sub.start)
            .map_or_else(|| "domain".to_string(), |r| format!("{r:.12e}"));
        w.write_record([
            i.to_string(),
            row.constraint.kind().to_string(),
            row.label.family.to_string(),
            row.label.slot.map_or_else(String::new, |s| s.to_string()),
            serde_json::to_string(&row.constraint)?,
            residual,
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryStep {
    pub trajectory: Trajectory,
    /// Credited secure bits per slot (zero for excluded slots).
    pub tau: Vec<f64>,
    /// Slots that carried rate constraints.
    pub active: Vec<bool>,
    pub objective: f64,
    /// `Σ τ` at the local point.
    pub start_objective: f64,
    pub status: SolverStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// Builds the subproblem at `traj_lo`, solves it, and reads back the new
/// trajectory and `τ`.
pub fn solve_trajectory_step(scn: &Scenario, traj_lo: &Trajectory, plan: &BlocklengthPlan) -> Result<TrajectoryStep> {
    solve_trajectory_step_with(scn, traj_lo, plan, &SolverOptions::default())
}

pub fn solve_trajectory_step_with(
    scn: &Scenario,
    traj_lo: &Trajectory,
    plan: &BlocklengthPlan,
    opts: &SolverOptions,
) -> Result<TrajectoryStep> {
    let slacks = init_slacks(scn, traj_lo, plan)?;
    let sub = build_subproblem(scn, traj_lo, plan, &slacks)?;
    let start_objective = sub.problem.objective_value(&sub.start);
    let res = solver::solve(&sub.problem, &sub.start, opts)?;
    if res.status != SolverStatus::Optimal {
        return Err(Error::Solver {
            status: res.status,
            message: res.message,
        });
    }
    let last = scn.slots - 1;
    let waypoints: Vec<Point> = sub
        .positions
        .iter()
        .enumerate()
        .map(|(n, &(x, y))| match n {
            0 => scn.q_i,
            n if n == last => scn.q_f,
            _ => Point::new(res.x[x.index()], res.x[y.index()], scn.altitude),
        })
        .collect();
    let trajectory = Trajectory::new(scn, waypoints)?;
    let tau = sub
        .slots
        .iter()
        .map(|s| s.map_or(0.0, |v| res.x[v.tau.index()]))
        .collect();
    let active = sub.slots.iter().map(Option::is_some).collect();
    Ok(TrajectoryStep {
        trajectory,
        tau,
        active,
        objective: res.objective,
        start_objective,
        status: res.status,
        iterations: res.iterations,
        kkt_residual: res.kkt_residual,
    })
}
