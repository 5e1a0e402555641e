//! Log-barrier interior-point solver for the smooth convex programs built by
//! [`crate::sca`].
//!
//! Variables are rescaled by their declared characteristic magnitude, each
//! inequality contributes `−ln s(x)` to the barrier (`−ln(t² − ‖u‖²)` for
//! cones), and every centering step is a damped Newton iteration whose KKT
//! system is solved with a banded Cholesky factorization bordered by the few
//! equality rows. A phase-I problem supplies a strictly feasible point when
//! the caller's start sits on the boundary.

mod banded;
mod barrier;
mod kkt;
mod problem;

use serde::Serialize;

pub use barrier::solve;
pub use kkt::{check_kkt, Duals, KktReport, RowDual};
pub use problem::{Affine, Constraint, ConvexProblem, Row, RowLabel, VarId, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolverStatus {
    Optimal,
    /// A centering stage exceeded its Newton-step budget.
    MaxIterations,
    NumericalFailure,
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub mu0: f64,
    pub mu_factor: f64,
    /// Stop once the duality-gap bound `θ·μ` is at most `gap_tol·(1 + |objective|)`.
    pub gap_tol: f64,
    /// Newton steps allowed in a single centering stage.
    pub max_newton: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu0: 1.0,
            mu_factor: 0.1,
            gap_tol: 1e-6,
            max_newton: 200,
            armijo: 0.01,
            backtrack: 0.5,
            kkt_tol: 1e-6,
            feas_tol: 1e-7,
            trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Phase {
    Feasibility,
    Optimality,
}

/// One Newton step of the solve.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub phase: Phase,
    pub stage: usize,
    pub iteration: usize,
    pub mu: f64,
    pub objective: f64,
    pub decrement: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub status: SolverStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub kkt: KktReport,
    pub duals: Duals,
    /// Total Newton steps over both phases.
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    pub message: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn linear_toy() {
        let mut p = ConvexProblem::new();
        let t = p.add_var("t", None, None, 1.0);
        p.set_objective(t, 1.0);
        p.add_row(Constraint::AffineIneq(Affine::var(t).plus_const(-5.0)), "cap", None);
        let r = solve(&p, &[0.0], &opts()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal, "{}", r.message);
        assert!((r.x[0] - 5.0).abs() < 1e-6 * 6.0);
        assert!(r.kkt_residual <= 1e-6);
    }

    #[test]
    fn log_toy() {
        let mut p = ConvexProblem::new();
        let x = p.add_var("x", None, Some(E * E), 1.0);
        let t = p.add_var("t", None, None, 1.0);
        p.set_objective(t, 1.0);
        p.add_row(
            Constraint::LogAffine {
                logs: vec![(1.0, Affine::var(x))],
                rhs: Affine::var(t),
            },
            "log",
            None,
        );
        let r = solve(&p, &[1.0, -1.0], &opts()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal, "{}", r.message);
        assert!((r.x[1] - 2.0).abs() < 1e-6 * 3.0, "{:?}", r.x);
    }

    #[test]
    fn cone_toy_from_boundary() {
        let mut p = ConvexProblem::new();
        let q0 = p.add_var("q0", None, None, 1.0);
        let q1 = p.add_var("q1", None, None, 1.0);
        let t = p.add_var("t", None, None, 1.0);
        p.set_objective(t, 1.0);
        p.add_row(
            Constraint::Soc {
                args: vec![Affine::var(q0).plus_const(-3.0), Affine::var(q1).plus_const(-4.0)],
                bound: Affine::constant(5.0).plus(t, -1.0),
            },
            "cone",
            None,
        );
        let r = solve(&p, &[0.0, 0.0, 0.0], &opts()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal, "{}", r.message);
        assert!((r.x[2] - 5.0).abs() < 1e-6 * 6.0);
        assert!((r.x[0] - 3.0).abs() < 1e-3 && (r.x[1] - 4.0).abs() < 1e-3, "{:?}", r.x);
    }

    #[test]
    fn equality_and_reciprocal() {
        // max -(x + y) s.t. x >= 1/y, x = 2 y  ->  y = 1/sqrt 2.
        let mut p = ConvexProblem::new();
        let x = p.add_var("x", Some(0.0), None, 1.0);
        let y = p.add_var("y", Some(0.0), None, 1.0);
        p.set_objective(x, -1.0);
        p.set_objective(y, -1.0);
        p.add_row(Constraint::Reciprocal { var: x, denom: y }, "recip", None);
        p.add_row(Constraint::AffineEq(Affine::var(x).plus(y, -2.0)), "link", None);
        let r = solve(&p, &[4.0, 2.0], &opts()).unwrap();
        assert_eq!(r.status, SolverStatus::Optimal, "{}", r.message);
        let y_opt = 0.5f64.sqrt();
        assert!((r.x[1] - y_opt).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn kkt_definitions() {
        let mut p = ConvexProblem::new();
        let a = p.add_var("a", None, None, 1.0);
        let b = p.add_var("b", None, None, 1.0);
        p.set_objective(a, 3.0);
        p.set_objective(b, -4.0);
        let rep = check_kkt(&p, &[0.0, 0.0], &Duals::zeros(&p));
        assert_eq!(rep.stationarity, 4.0);

        let mut p = ConvexProblem::new();
        let t = p.add_var("t", None, None, 1.0);
        p.set_objective(t, 1.0);
        p.add_row(Constraint::AffineIneq(Affine::var(t).plus_const(-5.0)), "cap", None);
        let r = solve(&p, &[0.0], &opts()).unwrap();
        let moved = check_kkt(&p, &[r.x[0] - 1e-2], &r.duals);
        assert!(moved.max > r.kkt_residual);

        let mut p = ConvexProblem::new();
        let x = p.add_var("x", None, None, 1.0);
        p.add_row(
            Constraint::LogAffine { logs: vec![(1.0, Affine::var(x))], rhs: Affine::constant(0.0) },
            "log",
            None,
        );
        assert!(check_kkt(&p, &[-1.0], &Duals::zeros(&p)).max.is_infinite());
    }

    #[test]
    fn deterministic() {
        let mut p = ConvexProblem::new();
        let q0 = p.add_var("q0", None, None, 1.0);
        let t = p.add_var("t", None, None, 1.0);
        p.set_objective(t, 1.0);
        p.add_row(
            Constraint::QuadBall { args: vec![Affine::var(q0).plus_const(-1.0)], bound: Affine::constant(4.0).plus(t, -1.0) },
            "ball",
            None,
        );
        let a = solve(&p, &[0.0, 0.0], &opts()).unwrap();
        let b = solve(&p, &[0.0, 0.0], &opts()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.x, b.x);
        assert!((a.x[1] - 4.0).abs() < 1e-6 * 5.0);
    }
}
