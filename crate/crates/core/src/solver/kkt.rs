//! KKT residuals of a candidate primal/dual pair.
//!
//! Each inequality is read as `ĝ(x) ≥ 0` with `ĝ` its [`Constraint::residual`];
//! cones are paired with a vector dual `(y₀, y)` in the (self-dual) Lorentz cone.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::problem::{Affine, Constraint, ConvexProblem};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RowDual {
    Scalar(f64),
    Cone { t: f64, u: Vec<f64> },
    Eq(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Duals {
    /// One entry per problem row, in row order.
    pub rows: Vec<RowDual>,
    /// Multipliers of the variable lower/upper bounds (zero where absent).
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Duals {
    /// All-zero duals shaped for `problem`.
    pub fn zeros(problem: &ConvexProblem) -> Self {
        let rows = problem
            .rows()
            .iter()
            .map(|r| match &r.constraint {
                Constraint::AffineEq(_) => RowDual::Eq(0.0),
                Constraint::Soc { args, .. } => RowDual::Cone {
                    t: 0.0,
                    u: vec![0.0; args.len()],
                },
                _ => RowDual::Scalar(0.0),
            })
            .collect();
        let n = problem.num_vars();
        Duals {
            rows,
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KktReport {
    /// `‖D·(c + Σ λ·∇ĝ)‖_∞ / (1 + max_i Σ |D·λ·∇ĝ|_i)` with `D` the variable
    /// scales, so that zero duals give the plain objective gradient.
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    /// Largest `|λ·ĝ|`, relative to `1 + |objective|`.
    pub complementarity: f64,
    pub max: f64,
}

impl KktReport {
    fn infinite() -> Self {
        KktReport {
            stationarity: f64::INFINITY,
            primal: f64::INFINITY,
            dual: f64::INFINITY,
            complementarity: f64::INFINITY,
            max: f64::INFINITY,
        }
    }
}

fn add_affine(grad: &mut [f64], a: &Affine, k: f64) {
    for &(v, c) in &a.terms {
        grad[v.index()] += k * c;
    }
}

/// Gradient contribution `λ·∇ĝ` of one inequality row. Returns `false` when
/// `x` is outside the row's domain.
fn add_row_gradient(grad: &mut [f64], c: &Constraint, dual: &RowDual, x: &[f64]) -> bool {
    match (c, dual) {
        (Constraint::AffineEq(a), RowDual::Eq(nu)) => add_affine(grad, a, *nu),
        (Constraint::AffineIneq(a), RowDual::Scalar(l)) => add_affine(grad, a, -l),
        (Constraint::QuadBall { args, bound }, RowDual::Scalar(l)) => {
            add_affine(grad, bound, *l);
            for a in args {
                add_affine(grad, a, -2.0 * l * a.eval(x));
            }
        }
        (Constraint::Soc { args, bound }, RowDual::Cone { t, u }) => {
            add_affine(grad, bound, *t);
            for (a, y) in args.iter().zip(u) {
                add_affine(grad, a, *y);
            }
        }
        (Constraint::LogAffine { logs, rhs }, RowDual::Scalar(l)) => {
            for (w, a) in logs {
                let v = a.eval(x);
                if !(v > 0.0) {
                    return false;
                }
                add_affine(grad, a, l * w / v);
            }
            add_affine(grad, rhs, -l);
        }
        (Constraint::Reciprocal { var, denom }, RowDual::Scalar(l)) => {
            let d = x[denom.index()];
            if !(d > 0.0) {
                return false;
            }
            grad[var.index()] += l;
            grad[denom.index()] += l / (d * d);
        }
        _ => return false,
    }
    true
}

/// Scaled stationarity, primal, dual and complementarity residuals of
/// `(x, duals)`; every field is `+∞` if `x` violates a row's domain or the
/// duals do not match the problem's shape. Equality multipliers in `duals`
/// are ignored and refitted by least squares.
pub fn check_kkt(problem: &ConvexProblem, x: &[f64], duals: &Duals) -> KktReport {
    let n = problem.num_vars();
    if x.len() != n || duals.rows.len() != problem.rows().len() || duals.lower.len() != n {
        return KktReport::infinite();
    }
    let scale: Vec<f64> = problem.vars().iter().map(|v| v.scale).collect();
    let obj = problem.objective_value(x);

    let mut grad = problem.objective().to_vec();
    // Per-variable size of the multiplier terms, for the relative scaling.
    let mut size = vec![0.0_f64; n];
    let mut tmp = vec![0.0_f64; n];
    let mut dual_res = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut eq_rows = Vec::new();
    for (row, dual) in problem.rows().iter().zip(&duals.rows) {
        let c = &row.constraint;
        if let Constraint::AffineEq(a) = c {
            eq_rows.push(a);
            continue;
        }
        if !add_row_gradient(&mut tmp, c, dual, x) {
            return KktReport::infinite();
        }
        c.for_each_var(|v| {
            let i = v.index();
            if tmp[i] != 0.0 {
                grad[i] += tmp[i];
                size[i] += tmp[i].abs();
                tmp[i] = 0.0;
            }
        });
        let Some(g) = c.residual(x) else {
            return KktReport::infinite();
        };
        match dual {
            RowDual::Scalar(l) => {
                dual_res = dual_res.max(-l);
                comp = comp.max((l * g).abs());
            }
            RowDual::Cone { t, u } => {
                let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
                dual_res = dual_res.max(norm - t);
                let Constraint::Soc { args, bound } = c else { unreachable!() };
                let pair = t * bound.eval(x) + args.iter().zip(u).map(|(a, y)| y * a.eval(x)).sum::<f64>();
                comp = comp.max(pair.abs());
            }
            RowDual::Eq(_) => return KktReport::infinite(),
        }
    }
    for (i, var) in problem.vars().iter().enumerate() {
        let (lo, hi) = (duals.lower[i], duals.upper[i]);
        grad[i] += lo - hi;
        size[i] += lo.abs() + hi.abs();
        dual_res = dual_res.max(-lo).max(-hi);
        if let Some(b) = var.lower {
            comp = comp.max((lo * (x[i] - b)).abs());
        }
        if let Some(b) = var.upper {
            comp = comp.max((hi * (b - x[i])).abs());
        }
    }

    // Equality multipliers: least squares on the scaled gradient.
    let mut r: Vec<f64> = grad.iter().zip(&scale).map(|(g, s)| g * s).collect();
    if !eq_rows.is_empty() {
        let k = eq_rows.len();
        let mut a = DMatrix::<f64>::zeros(k, n);
        for (row, aff) in eq_rows.iter().enumerate() {
            for &(v, c) in &aff.terms {
                a[(row, v.index())] += c * scale[v.index()];
            }
        }
        let rv = DVector::from_column_slice(&r);
        let aat = &a * a.transpose();
        let rhs = -(&a * &rv);
        let nu = aat
            .clone()
            .lu()
            .solve(&rhs)
            .or_else(|| (aat + DMatrix::identity(k, k) * 1e-12).lu().solve(&rhs))
            .unwrap_or_else(|| DVector::zeros(k));
        let fitted = rv + a.transpose() * nu;
        r = fitted.iter().copied().collect();
    }
    let size = size.iter().zip(&scale).fold(0.0_f64, |m, (v, s)| m.max(v * s));
    let stationarity = r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / (1.0 + size);
    let primal = problem.max_violation(x).max(0.0);
    let complementarity = comp / (1.0 + obj.abs());
    let max = stationarity.max(primal).max(dual_res.max(0.0)).max(complementarity);
    if !max.is_finite() {
        return KktReport::infinite();
    }
    KktReport {
        stationarity,
        primal,
        dual: dual_res.max(0.0),
        complementarity,
        max,
    }
}
