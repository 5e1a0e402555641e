use serde::Serialize;

use crate::error::{Error, Result};

/// Index of a declared variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// `Σ cᵢ·xᵢ + d`.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Affine {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(d: f64) -> Self {
        Affine { terms: Vec::new(), constant: d }
    }

    pub fn var(v: VarId) -> Self {
        Affine::constant(0.0).plus(v, 1.0)
    }

    pub fn plus(mut self, v: VarId, c: f64) -> Self {
        if c != 0.0 {
            self.terms.push((v, c));
        }
        self
    }

    pub fn plus_const(mut self, d: f64) -> Self {
        self.constant += d;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= k;
        }
        self.constant *= k;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>() + self.constant
    }

    /// Sum of absolute term values at `x`; a size measure for residual scaling.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| (c * x[v.0]).abs()).sum::<f64>() + self.constant.abs()
    }
}

/// One typed constraint. Inequalities are stated in their natural direction;
/// [`Constraint::residual`] is nonnegative exactly when the row holds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Constraint {
    /// `a(x) = 0`.
    AffineEq(Affine),
    /// `a(x) ≤ 0`.
    AffineIneq(Affine),
    /// `Σₖ aₖ(x)² ≤ bound(x)`.
    QuadBall { args: Vec<Affine>, bound: Affine },
    /// `‖(aₖ(x))ₖ‖ ≤ bound(x)`.
    Soc { args: Vec<Affine>, bound: Affine },
    /// `Σᵢ wᵢ·ln aᵢ(x) ≥ rhs(x)` with every `aᵢ(x) > 0`. Weights may be
    /// negative; the caller guarantees the left side is concave.
    LogAffine { logs: Vec<(f64, Affine)>, rhs: Affine },
    /// `x_var ≥ 1/x_denom`, `x_denom > 0`.
    Reciprocal { var: VarId, denom: VarId },
}

impl Constraint {
    pub fn is_equality(&self) -> bool {
        matches!(self, Constraint::AffineEq(_))
    }

    /// Signed residual: `≥ 0` when satisfied (equalities return `−|a(x)|`).
    /// `None` when `x` lies outside the row's domain.
    pub fn residual(&self, x: &[f64]) -> Option<f64> {
        match self {
            Constraint::AffineEq(a) => Some(-a.eval(x).abs()),
            Constraint::AffineIneq(a) => Some(-a.eval(x)),
            Constraint::QuadBall { args, bound } => {
                Some(bound.eval(x) - args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>())
            }
            Constraint::Soc { args, bound } => Some(
                bound.eval(x) - args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt(),
            ),
            Constraint::LogAffine { logs, rhs } => {
                let mut lhs = 0.0;
                for (w, a) in logs {
                    let v = a.eval(x);
                    if !(v > 0.0) {
                        return None;
                    }
                    lhs += w * v.ln();
                }
                Some(lhs - rhs.eval(x))
            }
            Constraint::Reciprocal { var, denom } => {
                let d = x[denom.0];
                if !(d > 0.0) {
                    return None;
                }
                Some(x[var.0] - 1.0 / d)
            }
        }
    }

    /// Size of the row's terms at `x`, used to make residuals relative.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::AffineEq(a) | Constraint::AffineIneq(a) => a.magnitude(x),
            Constraint::QuadBall { args, bound } => {
                bound.magnitude(x) + args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>()
            }
            Constraint::Soc { args, bound } => {
                bound.magnitude(x) + args.iter().map(|a| a.eval(x).powi(2)).sum::<f64>().sqrt()
            }
            Constraint::LogAffine { logs, rhs } => {
                rhs.magnitude(x)
                    + logs
                        .iter()
                        .map(|(w, a)| (w * a.eval(x).max(f64::MIN_POSITIVE).ln()).abs())
                        .sum::<f64>()
            }
            Constraint::Reciprocal { var, denom } => x[var.0].abs() + 1.0 / x[denom.0].abs(),
        }
    }

    pub(crate) fn for_each_var(&self, mut f: impl FnMut(VarId)) {
        let mut aff = |a: &Affine| a.terms.iter().for_each(|t| f(t.0));
        match self {
            Constraint::AffineEq(a) | Constraint::AffineIneq(a) => aff(a),
            Constraint::QuadBall { args, bound } | Constraint::Soc { args, bound } => {
                args.iter().for_each(&mut aff);
                aff(bound);
            }
            Constraint::LogAffine { logs, rhs } => {
                logs.iter().for_each(|(_, a)| aff(a));
                aff(rhs);
            }
            Constraint::Reciprocal { var, denom } => {
                f(*var);
                f(*denom);
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Constraint::AffineEq(_) => "affine_eq",
            Constraint::AffineIneq(_) => "affine_ineq",
            Constraint::QuadBall { .. } => "quad_ball",
            Constraint::Soc { .. } => "soc",
            Constraint::LogAffine { .. } => "log_affine",
            Constraint::Reciprocal { .. } => "reciprocal",
        }
    }
}

/// Where a row came from: a family tag plus the slot it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RowLabel {
    pub family: &'static str,
    pub slot: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub constraint: Constraint,
    pub label: RowLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Characteristic magnitude; the solver works in `x / scale`.
    pub scale: f64,
}

/// Linear objective (maximized) over typed convex rows.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConvexProblem {
    vars: Vec<Variable>,
    objective: Vec<f64>,
    rows: Vec<Row>,
}

impl ConvexProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: Option<f64>,
        upper: Option<f64>,
        scale: f64,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            scale,
        });
        self.objective.push(0.0);
        VarId(self.vars.len() - 1)
    }

    pub fn set_objective(&mut self, v: VarId, c: f64) {
        self.objective[v.0] = c;
    }

    pub fn add_row(&mut self, constraint: Constraint, family: &'static str, slot: Option<usize>) {
        self.rows.push(Row {
            constraint,
            label: RowLabel { family, slot },
        });
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Checks row references and variable metadata.
    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for (i, v) in self.vars.iter().enumerate() {
            if !(v.scale > 0.0 && v.scale.is_finite()) {
                return Err(Error::Config(format!("variable {i} ({}) has scale {}", v.name, v.scale)));
            }
            if let (Some(lo), Some(hi)) = (v.lower, v.upper) {
                if !(lo < hi) {
                    return Err(Error::Config(format!("variable {i} ({}) has empty box", v.name)));
                }
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let mut bad = None;
            row.constraint.for_each_var(|v| {
                if v.0 >= n {
                    bad = Some(v.0);
                }
            });
            if let Some(v) = bad {
                return Err(Error::Config(format!("row {r} references undeclared variable {v}")));
            }
        }
        Ok(())
    }

    /// Worst relative inequality violation and worst equality violation at `x`;
    /// bounds are included. Infinite if `x` leaves a row's domain.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for row in &self.rows {
            let v = match row.constraint.residual(x) {
                Some(r) => -r / (1.0 + row.constraint.magnitude(x)),
                None => f64::INFINITY,
            };
            worst = worst.max(v);
        }
        for (i, var) in self.vars.iter().enumerate() {
            if let Some(lo) = var.lower {
                worst = worst.max((lo - x[i]) / (1.0 + lo.abs()));
            }
            if let Some(hi) = var.upper {
                worst = worst.max((x[i] - hi) / (1.0 + hi.abs()));
            }
        }
        worst
    }
}
