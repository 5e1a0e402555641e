use log::debug;
use nalgebra::{DMatrix, DVector};

use super::banded::Banded;
use super::kkt::{check_kkt, Duals, RowDual};
use super::problem::{Affine, Constraint, ConvexProblem};
use super::{Phase, SolverOptions, SolverResult, SolverStatus, TraceRow};
use crate::error::{Error, Result};

/// Affine form over a row's local variable list.
#[derive(Clone, Debug)]
struct LocalAffine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl LocalAffine {
    #[inline]
    fn eval(&self, zl: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * zl[j]).sum::<f64>() + self.constant
    }

    fn magnitude(&self, zl: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| (c * zl[j]).abs()).sum::<f64>() + self.constant.abs()
    }
}

#[derive(Clone, Debug)]
enum Kind {
    /// `s = a(z)`.
    Lin(LocalAffine),
    /// `s = bound − Σ aₖ²`.
    Quad { args: Vec<LocalAffine>, bound: LocalAffine },
    /// `s = bound² − Σ aₖ²`, `bound > 0`.
    Soc { args: Vec<LocalAffine>, bound: LocalAffine },
    /// `s = Σ wᵢ ln aᵢ − rhs`.
    Log { logs: Vec<(f64, LocalAffine)>, rhs: LocalAffine },
    /// `s = z_j − c / z_k`.
    Recip { j: usize, k: usize, c: f64 },
}

#[derive(Clone, Debug)]
struct CRow {
    kind: Kind,
    support: Vec<usize>,
    /// Phase-I relaxation weight.
    relax: f64,
}

impl CRow {
    fn degree(&self) -> f64 {
        if matches!(self.kind, Kind::Soc { .. }) {
            2.0
        } else {
            1.0
        }
    }
}

struct Compiled {
    n: usize,
    scale: Vec<f64>,
    c: Vec<f64>,
    rows: Vec<CRow>,
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    bw: usize,
    theta: f64,
}

#[derive(Default)]
struct Scratch {
    zl: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
    hsz: Vec<f64>,
    gs: f64,
    hss: f64,
}

fn localize(a: &Affine, scale: &[f64], support: &[usize]) -> LocalAffine {
    let mut terms: Vec<(usize, f64)> = Vec::new();
    for &(v, c) in &a.terms {
        let j = support.binary_search(&v.index()).expect("support covers row");
        match terms.iter_mut().find(|t| t.0 == j) {
            Some(t) => t.1 += c * scale[v.index()],
            None => terms.push((j, c * scale[v.index()])),
        }
    }
    LocalAffine {
        terms,
        constant: a.constant,
    }
}

impl Compiled {
    fn new(p: &ConvexProblem) -> Self {
        let n = p.num_vars();
        let scale: Vec<f64> = p.vars().iter().map(|v| v.scale).collect();
        let c: Vec<f64> = p.objective().iter().zip(&scale).map(|(c, s)| c * s).collect();
        let mut rows = Vec::new();
        let mut eq = Vec::new();
        for row in p.rows() {
            let con = &row.constraint;
            let mut support = Vec::new();
            con.for_each_var(|v| support.push(v.index()));
            support.sort_unstable();
            support.dedup();
            let loc = |a: &Affine| localize(a, &scale, &support);
            let kind = match con {
                Constraint::AffineEq(a) => {
                    let mut terms: Vec<(usize, f64)> = Vec::new();
                    for &(v, k) in &a.terms {
                        terms.push((v.index(), k * scale[v.index()]));
                    }
                    eq.push((terms, a.constant));
                    continue;
                }
                Constraint::AffineIneq(a) => Kind::Lin(loc(&a.clone().scaled(-1.0))),
                Constraint::QuadBall { args, bound } => Kind::Quad {
                    args: args.iter().map(loc).collect(),
                    bound: loc(bound),
                },
                Constraint::Soc { args, bound } => Kind::Soc {
                    args: args.iter().map(loc).collect(),
                    bound: loc(bound),
                },
                Constraint::LogAffine { logs, rhs } => Kind::Log {
                    logs: logs.iter().map(|(w, a)| (*w, loc(a))).collect(),
                    rhs: loc(rhs),
                },
                Constraint::Reciprocal { var, denom } => {
                    let j = support.binary_search(&var.index()).unwrap();
                    let k = support.binary_search(&denom.index()).unwrap();
                    Kind::Recip {
                        j,
                        k,
                        c: 1.0 / (scale[var.index()] * scale[denom.index()]),
                    }
                }
            };
            rows.push(CRow {
                kind,
                support,
                relax: 1.0,
            });
        }
        for (i, v) in p.vars().iter().enumerate() {
            if let Some(lo) = v.lower {
                rows.push(CRow {
                    kind: Kind::Lin(LocalAffine {
                        terms: vec![(0, 1.0)],
                        constant: -lo / scale[i],
                    }),
                    support: vec![i],
                    relax: 1.0,
                });
            }
            if let Some(hi) = v.upper {
                rows.push(CRow {
                    kind: Kind::Lin(LocalAffine {
                        terms: vec![(0, -1.0)],
                        constant: hi / scale[i],
                    }),
                    support: vec![i],
                    relax: 1.0,
                });
            }
        }
        let bw = rows
            .iter()
            .map(|r| r.support.last().unwrap_or(&0) - r.support.first().unwrap_or(&0))
            .max()
            .unwrap_or(0);
        let theta = rows.iter().map(CRow::degree).sum();
        Compiled {
            n,
            scale,
            c,
            rows,
            eq,
            bw,
            theta,
        }
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.c.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    fn eq_residual(&self, z: &[f64]) -> Vec<f64> {
        self.eq
            .iter()
            .map(|(t, c)| t.iter().map(|&(i, k)| k * z[i]).sum::<f64>() + c)
            .collect()
    }
}

fn gather(row: &CRow, z: &[f64], zl: &mut Vec<f64>) {
    zl.clear();
    zl.extend(row.support.iter().map(|&i| z[i]));
}

/// Natural residual (`≥ 0` when satisfied) and magnitude at `zl`, or `None`
/// outside the domain.
fn natural(row: &CRow, zl: &[f64]) -> Option<(f64, f64)> {
    Some(match &row.kind {
        Kind::Lin(a) => (a.eval(zl), a.magnitude(zl)),
        Kind::Quad { args, bound } => {
            let sq: f64 = args.iter().map(|a| a.eval(zl).powi(2)).sum();
            (bound.eval(zl) - sq, bound.magnitude(zl) + sq)
        }
        Kind::Soc { args, bound } => {
            let nrm = args.iter().map(|a| a.eval(zl).powi(2)).sum::<f64>().sqrt();
            (bound.eval(zl) - nrm, bound.magnitude(zl) + nrm)
        }
        Kind::Log { logs, rhs } => {
            let mut lhs = 0.0;
            let mut mag = rhs.magnitude(zl);
            for (w, a) in logs {
                let v = a.eval(zl);
                if !(v > 0.0) {
                    return None;
                }
                lhs += w * v.ln();
                mag += (w * v.ln()).abs();
            }
            (lhs - rhs.eval(zl), mag)
        }
        Kind::Recip { j, k, c } => {
            if !(zl[*k] > 0.0) {
                return None;
            }
            (zl[*j] - c / zl[*k], zl[*j].abs() + c / zl[*k])
        }
    })
}

/// Barrier argument `s` of a row (with relaxation `σ·r`); `None` outside the
/// domain or when `s ≤ 0`.
fn value(row: &CRow, zl: &[f64], sigma: f64) -> Option<f64> {
    let shift = sigma * row.relax;
    let s = match &row.kind {
        Kind::Soc { args, bound } => {
            let t = bound.eval(zl) + shift;
            if !(t > 0.0) {
                return None;
            }
            t * t - args.iter().map(|a| a.eval(zl).powi(2)).sum::<f64>()
        }
        _ => natural(row, zl)?.0 + shift,
    };
    (s > 0.0 && s.is_finite()).then_some(s)
}

fn add_outer(h: &mut [f64], k: usize, a: &LocalAffine, b: &LocalAffine, w: f64) {
    for &(i, ci) in &a.terms {
        for &(j, cj) in &b.terms {
            h[i * k + j] += w * ci * cj;
        }
    }
}

/// Value plus first and second derivatives of `s` in `scratch`.
fn derivs(row: &CRow, sigma: f64, sc: &mut Scratch) -> Option<f64> {
    let k = row.support.len();
    let zl = std::mem::take(&mut sc.zl);
    sc.g.clear();
    sc.g.resize(k, 0.0);
    sc.h.clear();
    sc.h.resize(k * k, 0.0);
    sc.hsz.clear();
    sc.hsz.resize(k, 0.0);
    sc.gs = row.relax;
    sc.hss = 0.0;
    let r = row.relax;
    let out = (|| {
        let s = value(row, &zl, sigma)?;
        match &row.kind {
            Kind::Lin(a) => {
                for &(j, c) in &a.terms {
                    sc.g[j] += c;
                }
            }
            Kind::Quad { args, bound } => {
                for &(j, c) in &bound.terms {
                    sc.g[j] += c;
                }
                for a in args {
                    let v = a.eval(&zl);
                    for &(j, c) in &a.terms {
                        sc.g[j] -= 2.0 * v * c;
                    }
                    add_outer(&mut sc.h, k, a, a, -2.0);
                }
            }
            Kind::Soc { args, bound } => {
                let t = bound.eval(&zl) + sigma * r;
                for &(j, c) in &bound.terms {
                    sc.g[j] += 2.0 * t * c;
                    sc.hsz[j] += 2.0 * r * c;
                }
                add_outer(&mut sc.h, k, bound, bound, 2.0);
                for a in args {
                    let v = a.eval(&zl);
                    for &(j, c) in &a.terms {
                        sc.g[j] -= 2.0 * v * c;
                    }
                    add_outer(&mut sc.h, k, a, a, -2.0);
                }
                sc.gs = 2.0 * t * r;
                sc.hss = 2.0 * r * r;
            }
            Kind::Log { logs, rhs } => {
                for &(j, c) in &rhs.terms {
                    sc.g[j] -= c;
                }
                for (w, a) in logs {
                    let v = a.eval(&zl);
                    for &(j, c) in &a.terms {
                        sc.g[j] += w * c / v;
                    }
                    add_outer(&mut sc.h, k, a, a, -w / (v * v));
                }
            }
            Kind::Recip { j, k: kk, c } => {
                let d = zl[*kk];
                sc.g[*j] += 1.0;
                sc.g[*kk] += c / (d * d);
                sc.h[kk * k + kk] -= 2.0 * c / (d * d * d);
            }
        }
        Some(s)
    })();
    sc.zl = zl;
    out
}

/// Smooth function minimized in one centering stage:
/// `F(z, σ) = t·f₀ + Σ −ln sᵢ` where `f₀ = −cᵀz` (optimality) or `σ` (feasibility).
struct Stage<'a> {
    cp: &'a Compiled,
    phase: Phase,
    t: f64,
}

struct Newton {
    dz: Vec<f64>,
    ds: f64,
    grad_dot: f64,
}

impl Stage<'_> {
    fn relaxed(&self) -> bool {
        self.phase == Phase::Feasibility
    }

    fn value(&self, z: &[f64], sigma: f64, zl: &mut Vec<f64>) -> Option<f64> {
        let mut f = match self.phase {
            Phase::Optimality => -self.t * self.cp.objective(z),
            Phase::Feasibility => {
                if !(sigma + 1.0 > 0.0) {
                    return None;
                }
                self.t * sigma - (sigma + 1.0).ln()
            }
        };
        let sig = if self.relaxed() { sigma } else { 0.0 };
        for row in &self.cp.rows {
            gather(row, z, zl);
            f -= value(row, zl, sig)?.ln();
        }
        f.is_finite().then_some(f)
    }

    fn direction(&self, z: &[f64], sigma: f64, sc: &mut Scratch) -> Option<Newton> {
        let cp = self.cp;
        let n = cp.n;
        let relaxed = self.relaxed();
        let sig = if relaxed { sigma } else { 0.0 };
        let mut grad = vec![0.0; n];
        let mut hess = Banded::zeros(n, cp.bw);
        let mut hzs = vec![0.0; n];
        let (mut gs, mut hss) = match self.phase {
            Phase::Optimality => {
                for (g, c) in grad.iter_mut().zip(&cp.c) {
                    *g = -self.t * c;
                }
                (0.0, 0.0)
            }
            Phase::Feasibility => {
                let f = sigma + 1.0;
                (self.t - 1.0 / f, 1.0 / (f * f))
            }
        };
        for row in &cp.rows {
            let mut zl = std::mem::take(&mut sc.zl);
            gather(row, z, &mut zl);
            sc.zl = zl;
            let s = derivs(row, sig, sc)?;
            let k = row.support.len();
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            for a in 0..k {
                let ia = row.support[a];
                grad[ia] -= sc.g[a] * inv;
                for b in 0..=a {
                    let v = sc.g[a] * sc.g[b] * inv2 - sc.h[a * k + b] * inv;
                    if v != 0.0 {
                        hess.add(ia, row.support[b], v);
                    }
                }
            }
            if relaxed {
                gs -= sc.gs * inv;
                hss += sc.gs * sc.gs * inv2 - sc.hss * inv;
                for a in 0..k {
                    hzs[row.support[a]] += sc.g[a] * sc.gs * inv2 - sc.hsz[a] * inv;
                }
            }
        }

        // Bordered system: H dz + B w = −g, Bᵀ dz + C w = q.
        let eq_res = cp.eq_residual(z);
        let m = eq_res.len() + usize::from(relaxed);
        let mut border: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut q = Vec::with_capacity(m);
        if relaxed {
            border.push(hzs);
            q.push(-gs);
        }
        for ((terms, _), r) in cp.eq.iter().zip(&eq_res) {
            let mut col = vec![0.0; n];
            for &(i, k) in terms {
                col[i] += k;
            }
            border.push(col);
            q.push(-r);
        }

        let base = hess.max_diag().max(1e-300);
        let mut shift = 0.0;
        let chol = loop {
            if let Some(c) = hess.clone().cholesky(shift) {
                break c;
            }
            shift = if shift == 0.0 { 1e-14 * base } else { shift * 100.0 };
            if shift > base * 1e6 {
                return None;
            }
        };
        let neg_g: Vec<f64> = grad.iter().map(|g| -g).collect();
        let h_inv_g = chol.solve(&neg_g);
        let (w, dz) = if m == 0 {
            (Vec::new(), h_inv_g)
        } else {
            let h_inv_b: Vec<Vec<f64>> = border.iter().map(|b| chol.solve(b)).collect();
            let mut s = DMatrix::<f64>::zeros(m, m);
            let mut rhs = DVector::<f64>::zeros(m);
            for a in 0..m {
                rhs[a] = q[a] - dot(&border[a], &h_inv_g);
                for b in 0..m {
                    s[(a, b)] = -dot(&border[a], &h_inv_b[b]);
                }
            }
            if relaxed {
                s[(0, 0)] += hss;
            }
            let w = s.lu().solve(&rhs)?;
            let mut dz = h_inv_g;
            for a in 0..m {
                for (d, hb) in dz.iter_mut().zip(&h_inv_b[a]) {
                    *d -= w[a] * hb;
                }
            }
            (w.iter().copied().collect(), dz)
        };
        let ds = if relaxed { w[0] } else { 0.0 };
        let grad_dot = dot(&grad, &dz) + gs * ds;
        if !grad_dot.is_finite() || dz.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Newton { dz, ds, grad_dot })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum CenterOutcome {
    Centered,
    /// Phase I reached `σ < 0`.
    Feasible,
    MaxIterations,
    Failure(&'static str),
}

struct Run<'a> {
    cp: &'a Compiled,
    opts: &'a SolverOptions,
    trace: Vec<TraceRow>,
    iterations: usize,
    scratch: Scratch,
}

impl Run<'_> {
    fn center(&mut self, stage: &Stage, idx: usize, z: &mut [f64], sigma: &mut f64, tol: f64) -> CenterOutcome {
        let mut zl = Vec::new();
        let Some(mut f) = stage.value(z, *sigma, &mut zl) else {
            return CenterOutcome::Failure("start of centering stage left the domain");
        };
        let mut stalls = 0;
        let mut polish = 2;
        let mut prev_decrement = f64::INFINITY;
        for it in 0..=self.opts.max_newton {
            if stage.phase == Phase::Feasibility && *sigma < 0.0 {
                return CenterOutcome::Feasible;
            }
            let Some(nt) = stage.direction(z, *sigma, &mut self.scratch) else {
                return CenterOutcome::Failure("Newton system is singular or non-finite");
            };
            let decrement = (-nt.grad_dot).max(0.0);
            if decrement / 2.0 <= tol {
                // A small decrement still allows a gradient of order
                // √decrement along stiff directions; a couple of quadratic
                // steps remove it while they keep shrinking the decrement.
                if polish == 0 || decrement >= 0.25 * prev_decrement || decrement < 1e-24 {
                    return CenterOutcome::Centered;
                }
                polish -= 1;
            }
            prev_decrement = decrement;
            if it == self.opts.max_newton {
                return CenterOutcome::MaxIterations;
            }
            let mut alpha = 1.0;
            let mut trial = vec![0.0; z.len()];
            let accepted = loop {
                for ((t, zi), d) in trial.iter_mut().zip(z.iter()).zip(&nt.dz) {
                    *t = zi + alpha * d;
                }
                let ts = *sigma + alpha * nt.ds;
                if let Some(ft) = stage.value(&trial, ts, &mut zl) {
                    // Inside the quadratic region the Armijo test is below
                    // rounding noise of F; a domain-feasible step suffices.
                    if decrement < 0.0625 || ft <= f + self.opts.armijo * alpha * nt.grad_dot {
                        break Some((ft, ts));
                    }
                }
                alpha *= self.opts.backtrack;
                if alpha < 1e-16 {
                    break None;
                }
            };
            let Some((ft, ts)) = accepted else {
                // No descent possible in floating point: treat as centered.
                return CenterOutcome::Centered;
            };
            if trial == z {
                stalls += 1;
            } else {
                stalls = 0;
            }
            z.copy_from_slice(&trial);
            *sigma = ts;
            f = ft;
            self.iterations += 1;
            let stalled = stalls >= 3;
            if self.opts.trace {
                self.trace.push(TraceRow {
                    phase: stage.phase,
                    stage: idx,
                    iteration: it,
                    mu: 1.0 / stage.t,
                    objective: match stage.phase {
                        Phase::Optimality => self.cp.objective(z),
                        Phase::Feasibility => *sigma,
                    },
                    decrement,
                    step: alpha,
                });
            }
            if stalled {
                return CenterOutcome::Centered;
            }
        }
        CenterOutcome::MaxIterations
    }
}

/// Maximizes the problem's objective from `start`, which must satisfy every
/// log/reciprocal domain and every row to within `1e−9`. Deterministic.
pub fn solve(problem: &ConvexProblem, start: &[f64], opts: &SolverOptions) -> Result<SolverResult> {
    problem.validate()?;
    if start.len() != problem.num_vars() {
        return Err(Error::DimensionMismatch(format!(
            "start has {} entries, problem has {} variables",
            start.len(),
            problem.num_vars()
        )));
    }
    let cp = Compiled::new(problem);
    let mut z: Vec<f64> = start.iter().zip(&cp.scale).map(|(x, s)| x / s).collect();
    let start_obj = problem.objective_value(start);
    let start_violation = problem.max_violation(start);
    if !start_violation.is_finite() {
        return Err(Error::domain("start point lies outside a logarithm or reciprocal domain"));
    }

    let mut run = Run {
        cp: &cp,
        opts,
        trace: Vec::new(),
        iterations: 0,
        scratch: Scratch::default(),
    };

    let mut feasible = {
        let mut zl = Vec::new();
        cp.rows.iter().all(|r| {
            gather(r, &z, &mut zl);
            value(r, &zl, 0.0).is_some()
        })
    };
    let mut failure: Option<(SolverStatus, String)> = None;

    if !feasible {
        let mut cpr = Compiled { rows: cp.rows.clone(), ..clone_shell(&cp) };
        let mut sigma0 = 0.0_f64;
        let mut zl = Vec::new();
        for row in &mut cpr.rows {
            gather(row, &z, &mut zl);
            let (res, mag) = natural(row, &zl).expect("start domain checked above");
            row.relax = 1.0 + mag;
            sigma0 = sigma0.max(-res / row.relax);
        }
        let mut sigma = sigma0 + 0.1;
        let mut t = opts.mu0.recip();
        let mut idx = 0;
        let mut run1 = Run {
            cp: &cpr,
            opts,
            trace: std::mem::take(&mut run.trace),
            iterations: 0,
            scratch: Scratch::default(),
        };
        loop {
            let stage = Stage {
                cp: &cpr,
                phase: Phase::Feasibility,
                t,
            };
            match run1.center(&stage, idx, &mut z, &mut sigma, 1e-10) {
                CenterOutcome::Feasible => {
                    feasible = true;
                    break;
                }
                CenterOutcome::Centered => {
                    if t > 1e12 {
                        failure = Some((
                            SolverStatus::NumericalFailure,
                            format!("no strictly feasible point found (sigma = {sigma:.3e})"),
                        ));
                        break;
                    }
                }
                CenterOutcome::MaxIterations => {
                    failure = Some((SolverStatus::MaxIterations, "phase I centering budget exceeded".into()));
                    break;
                }
                CenterOutcome::Failure(m) => {
                    failure = Some((SolverStatus::NumericalFailure, format!("phase I: {m}")));
                    break;
                }
            }
            t /= opts.mu_factor;
            idx += 1;
        }
        run.iterations += run1.iterations;
        run.trace = run1.trace;
        debug!("phase I finished after {} Newton steps, sigma = {sigma:.3e}", run.iterations);
    }

    let mut mu = opts.mu0;
    if feasible {
        let mut sigma = 0.0;
        let mut idx = 0;
        loop {
            let stage = Stage {
                cp: &cp,
                phase: Phase::Optimality,
                t: 1.0 / mu,
            };
            match run.center(&stage, idx, &mut z, &mut sigma, 1e-10) {
                CenterOutcome::Centered | CenterOutcome::Feasible => {}
                CenterOutcome::MaxIterations => {
                    failure = Some((
                        SolverStatus::MaxIterations,
                        format!("centering at mu = {mu:.1e} exceeded {} Newton steps", opts.max_newton),
                    ));
                    break;
                }
                CenterOutcome::Failure(m) => {
                    failure = Some((SolverStatus::NumericalFailure, m.to_string()));
                    break;
                }
            }
            let obj = cp.objective(&z);
            if cp.theta * mu <= opts.gap_tol * (1.0 + obj.abs()) {
                break;
            }
            mu *= opts.mu_factor;
            idx += 1;
        }
    }

    let x: Vec<f64> = z.iter().zip(&cp.scale).map(|(z, s)| z * s).collect();
    let mut duals = barrier_duals(problem, &cp, &z, mu, None);
    let mut kkt = check_kkt(problem, &x, &duals);
    if feasible {
        let stage = Stage {
            cp: &cp,
            phase: Phase::Optimality,
            t: 1.0 / mu,
        };
        if let Some(nt) = stage.direction(&z, 0.0, &mut run.scratch) {
            let refined = barrier_duals(problem, &cp, &z, mu, Some(&nt.dz));
            let report = check_kkt(problem, &x, &refined);
            if report.max < kkt.max {
                duals = refined;
                kkt = report;
            }
        }
    }
    let objective = problem.objective_value(&x);
    let violation = problem.max_violation(&x);

    let (mut status, mut message) = match failure {
        Some(f) => f,
        None if kkt.max <= opts.kkt_tol && violation <= opts.feas_tol => {
            (SolverStatus::Optimal, String::new())
        }
        None => (
            SolverStatus::NumericalFailure,
            format!("KKT residual {:.3e}, violation {:.3e}", kkt.max, violation),
        ),
    };
    let regressed = !(objective >= start_obj - opts.gap_tol * (1.0 + start_obj.abs())) || !(violation <= opts.feas_tol);
    if regressed && start_violation <= 1e-9 {
        // Never hand back something worse than the caller's own point by
        // more than the gap tolerance.
        if status == SolverStatus::Optimal {
            status = SolverStatus::NumericalFailure;
        }
        message = format!("{message}; returning the start point").trim_start_matches("; ").to_string();
        let duals = Duals::zeros(problem);
        let kkt = check_kkt(problem, start, &duals);
        return Ok(SolverResult {
            status,
            x: start.to_vec(),
            objective: start_obj,
            kkt_residual: kkt.max,
            kkt,
            duals,
            iterations: run.iterations,
            trace: run.trace,
            message,
        });
    }
    Ok(SolverResult {
        status,
        x,
        objective,
        kkt_residual: kkt.max,
        kkt,
        duals,
        iterations: run.iterations,
        trace: run.trace,
        message,
    })
}

fn clone_shell(cp: &Compiled) -> Compiled {
    Compiled {
        n: cp.n,
        scale: cp.scale.clone(),
        c: cp.c.clone(),
        rows: Vec::new(),
        eq: cp.eq.clone(),
        bw: cp.bw,
        theta: cp.theta,
    }
}

fn slope(a: &LocalAffine, dl: &[f64]) -> f64 {
    a.terms.iter().map(|&(j, c)| c * dl[j]).sum()
}

/// Multipliers at barrier weight `mu`: the central-path values `μ/ĝ`, or,
/// given the Newton step `dz` at `z`, their first-order prediction at
/// `z + dz`. The latter cancel the stationarity error left by an imperfect
/// centering along stiff rows.
fn barrier_duals(problem: &ConvexProblem, cp: &Compiled, z: &[f64], mu: f64, dz: Option<&[f64]>) -> Duals {
    let x: Vec<f64> = z.iter().zip(&cp.scale).map(|(z, s)| z * s).collect();
    let zero = vec![0.0; z.len()];
    let dz = dz.unwrap_or(&zero);
    let mut sc = Scratch::default();
    let mut dl = Vec::new();
    let mut compiled = cp.rows.iter();
    let scalar = |row: &CRow, g: Option<f64>, sc: &mut Scratch, dl: &mut Vec<f64>| -> f64 {
        let Some(g) = g else { return f64::NAN };
        let mut zl = std::mem::take(&mut sc.zl);
        gather(row, z, &mut zl);
        sc.zl = zl;
        gather(row, dz, dl);
        let kappa = match derivs(row, 0.0, sc) {
            Some(s) => 1.0 - dot(&sc.g, dl) / s,
            None => 1.0,
        };
        (mu / g * kappa).max(0.0)
    };
    let rows = problem
        .rows()
        .iter()
        .map(|row| {
            if let Constraint::AffineEq(_) = row.constraint {
                return RowDual::Eq(0.0);
            }
            let cr = compiled.next().expect("one compiled row per inequality");
            match &cr.kind {
                Kind::Soc { args, bound } => {
                    let mut zl = Vec::new();
                    gather(cr, z, &mut zl);
                    gather(cr, dz, &mut dl);
                    let t = bound.eval(&zl);
                    let dt = slope(bound, &dl);
                    let u: Vec<f64> = args.iter().map(|a| a.eval(&zl)).collect();
                    let du: Vec<f64> = args.iter().map(|a| slope(a, &dl)).collect();
                    let d = t * t - u.iter().map(|v| v * v).sum::<f64>();
                    let dd = 2.0 * t * dt - 2.0 * u.iter().zip(&du).map(|(v, w)| v * w).sum::<f64>();
                    RowDual::Cone {
                        t: 2.0 * mu * (t / d + dt / d - t * dd / (d * d)),
                        u: u
                            .iter()
                            .zip(&du)
                            .map(|(v, w)| -2.0 * mu * (v / d + w / d - v * dd / (d * d)))
                            .collect(),
                    }
                }
                _ => RowDual::Scalar(scalar(cr, row.constraint.residual(&x), &mut sc, &mut dl)),
            }
        })
        .collect();
    let mut lower = vec![0.0; problem.num_vars()];
    let mut upper = vec![0.0; problem.num_vars()];
    for (i, v) in problem.vars().iter().enumerate() {
        if let Some(b) = v.lower {
            let cr = compiled.next().expect("compiled lower bound");
            lower[i] = scalar(cr, Some(x[i] - b), &mut sc, &mut dl);
        }
        if let Some(b) = v.upper {
            let cr = compiled.next().expect("compiled upper bound");
            upper[i] = scalar(cr, Some(b - x[i]), &mut sc, &mut dl);
        }
    }
    Duals { rows, lower, upper }
}
