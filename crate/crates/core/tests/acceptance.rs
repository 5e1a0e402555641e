//! Acceptance run: one PASS/FAIL line per criterion, `info` lines for
//! context. Exits nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use spc_relay::blocklength::optimize_slot_blocklength;
use spc_relay::bsca::{initial_point, run_scheme, RunRecord, Scheme, Termination};
use spc_relay::cli::{self, ExperimentConfig};
use spc_relay::fbl::{dispersion, q_func, q_inv, secrecy_rate_dl, secrecy_rate_ul, DISPERSION_LIMIT};
use spc_relay::sca::{f_lb, g_tangent};
use spc_relay::scenario::{Link, Point, Scenario};
use spc_relay::solver::{self, SolverOptions};

struct Report {
    failed: Vec<u32>,
}

impl Report {
    fn verdict(&mut self, id: u32, title: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("criterion {id} [{tag}] {title}: {detail}");
        if !pass {
            self.failed.push(id);
        }
    }
}

fn info(id: u32, msg: String) {
    println!("criterion {id} info: {msg}");
}

fn run_all(scn: &Scenario) -> Vec<RunRecord> {
    Scheme::ALL.par_iter().map(|&s| run_scheme(scn, s).unwrap()).collect()
}

fn by_scheme(runs: &[RunRecord], s: Scheme) -> &RunRecord {
    runs.iter().find(|r| r.scheme == s).unwrap()
}

struct Fig2 {
    pass: bool,
    detail: String,
}

fn fig2(runs: &[RunRecord]) -> Fig2 {
    let e = |s| by_scheme(runs, s).final_east();
    let (j, t, b, base) = (e(Scheme::Jtbd), e(Scheme::Tdfb), e(Scheme::Bdft), e(Scheme::Baseline));
    let ordering = j > b && b >= t && t > base;
    let range = (100.0..=140.0).contains(&j);
    let margin = j >= 1.05 * b && j >= 1.05 * t;
    let baseline = j >= 1.6 * base;
    Fig2 {
        pass: ordering && range && margin && baseline,
        detail: format!(
            "JTBD {j:.2}, BDFT {b:.2}, TDFB {t:.2}, Baseline {base:.2} bps; \
             ordering {ordering}, JTBD in [100, 140] {range}, \
             JTBD/BDFT {:.3} JTBD/TDFB {:.3} (>= 1.05: {margin}), JTBD/Baseline {:.3} (>= 1.6: {baseline})",
            j / b,
            j / t,
            j / base
        ),
    }
}

fn c1(r: &mut Report, runs: &[RunRecord], elapsed: f64, variant: &[RunRecord]) {
    let f = fig2(runs);
    let fast = elapsed < 600.0;
    r.verdict(
        1,
        "EAST ordering and levels on the bundled scenario",
        f.pass && fast,
        format!("{} ; all four schemes in {elapsed:.1} s", f.detail),
    );
    let v = fig2(variant);
    info(1, format!("sigma2 = -110 dBm variant: {} -> {}", v.detail, if v.pass { "holds" } else { "fails" }));
}

struct Fig3 {
    pass: bool,
    detail: String,
}

const C1_POINT: [f64; 3] = [176.0, -67.0, 60.0];

fn fig3(scn: &Scenario, runs: &[RunRecord]) -> Fig3 {
    let c1 = Point::new(C1_POINT[0], C1_POINT[1], C1_POINT[2]);
    let tdfb = by_scheme(runs, Scheme::Tdfb);
    let dist: Vec<f64> = tdfb.trajectory.waypoints().iter().map(|q| (q - c1).norm()).collect();
    let closest = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let speeds = tdfb.trajectory.speeds(scn.delta_t);
    let (mut run, mut hover) = (0, 0);
    for (d, v) in dist.iter().zip(&speeds) {
        run = if *d <= 150.0 && *v < 3.0 { run + 1 } else { 0 };
        hover = hover.max(run);
    }
    let jtbd = by_scheme(runs, Scheme::Jtbd);
    let jv = jtbd.trajectory.speeds(scn.delta_t);
    let min_mid = jv[20..=60].iter().copied().fold(f64::INFINITY, f64::min);
    let slow = min_mid < 0.4 * scn.v_max;
    let mut trend = Vec::new();
    let mut decreasing = true;
    for s in [Scheme::Jtbd, Scheme::Bdft] {
        let ld = by_scheme(runs, s).plan.downlink();
        let mid = &ld[20..80];
        let rises = mid.windows(2).filter(|w| w[1] > w[0]).count();
        decreasing &= rises == 0;
        trend.push(format!("{s} l_d {} -> {} with {rises} rises", mid[0], mid[59]));
    }
    let near = closest <= 150.0 && hover >= 10;
    Fig3 {
        pass: near && slow && decreasing,
        detail: format!(
            "TDFB closest approach {closest:.1} m, {hover} slow slots within 150 m (need <= 150 m and >= 10); \
             JTBD min speed over slots 20-60 {min_mid:.2} m/s (need < {:.1}); {} over slots 20-79",
            0.4 * scn.v_max,
            trend.join(", ")
        ),
    }
}

fn c2(r: &mut Report, scn: &Scenario, runs: &[RunRecord], variant_scn: &Scenario, variant: &[RunRecord]) {
    let f = fig3(scn, runs);
    r.verdict(2, "trajectory and blocklength shape on the bundled scenario", f.pass, f.detail);
    let v = fig3(variant_scn, variant);
    info(2, format!("sigma2 = -110 dBm variant: {} -> {}", v.detail, if v.pass { "holds" } else { "fails" }));
}

fn c3(r: &mut Report) {
    let started = Instant::now();
    let results: Vec<(u64, Vec<RunRecord>)> = (0..20u64)
        .into_par_iter()
        .map(|seed| (seed, run_all(&common::random_scenario(1000 + seed))))
        .collect();
    let mut nonmonotone = Vec::new();
    let mut converged = 0;
    let mut iters = Vec::new();
    for (seed, runs) in &results {
        for rec in runs {
            let bad = rec.east_trace.windows(2).any(|w| w[1] < w[0] - 1e-9 * w[0].abs().max(1e-300));
            if bad {
                nonmonotone.push(format!("{seed}/{}", rec.scheme));
            }
        }
        let j = by_scheme(runs, Scheme::Jtbd);
        if j.termination == Termination::Converged && j.iteration_count() <= 50 {
            converged += 1;
        }
        iters.push(j.iteration_count());
    }
    r.verdict(
        3,
        "monotone traces and JTBD convergence on 20 random scenarios",
        nonmonotone.is_empty() && converged >= 19,
        format!(
            "{} non-monotone traces {:?}; JTBD converged on {converged}/20 (iterations {:?}); {:.1} s",
            nonmonotone.len(),
            nonmonotone,
            iters,
            started.elapsed().as_secs_f64()
        ),
    );
}

fn c4(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut logu = || 10f64.powf(rng.random_range(-3.0..3.0));
    let (mut f_viol, mut g_viol, mut g_above) = (0, 0, 0);
    let samples = 100_000;
    for _ in 0..samples {
        let (x, y, x0, y0) = (logu(), logu(), logu(), logu());
        let bound = 1.0 / (x * y);
        // One rounding step of allowance on each side of the comparison.
        if f_lb(x, y, x0, y0).unwrap() > bound * (1.0 + 4.0 * f64::EPSILON) {
            f_viol += 1;
        }
        let h = 0.5 * (x * (x + 2.0)).ln();
        let g = g_tangent(x, x0).unwrap();
        if g > h + 4.0 * f64::EPSILON * (1.0 + h.abs()) {
            g_viol += 1;
        }
        if g < h - 4.0 * f64::EPSILON * (1.0 + h.abs()) {
            g_above += 1;
        }
    }
    let mut tangency = 0.0_f64;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..1000 {
        let x0 = 10f64.powf(rng.random_range(-3.0..3.0));
        let y0 = 10f64.powf(rng.random_range(-3.0..3.0));
        let k = 1.0 / (x0 * y0);
        tangency = tangency.max((f_lb(x0, y0, x0, y0).unwrap() - k).abs() / k);
        let h = 0.5 * (x0 * (x0 + 2.0)).ln();
        tangency = tangency.max((g_tangent(x0, x0).unwrap() - h).abs() / (1.0 + h.abs()));
    }
    r.verdict(
        4,
        "surrogate bounds over 1e5 samples",
        f_viol == 0 && g_viol == 0 && tangency <= 1e-9,
        format!(
            "f_lb > 1/(xy) on {f_viol}; g_tangent > 1/2 ln(x(x+2)) on {g_viol}; worst tangency error {tangency:.2e}"
        ),
    );
    info(
        4,
        format!(
            "g_tangent < 1/2 ln(x(x+2)) on {g_above} of {samples} samples; the tangent of a concave function lies above it, \
             which is the direction the rate constraints rely on"
        ),
    );
}

fn c5(r: &mut Report, scn: &Scenario, runs: &[RunRecord]) {
    let jtbd = by_scheme(runs, Scheme::Jtbd);
    let (mut checked, mut violations, mut worst) = (0, 0, f64::NEG_INFINITY);
    for it in &jtbd.iterations {
        let Some(step) = &it.step else { continue };
        for (n, q) in step.trajectory.waypoints().iter().enumerate() {
            if !step.active[n] {
                continue;
            }
            let (l_u, l_d) = it.plan.slot(n);
            let tau = step.tau[n];
            let tol = 1e-6 * (1.0 + tau);
            let up = secrecy_rate_ul(scn, q, l_u).unwrap() * l_u as f64;
            let down = secrecy_rate_dl(scn, q, l_d).unwrap() * l_d as f64;
            checked += 1;
            let slack = (up - tau).min(down - tau);
            worst = worst.max((tau - up).max(tau - down) / (1.0 + tau));
            if slack < -tol {
                violations += 1;
            }
        }
    }
    let steps = jtbd.iterations.iter().filter(|i| i.step.is_some()).count();
    r.verdict(
        5,
        "true rates cover tau after every JTBD step",
        violations == 0 && checked > 0,
        format!("{violations} violations over {checked} slot checks in {steps} steps; worst (tau - R l)/(1 + tau) {worst:.2e}"),
    );
}

/// Independent exhaustive split search: own SNRs from geometry, `Q⁻¹`
/// from the normal quantile.
fn oracle_split(scn: &Scenario, q: &Point) -> (u32, u32, f64) {
    let normal = Normal::standard();
    let qinv = |p: f64| -normal.inverse_cdf(p);
    let (qe, qn) = (qinv(scn.eps_dec), qinv(scn.eta_leak));
    let rho_a = scn.p_a * scn.beta0 / scn.sigma2;
    let rho_r = scn.p_r * scn.beta0 / scn.sigma2;
    let g_r = rho_a / (q - scn.q_a).norm_squared();
    let g_b = rho_r / (q - scn.q_b).norm_squared();
    let g_re = rho_r / (q - scn.q_e).norm_squared();
    let g_ae = rho_a / (scn.q_a - scn.q_e).norm().powf(scn.alpha);
    let v = |g: f64| std::f64::consts::LOG2_E.powi(2) * (1.0 - 1.0 / ((1.0 + g) * (1.0 + g)));
    let rate = |m: f64, e: f64, l: f64| ((1.0 + m) / (1.0 + e)).log2() - (v(m) / l).sqrt() * qe - (v(e) / l).sqrt() * qn;
    let mut best = (0, 0, 0.0);
    for l_u in 1..scn.l_max {
        let l_d = scn.l_max - l_u;
        let bits = (l_u as f64 * rate(g_r, g_ae, l_u as f64)).min(l_d as f64 * rate(g_b, g_re, l_d as f64));
        let b = (1.0 - scn.eps_dec) / scn.delta_t * bits.max(0.0);
        if b > best.2 {
            best = (l_u, l_d, b);
        }
    }
    best
}

fn c6(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut value_mismatch, mut split_mismatch, mut near_ties, mut worst) = (0, 0, 0, 0.0_f64);
    let pairs = 1000;
    for i in 0..pairs {
        let scn = common::random_scenario(60_000 + i);
        let q = Point::new(rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0), scn.altitude);
        let lib = optimize_slot_blocklength(&scn, &q);
        let (l_u, l_d, b) = oracle_split(&scn, &q);
        let err = (lib.b_s - b).abs() / b.max(1.0);
        worst = worst.max(err);
        if err > 1e-9 {
            value_mismatch += 1;
        }
        if (lib.l_u, lib.l_d) != (l_u, l_d) {
            // Splits may differ only where the two throughputs agree to
            // rounding and the library kept the smaller uplink.
            if err <= 1e-12 && lib.l_u < l_u {
                near_ties += 1;
            } else {
                split_mismatch += 1;
            }
        }
    }
    r.verdict(
        6,
        "per-slot split search against an independent exhaustive search",
        value_mismatch == 0 && split_mismatch == 0,
        format!(
            "{pairs} pairs: {value_mismatch} throughput mismatches (worst relative {worst:.1e}), \
             {split_mismatch} split mismatches, {near_ties} rounding-level ties"
        ),
    );
}

fn c7(r: &mut Report, scn: &Scenario) {
    let mut worst_rt = 0.0_f64;
    let k = 2000;
    for i in 0..=k {
        let p = 10f64.powf(-6.0 + (0.5f64.log10() + 6.0) * i as f64 / k as f64);
        worst_rt = worst_rt.max((q_func(q_inv(p).unwrap()) - p).abs());
    }
    let v0 = dispersion(0.0).unwrap();
    let vinf = (dispersion(1e12).unwrap() - DISPERSION_LIMIT).abs();
    let (traj, _) = initial_point(scn).unwrap();
    let l = 1_000_000_000u32;
    let mut worst_gap = 0.0_f64;
    for q in traj.waypoints() {
        let ul = scn.snr(q, Link::UplinkRelay);
        let bob = scn.snr(q, Link::DownlinkBob);
        let eve = scn.snr(q, Link::DownlinkEve);
        let gap_u = ((1.0 + ul) / (1.0 + scn.avg_eve_uplink_snr())).log2();
        let gap_d = ((1.0 + bob) / (1.0 + eve)).log2();
        worst_gap = worst_gap
            .max((secrecy_rate_ul(scn, q, l).unwrap() - gap_u).abs())
            .max((secrecy_rate_dl(scn, q, l).unwrap() - gap_d).abs());
    }
    let pass = worst_rt <= 1e-8 && v0 == 0.0 && vinf <= 1e-6 && worst_gap <= 1e-4;
    r.verdict(
        7,
        "Q inverse round trip, dispersion limits, infinite-blocklength limit",
        pass,
        format!(
            "round trip {worst_rt:.2e}; V(0) = {v0}; |V(1e12) - log2(e)^2| = {vinf:.2e}; \
             worst |R - log gap| at l = 1e9 over the straight-line slots {worst_gap:.3e} bits/use (need <= 1e-4)"
        ),
    );
    let penalty = DISPERSION_LIMIT.sqrt() * (q_inv(scn.eps_dec).unwrap() + q_inv(scn.eta_leak).unwrap());
    info(
        7,
        format!(
            "the penalty approaches sqrt(V_max/l)(Q^-1(eps) + Q^-1(eta)) = {:.3e} at l = 1e9 for high SNRs; \
             it is below 1e-4 only once l >= {:.2e}",
            penalty / 1e9f64.sqrt(),
            (penalty / 1e-4).powi(2)
        ),
    );
}

fn c8(r: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(dir.path());
    cfg.mc_samples = 1_000_000;
    match cli::validate_jensen(&cfg) {
        Ok(rep) => r.verdict(
            8,
            "Jensen direction with 1e6 samples",
            rep.violations == 0 && rep.slots.iter().all(|s| s.gap.is_finite()),
            format!(
                "direction holds on {}/{} slots; E[log2(1+g)] = {:.6} vs log2(1+mean g) = {:.6}; \
                 rate gap (Jensen - MC) mean {:.4e}, max {:.4e} bits/use",
                rep.slots.len() - rep.violations,
                rep.slots.len(),
                rep.slots[0].log_eve_mc,
                rep.slots[0].log_eve_jensen,
                rep.mean_gap,
                rep.max_gap
            ),
        ),
        Err(e) => r.verdict(8, "Jensen direction with 1e6 samples", false, e.to_string()),
    }
}

fn c9(r: &mut Report) {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let load = |name: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
    };
    let instances = load("subproblems.json");
    let reference = load("subproblems_reference.json");
    let (instances, reference) = (instances.as_array().unwrap(), reference.as_array().unwrap());
    let mut worst = 0.0_f64;
    let mut failures = Vec::new();
    for (inst, refv) in instances.iter().zip(reference) {
        assert_eq!(inst["seed"], refv["seed"]);
        let p = common::problem_from_json(&inst["problem"]);
        let start: Vec<f64> = inst["start"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        let target = refv["objective"].as_f64().unwrap();
        match solver::solve(&p, &start, &SolverOptions::default()) {
            Ok(res) => {
                let rel = (res.objective - target).abs() / target.abs();
                worst = worst.max(rel);
                if rel > 1e-4 {
                    failures.push(format!("seed {}: {rel:.2e}", inst["seed"]));
                }
            }
            Err(e) => failures.push(format!("seed {}: {e}", inst["seed"])),
        }
    }
    let n = instances.len();
    r.verdict(
        9,
        "solver against the reference optima",
        n >= 20 && n == reference.len() && failures.is_empty(),
        format!("{n} instances with N <= 5; worst relative objective gap {worst:.2e}; failures {failures:?}"),
    );
}

fn main() -> ExitCode {
    // Discovery passes such as `cargo test -- --list` expect no work.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut r = Report { failed: Vec::new() };
    let scn = cli::scenario_file::reference();
    let variant_scn = common::noise110();

    let started = Instant::now();
    let runs = run_all(&scn);
    let elapsed = started.elapsed().as_secs_f64();
    let variant = run_all(&variant_scn);

    c1(&mut r, &runs, elapsed, &variant);
    c2(&mut r, &scn, &runs, &variant_scn, &variant);
    c3(&mut r);
    c4(&mut r);
    c5(&mut r, &scn, &runs);
    c6(&mut r);
    c7(&mut r, &scn);
    c8(&mut r);
    c9(&mut r);

    if r.failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {:?}", r.failed);
        ExitCode::FAILURE
    }
}
