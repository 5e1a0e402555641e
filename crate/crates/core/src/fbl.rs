//! Finite-blocklength secrecy rates and throughput.
//!
//! Rates are returned unclamped (they may be negative); the `[·]_+` clamp is
//! applied only when a rate pair is turned into slot throughput.

use std::f64::consts::{LOG2_E, PI, SQRT_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{Link, Point, Scenario, Trajectory};

/// `(log₂ e)²`, the high-SNR limit of the channel dispersion.
pub const DISPERSION_LIMIT: f64 = LOG2_E * LOG2_E;

/// Complementary error function, accurate to a few ulps of relative error
/// across the whole real line.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

// erf(x) = 2/√π · e^{−x²} · Σ 2ⁿ x^{2n+1} / (2n+1)!!, all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

// erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))), modified Lentz.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / PI.sqrt() / f
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_func`]: bisection down to a narrow bracket, then
/// safeguarded Newton steps on `Q(x) − p`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("Q^-1 needs 0 < p < 1, got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return q_inv(1.0 - p).map(|x| -x);
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while q_func(hi) > p {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if q_func(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let newton = x + (q_func(x) - p) / std_normal_pdf(x);
        let accepted = newton > lo && newton < hi;
        let next = if accepted { newton } else { 0.5 * (lo + hi) };
        // Only a Newton step that barely moves signals convergence; a
        // bisection fallback can land on the previous iterate.
        let done = accepted && (next - x).abs() <= 1e-15 * (1.0 + x.abs());
        if q_func(next) > p {
            lo = next;
        } else {
            hi = next;
        }
        x = next;
        if done || hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}

/// Channel dispersion `V(γ) = (log₂ e)²·[1 − (1+γ)⁻²]`.
pub fn dispersion(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::domain(format!("dispersion needs SNR >= 0, got {gamma}")));
    }
    Ok(dispersion_unchecked(gamma))
}

#[inline]
pub(crate) fn dispersion_unchecked(gamma: f64) -> f64 {
    let inv = 1.0 / (1.0 + gamma);
    DISPERSION_LIMIT * (1.0 - inv * inv)
}

/// Finite-blocklength secrecy rate in bits per channel use for a main/eve
/// SNR pair over `l` channel uses:
/// `log₂((1+γ_m)/(1+γ_e)) − √(V(γ_m)/l)·Q⁻¹(ε) − √(V(γ_e)/l)·Q⁻¹(η)`.
pub fn secrecy_rate(
    gamma_main: f64,
    gamma_eve: f64,
    l: u32,
    q_inv_eps: f64,
    q_inv_eta: f64,
) -> Result<f64> {
    if l == 0 {
        return Err(Error::domain("secrecy rate over zero channel uses"));
    }
    if !(gamma_main >= 0.0 && gamma_eve >= 0.0) {
        return Err(Error::domain("SNRs must be nonnegative"));
    }
    Ok(secrecy_rate_unchecked(gamma_main, gamma_eve, l as f64, q_inv_eps, q_inv_eta))
}

#[inline]
pub(crate) fn secrecy_rate_unchecked(
    gamma_main: f64,
    gamma_eve: f64,
    l: f64,
    q_inv_eps: f64,
    q_inv_eta: f64,
) -> f64 {
    ((1.0 + gamma_main) / (1.0 + gamma_eve)).log2()
        - (dispersion_unchecked(gamma_main) / l).sqrt() * q_inv_eps
        - (dispersion_unchecked(gamma_eve) / l).sqrt() * q_inv_eta
}

/// Uplink secrecy rate with the eavesdropper's faded SNR replaced by its
/// mean (the Jensen approximation used throughout the optimizer).
pub fn secrecy_rate_ul(scn: &Scenario, q_r: &Point, l_u: u32) -> Result<f64> {
    secrecy_rate(
        scn.snr(q_r, Link::UplinkRelay),
        scn.avg_eve_uplink_snr(),
        l_u,
        scn.q_inv_eps(),
        scn.q_inv_eta(),
    )
}

pub fn secrecy_rate_dl(scn: &Scenario, q_r: &Point, l_d: u32) -> Result<f64> {
    secrecy_rate(
        scn.snr(q_r, Link::DownlinkBob),
        scn.snr(q_r, Link::DownlinkEve),
        l_d,
        scn.q_inv_eps(),
        scn.q_inv_eta(),
    )
}

/// Monte-Carlo estimate of the exact (fading-averaged) uplink rate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McRate {
    /// Sample mean of the rate expression over the fading draws.
    pub rate: f64,
    /// Standard error of `rate`.
    pub std_error: f64,
    /// Sample mean of `log₂(1 + γ_ae)`.
    pub mean_log_eve: f64,
    /// `log₂(1 + γ̄_ae)`, the value the approximation substitutes.
    pub jensen_log_eve: f64,
    pub samples: usize,
}

pub fn mc_secrecy_rate_ul(
    scn: &Scenario,
    q_r: &Point,
    l_u: u32,
    n_samples: usize,
    seed: u64,
) -> Result<McRate> {
    if n_samples == 0 {
        return Err(Error::domain("Monte-Carlo estimate needs at least one sample"));
    }
    let draws = crate::scenario::unit_exponential_samples(seed).take(n_samples);
    mc_secrecy_rate_ul_from_draws(scn, q_r, l_u, draws)
}

/// Same estimator over caller-provided unit-mean fading draws `ζ`.
pub fn mc_secrecy_rate_ul_from_draws(
    scn: &Scenario,
    q_r: &Point,
    l_u: u32,
    zetas: impl IntoIterator<Item = f64>,
) -> Result<McRate> {
    if l_u == 0 {
        return Err(Error::domain("secrecy rate over zero channel uses"));
    }
    let gamma_r = scn.snr(q_r, Link::UplinkRelay);
    let mean_eve = scn.avg_eve_uplink_snr();
    let l = l_u as f64;
    let (mut n, mut mean, mut m2, mut log_sum) = (0usize, 0.0, 0.0, 0.0);
    for zeta in zetas {
        let gamma_ae = mean_eve * zeta;
        let r = secrecy_rate_unchecked(gamma_r, gamma_ae, l, scn.q_inv_eps(), scn.q_inv_eta());
        n += 1;
        let delta = r - mean;
        mean += delta / n as f64;
        m2 += delta * (r - mean);
        log_sum += (1.0 + gamma_ae).log2();
    }
    if n == 0 {
        return Err(Error::domain("Monte-Carlo estimate needs at least one sample"));
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    Ok(McRate {
        rate: mean,
        std_error: (var / n as f64).sqrt(),
        mean_log_eve: log_sum / n as f64,
        jensen_log_eve: (1.0 + mean_eve).log2(),
        samples: n,
    })
}

/// Secure bits per second delivered in one slot,
/// `(1−ε)/δ_t · [min(R_u·l_u, R_d·l_d)]_+`; zero if either hop is silent.
pub fn slot_throughput(scn: &Scenario, r_u: f64, r_d: f64, l_u: u32, l_d: u32) -> f64 {
    if l_u == 0 || l_d == 0 {
        return 0.0;
    }
    let bits = (r_u * l_u as f64).min(r_d * l_d as f64);
    (1.0 - scn.eps_dec) / scn.delta_t * bits.max(0.0)
}

/// Per-slot uplink/downlink channel-use counts.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlocklengthPlan {
    uplink: Vec<u32>,
    downlink: Vec<u32>,
}

impl BlocklengthPlan {
    pub fn new(l_max: u32, uplink: Vec<u32>, downlink: Vec<u32>) -> Result<Self> {
        if uplink.len() != downlink.len() {
            return Err(Error::InvalidPlan(format!(
                "{} uplink vs {} downlink entries",
                uplink.len(),
                downlink.len()
            )));
        }
        for (n, (u, d)) in uplink.iter().zip(&downlink).enumerate() {
            if u64::from(*u) + u64::from(*d) > u64::from(l_max) {
                return Err(Error::InvalidPlan(format!(
                    "slot {n}: {u} + {d} exceeds L_max = {l_max}"
                )));
            }
        }
        Ok(BlocklengthPlan { uplink, downlink })
    }

    pub fn uniform(slots: usize, l_u: u32, l_d: u32) -> Self {
        BlocklengthPlan {
            uplink: vec![l_u; slots],
            downlink: vec![l_d; slots],
        }
    }

    pub fn uplink(&self) -> &[u32] {
        &self.uplink
    }

    pub fn downlink(&self) -> &[u32] {
        &self.downlink
    }

    pub fn len(&self) -> usize {
        self.uplink.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uplink.is_empty()
    }

    pub fn slot(&self, n: usize) -> (u32, u32) {
        (self.uplink[n], self.downlink[n])
    }
}

/// SNRs, rates and throughput of one slot. Rates are `None` when the
/// corresponding hop carries no channel uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotMetrics {
    pub gamma_r: f64,
    pub gamma_bar_ae: f64,
    pub gamma_b: f64,
    pub gamma_re: f64,
    pub r_u: Option<f64>,
    pub r_d: Option<f64>,
    /// Secrecy throughput, bps.
    pub b_s: f64,
}

pub fn slot_metrics(scn: &Scenario, q_r: &Point, l_u: u32, l_d: u32) -> SlotMetrics {
    let gamma_r = scn.snr(q_r, Link::UplinkRelay);
    let gamma_bar_ae = scn.avg_eve_uplink_snr();
    let gamma_b = scn.snr(q_r, Link::DownlinkBob);
    let gamma_re = scn.snr(q_r, Link::DownlinkEve);
    let rate = |main, eve, l: u32| {
        (l > 0).then(|| {
            secrecy_rate_unchecked(main, eve, l as f64, scn.q_inv_eps(), scn.q_inv_eta())
        })
    };
    let r_u = rate(gamma_r, gamma_bar_ae, l_u);
    let r_d = rate(gamma_b, gamma_re, l_d);
    let b_s = match (r_u, r_d) {
        (Some(u), Some(d)) => slot_throughput(scn, u, d, l_u, l_d),
        _ => 0.0,
    };
    SlotMetrics {
        gamma_r,
        gamma_bar_ae,
        gamma_b,
        gamma_re,
        r_u,
        r_d,
        b_s,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EastEvaluation {
    /// Effective average secrecy throughput, bps.
    pub east: f64,
    pub slots: Vec<SlotMetrics>,
}

/// Effective average secrecy throughput `(1/N)·Σ B̄_s[n]`.
pub fn east(scn: &Scenario, traj: &Trajectory, plan: &BlocklengthPlan) -> Result<EastEvaluation> {
    if traj.len() != plan.len() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} slots, plan has {}",
            traj.len(),
            plan.len()
        )));
    }
    let slots: Vec<SlotMetrics> = traj
        .waypoints()
        .iter()
        .enumerate()
        .map(|(n, q)| {
            let (l_u, l_d) = plan.slot(n);
            slot_metrics(scn, q, l_u, l_d)
        })
        .collect();
    let east = slots.iter().map(|m| m.b_s).sum::<f64>() / slots.len() as f64;
    Ok(EastEvaluation { east, slots })
}
