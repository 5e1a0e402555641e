//! Exact per-slot blocklength allocation for a fixed trajectory.
//!
//! With the UAV position fixed the slot throughput depends only on the
//! split `(l_u, l_d)`, so every split of `L_max` is scanned.

use rayon::prelude::*;
use serde::Serialize;

use crate::fbl::{secrecy_rate_unchecked, BlocklengthPlan};
use crate::scenario::{Link, Point, Scenario, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlotSplit {
    pub l_u: u32,
    pub l_d: u32,
    /// Secrecy throughput of the split, bps.
    pub b_s: f64,
}

/// Scans `l_u = x, l_d = L_max − x` for every `x ∈ {0,…,L_max}` and keeps the
/// best; ties go to the smallest `l_u`. A slot whose best throughput is not
/// positive gets `(0, 0, 0)`.
pub fn optimize_slot_blocklength(scn: &Scenario, q_r: &Point) -> SlotSplit {
    let gamma_r = scn.snr(q_r, Link::UplinkRelay);
    let gamma_ae = scn.avg_eve_uplink_snr();
    let gamma_b = scn.snr(q_r, Link::DownlinkBob);
    let gamma_re = scn.snr(q_r, Link::DownlinkEve);
    let (qe, qn) = (scn.q_inv_eps(), scn.q_inv_eta());
    let scale = (1.0 - scn.eps_dec) / scn.delta_t;

    let mut best = SlotSplit { l_u: 0, l_d: 0, b_s: 0.0 };
    for x in 0..=scn.l_max {
        let (l_u, l_d) = (x, scn.l_max - x);
        if l_u == 0 || l_d == 0 {
            continue;
        }
        let up = l_u as f64 * secrecy_rate_unchecked(gamma_r, gamma_ae, l_u as f64, qe, qn);
        let down = l_d as f64 * secrecy_rate_unchecked(gamma_b, gamma_re, l_d as f64, qe, qn);
        let b_s = scale * up.min(down).max(0.0);
        if b_s > best.b_s {
            best = SlotSplit { l_u, l_d, b_s };
        }
    }
    best
}

/// Independent per-slot search along the whole trajectory.
pub fn optimize_plan(scn: &Scenario, traj: &Trajectory) -> BlocklengthPlan {
    let splits: Vec<SlotSplit> = traj
        .waypoints()
        .par_iter()
        .map(|q| optimize_slot_blocklength(scn, q))
        .collect();
    let (up, down) = splits.iter().map(|s| (s.l_u, s.l_d)).unzip();
    BlocklengthPlan::new(scn.l_max, up, down).expect("every split sums to at most L_max")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::{secrecy_rate_dl, secrecy_rate_ul, slot_throughput};
    use crate::scenario::ScenarioParams;

    fn brute_force(scn: &Scenario, q: &Point) -> (u32, u32, f64) {
        let mut all: Vec<(u32, f64)> = (0..=scn.l_max)
            .map(|x| {
                let l_d = scn.l_max - x;
                let b = if x == 0 || l_d == 0 {
                    0.0
                } else {
                    slot_throughput(
                        scn,
                        secrecy_rate_ul(scn, q, x).unwrap(),
                        secrecy_rate_dl(scn, q, l_d).unwrap(),
                        x,
                        l_d,
                    )
                };
                (x, b)
            })
            .collect();
        let max = all.iter().map(|p| p.1).fold(0.0, f64::max);
        if max <= 0.0 {
            return (0, 0, 0.0);
        }
        all.retain(|p| p.1 == max);
        (all[0].0, scn.l_max - all[0].0, max)
    }

    #[test]
    fn symmetric_links_split_evenly() {
        // Alice and Bob mirror each other and Eve's downlink SNR equals the
        // averaged uplink one, so both hops are identical.
        let mut p = ScenarioParams::reference();
        p.q_a = Point::new(-500.0, 0.0, 0.0);
        p.q_b = Point::new(500.0, 0.0, 0.0);
        p.alpha = 2.0 + 1e-9;
        p.q_i = Point::new(0.0, 0.0, 60.0);
        p.q_f = Point::new(0.0, 0.0, 60.0);
        // |q - q_e|² = |q_a - q_e|² for q above the origin.
        p.q_e = Point::new(-246.4, 2000.0, 0.0);
        let scn = Scenario::new(p).unwrap();
        let q = Point::new(0.0, 0.0, 60.0);
        let gap_u = scn.snr(&q, Link::UplinkRelay) - scn.snr(&q, Link::DownlinkBob);
        assert!(gap_u.abs() < 1e-9);
        let s = optimize_slot_blocklength(&scn, &q);
        let (l_u, _, b) = brute_force(&scn, &q);
        assert_eq!(s.l_u, l_u);
        assert_eq!(s.b_s, b);
        assert!(s.l_u.abs_diff(scn.l_max / 2) <= 1, "{s:?}");
    }

    #[test]
    fn weaker_hop_gets_more_channel_uses() {
        let scn = Scenario::reference();
        // Right above Bob: the downlink is far stronger than the uplink.
        let q = Point::new(700.0, 0.0, 60.0);
        let s = optimize_slot_blocklength(&scn, &q);
        assert!(s.l_u > s.l_d, "{s:?}");
        assert_eq!((s.l_u, s.l_d, s.b_s), brute_force(&scn, &q));
    }

    #[test]
    fn hopeless_slot_is_silent() {
        let mut p = ScenarioParams::reference();
        p.q_e = Point::new(700.0, 1.0, 0.0);
        let scn = Scenario::new(p).unwrap();
        let q = Point::new(700.0, 0.5, 60.0);
        assert_eq!(optimize_slot_blocklength(&scn, &q), SlotSplit { l_u: 0, l_d: 0, b_s: 0.0 });
    }

    #[test]
    fn plan_uses_full_budget_or_nothing() {
        let scn = Scenario::reference();
        let traj = Trajectory::straight_line(&scn);
        let plan = optimize_plan(&scn, &traj);
        for n in 0..plan.len() {
            let (u, d) = plan.slot(n);
            assert!(u + d == 0 || u + d == scn.l_max);
        }
    }
}
