//! Physical scenario, UAV trajectories and the line-of-sight channel model.
//!
//! All quantities are linear scale (watts, linear gains, meters). Decibel
//! values from configuration files are converted exactly once, when a
//! [`ScenarioParams`] is built.

use std::ops::Deref;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl;

/// Cartesian position in meters.
pub type Point = Vector3<f64>;

/// Slack allowed on the per-slot displacement limit.
pub const MOTION_TOL: f64 = 1e-6;

/// Tolerance on endpoint and altitude equalities of a trajectory.
pub const POSITION_TOL: f64 = 1e-6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Raw system parameters, linear scale. Turned into a [`Scenario`] by
/// [`Scenario::new`], which enforces every invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    /// Alice (source), ground level.
    pub q_a: Point,
    /// Bob (destination), ground level.
    pub q_b: Point,
    /// Eve (passive eavesdropper), ground level.
    pub q_e: Point,
    /// UAV start position, at altitude.
    pub q_i: Point,
    /// UAV final position, at altitude.
    pub q_f: Point,
    /// Flight altitude, m.
    pub altitude: f64,
    /// Alice transmit power, W.
    pub p_a: f64,
    /// Relay transmit power, W.
    pub p_r: f64,
    /// Channel power gain at the reference distance of 1 m.
    pub beta0: f64,
    /// Ground-to-ground path-loss exponent (Alice–Eve).
    pub alpha: f64,
    /// Noise power, W.
    pub sigma2: f64,
    /// Bandwidth, Hz.
    pub bandwidth: f64,
    /// Timeslot duration, s.
    pub delta_t: f64,
    /// Mission time, s.
    pub mission_time: f64,
    /// Number of timeslots.
    pub slots: usize,
    /// Maximum total blocklength per slot, channel uses.
    pub l_max: u32,
    /// Maximum UAV speed, m/s.
    pub v_max: f64,
    /// Decoding error probability.
    pub eps_dec: f64,
    /// Information leakage.
    pub eta_leak: f64,
    /// Convergence threshold on EAST between outer iterations, bps.
    pub eps_conv: f64,
}

impl ScenarioParams {
    /// The reference system parameter table: 20 dBm powers, −70 dB reference
    /// gain, α = 3, −140 dBm noise, 100 one-second slots, L_max = 400.
    pub fn reference() -> Self {
        ScenarioParams {
            q_a: Point::new(-700.0, 0.0, 0.0),
            q_b: Point::new(700.0, 0.0, 0.0),
            q_e: Point::new(-500.0, 900.0, 0.0),
            q_i: Point::new(-500.0, -1000.0, 60.0),
            q_f: Point::new(1000.0, 500.0, 60.0),
            altitude: 60.0,
            p_a: dbm_to_watts(20.0),
            p_r: dbm_to_watts(20.0),
            beta0: db_to_linear(-70.0),
            alpha: 3.0,
            sigma2: dbm_to_watts(-140.0),
            bandwidth: 1e6,
            delta_t: 1.0,
            mission_time: 100.0,
            slots: 100,
            l_max: 400,
            v_max: 30.0,
            eps_dec: 1e-3,
            eta_leak: 1e-2,
            eps_conv: 1e-3,
        }
    }
}

/// Validated, immutable scenario with cached derived constants.
#[derive(Clone, Debug)]
pub struct Scenario {
    params: ScenarioParams,
    rho_a: f64,
    rho_r: f64,
    gamma_bar_ae: f64,
    q_inv_eps: f64,
    q_inv_eta: f64,
}

impl Deref for Scenario {
    type Target = ScenarioParams;

    fn deref(&self) -> &ScenarioParams {
        &self.params
    }
}

/// Radio links whose SNR depends on the UAV position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Link {
    /// Alice → UAV.
    UplinkRelay,
    /// UAV → Bob.
    DownlinkBob,
    /// UAV → Eve.
    DownlinkEve,
}

impl Scenario {
    pub fn new(params: ScenarioParams) -> Result<Self> {
        validate(&params)?;
        let rho_a = params.p_a * params.beta0 / params.sigma2;
        let rho_r = params.p_r * params.beta0 / params.sigma2;
        let gamma_bar_ae = rho_a / (params.q_a - params.q_e).norm().powf(params.alpha);
        let q_inv_eps = fbl::q_inv(params.eps_dec)?;
        let q_inv_eta = fbl::q_inv(params.eta_leak)?;
        Ok(Scenario {
            params,
            rho_a,
            rho_r,
            gamma_bar_ae,
            q_inv_eps,
            q_inv_eta,
        })
    }

    pub fn reference() -> Self {
        Scenario::new(ScenarioParams::reference()).expect("reference table is valid")
    }

    pub fn params(&self) -> &ScenarioParams {
        &self.params
    }

    /// Transmit SNR of Alice at the reference distance, `p_a·β0/σ²`.
    pub fn rho_a(&self) -> f64 {
        self.rho_a
    }

    /// Transmit SNR of the relay at the reference distance, `p_r·β0/σ²`.
    pub fn rho_r(&self) -> f64 {
        self.rho_r
    }

    /// `Q⁻¹(ε)` for the decoding error target.
    pub fn q_inv_eps(&self) -> f64 {
        self.q_inv_eps
    }

    /// `Q⁻¹(η)` for the leakage target.
    pub fn q_inv_eta(&self) -> f64 {
        self.q_inv_eta
    }

    pub fn los_gain(&self, q_r: &Point, q_j: &Point) -> Result<f64> {
        los_gain(self.beta0, q_r, q_j)
    }

    /// Received SNR on `link` with the UAV at `q_r`. The UAV is airborne,
    /// so it never coincides with a ground node.
    pub fn snr(&self, q_r: &Point, link: Link) -> f64 {
        debug_assert!(q_r.z > 0.0, "UAV position must be above ground");
        let (rho, node) = match link {
            Link::UplinkRelay => (self.rho_a, &self.q_a),
            Link::DownlinkBob => (self.rho_r, &self.q_b),
            Link::DownlinkEve => (self.rho_r, &self.q_e),
        };
        rho / (q_r - node).norm_squared()
    }

    /// Mean SNR of the Rayleigh-faded Alice → Eve ground link.
    pub fn avg_eve_uplink_snr(&self) -> f64 {
        self.gamma_bar_ae
    }

    /// One faded draw `γ̄_ae·ζ`, `ζ ~ Exp(1)`; the first element of
    /// [`Scenario::eve_uplink_snr_samples`] for the same seed.
    pub fn sample_eve_uplink_snr(&self, seed: u64) -> f64 {
        self.eve_uplink_snr_samples(seed)
            .next()
            .expect("sampler is infinite")
    }

    /// Deterministic stream of faded Alice → Eve SNR draws.
    pub fn eve_uplink_snr_samples(&self, seed: u64) -> impl Iterator<Item = f64> {
        let mean = self.gamma_bar_ae;
        unit_exponential_samples(seed).map(move |zeta| mean * zeta)
    }

    /// Straight-line distance the UAV must cover between its endpoints.
    pub fn endpoint_distance(&self) -> f64 {
        (self.q_f - self.q_i).norm()
    }

    /// Per-slot displacement limit `v_max·δ_t`.
    pub fn max_step(&self) -> f64 {
        self.v_max * self.delta_t
    }

    /// Hash of the linear-scale parameters; ties artifacts to their inputs.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(&self.params).expect("params serialize");
        hex::encode(Sha256::digest(&canonical))
    }
}

/// `ζ ~ Exp(1)` draws from a ChaCha8 stream.
pub fn unit_exponential_samples(seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || Exp1.sample(&mut rng))
}

/// Free-space LoS channel power gain `β0/‖q_r − q_j‖²`.
pub fn los_gain(beta0: f64, q_r: &Point, q_j: &Point) -> Result<f64> {
    let d2 = (q_r - q_j).norm_squared();
    if d2 == 0.0 {
        return Err(Error::domain("channel gain between coincident points"));
    }
    Ok(beta0 / d2)
}

fn validate(p: &ScenarioParams) -> Result<()> {
    let finite = [
        p.altitude,
        p.p_a,
        p.p_r,
        p.beta0,
        p.alpha,
        p.sigma2,
        p.bandwidth,
        p.delta_t,
        p.mission_time,
        p.v_max,
        p.eps_dec,
        p.eta_leak,
        p.eps_conv,
    ]
    .iter()
    .chain(p.q_a.iter())
    .chain(p.q_b.iter())
    .chain(p.q_e.iter())
    .chain(p.q_i.iter())
    .chain(p.q_f.iter())
    .all(|v| v.is_finite());
    if !finite {
        return Err(Error::scenario("all parameters must be finite", ""));
    }
    let positive = [
        ("p_a > 0", p.p_a),
        ("p_r > 0", p.p_r),
        ("beta0 > 0", p.beta0),
        ("sigma2 > 0", p.sigma2),
        ("W > 0", p.bandwidth),
        ("H > 0", p.altitude),
        ("v_max > 0", p.v_max),
        ("delta_t > 0", p.delta_t),
        ("eps_conv > 0", p.eps_conv),
    ];
    for (rule, value) in positive {
        if value <= 0.0 {
            return Err(Error::scenario(rule, format!("got {value}")));
        }
    }
    if p.l_max == 0 {
        return Err(Error::scenario("L_max > 0", "got 0"));
    }
    if p.slots == 0 {
        return Err(Error::scenario("N >= 1", "got 0"));
    }
    let horizon = p.slots as f64 * p.delta_t;
    if (horizon - p.mission_time).abs() > 1e-9 * p.mission_time.abs().max(1.0) {
        return Err(Error::scenario(
            "N * delta_t = T",
            format!("{} * {} != {}", p.slots, p.delta_t, p.mission_time),
        ));
    }
    if !(p.alpha > 2.0 && p.alpha <= 4.0) {
        return Err(Error::scenario("2 < alpha <= 4", format!("got {}", p.alpha)));
    }
    if !(p.eps_dec > 0.0 && p.eps_dec < 0.5) {
        return Err(Error::scenario("0 < eps_dec < 0.5", format!("got {}", p.eps_dec)));
    }
    if !(p.eta_leak > 0.0 && p.eta_leak < 0.5) {
        return Err(Error::scenario("0 < eta_leak < 0.5", format!("got {}", p.eta_leak)));
    }
    for (rule, q) in [
        ("q_a on the ground (z = 0)", &p.q_a),
        ("q_b on the ground (z = 0)", &p.q_b),
        ("q_e on the ground (z = 0)", &p.q_e),
    ] {
        if q.z != 0.0 {
            return Err(Error::scenario(rule, format!("z = {}", q.z)));
        }
    }
    for (rule, q) in [("q_i at altitude H", &p.q_i), ("q_f at altitude H", &p.q_f)] {
        if (q.z - p.altitude).abs() > POSITION_TOL {
            return Err(Error::scenario(rule, format!("z = {}, H = {}", q.z, p.altitude)));
        }
    }
    if (p.q_a - p.q_e).norm() == 0.0 {
        return Err(Error::scenario("Alice and Eve must not coincide", ""));
    }
    if p.l_max as f64 / p.bandwidth > p.delta_t {
        return Err(Error::scenario(
            "L_max / W <= delta_t",
            "a full-length packet exchange must fit in one slot",
        ));
    }
    let reach = (p.slots.saturating_sub(1)) as f64 * p.v_max * p.delta_t;
    let needed = (p.q_f - p.q_i).norm();
    if needed > reach + MOTION_TOL {
        return Err(Error::scenario(
            "|q_i - q_f| <= (N-1) v_max delta_t",
            format!("endpoints {needed:.3} m apart, reachable {reach:.3} m"),
        ));
    }
    Ok(())
}

/// UAV waypoints, one per timeslot, all at the scenario altitude.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Trajectory {
    waypoints: Vec<Point>,
}

impl Trajectory {
    /// Checks the endpoint constraints, the altitude and the per-slot
    /// displacement limit.
    pub fn new(scn: &Scenario, waypoints: Vec<Point>) -> Result<Self> {
        if waypoints.len() != scn.slots {
            return Err(Error::InvalidTrajectory(format!(
                "{} waypoints for {} slots",
                waypoints.len(),
                scn.slots
            )));
        }
        let first = waypoints.first().expect("N >= 1");
        let last = waypoints.last().expect("N >= 1");
        if (first - scn.q_i).norm() > POSITION_TOL {
            return Err(Error::InvalidTrajectory(format!(
                "first waypoint {first:?} is not q_i"
            )));
        }
        if (last - scn.q_f).norm() > POSITION_TOL {
            return Err(Error::InvalidTrajectory(format!(
                "last waypoint {last:?} is not q_f"
            )));
        }
        for (n, q) in waypoints.iter().enumerate() {
            if !q.iter().all(|v| v.is_finite()) || (q.z - scn.altitude).abs() > POSITION_TOL {
                return Err(Error::InvalidTrajectory(format!(
                    "waypoint {n} is off the flight altitude"
                )));
            }
        }
        let limit = scn.max_step() + MOTION_TOL;
        for (n, pair) in waypoints.windows(2).enumerate() {
            let step = (pair[1] - pair[0]).norm();
            if step > limit {
                return Err(Error::InvalidTrajectory(format!(
                    "step {n}->{} covers {step:.9} m, limit {:.9} m",
                    n + 1,
                    scn.max_step()
                )));
            }
        }
        Ok(Trajectory { waypoints })
    }

    /// Constant-speed straight line from `q_i` to `q_f`.
    pub fn straight_line(scn: &Scenario) -> Self {
        let n = scn.slots;
        let waypoints = (0..n)
            .map(|k| {
                if n == 1 {
                    scn.q_i
                } else {
                    let s = k as f64 / (n - 1) as f64;
                    scn.q_i + (scn.q_f - scn.q_i) * s
                }
            })
            .collect();
        Trajectory { waypoints }
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// `‖q[n+1] − q[n]‖/δ_t` per slot; the final slot repeats the last value.
    pub fn speeds(&self, delta_t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm() / delta_t)
            .collect();
        let last = out.last().copied().unwrap_or(0.0);
        out.push(last);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn los_gain_examples() {
        let g = los_gain(1e-7, &Point::new(0.0, 0.0, 60.0), &Point::zeros()).unwrap();
        assert!(rel(g, 2.7778e-11) < 1e-4);
        let g = los_gain(1.0, &Point::new(1.0, 0.0, 0.0), &Point::zeros()).unwrap();
        assert_eq!(g, 1.0);
        let scn = Scenario::reference();
        let g = scn.los_gain(&scn.q_i, &scn.q_a).unwrap();
        assert!(rel(g, 1e-7 / 1_043_600.0) < 1e-12);
        assert!(rel(g, 9.582e-14) < 1e-3);
        assert!(los_gain(1.0, &Point::zeros(), &Point::zeros()).is_err());
    }

    #[test]
    fn reference_derived_constants() {
        let scn = Scenario::reference();
        assert!(rel(scn.rho_a(), 1e9) < 1e-12);
        assert!(rel(scn.rho_r(), 1e9) < 1e-12);
        assert!(rel(scn.snr(&scn.q_i, Link::UplinkRelay), 958.2) < 1e-4);
        let above_bob = Point::new(700.0, 0.0, 60.0);
        assert!(rel(scn.snr(&above_bob, Link::DownlinkBob), 2.778e5) < 1e-4);
        assert!(rel(scn.avg_eve_uplink_snr(), 1.276) < 1e-3);
        let d = (scn.q_a - scn.q_e).norm();
        assert!(rel(d, 921.95) < 1e-5);
    }

    #[test]
    fn snr_inverse_square_and_link_independence() {
        let scn = Scenario::reference();
        let near = Point::new(-700.0, 0.0, 60.0);
        let far = Point::new(-700.0, 0.0, 120.0);
        let ratio = scn.snr(&near, Link::UplinkRelay) / scn.snr(&far, Link::UplinkRelay);
        assert!((ratio - 4.0).abs() < 1e-12);

        let mut moved = scn.params().clone();
        moved.q_b = Point::new(300.0, 250.0, 0.0);
        moved.q_e = Point::new(-900.0, -400.0, 0.0);
        let moved = Scenario::new(moved).unwrap();
        let q = Point::new(10.0, 20.0, 60.0);
        assert_eq!(scn.snr(&q, Link::UplinkRelay), moved.snr(&q, Link::UplinkRelay));
    }

    #[test]
    fn avg_eve_snr_scaling() {
        let mut p = ScenarioParams::reference();
        p.alpha = 2.5;
        let base = Scenario::new(p.clone()).unwrap().avg_eve_uplink_snr();
        p.p_a *= 2.0;
        let doubled = Scenario::new(p).unwrap().avg_eve_uplink_snr();
        assert!(rel(doubled, 2.0 * base) < 1e-12);
    }

    #[test]
    fn eve_sampler_is_deterministic_and_unbiased() {
        let scn = Scenario::reference();
        let a: Vec<f64> = scn.eve_uplink_snr_samples(7).take(16).collect();
        let b: Vec<f64> = scn.eve_uplink_snr_samples(7).take(16).collect();
        assert_eq!(a, b);
        assert_eq!(scn.sample_eve_uplink_snr(7), a[0]);
        let n = 1_000_000;
        let mut sum = 0.0;
        for s in scn.eve_uplink_snr_samples(11).take(n) {
            assert!(s >= 0.0);
            sum += s;
        }
        let mean = sum / n as f64;
        assert!(rel(mean, scn.avg_eve_uplink_snr()) < 5e-3);
    }

    #[test]
    fn invariants_are_enforced() {
        let check = |edit: &dyn Fn(&mut ScenarioParams), rule: &str| {
            let mut p = ScenarioParams::reference();
            edit(&mut p);
            match Scenario::new(p) {
                Err(Error::InvalidScenario { rule: r, .. }) => assert_eq!(r, rule),
                other => panic!("expected {rule}, got {other:?}"),
            }
        };
        check(&|p| p.alpha = 5.0, "2 < alpha <= 4");
        check(&|p| p.alpha = 2.0, "2 < alpha <= 4");
        check(&|p| p.eps_dec = 0.5, "0 < eps_dec < 0.5");
        check(&|p| p.eta_leak = 0.0, "0 < eta_leak < 0.5");
        check(&|p| p.mission_time = 99.0, "N * delta_t = T");
        check(&|p| p.sigma2 = 0.0, "sigma2 > 0");
        check(&|p| p.q_e.z = 1.0, "q_e on the ground (z = 0)");
        check(&|p| p.q_f.z = 70.0, "q_f at altitude H");
        check(&|p| p.v_max = 20.0, "|q_i - q_f| <= (N-1) v_max delta_t");
        // α = 4 is inside the admissible range.
        let mut p = ScenarioParams::reference();
        p.alpha = 4.0;
        assert!(Scenario::new(p).is_ok());
    }

    #[test]
    fn trajectory_checks_mobility() {
        let scn = Scenario::reference();
        let line = Trajectory::straight_line(&scn);
        let validated = Trajectory::new(&scn, line.waypoints().to_vec()).unwrap();
        let speeds = validated.speeds(scn.delta_t);
        assert_eq!(speeds.len(), 100);
        assert!(speeds.iter().all(|s| (s - 2121.3203 / 99.0).abs() < 1e-3));

        let mut bad = line.waypoints().to_vec();
        bad[50].x += 40.0;
        assert!(Trajectory::new(&scn, bad).is_err());
        let mut off = line.waypoints().to_vec();
        off[0].x += 1.0;
        assert!(Trajectory::new(&scn, off).is_err());
    }
}
