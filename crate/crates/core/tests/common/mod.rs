//! Scenario generators shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spc_relay::fbl::BlocklengthPlan;
use spc_relay::scenario::{dbm_to_watts, Point, Scenario, ScenarioParams, Trajectory};
use spc_relay::solver::{Affine, Constraint, ConvexProblem, VarId};

/// Same table with the noise floor raised to −110 dBm.
pub const NOISE110_TOML: &str = include_str!("../../scenarios/reference_noise110.toml");

pub fn noise110() -> Scenario {
    spc_relay::cli::parse_scenario(NOISE110_TOML, "reference_noise110.toml").unwrap()
}

fn ground(rng: &mut impl Rng, half: f64) -> Point {
    Point::new(rng.random_range(-half..half), rng.random_range(-half..half), 0.0)
}

/// Nodes and endpoints uniform in a 2 km square, both powers uniform in
/// 10–30 dBm, everything else from the reference table.
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut p = ScenarioParams::reference();
        p.q_a = ground(&mut rng, 1000.0);
        p.q_b = ground(&mut rng, 1000.0);
        p.q_e = ground(&mut rng, 1000.0);
        p.q_i = ground(&mut rng, 1000.0) + Point::new(0.0, 0.0, p.altitude);
        p.q_f = ground(&mut rng, 1000.0) + Point::new(0.0, 0.0, p.altitude);
        p.p_a = dbm_to_watts(rng.random_range(10.0..30.0));
        p.p_r = dbm_to_watts(rng.random_range(10.0..30.0));
        if let Ok(scn) = Scenario::new(p) {
            return scn;
        }
    }
}

/// A short mission (3 to 5 slots) with a straight-line local point and a
/// random full-budget split per slot.
pub fn small_instance(seed: u64) -> (Scenario, Trajectory, BlocklengthPlan) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut p = ScenarioParams::reference();
        let n: usize = rng.random_range(3..=5);
        p.slots = n;
        p.mission_time = n as f64 * p.delta_t;
        p.q_a = ground(&mut rng, 500.0);
        p.q_b = ground(&mut rng, 500.0);
        p.q_e = ground(&mut rng, 500.0);
        p.q_i = ground(&mut rng, 500.0) + Point::new(0.0, 0.0, p.altitude);
        let reach = 0.9 * (n - 1) as f64 * p.v_max * p.delta_t;
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(0.0..reach);
        p.q_f = p.q_i + Point::new(r * angle.cos(), r * angle.sin(), 0.0);
        p.p_a = dbm_to_watts(rng.random_range(10.0..30.0));
        p.p_r = dbm_to_watts(rng.random_range(10.0..30.0));
        let Ok(scn) = Scenario::new(p) else { continue };
        let uplink: Vec<u32> = (0..n).map(|_| rng.random_range(40..=360)).collect();
        let downlink = uplink.iter().map(|l| scn.l_max - l).collect();
        let plan = BlocklengthPlan::new(scn.l_max, uplink, downlink).unwrap();
        let traj = Trajectory::straight_line(&scn);
        return (scn, traj, plan);
    }
}

fn affine(v: &serde_json::Value, ids: &[VarId]) -> Affine {
    let mut a = Affine::constant(v["constant"].as_f64().unwrap());
    for t in v["terms"].as_array().unwrap() {
        a = a.plus(ids[t[0].as_u64().unwrap() as usize], t[1].as_f64().unwrap());
    }
    a
}

fn affines(v: &serde_json::Value, ids: &[VarId]) -> Vec<Affine> {
    v.as_array().unwrap().iter().map(|a| affine(a, ids)).collect()
}

/// Rebuilds a serialized [`ConvexProblem`] through the public builder.
pub fn problem_from_json(v: &serde_json::Value) -> ConvexProblem {
    let mut p = ConvexProblem::new();
    let ids: Vec<VarId> = v["vars"]
        .as_array()
        .unwrap()
        .iter()
        .map(|var| {
            p.add_var(
                var["name"].as_str().unwrap(),
                var["lower"].as_f64(),
                var["upper"].as_f64(),
                var["scale"].as_f64().unwrap(),
            )
        })
        .collect();
    for (i, c) in v["objective"].as_array().unwrap().iter().enumerate() {
        p.set_objective(ids[i], c.as_f64().unwrap());
    }
    for row in v["rows"].as_array().unwrap() {
        let (kind, body) = row["constraint"].as_object().unwrap().iter().next().unwrap();
        let c = match kind.as_str() {
            "AffineEq" => Constraint::AffineEq(affine(body, &ids)),
            "AffineIneq" => Constraint::AffineIneq(affine(body, &ids)),
            "QuadBall" => Constraint::QuadBall {
                args: affines(&body["args"], &ids),
                bound: affine(&body["bound"], &ids),
            },
            "Soc" => Constraint::Soc {
                args: affines(&body["args"], &ids),
                bound: affine(&body["bound"], &ids),
            },
            "LogAffine" => Constraint::LogAffine {
                logs: body["logs"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|l| (l[0].as_f64().unwrap(), affine(&l[1], &ids)))
                    .collect(),
                rhs: affine(&body["rhs"], &ids),
            },
            "Reciprocal" => Constraint::Reciprocal {
                var: ids[body["var"].as_u64().unwrap() as usize],
                denom: ids[body["denom"].as_u64().unwrap() as usize],
            },
            other => panic!("unknown row kind {other}"),
        };
        let family: &'static str = Box::leak(row["label"]["family"].as_str().unwrap().to_string().into_boxed_str());
        p.add_row(c, family, row["label"]["slot"].as_u64().map(|s| s as usize));
    }
    p
}
