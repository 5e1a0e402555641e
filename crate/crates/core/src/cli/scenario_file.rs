//! TOML scenario files.
//!
//! Every power-like field is given either on a linear scale or in decibels,
//! selected by the key suffix: `p_a` (W) or `p_a_dbm`, `beta0` or `beta0_db`,
//! `sigma2` (W) or `sigma2_dbm`. Positions are `[x, y, z]` in meters.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{db_to_linear, dbm_to_watts, Point, Scenario, ScenarioParams};

/// The reference parameter table shipped with the crate.
pub const TABLE1_TOML: &str = include_str!("../../scenarios/reference.toml");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    q_a: [f64; 3],
    q_b: [f64; 3],
    q_e: [f64; 3],
    q_i: [f64; 3],
    q_f: [f64; 3],
    altitude: f64,
    p_a: Option<f64>,
    p_a_dbm: Option<f64>,
    p_r: Option<f64>,
    p_r_dbm: Option<f64>,
    beta0: Option<f64>,
    beta0_db: Option<f64>,
    alpha: f64,
    sigma2: Option<f64>,
    sigma2_dbm: Option<f64>,
    bandwidth: f64,
    delta_t: f64,
    mission_time: f64,
    slots: usize,
    l_max: u32,
    v_max: f64,
    eps_dec: f64,
    eta_leak: f64,
    eps_conv: f64,
}

fn pick(
    path: &str,
    name: &str,
    linear: Option<f64>,
    log: Option<f64>,
    suffix: &str,
    convert: fn(f64) -> f64,
) -> Result<f64> {
    match (linear, log) {
        (Some(v), None) => Ok(v),
        (None, Some(v)) => Ok(convert(v)),
        (Some(_), Some(_)) => Err(Error::Parse {
            path: path.to_string(),
            message: format!("field `{name}` is given twice (as `{name}` and `{name}{suffix}`)"),
        }),
        (None, None) => Err(Error::Parse {
            path: path.to_string(),
            message: format!("missing field `{name}` (or `{name}{suffix}`)"),
        }),
    }
}

fn point(v: [f64; 3]) -> Point {
    Point::new(v[0], v[1], v[2])
}

/// Parses scenario TOML; `origin` names the source in diagnostics.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        message: e.to_string().trim_end().to_string(),
    })?;
    let params = ScenarioParams {
        q_a: point(raw.q_a),
        q_b: point(raw.q_b),
        q_e: point(raw.q_e),
        q_i: point(raw.q_i),
        q_f: point(raw.q_f),
        altitude: raw.altitude,
        p_a: pick(origin, "p_a", raw.p_a, raw.p_a_dbm, "_dbm", dbm_to_watts)?,
        p_r: pick(origin, "p_r", raw.p_r, raw.p_r_dbm, "_dbm", dbm_to_watts)?,
        beta0: pick(origin, "beta0", raw.beta0, raw.beta0_db, "_db", db_to_linear)?,
        alpha: raw.alpha,
        sigma2: pick(origin, "sigma2", raw.sigma2, raw.sigma2_dbm, "_dbm", dbm_to_watts)?,
        bandwidth: raw.bandwidth,
        delta_t: raw.delta_t,
        mission_time: raw.mission_time,
        slots: raw.slots,
        l_max: raw.l_max,
        v_max: raw.v_max,
        eps_dec: raw.eps_dec,
        eta_leak: raw.eta_leak,
        eps_conv: raw.eps_conv,
    };
    Scenario::new(params)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// The bundled reference scenario.
pub fn reference() -> Scenario {
    parse_scenario(TABLE1_TOML, "reference.toml").expect("bundled scenario is valid")
}
