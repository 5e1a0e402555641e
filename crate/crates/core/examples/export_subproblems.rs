//! Writes the random small trajectory subproblems used by the solver
//! cross-check to `tests/fixtures/subproblems.json`.
//!
//! ```text
//! cargo run --release --example export_subproblems
//! python3 tests/fixtures/reference_solve.py
//! ```

#[path = "../tests/common/mod.rs"]
mod common;

use std::path::Path;

use serde::Serialize;
use spc_relay::sca::{build_subproblem, init_slacks};
use spc_relay::solver::ConvexProblem;

const INSTANCES: usize = 24;

#[derive(Serialize)]
struct Instance {
    seed: u64,
    slots: usize,
    active_slots: usize,
    problem: ConvexProblem,
    start: Vec<f64>,
}

fn main() -> spc_relay::Result<()> {
    let mut out = Vec::new();
    for seed in 0.. {
        if out.len() == INSTANCES {
            break;
        }
        let (scn, traj, plan) = common::small_instance(seed);
        let Ok(slacks) = init_slacks(&scn, &traj, &plan) else { continue };
        let Ok(sub) = build_subproblem(&scn, &traj, &plan, &slacks) else { continue };
        out.push(Instance {
            seed,
            slots: scn.slots,
            active_slots: sub.active_slots(),
            problem: sub.problem,
            start: sub.start,
        });
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/subproblems.json");
    std::fs::write(&path, serde_json::to_string(&out)?)?;
    println!("{} instances -> {}", out.len(), path.display());
    Ok(())
}
