//! Figures for one experiment: per-scheme panels and cross-scheme overlays.

use std::path::Path;

use crate::bsca::RunRecord;
use crate::error::Result;
use crate::scenario::Scenario;

use super::svg::{Chart, Series};

fn nodes(scn: &Scenario) -> Vec<Series> {
    vec![
        Series::points("Alice", vec![(scn.q_a.x, scn.q_a.y)]).colored("#000000"),
        Series::points("Bob", vec![(scn.q_b.x, scn.q_b.y)]).colored("#8c8c8c"),
        Series::points("Eve", vec![(scn.q_e.x, scn.q_e.y)]).colored("#8c564b"),
    ]
}

fn path(rec: &RunRecord) -> Vec<(f64, f64)> {
    rec.trajectory.waypoints().iter().map(|q| (q.x, q.y)).collect()
}

fn speeds(scn: &Scenario, rec: &RunRecord) -> Vec<(f64, f64)> {
    rec.trajectory
        .speeds(scn.delta_t)
        .into_iter()
        .enumerate()
        .map(|(n, v)| (n as f64, v))
        .collect()
}

fn trace(rec: &RunRecord) -> Vec<(f64, f64)> {
    rec.east_trace.iter().enumerate().map(|(i, e)| (i as f64, *e)).collect()
}

fn map_chart(scn: &Scenario, title: &str, paths: Vec<Series>) -> Chart {
    let mut chart = Chart::new(title, "x (m)", "y (m)");
    chart.equal_aspect = true;
    chart.series = paths;
    chart.series.extend(nodes(scn));
    chart
}

fn save(chart: &Chart, path: &Path) -> Result<()> {
    std::fs::write(path, chart.render())?;
    Ok(())
}

/// `trajectory.svg`, `speed.svg`, `blocklengths.svg`, `east.svg` in `dir`.
pub fn scheme_plots(dir: &Path, scn: &Scenario, rec: &RunRecord) -> Result<()> {
    let name = rec.scheme.name();
    save(
        &map_chart(scn, &format!("{name} trajectory"), vec![Series::line(name, path(rec))]),
        &dir.join("trajectory.svg"),
    )?;
    save(
        &Chart::new(format!("{name} speed"), "slot n", "speed (m/s)").with(Series::steps(name, speeds(scn, rec))),
        &dir.join("speed.svg"),
    )?;
    let ul = rec.plan.uplink().iter().enumerate().map(|(n, l)| (n as f64, *l as f64)).collect();
    let dl = rec.plan.downlink().iter().enumerate().map(|(n, l)| (n as f64, *l as f64)).collect();
    save(
        &Chart::new(format!("{name} blocklengths"), "slot n", "channel uses")
            .with(Series::steps("l_u", ul))
            .with(Series::steps("l_d", dl)),
        &dir.join("blocklengths.svg"),
    )?;
    save(
        &Chart::new(format!("{name} EAST"), "iteration", "EAST (bps)").with(Series::line(name, trace(rec))),
        &dir.join("east.svg"),
    )
}

/// Overlays across schemes in the experiment root.
pub fn comparison_plots(dir: &Path, scn: &Scenario, runs: &[RunRecord]) -> Result<()> {
    let series = |f: &dyn Fn(&RunRecord) -> Vec<(f64, f64)>| -> Vec<Series> {
        runs.iter().map(|r| Series::line(r.scheme.name(), f(r))).collect()
    };
    let mut east = Chart::new("EAST versus iteration", "iteration", "EAST (bps)");
    east.series = series(&trace);
    save(&east, &dir.join("east_comparison.svg"))?;
    save(&map_chart(scn, "Trajectories", series(&path)), &dir.join("trajectory_comparison.svg"))?;
    let mut speed = Chart::new("Speed", "slot n", "speed (m/s)");
    speed.series = runs
        .iter()
        .map(|r| Series::steps(r.scheme.name(), speeds(scn, r)))
        .collect();
    save(&speed, &dir.join("speed_comparison.svg"))
}
