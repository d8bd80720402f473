//! Raw evolution with conserved-quantity, modulation and snapshot dumps.

use blacksol::evolution::{evolve, ConservedObserver, ModulationObserver, Observer, SnapshotObserver};
use blacksol::modulation::ModulationOptions;
use serde::Serialize;

use super::{bundle_for, conserved_table, distance_table, initial_field, modulation_table, open_run, snapshot_table};
use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub steps: usize,
    pub dt: f64,
    pub stamps: usize,
    pub snapshots: Vec<SnapshotEntry>,
    /// Largest relative change of Q, E, S, Lambda over the run.
    pub max_relative_drift: [f64; 4],
}

#[derive(Debug, Serialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
}

pub fn run(config: &ExperimentConfig) -> Result<SimulateSummary, CliError> {
    config.validate()?;
    let mut run_dir = open_run(config)?;
    let bundle = bundle_for(config)?;
    let p = &config.perturbation;
    let phi0 = initial_field(p, p.amplitude, &bundle, config.radius)?;
    let mut conserved = ConservedObserver::default();
    let mut snaps = SnapshotObserver::new(config.simulate.snapshot_every);
    let mut modulation = ModulationObserver::new(
        &bundle,
        ModulationOptions {
            radius: config.radius,
            ..Default::default()
        },
    );
    let traj = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut conserved, &mut snaps];
        if config.simulate.track {
            observers.push(&mut modulation);
        }
        evolve(&phi0, &config.sim, &mut observers).map_err(|e| CliError::numerical("evolution", e))?
    };
    run_dir.write_table("conserved.csv", &conserved_table(&conserved.records))?;
    if config.simulate.track {
        run_dir.write_table("modulation.csv", &modulation_table(&modulation.points))?;
        run_dir.write_table("distance.csv", &distance_table(&modulation.distances))?;
    }
    let mut entries = Vec::new();
    for (k, (t, field)) in snaps.snapshots.iter().enumerate() {
        let file = format!("snapshots/snapshot_{k:04}.csv");
        run_dir.write_table(&file, &snapshot_table(field))?;
        entries.push(SnapshotEntry { t: *t, file });
    }
    let first = conserved.records[0].1;
    let mut drift = [0.0f64; 4];
    for (_, c) in &conserved.records {
        for (k, (a, b)) in [(c.q, first.q), (c.e, first.e), (c.s, first.s), (c.lambda, first.lambda)]
            .into_iter()
            .enumerate()
        {
            drift[k] = drift[k].max((a - b).abs() / b.abs());
        }
    }
    let summary = SimulateSummary {
        steps: traj.steps,
        dt: config.sim.time_step(bundle.grid()),
        stamps: traj.stamps.len(),
        snapshots: entries,
        max_relative_drift: drift,
    };
    run_dir.write_json("simulate_summary.json", &summary)?;
    run_dir.finish("simulate", &config.name, config.seed(), true)?;
    Ok(summary)
}
