//! Orbital stability experiment: perturb by delta, evolve, track (xi, theta).

use blacksol::evolution::{evolve, ConservedObserver, DistanceRecord, ModulationObserver, SimConfig};
use blacksol::functionals::ConservedSet;
use blacksol::modulation::{ModulationOptions, TrackedPoint};
use rayon::prelude::*;
use serde::Serialize;

use super::{all_passed, bundle_for, conserved_table, distance_table, initial_field, log_checks, modulation_table, open_run, Check};
use crate::config::ExperimentConfig;
use crate::error::CliError;

const GROUP: &str = "stability";

#[derive(Debug, Clone, Serialize)]
pub struct DeltaRun {
    pub delta: f64,
    /// sup_t d_R(modulated) / delta
    pub stability_factor: f64,
    /// sup_t d_R(phi(t), u0) / delta, without the symmetry correction.
    pub raw_factor: f64,
    /// sup_t (|xi'| + |theta'|) / delta
    pub rate_constant: f64,
    pub final_xi: f64,
    pub final_theta: f64,
    #[serde(skip)]
    pub points: Vec<TrackedPoint>,
    #[serde(skip)]
    pub distances: Vec<DistanceRecord>,
    #[serde(skip)]
    pub conserved: Vec<(f64, ConservedSet)>,
}

#[derive(Debug, Serialize)]
pub struct StabilitySummary {
    pub t_final: f64,
    pub runs: Vec<DeltaRun>,
    /// factor at the smallest delta over factor at the largest.
    pub ladder_ratio: f64,
    pub checks: Vec<Check>,
}

impl StabilitySummary {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

fn sup(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn run_delta(config: &ExperimentConfig, delta: f64) -> Result<DeltaRun, CliError> {
    let bundle = bundle_for(config)?;
    let phi0 = initial_field(&config.perturbation, delta, &bundle, config.radius)?;
    let sim = SimConfig {
        t_final: config.stability.t_final,
        cadence: config.stability.cadence,
        ..config.sim.clone()
    };
    let opts = ModulationOptions {
        radius: config.radius,
        ..Default::default()
    };
    let mut modulation = ModulationObserver::new(&bundle, opts);
    let mut conserved = ConservedObserver::default();
    evolve(&phi0, &sim, &mut [&mut modulation, &mut conserved]).map_err(|e| CliError::numerical("evolution", e))?;
    let points = modulation.points;
    let distances = modulation.distances;
    let last = points[points.len() - 1];
    Ok(DeltaRun {
        delta,
        stability_factor: sup(distances.iter().map(|d| d.modulated)) / delta,
        raw_factor: sup(distances.iter().map(|d| d.raw)) / delta,
        rate_constant: sup(points.iter().map(|p| p.xi_dot.abs() + p.theta_dot.abs())) / delta,
        final_xi: last.xi,
        final_theta: last.theta,
        points,
        distances,
        conserved: conserved.records,
    })
}

pub fn evaluate(config: &ExperimentConfig) -> Result<StabilitySummary, CliError> {
    config.validate()?;
    let runs: Vec<DeltaRun> = config
        .stability
        .deltas
        .par_iter()
        .map(|&d| run_delta(config, d))
        .collect::<Result<_, _>>()?;
    let tol = &config.tolerances;
    let mut checks: Vec<Check> = runs
        .iter()
        .flat_map(|r| {
            [
                Check::at_most(GROUP, &format!("stability_factor_delta{}", r.delta), r.stability_factor, tol.stability_factor),
                Check::at_least(GROUP, &format!("rate_constant_delta{}", r.delta), r.rate_constant, 0.0),
            ]
        })
        .collect();
    let by_delta = |pick: fn(f64, f64) -> bool| {
        runs.iter()
            .fold(None::<&DeltaRun>, |best, r| match best {
                Some(b) if !pick(r.delta, b.delta) => Some(b),
                _ => Some(r),
            })
            .expect("deltas validated non-empty")
    };
    let smallest = by_delta(|a, b| a < b);
    let largest = by_delta(|a, b| a > b);
    let ladder_ratio = smallest.stability_factor / largest.stability_factor;
    checks.push(Check::at_most(GROUP, "ladder_growth", ladder_ratio, tol.ladder_growth));
    Ok(StabilitySummary {
        t_final: config.stability.t_final,
        runs,
        ladder_ratio,
        checks,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<StabilitySummary, CliError> {
    config.validate()?;
    let mut run_dir = open_run(config)?;
    let summary = evaluate(config)?;
    log_checks(&summary.checks);
    for r in &summary.runs {
        let tag = format!("delta{}", r.delta);
        run_dir.write_table(&format!("modulation_{tag}.csv"), &modulation_table(&r.points))?;
        run_dir.write_table(&format!("distance_{tag}.csv"), &distance_table(&r.distances))?;
        run_dir.write_table(&format!("conserved_{tag}.csv"), &conserved_table(&r.conserved))?;
    }
    run_dir.write_json("stability_summary.json", &summary)?;
    run_dir.finish("stability", &config.name, config.seed(), summary.passed())?;
    Ok(summary)
}
