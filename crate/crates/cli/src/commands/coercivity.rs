//! Coercivity ensemble: gap / d_R^2 over seeded perturbations at log-uniform
//! distances.

use blacksol::expansion::{coercivity_probe, ProbeRecord};
use blacksol::profiles::SolitonBundle;
use blacksol::sampling::{phase_ramp, random_bumps, rng_for, scale_to_distance};
use blacksol::ComplexField;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{all_passed, bundle_for, log_checks, open_run, stream_seed, Check};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Table;

const GROUP: &str = "coercivity";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bumps,
    PhaseRamp,
    /// Translation direction u0' plus a small bump part, no projection.
    Translation,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sample {
    pub sample_id: usize,
    pub seed: u64,
    pub family: Family,
    pub target: f64,
    #[serde(flatten)]
    pub probe: ProbeRecord,
}

/// Ratio range over one distance decade.
#[derive(Debug, Clone, Serialize)]
pub struct DecadeBand {
    pub lower_distance: f64,
    pub count: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub samples: usize,
    /// Fitted sandwich [c, C]: extreme ratios of the ensemble.
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub min_abs_ratio: f64,
    pub bands: Vec<DecadeBand>,
}

#[derive(Debug, Serialize)]
pub struct CoercivitySummary {
    pub seed: u64,
    pub radius: f64,
    pub enforced: EnsembleStats,
    pub control: Option<EnsembleStats>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub samples: Vec<Sample>,
    #[serde(skip)]
    pub control_samples: Vec<Sample>,
}

impl CoercivitySummary {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }
}

fn draw_sample(config: &ExperimentConfig, bundle: &SolitonBundle, index: usize, orthogonal: bool) -> Result<Sample, CliError> {
    let c = &config.coercivity;
    let seed = stream_seed(config.seed(), 10, index as u64);
    let mut rng = rng_for(seed);
    let target = (c.min_distance.ln() + rng.gen::<f64>() * (c.max_distance.ln() - c.min_distance.ln())).exp();
    let ramp = rng.gen::<f64>() < c.ramp_fraction;
    let scale = rng.gen_range(c.ramp_scales[0]..=c.ramp_scales[1]);
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let grid = bundle.grid();
    let u = random_bumps(grid, &config.perturbation.bumps, &mut rng);
    let v = random_bumps(grid, &config.perturbation.bumps, &mut rng);
    let (family, field): (Family, Box<dyn Fn(f64) -> ComplexField + Sync>) = if !orthogonal {
        let d1n = bundle.d1.norm();
        let ud = &bundle.d1 + &u.scale(c.control_mix * d1n / u.norm());
        let vd = v.scale(c.control_mix * d1n / v.norm());
        let u0 = bundle.u0.clone();
        (
            Family::Translation,
            Box::new(move |a| ComplexField::from_parts(&(&u0 + &ud.scale(a)), &vd.scale(a))),
        )
    } else if ramp {
        let b = bundle.clone();
        (Family::PhaseRamp, Box::new(move |a| phase_ramp(&b, sign * a, scale)))
    } else {
        let ud = u.project_out(&bundle.d1);
        let vd = v.project_out(&bundle.d2);
        let u0 = bundle.u0.clone();
        (
            Family::Bumps,
            Box::new(move |a| ComplexField::from_parts(&(&u0 + &ud.scale(a)), &vd.scale(a))),
        )
    };
    let alpha = scale_to_distance(&field, bundle, target, config.radius)
        .map_err(|e| CliError::numerical("distance scaling", e))?;
    let probe = coercivity_probe(&field(alpha), config.radius, bundle).map_err(|e| CliError::numerical("probe", e))?;
    Ok(Sample {
        sample_id: index,
        seed,
        family,
        target,
        probe,
    })
}

pub fn ensemble(config: &ExperimentConfig, bundle: &SolitonBundle, orthogonal: bool) -> Result<Vec<Sample>, CliError> {
    (0..config.coercivity.samples)
        .into_par_iter()
        .map(|i| draw_sample(config, bundle, i, orthogonal))
        .collect()
}

pub fn stats(samples: &[Sample], config: &ExperimentConfig) -> EnsembleStats {
    let ratios: Vec<f64> = samples.iter().map(|s| s.probe.ratio.unwrap_or(f64::NAN)).collect();
    let fold = |init: f64, f: fn(f64, f64) -> f64| {
        ratios
            .iter()
            .fold(init, |m, &r| if r.is_nan() || m.is_nan() { f64::NAN } else { f(m, r) })
    };
    let mut bands = Vec::new();
    let mut lower = config.coercivity.min_distance;
    while lower < config.coercivity.max_distance {
        let upper = lower * 10.0;
        let inside: Vec<f64> = samples
            .iter()
            .filter(|s| s.probe.dr >= lower && s.probe.dr < upper)
            .map(|s| s.probe.ratio.unwrap_or(f64::NAN))
            .collect();
        if !inside.is_empty() {
            bands.push(DecadeBand {
                lower_distance: lower,
                count: inside.len(),
                min_ratio: inside.iter().copied().fold(f64::INFINITY, f64::min),
                max_ratio: inside.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
        lower = upper;
    }
    EnsembleStats {
        samples: samples.len(),
        c: fold(f64::INFINITY, f64::min),
        big_c: fold(f64::NEG_INFINITY, f64::max),
        min_abs_ratio: ratios.iter().fold(f64::INFINITY, |m, r| m.min(r.abs())),
        bands,
    }
}

fn probe_table(samples: &[Sample]) -> Table {
    let mut t = Table::new("probes", &["sample_id", "seed", "dR", "rho", "gap", "ratio"]);
    for s in samples {
        t.push(vec![
            s.sample_id.into(),
            s.seed.into(),
            s.probe.dr.into(),
            s.probe.rho.into(),
            s.probe.gap.into(),
            s.probe.ratio.into(),
        ]);
    }
    t
}

/// Computes the ensemble (and the control when orthogonality is disabled)
/// without writing files.
pub fn evaluate(config: &ExperimentConfig) -> Result<CoercivitySummary, CliError> {
    config.validate()?;
    let bundle = bundle_for(config)?;
    let samples = ensemble(config, &bundle, true)?;
    let enforced = stats(&samples, config);
    let mut checks = vec![Check::positive(GROUP, "min_ratio", enforced.c)];
    let (control, control_samples) = if config.coercivity.orthogonality {
        (None, Vec::new())
    } else {
        let cs = ensemble(config, &bundle, false)?;
        let st = stats(&cs, config);
        checks.push(Check::at_most(
            GROUP,
            "control_collapse",
            st.min_abs_ratio,
            config.tolerances.collapse_share * enforced.c,
        ));
        (Some(st), cs)
    };
    Ok(CoercivitySummary {
        seed: config.seed(),
        radius: config.radius,
        enforced,
        control,
        checks,
        samples,
        control_samples,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<CoercivitySummary, CliError> {
    config.validate()?;
    let mut run_dir = open_run(config)?;
    let summary = evaluate(config)?;
    log_checks(&summary.checks);
    run_dir.write_table("probes.csv", &probe_table(&summary.samples))?;
    if !summary.control_samples.is_empty() {
        run_dir.write_table("probes_control.csv", &probe_table(&summary.control_samples))?;
    }
    run_dir.write_json("coercivity_summary.json", &summary)?;
    run_dir.finish("coercivity", &config.name, config.seed(), summary.passed())?;
    Ok(summary)
}
