//! Subcommand implementations. Each writes into the configured output
//! directory and returns a report whose `passed()` decides the exit code.

pub mod coercivity;
pub mod simulate;
pub mod spectrum;
pub mod stability;
pub mod verify;

use blacksol::profiles::{black_soliton, dark_soliton, SolitonBundle};
use blacksol::sampling::{phase_ramp, random_bumps, rng_for, sample_seed, scale_to_distance};
use blacksol::{ComplexField, RealField};
use serde::Serialize;

use crate::config::{ExperimentConfig, PerturbationKind, PerturbationSpec};
use crate::error::CliError;
use crate::output::{Cell, RunDir, Table, RESOLVED_CONFIG};

/// One named pass/fail verdict with the measured value and its bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(group: &str, name: &str, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = value.is_finite() && lower.is_none_or(|l| value >= l) && upper.is_none_or(|u| value <= u);
        Check {
            group: group.into(),
            name: name.into(),
            value,
            lower,
            upper,
            passed,
        }
    }

    pub fn at_most(group: &str, name: &str, value: f64, upper: f64) -> Self {
        Self::within(group, name, value, None, Some(upper))
    }

    pub fn at_least(group: &str, name: &str, value: f64, lower: f64) -> Self {
        Self::within(group, name, value, Some(lower), None)
    }

    /// Strictly positive.
    pub fn positive(group: &str, name: &str, value: f64) -> Self {
        let mut c = Self::at_least(group, name, value, 0.0);
        c.passed &= value > 0.0;
        c
    }

    pub fn failed(group: &str, name: &str) -> Self {
        Check {
            group: group.into(),
            name: name.into(),
            value: f64::NAN,
            lower: None,
            upper: None,
            passed: false,
        }
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.passed)
}

pub fn log_checks(checks: &[Check]) {
    for c in checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        log::info!("{verdict} {}/{}: {:.3e}", c.group, c.name, c.value);
    }
}

pub(crate) fn open_run(config: &ExperimentConfig) -> Result<RunDir, CliError> {
    let mut run = RunDir::create(&config.output_dir)?;
    run.write_text(RESOLVED_CONFIG, &config.to_toml()?)?;
    Ok(run)
}

pub(crate) fn bundle_for(config: &ExperimentConfig) -> Result<SolitonBundle, CliError> {
    Ok(black_soliton(&config.build_grid()?))
}

/// Seed stream for one named purpose, so ensembles do not share draws.
pub(crate) fn stream_seed(base: u64, stream: u64, index: u64) -> u64 {
    sample_seed(sample_seed(base, stream), index)
}

/// Unscaled seeded bump pair (u, v).
pub(crate) fn bump_pair(spec: &PerturbationSpec, bundle: &SolitonBundle, seed: u64) -> (RealField, RealField) {
    let mut rng = rng_for(seed);
    let u = random_bumps(bundle.grid(), &spec.bumps, &mut rng);
    let v = random_bumps(bundle.grid(), &spec.bumps, &mut rng);
    (u, v)
}

/// Initial field of the given kind with d_R(phi0, u0) = amplitude (bumps,
/// ramps) or speed = amplitude (dark).
pub(crate) fn initial_field(
    spec: &PerturbationSpec,
    amplitude: f64,
    bundle: &SolitonBundle,
    radius: f64,
) -> Result<ComplexField, CliError> {
    match spec.kind {
        PerturbationKind::None => Ok(bundle.to_complex()),
        PerturbationKind::Bumps => {
            let (u, v) = bump_pair(spec, bundle, spec.seed);
            let family = |a: f64| ComplexField::from_parts(&(&bundle.u0 + &u.scale(a)), &v.scale(a));
            let a = scale_to_distance(family, bundle, amplitude, radius)
                .map_err(|e| CliError::numerical("perturbation scaling", e))?;
            Ok(family(a))
        }
        PerturbationKind::PhaseRamp => {
            let family = |a: f64| phase_ramp(bundle, a, spec.ramp_scale);
            let a = scale_to_distance(family, bundle, amplitude, radius)
                .map_err(|e| CliError::numerical("perturbation scaling", e))?;
            Ok(family(a))
        }
        PerturbationKind::Dark => {
            dark_soliton(bundle.grid(), amplitude).map_err(|e| CliError::numerical("dark soliton", e))
        }
    }
}

pub(crate) fn modulation_table(points: &[blacksol::modulation::TrackedPoint]) -> Table {
    let mut t = Table::new("modulation", &["t", "xi", "theta", "xidot", "thetadot", "dR_modulated"]);
    for p in points {
        t.push(vec![
            p.t.into(),
            p.xi.into(),
            p.theta.into(),
            p.xi_dot.into(),
            p.theta_dot.into(),
            p.distance.into(),
        ]);
    }
    t
}

pub(crate) fn distance_table(records: &[blacksol::evolution::DistanceRecord]) -> Table {
    let mut t = Table::new("distance", &["t", "dR_modulated", "dR_raw"]);
    for r in records {
        t.push(vec![r.t.into(), r.modulated.into(), r.raw.into()]);
    }
    t
}

pub(crate) fn conserved_table(records: &[(f64, blacksol::functionals::ConservedSet)]) -> Table {
    let mut t = Table::new("conserved", &["t", "Q", "M_unrenormalized", "E", "S", "Lambda"]);
    for (time, c) in records {
        let mut row: Vec<Cell> = vec![(*time).into()];
        row.extend(c.as_array().iter().map(|&v| Cell::from(v)));
        t.push(row);
    }
    t
}

pub(crate) fn snapshot_table(field: &ComplexField) -> Table {
    let mut t = Table::new("snapshot", &["x", "re", "im"]);
    for (x, z) in field.grid().nodes().iter().zip(field.values()) {
        t.push(vec![(*x).into(), z.re.into(), z.im.into()]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_bounds() {
        assert!(Check::at_most("g", "a", 1.0, 1.0).passed);
        assert!(!Check::at_most("g", "a", f64::NAN, 1.0).passed);
        assert!(!Check::positive("g", "a", 0.0).passed);
        assert!(Check::within("g", "a", 0.5, Some(0.0), Some(1.0)).passed);
        assert!(!Check::within("g", "a", 1.5, Some(0.0), Some(1.0)).passed);
        assert!(!all_passed(&[Check::failed("g", "x")]));
    }

    #[test]
    fn initial_fields_hit_their_distance() {
        let config = ExperimentConfig {
            grid: crate::config::GridSettings {
                half_width: 40.0,
                points: 1601,
            },
            ..Default::default()
        };
        let b = bundle_for(&config).unwrap();
        let reference = b.to_complex();
        for kind in [PerturbationKind::Bumps, PerturbationKind::PhaseRamp] {
            let spec = PerturbationSpec {
                kind,
                ..Default::default()
            };
            let f = initial_field(&spec, 0.02, &b, 10.0).unwrap();
            let d = blacksol::functionals::distance_dr(&f, &reference, 10.0).unwrap();
            assert!((d / 0.02 - 1.0).abs() < 1e-9, "{kind:?}: {d}");
        }
        let none = PerturbationSpec {
            kind: PerturbationKind::None,
            ..Default::default()
        };
        assert_eq!(initial_field(&none, 0.02, &b, 10.0).unwrap().values(), reference.values());
    }
}
