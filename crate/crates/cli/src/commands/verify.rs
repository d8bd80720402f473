//! Identity and property suite over seeded ensembles.

use std::f64::consts::SQRT_2;

use blacksol::evolution::{evolve, ConservedObserver, ModulationObserver, SimConfig, SnapshotObserver};
use blacksol::expansion::{bident_residual, lambda_expansion_rhs, lambda_gap, BDensities};
use blacksol::functionals::{conserved, lambda, PerturbationTriple};
use blacksol::modulation::{f_jacobian, solve_modulation, ModulationOptions};
use blacksol::operators::{
    coercivity_estimate, duhamel_inner, kernel_k1, kminus_factorized, kplus_factorized, qform, CoercivityNorm,
    Coefficients, OperatorKind,
};
use blacksol::profiles::{black_soliton, black_soliton_derivs, dark_soliton, SolitonBundle};
use blacksol::{Complex64, ComplexField, Grid, RealField};
use rayon::prelude::*;
use serde::Serialize;

use super::{all_passed, bump_pair, bundle_for, initial_field, log_checks, open_run, stream_seed, Check};
use crate::config::{ExperimentConfig, PerturbationKind, PerturbationSpec};
use crate::error::CliError;

pub const GROUPS: [&str; 9] = [
    "profile",
    "conserved",
    "criticality",
    "factorization",
    "nonnegativity",
    "duhamel",
    "expansion",
    "modulation",
    "dynamics",
];

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}/{}", c.group, c.name))
            .collect()
    }

    pub fn group(&self, group: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.group == group).collect()
    }
}

struct Ctx<'a> {
    config: &'a ExperimentConfig,
    bundle: SolitonBundle,
}

impl Ctx<'_> {
    fn samples(&self, stream: u64) -> Vec<(RealField, RealField)> {
        (0..self.config.verify.samples as u64)
            .into_par_iter()
            .map(|i| bump_pair(&self.config.perturbation, &self.bundle, stream_seed(self.config.seed(), stream, i)))
            .collect()
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    // NaN propagates so that a broken sample cannot hide
    values.fold(0.0, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

fn min_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(f64::INFINITY, |m: f64, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.min(v) })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn profile(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let tol = ctx.config.tolerances.profile_residual;
    Ok(vec![
        Check::at_most("profile", "first_order_residual", ctx.bundle.first_order_residual(), tol),
        Check::at_most("profile", "second_order_residual", ctx.bundle.second_order_residual(), tol),
    ])
}

fn conserved_values(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let tol = ctx.config.tolerances.conserved_rel;
    let c = conserved(&ctx.bundle.to_complex());
    let g = "conserved";
    Ok(vec![
        Check::at_most(g, "Q", rel(c.q, -2.0 * SQRT_2), tol),
        Check::at_most(g, "E", rel(c.e, 4.0 * SQRT_2 / 3.0), tol),
        Check::at_most(g, "S", rel(c.s, 12.0 * SQRT_2 / 5.0), tol),
        Check::at_most(g, "Lambda", rel(c.lambda, -4.0 * SQRT_2 / 15.0), tol),
        Check::at_most(g, "M", c.m_unrenormalized.abs(), tol),
    ])
}

/// Central differences of Lambda at u0 along seeded complex directions,
/// relative to the H^2 norm of the direction.
fn criticality(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let eps = ctx.config.verify.fd_step;
    let b = &ctx.bundle;
    let worst = (0..ctx.config.verify.directions as u64)
        .into_par_iter()
        .map(|i| {
            let (a, c) = bump_pair(&ctx.config.perturbation, b, stream_seed(ctx.config.seed(), 1, i));
            let at = |s: f64| lambda(&ComplexField::from_parts(&(&b.u0 + &a.scale(s)), &c.scale(s)));
            let d = (at(eps) - at(-eps)) / (2.0 * eps);
            d.abs() / (a.h2_norm_sq() + c.h2_norm_sq()).sqrt()
        })
        .collect::<Vec<_>>();
    Ok(vec![Check::at_most(
        "criticality",
        "lambda_directional_derivative",
        max_of(worst.into_iter()),
        ctx.config.tolerances.criticality,
    )])
}

fn factorization(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let kplus = Coefficients::new(OperatorKind::Kplus, b).with_potential_offset(ctx.config.hooks.kplus_potential_offset);
    let kminus = Coefficients::new(OperatorKind::Kminus, b);
    let errs: Vec<(f64, f64)> = ctx
        .samples(2)
        .par_iter()
        .map(|(u, v)| {
            let p = kplus_factorized(u, b);
            let m = kminus_factorized(v, b);
            (rel(kplus.qform(u), p), rel(kminus.qform(v), m))
        })
        .collect();
    let tol = ctx.config.tolerances.factorization_rel;
    Ok(vec![
        Check::at_most("factorization", "kplus_factorization", max_of(errs.iter().map(|e| e.0)), tol),
        Check::at_most("factorization", "kminus_factorization", max_of(errs.iter().map(|e| e.1)), tol),
    ])
}

fn nonnegativity(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let forms: Vec<(f64, f64)> = ctx
        .samples(3)
        .par_iter()
        .map(|(u, v)| -> Result<(f64, f64), CliError> {
            let p = qform(OperatorKind::Kplus, u, b).map_err(|e| CliError::numerical("qform", e))?;
            let m = qform(OperatorKind::Kminus, v, b).map_err(|e| CliError::numerical("qform", e))?;
            Ok((p, m))
        })
        .collect::<Result<_, _>>()?;
    let floor = ctx.config.tolerances.qform_floor;
    let mut checks = vec![
        Check::at_least("nonnegativity", "kplus_qform_min", min_of(forms.iter().map(|f| f.0)), floor),
        Check::at_least("nonnegativity", "kminus_qform_min", min_of(forms.iter().map(|f| f.1)), floor),
    ];
    let spec = super::spectrum::compute(b, 3)?;
    checks.extend(super::spectrum::checks(&spec, &ctx.config.tolerances, "nonnegativity"));
    Ok(checks)
}

fn duhamel(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let tol = &ctx.config.tolerances;
    let g = "duhamel";
    let ratio = max_of(
        ctx.samples(4)
            .par_iter()
            .map(|(w, _)| duhamel_inner(w, b).abs() / w.norm())
            .collect::<Vec<_>>()
            .into_iter(),
    );
    let mut checks = vec![
        Check::at_most(g, "duhamel_inner_bound", ratio, 2f64.powf(-0.25)),
        Check::at_most(g, "k1", (kernel_k1(b.grid()) - SQRT_2).abs(), tol.k1),
    ];
    let v = &ctx.config.verify;
    let estimates: Vec<(f64, f64)> = v
        .estimate_points
        .par_iter()
        .map(|&n| -> Result<(f64, f64), CliError> {
            let grid = Grid::new(v.estimate_half_width, n).map_err(|e| CliError::Config(e.to_string()))?;
            let eb = black_soliton(&grid);
            let est = |kind, c: &RealField, norm| {
                coercivity_estimate(kind, Some(c), norm, &eb).map_err(|e| CliError::numerical("rayleigh minimum", e))
            };
            Ok((
                est(OperatorKind::Kplus, &eb.d1, CoercivityNorm::H2)?,
                est(OperatorKind::Kminus, &eb.d2, CoercivityNorm::WeakKminus)?,
            ))
        })
        .collect::<Result<_, _>>()?;
    let (coarse, fine) = (estimates[0], estimates[1]);
    checks.push(Check::positive(g, "c_plus", coarse.0.min(fine.0)));
    checks.push(Check::positive(g, "c_minus", coarse.1.min(fine.1)));
    checks.push(Check::at_most(g, "c_plus_resolution", rel(coarse.0, fine.0), tol.estimate_resolution_rel));
    checks.push(Check::at_most(g, "c_minus_resolution", rel(coarse.1, fine.1), tol.estimate_resolution_rel));
    Ok(checks)
}

fn expansion(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let tol = &ctx.config.tolerances;
    let g = "expansion";
    let errs: Vec<(f64, f64, f64)> = ctx
        .samples(5)
        .par_iter()
        .map(|(u, v)| -> Result<(f64, f64, f64), CliError> {
            let pert = PerturbationTriple::new(u.clone(), v.clone(), b);
            let gap = lambda_gap(&pert.to_field(b), b);
            let rhs = lambda_expansion_rhs(u, v, b);
            let d = BDensities::new(&pert, b);
            let kp = qform(OperatorKind::Kplus, u, b).map_err(|e| CliError::numerical("qform", e))?;
            let km = qform(OperatorKind::Kminus, v, b).map_err(|e| CliError::numerical("qform", e))?;
            Ok((
                (gap - rhs).abs() / (1.0 + gap.abs()),
                rel(d.b0.integral(), kp),
                rel(d.b2.integral(), km),
            ))
        })
        .collect::<Result<_, _>>()?;
    let grid = b.grid();
    let u = RealField::from_fn(grid, |x| (1.0 + 0.5 * x) * (-x * x).exp());
    let v = RealField::from_fn(grid, |x| 0.5 * x * (-x * x / 2.0).exp() + 0.3 * (-(x - 0.5f64).powi(2)).exp());
    let r = |a: f64| -> Result<f64, CliError> {
        Ok(bident_residual(&u.scale(a), &v.scale(a), ctx.config.radius, b)
            .map_err(|e| CliError::numerical("bident residual", e))?
            .abs())
    };
    let [a0, a1] = ctx.config.verify.slope_amplitudes;
    let slope = (r(a1)?.ln() - r(a0)?.ln()) / (a1.ln() - a0.ln());
    Ok(vec![
        Check::at_most(g, "lambda_expansion", max_of(errs.iter().map(|e| e.0)), tol.expansion_abs),
        Check::within(g, "bident_slope", slope, Some(3.0 - tol.slope), Some(3.0 + tol.slope)),
        Check::at_most(g, "b0_density_integral", max_of(errs.iter().map(|e| e.1)), tol.b_density_rel),
        Check::at_most(g, "b2_density_integral", max_of(errs.iter().map(|e| e.2)), tol.b_density_rel),
    ])
}

fn orbit_point(grid: &std::sync::Arc<Grid>, xi: f64, theta: f64) -> ComplexField {
    let rot = Complex64::from_polar(1.0, -theta);
    ComplexField::from_fn(grid, |x| rot * black_soliton_derivs(x - xi)[0])
}

/// Sup-norm relative error of the rate formula against centred differences
/// of the tracked parameters, per component.
pub fn rate_errors(points: &[blacksol::modulation::TrackedPoint]) -> (f64, f64) {
    let n = points.len();
    let mut num = [0.0f64; 2];
    let mut den = [0.0f64; 2];
    for k in 1..n.saturating_sub(1) {
        let dt = points[k + 1].t - points[k - 1].t;
        let fd = [
            (points[k + 1].xi - points[k - 1].xi) / dt,
            (points[k + 1].theta - points[k - 1].theta) / dt,
        ];
        let formula = [points[k].xi_dot, points[k].theta_dot];
        for c in 0..2 {
            num[c] = num[c].max((formula[c] - fd[c]).abs());
            den[c] = den[c].max(fd[c].abs());
        }
    }
    (num[0] / den[0], num[1] / den[1])
}

fn modulation(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let grid = b.grid();
    let tol = &ctx.config.tolerances;
    let g = "modulation";
    let opts = ModulationOptions {
        radius: ctx.config.radius,
        ..Default::default()
    };
    // cold starts from (0, 0); points far out in xi or theta belong to other roots of f
    let orbit = [(0.0, 0.0), (1.5, 0.2), (-0.8, -0.35), (0.6, 0.45), (-1.2, 0.3), (1.0, -0.5)];
    let mut recovery: f64 = 0.0;
    for (xi, theta) in orbit {
        let s = solve_modulation(&orbit_point(grid, xi, theta), (0.0, 0.0), b, &opts)
            .map_err(|e| CliError::numerical("modulation", e))?;
        recovery = recovery.max((s.xi - xi).abs()).max((s.theta - theta).abs());
    }
    let j = f_jacobian(&b.to_complex(), 0.0, 0.0).map_err(|e| CliError::numerical("modulation", e))?;
    let n = 2.0 * SQRT_2 / 3.0;
    let jac = (j[0][0] - n).abs().max(j[1][1] + n).max(j[0][1].abs()).max(j[1][0].abs());

    let spec = PerturbationSpec {
        kind: PerturbationKind::Bumps,
        seed: stream_seed(ctx.config.seed(), 6, 0),
        ..ctx.config.perturbation.clone()
    };
    let phi0 = initial_field(&spec, ctx.config.verify.rate_amplitude, b, ctx.config.radius)?;
    let sim = SimConfig {
        t_final: ctx.config.verify.rate_horizon,
        cadence: 1,
        ..ctx.config.sim.clone()
    };
    let mut obs = ModulationObserver::new(b, opts);
    evolve(&phi0, &sim, &mut [&mut obs]).map_err(|e| CliError::numerical("evolution", e))?;
    let (exi, eth) = rate_errors(&obs.points);
    Ok(vec![
        Check::at_most(g, "symmetry_recovery", recovery, tol.symmetry_recovery),
        Check::at_most(g, "jacobian_at_soliton", jac, tol.jacobian),
        Check::at_most(g, "xi_rate_vs_fd", exi, tol.rate_rel),
        Check::at_most(g, "theta_rate_vs_fd", eth, tol.rate_rel),
    ])
}

enum DynamicsRun {
    Stationary(f64, f64),
    Reversal(f64),
    Dark(f64),
}

fn dynamics(ctx: &Ctx) -> Result<Vec<Check>, CliError> {
    let b = &ctx.bundle;
    let tol = &ctx.config.tolerances;
    let g = "dynamics";
    let horizon = ctx.config.verify.dynamics_horizon;
    let sim = SimConfig {
        t_final: horizon,
        ..ctx.config.sim.clone()
    };
    let fail = |e| CliError::numerical("evolution", e);
    let runs: Vec<DynamicsRun> = (0..3)
        .into_par_iter()
        .map(|which| -> Result<DynamicsRun, CliError> {
            match which {
                0 => {
                    let u0 = b.to_complex();
                    let mut cons = ConservedObserver::default();
                    let mut snaps = SnapshotObserver::new(1);
                    evolve(&u0, &sim, &mut [&mut cons, &mut snaps]).map_err(fail)?;
                    let drift = max_of(snaps.snapshots.iter().map(|(_, f)| (f - &u0).max_abs()));
                    let c0 = cons.records[0].1.as_array();
                    let budget = max_of(cons.records.iter().flat_map(|(_, c)| {
                        c.as_array()
                            .into_iter()
                            .zip(c0)
                            .enumerate()
                            // the renormalized momentum vanishes; its drift is absolute
                            .map(|(k, (x, y))| if k == 1 { (x - y).abs() } else { rel(x, y) })
                            .collect::<Vec<_>>()
                    }));
                    Ok(DynamicsRun::Stationary(drift, budget))
                }
                1 => {
                    let spec = PerturbationSpec {
                        kind: PerturbationKind::Bumps,
                        seed: stream_seed(ctx.config.seed(), 7, 0),
                        ..ctx.config.perturbation.clone()
                    };
                    let phi0 = initial_field(&spec, ctx.config.verify.rate_amplitude, b, ctx.config.radius)?;
                    let fwd = evolve(&phi0, &sim, &mut []).map_err(fail)?;
                    let back = SimConfig {
                        dt: Some(-sim.time_step(b.grid())),
                        ..sim.clone()
                    };
                    let rev = evolve(&fwd.final_field, &back, &mut []).map_err(fail)?;
                    Ok(DynamicsRun::Reversal((&rev.final_field - &phi0).max_abs()))
                }
                _ => {
                    let nu = ctx.config.verify.dark_speed;
                    let psi = dark_soliton(b.grid(), nu).map_err(|e| CliError::numerical("dark soliton", e))?;
                    let mut obs = ModulationObserver::new(
                        b,
                        ModulationOptions {
                            radius: ctx.config.radius,
                            ..Default::default()
                        },
                    );
                    evolve(&psi, &sim, &mut [&mut obs]).map_err(fail)?;
                    let (first, last) = (obs.points[0], obs.points[obs.points.len() - 1]);
                    let speed = ((last.xi - first.xi) / (last.t - first.t)).abs();
                    Ok(DynamicsRun::Dark(rel(speed, nu)))
                }
            }
        })
        .collect::<Result<_, _>>()?;
    let mut checks = Vec::new();
    for r in runs {
        match r {
            DynamicsRun::Stationary(drift, budget) => {
                checks.push(Check::at_most(g, "stationary_drift", drift, tol.stationary_drift));
                checks.push(Check::at_most(g, "conserved_drift", budget, tol.conserved_drift_rel));
            }
            DynamicsRun::Reversal(e) => checks.push(Check::at_most(g, "time_reversal", e, tol.reversal)),
            DynamicsRun::Dark(e) => checks.push(Check::at_most(g, "dark_speed", e, tol.dark_speed_rel)),
        }
    }
    Ok(checks)
}

fn run_group(ctx: &Ctx, group: &str) -> Vec<Check> {
    let result = match group {
        "profile" => profile(ctx),
        "conserved" => conserved_values(ctx),
        "criticality" => criticality(ctx),
        "factorization" => factorization(ctx),
        "nonnegativity" => nonnegativity(ctx),
        "duhamel" => duhamel(ctx),
        "expansion" => expansion(ctx),
        "modulation" => modulation(ctx),
        "dynamics" => dynamics(ctx),
        other => unreachable!("group {other} passed validation"),
    };
    result.unwrap_or_else(|e| {
        log::error!("check group {group}: {e}");
        vec![Check::failed(group, "completed")]
    })
}

/// Runs the selected groups without writing anything.
pub fn evaluate(config: &ExperimentConfig) -> Result<VerifyReport, CliError> {
    config.validate()?;
    let ctx = Ctx {
        config,
        bundle: bundle_for(config)?,
    };
    let groups: Vec<&str> = if config.verify.groups.is_empty() {
        GROUPS.to_vec()
    } else {
        GROUPS.iter().copied().filter(|g| config.verify.groups.iter().any(|s| s == g)).collect()
    };
    let checks = groups.par_iter().flat_map_iter(|g| run_group(&ctx, g)).collect();
    Ok(VerifyReport {
        seed: config.seed(),
        checks,
    })
}

pub fn run(config: &ExperimentConfig) -> Result<VerifyReport, CliError> {
    config.validate()?;
    let mut run_dir = open_run(config)?;
    let report = evaluate(config)?;
    log_checks(&report.checks);
    run_dir.write_json("verify.json", &report)?;
    run_dir.finish("verify-lemmas", &config.name, config.seed(), report.passed())?;
    Ok(report)
}
