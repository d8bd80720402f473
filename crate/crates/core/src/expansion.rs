//! Exact expansion of Lambda around the black soliton, the quadratic densities
//! B0..B3, the cut-off chi_R and the coercivity probes built on them.
//!
//! ```text
//! B0(u)   = u_xx^2 + (5u0^2 - 2) u_x^2 - (1 - 3u0^2) u^2 - (1 - u0^2)(1 - 5u0^2) u^2
//! B1(u)   = u_xx^2 + (3u0^2 - 2) u_x^2 + (1 - u0^2) u^2 - 3 (1 - u0^2)(1 - 3u0^2) u^2
//! B2(v)   = v_xx^2 + (3u0^2 - 2) v_x^2 + (1 - u0^2) v^2
//! B3(eta) = eta_x^2 / 2 + (3u0^2 - 2) eta^2 / 2
//! ```

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::functionals::{distance_dr, eta_of, lambda, rho, FunctionalError, PerturbationTriple};
use crate::grid::{ComplexField, Grid, GridError, RealField};
use crate::profiles::SolitonBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("cut-off support 3R/2 = {support} exceeds the half width {half_width}")]
    CutoffOutsideDomain { support: f64, half_width: f64 },
    #[error("cut-off radius {0} must be positive")]
    BadRadius(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

fn smoothstep(t: f64) -> f64 {
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn smoothstep_dt(t: f64) -> f64 {
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

/// chi_R(x) = chi(x / R): 1 on |x| <= R/2, 0 on |x| >= 3R/2, quintic
/// smoothstep in between, so that chi(1) = 1/2.
#[derive(Debug, Clone)]
pub struct CutOff {
    pub radius: f64,
    pub values: RealField,
    /// Analytic derivative.
    pub derivative: RealField,
}

impl CutOff {
    pub fn new(grid: &Arc<Grid>, radius: f64) -> Result<Self, ExpansionError> {
        if !(radius > 0.0) {
            return Err(ExpansionError::BadRadius(radius));
        }
        let support = 1.5 * radius;
        if support > grid.half_width() {
            return Err(ExpansionError::CutoffOutsideDomain {
                support,
                half_width: grid.half_width(),
            });
        }
        grid.index_of(radius)?;
        let values = RealField::from_fn(grid, |x| Self::profile(x / radius));
        let derivative = RealField::from_fn(grid, |x| {
            let t = x.abs() / radius - 0.5;
            if t <= 0.0 || t >= 1.0 {
                0.0
            } else {
                -smoothstep_dt(t) * x.signum() / radius
            }
        });
        Ok(CutOff {
            radius,
            values,
            derivative,
        })
    }

    /// chi on the unit scale.
    pub fn profile(y: f64) -> f64 {
        let t = y.abs() - 0.5;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - smoothstep(t)
        }
    }
}

/// Sampled B0..B3 for one perturbation.
#[derive(Debug, Clone)]
pub struct BDensities {
    pub b0: RealField,
    pub b1: RealField,
    pub b2: RealField,
    pub b3: RealField,
}

fn pointwise(n: usize, grid: &Arc<Grid>, f: impl Fn(usize) -> f64) -> RealField {
    RealField::new(grid, (0..n).map(f).collect()).expect("grid length")
}

pub fn b0_density(u: &RealField, bundle: &SolitonBundle) -> RealField {
    let (ux, uxx) = (u.dx(), u.dxx());
    let z = bundle.u0.values();
    pointwise(z.len(), u.grid(), |j| {
        let s = z[j] * z[j];
        let w = u.values()[j];
        uxx.values()[j].powi(2) + (5.0 * s - 2.0) * ux.values()[j].powi(2)
            - (1.0 - 3.0 * s) * w * w
            - (1.0 - s) * (1.0 - 5.0 * s) * w * w
    })
}

pub fn b1_density(u: &RealField, bundle: &SolitonBundle) -> RealField {
    let (ux, uxx) = (u.dx(), u.dxx());
    let z = bundle.u0.values();
    pointwise(z.len(), u.grid(), |j| {
        let s = z[j] * z[j];
        let w = u.values()[j];
        uxx.values()[j].powi(2) + (3.0 * s - 2.0) * ux.values()[j].powi(2) + (1.0 - s) * w * w
            - 3.0 * (1.0 - s) * (1.0 - 3.0 * s) * w * w
    })
}

pub fn b2_density(v: &RealField, bundle: &SolitonBundle) -> RealField {
    let (vx, vxx) = (v.dx(), v.dxx());
    let z = bundle.u0.values();
    pointwise(z.len(), v.grid(), |j| {
        let s = z[j] * z[j];
        vxx.values()[j].powi(2) + (3.0 * s - 2.0) * vx.values()[j].powi(2) + (1.0 - s) * v.values()[j].powi(2)
    })
}

pub fn b3_density(eta: &RealField, bundle: &SolitonBundle) -> RealField {
    let ex = eta.dx();
    let z = bundle.u0.values();
    pointwise(z.len(), eta.grid(), |j| {
        0.5 * ex.values()[j].powi(2) + 0.5 * (3.0 * z[j] * z[j] - 2.0) * eta.values()[j].powi(2)
    })
}

impl BDensities {
    pub fn new(pert: &PerturbationTriple, bundle: &SolitonBundle) -> Self {
        BDensities {
            b0: b0_density(&pert.u, bundle),
            b1: b1_density(&pert.u, bundle),
            b2: b2_density(&pert.v, bundle),
            b3: b3_density(&pert.eta, bundle),
        }
    }
}

/// Lambda(psi) - Lambda(u0), both evaluated on the grid of psi.
pub fn lambda_gap(psi: &ComplexField, bundle: &SolitonBundle) -> f64 {
    lambda(psi) - lambda(&bundle.to_complex())
}

/// Integrand of the exact expansion of Lambda(u0 + u + i v) - Lambda(u0).
/// With `cubic = false` the last line (terms of order three and up in
/// (u, v, eta)) is dropped.
pub fn lambda_expansion_density(u: &RealField, v: &RealField, bundle: &SolitonBundle, cubic: bool) -> RealField {
    let eta = eta_of(u, v, &bundle.u0);
    let (ux, uxx, vx, vxx, ex) = (u.dx(), u.dxx(), v.dx(), v.dxx(), eta.dx());
    let (z, d1) = (bundle.u0.values(), bundle.d1.values());
    pointwise(z.len(), u.grid(), |j| {
        let s = z[j] * z[j];
        let (a, b, e) = (u.values()[j], v.values()[j], eta.values()[j]);
        let grad = ux.values()[j].powi(2) + vx.values()[j].powi(2);
        let quadratic = uxx.values()[j].powi(2) + vxx.values()[j].powi(2) + (3.0 * s - 2.0) * grad
            + (1.0 - s) * (a * a + b * b)
            - 3.0 * (1.0 - s) * (1.0 - 3.0 * s) * a * a
            + 0.5 * ex.values()[j].powi(2)
            + 0.5 * (3.0 * s - 2.0) * e * e;
        if cubic {
            quadratic + 0.5 * e * e * e + 3.0 * e * grad + 6.0 * d1[j] * (a * a + b * b) * ux.values()[j]
        } else {
            quadratic
        }
    })
}

pub fn lambda_expansion_rhs(u: &RealField, v: &RealField, bundle: &SolitonBundle) -> f64 {
    lambda_expansion_density(u, v, bundle, true).integral()
}

/// int(B1(u) + B2(v) + B3(eta)) with eta taken as given.
pub fn q_total(u: &RealField, v: &RealField, eta: &RealField, bundle: &SolitonBundle) -> f64 {
    let (b1, b2, b3) = (b1_density(u, bundle), b2_density(v, bundle), b3_density(eta, bundle));
    let n = b1.values().len();
    let sum = pointwise(n, u.grid(), |j| b1.values()[j] + b2.values()[j] + b3.values()[j]);
    sum.integral()
}

/// The higher-order collection N~(u, v) in
/// B1(u) + B3(eta) = B0(u) + (2 u0 u0' u^2)_x + N~(u, v):
///
/// ```text
/// N~ = 4(uu_x + vv_x)(u0'u + u0 u_x) + 2(uu_x + vv_x)^2
///    + 2(3u0^2 - 2) u0 u (u^2 + v^2) + (3u0^2 - 2)(u^2 + v^2)^2 / 2
/// ```
///
/// The last line is what expanding (3u0^2 - 2) eta^2 / 2 produces; weights 4
/// and 2 there would leave a cubic defect.
pub fn ntilde_density(u: &RealField, v: &RealField, bundle: &SolitonBundle) -> RealField {
    let (ux, vx) = (u.dx(), v.dx());
    let (z, d1) = (bundle.u0.values(), bundle.d1.values());
    pointwise(z.len(), u.grid(), |j| {
        let (a, b, ax, bx) = (u.values()[j], v.values()[j], ux.values()[j], vx.values()[j]);
        let m = a * ax + b * bx;
        let r = a * a + b * b;
        let k = 3.0 * z[j] * z[j] - 2.0;
        4.0 * m * (d1[j] * a + z[j] * ax) + 2.0 * m * m + 2.0 * k * z[j] * a * r + 0.5 * k * r * r
    })
}

/// (2 u0 u0' u^2)_x by the product rule with analytic profile derivatives.
pub fn flux_density(u: &RealField, bundle: &SolitonBundle) -> RealField {
    let ux = u.dx();
    let (z, d1, d2) = (bundle.u0.values(), bundle.d1.values(), bundle.d2.values());
    pointwise(z.len(), u.grid(), |j| {
        let a = u.values()[j];
        2.0 * (d1[j] * d1[j] + z[j] * d2[j]) * a * a + 4.0 * z[j] * d1[j] * a * ux.values()[j]
    })
}

/// int(B1(u) + B3(eta)) chi_R - int B0(u) chi_R with eta = 2 u0 u + u^2 + v^2.
pub fn bident_residual(u: &RealField, v: &RealField, radius: f64, bundle: &SolitonBundle) -> Result<f64, ExpansionError> {
    let chi = CutOff::new(u.grid(), radius)?;
    let eta = eta_of(u, v, &bundle.u0);
    let (b0, b1, b3) = (b0_density(u, bundle), b1_density(u, bundle), b3_density(&eta, bundle));
    let c = chi.values.values();
    let n = c.len();
    let f = pointwise(n, u.grid(), |j| (b1.values()[j] + b3.values()[j] - b0.values()[j]) * c[j]);
    Ok(f.integral())
}

/// -2 int u0 u0' u^2 chi_R', the purely quadratic part of the residual.
pub fn bident_flux_term(u: &RealField, radius: f64, bundle: &SolitonBundle) -> Result<f64, ExpansionError> {
    let chi = CutOff::new(u.grid(), radius)?;
    let (z, d1, c) = (bundle.u0.values(), bundle.d1.values(), chi.derivative.values());
    let f = pointwise(z.len(), u.grid(), |j| -2.0 * z[j] * d1[j] * u.values()[j].powi(2) * c[j]);
    Ok(f.integral())
}

/// One coercivity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub gap: f64,
    #[serde(rename = "dR")]
    pub dr: f64,
    #[serde(rename = "dR2")]
    pub dr_sq: f64,
    pub rho: f64,
    /// gap / dR^2, absent when dR = 0.
    pub ratio: Option<f64>,
}

/// Assumes the orthogonality conditions already hold for psi.
pub fn coercivity_probe(psi: &ComplexField, radius: f64, bundle: &SolitonBundle) -> Result<ProbeRecord, ExpansionError> {
    let gap = lambda_gap(psi, bundle);
    let dr = distance_dr(psi, &bundle.to_complex(), radius)?;
    let r = rho(&PerturbationTriple::from_field(psi, bundle), radius)?;
    let dr_sq = dr * dr;
    Ok(ProbeRecord {
        gap,
        dr,
        dr_sq,
        rho: r,
        ratio: (dr > 0.0).then(|| gap / dr_sq),
    })
}

/// sup_{|x| <= 2R}(|u| + |v|)
pub fn local_sup(u: &RealField, v: &RealField, radius: f64) -> f64 {
    let g = u.grid();
    g.nodes()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x.abs() <= 2.0 * radius)
        .map(|(j, _)| u.values()[j].abs() + v.values()[j].abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{qform, OperatorKind};
    use crate::profiles::black_soliton;
    use crate::sampling::{random_bumps, rng_for, BumpSpec};

    fn setup() -> (Arc<Grid>, SolitonBundle) {
        let g = Grid::new(40.0, 4001).unwrap();
        let b = black_soliton(&g);
        (g, b)
    }

    fn local_pair(g: &Arc<Grid>) -> (RealField, RealField) {
        let u = RealField::from_fn(g, |x| (1.0 + 0.5 * x) * (-x * x).exp());
        let v = RealField::from_fn(g, |x| 0.5 * x * (-x * x / 2.0).exp() + 0.3 * (-(x - 0.5f64).powi(2)).exp());
        (u, v)
    }

    #[test]
    fn cutoff_invariants() {
        let (g, _) = setup();
        let r = 10.0;
        let chi = CutOff::new(&g, r).unwrap();
        let c = chi.values.values();
        for (j, &x) in g.nodes().iter().enumerate() {
            if x.abs() <= r / 2.0 {
                assert_eq!(c[j], 1.0);
            }
            if x.abs() >= 1.5 * r {
                assert_eq!(c[j], 0.0);
            }
            assert_eq!(c[j], c[g.len() - 1 - j]);
            if j > g.centre_index() {
                assert!(c[j] <= c[j - 1]);
            }
        }
        assert_eq!(c[g.index_of(r).unwrap()], 0.5);
        assert!(chi.values.dxx().max_abs() <= 100.0 / (r * r));
        let fd = chi.values.dx();
        assert!((&fd - &chi.derivative).max_abs() < 1e-6);
        assert!(matches!(CutOff::new(&g, 30.0), Err(ExpansionError::CutoffOutsideDomain { .. })));
    }

    #[test]
    fn b_densities_match_quadratic_forms() {
        let (g, b) = setup();
        for seed in 0..10 {
            let mut rng = rng_for(seed);
            let u = random_bumps(&g, &BumpSpec::default(), &mut rng);
            let v = random_bumps(&g, &BumpSpec::default(), &mut rng);
            let d = BDensities::new(&PerturbationTriple::new(u.clone(), v.clone(), &b), &b);
            let kp = qform(OperatorKind::Kplus, &u, &b).unwrap();
            let km = qform(OperatorKind::Kminus, &v, &b).unwrap();
            assert!((d.b0.integral() - kp).abs() <= 1e-10 * kp.abs());
            assert!((d.b2.integral() - km).abs() <= 1e-10 * km.abs());
        }
    }

    #[test]
    fn bident_pointwise_algebra() {
        let (g, b) = setup();
        for seed in 0..5 {
            let mut rng = rng_for(100 + seed);
            let u = random_bumps(&g, &BumpSpec::default(), &mut rng).scale(0.3);
            let v = random_bumps(&g, &BumpSpec::default(), &mut rng).scale(0.3);
            let eta = eta_of(&u, &v, &b.u0);
            let (b0, b1, b3) = (b0_density(&u, &b), b1_density(&u, &b), b3_density(&eta, &b));
            let (fl, nt) = (flux_density(&u, &b), ntilde_density(&u, &v, &b));
            let n = g.len();
            let scale = (0..n).map(|j| b1.values()[j].abs() + b3.values()[j].abs()).fold(0.0, f64::max);
            let defect = (0..n)
                .map(|j| (b1.values()[j] + b3.values()[j] - b0.values()[j] - fl.values()[j] - nt.values()[j]).abs())
                .fold(0.0, f64::max);
            assert!(defect <= 1e-8 * scale, "{defect} vs {scale}");
        }
    }

    #[test]
    fn gap_examples() {
        let (g, b) = setup();
        assert_eq!(lambda_gap(&b.to_complex(), &b), 0.0);
        let moved = b.to_complex().shifted(2.0).map(|z| z * crate::Complex64::from_polar(1.0, 0.3));
        assert!(lambda_gap(&moved, &b).abs() <= 1e-9);
        let bump = RealField::from_fn(&g, |x| 0.01 * (-x * x / 2.0).exp()).project_out(&b.d1);
        let psi = (&b.u0 + &bump).to_complex();
        let gap = lambda_gap(&psi, &b);
        assert!(gap > 0.0);
        let rhs = lambda_expansion_rhs(&bump, &RealField::zeros(&g), &b);
        assert!((gap - rhs).abs() <= 1e-9, "{gap} vs {rhs}");
    }

    #[test]
    fn expansion_is_exact() {
        let (g, b) = setup();
        let z = RealField::zeros(&g);
        assert_eq!(lambda_expansion_rhs(&z, &z, &b), 0.0);
        for seed in 0..20 {
            let mut rng = rng_for(200 + seed);
            let u = random_bumps(&g, &BumpSpec::default(), &mut rng);
            let v = random_bumps(&g, &BumpSpec::default(), &mut rng);
            let psi = PerturbationTriple::new(u.clone(), v.clone(), &b).to_field(&b);
            let gap = lambda_gap(&psi, &b);
            let rhs = lambda_expansion_rhs(&u, &v, &b);
            assert!((gap - rhs).abs() <= 1e-9 * (1.0 + gap.abs()), "seed {seed}: {gap} vs {rhs}");
        }
    }

    #[test]
    fn quadratic_truncation_is_cubic() {
        let (g, b) = setup();
        let (u, v) = local_pair(&g);
        let drop = |a: f64| {
            let (su, sv) = (u.scale(a), v.scale(a));
            (lambda_expansion_density(&su, &sv, &b, true).integral()
                - lambda_expansion_density(&su, &sv, &b, false).integral())
            .abs()
        };
        let slope = (drop(1e-1).ln() - drop(1e-3).ln()) / (1e-1f64.ln() - 1e-3f64.ln());
        assert!((slope - 3.0).abs() <= 0.2, "{slope}");
    }

    #[test]
    fn q_total_examples() {
        let (g, b) = setup();
        let z = RealField::zeros(&g);
        assert_eq!(q_total(&z, &z, &z, &b), 0.0);
        let (u, v) = local_pair(&g);
        let a = 1e-3;
        let (su, sv) = (u.scale(a), v.scale(a));
        let eta = eta_of(&su, &sv, &b.u0);
        let psi = PerturbationTriple::new(su.clone(), sv.clone(), &b).to_field(&b);
        let diff = (q_total(&su, &sv, &eta, &b) - lambda_gap(&psi, &b)).abs();
        assert!(diff <= 10.0 * a * a * a, "{diff}");
    }

    #[test]
    fn b3_at_sech_matches_fine_quadrature() {
        let (g, b) = setup();
        let eta = RealField::from_fn(&g, |x| 1.0 / x.cosh());
        let value = b3_density(&eta, &b).integral();
        // oracle: the analytic integrand on a much finer grid
        let fine = Grid::new(40.0, 64001).unwrap();
        let oracle = RealField::from_fn(&fine, |x| {
            let (s, t, z) = (1.0 / x.cosh(), x.tanh(), (x / std::f64::consts::SQRT_2).tanh());
            0.5 * (s * t).powi(2) + 0.5 * (3.0 * z * z - 2.0) * s * s
        })
        .integral();
        assert!((value - oracle).abs() <= 1e-8, "{value} vs {oracle}");
    }

    #[test]
    fn bident_residual_is_cubic() {
        let (g, b) = setup();
        let z = RealField::zeros(&g);
        assert_eq!(bident_residual(&z, &z, 10.0, &b).unwrap(), 0.0);
        let (u, v) = local_pair(&g);
        let r = |a: f64| bident_residual(&u.scale(a), &v.scale(a), 10.0, &b).unwrap().abs();
        let slope = (r(1e-1).ln() - r(1e-2).ln()) / (1e-1f64.ln() - 1e-2f64.ln());
        assert!((slope - 3.0).abs() <= 0.2, "{slope}");
        let mid = (r(3e-2).ln() - r(1e-2).ln()) / (3e-2f64.ln() - 1e-2f64.ln());
        assert!((mid - 3.0).abs() <= 0.2, "{mid}");
        assert!(matches!(
            bident_residual(&u, &v, 27.0, &b),
            Err(ExpansionError::CutoffOutsideDomain { .. })
        ));
    }

    #[test]
    fn flux_term_decays_with_radius() {
        let (g, b) = setup();
        let u = RealField::from_fn(&g, |x| 0.01 / (x / 2.0).cosh());
        let f1 = bident_flux_term(&u, 8.0, &b).unwrap().abs();
        let f2 = bident_flux_term(&u, 12.0, &b).unwrap().abs();
        assert!(f2 <= (-(12.0f64 - 8.0) / 2.0).exp() * f1, "{f1} -> {f2}");
        // the flux term is what the smooth residual reduces to at quadratic order
        let full = |r: f64| bident_residual(&u, &RealField::zeros(&g), r, &b).unwrap();
        let nt = ntilde_density(&u, &RealField::zeros(&g), &b);
        let chi = CutOff::new(&g, 8.0).unwrap();
        let cubic = RealField::new(&g, nt.values().iter().zip(chi.values.values()).map(|(a, c)| a * c).collect())
            .unwrap()
            .integral();
        let flux = bident_flux_term(&u, 8.0, &b).unwrap();
        assert!((full(8.0) - cubic - flux).abs() <= 1e-12, "{} vs {}", full(8.0), cubic + flux);
    }

    #[test]
    fn probe_at_soliton_has_no_ratio() {
        let (_, b) = setup();
        let p = coercivity_probe(&b.to_complex(), 10.0, &b).unwrap();
        assert_eq!((p.gap, p.dr, p.ratio), (0.0, 0.0, None));
    }

    #[test]
    fn phase_ramp_stress_keeps_gap_positive() {
        let (_, b) = setup();
        let psi = crate::sampling::phase_ramp(&b, 0.01, 20.0);
        let p = coercivity_probe(&psi, 10.0, &b).unwrap();
        assert!(p.gap > 0.0, "{p:?}");
        assert!(p.ratio.unwrap() > 0.0);
    }

    #[test]
    fn distance_and_rho_are_comparable() {
        let (g, b) = setup();
        let r = 10.0;
        let mut c0: f64 = 1.0;
        let mut c1: f64 = 0.0;
        for seed in 0..10 {
            let mut rng = rng_for(300 + seed);
            let u = random_bumps(&g, &BumpSpec::default(), &mut rng).scale(1e-3).project_out(&b.d1);
            let v = random_bumps(&g, &BumpSpec::default(), &mut rng).scale(1e-3).project_out(&b.d2);
            let pert = PerturbationTriple::new(u.clone(), v.clone(), &b);
            let p = coercivity_probe(&pert.to_field(&b), r, &b).unwrap();
            c0 = c0.max(p.rho / p.dr).max(p.dr / (r * p.rho));
            c1 = c1.max(local_sup(&u, &v, r) / (r.sqrt() * p.rho));
        }
        assert!(c0.is_finite() && c0 < 1e3, "{c0}");
        assert!(c1.is_finite() && c1 < 1e3, "{c1}");
    }
}
