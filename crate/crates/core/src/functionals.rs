//! Conserved quantities Q, M, E, S, Lambda = S - 2E, the auxiliary variable
//! eta, the distance d_R and the weighted size rho.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{ComplexField, Grid, GridError, RealField};
use crate::profiles::SolitonBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FunctionalError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("window radius {0} must be at least 1")]
    RadiusTooSmall(f64),
    #[error("window radius {radius} exceeds the half width {half_width}")]
    RadiusTooLarge { radius: f64, half_width: f64 },
}

/// Threshold on ||psi(+-L)| - 1| above which truncated integrals are unreliable.
pub const BOUNDARY_TOLERANCE: f64 = 1e-6;

/// Conserved quantities of one field. `m_unrenormalized` is the plain
/// truncated momentum integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedSet {
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "M_unrenormalized")]
    pub m_unrenormalized: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
}

impl ConservedSet {
    pub fn as_array(&self) -> [f64; 5] {
        [self.q, self.m_unrenormalized, self.e, self.s, self.lambda]
    }
}

/// max over both ends of ||psi(+-L)| - 1|.
pub fn boundary_defect(psi: &ComplexField) -> f64 {
    let v = psi.values();
    (v[0].norm() - 1.0).abs().max((v[v.len() - 1].norm() - 1.0).abs())
}

/// Returns false (and logs) when the boundary samples are off the background.
pub fn check_boundary(psi: &ComplexField) -> bool {
    let d = boundary_defect(psi);
    if d > BOUNDARY_TOLERANCE {
        log::warn!("boundary modulus off by {d:.3e}; truncated integrals unreliable");
        false
    } else {
        true
    }
}

pub fn conserved(psi: &ComplexField) -> ConservedSet {
    check_boundary(psi);
    let grid = psi.grid();
    let px = psi.dx();
    let pxx = psi.dxx();
    let n = grid.len();
    let mut q = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut s = vec![0.0; n];
    for j in 0..n {
        let p = psi.values()[j];
        let d1 = px.values()[j];
        let d2 = pxx.values()[j];
        let rho = p.norm_sqr();
        let gap = 1.0 - rho;
        let flux = 2.0 * (p.conj() * d1).re;
        q[j] = rho - 1.0;
        m[j] = -(p.conj() * d1).im;
        e[j] = d1.norm_sqr() + 0.5 * gap * gap;
        s[j] = d2.norm_sqr() + 3.0 * rho * d1.norm_sqr() + 0.5 * flux * flux + gap * gap * (1.0 + 0.5 * rho);
    }
    let e = grid.integrate(&e);
    let s = grid.integrate(&s);
    ConservedSet {
        q: grid.integrate(&q),
        m_unrenormalized: grid.integrate(&m),
        e,
        s,
        lambda: s - 2.0 * e,
    }
}

pub fn lambda(psi: &ComplexField) -> f64 {
    conserved(psi).lambda
}

fn check_radius(grid: &Grid, radius: f64) -> Result<(), FunctionalError> {
    if radius < 1.0 {
        return Err(FunctionalError::RadiusTooSmall(radius));
    }
    if radius > grid.half_width() {
        return Err(FunctionalError::RadiusTooLarge {
            radius,
            half_width: grid.half_width(),
        });
    }
    grid.index_of(radius)?;
    Ok(())
}

/// d_R(psi1, psi2) = ||(psi1 - psi2)_x||_{H^1} + || |psi1|^2 - |psi2|^2 ||_{L^2}
///                 + ||psi1 - psi2||_{L^2(-R, R)}.
pub fn distance_dr(psi1: &ComplexField, psi2: &ComplexField, radius: f64) -> Result<f64, FunctionalError> {
    if !psi1.same_grid(psi2) {
        return Err(GridError::GridMismatch.into());
    }
    let grid = psi1.grid();
    check_radius(grid, radius)?;
    let delta = psi1 - psi2;
    let dx = delta.dx();
    let dxx = delta.dxx();
    let h1: Vec<f64> = dx
        .values()
        .iter()
        .zip(dxx.values())
        .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
        .collect();
    let modulus: Vec<f64> = psi1
        .values()
        .iter()
        .zip(psi2.values())
        .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).powi(2))
        .collect();
    let local: Vec<f64> = delta.values().iter().map(|z| z.norm_sqr()).collect();
    Ok(grid.integrate(&h1).max(0.0).sqrt()
        + grid.integrate(&modulus).max(0.0).sqrt()
        + grid.integrate_window(&local, -radius, radius)?.max(0.0).sqrt())
}

/// (u, v, eta) with eta = 2 u0 u + u^2 + v^2 computed at construction.
#[derive(Debug, Clone)]
pub struct PerturbationTriple {
    pub u: RealField,
    pub v: RealField,
    pub eta: RealField,
}

pub fn eta_of(u: &RealField, v: &RealField, u0: &RealField) -> RealField {
    let n = u.values().len();
    let vals = (0..n)
        .map(|j| {
            let (a, b, z) = (u.values()[j], v.values()[j], u0.values()[j]);
            2.0 * z * a + a * a + b * b
        })
        .collect();
    RealField::new(u.grid(), vals).expect("grid length")
}

impl PerturbationTriple {
    pub fn new(u: RealField, v: RealField, bundle: &SolitonBundle) -> Self {
        let eta = eta_of(&u, &v, &bundle.u0);
        PerturbationTriple { u, v, eta }
    }

    /// psi = u0 + u + i v
    pub fn from_field(psi: &ComplexField, bundle: &SolitonBundle) -> Self {
        let u = &psi.re() - &bundle.u0;
        Self::new(u, psi.im(), bundle)
    }

    pub fn zeros(grid: &Arc<Grid>, bundle: &SolitonBundle) -> Self {
        Self::new(RealField::zeros(grid), RealField::zeros(grid), bundle)
    }

    pub fn scaled(&self, alpha: f64, bundle: &SolitonBundle) -> Self {
        Self::new(self.u.scale(alpha), self.v.scale(alpha), bundle)
    }

    pub fn to_field(&self, bundle: &SolitonBundle) -> ComplexField {
        let re = &bundle.u0 + &self.u;
        ComplexField::from_parts(&re, &self.v)
    }

    /// max |eta - (2 u0 u + u^2 + v^2)|
    pub fn eta_defect(&self, bundle: &SolitonBundle) -> f64 {
        (&self.eta - &eta_of(&self.u, &self.v, &bundle.u0)).max_abs()
    }
}

/// rho^2 = int(u_xx^2 + v_xx^2 + u_x^2 + v_x^2) + int_{|x|<=R}(u^2 + v^2/R^2)
///       + int_{|x|>=R}(eta_x^2 + eta^2)
pub fn rho(pert: &PerturbationTriple, radius: f64) -> Result<f64, FunctionalError> {
    let grid = pert.u.grid();
    check_radius(grid, radius)?;
    let (ux, uxx, vx, vxx, ex) = (pert.u.dx(), pert.u.dxx(), pert.v.dx(), pert.v.dxx(), pert.eta.dx());
    let n = grid.len();
    let mut smooth = vec![0.0; n];
    let mut local = vec![0.0; n];
    let mut outer = vec![0.0; n];
    let r2 = radius * radius;
    for j in 0..n {
        smooth[j] = uxx.values()[j].powi(2) + vxx.values()[j].powi(2) + ux.values()[j].powi(2) + vx.values()[j].powi(2);
        local[j] = pert.u.values()[j].powi(2) + pert.v.values()[j].powi(2) / r2;
        outer[j] = ex.values()[j].powi(2) + pert.eta.values()[j].powi(2);
    }
    let l = grid.half_width();
    let mut total = grid.integrate(&smooth) + grid.integrate_window(&local, -radius, radius)?;
    if radius < l {
        total += grid.integrate_window(&outer, -l, -radius)? + grid.integrate_window(&outer, radius, l)?;
    }
    Ok(total.max(0.0).sqrt())
}
