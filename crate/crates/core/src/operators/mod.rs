//! Linearized operators around the black soliton.
//!
//! Every operator has the Sturm-Liouville form
//! `q d^4 - d(a d) + c` with `q` in {0, 1}:
//!
//! | kind   | q | a          | c                      |
//! |--------|---|------------|------------------------|
//! | Lplus  | 0 | 1          | 3u0^2 - 1              |
//! | Lminus | 0 | 1          | u0^2 - 1               |
//! | Mplus  | 1 | 5u0^2      | -5u0^4 + 15u0^2 - 4    |
//! | Mminus | 1 | 3u0^2      | u0^2 - 1               |
//! | Kplus  | 1 | 5u0^2 - 2  | 9u0^2 - 5u0^4 - 2      |
//! | Kminus | 1 | 3u0^2 - 2  | 1 - u0^2               |
//!
//! with K = M - 2L.

mod assembly;
mod duhamel;

pub use assembly::{assemble, coercivity_estimate, spectrum, CoercivityNorm, OperatorMatrix, SpectrumReport};
pub use duhamel::{duhamel_inner, kernel_k1, kernel_kinf_closed_form, kernel_kinf_profile, reconstruct_u, reconstruct_v};

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridError, RealField};
use crate::linalg::LinalgError;
use crate::profiles::SolitonBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("grid too small for assembly: {points} points (need {min})")]
    GridTooSmall { points: usize, min: usize },
    #[error("requested {requested} eigenpairs, at most {max} allowed")]
    TooManyEigenpairs { requested: usize, max: usize },
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
    #[error("p_x - u0 q residual {0:.3e} exceeds tolerance")]
    InconsistentPQ(f64),
    #[error("{0} has no quadratic form contract here")]
    UnsupportedKind(OperatorKind),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for OperatorError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::NoConvergence(m) => OperatorError::NoConvergence(m),
            other => OperatorError::Linalg(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum OperatorKind {
    Lplus,
    Lminus,
    Mplus,
    Mminus,
    Kplus,
    Kminus,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 6] = [
        OperatorKind::Lplus,
        OperatorKind::Lminus,
        OperatorKind::Mplus,
        OperatorKind::Mminus,
        OperatorKind::Kplus,
        OperatorKind::Kminus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Lplus => "Lplus",
            OperatorKind::Lminus => "Lminus",
            OperatorKind::Mplus => "Mplus",
            OperatorKind::Mminus => "Mminus",
            OperatorKind::Kplus => "Kplus",
            OperatorKind::Kminus => "Kminus",
        }
    }

    /// (q, alpha, beta, c(u0^2)) with a = alpha u0^2 + beta.
    fn structure(self) -> (f64, f64, f64, fn(f64) -> f64) {
        match self {
            OperatorKind::Lplus => (0.0, 0.0, 1.0, |s| 3.0 * s - 1.0),
            OperatorKind::Lminus => (0.0, 0.0, 1.0, |s| s - 1.0),
            OperatorKind::Mplus => (1.0, 5.0, 0.0, |s| -5.0 * s * s + 15.0 * s - 4.0),
            OperatorKind::Mminus => (1.0, 3.0, 0.0, |s| s - 1.0),
            OperatorKind::Kplus => (1.0, 5.0, -2.0, |s| 9.0 * s - 5.0 * s * s - 2.0),
            OperatorKind::Kminus => (1.0, 3.0, -2.0, |s| 1.0 - s),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OperatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown operator kind {s:?}"))
    }
}

/// Sampled coefficient fields of one operator.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub kind: OperatorKind,
    pub quartic: f64,
    pub flux: RealField,
    pub flux_dx: RealField,
    pub potential: RealField,
}

impl Coefficients {
    pub fn new(kind: OperatorKind, bundle: &SolitonBundle) -> Self {
        let (q, alpha, beta, c) = kind.structure();
        let u0 = &bundle.u0;
        Coefficients {
            kind,
            quartic: q,
            flux: u0.map(|u| alpha * u * u + beta),
            flux_dx: u0.zip_map(&bundle.d1, |u, d| 2.0 * alpha * u * d),
            potential: u0.map(|u| c(u * u)),
        }
    }

    /// Adds a constant to the potential; used to corrupt an operator on purpose.
    pub fn with_potential_offset(mut self, delta: f64) -> Self {
        self.potential = self.potential.map(|c| c + delta);
        self
    }

    pub fn apply(&self, f: &RealField) -> RealField {
        let fx = f.dx();
        let fxx = f.dxx();
        let fxxxx = fxx.dxx();
        let n = f.values().len();
        let vals = (0..n)
            .map(|j| {
                self.quartic * fxxxx.values()[j] - self.flux.values()[j] * fxx.values()[j]
                    - self.flux_dx.values()[j] * fx.values()[j]
                    + self.potential.values()[j] * f.values()[j]
            })
            .collect();
        RealField::new(f.grid(), vals).expect("grid length")
    }

    /// int(q f_xx^2 + a f_x^2 + c f^2)
    pub fn qform(&self, f: &RealField) -> f64 {
        self.density(f).integral()
    }

    pub fn density(&self, f: &RealField) -> RealField {
        let fx = f.dx();
        let fxx = f.dxx();
        let n = f.values().len();
        let vals = (0..n)
            .map(|j| {
                self.quartic * fxx.values()[j].powi(2)
                    + self.flux.values()[j] * fx.values()[j].powi(2)
                    + self.potential.values()[j] * f.values()[j].powi(2)
            })
            .collect();
        RealField::new(f.grid(), vals).expect("grid length")
    }
}

fn warn_boundary(f: &RealField) {
    let v = f.values();
    let m = v[0].abs().max(v[v.len() - 1].abs());
    if m > 1e-6 {
        log::debug!("operator applied to a field with boundary value {m:.3e}; expect boundary pollution");
    }
}

pub fn apply(kind: OperatorKind, f: &RealField, bundle: &SolitonBundle) -> RealField {
    warn_boundary(f);
    Coefficients::new(kind, bundle).apply(f)
}

/// Quadratic form of K+ or K- by quadrature of its density.
pub fn qform(kind: OperatorKind, f: &RealField, bundle: &SolitonBundle) -> Result<f64, OperatorError> {
    match kind {
        OperatorKind::Kplus | OperatorKind::Kminus => Ok(Coefficients::new(kind, bundle).qform(f)),
        other => Err(OperatorError::UnsupportedKind(other)),
    }
}

/// w = u_x + sqrt2 u0 u
pub fn w_substitution(u: &RealField, bundle: &SolitonBundle) -> RealField {
    let ux = u.dx();
    let n = u.values().len();
    let vals = (0..n)
        .map(|j| ux.values()[j] + SQRT_2 * bundle.u0.values()[j] * u.values()[j])
        .collect();
    RealField::new(u.grid(), vals).expect("grid length")
}

/// p = u0 v_x - u0' v and q = v_xx + (1 - u0^2) v.
pub fn kminus_factors(v: &RealField, bundle: &SolitonBundle) -> (RealField, RealField) {
    let vx = v.dx();
    let vxx = v.dxx();
    let n = v.values().len();
    let (u0, d1) = (bundle.u0.values(), bundle.d1.values());
    let p = (0..n).map(|j| u0[j] * vx.values()[j] - d1[j] * v.values()[j]).collect();
    let q = (0..n)
        .map(|j| vxx.values()[j] + (1.0 - u0[j] * u0[j]) * v.values()[j])
        .collect();
    (
        RealField::new(v.grid(), p).expect("grid length"),
        RealField::new(v.grid(), q).expect("grid length"),
    )
}

/// ||w_x||^2 + ||w||^2 with w = u_x + sqrt2 u0 u.
pub fn kplus_factorized(u: &RealField, bundle: &SolitonBundle) -> f64 {
    let w = w_substitution(u, bundle);
    w.dx().norm_sq() + w.norm_sq()
}

/// ||L_- v||^2 + ||p||^2; note L_- v = -q.
pub fn kminus_factorized(v: &RealField, bundle: &SolitonBundle) -> f64 {
    let (p, q) = kminus_factors(v, bundle);
    q.norm_sq() + p.norm_sq()
}
