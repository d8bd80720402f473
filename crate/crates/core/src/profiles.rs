//! The black soliton u0(x) = tanh(x/sqrt2), its derivatives, and the
//! travelling dark-soliton family.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{ComplexField, Grid, RealField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("dark soliton speed {0} outside (-sqrt2, sqrt2)")]
    SpeedOutOfRange(f64),
}

/// u0 and its first four derivatives at `x`, from the closed forms.
pub fn black_soliton_derivs(x: f64) -> [f64; 5] {
    let t = (x / SQRT_2).tanh();
    let c = (x / SQRT_2).cosh();
    let s = 1.0 / (c * c);
    [
        t,
        s / SQRT_2,
        -t * s,
        s / SQRT_2 * (3.0 * t * t - 1.0),
        t * s * (4.0 - 6.0 * t * t),
    ]
}

/// Analytic samples of u0 and its derivatives on one grid.
#[derive(Debug, Clone)]
pub struct SolitonBundle {
    pub u0: RealField,
    pub d1: RealField,
    pub d2: RealField,
    pub d3: RealField,
    pub d4: RealField,
}

pub fn black_soliton(grid: &Arc<Grid>) -> SolitonBundle {
    let samples: Vec<[f64; 5]> = grid.nodes().iter().map(|&x| black_soliton_derivs(x)).collect();
    let pick = |k: usize| RealField::new(grid, samples.iter().map(|s| s[k]).collect()).expect("grid length");
    SolitonBundle {
        u0: pick(0),
        d1: pick(1),
        d2: pick(2),
        d3: pick(3),
        d4: pick(4),
    }
}

impl SolitonBundle {
    pub fn grid(&self) -> &Arc<Grid> {
        self.u0.grid()
    }

    /// max |u0' - (1 - u0^2)/sqrt2|
    pub fn first_order_residual(&self) -> f64 {
        self.d1.zip_map(&self.u0, |d, u| d - (1.0 - u * u) / SQRT_2).max_abs()
    }

    /// max |u0'' + u0 - u0^3|
    pub fn second_order_residual(&self) -> f64 {
        self.d2.zip_map(&self.u0, |d, u| d + u - u * u * u).max_abs()
    }

    /// ||u0'||^2 by quadrature.
    pub fn d1_norm_sq(&self) -> f64 {
        self.d1.norm_sq()
    }

    pub fn to_complex(&self) -> ComplexField {
        self.u0.to_complex()
    }
}

/// Rotating-frame dark soliton of speed `nu`:
/// sqrt(1 - nu^2/2) tanh(sqrt(1/2 - nu^2/4) x) + i nu/sqrt2.
pub fn dark_soliton(grid: &Arc<Grid>, nu: f64) -> Result<ComplexField, ProfileError> {
    if !(nu.abs() < SQRT_2) {
        return Err(ProfileError::SpeedOutOfRange(nu));
    }
    let a = (1.0 - 0.5 * nu * nu).sqrt();
    let k = (0.5 - 0.25 * nu * nu).sqrt();
    let im = nu / SQRT_2;
    Ok(ComplexField::from_fn(grid, |x| Complex64::new(a * (k * x).tanh(), im)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<Grid> {
        Grid::new(40.0, 4001).unwrap()
    }

    #[test]
    fn ode_residuals_vanish() {
        let b = black_soliton(&grid());
        assert!(b.first_order_residual() <= 1e-13);
        assert!(b.second_order_residual() <= 1e-13);
        // fourth-derivative identity obtained by differentiating the second ODE twice
        let r = (0..b.u0.values().len())
            .map(|j| {
                let [u, d1, d2, _, d4] = black_soliton_derivs(b.grid().x(j));
                (d4 + (1.0 - 3.0 * u * u) * d2 - 6.0 * u * d1 * d1).abs()
            })
            .fold(0.0, f64::max);
        assert!(r <= 1e-13);
    }

    #[test]
    fn values_at_origin_and_tail() {
        let g = grid();
        let b = black_soliton(&g);
        let c = g.centre_index();
        assert_eq!(b.u0.values()[c], 0.0);
        assert!((b.d1.values()[c] - 1.0 / SQRT_2).abs() < 1e-16);
        let ul = b.u0.values()[g.len() - 1];
        assert!((1.0 - ul * ul).abs() <= 1e-20);
    }

    #[test]
    fn derivative_norm() {
        let b = black_soliton(&grid());
        assert!((b.d1_norm_sq() - 2.0 * SQRT_2 / 3.0).abs() <= 1e-10);
    }

    #[test]
    fn parity() {
        let g = grid();
        let b = black_soliton(&g);
        let n = g.len();
        for j in 0..n {
            let k = n - 1 - j;
            assert!((b.u0.values()[j] + b.u0.values()[k]).abs() <= 1e-13);
            assert!((b.d1.values()[j] - b.d1.values()[k]).abs() <= 1e-13);
            assert!((b.d2.values()[j] + b.d2.values()[k]).abs() <= 1e-13);
            assert!(b.d1.values()[j] > 0.0);
        }
    }

    #[test]
    fn analytic_derivatives_agree_with_finite_differences() {
        let b = black_soliton(&grid());
        assert!((&b.u0.dx() - &b.d1).max_abs() < 1e-9);
        assert!((&b.d1.dx() - &b.d2).max_abs() < 1e-9);
        assert!((&b.d2.dx() - &b.d3).max_abs() < 1e-9);
        assert!((&b.d3.dx() - &b.d4).max_abs() < 1e-9);
    }

    #[test]
    fn dark_soliton_family() {
        let g = grid();
        let b = black_soliton(&g);
        let d0 = dark_soliton(&g, 0.0).unwrap();
        assert!(d0.im().max_abs() == 0.0);
        assert!((&d0.re() - &b.u0).max_abs() <= 1e-15);
        let d = dark_soliton(&g, 0.5).unwrap();
        for j in [0, g.len() - 1] {
            assert!((d.values()[j].norm_sqr() - 1.0).abs() <= 1e-12);
        }
        assert!(matches!(dark_soliton(&g, SQRT_2), Err(ProfileError::SpeedOutOfRange(_))));
        assert!(dark_soliton(&g, -1.5).is_err());
        assert!(dark_soliton(&g, f64::NAN).is_err());
        let near = dark_soliton(&g, 1e-4).unwrap();
        assert!((&near - &d0).max_abs() <= 1e-3);
    }

    #[test]
    fn dark_soliton_travelling_wave_residual() {
        // i nu p' = p'' + (1 - |p|^2) p
        let g = grid();
        let nu = 0.3;
        let p = dark_soliton(&g, nu).unwrap();
        let lhs = p.dx().map(|z| Complex64::i() * nu * z);
        let rhs = p.dxx().zip_map(&p, |d2, z| d2 + (1.0 - z.norm_sqr()) * z);
        assert!((&lhs - &rhs).max_abs() <= 1e-7);
    }
}
