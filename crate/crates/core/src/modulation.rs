//! Modulation decomposition e^{i theta} psi(x + xi) = u0 + u + i v with
//! <u0', u> = 0 and <u0'', v> = 0, and the rates (xi', theta') of a
//! trajectory.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::functionals::{distance_dr, FunctionalError};
use crate::grid::{ComplexField, Grid, RealField};
use crate::profiles::{black_soliton_derivs, SolitonBundle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModulationError {
    #[error("translation {xi} outside [-{limit}, {limit}]")]
    ShiftTooLarge { xi: f64, limit: f64 },
    #[error("modulation did not converge after {iterations} iterations (residual {residual:.3e}, modulated distance {distance:.3e})")]
    NoConvergence { iterations: usize, residual: f64, distance: f64 },
    #[error("rate matrix is singular (det = {0:.3e})")]
    SingularB(f64),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationOptions {
    pub max_iterations: usize,
    /// Stop when |f| falls below this.
    pub tolerance: f64,
    /// Largest accepted d_R(u0 + u + iv, u0) after convergence.
    pub basin_radius: f64,
    /// Window radius R for d_R.
    pub radius: f64,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        ModulationOptions {
            max_iterations: 25,
            tolerance: 1e-12,
            basin_radius: 0.5,
            radius: 10.0,
        }
    }
}

/// u0(. - xi) and its first three derivatives, from the closed forms.
struct ShiftedProfile {
    d: [Vec<f64>; 4],
}

impl ShiftedProfile {
    fn new(grid: &Grid, xi: f64) -> Self {
        let mut d: [Vec<f64>; 4] = Default::default();
        for &x in grid.nodes() {
            let s = black_soliton_derivs(x - xi);
            for k in 0..4 {
                d[k].push(s[k]);
            }
        }
        ShiftedProfile { d }
    }
}

fn check_shift(grid: &Grid, xi: f64) -> Result<(), ModulationError> {
    let limit = grid.half_width() / 2.0;
    if !(xi.abs() <= limit) {
        return Err(ModulationError::ShiftTooLarge { xi, limit });
    }
    Ok(())
}

fn rotated_parts(psi: &ComplexField, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let rot = Complex64::from_polar(1.0, theta);
    psi.values()
        .iter()
        .map(|z| {
            let w = rot * z;
            (w.re, w.im)
        })
        .unzip()
}

fn weighted(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    grid.integrate(&prod)
}

/// f(xi, theta) = (<u0'(. - xi), Re(e^{i theta} psi)>, <u0''(. - xi), Im(e^{i theta} psi)>).
pub fn f_residual(psi: &ComplexField, xi: f64, theta: f64) -> Result<[f64; 2], ModulationError> {
    let grid = psi.grid();
    check_shift(grid, xi)?;
    let p = ShiftedProfile::new(grid, xi);
    let (re, im) = rotated_parts(psi, theta);
    Ok([weighted(grid, &p.d[1], &re), weighted(grid, &p.d[2], &im)])
}

/// Analytic Jacobian of `f_residual`, rows f1, f2 and columns (xi, theta).
pub fn f_jacobian(psi: &ComplexField, xi: f64, theta: f64) -> Result<[[f64; 2]; 2], ModulationError> {
    let grid = psi.grid();
    check_shift(grid, xi)?;
    let p = ShiftedProfile::new(grid, xi);
    let (re, im) = rotated_parts(psi, theta);
    Ok([
        [-weighted(grid, &p.d[2], &re), -weighted(grid, &p.d[1], &im)],
        [-weighted(grid, &p.d[3], &im), weighted(grid, &p.d[2], &re)],
    ])
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

#[derive(Debug, Clone)]
pub struct ModulationState {
    pub xi: f64,
    /// In (-pi, pi].
    pub theta: f64,
    pub u: RealField,
    pub v: RealField,
    pub iterations: usize,
    /// |f(xi, theta)| at the returned point.
    pub residual: f64,
    /// d_R(u0 + u + i v, u0).
    pub distance: f64,
}

impl ModulationState {
    /// e^{-i theta}(u0 + u + i v)(. - xi) on the grid of u.
    pub fn reassemble(&self) -> ComplexField {
        let grid = self.u.grid();
        let rot = Complex64::from_polar(1.0, -self.theta);
        let vals = grid
            .nodes()
            .iter()
            .map(|&x| {
                let y = x - self.xi;
                let re = black_soliton_derivs(y)[0] + grid.interpolate(self.u.values(), y);
                rot * Complex64::new(re, grid.interpolate(self.v.values(), y))
            })
            .collect();
        ComplexField::new(grid, vals).expect("grid length")
    }

    /// u0 + u + i v
    pub fn modulated_field(&self, bundle: &SolitonBundle) -> ComplexField {
        ComplexField::from_parts(&(&bundle.u0 + &self.u), &self.v)
    }
}

/// e^{i theta} psi(. + xi) - u0, split into real and imaginary parts.
fn comoving_perturbation(psi: &ComplexField, xi: f64, theta: f64, bundle: &SolitonBundle) -> (RealField, RealField) {
    let grid = psi.grid();
    let rot = Complex64::from_polar(1.0, theta);
    let (u, v): (Vec<f64>, Vec<f64>) = grid
        .nodes()
        .iter()
        .zip(bundle.u0.values())
        .map(|(&x, &z)| {
            let w = rot * grid.interpolate(psi.values(), x + xi);
            (w.re - z, w.im)
        })
        .unzip();
    (
        RealField::new(grid, u).expect("grid length"),
        RealField::new(grid, v).expect("grid length"),
    )
}

/// Newton iteration on f with the analytic Jacobian, starting from `guess`.
pub fn solve_modulation(
    psi: &ComplexField,
    guess: (f64, f64),
    bundle: &SolitonBundle,
    opts: &ModulationOptions,
) -> Result<ModulationState, ModulationError> {
    let (mut xi, mut theta) = guess;
    let mut f = f_residual(psi, xi, theta)?;
    let mut norm = f[0].hypot(f[1]);
    let mut iterations = 0;
    while norm > opts.tolerance {
        if iterations == opts.max_iterations {
            return Err(ModulationError::NoConvergence {
                iterations,
                residual: norm,
                distance: f64::NAN,
            });
        }
        let j = f_jacobian(psi, xi, theta)?;
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let mut dxi = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let mut dth = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        if !(dxi.is_finite() && dth.is_finite()) {
            return Err(ModulationError::NoConvergence {
                iterations,
                residual: norm,
                distance: f64::NAN,
            });
        }
        if dxi.abs() > 1.0 || dth.abs() > 0.5 {
            dxi *= 0.5;
            dth *= 0.5;
        }
        xi += dxi;
        theta += dth;
        iterations += 1;
        let next = f_residual(psi, xi, theta)?;
        let next_norm = next[0].hypot(next[1]);
        f = next;
        let stalled = (dxi.abs() + dth.abs()) < 1e-15 && next_norm >= norm;
        norm = next_norm;
        if stalled {
            break;
        }
    }
    let (u, v) = comoving_perturbation(psi, xi, theta, bundle);
    let state_field = ComplexField::from_parts(&(&bundle.u0 + &u), &v);
    let distance = distance_dr(&state_field, &bundle.to_complex(), opts.radius)?;
    if distance > opts.basin_radius || norm > opts.tolerance.max(1e-10) {
        return Err(ModulationError::NoConvergence {
            iterations,
            residual: norm,
            distance,
        });
    }
    Ok(ModulationState {
        xi,
        theta: wrap_angle(theta),
        u,
        v,
        iterations,
        residual: norm,
        distance,
    })
}

/// The 2x2 system B (xi', theta')^T = rhs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSystem {
    pub matrix: [[f64; 2]; 2],
    pub rhs: [f64; 2],
    pub xi_dot: f64,
    pub theta_dot: f64,
}

/// Rates from the orthogonality conditions differentiated along the flow.
pub fn modulation_rates(state: &ModulationState, bundle: &SolitonBundle) -> Result<RateSystem, ModulationError> {
    let (u, v) = (&state.u, &state.v);
    let grid: &Arc<Grid> = u.grid();
    let (z, d1, d2, d3, d4) = (
        bundle.u0.values(),
        bundle.d1.values(),
        bundle.d2.values(),
        bundle.d3.values(),
        bundle.d4.values(),
    );
    let (ux, vx) = (u.dx(), v.dx());
    let n = z.len();
    let (uv, vv) = (u.values(), v.values());
    let ip = |f: &dyn Fn(usize) -> f64| -> f64 {
        let vals: Vec<f64> = (0..n).map(f).collect();
        grid.integrate(&vals)
    };
    let norm = bundle.d1_norm_sq();
    let matrix = [
        [-norm - ip(&|j| d1[j] * ux.values()[j]), ip(&|j| d1[j] * vv[j])],
        [ip(&|j| d2[j] * vx.values()[j]), -norm + ip(&|j| d2[j] * uv[j])],
    ];
    // L- u0' = -u0''' + (u0^2 - 1) u0',  L+ u0'' = -u0'''' + (3u0^2 - 1) u0''
    let lin = [
        ip(&|j| (-d3[j] + (z[j] * z[j] - 1.0) * d1[j]) * vv[j]),
        ip(&|j| (-d4[j] + (3.0 * z[j] * z[j] - 1.0) * d2[j]) * uv[j]),
    ];
    let nonlin = [
        ip(&|j| {
            let eta = 2.0 * z[j] * uv[j] + uv[j] * uv[j] + vv[j] * vv[j];
            d1[j] * eta * vv[j]
        }),
        ip(&|j| {
            let a = 3.0 * z[j] * uv[j] + uv[j] * uv[j] + vv[j] * vv[j];
            d2[j] * (a * uv[j] + z[j] * vv[j] * vv[j])
        }),
    ];
    let rhs = [lin[0] + nonlin[0], lin[1] + nonlin[1]];
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    if det.abs() < 1e-6 {
        return Err(ModulationError::SingularB(det));
    }
    let xi_dot = (matrix[1][1] * rhs[0] - matrix[0][1] * rhs[1]) / det;
    let theta_dot = (-matrix[1][0] * rhs[0] + matrix[0][0] * rhs[1]) / det;
    Ok(RateSystem {
        matrix,
        rhs,
        xi_dot,
        theta_dot,
    })
}

/// One tracked point of a trajectory; theta is unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackedPoint {
    pub t: f64,
    pub xi: f64,
    pub theta: f64,
    #[serde(rename = "xidot")]
    pub xi_dot: f64,
    #[serde(rename = "thetadot")]
    pub theta_dot: f64,
    #[serde(rename = "dR_modulated")]
    pub distance: f64,
}

/// Follows one trajectory, seeding each solve with the previous parameters
/// and unwrapping the phase.
#[derive(Debug, Clone)]
pub struct ModulationTracker {
    opts: ModulationOptions,
    previous: Option<(f64, f64)>,
}

impl ModulationTracker {
    pub fn new(opts: ModulationOptions) -> Self {
        ModulationTracker { opts, previous: None }
    }

    pub fn track(
        &mut self,
        t: f64,
        psi: &ComplexField,
        bundle: &SolitonBundle,
    ) -> Result<(TrackedPoint, ModulationState), ModulationError> {
        let guess = self.previous.map(|(x, th)| (x, wrap_angle(th))).unwrap_or((0.0, 0.0));
        let state = solve_modulation(psi, guess, bundle, &self.opts)?;
        let theta = match self.previous {
            Some((_, prev)) => prev + wrap_angle(state.theta - prev),
            None => state.theta,
        };
        self.previous = Some((state.xi, theta));
        let rates = modulation_rates(&state, bundle)?;
        Ok((
            TrackedPoint {
                t,
                xi: state.xi,
                theta,
                xi_dot: rates.xi_dot,
                theta_dot: rates.theta_dot,
                distance: state.distance,
            },
            state,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{black_soliton, dark_soliton};
    use std::f64::consts::SQRT_2;

    fn setup() -> (Arc<Grid>, SolitonBundle) {
        let g = Grid::new(40.0, 4001).unwrap();
        let b = black_soliton(&g);
        (g, b)
    }

    fn orbit_point(g: &Arc<Grid>, xi: f64, theta: f64) -> ComplexField {
        let rot = Complex64::from_polar(1.0, -theta);
        ComplexField::from_fn(g, |x| rot * black_soliton_derivs(x - xi)[0])
    }

    #[test]
    fn residual_examples() {
        let (g, b) = setup();
        let f = f_residual(&b.to_complex(), 0.0, 0.0).unwrap();
        assert!(f[0].abs() <= 1e-10 && f[1].abs() <= 1e-10);
        let f = f_residual(&orbit_point(&g, 1.3, 0.4), 1.3, 0.4).unwrap();
        assert!(f[0].abs() <= 1e-10 && f[1].abs() <= 1e-10, "{f:?}");
        assert!(matches!(
            f_residual(&b.to_complex(), 25.0, 0.0),
            Err(ModulationError::ShiftTooLarge { .. })
        ));
    }

    #[test]
    fn jacobian_at_soliton() {
        let (_, b) = setup();
        let psi = b.to_complex();
        let j = f_jacobian(&psi, 0.0, 0.0).unwrap();
        let n = 2.0 * SQRT_2 / 3.0;
        let expected = [[n, 0.0], [0.0, -n]];
        let h = 1e-5;
        for c in 0..2 {
            let (dx, dt) = if c == 0 { (h, 0.0) } else { (0.0, h) };
            let p = f_residual(&psi, dx, dt).unwrap();
            let m = f_residual(&psi, -dx, -dt).unwrap();
            for r in 0..2 {
                let fd = (p[r] - m[r]) / (2.0 * h);
                assert!((fd - expected[r][c]).abs() <= 1e-6, "fd ({r},{c}) {fd}");
                assert!((j[r][c] - expected[r][c]).abs() <= 1e-9, "analytic ({r},{c}) {}", j[r][c]);
            }
        }
    }

    #[test]
    fn recovers_orbit_points() {
        let (g, b) = setup();
        let opts = ModulationOptions::default();
        let s = solve_modulation(&b.to_complex(), (0.0, 0.0), &b, &opts).unwrap();
        assert_eq!((s.xi, s.theta, s.iterations), (0.0, 0.0, 0));
        assert_eq!(s.u.max_abs() + s.v.max_abs(), 0.0);
        let s = solve_modulation(&orbit_point(&g, 1.5, 0.2), (0.0, 0.0), &b, &opts).unwrap();
        assert!((s.xi - 1.5).abs() <= 1e-8 && (s.theta - 0.2).abs() <= 1e-8, "{} {}", s.xi, s.theta);
    }

    #[test]
    fn perturbed_soliton_converges_fast() {
        let (g, b) = setup();
        let bump = RealField::from_fn(&g, |x| 0.05 * (-(x - 1.0).powi(2) / 2.0).exp());
        let psi = ComplexField::from_parts(&(&b.u0 + &bump), &bump.scale(0.5));
        let s = solve_modulation(&psi, (0.0, 0.0), &b, &ModulationOptions::default()).unwrap();
        assert!(s.iterations <= 6, "{}", s.iterations);
        let f = f_residual(&psi, s.xi, s.theta).unwrap();
        assert!(f[0].hypot(f[1]) <= 1e-10);
        assert!(b.d1.inner(&s.u).abs() <= 1e-9, "{}", b.d1.inner(&s.u));
        assert!(b.d2.inner(&s.v).abs() <= 1e-9, "{}", b.d2.inner(&s.v));
        let back = s.reassemble();
        let err = (&back - &psi).max_abs();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn equivariance_on_node_shifts() {
        let (g, b) = setup();
        let bump = RealField::from_fn(&g, |x| 0.03 * (-(x + 0.5).powi(2)).exp());
        let psi = ComplexField::from_parts(&(&b.u0 + &bump), &bump.scale(-0.7));
        let opts = ModulationOptions::default();
        let s0 = solve_modulation(&psi, (0.0, 0.0), &b, &opts).unwrap();
        let (shift, alpha) = (2.0 * g.spacing() * 50.0, 0.35);
        let rot = Complex64::from_polar(1.0, -alpha);
        let moved = psi.shifted(-shift).map(|z| rot * z);
        let s1 = solve_modulation(&moved, (0.0, 0.0), &b, &opts).unwrap();
        assert!((s1.xi - s0.xi - shift).abs() <= 1e-8, "{} vs {}", s1.xi, s0.xi + shift);
        assert!(wrap_angle(s1.theta - s0.theta - alpha).abs() <= 1e-8);
    }

    #[test]
    fn continuity_in_distance() {
        let (g, b) = setup();
        let opts = ModulationOptions::default();
        let base = orbit_point(&g, 0.7, -0.3);
        let s0 = solve_modulation(&base, (0.0, 0.0), &b, &opts).unwrap();
        let mut worst: f64 = 0.0;
        for (k, delta) in [1e-2, 3e-3, 1e-3].into_iter().enumerate() {
            let bump = RealField::from_fn(&g, |x| (-(x - k as f64).powi(2) / 3.0).exp());
            let psi = &base + &ComplexField::from_parts(&bump.scale(delta), &bump.scale(0.5 * delta));
            let d = distance_dr(&psi, &base, 10.0).unwrap();
            let s = solve_modulation(&psi, (0.0, 0.0), &b, &opts).unwrap();
            worst = worst.max(((s.xi - s0.xi).abs() + wrap_angle(s.theta - s0.theta).abs()) / d);
        }
        assert!(worst < 10.0, "{worst}");
    }

    #[test]
    fn far_fields_are_rejected() {
        let (g, b) = setup();
        let opts = ModulationOptions::default();
        let one = ComplexField::constant(&g, Complex64::new(1.0, 0.0));
        assert!(matches!(
            solve_modulation(&one, (0.0, 0.0), &b, &opts),
            Err(ModulationError::NoConvergence { .. }) | Err(ModulationError::ShiftTooLarge { .. })
        ));
        let bump = RealField::from_fn(&g, |x| 0.8 * (-(x - 2.0).powi(2)).exp());
        let psi = (&b.u0 + &bump).to_complex();
        assert!(solve_modulation(&psi, (0.0, 0.0), &b, &opts).is_err());
    }

    #[test]
    fn rates_vanish_at_soliton() {
        let (_, b) = setup();
        let s = solve_modulation(&b.to_complex(), (0.0, 0.0), &b, &ModulationOptions::default()).unwrap();
        let r = modulation_rates(&s, &b).unwrap();
        assert_eq!((r.xi_dot, r.theta_dot), (0.0, 0.0));
        let n = b.d1_norm_sq();
        assert_eq!(r.matrix, [[-n, 0.0], [0.0, -n]]);
    }

    #[test]
    fn dark_soliton_speed_from_rates() {
        // a travelling profile with speed nu has xi' = nu exactly
        let (g, b) = setup();
        let psi = dark_soliton(&g, 0.1).unwrap();
        let s = solve_modulation(&psi, (0.0, 0.0), &b, &ModulationOptions::default()).unwrap();
        let r = modulation_rates(&s, &b).unwrap();
        assert!((r.xi_dot - 0.1).abs() <= 1e-6, "{r:?}");
        assert!(r.theta_dot.abs() <= 1e-6, "{r:?}");
    }

    #[test]
    fn wrap_angle_range() {
        for t in [-7.0, -PI, 0.0, PI, 3.5, 10.0] {
            let w = wrap_angle(t);
            assert!(w > -PI && w <= PI);
            assert!(((t - w) / (2.0 * PI)).fract().abs() < 1e-12 || ((t - w) / (2.0 * PI)).fract().abs() > 1.0 - 1e-12);
        }
    }
}
