//! Time stepping of i phi_t + phi_xx + (1 - |phi|^2) phi = 0, the NLS flow in
//! the frame rotating with the background (phi = e^{it} psi), where the
//! black soliton is stationary.
//!
//! The default scheme is the implicit midpoint rule with the nonlinearity
//! averaged as (1 - (|phi^n|^2 + |phi^{n+1}|^2)/2)(phi^n + phi^{n+1})/2, which
//! conserves the discrete mass and energy. The linear part uses the five-point
//! fourth-order Laplacian on interior nodes; the boundary samples stay at
//! their initial values.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functionals::{conserved, distance_dr, ConservedSet};
use crate::grid::{ComplexField, Grid};
use crate::linalg::ComplexBandedLu;
use crate::modulation::{ModulationOptions, ModulationTracker, TrackedPoint};
use crate::profiles::SolitonBundle;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),
    #[error("nonlinear iteration stalled at t = {t} (last change {change:.3e})")]
    NonlinearSolveFailure { t: f64, change: f64 },
    #[error("observer failed at t = {t}: {message}")]
    ObserverFailure { t: f64, message: String },
    #[error("boundary modulus differs from 1 by {0:.3e}")]
    BadBoundary(f64),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("field became non-finite at t = {0}")]
    NonFinite(f64),
}

/// Exact pointwise map psi -> e^{it} psi.
pub fn to_rotating_frame(psi: &ComplexField, t: f64) -> ComplexField {
    let r = Complex64::from_polar(1.0, t);
    psi.map(|z| r * z)
}

/// Exact pointwise map phi -> e^{-it} phi.
pub fn from_rotating_frame(phi: &ComplexField, t: f64) -> ComplexField {
    let r = Complex64::from_polar(1.0, -t);
    phi.map(|z| r * z)
}

/// phi_xx + (1 - |phi|^2) phi, which vanishes for stationary states.
pub fn rotating_frame_residual(phi: &ComplexField) -> ComplexField {
    let pxx = phi.dxx();
    pxx.zip_map(phi, |d, z| d + z * (1.0 - z.norm_sqr()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Conservative implicit midpoint (default).
    #[default]
    ImplicitMidpoint,
    /// Strang splitting: exact rotation by u0^2 - |phi|^2 around a
    /// Crank-Nicolson step of phi_xx + (1 - u0^2) phi.
    Strang,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Time step; `None` means dt = h. Negative values run backwards.
    pub dt: Option<f64>,
    pub t_final: f64,
    /// Observers fire every `cadence` steps, and at the last step.
    pub cadence: usize,
    pub scheme: Scheme,
    pub max_fixed_point_iterations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: None,
            t_final: 20.0,
            cadence: 25,
            scheme: Scheme::ImplicitMidpoint,
            max_fixed_point_iterations: 100,
        }
    }
}

impl SimConfig {
    pub fn time_step(&self, grid: &Grid) -> f64 {
        self.dt.unwrap_or(grid.spacing())
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), EvolutionError> {
        let dt = self.time_step(grid);
        if !(dt.is_finite() && dt != 0.0) {
            return Err(EvolutionError::InvalidConfig(format!("time step {dt}")));
        }
        if dt.abs() > grid.spacing() * (1.0 + 1e-12) {
            return Err(EvolutionError::InvalidConfig(format!(
                "|dt| = {} exceeds h = {}",
                dt.abs(),
                grid.spacing()
            )));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(EvolutionError::InvalidConfig(format!("horizon {}", self.t_final)));
        }
        if self.cadence == 0 {
            return Err(EvolutionError::InvalidConfig("cadence must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self, grid: &Grid) -> usize {
        (self.t_final / self.time_step(grid).abs()).round() as usize
    }
}

pub fn boundary_modulus_defect(phi: &ComplexField) -> f64 {
    let v = phi.values();
    (v[0].norm() - 1.0).abs().max((v[v.len() - 1].norm() - 1.0).abs())
}

/// Advances the rotating-frame field by one step, boundary samples fixed.
#[derive(Debug)]
pub struct Stepper {
    grid: Arc<Grid>,
    dt: f64,
    scheme: Scheme,
    /// i dt / 2
    a: Complex64,
    lu: ComplexBandedLu,
    /// 1 - u0^2 on all nodes (Strang only).
    background: Vec<f64>,
    u0_sq: Vec<f64>,
    max_iterations: usize,
}

const D2_WEIGHTS: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

impl Stepper {
    pub fn new(grid: &Arc<Grid>, dt: f64, scheme: Scheme, max_iterations: usize) -> Result<Self, EvolutionError> {
        let n = grid.len();
        let m = n - 2;
        let a = Complex64::new(0.0, dt / 2.0);
        let scale = 1.0 / (12.0 * grid.spacing() * grid.spacing());
        let u0_sq: Vec<f64> = grid.nodes().iter().map(|&x| (x / std::f64::consts::SQRT_2).tanh().powi(2)).collect();
        let background: Vec<f64> = u0_sq.iter().map(|s| 1.0 - s).collect();
        let potential = |i: usize| match scheme {
            Scheme::ImplicitMidpoint => 0.0,
            Scheme::Strang => background[i + 1],
        };
        // row i of the interior system is node i + 1; ghost nodes outside the
        // boundary repeat the boundary sample, which only touches the RHS
        let lu = ComplexBandedLu::factor(m, 2, |i, j| {
            let off = j as isize - i as isize;
            let mut d2 = D2_WEIGHTS[(off + 2) as usize] * scale;
            if i == j {
                d2 += potential(i);
            }
            let id = if i == j { 1.0 } else { 0.0 };
            Complex64::new(id, 0.0) - a * d2
        })
        .map_err(|e| EvolutionError::LinearSolveFailure(e.to_string()))?;
        Ok(Stepper {
            grid: Arc::clone(grid),
            dt,
            scheme,
            a,
            lu,
            background,
            u0_sq,
            max_iterations,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Fourth-order Laplacian at interior nodes, ghost samples equal to the
    /// boundary samples.
    fn laplacian(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let n = phi.len();
        let scale = 1.0 / (12.0 * self.grid.spacing() * self.grid.spacing());
        let at = |k: isize| -> Complex64 { phi[k.clamp(0, n as isize - 1) as usize] };
        (1..n - 1)
            .map(|j| {
                let j = j as isize;
                let mut s = Complex64::new(0.0, 0.0);
                for (w, k) in D2_WEIGHTS.iter().zip(j - 2..=j + 2) {
                    s += at(k) * *w;
                }
                s * scale
            })
            .collect()
    }

    /// Exact flow of i phi_t = (|phi|^2 - u0^2) phi over `tau`; keeps |phi|.
    pub fn nonlinear_substep(&self, phi: &ComplexField, tau: f64) -> ComplexField {
        let vals = phi
            .values()
            .iter()
            .zip(&self.u0_sq)
            .map(|(z, s)| z * Complex64::from_polar(1.0, -(z.norm_sqr() - s) * tau))
            .collect();
        ComplexField::new(phi.grid(), vals).expect("grid length")
    }

    /// CN step of phi_t = i (phi_xx + (1 - u0^2) phi), boundary samples fixed.
    fn linear_cn(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let n = phi.len();
        let lap = self.laplacian(phi);
        let mut rhs: Vec<Complex64> = (1..n - 1)
            .map(|j| phi[j] + self.a * (lap[j - 1] + self.background[j] * phi[j]))
            .collect();
        self.add_boundary_terms(phi, &mut rhs);
        self.lu.solve_in_place(&mut rhs);
        let mut out = Vec::with_capacity(n);
        out.push(phi[0]);
        out.extend(rhs);
        out.push(phi[n - 1]);
        out
    }

    /// a times the part of the new-time Laplacian carried by the fixed samples.
    fn add_boundary_terms(&self, phi: &[Complex64], rhs: &mut [Complex64]) {
        let n = phi.len();
        let m = rhs.len();
        let scale = 1.0 / (12.0 * self.grid.spacing() * self.grid.spacing());
        let (left, right) = (phi[0], phi[n - 1]);
        rhs[0] += self.a * left * (15.0 * scale);
        rhs[1] += self.a * left * (-scale);
        rhs[m - 1] += self.a * right * (15.0 * scale);
        rhs[m - 2] += self.a * right * (-scale);
    }

    pub fn step(&self, phi: &ComplexField, t: f64) -> Result<ComplexField, EvolutionError> {
        let next = match self.scheme {
            Scheme::ImplicitMidpoint => self.midpoint(phi.values(), t)?,
            Scheme::Strang => {
                let half = self.nonlinear_substep(phi, self.dt / 2.0);
                let lin = self.linear_cn(half.values());
                let lin = ComplexField::new(phi.grid(), lin).expect("grid length");
                self.nonlinear_substep(&lin, self.dt / 2.0).into_values()
            }
        };
        let out = ComplexField::new(phi.grid(), next).expect("grid length");
        if !out.is_finite() {
            return Err(EvolutionError::NonFinite(t + self.dt));
        }
        Ok(out)
    }

    fn midpoint(&self, phi: &[Complex64], t: f64) -> Result<Vec<Complex64>, EvolutionError> {
        let n = phi.len();
        let lap = self.laplacian(phi);
        let mut base: Vec<Complex64> = (1..n - 1).map(|j| phi[j] + self.a * lap[j - 1]).collect();
        self.add_boundary_terms(phi, &mut base);
        let mut next: Vec<Complex64> = phi.to_vec();
        let mut previous_change = f64::INFINITY;
        for iteration in 0..self.max_iterations {
            let mut rhs = base.clone();
            for j in 1..n - 1 {
                let (p, q) = (phi[j], next[j]);
                let g = (1.0 - 0.5 * (p.norm_sqr() + q.norm_sqr())) * (p + q) * 0.5;
                rhs[j - 1] += 2.0 * self.a * g;
            }
            self.lu.solve_in_place(&mut rhs);
            let change = rhs
                .iter()
                .zip(&next[1..n - 1])
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            next[1..n - 1].copy_from_slice(&rhs);
            if change <= 1e-14 {
                return Ok(next);
            }
            // rounding floor: the contraction has stopped making progress
            if iteration > 3 && change >= previous_change && change <= 1e-11 {
                return Ok(next);
            }
            previous_change = change;
        }
        Err(EvolutionError::NonlinearSolveFailure {
            t,
            change: previous_change,
        })
    }
}

/// Callback fired at the observation stamps of `evolve`.
pub trait Observer {
    fn observe(&mut self, t: f64, phi: &ComplexField) -> Result<(), String>;
}

/// Records the conserved set at every stamp.
#[derive(Debug, Default)]
pub struct ConservedObserver {
    pub records: Vec<(f64, ConservedSet)>,
}

impl Observer for ConservedObserver {
    fn observe(&mut self, t: f64, phi: &ComplexField) -> Result<(), String> {
        self.records.push((t, conserved(phi)));
        Ok(())
    }
}

/// One row of the distance stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRecord {
    pub t: f64,
    #[serde(rename = "dR_modulated")]
    pub modulated: f64,
    #[serde(rename = "dR_raw")]
    pub raw: f64,
}

/// Tracks (xi, theta), the rates and both distances to u0.
#[derive(Debug)]
pub struct ModulationObserver {
    bundle: SolitonBundle,
    radius: f64,
    tracker: ModulationTracker,
    pub points: Vec<TrackedPoint>,
    pub distances: Vec<DistanceRecord>,
}

impl ModulationObserver {
    pub fn new(bundle: &SolitonBundle, opts: ModulationOptions) -> Self {
        ModulationObserver {
            bundle: bundle.clone(),
            radius: opts.radius,
            tracker: ModulationTracker::new(opts),
            points: Vec::new(),
            distances: Vec::new(),
        }
    }
}

impl Observer for ModulationObserver {
    fn observe(&mut self, t: f64, phi: &ComplexField) -> Result<(), String> {
        let (point, _) = self.tracker.track(t, phi, &self.bundle).map_err(|e| e.to_string())?;
        let raw = distance_dr(phi, &self.bundle.to_complex(), self.radius).map_err(|e| e.to_string())?;
        self.distances.push(DistanceRecord {
            t,
            modulated: point.distance,
            raw,
        });
        self.points.push(point);
        Ok(())
    }
}

/// Keeps every `every`-th observed field.
#[derive(Debug)]
pub struct SnapshotObserver {
    every: usize,
    seen: usize,
    pub snapshots: Vec<(f64, ComplexField)>,
}

impl SnapshotObserver {
    pub fn new(every: usize) -> Self {
        SnapshotObserver {
            every: every.max(1),
            seen: 0,
            snapshots: Vec::new(),
        }
    }
}

impl Observer for SnapshotObserver {
    fn observe(&mut self, t: f64, phi: &ComplexField) -> Result<(), String> {
        if self.seen.is_multiple_of(self.every) {
            self.snapshots.push((t, phi.clone()));
        }
        self.seen += 1;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Observation times k dt, in stepping order.
    pub stamps: Vec<f64>,
    pub final_field: ComplexField,
    pub steps: usize,
}

/// Runs `config.steps()` steps from `phi0`, firing the observers at step 0,
/// every `cadence` steps, and at the last step.
pub fn evolve(phi0: &ComplexField, config: &SimConfig, observers: &mut [&mut dyn Observer]) -> Result<Trajectory, EvolutionError> {
    let grid = phi0.grid();
    config.validate(grid)?;
    let defect = boundary_modulus_defect(phi0);
    if defect > 1e-6 {
        return Err(EvolutionError::BadBoundary(defect));
    }
    let dt = config.time_step(grid);
    let stepper = Stepper::new(grid, dt, config.scheme, config.max_fixed_point_iterations)?;
    let steps = config.steps(grid);
    let mut phi = phi0.clone();
    let mut stamps = Vec::new();
    let mut fire = |t: f64, phi: &ComplexField, stamps: &mut Vec<f64>| -> Result<(), EvolutionError> {
        stamps.push(t);
        for o in observers.iter_mut() {
            o.observe(t, phi)
                .map_err(|message| EvolutionError::ObserverFailure { t, message })?;
        }
        Ok(())
    };
    fire(0.0, &phi, &mut stamps)?;
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt;
        phi = stepper.step(&phi, t_prev)?;
        if k % config.cadence == 0 || k == steps {
            fire(k as f64 * dt, &phi, &mut stamps)?;
        }
    }
    log::debug!("evolved {steps} steps of dt = {dt}");
    Ok(Trajectory {
        stamps,
        final_field: phi,
        steps,
    })
}
