//! Experiment configuration (TOML). Every section has defaults; unknown keys
//! are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use blacksol::evolution::SimConfig;
use blacksol::sampling::BumpSpec;
use blacksol::Grid;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub output_dir: PathBuf,
    /// Window radius R of the local distance.
    pub radius: f64,
    pub grid: GridSettings,
    pub sim: SimConfig,
    pub perturbation: PerturbationSpec,
    pub verify: VerifySettings,
    pub spectrum: SpectrumSettings,
    pub stability: StabilitySettings,
    pub coercivity: CoercivitySettings,
    pub simulate: SimulateSettings,
    pub tolerances: Tolerances,
    pub hooks: Hooks,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "default".into(),
            output_dir: PathBuf::from("runs/default"),
            radius: 10.0,
            grid: GridSettings::default(),
            sim: SimConfig::default(),
            perturbation: PerturbationSpec::default(),
            verify: VerifySettings::default(),
            spectrum: SpectrumSettings::default(),
            stability: StabilitySettings::default(),
            coercivity: CoercivitySettings::default(),
            simulate: SimulateSettings::default(),
            tolerances: Tolerances::default(),
            hooks: Hooks::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings {
            half_width: 40.0,
            points: 4001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    None,
    /// u0 + sum of Gaussian bumps in both components.
    Bumps,
    /// u0 exp(i a tanh(x / s)).
    PhaseRamp,
    /// Dark soliton with speed `amplitude`.
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    /// Target d_R(phi0, u0) for bumps and ramps; the speed for `dark`.
    pub amplitude: f64,
    pub seed: u64,
    pub bumps: BumpSpec,
    pub ramp_scale: f64,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            kind: PerturbationKind::Bumps,
            amplitude: 0.01,
            seed: 42,
            bumps: BumpSpec::default(),
            ramp_scale: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySettings {
    /// Check groups to run; empty runs all of them.
    pub groups: Vec<String>,
    pub samples: usize,
    pub directions: usize,
    pub fd_step: f64,
    /// Grid for the constrained Rayleigh minima, at two resolutions.
    pub estimate_half_width: f64,
    pub estimate_points: [usize; 2],
    pub slope_amplitudes: [f64; 2],
    pub dynamics_horizon: f64,
    pub rate_horizon: f64,
    pub rate_amplitude: f64,
    pub dark_speed: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            groups: Vec::new(),
            samples: 100,
            directions: 20,
            fd_step: 1e-4,
            estimate_half_width: 20.0,
            estimate_points: [1001, 2001],
            slope_amplitudes: [1e-2, 1e-1],
            dynamics_horizon: 20.0,
            rate_horizon: 10.0,
            rate_amplitude: 0.01,
            dark_speed: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSettings {
    pub count: usize,
    /// Repeat at each of `sweep_half_widths` with the configured spacing.
    pub sweep: bool,
    pub sweep_half_widths: Vec<f64>,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            count: 4,
            sweep: false,
            sweep_half_widths: vec![20.0, 30.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySettings {
    pub deltas: Vec<f64>,
    pub t_final: f64,
    pub cadence: usize,
}

impl Default for StabilitySettings {
    fn default() -> Self {
        StabilitySettings {
            deltas: vec![0.02, 0.01, 0.005],
            t_final: 50.0,
            cadence: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoercivitySettings {
    pub samples: usize,
    pub min_distance: f64,
    pub max_distance: f64,
    /// Share of samples drawn as phase ramps instead of bumps.
    pub ramp_fraction: f64,
    pub ramp_scales: [f64; 2],
    /// Project u off u0' and v off u0''. When false the samples are pushed
    /// along the translation direction instead.
    pub orthogonality: bool,
    /// Weight of the bump part relative to u0' in the disabled mode.
    pub control_mix: f64,
}

impl Default for CoercivitySettings {
    fn default() -> Self {
        CoercivitySettings {
            samples: 200,
            min_distance: 1e-3,
            max_distance: 1e-1,
            ramp_fraction: 0.25,
            ramp_scales: [5.0, 20.0],
            orthogonality: true,
            control_mix: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSettings {
    /// Dump the field at every n-th observation stamp.
    pub snapshot_every: usize,
    /// Track (xi, theta) along the run.
    pub track: bool,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        SimulateSettings {
            snapshot_every: 10,
            track: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub profile_residual: f64,
    pub conserved_rel: f64,
    pub criticality: f64,
    pub factorization_rel: f64,
    pub qform_floor: f64,
    pub kplus_lowest: f64,
    pub kplus_correlation: f64,
    pub kminus_lowest_min: f64,
    pub kminus_lowest_max: f64,
    pub k1: f64,
    pub estimate_resolution_rel: f64,
    pub expansion_abs: f64,
    pub slope: f64,
    pub b_density_rel: f64,
    pub symmetry_recovery: f64,
    pub jacobian: f64,
    pub rate_rel: f64,
    pub stationary_drift: f64,
    pub conserved_drift_rel: f64,
    pub reversal: f64,
    pub dark_speed_rel: f64,
    pub stability_factor: f64,
    /// Largest allowed factor(smallest delta) / factor(largest delta).
    pub ladder_growth: f64,
    /// Negative control passes when its minimum ratio is below this share of c.
    pub collapse_share: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            profile_residual: 1e-13,
            conserved_rel: 1e-9,
            criticality: 1e-6,
            factorization_rel: 1e-8,
            qform_floor: -1e-9,
            kplus_lowest: 5e-5,
            kplus_correlation: 0.9999,
            kminus_lowest_min: -5e-4,
            kminus_lowest_max: 5e-3,
            k1: 1e-6,
            estimate_resolution_rel: 0.05,
            expansion_abs: 1e-9,
            slope: 0.2,
            b_density_rel: 1e-10,
            symmetry_recovery: 1e-8,
            jacobian: 1e-6,
            rate_rel: 0.02,
            stationary_drift: 1e-6,
            conserved_drift_rel: 1e-6,
            reversal: 1e-6,
            dark_speed_rel: 0.02,
            stability_factor: 10.0,
            ladder_growth: 1.5,
            collapse_share: 0.1,
        }
    }
}

/// Test hooks for negative controls. All zero in normal runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hooks {
    /// Added to the zeroth-order coefficient of K+ in the factorization check.
    pub kplus_potential_offset: f64,
}

/// Command-line overrides, applied after the file is read.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub half_width: Option<f64>,
    pub points: Option<usize>,
    pub radius: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.perturbation.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(l) = o.half_width {
            self.grid.half_width = l;
        }
        if let Some(n) = o.points {
            self.grid.points = n;
        }
        if let Some(r) = o.radius {
            self.radius = r;
        }
    }

    pub fn seed(&self) -> u64 {
        self.perturbation.seed
    }

    pub fn build_grid(&self) -> Result<Arc<Grid>, CliError> {
        Grid::new(self.grid.half_width, self.grid.points).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.build_grid()?;
        positive("radius", self.radius)?;
        if self.radius > self.grid.half_width {
            return Err(CliError::Config(format!(
                "radius {} exceeds the half width {}",
                self.radius, self.grid.half_width
            )));
        }
        self.sim.validate(&grid).map_err(|e| CliError::Config(e.to_string()))?;
        positive("perturbation.amplitude", self.perturbation.amplitude)?;
        positive("perturbation.ramp_scale", self.perturbation.ramp_scale)?;
        let b = &self.perturbation.bumps;
        if b.min_count > b.max_count || b.min_width <= 0.0 || b.min_width > b.max_width {
            return Err(CliError::Config("inconsistent bump ranges".into()));
        }
        for g in &self.verify.groups {
            if !crate::commands::verify::GROUPS.contains(&g.as_str()) {
                return Err(CliError::Config(format!("unknown check group {g:?}")));
            }
        }
        if self.verify.samples == 0 || self.verify.directions == 0 {
            return Err(CliError::Config("verify needs at least one sample and direction".into()));
        }
        positive("verify.fd_step", self.verify.fd_step)?;
        if self.spectrum.count == 0 {
            return Err(CliError::Config("spectrum.count must be at least 1".into()));
        }
        for l in &self.spectrum.sweep_half_widths {
            positive("spectrum.sweep_half_widths", *l)?;
        }
        if self.stability.deltas.is_empty() {
            return Err(CliError::Config("stability.deltas is empty".into()));
        }
        for d in &self.stability.deltas {
            positive("stability.deltas", *d)?;
        }
        if self.stability.cadence == 0 {
            return Err(CliError::Config("stability.cadence must be at least 1".into()));
        }
        let c = &self.coercivity;
        positive("coercivity.min_distance", c.min_distance)?;
        if c.samples == 0 || c.max_distance < c.min_distance {
            return Err(CliError::Config("coercivity needs samples and min_distance <= max_distance".into()));
        }
        if !(0.0..=1.0).contains(&c.ramp_fraction) {
            return Err(CliError::Config("coercivity.ramp_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
