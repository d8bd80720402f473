//! Dirichlet-truncated banded matrices of the operators, their low spectrum,
//! and constrained Rayleigh-quotient minima.

use std::sync::Arc;

use serde::Serialize;

use super::{Coefficients, OperatorError, OperatorKind};
use crate::grid::{Grid, RealField};
use crate::linalg::{smallest_eigenpairs, Banded, EigenOptions, SymBanded};
use crate::profiles::SolitonBundle;

pub const MIN_ASSEMBLY_POINTS: usize = 201;

/// Fraction of eigenvector mass allowed in the outer 5% of the domain.
pub const BOUNDARY_MASS_LIMIT: f64 = 0.01;

/// Banded matrix A on the interior nodes 1..N-2 with h x^T A x approximating
/// the quadratic form; fourth-order stencils with zero extension.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    grid: Arc<Grid>,
    matrix: SymBanded,
    symmetry_defect: f64,
}

/// Fourth-order D1 and D2 on interior nodes with zero values outside.
fn interior_stencils(n: usize, h: f64) -> (Banded, Banded) {
    let c1 = [1.0, -8.0, 0.0, 8.0, -1.0];
    let c2 = [-1.0, 16.0, -30.0, 16.0, -1.0];
    let mut d1 = Banded::zeros(n, 2);
    let mut d2 = Banded::zeros(n, 2);
    for i in 0..n {
        for (k, (a, b)) in c1.iter().zip(&c2).enumerate() {
            let j = i as i64 + k as i64 - 2;
            if j >= 0 && (j as usize) < n {
                d1.add(i, j as usize, a / (12.0 * h));
                d2.add(i, j as usize, b / (12.0 * h * h));
            }
        }
    }
    (d1, d2)
}

pub fn assemble(kind: OperatorKind, bundle: &SolitonBundle) -> Result<OperatorMatrix, OperatorError> {
    assemble_coefficients(&Coefficients::new(kind, bundle))
}

pub fn assemble_coefficients(coeffs: &Coefficients) -> Result<OperatorMatrix, OperatorError> {
    let grid = coeffs.flux.grid();
    let big_n = grid.len();
    if big_n < MIN_ASSEMBLY_POINTS {
        return Err(OperatorError::GridTooSmall {
            points: big_n,
            min: MIN_ASSEMBLY_POINTS,
        });
    }
    let n = big_n - 2;
    let (d1, d2) = interior_stencils(n, grid.spacing());
    let interior = |f: &RealField| f.values()[1..big_n - 1].to_vec();
    let mut a = d1.gram(&interior(&coeffs.flux));
    if coeffs.quartic != 0.0 {
        a.add_matrix(&d2.gram(&vec![coeffs.quartic; n]));
    }
    let c = interior(&coeffs.potential);
    for (i, ci) in c.iter().enumerate() {
        a.add(i, i, *ci);
    }
    let symmetry_defect = a.symmetry_defect();
    Ok(OperatorMatrix {
        kind: coeffs.kind,
        grid: Arc::clone(grid),
        matrix: a.symmetrize(),
        symmetry_defect,
    })
}

impl OperatorMatrix {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &SymBanded {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    pub fn norm_estimate(&self) -> f64 {
        self.matrix.inf_norm()
    }

    pub fn restrict(&self, f: &RealField) -> Vec<f64> {
        let n = f.values().len();
        f.values()[1..n - 1].to_vec()
    }

    pub fn extend(&self, x: &[f64]) -> RealField {
        let mut v = Vec::with_capacity(x.len() + 2);
        v.push(0.0);
        v.extend_from_slice(x);
        v.push(0.0);
        RealField::new(&self.grid, v).expect("interior length")
    }

    /// h x^T A x for the interior samples of `f`.
    pub fn quadratic_form(&self, f: &RealField) -> f64 {
        self.grid.spacing() * self.matrix.quadratic(&self.restrict(f))
    }

    /// A applied to the interior samples of `f`, returned as a field.
    pub fn apply(&self, f: &RealField) -> RealField {
        self.extend(&self.matrix.mul_vec(&self.restrict(f)))
    }
}

/// Lowest eigenpairs of an assembled operator.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub kind: OperatorKind,
    pub half_width: f64,
    pub points: usize,
    pub eigenvalues: Vec<f64>,
    /// Euclidean residual norms ||A v - lambda v|| for unit v.
    pub residuals: Vec<f64>,
    pub matrix_norm: f64,
    /// Eigenvectors discarded by the boundary-mass filter.
    pub discarded: usize,
    /// Eigenvectors with unit L^2 norm.
    #[serde(skip)]
    pub eigenvectors: Vec<RealField>,
}

fn boundary_mass(grid: &Grid, x: &[f64]) -> f64 {
    let l = grid.half_width();
    let total: f64 = x.iter().map(|v| v * v).sum();
    let outer: f64 = x
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.x(i + 1).abs() >= 0.95 * l)
        .map(|(_, v)| v * v)
        .sum();
    outer / total
}

pub fn spectrum(op: &OperatorMatrix, k: usize) -> Result<SpectrumReport, OperatorError> {
    let max = op.grid.len() / 4;
    if k == 0 || k > max {
        return Err(OperatorError::TooManyEigenpairs { requested: k, max });
    }
    let n = op.dim();
    let identity = SymBanded::identity(n);
    let mut extra = 4;
    loop {
        let count = (k + extra).min(n);
        let opts = EigenOptions {
            count,
            max_krylov: (4 * count + 200).min(n),
            ..Default::default()
        };
        let pairs = smallest_eigenpairs(op.matrix(), &identity, None, &opts)?;
        let total = pairs.len();
        let kept: Vec<_> = pairs
            .into_iter()
            .filter(|p| boundary_mass(&op.grid, &p.vector) <= BOUNDARY_MASS_LIMIT)
            .collect();
        if kept.len() >= k || count == n {
            let discarded = total - kept.len();
            let kept: Vec<_> = kept.into_iter().take(k).collect();
            let h = op.grid.spacing();
            let mut eigenvalues = Vec::new();
            let mut residuals = Vec::new();
            let mut eigenvectors = Vec::new();
            for p in kept {
                let mut x = p.vector;
                // deterministic sign: largest component positive
                let imax = (0..x.len()).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
                if x[imax] < 0.0 {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
                let ax = op.matrix.mul_vec(&x);
                let r = ax
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - p.value * b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                eigenvalues.push(p.value);
                residuals.push(r);
                eigenvectors.push(op.extend(&x.iter().map(|v| v / h.sqrt()).collect::<Vec<_>>()));
            }
            return Ok(SpectrumReport {
                kind: op.kind,
                half_width: op.grid.half_width(),
                points: op.grid.len(),
                eigenvalues,
                residuals,
                matrix_norm: op.norm_estimate(),
                discarded,
                eigenvectors,
            });
        }
        extra *= 2;
    }
}

/// Norm in the denominator of the coercivity quotient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoercivityNorm {
    /// ||f||^2 + ||f_x||^2 + ||f_xx||^2
    H2,
    /// ||f_x||^2 + ||f_xx||^2 + |f(0)|^2
    WeakKminus,
}

/// Minimum of qform(kind, f) / norm(f)^2 over f orthogonal to `constraint`
/// (or over everything when `constraint` is None).
pub fn coercivity_estimate(
    kind: OperatorKind,
    constraint: Option<&RealField>,
    norm: CoercivityNorm,
    bundle: &SolitonBundle,
) -> Result<f64, OperatorError> {
    let op = assemble(kind, bundle)?;
    let grid = op.grid();
    let n = op.dim();
    let h = grid.spacing();
    let (d1, d2) = interior_stencils(n, h);
    let mut gram = d1.gram(&vec![1.0; n]);
    gram.add_matrix(&d2.gram(&vec![1.0; n]));
    let mut norm_matrix = gram.symmetrize();
    match norm {
        CoercivityNorm::H2 => {
            for i in 0..n {
                norm_matrix.add_diagonal(i, 1.0);
            }
        }
        CoercivityNorm::WeakKminus => {
            norm_matrix.add_diagonal(grid.centre_index() - 1, 1.0 / h);
        }
    }
    let c = constraint.map(|c| op.restrict(c));
    let opts = EigenOptions {
        count: 1,
        max_krylov: 600.min(n - 1),
        ..Default::default()
    };
    let pairs = smallest_eigenpairs(op.matrix(), &norm_matrix, c.as_deref(), &opts)?;
    Ok(pairs[0].value)
}
