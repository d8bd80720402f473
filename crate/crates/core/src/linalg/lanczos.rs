//! Shift-invert Lanczos for the lowest eigenpairs of a banded pencil (A, B),
//! optionally restricted to the hyperplane c^T x = 0.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BandedCholesky, LinalgError, SymBanded};

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub count: usize,
    /// Initial shift; lowered automatically until A - shift B is definite.
    pub shift: f64,
    pub max_krylov: usize,
    /// Relative Ritz residual required for every requested pair.
    pub tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            count: 4,
            shift: -0.01,
            max_krylov: 400,
            tol: 1e-12,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// B-normalized eigenvector.
    pub vector: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// Lowest `opts.count` eigenpairs of A x = lambda B x with B positive definite,
/// over {x : c^T x = 0} when a constraint vector is given.
pub fn smallest_eigenpairs(
    a: &SymBanded,
    b: &SymBanded,
    constraint: Option<&[f64]>,
    opts: &EigenOptions,
) -> Result<Vec<EigenPair>, LinalgError> {
    let n = a.dim();
    if b.dim() != n {
        return Err(LinalgError::Dimension(n, b.dim()));
    }
    if let Some(c) = constraint {
        if c.len() != n {
            return Err(LinalgError::Dimension(n, c.len()));
        }
    }
    let free = n - usize::from(constraint.is_some());
    if opts.count == 0 || opts.count > free {
        return Err(LinalgError::NoConvergence(format!("cannot extract {} pairs from dimension {free}", opts.count)));
    }

    let mut sigma = opts.shift;
    let mut tries = 0;
    let chol = loop {
        match BandedCholesky::factor(&a.add_scaled(-sigma, b)) {
            Ok(c) => break c,
            Err(LinalgError::NotPositiveDefinite { .. }) if tries < 12 => {
                sigma = if sigma < 0.0 { 10.0 * sigma } else { -0.1 };
                tries += 1;
            }
            Err(e) => return Err(e),
        }
    };
    log::debug!("shift-invert with sigma = {sigma}");

    let border = constraint.map(|c| {
        let z = chol.solve(c);
        let cz = dot(c, &z);
        (c, z, cz)
    });
    let apply = |y: &[f64]| -> Vec<f64> {
        let mut r = chol.solve(&b.mul_vec(y));
        if let Some((c, z, cz)) = &border {
            let mu = dot(c, &r) / cz;
            axpy(&mut r, -mu, z);
        }
        r
    };
    let bnorm = |x: &[f64]| dot(x, &b.mul_vec(x)).max(0.0).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut q0 = apply(&start);
    let s = bnorm(&q0);
    q0.iter_mut().for_each(|v| *v /= s);

    let max_m = opts.max_krylov.min(free);
    let mut basis: Vec<Vec<f64>> = vec![q0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    loop {
        let j = basis.len() - 1;
        let mut w = apply(&basis[j]);
        let bw = b.mul_vec(&w);
        let alpha = dot(&basis[j], &bw);
        axpy(&mut w, -alpha, &basis[j]);
        if j > 0 {
            axpy(&mut w, -betas[j - 1], &basis[j - 1]);
        }
        for _ in 0..2 {
            let bw = b.mul_vec(&w);
            for q in &basis {
                let h = dot(q, &bw);
                axpy(&mut w, -h, q);
            }
        }
        let beta = bnorm(&w);
        alphas.push(alpha);
        let m = alphas.len();

        let exhausted = m >= max_m || beta <= 1e-14 * alpha.abs().max(1e-300);
        if m >= opts.count && (m.is_multiple_of(5) || exhausted) {
            let t = DMatrix::from_fn(m, m, |r, c| {
                if r == c {
                    alphas[r]
                } else if r + 1 == c {
                    betas[r]
                } else if c + 1 == r {
                    betas[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
            let top = &order[..opts.count];
            let theta_max = eig.eigenvalues[order[0]].abs();
            let converged = top
                .iter()
                .all(|&i| (beta * eig.eigenvectors[(m - 1, i)]).abs() <= opts.tol * theta_max);
            if converged || exhausted {
                if !converged {
                    return Err(LinalgError::NoConvergence(format!("{m} Lanczos steps without convergence")));
                }
                let mut pairs: Vec<EigenPair> = top
                    .iter()
                    .map(|&i| {
                        let mut y = vec![0.0; n];
                        for (k, q) in basis.iter().enumerate() {
                            axpy(&mut y, eig.eigenvectors[(k, i)], q);
                        }
                        let s = bnorm(&y);
                        y.iter_mut().for_each(|v| *v /= s);
                        let value = a.quadratic(&y) / dot(&y, &b.mul_vec(&y));
                        EigenPair { value, vector: y }
                    })
                    .collect();
                pairs.sort_by(|p, q| p.value.total_cmp(&q.value));
                return Ok(pairs);
            }
        }
        betas.push(beta);
        w.iter_mut().for_each(|v| *v /= beta);
        basis.push(w);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirichlet_laplacian(n: usize) -> SymBanded {
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add_lower(i, i, 2.0);
            if i > 0 {
                a.add_lower(i, i - 1, -1.0);
            }
        }
        a
    }

    #[test]
    fn recovers_laplacian_spectrum() {
        let n = 300;
        let a = dirichlet_laplacian(n);
        let opts = EigenOptions {
            count: 5,
            ..Default::default()
        };
        let pairs = smallest_eigenpairs(&a, &SymBanded::identity(n), None, &opts).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((p.value - exact).abs() < 1e-12, "{k}: {} vs {exact}", p.value);
            let r = a.mul_vec(&p.vector);
            let res: f64 = r.iter().zip(&p.vector).map(|(x, y)| (x - p.value * y).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-9);
        }
    }

    #[test]
    fn constraint_removes_lowest_mode() {
        // excluding the first sine mode leaves the second as the minimum
        let n = 200;
        let a = dirichlet_laplacian(n);
        let h = std::f64::consts::PI / (n + 1) as f64;
        let c: Vec<f64> = (0..n).map(|i| ((i + 1) as f64 * h).sin()).collect();
        let opts = EigenOptions {
            count: 1,
            ..Default::default()
        };
        let p = smallest_eigenpairs(&a, &SymBanded::identity(n), Some(&c), &opts).unwrap();
        let second = 2.0 - 2.0 * (2.0 * h).cos();
        assert!((p[0].value - second).abs() < 1e-12);
        assert!(dot(&c, &p[0].vector).abs() < 1e-10);
    }

    #[test]
    fn generalized_problem_with_indefinite_matrix() {
        let n = 100;
        let mut a = dirichlet_laplacian(n);
        a.add_diagonal(50, -3.0);
        let mut b = SymBanded::zeros(n, 0);
        for i in 0..n {
            b.add_lower(i, i, 2.0);
        }
        let opts = EigenOptions {
            count: 2,
            ..Default::default()
        };
        let p = smallest_eigenpairs(&a, &b, None, &opts).unwrap();
        assert!(p[0].value < 0.0);
        let r = a.mul_vec(&p[0].vector);
        let bv = b.mul_vec(&p[0].vector);
        let res: f64 = r.iter().zip(&bv).map(|(x, y)| (x - p[0].value * y).powi(2)).sum::<f64>().sqrt();
        assert!(res < 1e-9);
    }
}
