//! Banded linear algebra: symmetric band storage, banded Cholesky, complex
//! banded LU without pivoting, and a shift-invert Lanczos eigensolver.

mod lanczos;

pub use lanczos::{smallest_eigenpairs, EigenOptions, EigenPair};

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("zero pivot at row {0}")]
    ZeroPivot(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),
}

/// Symmetric banded matrix; row i stores A(i, i-k) for k = 0..=bw.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        SymBanded {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.data[i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = i - j;
        if k > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + k]
        }
    }

    /// Adds `v` to entry (i, j), i >= j, within the band.
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i >= j && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.data[i * (self.bw + 1)..(i + 1) * (self.bw + 1)];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                y[i] += row[k] * x[i - k];
                y[i - k] += row[k] * x[i];
            }
        }
        y
    }

    /// x^T A x
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Maximum absolute row sum (an upper bound for the 2-norm).
    pub fn inf_norm(&self) -> f64 {
        let y = (0..self.n).map(|i| {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            (lo..=hi).map(|j| self.get(i, j).abs()).sum::<f64>()
        });
        y.fold(0.0, f64::max)
    }

    /// self + alpha * other (bandwidth is the larger of the two).
    pub fn add_scaled(&self, alpha: f64, other: &SymBanded) -> SymBanded {
        assert_eq!(self.n, other.n);
        let bw = self.bw.max(other.bw);
        let mut out = SymBanded::zeros(self.n, bw);
        for i in 0..self.n {
            for k in 0..=bw.min(i) {
                let v = self.get(i, i - k) + alpha * other.get(i, i - k);
                out.data[i * (bw + 1) + k] = v;
            }
        }
        out
    }

    /// Rank-one update alpha e_i e_i^T.
    pub fn add_diagonal(&mut self, i: usize, alpha: f64) {
        self.data[i * (self.bw + 1)] += alpha;
    }
}

/// General banded matrix with equal lower and upper bandwidth; row i stores
/// A(i, i-bw..=i+bw).
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[i * (2 * self.bw + 1) + (j + self.bw - i)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) <= self.bw, "entry outside band");
        self.data[i * (2 * self.bw + 1) + (j + self.bw - i)] += v;
    }

    /// Nonzero pattern of row i as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = i.saturating_sub(self.bw);
        let hi = (i + self.bw).min(self.n - 1);
        (lo..=hi).map(move |j| (j, self.get(i, j)))
    }

    /// D^T diag(w) D, accumulated so that the product is exactly symmetric.
    pub fn gram(&self, w: &[f64]) -> Banded {
        let bw = 2 * self.bw;
        let mut out = Banded::zeros(self.n, bw);
        for k in 0..self.n {
            let row: Vec<(usize, f64)> = self.row(k).filter(|(_, v)| *v != 0.0).collect();
            for &(i, a) in &row {
                for &(j, b) in &row {
                    out.add(i, j, (a * b) * w[k]);
                }
            }
        }
        out
    }

    pub fn add_matrix(&mut self, other: &Banded) {
        assert!(other.bw <= self.bw && other.n == self.n);
        for i in 0..self.n {
            for (j, v) in other.row(i) {
                self.add(i, j, v);
            }
        }
    }

    /// max |A - A^T|
    pub fn symmetry_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d = d.max((v - self.get(j, i)).abs());
            }
        }
        d
    }

    /// (A + A^T)/2 in symmetric storage.
    pub fn symmetrize(&self) -> SymBanded {
        let mut s = SymBanded::zeros(self.n, self.bw);
        for i in 0..self.n {
            for j in i.saturating_sub(self.bw)..=i {
                s.add_lower(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        s
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }
}

/// Cholesky factor L (lower banded) of a symmetric positive definite band matrix.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &SymBanded) -> Result<Self, LinalgError> {
        let n = a.n;
        let bw = a.bw;
        let w = bw + 1;
        let mut l = a.data.clone();
        for i in 0..n {
            for k in (1..=bw.min(i)).rev() {
                let j = i - k;
                // L(i, j) = (A(i, j) - sum_{m < j} L(i, m) L(j, m)) / L(j, j)
                let mut s = l[i * w + k];
                for m in (j.saturating_sub(bw).max(i.saturating_sub(bw)))..j {
                    s -= l[i * w + (i - m)] * l[j * w + (j - m)];
                }
                l[i * w + k] = s / l[j * w];
            }
            let mut d = l[i * w];
            for m in i.saturating_sub(bw)..i {
                let v = l[i * w + (i - m)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: i, pivot: d });
            }
            l[i * w] = d.sqrt();
        }
        Ok(BandedCholesky { n, bw, l })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut s = b[i];
            for m in i.saturating_sub(self.bw)..i {
                s -= self.l[i * w + (i - m)] * b[m];
            }
            b[i] = s / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for m in i + 1..=(i + self.bw).min(self.n - 1) {
                s -= self.l[m * w + (m - i)] * b[m];
            }
            b[i] = s / self.l[i * w];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// LU factorization without pivoting of a complex band matrix with equal
/// lower and upper bandwidth.
#[derive(Debug, Clone)]
pub struct ComplexBandedLu {
    n: usize,
    bw: usize,
    lu: Vec<Complex64>,
}

impl ComplexBandedLu {
    /// `entry(i, j)` supplies A(i, j) for |i - j| <= bw.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> Complex64) -> Result<Self, LinalgError> {
        let w = 2 * bw + 1;
        let mut lu = vec![Complex64::new(0.0, 0.0); n * w];
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                lu[i * w + (j + bw - i)] = entry(i, j);
            }
        }
        for k in 0..n {
            let piv = lu[k * w + bw];
            if piv.norm() == 0.0 || !piv.re.is_finite() || !piv.im.is_finite() {
                return Err(LinalgError::ZeroPivot(k));
            }
            for i in k + 1..=(k + bw).min(n - 1) {
                let f = lu[i * w + (k + bw - i)] / piv;
                lu[i * w + (k + bw - i)] = f;
                for j in k + 1..=(k + bw).min(n - 1) {
                    let u = lu[k * w + (j + bw - k)];
                    lu[i * w + (j + bw - i)] -= f * u;
                }
            }
        }
        Ok(ComplexBandedLu { n, bw, lu })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let (n, bw) = (self.n, self.bw);
        let w = 2 * bw + 1;
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.lu[i * w + (k + bw - i)] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + bw).min(n - 1) {
                s -= self.lu[i * w + (j + bw - i)] * b[j];
            }
            b[i] = s / self.lu[i * w + bw];
        }
    }
}
