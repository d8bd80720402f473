//! Uniform grid on [-L, L] with finite-difference derivatives, composite
//! quadrature and off-node interpolation.
//!
//! Every quantity in the crate is a [`Field`] sampled on a shared [`Grid`].

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid too small: {points} points (need at least {min})")]
    GridTooSmall { points: usize, min: usize },
    #[error("point count must be odd, got {0}")]
    EvenPointCount(usize),
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("coordinate {0} is not a grid node")]
    NotOnGrid(f64),
    #[error("window [{a}, {b}] is empty or reversed")]
    EmptyWindow { a: f64, b: f64 },
    #[error("sample count {got} does not match grid point count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Accuracy order of the central finite-difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FdOrder {
    Fourth,
    Sixth,
    #[default]
    Eighth,
}

impl FdOrder {
    pub fn accuracy(self) -> usize {
        match self {
            FdOrder::Fourth => 4,
            FdOrder::Sixth => 6,
            FdOrder::Eighth => 8,
        }
    }
}

/// Derivative order accepted by [`Grid::diff`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deriv {
    First,
    Second,
}

#[derive(Debug, Clone)]
struct Stencil {
    /// Central weights on offsets -m..=m, already divided by h^k.
    central: Vec<f64>,
    /// One-sided weights for the first m nodes, on nodes 0..width.
    left: Vec<Vec<f64>>,
    /// Parity of the operator under reflection: -1 for odd derivatives.
    reflect: f64,
}

/// Finite-difference weights of Fornberg (1988) for derivatives up to
/// `max_deriv` at `z` from the abscissae `xs`. Returns `w[k][j]`.
pub fn fornberg_weights(z: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

impl Stencil {
    fn build(deriv: usize, accuracy: usize, h: f64) -> Self {
        let m = accuracy / 2;
        let scale = h.powi(deriv as i32);
        let offsets: Vec<f64> = (-(m as i64)..=m as i64).map(|k| k as f64).collect();
        let central = fornberg_weights(0.0, &offsets, deriv)[deriv]
            .iter()
            .map(|w| w / scale)
            .collect();
        let width = accuracy + 1;
        let nodes: Vec<f64> = (0..width).map(|k| k as f64).collect();
        let left = (0..m)
            .map(|j| {
                fornberg_weights(j as f64, &nodes, deriv)[deriv]
                    .iter()
                    .map(|w| w / scale)
                    .collect()
            })
            .collect();
        let reflect = if deriv % 2 == 1 { -1.0 } else { 1.0 };
        Stencil {
            central,
            left,
            reflect,
        }
    }
}

/// Uniform symmetric grid x_j = -L + j h, j = 0..N-1, N odd.
#[derive(Debug, Clone)]
pub struct Grid {
    half_width: f64,
    points: usize,
    spacing: f64,
    order: FdOrder,
    nodes: Vec<f64>,
    simpson: Vec<f64>,
    d1: Stencil,
    d2: Stencil,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.half_width == other.half_width
            && self.points == other.points
            && self.order == other.order
    }
}

pub const MIN_POINTS: usize = 9;

impl Grid {
    pub fn new(half_width: f64, points: usize) -> Result<Arc<Self>, GridError> {
        Self::with_order(half_width, points, FdOrder::default())
    }

    pub fn with_order(half_width: f64, points: usize, order: FdOrder) -> Result<Arc<Self>, GridError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::BadHalfWidth(half_width));
        }
        if points.is_multiple_of(2) {
            return Err(GridError::EvenPointCount(points));
        }
        let min = MIN_POINTS.max(order.accuracy() + 1);
        if points < min {
            return Err(GridError::GridTooSmall { points, min });
        }
        let spacing = 2.0 * half_width / (points - 1) as f64;
        let centre = (points - 1) / 2;
        let mut nodes = vec![0.0; points];
        for j in 0..centre {
            let x = -half_width + j as f64 * spacing;
            nodes[j] = x;
            nodes[points - 1 - j] = -x;
        }
        nodes[centre] = 0.0;

        let mut simpson = vec![0.0; points];
        for (j, w) in simpson.iter_mut().enumerate() {
            *w = if j == 0 || j == points - 1 {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            } * spacing
                / 3.0;
        }

        let accuracy = order.accuracy();
        Ok(Arc::new(Grid {
            half_width,
            points,
            spacing,
            order,
            nodes,
            simpson,
            d1: Stencil::build(1, accuracy, spacing),
            d2: Stencil::build(2, accuracy, spacing),
        }))
    }

    /// Grid with spacing `h`; the point count is rounded to the nearest odd integer.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Arc<Self>, GridError> {
        let intervals = (2.0 * half_width / h).round() as usize;
        let intervals = intervals + intervals % 2;
        Self::new(half_width, intervals + 1)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn order(&self) -> FdOrder {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn x(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    pub fn centre_index(&self) -> usize {
        (self.points - 1) / 2
    }

    /// Index of the node at `x`, accepting rounding noise below 1e-9 h.
    pub fn index_of(&self, x: f64) -> Result<usize, GridError> {
        let s = (x + self.half_width) / self.spacing;
        let j = s.round();
        if !(0.0..=(self.points - 1) as f64).contains(&j) || (s - j).abs() > 1e-9 {
            return Err(GridError::NotOnGrid(x));
        }
        Ok(j as usize)
    }

    pub fn diff<T>(&self, f: &[T], order: Deriv) -> Vec<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        assert_eq!(f.len(), self.points, "sample count must match grid");
        let st = match order {
            Deriv::First => &self.d1,
            Deriv::Second => &self.d2,
        };
        let n = self.points;
        let m = st.central.len() / 2;
        let mut out = vec![T::default(); n];
        for j in m..n - m {
            let mut acc = T::default();
            for (k, &w) in st.central.iter().enumerate() {
                acc = acc + f[j + k - m] * w;
            }
            out[j] = acc;
        }
        for (j, row) in st.left.iter().enumerate() {
            let mut lo = T::default();
            let mut hi = T::default();
            for (k, &w) in row.iter().enumerate() {
                lo = lo + f[k] * w;
                hi = hi + f[n - 1 - k] * (w * st.reflect);
            }
            out[j] = lo;
            out[n - 1 - j] = hi;
        }
        out
    }

    /// Composite Simpson rule over the whole grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        assert_eq!(f.len(), self.points, "sample count must match grid");
        f.iter().zip(&self.simpson).map(|(a, w)| a * w).sum()
    }

    /// Composite rule over the nodes `a..=b` (indices).
    pub fn integrate_indices(&self, f: &[f64], a: usize, b: usize) -> f64 {
        let h = self.spacing;
        let n = b - a;
        match n {
            0 => 0.0,
            1 => 0.5 * h * (f[a] + f[b]),
            _ => {
                let (simpson_end, tail) = if n.is_multiple_of(2) { (b, false) } else { (b - 3, true) };
                let mut s = 0.0;
                if simpson_end > a {
                    s += f[a] + f[simpson_end];
                    for j in a + 1..simpson_end {
                        s += if (j - a) % 2 == 1 { 4.0 } else { 2.0 } * f[j];
                    }
                    s *= h / 3.0;
                }
                if tail {
                    let k = simpson_end;
                    s += 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]);
                }
                s
            }
        }
    }

    /// Simpson value over the window [a, b]; both ends must be nodes.
    pub fn integrate_window(&self, f: &[f64], a: f64, b: f64) -> Result<f64, GridError> {
        let ia = self.index_of(a)?;
        let ib = self.index_of(b)?;
        if ib <= ia {
            return Err(GridError::EmptyWindow { a, b });
        }
        Ok(self.integrate_indices(f, ia, ib))
    }

    /// F(x_j) = integral of f from 0 to x_j, by a fourth-order local rule.
    pub fn cumulative_from_centre(&self, f: &[f64]) -> Vec<f64> {
        self.cumulative_from(f, self.centre_index())
    }

    /// F(x_j) = integral of f from x_anchor to x_j, by the local rule
    /// h/24 (-f_{j-1} + 13 f_j + 13 f_{j+1} - f_{j+2}) with one-sided end panels.
    pub fn cumulative_from(&self, f: &[f64], anchor: usize) -> Vec<f64> {
        let n = self.points;
        let h = self.spacing;
        // integral over [x_j, x_{j+1}]
        let panel = |j: usize| -> f64 {
            if j == 0 {
                h / 24.0 * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
            } else if j + 2 >= n {
                h / 24.0 * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
            } else {
                h / 24.0 * (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2])
            }
        };
        let mut out = vec![0.0; n];
        for j in anchor..n - 1 {
            out[j + 1] = out[j] + panel(j);
        }
        for j in (0..anchor).rev() {
            out[j] = out[j + 1] - panel(j);
        }
        out
    }

    /// Degree-7 Lagrange interpolation at an arbitrary coordinate; values
    /// beyond the ends are extended by the boundary sample.
    pub fn interpolate<T>(&self, f: &[T], x: f64) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let n = self.points;
        if x <= -self.half_width {
            return f[0];
        }
        if x >= self.half_width {
            return f[n - 1];
        }
        let s = (x + self.half_width) / self.spacing;
        let nearest = s.round();
        if (s - nearest).abs() < 1e-12 {
            // node hit up to rounding: return the sample itself
            return f[nearest as usize];
        }
        let j = s.floor() as usize;
        let start = j.saturating_sub(3).min(n - 8);
        let t = s - start as f64;
        let mut acc = T::default();
        for k in 0..8 {
            let mut w = 1.0;
            for m in 0..8 {
                if m != k {
                    w *= (t - m as f64) / (k as f64 - m as f64);
                }
            }
            acc = acc + f[start + k] * w;
        }
        acc
    }
}

/// Samples of a scalar function on a grid.
#[derive(Debug, Clone)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Vec<T>,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: Copy> Field<T> {
    pub fn new(grid: &Arc<Grid>, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64) -> T) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: grid.nodes().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn same_grid<U>(&self, other: &Field<U>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn map<U>(&self, f: impl Fn(T) -> U) -> Field<U> {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Pointwise combination with the node coordinate available.
    pub fn map_x<U>(&self, f: impl Fn(f64, T) -> U) -> Field<U> {
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .grid
                .nodes()
                .iter()
                .zip(&self.values)
                .map(|(&x, &a)| f(x, a))
                .collect(),
        }
    }

    pub fn zip_map<U: Copy, V>(&self, other: &Field<U>, f: impl Fn(T, U) -> V) -> Field<V> {
        assert_eq!(self.values.len(), other.values.len(), "fields on different grids");
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl<T> Field<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn diff(&self, order: Deriv) -> Self {
        Field {
            grid: Arc::clone(&self.grid),
            values: self.grid.diff(&self.values, order),
        }
    }

    pub fn dx(&self) -> Self {
        self.diff(Deriv::First)
    }

    pub fn dxx(&self) -> Self {
        self.diff(Deriv::Second)
    }

    /// g(x_j) = f(x_j + s) by interpolation.
    pub fn shifted(&self, s: f64) -> Self {
        Field {
            grid: Arc::clone(&self.grid),
            values: self
                .grid
                .nodes()
                .iter()
                .map(|&x| self.grid.interpolate(&self.values, x + s))
                .collect(),
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![T::default(); grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, c: T) -> Self {
        Field {
            grid: Arc::clone(grid),
            values: vec![c; grid.len()],
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|v| v * a)
    }
}

impl RealField {
    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn integrate_window(&self, a: f64, b: f64) -> Result<f64, GridError> {
        self.grid.integrate_window(&self.values, a, b)
    }

    /// L^2 inner product by quadrature.
    pub fn inner(&self, other: &RealField) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "fields on different grids");
        self.values
            .iter()
            .zip(&other.values)
            .zip(&self.grid.simpson)
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().max(0.0).sqrt()
    }

    /// Squared H^2 norm: f^2 + f_x^2 + f_xx^2.
    pub fn h2_norm_sq(&self) -> f64 {
        self.norm_sq() + self.dx().norm_sq() + self.dxx().norm_sq()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// f - (<f, c> / <c, c>) c
    pub fn project_out(&self, c: &RealField) -> RealField {
        let a = self.inner(c) / c.norm_sq();
        self.zip_map(c, |f, g| f - a * g)
    }

    pub fn to_complex(&self) -> ComplexField {
        self.map(|v| Complex64::new(v, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl ComplexField {
    pub fn from_parts(re: &RealField, im: &RealField) -> ComplexField {
        re.zip_map(im, Complex64::new)
    }

    pub fn re(&self) -> RealField {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> RealField {
        self.map(|z| z.im)
    }

    pub fn abs_sq(&self) -> RealField {
        self.map(|z| z.norm_sqr())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

macro_rules! field_binop {
    ($tr:ident, $method:ident) => {
        impl<T> $tr<&Field<T>> for &Field<T>
        where
            T: Copy + $tr<Output = T>,
        {
            type Output = Field<T>;
            fn $method(self, rhs: &Field<T>) -> Field<T> {
                self.zip_map(rhs, |a, b| a.$method(b))
            }
        }
        impl<T> $tr<Field<T>> for Field<T>
        where
            T: Copy + $tr<Output = T>,
        {
            type Output = Field<T>;
            fn $method(self, rhs: Field<T>) -> Field<T> {
                (&self).$method(&rhs)
            }
        }
    };
}

field_binop!(Add, add);
field_binop!(Sub, sub);

impl<T> Mul<f64> for &Field<T>
where
    T: Copy + Mul<f64, Output = T>,
{
    type Output = Field<T>;
    fn mul(self, a: f64) -> Field<T> {
        self.map(|v| v * a)
    }
}

impl<T> Neg for &Field<T>
where
    T: Copy + Neg<Output = T>,
{
    type Output = Field<T>;
    fn neg(self) -> Field<T> {
        self.map(|v| -v)
    }
}
