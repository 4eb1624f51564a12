//! Uniform radial grid, field storage, differentiation, and quadrature.
//!
//! Everything else in the crate is built on these primitives. The grid is
//! uniform because the characteristics stepper in [`crate::evolve`] relies on
//! unit-CFL exact shifts, and the quadrature is trapezoid throughout to match
//! the second-order accuracy of the difference stencils.

use thiserror::Error;

/// Smallest number of nodes a grid may have.
pub const MIN_POINTS: usize = 16;

/// Absolute threshold below which a field counts as decayed at the outer edge
/// of the grid (see [`RadialField::radial_integral`]).
pub const DECAY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("outer radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("field has {got} samples, grid has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("non-finite sample at node {index} (r = {r})")]
    NonFinite { index: usize, r: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field does not decay at the outer edge: |f({r})| = {value:e}")]
    SupportOverflow { r: f64, value: f64 },
}

/// Uniform discretization of `[0, r_max]` with nodes `r_j = j·h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    n_points: usize,
    h: f64,
}

impl RadialGrid {
    /// Build a grid with `n_points` nodes covering `[0, r_max]`.
    ///
    /// Rejects `n_points < MIN_POINTS` and non-positive `r_max` (both signal
    /// unusably coarse resolution).
    pub fn new(n_points: usize, r_max: f64) -> Result<Self, GridError> {
        if n_points < MIN_POINTS {
            return Err(GridError::TooFewPoints(n_points));
        }
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(GridError::BadRadius(r_max));
        }
        let h = r_max / (n_points - 1) as f64;
        Ok(Self { n_points, h })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Grid spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn r_max(&self) -> f64 {
        self.h * (self.n_points - 1) as f64
    }

    /// Radius of node `j`; `node(0) == 0` exactly.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

/// Samples of a radial function on a [`RadialGrid`]: `values[j] ≈ f(r_j)`.
///
/// All samples are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    values: Vec<f64>,
}

impl RadialField {
    pub fn new(grid: RadialGrid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.n_points() {
            return Err(GridError::LengthMismatch {
                got: values.len(),
                expected: grid.n_points(),
            });
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite {
                index: j,
                r: grid.node(j),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_points()],
        }
    }

    /// Sample a closure at every node.
    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        let values = (0..grid.n_points()).map(|j| f(grid.node(j))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> RadialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Internal constructor for hot paths that have already verified (or are
    /// about to verify) finiteness themselves.
    pub(crate) fn new_unchecked(grid: RadialGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.n_points());
        Self { grid, values }
    }

    /// Largest absolute sample.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> RadialField {
        RadialField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Nodewise combination of two fields on the same grid.
    pub fn zip_with(&self, other: &RadialField, f: impl Fn(f64, f64) -> f64) -> RadialField {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        RadialField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> RadialField {
        self.map(|v| c * v)
    }

    pub fn plus(&self, other: &RadialField) -> RadialField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn minus(&self, other: &RadialField) -> RadialField {
        self.zip_with(other, |a, b| a - b)
    }

    /// `∂_r f`: second-order centered differences at interior nodes,
    /// second-order one-sided stencils at both ends.
    pub fn deriv_r(&self) -> RadialField {
        RadialField {
            grid: self.grid,
            values: deriv(self.grid.spacing(), &self.values),
        }
    }

    /// `F(r_j) = ∫₀^{r_j} f(ρ) dρ` by cumulative trapezoid; `F(0) = 0`.
    pub fn cumulative_integral(&self) -> RadialField {
        let mut out = vec![0.0; self.values.len()];
        cumtrapz(self.grid.spacing(), &self.values, &mut out);
        RadialField {
            grid: self.grid,
            values: out,
        }
    }

    /// `∫_{ℝ³} f dx = 4π ∫₀^{r_max} f(r) r² dr` by trapezoid.
    ///
    /// Requires `|f| ≤ DECAY_TOL` on the outer 5% of nodes; a violation means
    /// the support has outrun the grid and the integral would be truncated.
    pub fn radial_integral(&self) -> Result<f64, GridError> {
        let n = self.values.len();
        let tail_start = n - (n / 20).max(1);
        for j in tail_start..n {
            if self.values[j].abs() > DECAY_TOL {
                return Err(GridError::SupportOverflow {
                    r: self.grid.node(j),
                    value: self.values[j],
                });
            }
        }
        Ok(radial_measure_integral(self.grid, &self.values, |_r| 1.0))
    }
}

/// `(u₀, u₁)`: radial Cauchy data (position, velocity) on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPair {
    pub position: RadialField,
    pub velocity: RadialField,
}

impl DataPair {
    pub fn new(position: RadialField, velocity: RadialField) -> Result<Self, GridError> {
        if position.grid() != velocity.grid() {
            return Err(GridError::GridMismatch);
        }
        Ok(Self { position, velocity })
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            position: RadialField::zeros(grid),
            velocity: RadialField::zeros(grid),
        }
    }

    pub fn grid(&self) -> RadialGrid {
        self.position.grid()
    }

    /// Nodewise max-norm distance between two pairs.
    pub fn max_distance(&self, other: &DataPair) -> f64 {
        let dp = self.position.minus(&other.position).max_abs();
        let dv = self.velocity.minus(&other.velocity).max_abs();
        dp.max(dv)
    }
}

// ---------------------------------------------------------------------------
// slice-level kernels shared by the hot paths

pub(crate) fn deriv(h: f64, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    let inv2h = 1.0 / (2.0 * h);
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2h;
    for j in 1..n - 1 {
        out[j] = (v[j + 1] - v[j - 1]) * inv2h;
    }
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv2h;
    out
}

/// One-sided second-order derivative at the origin node.
pub(crate) fn deriv_at_origin(h: f64, v: &[f64]) -> f64 {
    (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
}

pub(crate) fn cumtrapz(h: f64, src: &[f64], dst: &mut [f64]) {
    debug_assert_eq!(src.len(), dst.len());
    let half_h = 0.5 * h;
    let mut acc = 0.0;
    dst[0] = 0.0;
    for j in 1..src.len() {
        acc += half_h * (src[j - 1] + src[j]);
        dst[j] = acc;
    }
}

pub(crate) fn trapz(h: f64, v: &[f64]) -> f64 {
    let n = v.len();
    let interior: f64 = v[1..n - 1].iter().sum();
    h * (0.5 * (v[0] + v[n - 1]) + interior)
}

/// `4π ∫ f(r) w(r) r² dr` by trapezoid, for a nodewise weight `w`.
pub(crate) fn radial_measure_integral(
    grid: RadialGrid,
    v: &[f64],
    weight: impl Fn(f64) -> f64,
) -> f64 {
    let h = grid.spacing();
    let weighted: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(j, &f)| {
            let r = grid.node(j);
            f * weight(r) * r * r
        })
        .collect();
    4.0 * std::f64::consts::PI * trapz(h, &weighted)
}
