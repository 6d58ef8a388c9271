//! Uniform symmetric grids, sampled functions and trapezoidal quadrature.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[-L, L]` with an odd number of nodes.
///
/// Nodes are generated as `(j - c) h` with `c = (n - 1) / 2`, so the grid is
/// exactly symmetric and `x_c = 0` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
    spacing: f64,
}

/// Builds the grid on `[-half_width, half_width]` with `n_points` nodes.
pub fn make_grid(half_width: f64, n_points: usize) -> Result<Grid> {
    Grid::new(half_width, n_points)
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if n_points < 3 || n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_points must be odd and >= 3, got {n_points}")));
        }
        Ok(Self {
            half_width,
            n_points,
            spacing: 2.0 * half_width / (n_points - 1) as f64,
        })
    }

    /// Grid with the given spacing whose half-width is the multiple of
    /// `spacing` nearest to `half_width` (at least one step).
    pub fn with_spacing(half_width: f64, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        let m = (half_width / spacing).round().max(1.0) as usize;
        let g = Self::new(m as f64 * spacing, 2 * m + 1)?;
        Ok(Self { spacing, ..g })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Index of the node at the origin.
    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn node(&self, j: usize) -> f64 {
        (j as f64 - self.center() as f64) * self.spacing
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Halves the spacing on the same interval.
    pub fn refine(&self) -> Self {
        Self::new(self.half_width, 2 * self.n_points - 1).expect("refinement of a valid grid")
    }

    /// Trapezoid weights: `h` inside, `h/2` at both ends.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![self.spacing; self.n_points];
        w[0] = self.spacing / 2.0;
        w[self.n_points - 1] = self.spacing / 2.0;
        w
    }

    /// Per-node weights of the exact integral over `|x| > r` of the
    /// piecewise-linear interpolant. At `r = 0` they coincide bitwise with
    /// [`Grid::weights`].
    pub fn tail_weights(&self, r: f64) -> Vec<f64> {
        let h = self.spacing;
        let mut w = vec![0.0; self.n_points];
        for j in 0..self.n_points - 1 {
            let x0 = self.node(j);
            // segment [x0, x0 + h] lies on one side of the origin
            let (a, b) = if j >= self.center() {
                (((r - x0) / h).clamp(0.0, 1.0), 1.0)
            } else {
                (0.0, ((-r - x0) / h).clamp(0.0, 1.0))
            };
            if b <= a {
                continue;
            }
            let right = 0.5 * (b * b - a * a);
            let left = (b - a) - right;
            w[j] += h * left;
            w[j + 1] += h * right;
        }
        w
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.n_points == other.n_points && self.half_width == other.half_width
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "[-{}, {}] with {} nodes vs [-{}, {}] with {} nodes",
                self.half_width, self.half_width, self.n_points, other.half_width, other.half_width, other.n_points
            )))
        }
    }
}

/// A labelled real function of one variable.
#[derive(Clone)]
pub struct RealFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RealFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::new("0", |_| 0.0)
    }

    pub fn identity() -> Self {
        Self::new("x", |x| x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealFn({})", self.label)
    }
}

/// Complex samples on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<C64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid.n_points()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    /// Real parts; errors if any imaginary part is nonzero.
    pub fn real_values(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                if v.im == 0.0 {
                    Ok(v.re)
                } else {
                    Err(Error::InvalidArgument(format!(
                        "expected a real function, imaginary part {} at x = {}",
                        v.im,
                        self.grid.node(j)
                    )))
                }
            })
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// Samples a real function; non-finite values are rejected.
pub fn sample(f: impl Fn(f64) -> f64, grid: &Grid) -> Result<GridFunction> {
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            let v = f(x);
            if v.is_finite() {
                Ok(C64::new(v, 0.0))
            } else {
                Err(Error::NonFinite { x, value: v })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridFunction { grid: *grid, values })
}

/// Samples a complex function; non-finite values are rejected.
pub fn sample_complex(f: impl Fn(f64) -> C64, grid: &Grid) -> Result<GridFunction> {
    let values = grid
        .nodes()
        .into_iter()
        .map(|x| {
            let v = f(x);
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite {
                    x,
                    value: if v.re.is_finite() { v.im } else { v.re },
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridFunction { grid: *grid, values })
}

/// Trapezoid-weighted inner product, antilinear in `u`.
pub fn inner(u: &GridFunction, v: &GridFunction) -> Result<C64> {
    u.grid.check_same(&v.grid)?;
    let w = u.grid.weights();
    Ok(w.iter()
        .zip(u.values.iter().zip(&v.values))
        .map(|(&wj, (a, b))| wj * (a.conj() * b))
        .sum())
}

/// Integral of `|u|²` over `|x| > r`.
pub fn tail_mass(u: &GridFunction, r: f64) -> Result<f64> {
    if !(0.0..=u.grid.half_width()).contains(&r) {
        return Err(Error::OutOfRange(format!(
            "tail radius {r} outside [0, {}]",
            u.grid.half_width()
        )));
    }
    let w = u.grid.tail_weights(r);
    Ok(w.iter()
        .zip(&u.values)
        .map(|(&wj, a)| wj * (a.conj() * a).re)
        .sum())
}
