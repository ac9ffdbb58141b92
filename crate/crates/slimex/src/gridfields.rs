//! Uniform cell-centered 1-D grid, scalar fields and fourth-order
//! finite-difference operators.

use crate::error::{Result, SimError};
use crate::spline::{CubicSpline, SplineEnd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPolicy {
    Periodic,
    /// Ghost values extend the boundary data polynomially (degree 3), and
    /// out-of-domain interpolation queries evaluate the boundary cubic.
    Extrapolate,
}

/// Uniform grid of `n_cells` cells on `[x_left, x_right]` with centers at
/// `x_left + (i + 1/2) dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_left: f64,
    pub x_right: f64,
    pub n_cells: usize,
    pub dx: f64,
    pub boundary: BoundaryPolicy,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize, boundary: BoundaryPolicy) -> Result<Grid1D> {
        if n_cells < 5 {
            return Err(SimError::Config(format!(
                "grid needs at least 5 cells, got {n_cells}"
            )));
        }
        let dx = (x_right - x_left) / n_cells as f64;
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(SimError::Config(format!(
                "invalid domain [{x_left}, {x_right}]"
            )));
        }
        Ok(Grid1D {
            x_left,
            x_right,
            n_cells,
            dx,
            boundary,
        })
    }

    #[inline]
    pub fn cell_center(&self, i: usize) -> f64 {
        self.x_left + (i as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.cell_center(i)).collect()
    }

    #[inline]
    pub fn span(&self) -> f64 {
        self.x_right - self.x_left
    }

    /// Wraps a coordinate into `[x_left, x_right)` for periodic domains;
    /// identity otherwise.
    #[inline]
    pub fn wrap(&self, x: f64) -> f64 {
        match self.boundary {
            BoundaryPolicy::Periodic => {
                let span = self.span();
                let mut rel = (x - self.x_left) % span;
                if rel < 0.0 {
                    rel += span;
                }
                self.x_left + rel
            }
            BoundaryPolicy::Extrapolate => x,
        }
    }
}

/// Cell-centered values of one scalar quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.n_cells {
            return Err(SimError::Config(format!(
                "field length {} does not match grid with {} cells",
                values.len(),
                grid.n_cells
            )));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> ScalarField {
        let values = (0..grid.n_cells).map(|i| f(grid.cell_center(i))).collect();
        ScalarField { grid, values }
    }

    pub fn zeros(grid: Grid1D) -> ScalarField {
        ScalarField {
            grid,
            values: vec![0.0; grid.n_cells],
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// First cell index holding a non-finite value, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Values extended by `g` ghost cells on each side per boundary policy.
/// Extrapolation ghosts null the fourth difference, so data that is cubic
/// near the boundary extends exactly.
pub fn extend_with_ghosts(f: &ScalarField, g: usize) -> Vec<f64> {
    let n = f.grid.n_cells;
    let v = &f.values;
    let mut out = vec![0.0; n + 2 * g];
    out[g..g + n].copy_from_slice(v);
    match f.grid.boundary {
        BoundaryPolicy::Periodic => {
            for k in 0..g {
                out[g - 1 - k] = v[(2 * n - 1 - k) % n];
                out[g + n + k] = v[k % n];
            }
        }
        BoundaryPolicy::Extrapolate => {
            for k in 0..g {
                let r = g + n + k;
                out[r] = 4.0 * out[r - 1] - 6.0 * out[r - 2] + 4.0 * out[r - 3] - out[r - 4];
                let l = g - 1 - k;
                out[l] = 4.0 * out[l + 1] - 6.0 * out[l + 2] + 4.0 * out[l + 3] - out[l + 4];
            }
        }
    }
    out
}

/// Fourth-order first derivative, `(-q_{i+2} + 8 q_{i+1} - 8 q_{i-1} + q_{i-2}) / (12 dx)`.
pub fn fd_dx(f: &ScalarField) -> Result<ScalarField> {
    let n = f.grid.n_cells;
    if n < 5 {
        return Err(SimError::Config("fd_dx needs at least 5 cells".into()));
    }
    let e = extend_with_ghosts(f, 2);
    let inv = 1.0 / (12.0 * f.grid.dx);
    let values = (0..n)
        .map(|i| {
            let k = i + 2;
            (-e[k + 2] + 8.0 * e[k + 1] - 8.0 * e[k - 1] + e[k - 2]) * inv
        })
        .collect();
    Ok(ScalarField {
        grid: f.grid,
        values,
    })
}

/// Fourth-order second derivative,
/// `(-q_{i+2} + 16 q_{i+1} - 30 q_i + 16 q_{i-1} - q_{i-2}) / (12 dx^2)`.
pub fn fd_dxx(f: &ScalarField) -> Result<ScalarField> {
    let n = f.grid.n_cells;
    if n < 5 {
        return Err(SimError::Config("fd_dxx needs at least 5 cells".into()));
    }
    let e = extend_with_ghosts(f, 2);
    let inv = 1.0 / (12.0 * f.grid.dx * f.grid.dx);
    let values = (0..n)
        .map(|i| {
            let k = i + 2;
            (-e[k + 2] + 16.0 * e[k + 1] - 30.0 * e[k] + 16.0 * e[k - 1] - e[k - 2]) * inv
        })
        .collect();
    Ok(ScalarField {
        grid: f.grid,
        values,
    })
}

/// Fraction of the domain span a query may leave the domain by before the
/// extrapolating spline refuses it.
pub const EXTRAPOLATION_GUARD: f64 = 0.25;

/// Cubic spline through the cell-center values of `f`, with the closure
/// matching the grid's boundary policy.
pub fn build_spline(f: &ScalarField) -> Result<CubicSpline> {
    let end = match f.grid.boundary {
        BoundaryPolicy::Periodic => SplineEnd::Periodic,
        BoundaryPolicy::Extrapolate => SplineEnd::NotAKnot,
    };
    CubicSpline::fit(f.grid.cell_center(0), f.grid.dx, &f.values, end)
}

/// Interpolates `f` at the query points. Periodic queries wrap; extrapolating
/// queries may leave the domain up to the guard fraction of the span.
pub fn spline_interpolate(f: &ScalarField, query_points: &[f64]) -> Result<Vec<f64>> {
    let sp = build_spline(f)?;
    let grid = &f.grid;
    let mut out = Vec::with_capacity(query_points.len());
    for &q in query_points {
        out.push(eval_spline_guarded(&sp, grid, q)?);
    }
    Ok(out)
}

pub fn eval_spline_guarded(sp: &CubicSpline, grid: &Grid1D, q: f64) -> Result<f64> {
    match grid.boundary {
        BoundaryPolicy::Periodic => Ok(sp.eval(grid.wrap(q))),
        BoundaryPolicy::Extrapolate => {
            let slack = EXTRAPOLATION_GUARD * grid.span();
            if q < grid.x_left - slack || q > grid.x_right + slack {
                return Err(SimError::Numerical(format!(
                    "interpolation query {q} too far outside [{}, {}]",
                    grid.x_left, grid.x_right
                )));
            }
            Ok(sp.eval(q))
        }
    }
}
