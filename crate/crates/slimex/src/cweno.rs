//! Third-order central WENO reconstruction.
//!
//! Each cell gets a parabola blended from one central parabolic stencil and
//! two one-sided linear stencils with nonlinear weights, written in the local
//! coordinate `xi = (x - x_i) / dx`, `xi` in `[-1/2, 1/2]`. Cell values are
//! interpreted as cell averages; the `point_to_average` correction converts
//! cell-centered point values first when the conservative interpretation is
//! needed.

use crate::error::Result;
use crate::gridfields::{extend_with_ghosts, Grid1D, ScalarField};

/// Linear weights (central, left, right) of the blend.
pub const LINEAR_WEIGHTS: (f64, f64, f64) = (0.5, 0.25, 0.25);
/// Regularization of the smoothness indicators.
pub const WENO_EPS: f64 = 1e-6;

/// Parabola `p0 + p1*xi + p2*xi^2` attached to one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellPoly {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
}

impl CellPoly {
    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        self.p0 + xi * (self.p1 + xi * self.p2)
    }

    #[inline]
    pub fn eval_left(&self) -> f64 {
        self.eval(-0.5)
    }

    #[inline]
    pub fn eval_right(&self) -> f64 {
        self.eval(0.5)
    }

    /// Cell average over `xi` in `[-1/2, 1/2]`.
    #[inline]
    pub fn average(&self) -> f64 {
        self.p0 + self.p2 / 12.0
    }

    /// Antiderivative in `xi`, zero at `xi = 0`.
    #[inline]
    fn primitive(&self, xi: f64) -> f64 {
        xi * (self.p0 + xi * (self.p1 / 2.0 + xi * self.p2 / 3.0))
    }
}

/// Jiang-Shu smoothness of a parabola on the unit cell.
#[inline]
fn smoothness(p1: f64, p2: f64) -> f64 {
    p1 * p1 + 13.0 / 3.0 * p2 * p2
}

fn blend(qm: f64, q0: f64, qp: f64) -> CellPoly {
    let (dc, dl, dr) = LINEAR_WEIGHTS;
    // Candidate stencils, all with cell average q0.
    let opt = CellPoly {
        p2: 0.5 * (qp - 2.0 * q0 + qm),
        p1: 0.5 * (qp - qm),
        p0: q0 - (qp - 2.0 * q0 + qm) / 24.0,
    };
    let left = CellPoly {
        p0: q0,
        p1: q0 - qm,
        p2: 0.0,
    };
    let right = CellPoly {
        p0: q0,
        p1: qp - q0,
        p2: 0.0,
    };
    let central = CellPoly {
        p0: (opt.p0 - dl * left.p0 - dr * right.p0) / dc,
        p1: (opt.p1 - dl * left.p1 - dr * right.p1) / dc,
        p2: (opt.p2 - dl * left.p2 - dr * right.p2) / dc,
    };
    let isc = smoothness(central.p1, central.p2);
    let isl = smoothness(left.p1, 0.0);
    let isr = smoothness(right.p1, 0.0);
    let wc = dc / ((WENO_EPS + isc) * (WENO_EPS + isc));
    let wl = dl / ((WENO_EPS + isl) * (WENO_EPS + isl));
    let wr = dr / ((WENO_EPS + isr) * (WENO_EPS + isr));
    let sum = wc + wl + wr;
    let (wc, wl, wr) = (wc / sum, wl / sum, wr / sum);
    CellPoly {
        p0: wc * central.p0 + wl * left.p0 + wr * right.p0,
        p1: wc * central.p1 + wl * left.p1 + wr * right.p1,
        p2: wc * central.p2 + wl * left.p2 + wr * right.p2,
    }
}

/// Piecewise-parabolic reconstruction of a field, one polynomial per cell
/// plus one ghost polynomial on each side for interface states at the
/// domain boundary.
#[derive(Debug, Clone)]
pub struct CwenoReconstruction {
    pub grid: Grid1D,
    pub polys: Vec<CellPoly>,
    ghost_left: CellPoly,
    ghost_right: CellPoly,
}

/// Reconstructs treating `f.values` as cell averages.
pub fn cweno_reconstruct(f: &ScalarField) -> Result<CwenoReconstruction> {
    let n = f.grid.n_cells;
    let e = extend_with_ghosts(f, 2);
    let polys = (0..n).map(|i| blend(e[i + 1], e[i + 2], e[i + 3])).collect();
    Ok(CwenoReconstruction {
        grid: f.grid,
        polys,
        ghost_left: blend(e[0], e[1], e[2]),
        ghost_right: blend(e[n + 1], e[n + 2], e[n + 3]),
    })
}

/// Midpoint-to-average correction `q + dx^2/24 * q''` (second difference),
/// converting cell-centered point values to cell averages at fourth order.
pub fn point_to_average(f: &ScalarField) -> ScalarField {
    let n = f.grid.n_cells;
    let e = extend_with_ghosts(f, 1);
    let values = (0..n)
        .map(|i| f.values[i] + (e[i] - 2.0 * e[i + 1] + e[i + 2]) / 24.0)
        .collect();
    ScalarField {
        grid: f.grid,
        values,
    }
}

/// Reconstruction of cell-centered point values in the conservative
/// interpretation: convert to averages first, then blend.
pub fn cweno_conservative(f: &ScalarField) -> Result<CwenoReconstruction> {
    cweno_reconstruct(&point_to_average(f))
}

impl CwenoReconstruction {
    pub fn poly_value_left(&self, i: usize) -> f64 {
        self.polys[i].eval_left()
    }

    pub fn poly_value_right(&self, i: usize) -> f64 {
        self.polys[i].eval_right()
    }

    /// Derivative of the cell polynomial at the cell center.
    pub fn center_derivative(&self, i: usize) -> f64 {
        self.polys[i].p1 / self.grid.dx
    }

    /// Second derivative of the cell polynomial (constant per cell).
    pub fn center_second_derivative(&self, i: usize) -> f64 {
        2.0 * self.polys[i].p2 / (self.grid.dx * self.grid.dx)
    }

    /// Interface states at `i + 1/2` for `i = -1 .. n-1`: `minus[k]` is the
    /// state from the left cell, `plus[k]` from the right cell, `k = i + 1`.
    pub fn interface_states(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n_cells;
        let mut minus = Vec::with_capacity(n + 1);
        let mut plus = Vec::with_capacity(n + 1);
        minus.push(self.ghost_left.eval_right());
        for i in 0..n {
            minus.push(self.polys[i].eval_right());
        }
        for i in 0..n {
            plus.push(self.polys[i].eval_left());
        }
        plus.push(self.ghost_right.eval_left());
        (minus, plus)
    }

    /// Polynomial governing integer cell slot `k`, which may lie outside
    /// `0..n` for unwrapped coordinates: periodic slots wrap, extrapolating
    /// slots extend the boundary polynomial.
    fn resolve_slot(&self, k: i64) -> &CellPoly {
        let n = self.grid.n_cells as i64;
        let idx = match self.grid.boundary {
            crate::gridfields::BoundaryPolicy::Periodic => ((k % n) + n) % n,
            crate::gridfields::BoundaryPolicy::Extrapolate => k.clamp(0, n - 1),
        };
        &self.polys[idx as usize]
    }

    /// Exact integral of the piecewise reconstruction over `[a, b]`,
    /// antisymmetric in its bounds. Coordinates may be unwrapped; each cell
    /// segment is resolved through the boundary policy.
    pub fn poly_integrate(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if b < a {
            return -self.poly_integrate(b, a);
        }
        let g = &self.grid;
        let dx = g.dx;
        // Work in units of cells: slot k covers [k, k+1).
        let ua = (a - g.x_left) / dx;
        let ub = (b - g.x_left) / dx;
        let ka = ua.floor() as i64;
        let kb = ub.floor() as i64;
        let mut total = 0.0;
        for k in ka..=kb {
            let lo = ua.max(k as f64);
            let hi = ub.min((k + 1) as f64);
            if hi <= lo {
                continue;
            }
            let p = self.resolve_slot(k);
            let xi_lo = lo - k as f64 - 0.5;
            let xi_hi = hi - k as f64 - 0.5;
            total += dx * (p.primitive(xi_hi) - p.primitive(xi_lo));
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfields::{BoundaryPolicy, Grid1D};

    fn periodic_grid(n: usize, a: f64, b: f64) -> Grid1D {
        Grid1D::new(a, b, n, BoundaryPolicy::Periodic).unwrap()
    }

    #[test]
    fn constant_field_reproduced() {
        let g = periodic_grid(16, 0.0, 1.0);
        let f = ScalarField::from_fn(g, |_| 2.5);
        let r = cweno_reconstruct(&f).unwrap();
        for p in &r.polys {
            assert!((p.p0 - 2.5).abs() < 1e-14 && p.p1.abs() < 1e-14 && p.p2.abs() < 1e-14);
        }
        assert!((r.poly_value_left(3) - 2.5).abs() < 1e-14);
        assert!((r.poly_value_right(3) - 2.5).abs() < 1e-14);
    }

    #[test]
    fn linear_field_reproduced() {
        let g = Grid1D::new(0.0, 1.0, 20, BoundaryPolicy::Extrapolate).unwrap();
        let f = ScalarField::from_fn(g, |x| 3.0 * x - 1.0);
        let r = cweno_reconstruct(&f).unwrap();
        for (i, p) in r.polys.iter().enumerate() {
            let xc = g.cell_center(i);
            for xi in [-0.5, -0.2, 0.0, 0.4, 0.5] {
                let x = xc + xi * g.dx;
                assert!((p.eval(xi) - (3.0 * x - 1.0)).abs() < 1e-12);
            }
        }
        // linear f = x: right interface value is x_i + dx/2
        let f2 = ScalarField::from_fn(g, |x| x);
        let r2 = cweno_reconstruct(&f2).unwrap();
        for i in 0..20 {
            assert!((r2.poly_value_right(i) - (g.cell_center(i) + 0.5 * g.dx)).abs() < 1e-12);
        }
    }

    #[test]
    fn step_data_stays_in_range() {
        let g = Grid1D::new(-1.0, 1.0, 40, BoundaryPolicy::Extrapolate).unwrap();
        let f = ScalarField::from_fn(g, |x| if x < 0.0 { 1.0 } else { 0.0 });
        let r = cweno_reconstruct(&f).unwrap();
        let (minus, plus) = r.interface_states();
        for v in minus.iter().chain(plus.iter()) {
            assert!(*v >= -1e-12 && *v <= 1.0 + 1e-12, "interface value {v}");
        }
    }

    #[test]
    fn cell_average_is_conserved() {
        let g = periodic_grid(32, 0.0, 2.0);
        let f = ScalarField::from_fn(g, |x| (std::f64::consts::PI * x).sin() + 0.3);
        let r = cweno_reconstruct(&f).unwrap();
        for (i, p) in r.polys.iter().enumerate() {
            assert!((p.average() - f.values[i]).abs() < 1e-13, "cell {i}");
        }
        // and via the exact integral over each cell
        for i in [0usize, 7, 31] {
            let xl = g.x_left + i as f64 * g.dx;
            let integral = r.poly_integrate(xl, xl + g.dx);
            assert!((integral - f.values[i] * g.dx).abs() < 1e-12);
        }
    }

    #[test]
    fn interface_jumps_third_order_on_smooth_data() {
        let mut errs = Vec::new();
        for n in [50usize, 100, 200] {
            let g = periodic_grid(n, 0.0, 2.0 * std::f64::consts::PI);
            let f = ScalarField::from_fn(g, |x| x.sin());
            let r = cweno_reconstruct(&f).unwrap();
            let mut jump_max: f64 = 0.0;
            for i in 0..n {
                let j = (i + 1) % n;
                jump_max = jump_max.max((r.poly_value_right(i) - r.poly_value_left(j)).abs());
            }
            errs.push(jump_max);
        }
        assert!((errs[0] / errs[1]).log2() > 2.6, "errs {errs:?}");
        assert!((errs[1] / errs[2]).log2() > 2.6, "errs {errs:?}");
    }

    #[test]
    fn integrate_constant_and_linear() {
        let g = periodic_grid(50, 0.0, 1.0);
        let c = ScalarField::from_fn(g, |_| 4.0);
        let rc = cweno_reconstruct(&c).unwrap();
        assert!((rc.poly_integrate(0.13, 0.77) - 4.0 * 0.64).abs() < 1e-12);
        assert!(rc.poly_integrate(0.4, 0.4) == 0.0);
        assert!((rc.poly_integrate(0.7, 0.2) + rc.poly_integrate(0.2, 0.7)).abs() < 1e-14);

        let gl = Grid1D::new(0.0, 1.0, 200, BoundaryPolicy::Extrapolate).unwrap();
        let lin = ScalarField::from_fn(gl, |x| x);
        let rl = cweno_reconstruct(&lin).unwrap();
        assert!((rl.poly_integrate(0.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn integrate_wraps_periodically() {
        let g = periodic_grid(64, 0.0, 1.0);
        let f = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x).cos() + 2.0);
        let r = cweno_reconstruct(&f).unwrap();
        // interval crossing the right boundary, expressed unwrapped
        let i1 = r.poly_integrate(0.9, 1.1);
        let i2 = r.poly_integrate(0.9, 1.0) + r.poly_integrate(0.0, 0.1);
        assert!((i1 - i2).abs() < 1e-10, "{i1} vs {i2}");
    }

    #[test]
    fn point_to_average_correction_is_second_difference() {
        let g = periodic_grid(64, 0.0, 1.0);
        let f = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x).sin());
        let avg = point_to_average(&f);
        // exact cell average of sin is sin(x_i) * sinc(pi dx)
        let k = 2.0 * std::f64::consts::PI;
        let factor = (k * g.dx / 2.0).sin() / (k * g.dx / 2.0);
        for i in 0..64 {
            let exact = (k * g.cell_center(i)).sin() * factor;
            assert!((avg.values[i] - exact).abs() < 1e-6, "cell {i}");
        }
    }
}
