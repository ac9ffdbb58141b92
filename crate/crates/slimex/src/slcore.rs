//! Semi-Lagrangian machinery: backward characteristic feet by staged
//! Runge-Kutta or Taylor expansion, and interpolation of a field at the feet.
//!
//! A transport by a signed interval `dt_l` with velocity `u` moves a profile
//! downstream: for constant `u` the foot of the cell at `x` is `x - u*dt_l`
//! and the transported field at `x` is the old field at that foot. Negative
//! `dt_l` transports upstream; composing the two recovers the original field
//! up to interpolation error (trajectory closure).

use crate::error::{Result, SimError};
use crate::gridfields::{build_spline, eval_spline_guarded, Grid1D, ScalarField};
use crate::spline::CubicSpline;
use crate::tableaux::ButcherPair;

/// Velocity field sampler, autonomous in time within a step.
#[derive(Debug, Clone)]
pub enum VelocitySampler {
    /// Constant velocity.
    Const(f64),
    /// `u(x) = k * x`.
    Linear { k: f64 },
    /// Spline through a cell-centered velocity field, frozen at a reference
    /// time; derivatives come from the spline.
    Discrete { spline: CubicSpline, grid: Grid1D },
}

impl VelocitySampler {
    pub fn from_field(u: &ScalarField) -> Result<VelocitySampler> {
        if !u.all_finite() {
            return Err(SimError::Numerical(
                "velocity field contains non-finite values".into(),
            ));
        }
        Ok(VelocitySampler::Discrete {
            spline: build_spline(u)?,
            grid: u.grid,
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            VelocitySampler::Const(c) => *c,
            VelocitySampler::Linear { k } => k * x,
            VelocitySampler::Discrete { spline, grid } => spline.eval(grid.wrap(x)),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match self {
            VelocitySampler::Const(_) => 0.0,
            VelocitySampler::Linear { k } => *k,
            VelocitySampler::Discrete { spline, grid } => spline.eval_deriv(grid.wrap(x)),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match self {
            VelocitySampler::Const(_) => 0.0,
            VelocitySampler::Linear { .. } => 0.0,
            VelocitySampler::Discrete { spline, grid } => spline.eval_deriv2(grid.wrap(x)),
        }
    }

    /// Largest |u| over the cell centers of `grid`.
    pub fn max_abs_on(&self, grid: &Grid1D) -> f64 {
        (0..grid.n_cells)
            .map(|i| self.value(grid.cell_center(i)).abs())
            .fold(0.0, f64::max)
    }
}

/// Characteristic feet for every cell over a signed trajectory interval.
///
/// `feet` are wrapped into the domain for interpolation; `displacement`
/// keeps the unwrapped travel `x_i - foot` for space-time integrals.
#[derive(Debug, Clone)]
pub struct FeetSet {
    pub grid: Grid1D,
    pub feet: Vec<f64>,
    pub displacement: Vec<f64>,
    pub dt_l: f64,
}

impl FeetSet {
    fn from_unwrapped(grid: Grid1D, unwrapped: Vec<f64>, dt_l: f64) -> Result<FeetSet> {
        let mut feet = Vec::with_capacity(unwrapped.len());
        let mut displacement = Vec::with_capacity(unwrapped.len());
        for (i, &xf) in unwrapped.iter().enumerate() {
            if !xf.is_finite() {
                return Err(SimError::Numerical(format!(
                    "trajectory foot of cell {i} is not finite"
                )));
            }
            displacement.push(grid.cell_center(i) - xf);
            feet.push(grid.wrap(xf));
        }
        Ok(FeetSet {
            grid,
            feet,
            displacement,
            dt_l,
        })
    }

    /// Unwrapped foot coordinate of cell `i`.
    #[inline]
    pub fn foot_unwrapped(&self, i: usize) -> f64 {
        self.grid.cell_center(i) - self.displacement[i]
    }
}

/// Stage positions and stage fluxes of the explicit tableau applied to the
/// trajectory equation over one interval. The stage flux is the negated
/// velocity at the stage position, so accumulating with any weight row gives
/// feet upstream of the cell centers.
pub struct TrajectoryStages {
    pub grid: Grid1D,
    pub dt_l: f64,
    /// `positions[i][cell]`: stage-i position of the trajectory from `cell`.
    pub positions: Vec<Vec<f64>>,
    /// `fluxes[i][cell] = -u(positions[i][cell])`.
    pub fluxes: Vec<Vec<f64>>,
}

impl TrajectoryStages {
    pub fn compute(
        tb: &ButcherPair,
        grid: Grid1D,
        dt_l: f64,
        u: &VelocitySampler,
    ) -> Result<TrajectoryStages> {
        let n = grid.n_cells;
        let s = tb.s;
        let centers = grid.centers();
        let mut positions: Vec<Vec<f64>> = Vec::with_capacity(s);
        let mut fluxes: Vec<Vec<f64>> = Vec::with_capacity(s);
        for i in 0..s {
            let mut pos = centers.clone();
            for j in 0..i {
                let w = tb.a_tilde[i][j];
                if w != 0.0 {
                    let fj = &fluxes[j];
                    for c in 0..n {
                        pos[c] += dt_l * w * fj[c];
                    }
                }
            }
            let mut flux = Vec::with_capacity(n);
            for c in 0..n {
                if !pos[c].is_finite() {
                    return Err(SimError::Numerical(format!(
                        "trajectory blow-up at cell {c}, stage {i}"
                    )));
                }
                flux.push(-u.value(pos[c]));
            }
            positions.push(pos);
            fluxes.push(flux);
        }
        Ok(TrajectoryStages {
            grid,
            dt_l,
            positions,
            fluxes,
        })
    }

    /// First-order feet over `tau` using the stage-`i` flux field.
    pub fn first_order_feet(&self, stage: usize, tau: f64) -> Result<FeetSet> {
        let n = self.grid.n_cells;
        let flux = &self.fluxes[stage];
        let unwrapped = (0..n)
            .map(|c| self.grid.cell_center(c) + tau * flux[c])
            .collect();
        FeetSet::from_unwrapped(self.grid, unwrapped, tau)
    }

    /// Feet from a weighted combination of the stage fluxes.
    pub fn feet_with_weights(&self, w: &[f64]) -> Result<FeetSet> {
        let n = self.grid.n_cells;
        let mut unwrapped = self.grid.centers();
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                let fj = &self.fluxes[j];
                for c in 0..n {
                    unwrapped[c] += self.dt_l * wj * fj[c];
                }
            }
        }
        FeetSet::from_unwrapped(self.grid, unwrapped, self.dt_l)
    }
}

/// Feet from the explicit tableau stages with the final weight vector `b`.
pub fn rk_feet(tb: &ButcherPair, grid: Grid1D, dt_l: f64, u: &VelocitySampler) -> Result<FeetSet> {
    TrajectoryStages::compute(tb, grid, dt_l, u)?.feet_with_weights(&tb.b)
}

/// Feet from a Taylor expansion of the backward trajectory with the velocity
/// frozen at the reference time:
/// `x - u*t + t^2/2 u u_x - t^3/6 u (u_x^2 + u u_xx)`, truncated at `order`.
pub fn taylor_feet(
    order: usize,
    grid: Grid1D,
    dt_l: f64,
    u: &VelocitySampler,
) -> Result<FeetSet> {
    if !(1..=3).contains(&order) {
        return Err(SimError::Config(format!(
            "taylor trajectory order must be 1..=3, got {order}"
        )));
    }
    let n = grid.n_cells;
    let mut unwrapped = Vec::with_capacity(n);
    for c in 0..n {
        let x = grid.cell_center(c);
        let uv = u.value(x);
        let mut foot = x - uv * dt_l;
        if order >= 2 {
            let ux = u.deriv(x);
            foot += 0.5 * dt_l * dt_l * uv * ux;
            if order >= 3 {
                let uxx = u.deriv2(x);
                foot -= dt_l * dt_l * dt_l / 6.0 * uv * (ux * ux + uv * uxx);
            }
        }
        unwrapped.push(foot);
    }
    FeetSet::from_unwrapped(grid, unwrapped, dt_l)
}

/// Interpolates `q` at the characteristic feet: the transported field.
pub fn sl_apply(q: &ScalarField, feet: &FeetSet) -> Result<ScalarField> {
    let sp = build_spline(q)?;
    let grid = &q.grid;
    let mut values = Vec::with_capacity(feet.feet.len());
    for &foot in &feet.feet {
        values.push(eval_spline_guarded(&sp, grid, foot)?);
    }
    Ok(ScalarField {
        grid: q.grid,
        values,
    })
}

/// Transport of `q` forward by `dt_l` along the RK trajectory of `u`.
pub fn transport(
    tb: &ButcherPair,
    q: &ScalarField,
    dt_l: f64,
    u: &VelocitySampler,
) -> Result<ScalarField> {
    if dt_l == 0.0 {
        return Ok(q.clone());
    }
    let feet = rk_feet(tb, q.grid, dt_l, u)?;
    sl_apply(q, &feet)
}

/// Max-norm defect of a forward-backward transport round trip.
pub fn closure_residual(
    tb: &ButcherPair,
    grid: Grid1D,
    dt_l: f64,
    u: &VelocitySampler,
    q: &ScalarField,
) -> Result<f64> {
    debug_assert_eq!(grid, q.grid);
    let forward = transport(tb, q, dt_l, u)?;
    let back = transport(tb, &forward, -dt_l, u)?;
    Ok(q.values
        .iter()
        .zip(&back.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridfields::BoundaryPolicy;
    use crate::tableaux::{make_tableau, SchemeId};

    fn pgrid(n: usize, a: f64, b: f64) -> Grid1D {
        Grid1D::new(a, b, n, BoundaryPolicy::Periodic).unwrap()
    }

    #[test]
    fn feet_are_centers_for_zero_velocity() {
        let g = pgrid(32, 0.0, 1.0);
        let tb = make_tableau(SchemeId::Sassp332);
        let feet = rk_feet(&tb, g, 0.3, &VelocitySampler::Const(0.0)).unwrap();
        for i in 0..32 {
            assert_eq!(feet.feet[i], g.cell_center(i));
        }
    }

    #[test]
    fn constant_velocity_feet_exact_for_every_tableau() {
        let g = pgrid(16, -1.0, 1.0);
        for id in SchemeId::ALL {
            let tb = make_tableau(id);
            let feet = rk_feet(&tb, g, 0.07, &VelocitySampler::Const(0.4)).unwrap();
            for i in 0..16 {
                let expected = g.cell_center(i) - 0.4 * 0.07;
                assert!((feet.foot_unwrapped(i) - expected).abs() < 1e-15, "{id:?}");
            }
        }
    }

    #[test]
    fn rk_feet_order_matches_tableau_on_linear_velocity() {
        // exact backward foot for u = k x over dt is x * exp(-k dt)
        let g = Grid1D::new(0.5, 2.5, 8, BoundaryPolicy::Extrapolate).unwrap();
        let u = VelocitySampler::Linear { k: 0.2 };
        for (id, p) in [
            (SchemeId::Sp111, 1.0),
            (SchemeId::Sassp332, 2.0),
            (SchemeId::Ssp3433, 3.0),
        ] {
            let tb = make_tableau(id);
            let mut errs = Vec::new();
            for lev in 0..4 {
                let dt = 0.8 / 2f64.powi(lev);
                let feet = rk_feet(&tb, g, dt, &u).unwrap();
                let emax = (0..8)
                    .map(|i| {
                        let x = g.cell_center(i);
                        (feet.foot_unwrapped(i) - x * (-0.2f64 * dt).exp()).abs()
                    })
                    .fold(0.0f64, f64::max);
                errs.push(emax);
            }
            for w in errs.windows(2) {
                let slope = (w[0] / w[1]).log2();
                assert!(slope > p - 0.2, "{id:?}: errs {errs:?}");
            }
        }
    }

    #[test]
    fn taylor_feet_match_definition_and_series() {
        let g = Grid1D::new(0.5, 2.5, 8, BoundaryPolicy::Extrapolate).unwrap();
        let u = VelocitySampler::Linear { k: 0.2 };
        let dt = 0.4;
        let f1 = taylor_feet(1, g, dt, &u).unwrap();
        for i in 0..8 {
            let x = g.cell_center(i);
            assert!((f1.foot_unwrapped(i) - (x - 0.2 * x * dt)).abs() < 1e-15);
        }
        // constant velocity: identical at all orders
        let c = VelocitySampler::Const(0.7);
        for ord in 1..=3 {
            let f = taylor_feet(ord, g, dt, &c).unwrap();
            for i in 0..8 {
                assert!((f.foot_unwrapped(i) - (g.cell_center(i) - 0.7 * dt)).abs() < 1e-15);
            }
        }
        // order 3 matches the exponential through the cubic term
        let f3 = taylor_feet(3, g, dt, &u).unwrap();
        for i in 0..8 {
            let x = g.cell_center(i);
            let k: f64 = 0.2;
            let series = x * (1.0 - k * dt + k * k * dt * dt / 2.0 - k * k * k * dt * dt * dt / 6.0);
            assert!((f3.foot_unwrapped(i) - series).abs() < 1e-13);
            let exact = x * (-k * dt).exp();
            assert!((f3.foot_unwrapped(i) - exact).abs() < x * (k * dt).powi(4));
        }
        assert!(taylor_feet(4, g, dt, &u).is_err());
    }

    #[test]
    fn sp111_rk_equals_taylor_order_one() {
        let g = pgrid(64, 0.0, 2.0);
        let n = g.n_cells;
        let uf = ScalarField::from_fn(g, |x| 0.3 + 0.1 * (std::f64::consts::PI * x).sin());
        let u = VelocitySampler::from_field(&uf).unwrap();
        let tb = make_tableau(SchemeId::Sp111);
        let a = rk_feet(&tb, g, 0.11, &u).unwrap();
        let b = taylor_feet(1, g, 0.11, &u).unwrap();
        for i in 0..n {
            assert_eq!(a.feet[i], b.feet[i]);
        }
    }

    #[test]
    fn sl_apply_identity_cases() {
        let g = pgrid(48, 0.0, 1.0);
        let q = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x).sin());
        let tb = make_tableau(SchemeId::Sassp332);
        // zero interval
        let same = transport(&tb, &q, 0.0, &VelocitySampler::Const(0.9)).unwrap();
        assert_eq!(same.values, q.values);
        // feet exactly at centers
        let feet = rk_feet(&tb, g, 0.5, &VelocitySampler::Const(0.0)).unwrap();
        let out = sl_apply(&q, &feet).unwrap();
        assert_eq!(out.values, q.values);
    }

    #[test]
    fn gaussian_shift_against_analytic_profile() {
        let g = pgrid(400, -2.0, 2.0);
        let q = ScalarField::from_fn(g, |x| (-30.0 * x * x).exp());
        let tb = make_tableau(SchemeId::Sassp332);
        let c = 0.37;
        let dt = 0.5;
        let moved = transport(&tb, &q, dt, &VelocitySampler::Const(c)).unwrap();
        let emax = (0..g.n_cells)
            .map(|i| {
                let x = g.cell_center(i) - c * dt;
                (moved.values[i] - (-30.0 * x * x).exp()).abs()
            })
            .fold(0.0f64, f64::max);
        assert!(emax < 2e-7, "emax {emax}");
    }

    #[test]
    fn sl_apply_is_linear_in_the_field() {
        let g = pgrid(64, 0.0, 1.0);
        let q1 = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x).sin());
        let q2 = ScalarField::from_fn(g, |x| (4.0 * std::f64::consts::PI * x).cos());
        let tb = make_tableau(SchemeId::Ssp3433);
        let feet = rk_feet(&tb, g, 0.21, &VelocitySampler::Const(0.53)).unwrap();
        let (alpha, beta) = (1.3, -0.4);
        let combo = ScalarField::new(
            g,
            (0..64).map(|i| alpha * q1.values[i] + beta * q2.values[i]).collect(),
        )
        .unwrap();
        let lhs = sl_apply(&combo, &feet).unwrap();
        let a = sl_apply(&q1, &feet).unwrap();
        let b = sl_apply(&q2, &feet).unwrap();
        for i in 0..64 {
            assert!((lhs.values[i] - alpha * a.values[i] - beta * b.values[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn closure_zero_velocity_is_exact() {
        let g = pgrid(32, 0.0, 1.0);
        let q = ScalarField::from_fn(g, |x| x * (1.0 - x));
        let tb = make_tableau(SchemeId::Sassp332);
        let r = closure_residual(&tb, g, 0.4, &VelocitySampler::Const(0.0), &q).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn closure_constant_velocity_round_trip_tiny() {
        let g = pgrid(2000, 0.0, 1.0);
        let q = ScalarField::from_fn(g, |x| (2.0 * std::f64::consts::PI * x).sin());
        let tb = make_tableau(SchemeId::Ssp3433);
        let r = closure_residual(&tb, g, 0.2, &VelocitySampler::Const(0.3), &q).unwrap();
        assert!(r <= 1e-12, "residual {r}");
    }

    #[test]
    fn closure_converges_at_tableau_order() {
        let g = Grid1D::new(0.5, 2.5, 2000, BoundaryPolicy::Extrapolate).unwrap();
        let q = ScalarField::from_fn(g, |x| (-8.0 * (x - 1.5) * (x - 1.5)).exp());
        let u = VelocitySampler::Linear { k: 0.2 };
        for (id, p) in [(SchemeId::Sassp332, 2.0), (SchemeId::Ssp3433, 3.0)] {
            let tb = make_tableau(id);
            let mut errs = Vec::new();
            for lev in 0..3 {
                let dt = 0.8 / 2f64.powi(lev);
                errs.push(closure_residual(&tb, g, dt, &u, &q).unwrap());
            }
            for w in errs.windows(2) {
                let slope = (w[0] / w[1]).log2();
                assert!(slope > p - 0.3, "{id:?}: errs {errs:?}");
            }
        }
    }
}
