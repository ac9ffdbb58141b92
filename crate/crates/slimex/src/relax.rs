//! Asymptotic-preserving variants for the shallow water equations with a
//! stiff relaxation source `h/eps (h/2 - u)`.
//!
//! The source is discretized implicitly through the semi-implicit product of
//! the known and unknown depth, so every stage stays a linear solve. All
//! stiffness parameters enter only through the grouped ratios
//! `eps/(eps + a_ii dt)` and `a_ii dt/(eps + a_ii dt)`, which stay bounded
//! down to vanishing `eps`. In that limit the depth update degenerates to a
//! semi-implicit discretization of the inviscid Burgers equation and the
//! velocity relaxes to `h/2`.

use crate::error::{Result, SimError};
use crate::gridfields::ScalarField;
use crate::krylov::{solve_auto, DEFAULT_TOL};
use crate::swe::{
    conservative_f, conservative_h, interface_max, step_engine, ContinuityMode, EngineConfig,
    SourceMode, StepInfo, SweOptions, SWEState,
};
use crate::cweno::cweno_conservative;
use crate::slcore::{taylor_feet, VelocitySampler};
use crate::tableaux::ButcherPair;

/// Relaxation configuration.
#[derive(Debug, Clone, Copy)]
pub struct RelaxOptions {
    /// Relaxation time, positive; values down to 1e-14 are supported.
    pub epsilon: f64,
    /// Use the low-Froude scaling where the pressure coefficient is
    /// `1/(2 eps)` instead of `g/2`.
    pub froude_scaling: bool,
}

impl RelaxOptions {
    pub fn new(epsilon: f64) -> Result<RelaxOptions> {
        if !(epsilon > 0.0) {
            return Err(SimError::Config(format!(
                "relaxation parameter must be positive, got {epsilon}"
            )));
        }
        Ok(RelaxOptions {
            epsilon,
            froude_scaling: false,
        })
    }

    /// `gamma = (eps + dt)/eps`; kept for diagnostics, the schemes use the
    /// grouped inverse.
    pub fn gamma(&self, dt: f64) -> f64 {
        (self.epsilon + dt) / self.epsilon
    }
}

/// Hybrid scheme with the implicit relaxation source.
pub fn slimexh_ap_step(
    state: &SWEState,
    dt: f64,
    tb: &ButcherPair,
    relax: &RelaxOptions,
    options: &SweOptions,
) -> Result<(SWEState, StepInfo)> {
    step_engine(
        state,
        dt,
        tb,
        &EngineConfig {
            continuity: ContinuityMode::Hybrid,
            source: SourceMode::Relaxation {
                epsilon: relax.epsilon,
            },
            options: *options,
        },
    )
}

/// Fully semi-Lagrangian scheme with the implicit relaxation source.
pub fn slimex_ap_step(
    state: &SWEState,
    dt: f64,
    tb: &ButcherPair,
    relax: &RelaxOptions,
    options: &SweOptions,
) -> Result<(SWEState, StepInfo)> {
    step_engine(
        state,
        dt,
        tb,
        &EngineConfig {
            continuity: ContinuityMode::TransportH,
            source: SourceMode::Relaxation {
                epsilon: relax.epsilon,
            },
            options: *options,
        },
    )
}

/// First-order step of the low-Froude-scaled relaxation system, where the
/// pressure gradient carries `1/(2 eps)`. Substituting the momentum into the
/// continuity equation yields one linear solve whose vanishing-`eps` limit is
/// an implicit discretization of the viscous Burgers equation.
pub fn low_froude_step(
    state: &SWEState,
    dt: f64,
    relax: &RelaxOptions,
) -> Result<(SWEState, StepInfo)> {
    if !relax.froude_scaling {
        return Err(SimError::Config(
            "low-froude step requires froude_scaling".into(),
        ));
    }
    if !(dt > 0.0) {
        return Err(SimError::Config(format!("time step must be positive, got {dt}")));
    }
    state.check_finite("low-froude input")?;
    state.check_positive_depth("low-froude input")?;
    let grid = state.grid();
    let n = grid.n_cells;
    let eps = relax.epsilon;
    let mut info = StepInfo::default();

    // Conservative transport of the momentum over the step.
    let u_field = state.velocity()?;
    let u = VelocitySampler::from_field(&u_field)?;
    let feet = taylor_feet(1, grid, dt, &u)?;
    let speeds = interface_max(&u_field);
    let v_recon = cweno_conservative(&state.v)?;
    let h_int = conservative_h(&v_recon, &feet, None);
    let f_field = conservative_f(&state.v, &h_int, &speeds, dt)?;

    // Depth solve: grouped coefficients stay bounded as eps -> 0, where the
    // system becomes h - dt/2 * d2(h^n h)/dx2 = h^n - dt * d(h^n h / 2)/dx.
    let inv_gamma = eps / (eps + dt);
    let coef = dt * dt / (2.0 * (eps + dt));
    let grad_f = grid_dx(grid, &f_field.values);
    let rhs: Vec<f64> = (0..n)
        .map(|i| state.h.values[i] - dt * inv_gamma * grad_f[i])
        .collect();
    let op = LowFroudeOp {
        grid,
        hn: &state.h.values,
        coef,
    };
    let (h_new, stats) = solve_auto(&op, &rhs, DEFAULT_TOL)?;
    info.solver_iterations += stats.iterations;

    let hx: Vec<f64> = (0..n).map(|i| state.h.values[i] * h_new[i]).collect();
    let grad = grid_dx(grid, &hx);
    let sg = dt / (eps + dt);
    let v_new: Vec<f64> = (0..n)
        .map(|i| inv_gamma * f_field.values[i] - sg * 0.5 * grad[i] + sg * 0.5 * hx[i])
        .collect();

    let next = SWEState {
        h: ScalarField {
            grid,
            values: h_new,
        },
        v: ScalarField {
            grid,
            values: v_new,
        },
    };
    next.check_finite("low-froude output")?;
    next.check_positive_depth("low-froude output")?;
    Ok((next, info))
}

fn grid_dx(grid: crate::gridfields::Grid1D, vals: &[f64]) -> Vec<f64> {
    let f = ScalarField {
        grid,
        values: vals.to_vec(),
    };
    crate::gridfields::fd_dx(&f).unwrap().values
}

struct LowFroudeOp<'a> {
    grid: crate::gridfields::Grid1D,
    hn: &'a [f64],
    coef: f64,
}

impl crate::krylov::LinearOperator for LowFroudeOp<'_> {
    fn len(&self) -> usize {
        self.grid.n_cells
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.n_cells;
        let hx: Vec<f64> = (0..n).map(|i| self.hn[i] * x[i]).collect();
        let f = ScalarField {
            grid: self.grid,
            values: hx,
        };
        let lap = crate::gridfields::fd_dxx(&f).unwrap().values;
        let adv = crate::gridfields::fd_dx(&f).unwrap().values;
        for i in 0..n {
            out[i] = x[i] - self.coef * lap[i] + self.coef * adv[i];
        }
    }
    fn symmetric_expected(&self) -> bool {
        false
    }
}
