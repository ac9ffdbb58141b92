//! Conservative semi-Lagrangian IMEX schemes for the one-dimensional
//! shallow water equations.
//!
//! The momentum advection is integrated over the space-time volume swept by
//! each backward characteristic, which turns the flux time integral into a
//! spatial integral of the reconstruction from the foot to the cell center,
//! corrected by the pressure integral along the moving foot. Pressure
//! gradients are discretized semi-implicitly, producing one linear solve per
//! implicit stage; the continuity equation is either implicit in the
//! momentum divergence (hybrid variant) or transported conservatively itself
//! (fully semi-Lagrangian variant).

use crate::cweno::{cweno_conservative, CwenoReconstruction};
use crate::error::{Result, SimError};
use crate::gridfields::{extend_with_ghosts, BoundaryPolicy, Grid1D, ScalarField};
use crate::krylov::{solve_auto, LinearOperator, SolverKind, DEFAULT_TOL};
use crate::slcore::{taylor_feet, FeetSet, VelocitySampler};
use crate::spline::CubicSpline;
use crate::tableaux::ButcherPair;

pub const GRAVITY: f64 = 9.81;

/// Depth floor below which a state counts as dry and the run aborts.
pub const H_FLOOR: f64 = 1e-12;

/// Water depth `h` and momentum `V = h u` on a shared grid.
#[derive(Debug, Clone)]
pub struct SWEState {
    pub h: ScalarField,
    pub v: ScalarField,
}

impl SWEState {
    pub fn new(h: ScalarField, v: ScalarField) -> Result<SWEState> {
        if h.grid != v.grid {
            return Err(SimError::Config("h and V live on different grids".into()));
        }
        Ok(SWEState { h, v })
    }

    pub fn grid(&self) -> Grid1D {
        self.h.grid
    }

    /// Pointwise velocity `V / h`, failing on dry cells.
    pub fn velocity(&self) -> Result<ScalarField> {
        let mut values = Vec::with_capacity(self.h.values.len());
        for (i, (&h, &v)) in self.h.values.iter().zip(&self.v.values).enumerate() {
            if h < H_FLOOR {
                return Err(SimError::Numerical(format!(
                    "dry state: h = {h:.3e} at cell {i}"
                )));
            }
            values.push(v / h);
        }
        Ok(ScalarField {
            grid: self.h.grid,
            values,
        })
    }

    /// Largest `|u| + sqrt(g h)` over the cells.
    pub fn max_wave_speed(&self) -> f64 {
        self.h
            .values
            .iter()
            .zip(&self.v.values)
            .map(|(&h, &v)| (v / h).abs() + (GRAVITY * h.max(0.0)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if let Some(i) = self.h.first_non_finite() {
            return Err(SimError::Numerical(format!(
                "{what}: h not finite at cell {i}"
            )));
        }
        if let Some(i) = self.v.first_non_finite() {
            return Err(SimError::Numerical(format!(
                "{what}: V not finite at cell {i}"
            )));
        }
        Ok(())
    }

    pub fn check_positive_depth(&self, what: &str) -> Result<()> {
        for (i, &h) in self.h.values.iter().enumerate() {
            if !(h > 0.0) {
                return Err(SimError::Numerical(format!(
                    "{what}: non-positive depth {h:.3e} at cell {i}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-cell Taylor coefficients of the depth in time, built by trading time
/// derivatives for space derivatives through the governing equations.
#[derive(Debug, Clone)]
pub struct CKSeries {
    pub grid: Grid1D,
    pub h0: Vec<f64>,
    pub dht: Vec<f64>,
    pub d2ht: Vec<f64>,
    /// Horizon for clamping evaluation times.
    pub tau_max: f64,
}

impl CKSeries {
    /// Series with vanishing time derivatives (depth held fixed).
    pub fn frozen(h: &ScalarField, tau_max: f64) -> CKSeries {
        CKSeries {
            grid: h.grid,
            h0: h.values.clone(),
            dht: vec![0.0; h.values.len()],
            d2ht: vec![0.0; h.values.len()],
            tau_max,
        }
    }

    /// Cellwise depth at `t^n + tau`.
    pub fn h_at(&self, tau: f64) -> Vec<f64> {
        (0..self.h0.len())
            .map(|i| self.h0[i] + tau * self.dht[i] + 0.5 * tau * tau * self.d2ht[i])
            .collect()
    }

    fn clamp_tau(&self, tau: f64) -> f64 {
        if tau < 0.0 || tau > self.tau_max {
            static WARNED: std::sync::atomic::AtomicBool = std::sync::atomic::AtomicBool::new(false);
            if !WARNED.swap(true, std::sync::atomic::Ordering::Relaxed) {
                eprintln!("warning: depth series evaluated outside its horizon; clamping");
            }
            tau.clamp(0.0, self.tau_max)
        } else {
            tau
        }
    }

    /// Spline through the cellwise depth at `t^n + tau`.
    pub fn depth_spline(&self, tau: f64) -> Result<CubicSpline> {
        let tau = self.clamp_tau(tau);
        let field = ScalarField {
            grid: self.grid,
            values: self.h_at(tau),
        };
        crate::gridfields::build_spline(&field)
    }
}

/// Depth Taylor series from the state at `t^n`: the first time derivative is
/// the momentum divergence from the reconstruction, the second comes from the
/// reconstructed momentum flux `u V + g h^2 / 2`.
pub fn ck_predictor(state: &SWEState) -> Result<CKSeries> {
    let grid = state.grid();
    let n = grid.n_cells;
    let u = state.velocity()?;
    let rv = cweno_conservative(&state.v)?;
    let dht: Vec<f64> = (0..n).map(|i| -rv.center_derivative(i)).collect();
    let flux = ScalarField {
        grid,
        values: (0..n)
            .map(|i| {
                u.values[i] * state.v.values[i] + 0.5 * GRAVITY * state.h.values[i] * state.h.values[i]
            })
            .collect(),
    };
    let rg = cweno_conservative(&flux)?;
    let d2ht: Vec<f64> = (0..n).map(|i| rg.center_second_derivative(i)).collect();
    Ok(CKSeries {
        grid,
        h0: state.h.values.clone(),
        dht,
        d2ht,
        tau_max: f64::INFINITY,
    })
}

/// Squared depth at `(x_query, t^n + tau)`: the cellwise series evaluated at
/// `tau`, interpolated in space, then squared.
pub fn eval_h_squared(series: &CKSeries, tau: f64, x_query: f64) -> Result<f64> {
    let sp = series.depth_spline(tau)?;
    let v = crate::gridfields::eval_spline_guarded(&sp, &series.grid, x_query)?;
    Ok(v * v)
}

/// Quadrature rule for the pressure integral along the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureRule {
    /// Second-order midpoint rule.
    Midpoint,
    /// Fourth-order three-node rule.
    Kepler,
    /// Omit the integral (first-order behavior on non-constant states).
    Off,
}

impl PressureRule {
    /// Default rule for a tableau: the three-node rule from third order up.
    pub fn for_tableau(tb: &ButcherPair) -> PressureRule {
        if tb.order_p >= 3 {
            PressureRule::Kepler
        } else {
            PressureRule::Midpoint
        }
    }
}

/// Foot positions of the characteristic arriving at each cell center, at the
/// quadrature times of a step: `full` at `t^n` and `half` at `t^{n+1/2}`.
pub struct PressurePath {
    pub full: FeetSet,
    pub half: FeetSet,
    pub dt: f64,
}

/// Pressure integral per cell,
/// `g/2 * integral of h^2(x_i, t) - h^2(x^L(t), t) over the step`.
pub fn pressure_integral(
    series: &CKSeries,
    path: &PressurePath,
    rule: PressureRule,
) -> Result<ScalarField> {
    let grid = series.grid;
    let n = grid.n_cells;
    let dt = path.dt;
    let mut p = vec![0.0; n];
    match rule {
        PressureRule::Off => {}
        PressureRule::Midpoint => {
            let h_half = series.h_at(0.5 * dt);
            let sp = series.depth_spline(0.5 * dt)?;
            for i in 0..n {
                let at_center = h_half[i] * h_half[i];
                let hf = crate::gridfields::eval_spline_guarded(&sp, &grid, path.half.feet[i])?;
                p[i] = 0.5 * GRAVITY * dt * (at_center - hf * hf);
            }
        }
        PressureRule::Kepler => {
            // Node at t^{n+1} vanishes: the foot there is the cell center.
            let h_0 = series.h_at(0.0);
            let sp0 = series.depth_spline(0.0)?;
            let h_half = series.h_at(0.5 * dt);
            let sph = series.depth_spline(0.5 * dt)?;
            for i in 0..n {
                let f0 = crate::gridfields::eval_spline_guarded(&sp0, &grid, path.full.feet[i])?;
                let term0 = h_0[i] * h_0[i] - f0 * f0;
                let fh = crate::gridfields::eval_spline_guarded(&sph, &grid, path.half.feet[i])?;
                let termh = h_half[i] * h_half[i] - fh * fh;
                p[i] = 0.5 * GRAVITY * dt * (term0 / 6.0 + 2.0 * termh / 3.0);
            }
        }
    }
    Ok(ScalarField { grid, values: p })
}

/// Space-time flux integral per cell: the exact integral of the
/// reconstruction from the foot to the cell center, minus the pressure
/// integral when one applies (momentum equation only).
pub fn conservative_h(
    recon: &CwenoReconstruction,
    feet: &FeetSet,
    pressure: Option<&ScalarField>,
) -> ScalarField {
    let grid = recon.grid;
    let n = grid.n_cells;
    let values = (0..n)
        .map(|i| {
            let integral = recon.poly_integrate(feet.foot_unwrapped(i), grid.cell_center(i));
            match pressure {
                Some(p) => integral - p.values[i],
                None => integral,
            }
        })
        .collect();
    ScalarField { grid, values }
}

/// Largest of a cellwise speed on the two cells adjacent to each interface;
/// `out[k]` belongs to the interface between cells `k-1` and `k`.
pub fn interface_max(cell_speed: &ScalarField) -> Vec<f64> {
    let n = cell_speed.grid.n_cells;
    let e = extend_with_ghosts(cell_speed, 1);
    (0..=n).map(|k| e[k].abs().max(e[k + 1].abs())).collect()
}

/// Conservative update operator: local Lax-Friedrichs interface fluxes of the
/// reconstructed flux integrals, dissipating on the transported quantity with
/// the supplied interface speeds. `dt_scale` carries the time length of the
/// flux integral so the dissipation has matching units.
pub fn conservative_f(
    q_n: &ScalarField,
    h_int: &ScalarField,
    dissipation_speed: &[f64],
    dt_scale: f64,
) -> Result<ScalarField> {
    let grid = q_n.grid;
    let n = grid.n_cells;
    let rh = cweno_conservative(h_int)?;
    let rq = cweno_conservative(q_n)?;
    let (h_minus, h_plus) = rh.interface_states();
    let (q_minus, q_plus) = rq.interface_states();
    let flux: Vec<f64> = (0..=n)
        .map(|k| {
            0.5 * (h_minus[k] + h_plus[k])
                - 0.5 * dissipation_speed[k] * dt_scale * (q_plus[k] - q_minus[k])
        })
        .collect();
    let values = (0..n)
        .map(|i| q_n.values[i] - (flux[i + 1] - flux[i]) / grid.dx)
        .collect();
    Ok(ScalarField { grid, values })
}

/// Options of one shallow water step.
#[derive(Debug, Clone, Copy)]
pub struct SweOptions {
    pub pressure: PressureRule,
    pub viscosity: bool,
    /// Balance the continuity equation with an implicit source equal to the
    /// momentum divergence, freezing the depth exactly.
    pub steady_source: bool,
}

impl SweOptions {
    pub fn for_tableau(tb: &ButcherPair) -> SweOptions {
        SweOptions {
            pressure: PressureRule::for_tableau(tb),
            viscosity: false,
            steady_source: false,
        }
    }
}

/// Which continuity discretization the stage engine runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ContinuityMode {
    /// Implicit momentum divergence; pressure solve couples h and V.
    Hybrid,
    /// Conservative semi-Lagrangian transport of the depth itself.
    TransportH,
}

/// Algebraic form of the relaxation source, if any.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SourceMode {
    None,
    /// `h/eps (h/2 - u)` treated implicitly, with the pressure coefficient
    /// `g/2` of the unscaled system.
    Relaxation { epsilon: f64 },
}

/// Counters reported by one step.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepInfo {
    pub solver_iterations: usize,
    pub solver_fallbacks: usize,
}

pub(crate) struct EngineConfig {
    pub continuity: ContinuityMode,
    pub source: SourceMode,
    pub options: SweOptions,
}

struct StageOp<'a> {
    grid: Grid1D,
    he: &'a [f64],
    lap_coef: f64,
    adv_coef: f64,
    visc: Option<(f64, &'a [f64])>,
}

fn lap4(grid: Grid1D, vals: &[f64]) -> Vec<f64> {
    let f = ScalarField {
        grid,
        values: vals.to_vec(),
    };
    let e = extend_with_ghosts(&f, 2);
    let inv = 1.0 / (12.0 * grid.dx * grid.dx);
    (0..grid.n_cells)
        .map(|i| {
            let k = i + 2;
            (-e[k + 2] + 16.0 * e[k + 1] - 30.0 * e[k] + 16.0 * e[k - 1] - e[k - 2]) * inv
        })
        .collect()
}

fn dx4(grid: Grid1D, vals: &[f64]) -> Vec<f64> {
    let f = ScalarField {
        grid,
        values: vals.to_vec(),
    };
    let e = extend_with_ghosts(&f, 2);
    let inv = 1.0 / (12.0 * grid.dx);
    (0..grid.n_cells)
        .map(|i| {
            let k = i + 2;
            (-e[k + 2] + 8.0 * e[k + 1] - 8.0 * e[k - 1] + e[k - 2]) * inv
        })
        .collect()
}

/// Interface-jump dissipation `d_i = [lam_{i+1/2}(x_{i+1}-x_i) - lam_{i-1/2}(x_i-x_{i-1})]/dx`
/// with jump-free ghost closure, so the total is conserved exactly.
fn jump_dissipation(grid: Grid1D, lam: &[f64], x: &[f64]) -> Vec<f64> {
    let n = grid.n_cells;
    let jump = |k: usize| -> f64 {
        // jump across interface k (between cells k-1 and k)
        match grid.boundary {
            BoundaryPolicy::Periodic => x[k % n] - x[(k + n - 1) % n],
            BoundaryPolicy::Extrapolate => {
                if k == 0 || k == n {
                    0.0
                } else {
                    x[k] - x[k - 1]
                }
            }
        }
    };
    (0..n)
        .map(|i| (lam[i + 1] * jump(i + 1) - lam[i] * jump(i)) / grid.dx)
        .collect()
}

impl LinearOperator for StageOp<'_> {
    fn len(&self) -> usize {
        self.grid.n_cells
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.grid.n_cells;
        let hex: Vec<f64> = (0..n).map(|i| self.he[i] * x[i]).collect();
        let lap = lap4(self.grid, &hex);
        for i in 0..n {
            out[i] = x[i] - self.lap_coef * lap[i];
        }
        if self.adv_coef != 0.0 {
            let adv = dx4(self.grid, &hex);
            for i in 0..n {
                out[i] += self.adv_coef * adv[i];
            }
        }
        if let Some((vc, lam)) = self.visc {
            let d = jump_dissipation(self.grid, lam, x);
            for i in 0..n {
                out[i] -= vc * d[i];
            }
        }
    }
    fn symmetric_expected(&self) -> bool {
        self.adv_coef == 0.0
    }
}

fn combine(base: &[f64], dt: f64, weights: &[f64], stages: &[Vec<f64>]) -> Vec<f64> {
    let mut out = base.to_vec();
    for (j, &w) in weights.iter().enumerate() {
        if w != 0.0 && j < stages.len() {
            let k = &stages[j];
            for i in 0..out.len() {
                out[i] += dt * w * k[i];
            }
        }
    }
    out
}

/// One step of the conservative stage engine shared by the plain and
/// relaxation schemes.
pub(crate) fn step_engine(
    state: &SWEState,
    dt: f64,
    tb: &ButcherPair,
    cfg: &EngineConfig,
) -> Result<(SWEState, StepInfo)> {
    if !(dt > 0.0) {
        return Err(SimError::Config(format!("time step must be positive, got {dt}")));
    }
    state.check_finite("step input")?;
    state.check_positive_depth("step input")?;
    let grid = state.grid();
    let n = grid.n_cells;
    let opts = cfg.options;
    let mut info = StepInfo::default();

    let u_field = state.velocity()?;
    let u = VelocitySampler::from_field(&u_field)?;
    let traj_order = tb.order_p.clamp(1, 3);
    let feet_full = taylor_feet(traj_order, grid, dt, &u)?;
    let feet_half = taylor_feet(traj_order, grid, 0.5 * dt, &u)?;

    let ck = if opts.steady_source {
        CKSeries::frozen(&state.h, dt)
    } else {
        let mut s = ck_predictor(state)?;
        s.tau_max = dt;
        s
    };
    let path = PressurePath {
        full: feet_full.clone(),
        half: feet_half,
        dt,
    };
    let pvec = match opts.pressure {
        PressureRule::Off => None,
        rule => Some(pressure_integral(&ck, &path, rule)?),
    };

    // Convective flux divergence of the momentum, frozen over the step:
    // built from the space-time integral of the reconstructed momentum.
    let speed_conv = interface_max(&u_field);
    let v_recon = cweno_conservative(&state.v)?;
    let h_int = conservative_h(&v_recon, &feet_full, pvec.as_ref());
    let f_field = conservative_f(&state.v, &h_int, &speed_conv, dt)?;
    let conv: Vec<f64> = (0..n)
        .map(|i| (f_field.values[i] - state.v.values[i]) / dt)
        .collect();

    // Continuity transport flux for the fully semi-Lagrangian variant.
    let cont_conv: Option<Vec<f64>> = match cfg.continuity {
        ContinuityMode::Hybrid => None,
        ContinuityMode::TransportH => {
            let h_recon = cweno_conservative(&state.h)?;
            let hh = conservative_h(&h_recon, &feet_full, None);
            let g_field = conservative_f(&state.h, &hh, &speed_conv, dt)?;
            Some(
                (0..n)
                    .map(|i| (g_field.values[i] - state.h.values[i]) / dt)
                    .collect(),
            )
        }
    };

    // Eigenvalue-scale interface speeds for the implicit jump dissipation.
    let lam_field = ScalarField {
        grid,
        values: (0..n)
            .map(|i| u_field.values[i].abs() + (GRAVITY * state.h.values[i].max(0.0)).sqrt())
            .collect(),
    };
    let lam = interface_max(&lam_field);

    let s = tb.s;
    let mut kh: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut kv: Vec<Vec<f64>> = Vec::with_capacity(s);

    for i in 0..s {
        let aii = tb.a[i][i];
        if !(aii > 0.0) {
            return Err(SimError::Config(format!(
                "implicit tableau needs positive diagonal, stage {i} has {aii}"
            )));
        }
        let adt = aii * dt;
        let he = combine(&state.h.values, dt, &tb.a_tilde[i][..i], &kh);
        let h_star = combine(&state.h.values, dt, &tb.a[i][..i], &kh);
        let v_star = combine(&state.v.values, dt, &tb.a[i][..i], &kv);
        let w: Vec<f64> = (0..n).map(|c| v_star[c] + adt * conv[c]).collect();

        let (h_i, v_i) = match cfg.continuity {
            ContinuityMode::Hybrid => {
                if opts.steady_source {
                    // Depth held fixed by the balancing source.
                    let h_i = state.h.values.clone();
                    let hex: Vec<f64> = (0..n).map(|c| he[c] * h_i[c]).collect();
                    let grad = dx4(grid, &hex);
                    let v_i = match cfg.source {
                        SourceMode::None => {
                            (0..n).map(|c| w[c] - adt * 0.5 * GRAVITY * grad[c]).collect()
                        }
                        SourceMode::Relaxation { epsilon } => {
                            let ig = epsilon / (epsilon + adt);
                            let sg = adt / (epsilon + adt);
                            (0..n)
                                .map(|c| {
                                    ig * (w[c] - adt * 0.5 * GRAVITY * grad[c]) + sg * 0.5 * hex[c]
                                })
                                .collect()
                        }
                    };
                    (h_i, v_i)
                } else {
                    let (inv_gamma, lap_coef, adv_coef, source_gain) = match cfg.source {
                        SourceMode::None => (1.0, adt * adt * 0.5 * GRAVITY, 0.0, 0.0),
                        SourceMode::Relaxation { epsilon } => {
                            let ig = epsilon / (epsilon + adt);
                            (
                                ig,
                                adt * adt * 0.5 * GRAVITY * ig,
                                adt * adt / (2.0 * (epsilon + adt)),
                                adt / (epsilon + adt),
                            )
                        }
                    };
                    let grad_w = dx4(grid, &w);
                    let rhs: Vec<f64> = (0..n)
                        .map(|c| h_star[c] - adt * inv_gamma * grad_w[c])
                        .collect();
                    let op = StageOp {
                        grid,
                        he: &he,
                        lap_coef,
                        adv_coef,
                        visc: if opts.viscosity {
                            Some((0.5 * adt, &lam))
                        } else {
                            None
                        },
                    };
                    let (h_i, stats) = solve_auto(&op, &rhs, DEFAULT_TOL)?;
                    info.solver_iterations += stats.iterations;
                    if stats.solver == SolverKind::BiCgStab && op.symmetric_expected() {
                        info.solver_fallbacks += 1;
                    }
                    let hex: Vec<f64> = (0..n).map(|c| he[c] * h_i[c]).collect();
                    let grad = dx4(grid, &hex);
                    let v_i: Vec<f64> = match cfg.source {
                        SourceMode::None => {
                            (0..n).map(|c| w[c] - adt * 0.5 * GRAVITY * grad[c]).collect()
                        }
                        SourceMode::Relaxation { .. } => (0..n)
                            .map(|c| {
                                inv_gamma * (w[c] - adt * 0.5 * GRAVITY * grad[c])
                                    + source_gain * 0.5 * hex[c]
                            })
                            .collect(),
                    };
                    (h_i, v_i)
                }
            }
            ContinuityMode::TransportH => {
                let cont = cont_conv.as_ref().unwrap();
                let h_base: Vec<f64> = if opts.steady_source {
                    state.h.values.clone()
                } else {
                    (0..n).map(|c| h_star[c] + adt * cont[c]).collect()
                };
                let h_i = if opts.viscosity && !opts.steady_source {
                    let op = StageOp {
                        grid,
                        he: &he,
                        lap_coef: 0.0,
                        adv_coef: 0.0,
                        visc: Some((0.5 * adt, &lam)),
                    };
                    let (h_i, stats) = solve_auto(&op, &h_base, DEFAULT_TOL)?;
                    info.solver_iterations += stats.iterations;
                    h_i
                } else {
                    h_base
                };
                let hex: Vec<f64> = (0..n).map(|c| he[c] * h_i[c]).collect();
                let grad = dx4(grid, &hex);
                let v_i: Vec<f64> = match cfg.source {
                    SourceMode::None => {
                        (0..n).map(|c| w[c] - adt * 0.5 * GRAVITY * grad[c]).collect()
                    }
                    SourceMode::Relaxation { epsilon } => {
                        let ig = epsilon / (epsilon + adt);
                        let sg = adt / (epsilon + adt);
                        (0..n)
                            .map(|c| ig * (w[c] - adt * 0.5 * GRAVITY * grad[c]) + sg * 0.5 * hex[c])
                            .collect()
                    }
                };
                (h_i, v_i)
            }
        };

        for (c, &h) in h_i.iter().enumerate() {
            if !h.is_finite() || h <= 0.0 {
                return Err(SimError::Numerical(format!(
                    "stage {i}: invalid depth {h:.3e} at cell {c}"
                )));
            }
        }
        kh.push((0..n).map(|c| (h_i[c] - h_star[c]) / adt).collect());
        kv.push((0..n).map(|c| (v_i[c] - v_star[c]) / adt).collect());
    }

    let h_new = combine(&state.h.values, dt, &tb.b, &kh);
    let v_new = combine(&state.v.values, dt, &tb.b, &kv);
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
    next.check_finite("step output")?;
    next.check_positive_depth("step output")?;
    Ok((next, info))
}

/// One step of the hybrid scheme: conservative semi-Lagrangian momentum
/// advection, implicit pressure and continuity solve.
pub fn slimexh_step(
    state: &SWEState,
    dt: f64,
    tb: &ButcherPair,
    options: &SweOptions,
) -> Result<(SWEState, StepInfo)> {
    step_engine(
        state,
        dt,
        tb,
        &EngineConfig {
            continuity: ContinuityMode::Hybrid,
            source: SourceMode::None,
            options: *options,
        },
    )
}

/// One step of the fully semi-Lagrangian scheme: both conserved quantities
/// advected conservatively, pressure substituted explicitly.
pub fn slimex_step(
    state: &SWEState,
    dt: f64,
    tb: &ButcherPair,
    options: &SweOptions,
) -> Result<(SWEState, StepInfo)> {
    step_engine(
        state,
        dt,
        tb,
        &EngineConfig {
            continuity: ContinuityMode::TransportH,
            source: SourceMode::None,
            options: *options,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{diagnostics, steady_swe};
    use crate::tableaux::{make_tableau, SchemeId};

    fn lake(n: usize) -> SWEState {
        let g = Grid1D::new(-10.0, 10.0, n, BoundaryPolicy::Extrapolate).unwrap();
        SWEState::new(
            ScalarField::from_fn(g, |_| 1.3),
            ScalarField::from_fn(g, |_| 0.0),
        )
        .unwrap()
    }

    fn steady_state(n: usize) -> SWEState {
        let g = Grid1D::new(-10.0, 10.0, n, BoundaryPolicy::Periodic).unwrap();
        SWEState::new(
            ScalarField::from_fn(g, |x| steady_swe(x).0),
            ScalarField::from_fn(g, |x| {
                let (h, u) = steady_swe(x);
                h * u
            }),
        )
        .unwrap()
    }

    #[test]
    fn ck_predictor_vanishes_on_lake_at_rest() {
        let s = lake(64);
        let ck = ck_predictor(&s).unwrap();
        assert!(ck.dht.iter().all(|v| v.abs() < 1e-12));
        assert!(ck.d2ht.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn ck_predictor_sine_momentum() {
        // h = 1, V = sin(x): dh/dt = -cos(x) at second order or better
        let mut errs = Vec::new();
        for n in [100usize, 200, 400] {
            let g = Grid1D::new(0.0, 2.0 * std::f64::consts::PI, n, BoundaryPolicy::Periodic).unwrap();
            let s = SWEState::new(
                ScalarField::from_fn(g, |_| 1.0),
                ScalarField::from_fn(g, |x| x.sin()),
            )
            .unwrap();
            let ck = ck_predictor(&s).unwrap();
            let emax = (0..n)
                .map(|i| (ck.dht[i] + g.cell_center(i).cos()).abs())
                .fold(0.0f64, f64::max);
            errs.push(emax);
        }
        assert!((errs[0] / errs[1]).log2() > 1.8, "errs {errs:?}");
        assert!((errs[1] / errs[2]).log2() > 1.8, "errs {errs:?}");
    }

    #[test]
    fn ck_series_time_evaluation() {
        let s = lake(32);
        let ck = ck_predictor(&s).unwrap();
        let h0 = ck.h_at(0.0);
        for (a, b) in h0.iter().zip(&s.h.values) {
            assert_eq!(a, b);
        }
        // lake: constant at any time
        let sq = eval_h_squared(&ck, 0.4, 3.3).unwrap();
        assert!((sq - 1.3 * 1.3).abs() < 1e-10);
    }

    #[test]
    fn pressure_integral_vanishes_when_feet_are_centers() {
        let g = Grid1D::new(-10.0, 10.0, 64, BoundaryPolicy::Periodic).unwrap();
        let h = ScalarField::from_fn(g, |x| 1.0 + 0.3 * (std::f64::consts::PI / 10.0 * x).sin());
        let v = ScalarField::from_fn(g, |_| 0.0);
        let state = SWEState::new(h, v).unwrap();
        let ck = ck_predictor(&state).unwrap();
        let dt = 0.05;
        let u = VelocitySampler::Const(0.0);
        let path = PressurePath {
            full: taylor_feet(2, g, dt, &u).unwrap(),
            half: taylor_feet(2, g, 0.5 * dt, &u).unwrap(),
            dt,
        };
        for rule in [PressureRule::Midpoint, PressureRule::Kepler] {
            let p = pressure_integral(&ck, &path, rule).unwrap();
            assert!(p.max_abs() < 1e-12, "{rule:?}: {}", p.max_abs());
        }
    }

    #[test]
    fn conservative_h_constant_flow() {
        // q = c, u = u0: the flux time integral is c*u0*dt in every cell
        let g = Grid1D::new(0.0, 4.0, 80, BoundaryPolicy::Periodic).unwrap();
        let q = ScalarField::from_fn(g, |_| 2.5);
        let recon = cweno_conservative(&q).unwrap();
        let (u0, dt) = (0.7, 0.12);
        let feet = taylor_feet(2, g, dt, &VelocitySampler::Const(u0)).unwrap();
        let h = conservative_h(&recon, &feet, None);
        for v in &h.values {
            assert!((v - 2.5 * u0 * dt).abs() < 1e-13);
        }
        // stationary feet: zero, or minus the supplied pressure integral
        let feet0 = taylor_feet(2, g, 0.0, &VelocitySampler::Const(0.0)).unwrap();
        let h0 = conservative_h(&recon, &feet0, None);
        assert!(h0.max_abs() == 0.0);
        let p = ScalarField::from_fn(g, |x| 0.1 * x);
        let hp = conservative_h(&recon, &feet0, Some(&p));
        for i in 0..80 {
            assert_eq!(hp.values[i], -p.values[i]);
        }
    }

    #[test]
    fn conservative_f_preserves_constants_and_mass() {
        let g = Grid1D::new(0.0, 1.0, 60, BoundaryPolicy::Periodic).unwrap();
        let q = ScalarField::from_fn(g, |_| 1.7);
        let recon = cweno_conservative(&q).unwrap();
        let feet = taylor_feet(2, g, 0.02, &VelocitySampler::Const(0.9)).unwrap();
        let h = conservative_h(&recon, &feet, None);
        let speeds = vec![0.9; 61];
        let f = conservative_f(&q, &h, &speeds, 0.02).unwrap();
        for v in &f.values {
            assert!((v - 1.7).abs() < 1e-13);
        }

        // single-cell pulse: exact discrete conservation by telescoping
        let mut vals = vec![0.1; 60];
        vals[17] = 1.4;
        let pulse = ScalarField::new(g, vals).unwrap();
        let rp = cweno_conservative(&pulse).unwrap();
        let hp = conservative_h(&rp, &feet, None);
        let fp = conservative_f(&pulse, &hp, &speeds, 0.02).unwrap();
        let before: f64 = pulse.values.iter().sum();
        let after: f64 = fp.values.iter().sum();
        assert!(((after - before) / before).abs() < 1e-13);
    }

    #[test]
    fn zero_flux_integral_keeps_smooth_field() {
        let g = Grid1D::new(0.0, 1.0, 64, BoundaryPolicy::Periodic).unwrap();
        let q = ScalarField::from_fn(g, |x| 1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin());
        let h = ScalarField::zeros(g);
        let speeds = vec![0.5; 65];
        let f = conservative_f(&q, &h, &speeds, 0.01).unwrap();
        for i in 0..64 {
            assert!((f.values[i] - q.values[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn lake_at_rest_is_invariant_for_both_schemes() {
        let tb = make_tableau(SchemeId::Sassp332);
        let opts = SweOptions::for_tableau(&tb);
        let s0 = lake(128);
        let mut sh = s0.clone();
        let mut ss = s0.clone();
        for _ in 0..5 {
            sh = slimexh_step(&sh, 0.05, &tb, &opts).unwrap().0;
            ss = slimex_step(&ss, 0.05, &tb, &opts).unwrap().0;
        }
        for i in 0..128 {
            assert!((sh.h.values[i] - 1.3).abs() < 1e-12);
            assert!(sh.v.values[i].abs() < 1e-12);
            assert!((ss.h.values[i] - 1.3).abs() < 1e-12);
            assert!(ss.v.values[i].abs() < 1e-12);
        }
    }

    #[test]
    fn mass_is_conserved_on_pressure_wave() {
        let g = Grid1D::new(-10.0, 10.0, 100, BoundaryPolicy::Extrapolate).unwrap();
        let s0 = SWEState::new(
            ScalarField::from_fn(g, |x| 1.0 + (-x * x).exp()),
            ScalarField::from_fn(g, |_| 0.0),
        )
        .unwrap();
        let tb = make_tableau(SchemeId::Sassp332);
        let mut opts = SweOptions::for_tableau(&tb);
        opts.viscosity = true;
        let m0 = diagnostics(&s0).mass;
        let mut s = s0;
        let dt = 2.0 * g.dx / 9.0; // courant number near two
        for _ in 0..10 {
            s = slimexh_step(&s, dt, &tb, &opts).unwrap().0;
        }
        let m1 = diagnostics(&s).mass;
        assert!(((m1 - m0) / m0).abs() < 1e-12, "drift {}", (m1 - m0) / m0);
    }

    #[test]
    fn steady_source_freezes_depth_and_momentum_converges() {
        // temporal-spatial convergence of the momentum on the balanced state
        let tb = make_tableau(SchemeId::Sassp332);
        let mut opts = SweOptions::for_tableau(&tb);
        opts.steady_source = true;
        let mut errs = Vec::new();
        for n in [50usize, 100, 200] {
            let mut s = steady_state(n);
            let h_init = s.h.values.clone();
            let lambda = s.max_wave_speed();
            let dx = s.grid().dx;
            let dt_raw = 2.0 * dx / lambda;
            let steps = (0.2f64 / dt_raw).ceil() as usize;
            let dt = 0.2 / steps as f64;
            for _ in 0..steps {
                s = slimexh_step(&s, dt, &tb, &opts).unwrap().0;
            }
            for i in 0..n {
                assert_eq!(s.h.values[i], h_init[i], "depth moved at cell {i}");
            }
            let emax = (0..n)
                .map(|i| {
                    let x = s.grid().cell_center(i);
                    let (h, u) = steady_swe(x);
                    (s.v.values[i] - h * u).abs()
                })
                .fold(0.0f64, f64::max);
            errs.push(emax);
        }
        let s1 = (errs[0] / errs[1]).log2();
        let s2 = (errs[1] / errs[2]).log2();
        assert!(s1 > 1.6 && s2 > 1.6, "orders {s1} {s2}, errs {errs:?}");
    }

    #[test]
    fn riemann_problem_runs_stably_and_conserves() {
        let g = Grid1D::new(-10.0, 10.0, 200, BoundaryPolicy::Extrapolate).unwrap();
        let s0 = SWEState::new(
            ScalarField::from_fn(g, |x| if x <= 0.0 { 1.0 } else { 0.5 }),
            ScalarField::from_fn(g, |_| 0.0),
        )
        .unwrap();
        let tb = make_tableau(SchemeId::Ssp3433);
        let mut opts = SweOptions::for_tableau(&tb);
        opts.viscosity = true;
        let m0 = diagnostics(&s0).mass;
        let mut s = s0;
        let lambda = s.max_wave_speed();
        let dt = 2.0 * g.dx / lambda;
        for _ in 0..20 {
            s = slimexh_step(&s, dt, &tb, &opts).unwrap().0;
        }
        s.check_positive_depth("rp2").unwrap();
        let m1 = diagnostics(&s).mass;
        assert!(((m1 - m0) / m0).abs() < 1e-12);
    }
}
