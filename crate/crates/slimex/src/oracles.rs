//! Closed-form and reference solutions used to measure scheme errors:
//! the scalar advection-diffusion test solutions, the balanced shallow-water
//! steady state, exact Riemann solvers for shallow water and for the
//! inviscid Burgers equation, and integral diagnostics.

use crate::error::{Result, SimError};
use crate::gridfields::Grid1D;
use crate::swe::{SWEState, GRAVITY};

/// Error function accurate to about 1e-15: Maclaurin series for small
/// arguments, Lentz continued fraction for the complementary function above
/// |z| = 3.
pub fn erf(z: f64) -> f64 {
    if z < 0.0 {
        return -erf(-z);
    }
    if z == 0.0 {
        return 0.0;
    }
    if z < 3.0 {
        erf_series(z)
    } else {
        1.0 - erfc_cf(z)
    }
}

/// Complementary error function with full relative accuracy in the tail.
pub fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z < 3.0 {
        1.0 - erf_series(z)
    } else {
        erfc_cf(z)
    }
}

// erf(z) = 2/sqrt(pi) e^{-z^2} sum_{n>=0} z^{2n+1} 2^n / (1*3*...*(2n+1))
fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * z2 / (2.0 * n as f64 + 1.0);
        let new_sum = sum + term;
        if new_sum == sum || n > 200 {
            break;
        }
        sum = new_sum;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-z2).exp() * sum
}

/// Complementary error function for z >= 3 via the standard continued
/// fraction, evaluated with the modified Lentz algorithm.
fn erfc_cf(z: f64) -> f64 {
    // erfc(z) = e^{-z^2}/sqrt(pi) * 1/(z + 1/2/(z + 1/(z + 3/2/(z + ...))))
    let tiny = 1e-300;
    let mut f: f64 = z;
    let mut c: f64 = f;
    let mut d: f64 = 0.0;
    for k in 1..200 {
        let a = k as f64 / 2.0;
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-z * z).exp() / std::f64::consts::PI.sqrt() / f
}

/// Parameters of the linear-transport diffusion test.
pub struct Test1Params {
    pub x0: f64,
    pub u: f64,
    pub alpha: f64,
    pub t0: f64,
}

impl Default for Test1Params {
    fn default() -> Self {
        Test1Params {
            x0: -0.25,
            u: 0.1,
            alpha: 1e-3,
            t0: 1e-2,
        }
    }
}

/// Diffusing step profile transported at constant speed; the initial data is
/// the profile at the offset time `t0` to avoid a sharp discontinuity.
/// Written through the complementary function so the tails keep relative
/// accuracy.
pub fn exact_test1(x: f64, t: f64, p: &Test1Params) -> f64 {
    let arg = (x - p.x0 - p.u * t) / (4.0 * p.alpha * (t + p.t0)).sqrt();
    0.5 * erfc(arg)
}

/// Gaussian advected by `u(x) = k0 x`; constant along characteristics.
pub fn exact_test2(x: f64, t: f64, k0: f64) -> f64 {
    let y = x * (-k0 * t).exp();
    (-50.0 * y * y).exp()
}

/// Separable solution of the advection-diffusion equation with `u(x) = -x`.
pub fn exact_test3(x: f64, t: f64, alpha: f64) -> f64 {
    t.exp() * test3_profile(x, alpha)
}

fn test3_profile(x: f64, alpha: f64) -> f64 {
    -x - 0.5 * (2.0 * std::f64::consts::PI * alpha).sqrt() * erf(x / (2.0 * alpha).sqrt()) * x
        - (-x * x / (2.0 * alpha)).exp() * alpha
}

/// Wave amplitude of the balanced steady velocity profile.
pub const STEADY_A: f64 = 5.0;
/// Integration constant of the balanced depth (enters as `-2 g c`).
pub const STEADY_C: f64 = -1.0;

/// Steady state of the shallow water system on a flat bottom:
/// `u = 1 + a cos(pi x / 5)` with the depth balancing advection against the
/// hydraulic-head gradient, `h u^2 + g h^2 / 2 = const`.
pub fn steady_swe(x: f64) -> (f64, f64) {
    let u = 1.0 + STEADY_A * (std::f64::consts::PI / 5.0 * x).cos();
    let u2 = u * u;
    let h = (-u2 + (u2 * u2 - 2.0 * GRAVITY * STEADY_C).sqrt()) / GRAVITY;
    (h, u)
}

/// Riemann initial data: two constant states split at `x_d`.
#[derive(Debug, Clone)]
pub struct RiemannIC {
    pub name: String,
    pub h_l: f64,
    pub u_l: f64,
    pub h_r: f64,
    pub u_r: f64,
    pub x_d: f64,
    pub t_f: f64,
    pub x_left: f64,
    pub x_right: f64,
}

/// Depth function of the two-wave exact shallow water Riemann solver.
fn depth_fn(h: f64, hk: f64) -> f64 {
    if h <= hk {
        2.0 * ((GRAVITY * h).sqrt() - (GRAVITY * hk).sqrt())
    } else {
        (h - hk) * (0.5 * GRAVITY * (1.0 / h + 1.0 / hk)).sqrt()
    }
}

fn depth_fn_deriv(h: f64, hk: f64) -> f64 {
    if h <= hk {
        (GRAVITY / h).sqrt()
    } else {
        let phi = 0.5 * GRAVITY * (1.0 / h + 1.0 / hk);
        let sq = phi.sqrt();
        sq + (h - hk) * (-0.5 * GRAVITY / (h * h)) / (2.0 * sq)
    }
}

/// Star-region depth of the exact solver: damped Newton from the
/// two-rarefaction estimate with a bisection bracket as fallback.
pub fn swe_star_depth(ic: &RiemannIC) -> Result<f64> {
    let cl = (GRAVITY * ic.h_l).sqrt();
    let cr = (GRAVITY * ic.h_r).sqrt();
    let du = ic.u_r - ic.u_l;
    if du >= 2.0 * (cl + cr) {
        return Err(SimError::Numerical(format!(
            "riemann data {} generates a dry state",
            ic.name
        )));
    }
    let f = |h: f64| depth_fn(h, ic.h_l) + depth_fn(h, ic.h_r) + du;
    // Two-rarefaction estimate.
    let tr = (0.5 * (cl + cr) - 0.25 * du).powi(2) / GRAVITY;
    let mut h = tr.max(1e-12);
    let mut converged = false;
    for _ in 0..100 {
        let fh = f(h);
        let dfh = depth_fn_deriv(h, ic.h_l) + depth_fn_deriv(h, ic.h_r);
        let mut step = fh / dfh;
        // Damp steps that would leave the positive half-line.
        while h - step <= 0.0 {
            step *= 0.5;
        }
        h -= step;
        if (step.abs() / h.max(1e-30)) < 1e-14 || fh.abs() < 1e-14 {
            converged = true;
            break;
        }
    }
    if !converged {
        // Bisection fallback on a sign bracket.
        let mut lo = 1e-12;
        let mut hi = ic.h_l.max(ic.h_r);
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(SimError::Numerical(
                    "riemann depth iteration failed to bracket".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        h = 0.5 * (lo + hi);
    }
    Ok(h)
}

/// Samples the exact shallow water Riemann solution at `(x, t)`.
pub fn swe_exact_riemann(ic: &RiemannIC, x: f64, t: f64) -> Result<(f64, f64)> {
    if t <= 0.0 {
        return Ok(if x <= ic.x_d {
            (ic.h_l, ic.u_l)
        } else {
            (ic.h_r, ic.u_r)
        });
    }
    let hs = swe_star_depth(ic)?;
    let us = 0.5 * (ic.u_l + ic.u_r) + 0.5 * (depth_fn(hs, ic.h_r) - depth_fn(hs, ic.h_l));
    let cs = (GRAVITY * hs).sqrt();
    let cl = (GRAVITY * ic.h_l).sqrt();
    let cr = (GRAVITY * ic.h_r).sqrt();
    let xi = (x - ic.x_d) / t;

    let (h, u) = if xi <= us {
        // Left wave.
        if hs <= ic.h_l {
            // Rarefaction: head at u_l - c_l, tail at u* - c*.
            let head = ic.u_l - cl;
            let tail = us - cs;
            if xi <= head {
                (ic.h_l, ic.u_l)
            } else if xi >= tail {
                (hs, us)
            } else {
                let u = (ic.u_l + 2.0 * cl + 2.0 * xi) / 3.0;
                let c = (ic.u_l + 2.0 * cl - xi) / 3.0;
                (c * c / GRAVITY, u)
            }
        } else {
            // Shock.
            let q = ((hs + ic.h_l) * hs / (2.0 * ic.h_l * ic.h_l)).sqrt();
            let s = ic.u_l - cl * q;
            if xi <= s {
                (ic.h_l, ic.u_l)
            } else {
                (hs, us)
            }
        }
    } else {
        // Right wave.
        if hs <= ic.h_r {
            let head = ic.u_r + cr;
            let tail = us + cs;
            if xi >= head {
                (ic.h_r, ic.u_r)
            } else if xi <= tail {
                (hs, us)
            } else {
                let u = (ic.u_r - 2.0 * cr + 2.0 * xi) / 3.0;
                let c = (-ic.u_r + 2.0 * cr + xi) / 3.0;
                (c * c / GRAVITY, u)
            }
        } else {
            let q = ((hs + ic.h_r) * hs / (2.0 * ic.h_r * ic.h_r)).sqrt();
            let s = ic.u_r + cr * q;
            if xi >= s {
                (ic.h_r, ic.u_r)
            } else {
                (hs, us)
            }
        }
    };
    Ok((h, u))
}

/// Exact solution of the Burgers Riemann problem with flux `h^2/2`,
/// sampled at offset `x` from the discontinuity: a shock moving at
/// `(h_l + h_r)/2` when `h_l > h_r`, otherwise a rarefaction fan `h = x/t`.
pub fn burgers_exact_riemann(h_l: f64, h_r: f64, x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return if x <= 0.0 { h_l } else { h_r };
    }
    let xi = x / t;
    if h_l > h_r {
        let s = 0.5 * (h_l + h_r);
        if xi < s {
            h_l
        } else {
            h_r
        }
    } else if xi <= h_l {
        h_l
    } else if xi >= h_r {
        h_r
    } else {
        xi
    }
}

/// Integral diagnostics of a shallow water state (midpoint sums).
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub mass: f64,
    pub momentum: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub total_energy: f64,
}

pub fn diagnostics(state: &SWEState) -> Diagnostics {
    let dx = state.h.grid.dx;
    let mut mass = 0.0;
    let mut momentum = 0.0;
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..state.h.grid.n_cells {
        let h = state.h.values[i];
        let v = state.v.values[i];
        mass += h;
        momentum += v;
        kinetic += 0.5 * v * v / h;
        potential += 0.5 * GRAVITY * h * h;
    }
    Diagnostics {
        mass: mass * dx,
        momentum: momentum * dx,
        kinetic: kinetic * dx,
        potential: potential * dx,
        total_energy: (kinetic + potential) * dx,
    }
}

/// Courant number of a time step for a shallow water state.
pub fn cfl_of(state: &SWEState, dt: f64) -> f64 {
    dt * state.max_wave_speed() / state.h.grid.dx
}

/// Largest stable explicit step for the heat part of the advection-diffusion
/// equation under the classical forward-in-time centered-in-space bound.
pub fn ftcs_stable_dt(grid: &Grid1D, alpha: f64) -> f64 {
    0.5 * grid.dx * grid.dx / alpha
}
