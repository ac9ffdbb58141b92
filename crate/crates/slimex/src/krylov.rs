//! Matrix-free Krylov solvers for the implicit diffusion and pressure systems.

use crate::error::{Result, SimError};

/// Opaque linear map on vectors of a fixed length.
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// Hint used to pick the starting solver; correctness is guarded by a
    /// residual recomputation either way.
    fn symmetric_expected(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    ConjugateGradient,
    BiCgStab,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    /// True residual norm `||A x - rhs||_2`, recomputed before returning.
    pub residual: f64,
    pub solver: SolverKind,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual(op: &impl LinearOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let mut ax = vec![0.0; rhs.len()];
    op.apply(x, &mut ax);
    ax.iter()
        .zip(rhs)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Conjugate gradient with zero initial guess and relative tolerance.
/// Fails with `CgBreakdown` on non-positive curvature.
pub fn cg_solve(
    op: &impl LinearOperator,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    debug_assert_eq!(op.len(), n);
    let rhs_norm = norm(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
                solver: SolverKind::ConjugateGradient,
            },
        ));
    }
    let target = tol * rhs_norm;
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(SimError::CgBreakdown { curvature });
        }
        let alpha = rr / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            let residual = true_residual(op, &x, rhs);
            if residual <= target * 4.0 {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        residual,
                        solver: SolverKind::ConjugateGradient,
                    },
                ));
            }
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(SimError::SolverDiverged {
        residual: true_residual(op, &x, rhs),
        iterations: max_iter,
    })
}

/// BiCGStab with zero initial guess; no symmetry requirement.
pub fn bicgstab_solve(
    op: &impl LinearOperator,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = rhs.len();
    debug_assert_eq!(op.len(), n);
    let rhs_norm = norm(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
                solver: SolverKind::BiCgStab,
            },
        ));
    }
    let target = tol * rhs_norm;
    let mut r = rhs.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return Err(SimError::SolverDiverged {
                residual: true_residual(op, &x, rhs),
                iterations: it,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        op.apply(&p, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            return Err(SimError::SolverDiverged {
                residual: true_residual(op, &x, rhs),
                iterations: it,
            });
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            let residual = true_residual(op, &x, rhs);
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    residual,
                    solver: SolverKind::BiCgStab,
                },
            ));
        }
        op.apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(SimError::SolverDiverged {
                residual: true_residual(op, &x, rhs),
                iterations: it,
            });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= target {
            let residual = true_residual(op, &x, rhs);
            if residual <= target * 4.0 {
                return Ok((
                    x,
                    SolveStats {
                        iterations: it,
                        residual,
                        solver: SolverKind::BiCgStab,
                    },
                ));
            }
        }
        if omega.abs() < 1e-300 {
            return Err(SimError::SolverDiverged {
                residual: true_residual(op, &x, rhs),
                iterations: it,
            });
        }
    }
    Err(SimError::SolverDiverged {
        residual: true_residual(op, &x, rhs),
        iterations: max_iter,
    })
}

/// Default relative tolerance for the implicit solves.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default iteration cap as a multiple of the system size.
pub const MAX_ITER_FACTOR: usize = 10;

/// Solves with conjugate gradient first (when the operator expects symmetry)
/// and falls back to BiCGStab on breakdown or an unmet residual check.
/// Returns the stats of the solver that succeeded.
pub fn solve_auto(op: &impl LinearOperator, rhs: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let max_iter = MAX_ITER_FACTOR * rhs.len().max(16);
    if op.symmetric_expected() {
        match cg_solve(op, rhs, tol, max_iter) {
            Ok(ok) => return Ok(ok),
            Err(SimError::CgBreakdown { .. }) | Err(SimError::SolverDiverged { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    bicgstab_solve(op, rhs, tol, max_iter)
}

/// Dense matrix operator, used in tests and tiny systems.
pub struct DenseOperator {
    pub a: Vec<Vec<f64>>,
    pub symmetric: bool,
}

impl LinearOperator for DenseOperator {
    fn len(&self) -> usize {
        self.a.len()
    }
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.a.iter().enumerate() {
            out[i] = dot(row, x);
        }
    }
    fn symmetric_expected(&self) -> bool {
        self.symmetric
    }
}
