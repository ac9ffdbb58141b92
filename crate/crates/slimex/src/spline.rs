//! Cubic spline interpolation on uniformly spaced knots.
//!
//! Two closures are provided: not-a-knot for bounded data and a periodic
//! closure for cyclic data. Evaluation outside the knot range extends the
//! boundary cubic, which keeps near-boundary transport exact for data that
//! is polynomial up to degree three there.

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplineEnd {
    NotAKnot,
    Periodic,
}

/// C2 piecewise cubic through `(x0 + i*h, y_i)`.
///
/// Segment `i` stores the local form `y_i + t*(b_i + t*(c_i + t*d_i))` with
/// `t = x - x_i`, so evaluation at a knot reproduces the knot value exactly.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    n: usize,
    end: SplineEnd,
    y: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

/// Solves a tridiagonal system in place; `lower`/`upper` are the off-diagonals.
fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = rhs.to_vec();
    cp[0] = upper[0] / diag[0];
    dp[0] = dp[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * cp[i - 1];
        if i < n - 1 {
            cp[i] = upper[i] / m;
        }
        dp[i] = (dp[i] - lower[i] * dp[i - 1]) / m;
    }
    rhs[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = dp[i] - cp[i] * rhs[i + 1];
    }
}

/// Cyclic tridiagonal solve (constant bands `1, 4, 1`) via Sherman-Morrison.
fn cyclic_144(rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3);
    // A = tridiag(1,4,1) with corners A[0][n-1] = A[n-1][0] = 1.
    // Write A = B + u v^T with: gamma = -4, u = (gamma, 0, .., 0, 1),
    // v = (1, 0, .., 0, 1/gamma), B tridiagonal with modified ends.
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] = 4.0 - gamma;
    diag[n - 1] = 4.0 - 1.0 / gamma;
    let lower = vec![1.0; n];
    let upper = vec![1.0; n];

    let mut y = rhs.to_vec();
    thomas(&lower, &diag, &upper, &mut y);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    let mut q = u.clone();
    thomas(&lower, &diag, &upper, &mut q);
    let vy = y[0] + y[n - 1] / gamma;
    let vq = q[0] + q[n - 1] / gamma;
    let factor = vy / (1.0 + vq);
    (0..n).map(|i| y[i] - factor * q[i]).collect()
}

impl CubicSpline {
    /// Fits a spline through `y` at knots `x0 + i*h`.
    pub fn fit(x0: f64, h: f64, y: &[f64], end: SplineEnd) -> Result<CubicSpline> {
        let n = y.len();
        if n < 4 {
            return Err(SimError::Config(format!(
                "cubic spline needs at least 4 points, got {n}"
            )));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(SimError::Config(format!("invalid knot spacing {h}")));
        }
        let h2 = h * h;
        // Second-derivative values m_i at the knots.
        let m = match end {
            SplineEnd::Periodic => {
                // m_{i-1} + 4 m_i + m_{i+1} = 6 (y_{i-1} - 2 y_i + y_{i+1}) / h^2, cyclic.
                let rhs: Vec<f64> = (0..n)
                    .map(|i| {
                        let im = (i + n - 1) % n;
                        let ip = (i + 1) % n;
                        6.0 * (y[im] - 2.0 * y[i] + y[ip]) / h2
                    })
                    .collect();
                cyclic_144(&rhs)
            }
            SplineEnd::NotAKnot => {
                // Third-derivative continuity at the first and last interior
                // knot pins m_1 and m_{n-2} directly on a uniform grid.
                let mut m = vec![0.0; n];
                m[1] = (y[0] - 2.0 * y[1] + y[2]) / h2;
                m[n - 2] = (y[n - 3] - 2.0 * y[n - 2] + y[n - 1]) / h2;
                let k = n - 4; // unknowns m_2 .. m_{n-3}
                if k > 0 {
                    let lower = vec![1.0; k];
                    let diag = vec![4.0; k];
                    let upper = vec![1.0; k];
                    let mut rhs: Vec<f64> = (2..n - 2)
                        .map(|i| 6.0 * (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2)
                        .collect();
                    rhs[0] -= m[1];
                    rhs[k - 1] -= m[n - 2];
                    thomas(&lower, &diag, &upper, &mut rhs);
                    m[2..n - 2].copy_from_slice(&rhs);
                }
                m[0] = 2.0 * m[1] - m[2];
                m[n - 1] = 2.0 * m[n - 2] - m[n - 3];
                m
            }
        };

        // Local coefficients per segment; the periodic closure wraps to y_0.
        let nseg = match end {
            SplineEnd::Periodic => n,
            SplineEnd::NotAKnot => n - 1,
        };
        let mut b = vec![0.0; nseg];
        let mut c = vec![0.0; nseg];
        let mut d = vec![0.0; nseg];
        for i in 0..nseg {
            let ip = (i + 1) % n;
            let (yi, yip) = (y[i], y[ip]);
            let (mi, mip) = (m[i], m[(i + 1) % n]);
            b[i] = (yip - yi) / h - h * (2.0 * mi + mip) / 6.0;
            c[i] = mi / 2.0;
            d[i] = (mip - mi) / (6.0 * h);
        }
        Ok(CubicSpline {
            x0,
            h,
            n,
            end,
            y: y.to_vec(),
            b,
            c,
            d,
        })
    }

    pub fn span(&self) -> f64 {
        match self.end {
            SplineEnd::Periodic => self.n as f64 * self.h,
            SplineEnd::NotAKnot => (self.n - 1) as f64 * self.h,
        }
    }

    /// Maps a query to (segment, local offset).
    fn locate(&self, x: f64) -> (usize, f64) {
        match self.end {
            SplineEnd::Periodic => {
                let span = self.span();
                let mut rel = (x - self.x0) % span;
                if rel < 0.0 {
                    rel += span;
                }
                let mut i = (rel / self.h).floor() as usize;
                if i >= self.n {
                    i = self.n - 1;
                }
                let t = rel - i as f64 * self.h;
                (i, t)
            }
            SplineEnd::NotAKnot => {
                let rel = x - self.x0;
                let i = ((rel / self.h).floor() as isize).clamp(0, self.n as isize - 2) as usize;
                (i, rel - i as f64 * self.h)
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.y[i] + t * (self.b[i] + t * (self.c[i] + t * self.d[i]))
    }

    pub fn eval_deriv(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        self.b[i] + t * (2.0 * self.c[i] + t * 3.0 * self.d[i])
    }

    pub fn eval_deriv2(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        2.0 * self.c[i] + t * 6.0 * self.d[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knots(x0: f64, h: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(x0 + i as f64 * h)).collect()
    }

    #[test]
    fn reproduces_knot_values_exactly() {
        let y = knots(-1.0, 0.25, 9, |x| x.sin() + 0.3 * x);
        let sp = CubicSpline::fit(-1.0, 0.25, &y, SplineEnd::NotAKnot).unwrap();
        for (i, yi) in y.iter().enumerate() {
            let x = -1.0 + i as f64 * 0.25;
            assert_eq!(sp.eval(x), *yi);
        }
    }

    #[test]
    fn cubic_polynomials_are_exact_including_extension() {
        let f = |x: f64| 2.0 - x + 0.5 * x * x - 0.125 * x * x * x;
        let y = knots(0.0, 0.1, 12, f);
        let sp = CubicSpline::fit(0.0, 0.1, &y, SplineEnd::NotAKnot).unwrap();
        for &x in &[0.03, 0.47, 0.95, 1.09, -0.21, 1.4] {
            assert!((sp.eval(x) - f(x)).abs() < 1e-12, "x = {x}");
        }
        let d = |x: f64| -1.0 + x - 0.375 * x * x;
        assert!((sp.eval_deriv(0.31) - d(0.31)).abs() < 1e-12);
        assert!((sp.eval_deriv2(0.62) - (1.0 - 0.75 * 0.62)).abs() < 1e-11);
    }

    #[test]
    fn periodic_closure_fourth_order() {
        let l = 1.0;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let h = l / n as f64;
            let y = knots(0.0, h, n, |x| (2.0 * std::f64::consts::PI * x).sin());
            let sp = CubicSpline::fit(0.0, h, &y, SplineEnd::Periodic).unwrap();
            let mut emax: f64 = 0.0;
            for k in 0..1000 {
                let x = 0.001 * k as f64;
                let exact = (2.0 * std::f64::consts::PI * x).sin();
                emax = emax.max((sp.eval(x) - exact).abs());
            }
            errs.push(emax);
        }
        let slope1 = (errs[0] / errs[1]).log2();
        let slope2 = (errs[1] / errs[2]).log2();
        assert!(slope1 > 3.7 && slope2 > 3.7, "slopes {slope1} {slope2}");
    }

    #[test]
    fn periodic_wraps_queries() {
        let n = 16;
        let h = 2.0 / n as f64;
        let y = knots(-1.0, h, n, |x| (std::f64::consts::PI * x).cos());
        let sp = CubicSpline::fit(-1.0, h, &y, SplineEnd::Periodic).unwrap();
        let a = sp.eval(-0.7);
        let b = sp.eval(-0.7 + 2.0);
        let c = sp.eval(-0.7 - 4.0);
        assert!((a - b).abs() < 1e-13);
        assert!((a - c).abs() < 1e-13);
    }
}
