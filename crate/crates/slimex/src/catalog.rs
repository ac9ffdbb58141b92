//! Built-in test cases: scalar advection-diffusion problems with exact
//! solutions, the balanced shallow-water steady state, a pressure wave,
//! Riemann problems, and the stiff relaxation cases.

use crate::error::{Result, SimError};
use crate::gridfields::{BoundaryPolicy, Grid1D, ScalarField};
use crate::oracles::{self, RiemannIC};
use crate::slcore::VelocitySampler;
use crate::swe::SWEState;

/// Catalog identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestCase {
    Test1,
    Test2,
    Test3,
    SweSteady,
    SweGaussian,
    Rp1,
    Rp2,
    B1,
    B2,
    LowFroude,
    /// Smooth equilibrium data for the stiff relaxation convergence sweep.
    ApSmooth,
}

impl TestCase {
    pub const ALL: [TestCase; 11] = [
        TestCase::Test1,
        TestCase::Test2,
        TestCase::Test3,
        TestCase::SweSteady,
        TestCase::SweGaussian,
        TestCase::Rp1,
        TestCase::Rp2,
        TestCase::B1,
        TestCase::B2,
        TestCase::LowFroude,
        TestCase::ApSmooth,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestCase::Test1 => "test1",
            TestCase::Test2 => "test2",
            TestCase::Test3 => "test3",
            TestCase::SweSteady => "swe_steady",
            TestCase::SweGaussian => "swe_gaussian",
            TestCase::Rp1 => "rp1",
            TestCase::Rp2 => "rp2",
            TestCase::B1 => "b1",
            TestCase::B2 => "b2",
            TestCase::LowFroude => "lowfroude",
            TestCase::ApSmooth => "ap_smooth",
        }
    }

    pub fn parse(s: &str) -> Result<TestCase> {
        TestCase::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| SimError::Config(format!("unknown test case `{s}`")))
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, TestCase::Test1 | TestCase::Test2 | TestCase::Test3)
    }
}

/// Scalar case: grid factory, velocity, diffusion, initial data, oracle.
pub struct ScalarCase {
    pub name: &'static str,
    pub x_left: f64,
    pub x_right: f64,
    pub boundary: BoundaryPolicy,
    pub alpha: f64,
    pub t_final: f64,
    pub velocity: VelocitySampler,
    pub initial: Box<dyn Fn(f64) -> f64 + Sync + Send>,
    pub oracle: Box<dyn Fn(f64, f64) -> f64 + Sync + Send>,
}

impl ScalarCase {
    pub fn grid(&self, n_cells: usize) -> Result<Grid1D> {
        Grid1D::new(self.x_left, self.x_right, n_cells, self.boundary)
    }

    pub fn initial_field(&self, grid: Grid1D) -> ScalarField {
        ScalarField::from_fn(grid, &self.initial)
    }
}

pub fn scalar_case(case: TestCase) -> Result<ScalarCase> {
    match case {
        TestCase::Test1 => {
            let p = oracles::Test1Params::default();
            Ok(ScalarCase {
                name: "test1",
                x_left: -2.0,
                x_right: 2.0,
                boundary: BoundaryPolicy::Extrapolate,
                alpha: p.alpha,
                t_final: 0.3,
                velocity: VelocitySampler::Const(p.u),
                initial: Box::new(move |x| oracles::exact_test1(x, 0.0, &p)),
                oracle: {
                    let p = oracles::Test1Params::default();
                    Box::new(move |x, t| oracles::exact_test1(x, t, &p))
                },
            })
        }
        TestCase::Test2 => Ok(ScalarCase {
            name: "test2",
            x_left: -3.0,
            x_right: 3.0,
            boundary: BoundaryPolicy::Extrapolate,
            alpha: 0.0,
            t_final: 9.0,
            velocity: VelocitySampler::Linear { k: 0.2 },
            initial: Box::new(|x| oracles::exact_test2(x, 0.0, 0.2)),
            oracle: Box::new(|x, t| oracles::exact_test2(x, t, 0.2)),
        }),
        TestCase::Test3 => Ok(ScalarCase {
            name: "test3",
            x_left: -10.0,
            x_right: 10.0,
            boundary: BoundaryPolicy::Extrapolate,
            alpha: 0.1,
            t_final: 0.1,
            velocity: VelocitySampler::Linear { k: -1.0 },
            initial: Box::new(|x| oracles::exact_test3(x, 0.0, 0.1)),
            oracle: Box::new(|x, t| oracles::exact_test3(x, t, 0.1)),
        }),
        other => Err(SimError::Config(format!(
            "{} is not a scalar advection-diffusion case",
            other.as_str()
        ))),
    }
}

/// Shallow water case: grid factory, initial state, defaults and metadata.
pub struct SweCase {
    pub name: &'static str,
    pub x_left: f64,
    pub x_right: f64,
    pub boundary: BoundaryPolicy,
    pub t_final: f64,
    pub default_cfl: f64,
    pub default_viscosity: bool,
    pub steady_source: bool,
    pub epsilon: Option<f64>,
    pub initial: Box<dyn Fn(f64) -> (f64, f64) + Sync + Send>,
    pub riemann: Option<RiemannIC>,
}

impl SweCase {
    pub fn grid(&self, n_cells: usize) -> Result<Grid1D> {
        Grid1D::new(self.x_left, self.x_right, n_cells, self.boundary)
    }

    pub fn initial_state(&self, grid: Grid1D) -> Result<SWEState> {
        let h = ScalarField::from_fn(grid, |x| (self.initial)(x).0);
        let v = ScalarField::from_fn(grid, |x| {
            let (h, u) = (self.initial)(x);
            h * u
        });
        SWEState::new(h, v)
    }
}

fn riemann_case(
    name: &'static str,
    t_f: f64,
    bounds: (f64, f64),
    left: (f64, f64),
    right: (f64, f64),
    cfl: f64,
    epsilon: Option<f64>,
) -> SweCase {
    let ic = RiemannIC {
        name: name.to_string(),
        h_l: left.0,
        u_l: left.1,
        h_r: right.0,
        u_r: right.1,
        x_d: 0.0,
        t_f,
        x_left: bounds.0,
        x_right: bounds.1,
    };
    SweCase {
        name,
        x_left: bounds.0,
        x_right: bounds.1,
        boundary: BoundaryPolicy::Extrapolate,
        t_final: t_f,
        default_cfl: cfl,
        default_viscosity: true,
        steady_source: false,
        epsilon,
        initial: Box::new(move |x| {
            if x <= 0.0 {
                (left.0, left.1)
            } else {
                (right.0, right.1)
            }
        }),
        riemann: Some(ic),
    }
}

pub fn swe_case(case: TestCase) -> Result<SweCase> {
    match case {
        TestCase::SweSteady => Ok(SweCase {
            name: "swe_steady",
            x_left: -10.0,
            x_right: 10.0,
            boundary: BoundaryPolicy::Periodic,
            t_final: 0.2,
            default_cfl: 2.0,
            default_viscosity: false,
            steady_source: true,
            epsilon: None,
            initial: Box::new(|x| {
                let (h, u) = oracles::steady_swe(x);
                (h, u)
            }),
            riemann: None,
        }),
        TestCase::SweGaussian => Ok(SweCase {
            name: "swe_gaussian",
            x_left: -10.0,
            x_right: 10.0,
            boundary: BoundaryPolicy::Extrapolate,
            t_final: 1.2,
            default_cfl: 2.0,
            default_viscosity: true,
            steady_source: false,
            epsilon: None,
            initial: Box::new(|x| (1.0 + (-x * x).exp(), 0.0)),
            riemann: None,
        }),
        TestCase::Rp1 => Ok(riemann_case(
            "rp1",
            1.0,
            (-10.0, 10.0),
            (1.5, -1.0),
            (1.0, 2.0),
            3.0,
            None,
        )),
        TestCase::Rp2 => Ok(riemann_case(
            "rp2",
            1.5,
            (-10.0, 10.0),
            (1.0, 0.0),
            (0.5, 0.0),
            2.0,
            None,
        )),
        TestCase::B1 => Ok(riemann_case(
            "b1",
            0.3,
            (-1.0, 1.0),
            (1.0, 0.0),
            (2.0, 0.0),
            4.0,
            Some(1e-14),
        )),
        TestCase::B2 => Ok(riemann_case(
            "b2",
            0.4,
            (-1.0, 1.0),
            (2.0, 0.0),
            (1.0, 0.0),
            4.0,
            Some(1e-14),
        )),
        TestCase::LowFroude => Ok(SweCase {
            name: "lowfroude",
            x_left: 0.0,
            x_right: 1.0,
            boundary: BoundaryPolicy::Periodic,
            t_final: 0.1,
            default_cfl: 2.0,
            default_viscosity: false,
            steady_source: false,
            epsilon: Some(1e-14),
            initial: Box::new(|x| {
                let h = 1.0 + 0.2 * (2.0 * std::f64::consts::PI * x).sin();
                (h, h / 2.0)
            }),
            riemann: None,
        }),
        TestCase::ApSmooth => Ok(SweCase {
            name: "ap_smooth",
            x_left: 0.0,
            x_right: 1.0,
            boundary: BoundaryPolicy::Periodic,
            t_final: 0.05,
            default_cfl: 4.0,
            default_viscosity: false,
            steady_source: false,
            epsilon: Some(1e-14),
            initial: Box::new(|x| {
                let h = 1.0 + 0.2 * (8.0 * std::f64::consts::PI * x).sin();
                (h, h / 2.0)
            }),
            riemann: None,
        }),
        other => Err(SimError::Config(format!(
            "{} is not a shallow water case",
            other.as_str()
        ))),
    }
}

/// One line of catalog metadata for listings.
pub struct CaseInfo {
    pub name: &'static str,
    pub kind: &'static str,
    pub domain: (f64, f64),
    pub t_final: f64,
    pub summary: String,
}

pub fn list_tests() -> Vec<CaseInfo> {
    TestCase::ALL
        .iter()
        .map(|&case| {
            if case.is_scalar() {
                let c = scalar_case(case).unwrap();
                CaseInfo {
                    name: c.name,
                    kind: "scalar",
                    domain: (c.x_left, c.x_right),
                    t_final: c.t_final,
                    summary: format!("alpha = {:.3e}", c.alpha),
                }
            } else {
                let c = swe_case(case).unwrap();
                let summary = match (&c.riemann, c.epsilon) {
                    (Some(ic), eps) => {
                        let eps = eps
                            .map(|e| format!(", eps = {e:.1e}"))
                            .unwrap_or_default();
                        format!(
                            "(h_l, u_l) = ({}, {}), (h_r, u_r) = ({}, {}){eps}",
                            ic.h_l, ic.u_l, ic.h_r, ic.u_r
                        )
                    }
                    (None, Some(e)) => format!("eps = {e:.1e}"),
                    (None, None) => {
                        if c.steady_source {
                            "balanced steady state".to_string()
                        } else {
                            "pressure wave, water at rest".to_string()
                        }
                    }
                };
                CaseInfo {
                    name: c.name,
                    kind: "swe",
                    domain: (c.x_left, c.x_right),
                    t_final: c.t_final,
                    summary,
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for case in TestCase::ALL {
            assert_eq!(TestCase::parse(case.as_str()).unwrap(), case);
        }
        assert!(TestCase::parse("bogus").is_err());
    }

    #[test]
    fn listing_matches_published_parameters() {
        let infos = list_tests();
        let rp1 = infos.iter().find(|c| c.name == "rp1").unwrap();
        assert!(rp1.summary.contains("(1.5, -1)") && rp1.summary.contains("(1, 2)"));
        assert_eq!(rp1.t_final, 1.0);
        let b1 = infos.iter().find(|c| c.name == "b1").unwrap();
        assert!(b1.summary.contains("(1, 0)") && b1.summary.contains("(2, 0)"));
        assert_eq!(b1.t_final, 0.3);
        let gauss = infos.iter().find(|c| c.name == "swe_gaussian").unwrap();
        assert_eq!(gauss.domain, (-10.0, 10.0));
    }

    #[test]
    fn riemann_table_transcription() {
        let rp1 = swe_case(TestCase::Rp1).unwrap().riemann.unwrap();
        assert_eq!(
            (rp1.h_l, rp1.u_l, rp1.h_r, rp1.u_r, rp1.t_f),
            (1.5, -1.0, 1.0, 2.0, 1.0)
        );
        let rp2 = swe_case(TestCase::Rp2).unwrap().riemann.unwrap();
        assert_eq!(
            (rp2.h_l, rp2.u_l, rp2.h_r, rp2.u_r, rp2.t_f),
            (1.0, 0.0, 0.5, 0.0, 1.5)
        );
        let b2 = swe_case(TestCase::B2).unwrap().riemann.unwrap();
        assert_eq!((b2.h_l, b2.h_r, b2.t_f), (2.0, 1.0, 0.4));
        assert_eq!((b2.x_left, b2.x_right), (-1.0, 1.0));
    }

    #[test]
    fn swe_gaussian_profile() {
        let c = swe_case(TestCase::SweGaussian).unwrap();
        let (h0, u0) = (c.initial)(0.0);
        assert_eq!(h0, 2.0);
        assert_eq!(u0, 0.0);
    }

    #[test]
    fn scalar_initial_matches_oracle_at_zero() {
        for case in [TestCase::Test1, TestCase::Test2, TestCase::Test3] {
            let c = scalar_case(case).unwrap();
            for x in [-1.0, 0.3, 1.7] {
                assert_eq!((c.initial)(x), (c.oracle)(x, 0.0), "{case:?} at {x}");
            }
        }
    }
}
