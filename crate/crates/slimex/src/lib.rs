//! Semi-Lagrangian implicit-explicit Runge-Kutta schemes in one space
//! dimension: scalar advection-diffusion solvers, conservative schemes for
//! the shallow water equations, their stiff relaxation system, and the
//! supporting harness for convergence studies.

pub mod advdiff;
pub mod catalog;
pub mod cweno;
pub mod error;
pub mod gridfields;
pub mod harness;
pub mod krylov;
pub mod oracles;
pub mod relax;
pub mod slcore;
pub mod spline;
pub mod swe;
pub mod tableaux;

pub use error::{Result, SimError};
