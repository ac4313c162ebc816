//! Bayesian lower bounds on the mean-square error.
//!
//! The crate computes the classical Weiss-Weinstein family of Bayesian
//! lower bounds (generated by a function family `phi` through the joint
//! covariance inequality) together with their tighter counterparts, which
//! apply the same inequality under the posterior for each observation and
//! then average the per-observation bound over the marginal of `x`.
//!
//! Modules:
//!
//! | module | contents |
//! |--------|----------|
//! | [`quadrature`] | adaptive Gauss-Kronrod integration, log-space peak handling |
//! | [`special`] | log-gamma, log-beta, Whittaker `W` |
//! | [`model`] | the [`model::JointModel`] interface and a Gaussian conjugate model |
//! | [`engine`] | classical/tighter bounds, `phi` families, equality diagnostics |
//! | [`case_study`] | Gaussian variance with a Beta prior: densities, estimators, bounds |
//! | [`expfam`] | conjugate exponential families and efficiency tests |
//! | [`montecarlo`] | seeded, parallel RMSE experiments |
//!
//! ```
//! use bayesbounds::case_study::CaseParams;
//!
//! let p = CaseParams::new(3.0, 16).unwrap();
//! assert!((p.bcrb().unwrap() - 1.0 / 120.0).abs() < 1e-15);
//! ```

pub mod case_study;
pub mod engine;
pub mod error;
pub mod expfam;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
