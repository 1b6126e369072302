//! Bayesian censored linear regression with AR(p) errors.
//!
//! The sampler is a Gibbs scheme with data augmentation: censored points
//! are imputed by the mean of several truncated-normal draws, and the AR
//! coefficients move by random-walk Metropolis inside the stationary region.

pub mod assessment;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod io;
pub mod model;
pub mod sampler;
pub mod simstudy;

pub use assessment::{assess, dic, jackknife_residuals, waic, AssessmentReport, JackknifeOptions};
pub use diagnostics::{acf, geweke, running_quantiles, GewekeResult};
pub use distributions::RngStream;
pub use error::{Error, ErrorKind, Result};
pub use model::{CensorDirection, CensoredSeries, DesignMatrix, InterceptMode, ParamDraw};
pub use sampler::{posterior_summary, run_gda_msm, Chain, McmcConfig, ModelSpec, ParamSummary};
pub use simstudy::{run_study, simulate, Scenario, SimModel, StudySummary};
