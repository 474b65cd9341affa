//! Calibration assessment and boldness-recalibration for binary-event
//! probability forecasts.
//!
//! The crate is organised around the linear-log-odds (LLO) recalibration
//! family `c(x; δ, γ) = δx^γ / (δx^γ + (1-x)^γ)`:
//!
//! - [`llo`]: the LLO map, its inverse and the Bernoulli log-likelihood.
//! - [`estimation`]: maximum-likelihood fitting of `(δ, γ)`.
//! - [`assessment`]: posterior probability of calibration (BIC-approximated
//!   Bayes factor), likelihood-ratio test, Brier/BSC/ECE/AUC.
//! - [`boldness`]: posterior grids over `(δ, γ)` and boldness-recalibration,
//!   i.e. maximising prediction spread subject to a calibration floor.
//! - [`simulation`]: seeded forecaster archetypes and the Monte Carlo study.
//! - [`io`] and [`cli`]: CSV ingestion, reports and the `boldcal` binary.

pub mod assessment;
pub mod boldness;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod io;
pub mod llo;
mod optim;
pub mod simulation;
pub mod stats;

pub use assessment::{
    assess, auc, brier, brier_calibration, ece, lrt, posterior_calibration, BayesAssessment,
    CalibrationReport, LrtResult, ScoreReport,
};
pub use boldness::{
    boldness_recalibrate, evaluate_grid, refine_grid, select_boldness, spread, BoldnessResult,
    ContourGrid, GridCell, GridSpec,
};
pub use error::{CalibError, Result};
pub use estimation::{fit_mle, MleFit};
pub use llo::{llo_adjust, llo_inverse, log_likelihood, LloParams, PredictionSet, CLAMP_EPS};
pub use simulation::{
    generate_replicate, run_mc_study, ForecasterKind, ForecasterSpec, McStudyConfig, Replicate,
    StudyRow, StudyTable,
};
