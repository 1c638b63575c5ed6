//! Ensembles, studies, persistence.

pub mod config;
pub mod converge;
pub mod ensemble;
pub mod output;
pub mod scale;

pub use config::RunConfig;
pub use converge::{converge_study, ConvergenceReport};
pub use ensemble::{run_ensemble, EnsembleStats, Model};
pub use scale::{scale_limit_study, ScaleLimitReport, ScaleLimitRequest};
