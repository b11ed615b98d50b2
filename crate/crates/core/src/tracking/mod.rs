//! Kalman-filter target tracking with sector selection planned by MAA*.

pub mod grid;
pub mod kalman;
pub mod model;
pub mod sector;
pub mod sim;

use thiserror::Error;

use crate::maastar::SolveError;

pub use grid::{discretize_belief, GridGeometry};
pub use kalman::{differential_entropy, kf_step, KalmanEstimate, KalmanNoise};
pub use model::{build_tracking_model, TrackingModelParams, TrackingStepModel};
pub use sector::{sector_overlap_fraction, ObserverSpec, Sector};
pub use sim::{simulate_tracking, TrackingController, TrackingMetrics, TrackingScenario};

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("invalid tracking configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}
