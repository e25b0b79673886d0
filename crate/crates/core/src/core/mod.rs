//! Domain types, noise models, scenario generation and accuracy metrics.

mod metrics;
mod noise;
mod scenario;
pub(crate) mod serde_mat;
mod types;

pub use metrics::{centroid, rmse};
pub use noise::{apply_noise, MAX_NOISE_RETRIES};
pub use scenario::{generate_scenario, generate_scenario_with, run_rng};
pub use types::{
    AnchorSet, LocalizationResult, NoiseModel, RangeVector, Scenario, Warning, TIGHT_RATIO,
};
