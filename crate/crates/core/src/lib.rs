//! Simulation and calibration toolkit for a seasonally forced vector-borne
//! SIS model with two host strata (diabetic and non-diabetic humans) and a
//! vector population.
//!
//! The crate provides:
//!
//! - [`model`]: parameter/state types, the seasonal biting rate, forces of
//!   infection, and the six-equation right-hand side;
//! - [`ode`]: an adaptive Dormand-Prince 5(4) integrator with dense output
//!   and daily-sampled [`ode::Trajectory`] values;
//! - [`reproduction`]: the effective-parameter reproduction number, the
//!   next-generation-matrix spectral radius, and their seasonal series;
//! - [`datagen`]: reproducible synthetic observation datasets with relative
//!   Gaussian noise;
//! - [`calibrate`]: multi-start bounded least-squares parameter fitting with
//!   confidence bands;
//! - [`analysis`]: prevalence, odds-ratio, correlation, and peak summaries.
//!
//! All values are immutable after construction and all operations are pure
//! functions, so everything here is safe to share across threads.

pub mod analysis;
pub mod calibrate;
pub mod datagen;
pub mod model;
pub mod ode;
pub mod reproduction;

pub use analysis::{aor_series, correlation_matrix, prevalence_series, summarize, AnalysisReport};
pub use calibrate::{
    confidence_bands, local_optimize, loss, multi_start_calibrate, FitResult, FitSpec, FreeParam,
};
pub use datagen::{default_initial_state, generate_dataset, Dataset, NoiseConfig};
pub use model::{
    biting_rate, derivatives, force_of_infection_human, force_of_infection_vector, ModelError,
    ModelParams, StateDerivative, SystemState,
};
pub use ode::{integrate, IntegratorConfig, OdeError, Trajectory};
pub use reproduction::{
    effective_params, r0_effective, r0_ngm, r0_seasonal_series, EffectiveParams, NgmMatrices,
};
