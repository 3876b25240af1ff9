//! Initial-value-problem solving for the model: an adaptive embedded
//! Runge-Kutta core with dense output, daily-sampled trajectories, and the
//! conservation checks the model guarantees.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{self, ModelError, ModelParams, SystemState, CONSERVATION_REL_TOL};

pub mod solver;
mod trajectory;

pub use solver::{solve, DenseSolution, SolveStats};
pub use trajectory::{Trajectory, TRAJECTORY_CSV_HEADER};

/// Integration failures and invalid solver inputs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid integrator input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {t_last} (last successfully reached time)")]
    StepSizeUnderflow { t_last: f64 },
    #[error("step budget exhausted at t = {t_last}")]
    TooManySteps { t_last: f64 },
    #[error("time {requested} outside solution span [{t0}, {t_end}]")]
    OutOfSpan { requested: f64, t0: f64, t_end: f64 },
    #[error(
        "conservation violated at t = {t}: relative error {relative_error:.3e} exceeds {tolerance:.1e}"
    )]
    ConservationViolated {
        t: f64,
        relative_error: f64,
        tolerance: f64,
    },
}

/// Solver method tag. One adaptive embedded pair is provided.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dormand-Prince 5(4) with quartic dense output.
    #[default]
    DormandPrince45,
}

/// Tolerances and step policy for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Relative local-error tolerance.
    pub rel_tol: f64,
    /// Absolute local-error tolerance (individuals).
    pub abs_tol: f64,
    /// Step-size cap (days); keeps the 12-month forcing well resolved.
    pub max_step: f64,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            max_step: 1.0,
            method: Method::DormandPrince45,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), OdeError> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(OdeError::InvalidInput(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The daily sampling grid over `[t0, t_end]`: `t0` itself, every integer
/// day strictly inside the span, and `t_end`.
fn daily_grid(t0: f64, t_end: f64) -> Vec<f64> {
    let mut grid = vec![t0];
    let mut day = t0.floor() + 1.0;
    while day <= t_end {
        if day > t0 {
            grid.push(day);
        }
        day += 1.0;
    }
    if *grid.last().expect("non-empty grid") < t_end {
        grid.push(t_end);
    }
    grid
}

/// Integrates the six-equation system and samples it at every day of
/// `[t0, t_end]`.
///
/// Every sampled state is checked against the three conservation laws at
/// relative tolerance `1e-6`; negative round-off residue is clamped to zero
/// in the sampled output only.
pub fn integrate(
    params: &ModelParams,
    initial: &SystemState,
    t0: f64,
    t_end: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory, OdeError> {
    params.validate()?;
    initial.validate(params, CONSERVATION_REL_TOL)?;
    if !t0.is_finite() || !t_end.is_finite() || t_end <= t0 {
        return Err(OdeError::InvalidInput(format!(
            "integration span must satisfy t_end > t0 with finite endpoints, got [{t0}, {t_end}]"
        )));
    }

    let rhs = |t: f64, y: &[f64], dydt: &mut [f64]| model::rhs_slices(t, y, dydt, params);
    let dense = solver::solve(rhs, t0, &initial.to_array(), t_end, config)?;

    let times = daily_grid(t0, t_end);
    let mut states = Vec::with_capacity(times.len());
    let mut y = [0.0; 6];
    for &t in &times {
        dense.eval_into(t, &mut y)?;
        let state = SystemState::from_array(y).clamped_non_negative();
        check_conservation(t, &state, params)?;
        states.push(state);
    }
    Ok(Trajectory::new(times, states, Some(dense)))
}

fn check_conservation(t: f64, state: &SystemState, params: &ModelParams) -> Result<(), OdeError> {
    for (sum, total) in [
        (state.s_d + state.i_md, params.n_d as f64),
        (state.s_nd + state.i_m, params.n_nd as f64),
        (state.s_v + state.i_v, params.n_v as f64),
    ] {
        let rel = (sum - total).abs() / total;
        if rel > CONSERVATION_REL_TOL {
            return Err(OdeError::ConservationViolated {
                t,
                relative_error: rel,
                tolerance: CONSERVATION_REL_TOL,
            });
        }
    }
    Ok(())
}
