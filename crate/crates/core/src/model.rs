//! Parameter and state types for the two-host vector SIS model, the seasonal
//! biting-rate forcing, the forces of infection, and the six-equation
//! right-hand side.
//!
//! Humans are stratified into a diabetic and a non-diabetic group, each with
//! its own transmission probabilities and recovery rate. Both groups follow
//! SIS dynamics with no demographic turnover; the vector population is held
//! constant by a recruitment rate that exactly offsets mortality.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the per-population conservation laws
/// (`S + I = N`) when checking integrated states.
pub const CONSERVATION_REL_TOL: f64 = 1e-6;

/// Errors from parameter or state validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A parameter violates its documented range. `field` is the JSON name.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter {
        field: &'static str,
        reason: String,
    },
    /// A state violates non-negativity or a conservation law.
    #[error("invalid state: {0}")]
    InvalidState(String),
}

fn default_phase_offset() -> f64 {
    10.0
}

fn default_period_months() -> f64 {
    12.0
}

fn default_days_per_month() -> f64 {
    30.4
}

/// All rate, probability, and population constants of the model plus the
/// seasonal forcing constants.
///
/// Serializes to/from JSON with exactly these field names; unknown keys are
/// rejected. The three seasonal-calendar fields (`phase_offset`,
/// `period_months`, `days_per_month`) may be omitted and take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Diabetic human population size (individuals).
    pub n_d: u64,
    /// Non-diabetic human population size (individuals).
    pub n_nd: u64,
    /// Vector population size (individuals).
    pub n_v: u64,
    /// Vector-to-diabetic transmission probability, in `[0, 1]`.
    pub b_d: f64,
    /// Vector-to-non-diabetic transmission probability, in `[0, 1]`.
    pub b_nd: f64,
    /// Diabetic-to-vector transmission probability, in `[0, 1]`.
    pub c_d: f64,
    /// Non-diabetic-to-vector transmission probability, in `[0, 1]`.
    pub c_nd: f64,
    /// Diabetic recovery rate (per day, > 0).
    pub gamma_md: f64,
    /// Non-diabetic recovery rate (per day, > 0).
    pub gamma_nd: f64,
    /// Vector mortality rate (per day, > 0).
    pub mu_v: f64,
    /// Mean biting rate (per day, >= 0).
    pub a_mean: f64,
    /// Seasonal amplitude of the biting rate, in `[0, 1)` so `a(t)` stays
    /// positive.
    pub a_amp: f64,
    /// Month of the seasonal peak (months).
    #[serde(default = "default_phase_offset")]
    pub phase_offset: f64,
    /// Length of one seasonal cycle (months).
    #[serde(default = "default_period_months")]
    pub period_months: f64,
    /// Day-to-month conversion used by the seasonal forcing (days).
    #[serde(default = "default_days_per_month")]
    pub days_per_month: f64,
}

impl Default for ModelParams {
    /// Canonical default parameter set: 80,000 diabetic and 920,000
    /// non-diabetic humans, 2,000,000 vectors, differential transmission
    /// (0.65/0.50 vector-to-human, 0.75/0.50 human-to-vector), 120/60-day
    /// infection durations, 14-day vector lifespan, and a mean biting rate
    /// of 0.1/day with 80% seasonal amplitude.
    fn default() -> Self {
        Self {
            n_d: 80_000,
            n_nd: 920_000,
            n_v: 2_000_000,
            b_d: 0.65,
            b_nd: 0.50,
            c_d: 0.75,
            c_nd: 0.50,
            gamma_md: 1.0 / 120.0,
            gamma_nd: 1.0 / 60.0,
            mu_v: 1.0 / 14.0,
            a_mean: 0.1,
            a_amp: 0.8,
            phase_offset: default_phase_offset(),
            period_months: default_period_months(),
            days_per_month: default_days_per_month(),
        }
    }
}

impl ModelParams {
    /// Total human population `n_d + n_nd` (derived, never stored).
    pub fn n_h_total(&self) -> u64 {
        self.n_d + self.n_nd
    }

    /// Checks every documented invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), ModelError> {
        fn population(field: &'static str, value: u64) -> Result<(), ModelError> {
            if value == 0 {
                return Err(ModelError::InvalidParameter {
                    field,
                    reason: "population must be a strictly positive integer".into(),
                });
            }
            Ok(())
        }
        fn probability(field: &'static str, value: f64) -> Result<(), ModelError> {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(ModelError::InvalidParameter {
                    field,
                    reason: format!("probability must lie in [0, 1], got {value}"),
                });
            }
            Ok(())
        }
        fn positive_rate(field: &'static str, value: f64) -> Result<(), ModelError> {
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::InvalidParameter {
                    field,
                    reason: format!("rate must be strictly positive, got {value}"),
                });
            }
            Ok(())
        }

        population("n_d", self.n_d)?;
        population("n_nd", self.n_nd)?;
        population("n_v", self.n_v)?;
        probability("b_d", self.b_d)?;
        probability("b_nd", self.b_nd)?;
        probability("c_d", self.c_d)?;
        probability("c_nd", self.c_nd)?;
        positive_rate("gamma_md", self.gamma_md)?;
        positive_rate("gamma_nd", self.gamma_nd)?;
        positive_rate("mu_v", self.mu_v)?;
        if !self.a_mean.is_finite() || self.a_mean < 0.0 {
            return Err(ModelError::InvalidParameter {
                field: "a_mean",
                reason: format!("mean biting rate must be non-negative, got {}", self.a_mean),
            });
        }
        if !self.a_amp.is_finite() || !(0.0..1.0).contains(&self.a_amp) {
            return Err(ModelError::InvalidParameter {
                field: "a_amp",
                reason: format!(
                    "seasonal amplitude must lie in [0, 1) so a(t) stays positive, got {}",
                    self.a_amp
                ),
            });
        }
        if !self.phase_offset.is_finite() {
            return Err(ModelError::InvalidParameter {
                field: "phase_offset",
                reason: "must be finite".into(),
            });
        }
        positive_rate("period_months", self.period_months)?;
        positive_rate("days_per_month", self.days_per_month)?;
        Ok(())
    }

    /// Parses parameters from a JSON document and validates them.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let params: ModelParams =
            serde_json::from_str(text).map_err(|e| ModelError::InvalidParameter {
                field: "<json>",
                reason: e.to_string(),
            })?;
        params.validate()?;
        Ok(params)
    }

    /// Serializes to pretty-printed JSON with stable field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ModelParams serializes")
    }
}

/// The six compartment values at one instant, as continuous counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Susceptible diabetic humans.
    pub s_d: f64,
    /// Infected diabetic humans.
    pub i_md: f64,
    /// Susceptible non-diabetic humans.
    pub s_nd: f64,
    /// Infected non-diabetic humans.
    pub i_m: f64,
    /// Susceptible vectors.
    pub s_v: f64,
    /// Infected vectors.
    pub i_v: f64,
}

impl SystemState {
    /// The disease-free equilibrium: everyone susceptible.
    pub fn disease_free(params: &ModelParams) -> Self {
        Self {
            s_d: params.n_d as f64,
            i_md: 0.0,
            s_nd: params.n_nd as f64,
            i_m: 0.0,
            s_v: params.n_v as f64,
            i_v: 0.0,
        }
    }

    /// Builds a conserved state from infected counts; susceptibles fill the
    /// remainder of each population.
    pub fn with_infected(params: &ModelParams, i_md: f64, i_m: f64, i_v: f64) -> Self {
        Self {
            s_d: params.n_d as f64 - i_md,
            i_md,
            s_nd: params.n_nd as f64 - i_m,
            i_m,
            s_v: params.n_v as f64 - i_v,
            i_v,
        }
    }

    /// Checks non-negativity and the three conservation laws against
    /// `params` within `rel_tol` relative tolerance.
    pub fn validate(&self, params: &ModelParams, rel_tol: f64) -> Result<(), ModelError> {
        for (name, value) in [
            ("S_D", self.s_d),
            ("I_MD", self.i_md),
            ("S_ND", self.s_nd),
            ("I_M", self.i_m),
            ("S_V", self.s_v),
            ("I_V", self.i_v),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidState(format!(
                    "compartment {name} must be a non-negative finite count, got {value}"
                )));
            }
        }
        for (label, sum, total) in [
            ("S_D + I_MD", self.s_d + self.i_md, params.n_d as f64),
            ("S_ND + I_M", self.s_nd + self.i_m, params.n_nd as f64),
            ("S_V + I_V", self.s_v + self.i_v, params.n_v as f64),
        ] {
            if (sum - total).abs() > rel_tol * total {
                return Err(ModelError::InvalidState(format!(
                    "conservation violated: {label} = {sum}, expected {total} \
                     (relative error {:.3e} > {rel_tol:.1e})",
                    (sum - total).abs() / total
                )));
            }
        }
        Ok(())
    }

    /// Copy with any negative round-off residue clamped to zero. Applied at
    /// observation time only, never inside the right-hand side.
    pub fn clamped_non_negative(&self) -> Self {
        Self {
            s_d: self.s_d.max(0.0),
            i_md: self.i_md.max(0.0),
            s_nd: self.s_nd.max(0.0),
            i_m: self.i_m.max(0.0),
            s_v: self.s_v.max(0.0),
            i_v: self.i_v.max(0.0),
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.s_d, self.i_md, self.s_nd, self.i_m, self.s_v, self.i_v]
    }

    pub fn from_array(y: [f64; 6]) -> Self {
        Self {
            s_d: y[0],
            i_md: y[1],
            s_nd: y[2],
            i_m: y[3],
            s_v: y[4],
            i_v: y[5],
        }
    }
}

/// Time derivative of [`SystemState`], in individuals per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub s_d: f64,
    pub i_md: f64,
    pub s_nd: f64,
    pub i_m: f64,
    pub s_v: f64,
    pub i_v: f64,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; 6] {
        [self.s_d, self.i_md, self.s_nd, self.i_m, self.s_v, self.i_v]
    }
}

/// Seasonal biting rate
/// `a(t) = a_mean * (1 + a_amp * cos(2π (t / days_per_month − phase_offset) / period_months))`.
///
/// Bounded by `[a_mean (1 − a_amp), a_mean (1 + a_amp)]` and periodic with
/// period `period_months * days_per_month` days.
pub fn biting_rate(t: f64, params: &ModelParams) -> f64 {
    let months = t / params.days_per_month - params.phase_offset;
    let angle = std::f64::consts::TAU * months / params.period_months;
    params.a_mean * (1.0 + params.a_amp * angle.cos())
}

/// Force of infection on humans: `a * i_v / n_v`, the biting rate scaled by
/// the infected fraction of the vector population. Bounded by `[0, a]`.
pub fn force_of_infection_human(a: f64, i_v: f64, n_v: f64) -> Result<f64, ModelError> {
    if n_v <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "n_v",
            reason: "vector population must be positive in the human force of infection".into(),
        });
    }
    Ok(a * i_v / n_v)
}

/// Force of infection on vectors from one host group:
/// `a * c * i_host / n_h_total`, where `c` is that group's host-to-vector
/// transmission probability.
pub fn force_of_infection_vector(
    a: f64,
    c: f64,
    i_host: f64,
    n_h_total: f64,
) -> Result<f64, ModelError> {
    if n_h_total <= 0.0 {
        return Err(ModelError::InvalidParameter {
            field: "n_d",
            reason: "total human population must be positive in the vector force of infection"
                .into(),
        });
    }
    Ok(a * c * i_host / n_h_total)
}

/// Right-hand side of the six compartment equations at time `t`.
///
/// New-infection and recovery flows are each computed once and entered with
/// opposite signs in the paired S/I equations, so the three within-population
/// derivative sums vanish identically. Vector recruitment is `mu_v * n_v`,
/// which offsets mortality exactly on any conserved state.
pub fn derivatives(
    t: f64,
    state: &SystemState,
    params: &ModelParams,
) -> Result<StateDerivative, ModelError> {
    let n_v = params.n_v as f64;
    let n_h = params.n_h_total() as f64;
    let a = biting_rate(t, params);
    let lambda_h = force_of_infection_human(a, state.i_v, n_v)?;
    let lambda_v_d = force_of_infection_vector(a, params.c_d, state.i_md, n_h)?;
    let lambda_v_nd = force_of_infection_vector(a, params.c_nd, state.i_m, n_h)?;
    Ok(rhs_with_forces(
        state, params, lambda_h, lambda_v_d, lambda_v_nd, n_v,
    ))
}

/// Shared flow arithmetic; callers have already formed the forces of
/// infection, so no division by population sizes happens here.
pub(crate) fn rhs_with_forces(
    state: &SystemState,
    params: &ModelParams,
    lambda_h: f64,
    lambda_v_d: f64,
    lambda_v_nd: f64,
    n_v: f64,
) -> StateDerivative {
    let new_inf_d = lambda_h * params.b_d * state.s_d;
    let recover_d = params.gamma_md * state.i_md;
    let new_inf_nd = lambda_h * params.b_nd * state.s_nd;
    let recover_nd = params.gamma_nd * state.i_m;
    let new_inf_v = (lambda_v_d + lambda_v_nd) * state.s_v;
    // Recruitment mu_v * n_v cancels susceptible mortality as
    // mu_v * (n_v - s_v), which equals vector infected mortality bit-for-bit
    // on a conserved state, keeping d(s_v) + d(i_v) exactly zero.
    let net_sus_v = params.mu_v * (n_v - state.s_v);
    let mort_inf_v = params.mu_v * state.i_v;
    StateDerivative {
        s_d: recover_d - new_inf_d,
        i_md: new_inf_d - recover_d,
        s_nd: recover_nd - new_inf_nd,
        i_m: new_inf_nd - recover_nd,
        s_v: net_sus_v - new_inf_v,
        i_v: new_inf_v - mort_inf_v,
    }
}

/// Slice-based right-hand side for the ODE solver. `params` must already be
/// validated; population sizes are then non-zero and no error path remains.
pub(crate) fn rhs_slices(t: f64, y: &[f64], dydt: &mut [f64], params: &ModelParams) {
    let state = SystemState {
        s_d: y[0],
        i_md: y[1],
        s_nd: y[2],
        i_m: y[3],
        s_v: y[4],
        i_v: y[5],
    };
    let n_v = params.n_v as f64;
    let n_h = params.n_h_total() as f64;
    let a = biting_rate(t, params);
    let lambda_h = a * state.i_v / n_v;
    let lambda_v_d = a * params.c_d * state.i_md / n_h;
    let lambda_v_nd = a * params.c_nd * state.i_m / n_h;
    let d = rhs_with_forces(&state, params, lambda_h, lambda_v_d, lambda_v_nd, n_v);
    dydt.copy_from_slice(&d.to_array());
}
