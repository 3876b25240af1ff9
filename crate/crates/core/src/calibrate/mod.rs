//! Parameter calibration: a variance-normalized least-squares loss over the
//! two observed infected series, minimized by seeded multi-start bounded
//! local optimization, with residual-based confidence bands.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::model::{ModelParams, SystemState};
use crate::ode::{integrate, IntegratorConfig, OdeError};

mod optimizer;

pub use optimizer::{local_optimize, LocalFit, Termination, Tolerances};

/// Loss assigned when the model cannot be evaluated at a parameter vector
/// (failed integration, degenerate dataset); large but finite so bounded
/// local search can back away from it.
pub const PENALTY_LOSS: f64 = 1e12;

/// Calibration failures.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit spec: {0}")]
    InvalidSpec(String),
    #[error("dataset is empty; nothing to calibrate against")]
    EmptyDataset,
    #[error("objective is non-finite ({value}) at start point {theta:?}")]
    NonFiniteObjective { theta: Vec<f64>, value: f64 },
    #[error("all {n} starts failed:\n{details}")]
    AllStartsFailed { n: usize, details: String },
    #[error("too few residuals for confidence bands: {n} rows, need at least 10")]
    TooFewResiduals { n: usize },
    #[error(transparent)]
    Ode(#[from] OdeError),
}

/// A parameter the calibration may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    AMean,
    AAmp,
    GammaMd,
    GammaNd,
    /// Initially infected fraction of the diabetic group.
    InitFracDiabetic,
    /// Initially infected fraction of the non-diabetic group.
    InitFracNonDiabetic,
    /// Initially infected fraction of the vector population.
    InitFracVector,
}

impl FreeParam {
    /// Biologically-motivated default box for each parameter.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            FreeParam::AMean => (0.01, 0.5),
            FreeParam::AAmp => (0.0, 0.95),
            FreeParam::GammaMd | FreeParam::GammaNd => (1.0 / 365.0, 1.0 / 7.0),
            FreeParam::InitFracDiabetic
            | FreeParam::InitFracNonDiabetic
            | FreeParam::InitFracVector => (0.0, 0.2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::AMean => "a_mean",
            FreeParam::AAmp => "a_amp",
            FreeParam::GammaMd => "gamma_md",
            FreeParam::GammaNd => "gamma_nd",
            FreeParam::InitFracDiabetic => "init_frac_diabetic",
            FreeParam::InitFracNonDiabetic => "init_frac_nondiabetic",
            FreeParam::InitFracVector => "init_frac_vector",
        }
    }
}

/// What to fit and how: free parameters, their boxes, the number of seeded
/// Latin-hypercube starts, and the local convergence tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub free: Vec<FreeParam>,
    /// One `(lower, upper)` pair per free parameter.
    pub bounds: Vec<(f64, f64)>,
    pub n_starts: usize,
    pub seed: u64,
    pub tolerances: Tolerances,
}

impl FitSpec {
    /// Spec with default bounds, 16 starts, and default tolerances.
    pub fn new(free: Vec<FreeParam>, seed: u64) -> Self {
        let bounds = free.iter().map(|p| p.default_bounds()).collect();
        Self {
            free,
            bounds,
            n_starts: 16,
            seed,
            tolerances: Tolerances::default(),
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if self.free.is_empty() {
            return Err(FitError::InvalidSpec("no free parameters".into()));
        }
        for (i, a) in self.free.iter().enumerate() {
            if self.free[i + 1..].contains(a) {
                return Err(FitError::InvalidSpec(format!(
                    "duplicate free parameter `{}`",
                    a.name()
                )));
            }
        }
        if self.bounds.len() != self.free.len() {
            return Err(FitError::InvalidSpec(format!(
                "{} bounds for {} free parameters",
                self.bounds.len(),
                self.free.len()
            )));
        }
        for (p, (lo, hi)) in self.free.iter().zip(&self.bounds) {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(FitError::InvalidSpec(format!(
                    "bounds for `{}` must be finite with lower < upper, got ({lo}, {hi})",
                    p.name()
                )));
            }
        }
        if self.n_starts < 1 {
            return Err(FitError::InvalidSpec("n_starts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Substitutes `theta` into the fixed parameters and the dataset's initial
/// state (row 0 of the noiseless columns), honoring free initial fractions.
fn build_candidate(
    theta: &[f64],
    free: &[FreeParam],
    fixed: &ModelParams,
    dataset: &Dataset,
) -> (ModelParams, SystemState) {
    let mut params = fixed.clone();
    let first = &dataset.rows[0];
    let mut initial = SystemState {
        s_d: first.s_d,
        i_md: first.i_md,
        s_nd: first.s_nd,
        i_m: first.i_m,
        s_v: first.s_v,
        i_v: first.i_v,
    };
    for (p, &v) in free.iter().zip(theta) {
        match p {
            FreeParam::AMean => params.a_mean = v,
            FreeParam::AAmp => params.a_amp = v,
            FreeParam::GammaMd => params.gamma_md = v,
            FreeParam::GammaNd => params.gamma_nd = v,
            FreeParam::InitFracDiabetic => {
                initial.i_md = v * params.n_d as f64;
                initial.s_d = params.n_d as f64 - initial.i_md;
            }
            FreeParam::InitFracNonDiabetic => {
                initial.i_m = v * params.n_nd as f64;
                initial.s_nd = params.n_nd as f64 - initial.i_m;
            }
            FreeParam::InitFracVector => {
                initial.i_v = v * params.n_v as f64;
                initial.s_v = params.n_v as f64 - initial.i_v;
            }
        }
    }
    (params, initial)
}

fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n == 0 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// Outcome of one [`loss`] evaluation, distinguishing penalty values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEval {
    pub value: f64,
    /// True when the value is the integration-failure penalty rather than a
    /// residual sum.
    pub penalized: bool,
}

/// Variance-normalized sum of squared residuals over the two observed
/// infected series:
/// `L = Σ_t (obs_I_MD − I_MD)² / ν_D + Σ_t (obs_I_M − I_M)² / ν_ND`,
/// with `ν` each observed series' variance. Always finite; integration
/// failure yields [`PENALTY_LOSS`].
pub fn loss(theta: &[f64], dataset: &Dataset, fixed: &ModelParams, spec: &FitSpec) -> f64 {
    loss_detailed(theta, dataset, fixed, spec).value
}

/// [`loss`] plus the penalty flag.
pub fn loss_detailed(
    theta: &[f64],
    dataset: &Dataset,
    fixed: &ModelParams,
    spec: &FitSpec,
) -> LossEval {
    let penalty = LossEval {
        value: PENALTY_LOSS,
        penalized: true,
    };
    if dataset.rows.len() < 2 {
        return penalty;
    }
    let (params, initial) = build_candidate(theta, &spec.free, fixed, dataset);
    let times = dataset.times();
    let t0 = times[0];
    let t_end = *times.last().expect("non-empty dataset");
    let traj = match integrate(&params, &initial, t0, t_end, &IntegratorConfig::default()) {
        Ok(t) => t,
        Err(_) => return penalty,
    };
    let states = match traj.sample_at(&times) {
        Ok(s) => s,
        Err(_) => return penalty,
    };

    let var_d = population_variance(dataset.rows.iter().map(|r| r.obs_i_md));
    let var_nd = population_variance(dataset.rows.iter().map(|r| r.obs_i_m));
    let nu_d = if var_d > 0.0 { var_d } else { 1.0 };
    let nu_nd = if var_nd > 0.0 { var_nd } else { 1.0 };

    let mut sum = 0.0;
    for (row, state) in dataset.rows.iter().zip(&states) {
        let r_d = row.obs_i_md - state.i_md;
        let r_nd = row.obs_i_m - state.i_m;
        sum += r_d * r_d / nu_d + r_nd * r_nd / nu_nd;
    }
    if sum.is_finite() {
        LossEval {
            value: sum,
            penalized: false,
        }
    } else {
        penalty
    }
}

/// Stratified Latin-hypercube start points inside the bounds, seeded.
fn latin_hypercube(rng: &mut ChaCha12Rng, n: usize, bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let dim = bounds.len();
    let mut starts = vec![vec![0.0; dim]; n];
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        let mut vals: Vec<f64> = (0..n)
            .map(|k| (k as f64 + rng.random::<f64>()) / n as f64)
            .collect();
        vals.shuffle(rng);
        for (start, v) in starts.iter_mut().zip(vals) {
            start[j] = lo + v * (hi - lo);
        }
    }
    starts
}

/// One multi-start record: where the local search began and how it ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub outcome: StartOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartOutcome {
    Converged(LocalFit),
    Failed { reason: String },
}

/// Symmetric 95% confidence bands around the fitted infected series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands {
    /// How the band was built: fitted curve ± 1.96 × residual standard
    /// deviation of that series (homoscedastic residual band).
    pub method: String,
    pub residual_sigma_i_md: f64,
    pub residual_sigma_i_m: f64,
    pub times: Vec<f64>,
    pub fit_i_md: Vec<f64>,
    pub lo_i_md: Vec<f64>,
    pub hi_i_md: Vec<f64>,
    pub fit_i_m: Vec<f64>,
    pub lo_i_m: Vec<f64>,
    pub hi_i_m: Vec<f64>,
}

impl ConfidenceBands {
    /// CSV with header `time,fit_I_MD,lo_I_MD,hi_I_MD,fit_I_M,lo_I_M,hi_I_M`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,fit_I_MD,lo_I_MD,hi_I_MD,fit_I_M,lo_I_M,hi_I_M")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.times[i],
                self.fit_i_md[i],
                self.lo_i_md[i],
                self.hi_i_md[i],
                self.fit_i_m[i],
                self.lo_i_m[i],
                self.hi_i_m[i]
            )?;
        }
        Ok(())
    }
}

/// Multi-start calibration result: the winning parameter vector plus full
/// per-start diagnostics and (when the dataset is long enough) confidence
/// bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub free: Vec<FreeParam>,
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
    pub best_index: usize,
    pub best_theta: Vec<f64>,
    pub best_loss: f64,
    pub starts: Vec<StartRecord>,
    pub bands: Option<ConfidenceBands>,
    pub warnings: Vec<String>,
}

impl FitResult {
    /// Fitted value for one free parameter, if it was part of the fit.
    pub fn fitted(&self, param: FreeParam) -> Option<f64> {
        self.free
            .iter()
            .position(|p| *p == param)
            .map(|i| self.best_theta[i])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("FitResult serializes")
    }
}

/// Runs `spec.n_starts` bounded local searches from seeded Latin-hypercube
/// start points and keeps the best converged fit. Starts run in parallel;
/// records and the winner are reduced in start-index order, so results are
/// deterministic for a given `(dataset, spec, fixed)`.
pub fn multi_start_calibrate(
    dataset: &Dataset,
    fixed: &ModelParams,
    spec: &FitSpec,
) -> Result<FitResult, FitError> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(FitError::EmptyDataset);
    }
    let mut warnings = Vec::new();
    let span = dataset.rows.last().expect("non-empty").time - dataset.rows[0].time;
    let period = fixed.period_months * fixed.days_per_month;
    if span < 2.0 * period {
        let w = format!(
            "dataset spans {span:.0} days, under two seasonal periods ({:.0} days); \
             amplitude may be poorly identified",
            2.0 * period
        );
        log::warn!("{w}");
        warnings.push(w);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    rng.set_stream(2); // distinct from the dataset noise streams 0 and 1
    let starts = latin_hypercube(&mut rng, spec.n_starts, &spec.bounds);

    let records: Vec<StartRecord> = starts
        .into_par_iter()
        .enumerate()
        .map(|(index, start)| {
            let objective = |theta: &[f64]| loss(theta, dataset, fixed, spec);
            let outcome = match local_optimize(objective, &start, &spec.bounds, &spec.tolerances) {
                Ok(fit) => StartOutcome::Converged(fit),
                Err(e) => StartOutcome::Failed {
                    reason: e.to_string(),
                },
            };
            StartRecord {
                index,
                start,
                outcome,
            }
        })
        .collect();

    // A start counts as failed if the local search errored or never left
    // the penalty plateau (the model was unevaluable everywhere it looked).
    let mut best: Option<(usize, &LocalFit)> = None;
    for record in &records {
        if let StartOutcome::Converged(fit) = &record.outcome {
            if fit.loss < PENALTY_LOSS && best.is_none_or(|(_, b)| fit.loss < b.loss) {
                best = Some((record.index, fit));
            }
        }
    }
    let Some((best_index, best_fit)) = best else {
        let details: Vec<String> = records
            .iter()
            .map(|r| match &r.outcome {
                StartOutcome::Failed { reason } => format!("start {}: {reason}", r.index),
                StartOutcome::Converged(fit) => format!(
                    "start {}: stuck at the integration-failure penalty (loss {})",
                    r.index, fit.loss
                ),
            })
            .collect();
        return Err(FitError::AllStartsFailed {
            n: records.len(),
            details: details.join("\n"),
        });
    };

    let mut result = FitResult {
        free: spec.free.clone(),
        bounds: spec.bounds.clone(),
        seed: spec.seed,
        best_index,
        best_theta: best_fit.theta.clone(),
        best_loss: best_fit.loss,
        starts: records.clone(),
        bands: None,
        warnings,
    };
    match confidence_bands(&result, dataset, fixed) {
        Ok(bands) => result.bands = Some(bands),
        Err(e) => result
            .warnings
            .push(format!("confidence bands unavailable: {e}")),
    }
    Ok(result)
}

/// Fitted curves for the winning parameters with symmetric 95% bands:
/// curve ± 1.96 × the residual standard deviation of each observed series.
pub fn confidence_bands(
    fit: &FitResult,
    dataset: &Dataset,
    fixed: &ModelParams,
) -> Result<ConfidenceBands, FitError> {
    if dataset.rows.len() < 10 {
        return Err(FitError::TooFewResiduals {
            n: dataset.rows.len(),
        });
    }
    let (params, initial) = build_candidate(&fit.best_theta, &fit.free, fixed, dataset);
    let times = dataset.times();
    let traj = integrate(
        &params,
        &initial,
        times[0],
        *times.last().expect("non-empty"),
        &IntegratorConfig::default(),
    )?;
    let states = traj.sample_at(&times)?;

    let fit_i_md: Vec<f64> = states.iter().map(|s| s.i_md).collect();
    let fit_i_m: Vec<f64> = states.iter().map(|s| s.i_m).collect();
    let sigma = |obs: Vec<f64>, fitted: &[f64]| -> f64 {
        let n = obs.len();
        let ss: f64 = obs
            .iter()
            .zip(fitted)
            .map(|(o, f)| (o - f) * (o - f))
            .sum();
        (ss / (n as f64 - 1.0)).sqrt()
    };
    let sigma_d = sigma(dataset.rows.iter().map(|r| r.obs_i_md).collect(), &fit_i_md);
    let sigma_nd = sigma(dataset.rows.iter().map(|r| r.obs_i_m).collect(), &fit_i_m);

    let half_d = 1.96 * sigma_d;
    let half_nd = 1.96 * sigma_nd;
    Ok(ConfidenceBands {
        method: "fitted curve ± 1.96 × homoscedastic residual standard deviation".into(),
        residual_sigma_i_md: sigma_d,
        residual_sigma_i_m: sigma_nd,
        lo_i_md: fit_i_md.iter().map(|v| v - half_d).collect(),
        hi_i_md: fit_i_md.iter().map(|v| v + half_d).collect(),
        lo_i_m: fit_i_m.iter().map(|v| v - half_nd).collect(),
        hi_i_m: fit_i_m.iter().map(|v| v + half_nd).collect(),
        times,
        fit_i_md,
        fit_i_m,
    })
}
