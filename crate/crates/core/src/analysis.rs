//! Post-processing: prevalence series, infection odds ratios, compartment
//! correlation structure, and windowed peak summaries.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::Dataset;
use crate::model::ModelParams;
use crate::ode::Trajectory;

/// Reporting convention for "annual" peak windows: twelve 30-day months,
/// matching the dataset's 0..1080-day grid for a 36-month run.
pub const ANNUAL_WINDOW_DAYS: f64 = 360.0;

/// Analysis input failures.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("correlation needs at least 3 rows, got {0}")]
    TooFewRows(usize),
    #[error("trajectory and dataset cover different time grids: {0}")]
    GridMismatch(String),
}

/// Infected fraction of each human group at every sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceSeries {
    pub times: Vec<f64>,
    pub diabetic: Vec<f64>,
    pub non_diabetic: Vec<f64>,
}

/// `I_MD / N_D` and `I_M / N_ND` along the trajectory.
pub fn prevalence_series(traj: &Trajectory, params: &ModelParams) -> PrevalenceSeries {
    let n_d = params.n_d as f64;
    let n_nd = params.n_nd as f64;
    PrevalenceSeries {
        times: traj.times().to_vec(),
        diabetic: traj.states().iter().map(|s| s.i_md / n_d).collect(),
        non_diabetic: traj.states().iter().map(|s| s.i_m / n_nd).collect(),
    }
}

/// Odds of infection in the diabetic group over odds in the non-diabetic
/// group, at the time points where both odds are defined and positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsRatioSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Grid points skipped because a denominator (`S_D`, `S_ND`, or `I_M`)
    /// was not strictly positive.
    pub omitted: usize,
}

impl OddsRatioSeries {
    pub fn min(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::min)
    }

    pub fn max(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

/// Odds ratio from two prevalences: `(p_d / (1 - p_d)) / (p_nd / (1 - p_nd))`.
pub fn odds_ratio_from_prevalence(prev_diabetic: f64, prev_non_diabetic: f64) -> f64 {
    (prev_diabetic / (1.0 - prev_diabetic)) / (prev_non_diabetic / (1.0 - prev_non_diabetic))
}

/// `aOR(t) = (I_MD / S_D) / (I_M / S_ND)` along the trajectory. Points whose
/// denominators vanish are omitted and counted.
pub fn aor_series(traj: &Trajectory) -> OddsRatioSeries {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut omitted = 0usize;
    for (&t, s) in traj.times().iter().zip(traj.states()) {
        if s.s_d > 0.0 && s.s_nd > 0.0 && s.i_m > 0.0 {
            times.push(t);
            values.push((s.i_md / s.s_d) / (s.i_m / s.s_nd));
        } else {
            omitted += 1;
        }
    }
    OddsRatioSeries {
        times,
        values,
        omitted,
    }
}

/// Column labels of the correlation matrix, in order.
pub const CORRELATION_LABELS: [&str; 8] = [
    "S_D", "I_MD", "S_ND", "I_M", "S_V", "I_V", "obs_I_MD", "obs_I_M",
];

/// Labeled symmetric Pearson correlation matrix over the eight dataset
/// columns. Entries involving a constant column are undefined (`None`)
/// rather than dropped, so the shape is stable; the diagonal is identically
/// one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == row)?;
        let j = self.labels.iter().position(|l| l == col)?;
        self.values[i][j]
    }

    /// CSV with a labeled header row and a label column; undefined entries
    /// are written as `NaN`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, ",{}", self.labels.join(","))?;
        for (label, row) in self.labels.iter().zip(&self.values) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Some(x) => x.to_string(),
                    None => "NaN".to_string(),
                })
                .collect();
            writeln!(w, "{label},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Pearson correlation over the full time range for every pair of dataset
/// columns.
pub fn correlation_matrix(dataset: &Dataset) -> Result<CorrelationMatrix, AnalysisError> {
    let n = dataset.rows.len();
    if n < 3 {
        return Err(AnalysisError::TooFewRows(n));
    }
    let columns: Vec<Vec<f64>> = (0..8)
        .map(|c| {
            dataset
                .rows
                .iter()
                .map(|r| match c {
                    0 => r.s_d,
                    1 => r.i_md,
                    2 => r.s_nd,
                    3 => r.i_m,
                    4 => r.s_v,
                    5 => r.i_v,
                    6 => r.obs_i_md,
                    _ => r.obs_i_m,
                })
                .collect()
        })
        .collect();
    let means: Vec<f64> = columns
        .iter()
        .map(|col| col.iter().sum::<f64>() / n as f64)
        .collect();
    let sum_sq: Vec<f64> = columns
        .iter()
        .zip(&means)
        .map(|(col, m)| col.iter().map(|v| (v - m) * (v - m)).sum())
        .collect();

    let mut values = vec![vec![None; 8]; 8];
    for i in 0..8 {
        values[i][i] = Some(1.0);
        for j in (i + 1)..8 {
            let entry = if sum_sq[i] == 0.0 || sum_sq[j] == 0.0 {
                None // constant column: correlation undefined
            } else {
                let cov: f64 = columns[i]
                    .iter()
                    .zip(&columns[j])
                    .map(|(a, b)| (a - means[i]) * (b - means[j]))
                    .sum();
                Some(cov / (sum_sq[i] * sum_sq[j]).sqrt())
            };
            values[i][j] = entry;
            values[j][i] = entry;
        }
    }
    Ok(CorrelationMatrix {
        labels: CORRELATION_LABELS.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

/// Peak infection in one reporting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPeak {
    pub window_start: f64,
    pub window_end: f64,
    pub peak_time_diabetic: f64,
    pub peak_infected_diabetic: f64,
    pub peak_prevalence_diabetic: f64,
    pub peak_time_non_diabetic: f64,
    pub peak_infected_non_diabetic: f64,
    pub peak_prevalence_non_diabetic: f64,
}

/// Headline numbers: global and per-window peaks plus the odds-ratio range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub window_days: f64,
    pub windows: Vec<WindowPeak>,
    pub peak_prevalence_diabetic: f64,
    pub peak_prevalence_non_diabetic: f64,
    pub peak_infected_diabetic: f64,
    pub peak_infected_non_diabetic: f64,
    pub aor_min: Option<f64>,
    pub aor_max: Option<f64>,
    pub aor_points_omitted: usize,
}

/// Full post-processing output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub prevalence: PrevalenceSeries,
    pub odds_ratio: OddsRatioSeries,
    pub correlation: CorrelationMatrix,
    pub summary: AnalysisSummary,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("AnalysisReport serializes")
    }

    /// CSV with header `time,prev_D,prev_ND,odds_ratio`; omitted odds-ratio
    /// points are written as `NaN`.
    pub fn write_series_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,prev_D,prev_ND,odds_ratio")?;
        let mut aor_idx = 0usize;
        for (i, &t) in self.prevalence.times.iter().enumerate() {
            let aor = if aor_idx < self.odds_ratio.times.len()
                && self.odds_ratio.times[aor_idx] == t
            {
                let v = self.odds_ratio.values[aor_idx];
                aor_idx += 1;
                v.to_string()
            } else {
                "NaN".to_string()
            };
            writeln!(
                w,
                "{t},{},{},{aor}",
                self.prevalence.diabetic[i], self.prevalence.non_diabetic[i]
            )?;
        }
        Ok(())
    }
}

fn times_align(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(1.0))
}

/// Assembles the full report from a trajectory and the observation dataset
/// covering the same time grid. Peak detection takes the maximum inside
/// each [`ANNUAL_WINDOW_DAYS`] window.
pub fn summarize(
    traj: &Trajectory,
    dataset: &Dataset,
    params: &ModelParams,
) -> Result<AnalysisReport, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::EmptyTrajectory);
    }
    let dataset_times = dataset.times();
    if !times_align(traj.times(), &dataset_times) {
        return Err(AnalysisError::GridMismatch(format!(
            "trajectory has {} samples over [{}, {}], dataset has {} rows",
            traj.len(),
            traj.start_time(),
            traj.end_time(),
            dataset.len(),
        )));
    }

    let prevalence = prevalence_series(traj, params);
    let odds_ratio = aor_series(traj);
    let correlation = correlation_matrix(dataset)?;

    let n_d = params.n_d as f64;
    let n_nd = params.n_nd as f64;
    let times = traj.times();
    let t0 = traj.start_time();
    let t_end = traj.end_time();

    let mut windows = Vec::new();
    let mut w_start = t0;
    while w_start < t_end {
        let w_end = (w_start + ANNUAL_WINDOW_DAYS).min(t_end);
        let in_window = || {
            times
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= w_start && t <= w_end)
        };
        let best_d = in_window()
            .max_by(|a, b| {
                let sa = traj.states()[a.0].i_md;
                let sb = traj.states()[b.0].i_md;
                sa.partial_cmp(&sb).expect("finite counts")
            })
            .expect("window contains samples");
        let best_nd = in_window()
            .max_by(|a, b| {
                let sa = traj.states()[a.0].i_m;
                let sb = traj.states()[b.0].i_m;
                sa.partial_cmp(&sb).expect("finite counts")
            })
            .expect("window contains samples");
        let i_md = traj.states()[best_d.0].i_md;
        let i_m = traj.states()[best_nd.0].i_m;
        windows.push(WindowPeak {
            window_start: w_start,
            window_end: w_end,
            peak_time_diabetic: *best_d.1,
            peak_infected_diabetic: i_md,
            peak_prevalence_diabetic: i_md / n_d,
            peak_time_non_diabetic: *best_nd.1,
            peak_infected_non_diabetic: i_m,
            peak_prevalence_non_diabetic: i_m / n_nd,
        });
        w_start += ANNUAL_WINDOW_DAYS;
    }

    let fold_max = |f: fn(&WindowPeak) -> f64| {
        windows
            .iter()
            .map(f)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let summary = AnalysisSummary {
        window_days: ANNUAL_WINDOW_DAYS,
        peak_prevalence_diabetic: fold_max(|w| w.peak_prevalence_diabetic),
        peak_prevalence_non_diabetic: fold_max(|w| w.peak_prevalence_non_diabetic),
        peak_infected_diabetic: fold_max(|w| w.peak_infected_diabetic),
        peak_infected_non_diabetic: fold_max(|w| w.peak_infected_non_diabetic),
        aor_min: odds_ratio.min(),
        aor_max: odds_ratio.max(),
        aor_points_omitted: odds_ratio.omitted,
        windows,
    };

    Ok(AnalysisReport {
        prevalence,
        odds_ratio,
        correlation,
        summary,
    })
}
