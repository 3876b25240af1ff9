//! Basic reproduction number computed three ways: the population-weighted
//! effective-parameter closed form, the exact next-generation-matrix spectral
//! radius, and the seasonal time series of both.
//!
//! The two pointwise variants agree exactly for a homogeneous host
//! population and differ for stratified hosts; both are reported side by
//! side rather than silently choosing one.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::model::{biting_rate, ModelParams};

/// Population-weighted transmission and recovery parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveParams {
    /// Weighted vector-to-human transmission probability.
    pub b_eff: f64,
    /// Weighted human-to-vector transmission probability.
    pub c_eff: f64,
    /// Weighted recovery rate (per day).
    pub gamma_eff: f64,
}

/// Diabetic-population weights applied to each group-specific parameter:
/// `x_eff = (n_d * x_d + n_nd * x_nd) / n_h_total`.
pub fn effective_params(params: &ModelParams) -> EffectiveParams {
    let n_d = params.n_d as f64;
    let n_nd = params.n_nd as f64;
    let n_h = params.n_h_total() as f64;
    EffectiveParams {
        b_eff: (n_d * params.b_d + n_nd * params.b_nd) / n_h,
        c_eff: (n_d * params.c_d + n_nd * params.c_nd) / n_h,
        gamma_eff: (n_d * params.gamma_md + n_nd * params.gamma_nd) / n_h,
    }
}

/// The two directional reproduction factors whose geometric mean is
/// [`r0_effective`]: expected vectors infected per infectious human
/// (`host_to_vector`) and expected humans infected per infectious vector
/// (`vector_to_host`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalR0 {
    pub host_to_vector: f64,
    pub vector_to_host: f64,
}

/// Directional factors at biting rate `a`:
/// `R_HV = a c_eff n_v / (mu_v n_h)` and `R_VH = a b_eff n_h / (gamma_eff n_v)`.
pub fn directional_r0(params: &ModelParams, a: f64) -> DirectionalR0 {
    let eff = effective_params(params);
    let n_v = params.n_v as f64;
    let n_h = params.n_h_total() as f64;
    DirectionalR0 {
        host_to_vector: a * eff.c_eff * n_v / (params.mu_v * n_h),
        vector_to_host: a * eff.b_eff * n_h / (eff.gamma_eff * n_v),
    }
}

/// Effective-parameter reproduction number
/// `R0 = a * sqrt(b_eff c_eff / (mu_v gamma_eff))`, the geometric mean of the
/// [`directional_r0`] pair.
pub fn r0_effective(params: &ModelParams, a: f64) -> f64 {
    let eff = effective_params(params);
    a * (eff.b_eff * eff.c_eff / (params.mu_v * eff.gamma_eff)).sqrt()
}

/// New-infection matrix `F` and transition matrix `V` over the infected
/// compartments ordered (I_MD, I_M, I_V), evaluated at the disease-free
/// equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NgmMatrices {
    pub f: [[f64; 3]; 3],
    pub v: [[f64; 3]; 3],
}

impl NgmMatrices {
    /// Builds `F` and `V` at the DFE (`S_D = N_D`, `S_ND = N_ND`,
    /// `S_V = N_V`) for biting rate `a`.
    pub fn at_dfe(params: &ModelParams, a: f64) -> Self {
        let n_d = params.n_d as f64;
        let n_nd = params.n_nd as f64;
        let n_v = params.n_v as f64;
        let n_h = params.n_h_total() as f64;
        let f = [
            [0.0, 0.0, a * params.b_d * n_d / n_v],
            [0.0, 0.0, a * params.b_nd * n_nd / n_v],
            [a * params.c_d * n_v / n_h, a * params.c_nd * n_v / n_h, 0.0],
        ];
        let v = [
            [params.gamma_md, 0.0, 0.0],
            [0.0, params.gamma_nd, 0.0],
            [0.0, 0.0, params.mu_v],
        ];
        Self { f, v }
    }

    /// The next-generation matrix `F V^-1` (`V` is diagonal).
    pub fn next_generation_matrix(&self) -> [[f64; 3]; 3] {
        let mut k = [[0.0; 3]; 3];
        for (i, row) in self.f.iter().enumerate() {
            for (j, &fij) in row.iter().enumerate() {
                k[i][j] = fij / self.v[j][j];
            }
        }
        k
    }
}

/// Next-generation-matrix reproduction number: the spectral radius of
/// `F V^-1` at the DFE.
///
/// The anti-diagonal block structure reduces the characteristic polynomial
/// to `λ^3 = q λ` with
/// `q = a^2 / (mu_v n_h) * (b_d c_d n_d / gamma_md + b_nd c_nd n_nd / gamma_nd)`,
/// so the spectral radius is `sqrt(q)`.
pub fn r0_ngm(params: &ModelParams, a: f64) -> f64 {
    let n_d = params.n_d as f64;
    let n_nd = params.n_nd as f64;
    let n_h = params.n_h_total() as f64;
    let q = a * a / (params.mu_v * n_h)
        * (params.b_d * params.c_d * n_d / params.gamma_md
            + params.b_nd * params.c_nd * n_nd / params.gamma_nd);
    q.sqrt()
}

/// One evaluation of the seasonal reproduction-number series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalR0Point {
    pub t: f64,
    pub a_t: f64,
    pub r0_effective: f64,
    pub r0_ngm: f64,
}

/// Minimum, maximum, and mean of one series column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl SeriesSummary {
    fn over<I: Iterator<Item = f64>>(values: I) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut n = 0usize;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        Self {
            min,
            max,
            mean: sum / n as f64,
        }
    }
}

/// Seasonal reproduction-number series with per-variant summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalR0Series {
    pub points: Vec<SeasonalR0Point>,
    pub effective: SeriesSummary,
    pub ngm: SeriesSummary,
}

impl SeasonalR0Series {
    /// CSV with header `time,a_t,r0_effective,r0_ngm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,a_t,r0_effective,r0_ngm")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.t, p.a_t, p.r0_effective, p.r0_ngm)?;
        }
        Ok(())
    }
}

/// Evaluates both R0 variants at the seasonal biting rate on the grid
/// `t0, t0 + step, ...` up to and including `t_end` (within rounding).
///
/// # Panics
/// Panics if `t_end <= t0` or `step <= 0`.
pub fn r0_seasonal_series(params: &ModelParams, t0: f64, t_end: f64, step: f64) -> SeasonalR0Series {
    assert!(t_end > t0, "seasonal series needs t_end > t0");
    assert!(step > 0.0, "seasonal series needs a positive step");
    let n = ((t_end - t0) / step).round() as usize;
    let mut points = Vec::with_capacity(n + 1);
    let mut k = 0usize;
    loop {
        let t = t0 + k as f64 * step;
        if t > t_end + 1e-9 * step {
            break;
        }
        let a = biting_rate(t, params);
        points.push(SeasonalR0Point {
            t,
            a_t: a,
            r0_effective: r0_effective(params, a),
            r0_ngm: r0_ngm(params, a),
        });
        k += 1;
    }
    let effective = SeriesSummary::over(points.iter().map(|p| p.r0_effective));
    let ngm = SeriesSummary::over(points.iter().map(|p| p.r0_ngm));
    SeasonalR0Series {
        points,
        effective,
        ngm,
    }
}
