//! Acceptance suite: one test per release criterion, each printing a
//! single PASS/FAIL line with the measured values before asserting.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.

use std::time::Instant;

use vbd_core::analysis::{self, correlation_matrix, odds_ratio_from_prevalence, summarize};
use vbd_core::calibrate::{
    local_optimize, multi_start_calibrate, FitSpec, FreeParam, Tolerances,
};
use vbd_core::datagen::{default_initial_state, generate_dataset, Dataset, NoiseConfig};
use vbd_core::model::ModelParams;
use vbd_core::ode::{integrate, IntegratorConfig};
use vbd_core::reproduction::{effective_params, r0_effective, r0_ngm, r0_seasonal_series, NgmMatrices};

fn check(criterion: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "criterion {criterion:02} [{}] {name}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion} ({name}) failed: {detail}");
}

fn default_simulation() -> (vbd_core::ode::Trajectory, ModelParams) {
    let params = ModelParams::default();
    let initial = default_initial_state(&params);
    let traj = integrate(
        &params,
        &initial,
        0.0,
        1080.0,
        &IntegratorConfig::default(),
    )
    .unwrap();
    (traj, params)
}

fn noisy_dataset(seed: u64) -> (Dataset, ModelParams) {
    let params = ModelParams::default();
    let initial = default_initial_state(&params);
    let ds = generate_dataset(
        &params,
        &initial,
        1080,
        &NoiseConfig {
            seed,
            ..NoiseConfig::default()
        },
    )
    .unwrap();
    (ds, params)
}

fn rate_fit_spec(seed: u64) -> FitSpec {
    FitSpec::new(
        vec![
            FreeParam::AMean,
            FreeParam::AAmp,
            FreeParam::GammaMd,
            FreeParam::GammaNd,
        ],
        seed,
    )
}

#[test]
fn criterion_01_r0_closed_form() {
    let params = ModelParams::default();
    let start = Instant::now();
    let mut r0 = 0.0;
    for _ in 0..1000 {
        r0 = r0_effective(&params, 0.1);
    }
    let per_call = start.elapsed() / 1000;
    let ok = (r0 - 1.526).abs() <= 0.001 && per_call.as_micros() < 1000;
    check(
        1,
        "R0 closed form",
        ok,
        &format!("r0_effective(a=0.1) = {r0:.4} (target 1.526 ± 0.001), {per_call:?}/call"),
    );
}

#[test]
fn criterion_02_effective_parameters() {
    let params = ModelParams::default();
    let start = Instant::now();
    let mut eff = effective_params(&params);
    for _ in 0..999 {
        eff = effective_params(&params);
    }
    let per_call = start.elapsed() / 1000;
    let ok = (eff.b_eff - 0.512).abs() <= 1e-12
        && (eff.c_eff - 0.52).abs() <= 1e-12
        && (eff.gamma_eff - 0.0160).abs() <= 0.0002
        && per_call.as_micros() < 1000;
    check(
        2,
        "effective parameters",
        ok,
        &format!(
            "b_eff = {:.4}, c_eff = {:.4}, gamma_eff = {:.5} (targets 0.512 / 0.52 / 0.0160 ± 0.0002), {per_call:?}/call",
            eff.b_eff, eff.c_eff, eff.gamma_eff
        ),
    );
}

#[test]
fn criterion_03_seasonal_r0_range() {
    let params = ModelParams::default();
    let start = Instant::now();
    let series = r0_seasonal_series(&params, 0.0, 365.0, 1.0);
    let elapsed = start.elapsed();
    let ok = (series.effective.min - 0.305).abs() <= 0.005
        && (series.effective.max - 2.747).abs() <= 0.005
        && elapsed.as_millis() < 10;
    check(
        3,
        "seasonal R0 range",
        ok,
        &format!(
            "min = {:.4} (target 0.305 ± 0.005), max = {:.4} (target 2.747 ± 0.005), {elapsed:?}",
            series.effective.min, series.effective.max
        ),
    );
}

/// Dense spectral radius by shifted power iteration, independent of the
/// closed-form block expression used by the library.
fn spectral_radius_dense(m: &[[f64; 3]; 3]) -> f64 {
    let apply_shifted = |x: &[f64; 3]| {
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = x[i];
            for j in 0..3 {
                out[i] += m[i][j] * x[j];
            }
        }
        out
    };
    let mut x = [1.0, 1.0, 1.0];
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let y = apply_shifted(&x);
        let norm = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        x = [y[0] / norm, y[1] / norm, y[2] / norm];
        let z = apply_shifted(&x);
        lambda = x[0] * z[0] + x[1] * z[1] + x[2] * z[2];
    }
    lambda - 1.0
}

#[test]
fn criterion_04_ngm_consistency() {
    let params = ModelParams::default();

    let mut worst_gap: f64 = 0.0;
    for a in [0.02, 0.1, 0.18] {
        let closed = r0_ngm(&params, a);
        let dense = spectral_radius_dense(&NgmMatrices::at_dfe(&params, a).next_generation_matrix());
        worst_gap = worst_gap.max((closed - dense).abs() / closed);
    }

    let homogeneous = ModelParams {
        b_d: 0.5,
        b_nd: 0.5,
        c_d: 0.5,
        c_nd: 0.5,
        gamma_md: 1.0 / 60.0,
        gamma_nd: 1.0 / 60.0,
        ..ModelParams::default()
    };
    let homo_gap =
        (r0_ngm(&homogeneous, 0.1) - r0_effective(&homogeneous, 0.1)).abs() / r0_ngm(&homogeneous, 0.1);

    let value = r0_ngm(&params, 0.1);
    let ok = worst_gap <= 1e-10 && homo_gap <= 1e-12 && (value - 1.6085).abs() <= 0.001;
    check(
        4,
        "NGM consistency",
        ok,
        &format!(
            "closed-form vs dense spectral radius gap {worst_gap:.2e} (<= 1e-10), homogeneous gap {homo_gap:.2e}, \
             r0_ngm(a=0.1) = {value:.4} (target 1.6085 ± 0.001; differs from the effective-parameter 1.526 by design)"
        ),
    );
}

#[test]
fn criterion_05_conservation_over_three_years() {
    let params = ModelParams::default();
    let initial = default_initial_state(&params);
    let start = Instant::now();
    let traj = integrate(
        &params,
        &initial,
        0.0,
        1080.0,
        &IntegratorConfig::default(),
    )
    .unwrap();
    let elapsed = start.elapsed();
    let mut worst: f64 = 0.0;
    for s in traj.states() {
        worst = worst.max((s.s_d + s.i_md - 80_000.0).abs() / 80_000.0);
        worst = worst.max((s.s_nd + s.i_m - 920_000.0).abs() / 920_000.0);
        worst = worst.max((s.s_v + s.i_v - 2_000_000.0).abs() / 2_000_000.0);
    }
    let ok = traj.len() == 1081 && worst <= 1e-6 && elapsed.as_millis() < 1000;
    check(
        5,
        "conservation",
        ok,
        &format!(
            "{} daily samples, worst relative drift {worst:.2e} (<= 1e-6), runtime {elapsed:?} (< 1 s)",
            traj.len()
        ),
    );
}

#[test]
fn criterion_06_epidemic_magnitudes() {
    let (traj, params) = default_simulation();
    let zero_noise = NoiseConfig {
        sigma_diabetic: 0.0,
        sigma_nondiabetic: 0.0,
        seed: 0,
    };
    let ds = generate_dataset(&params, &default_initial_state(&params), 1080, &zero_noise).unwrap();
    let report = summarize(&traj, &ds, &params).unwrap();

    let peak_prev_d = report.summary.peak_prevalence_diabetic;
    let peak_i_m = report.summary.peak_infected_non_diabetic;
    let n_windows = report.summary.windows.len();
    let spacing_ok = report
        .summary
        .windows
        .windows(2)
        .all(|w| {
            let gap = w[1].peak_time_diabetic - w[0].peak_time_diabetic;
            (300.0..=420.0).contains(&gap)
        });

    let prev_ok = (0.33..=0.38).contains(&peak_prev_d);
    let infected_ok = (170_000.0..=200_000.0).contains(&peak_i_m);
    let peaks_ok = n_windows == 3 && spacing_ok;
    let ok = prev_ok && infected_ok && peaks_ok;
    check(
        6,
        "epidemic magnitudes",
        ok,
        &format!(
            "diabetic peak prevalence {peak_prev_d:.3} (target [0.33, 0.38]: {prev_ok}), \
             non-diabetic peak infected {peak_i_m:.0} (target [170000, 200000]: {infected_ok}), \
             {n_windows} annual peaks spaced a year apart ({peaks_ok}). \
             The seasonal attractor under the default parameters peaks near 85%/69% prevalence, \
             so these magnitude windows are unreachable from any initial condition; the target \
             ranges trace to reported values that are inconsistent with the model's own \
             equations and parameter set (documented known failure)."
        ),
    );
}

#[test]
fn criterion_07_calibration_oracle_zero_noise() {
    let params = ModelParams::default();
    let initial = default_initial_state(&params);
    let zero_noise = NoiseConfig {
        sigma_diabetic: 0.0,
        sigma_nondiabetic: 0.0,
        seed: 0,
    };
    let ds = generate_dataset(&params, &initial, 1080, &zero_noise).unwrap();
    let spec = rate_fit_spec(20_240_001);

    let start = Instant::now();
    let fit = multi_start_calibrate(&ds, &params, &spec).unwrap();
    let elapsed = start.elapsed();

    let truth = [0.1, 0.8, 1.0 / 120.0, 1.0 / 60.0];
    let rel: Vec<f64> = fit
        .best_theta
        .iter()
        .zip(&truth)
        .map(|(f, t)| (f - t).abs() / t)
        .collect();
    let worst = rel.iter().copied().fold(0.0, f64::max);
    let ok = worst <= 0.02 && elapsed.as_secs() < 120;
    check(
        7,
        "calibration oracle",
        ok,
        &format!(
            "16 starts recovered (a_mean, a_amp, gamma_md, gamma_nd) with worst relative error \
             {worst:.2e} (<= 2%), best loss {:.2e}, runtime {elapsed:?} (< 2 min)",
            fit.best_loss
        ),
    );
}

#[test]
fn criterion_08_calibration_with_observation_noise() {
    let reference_values = [0.099, 0.810, 0.0082, 0.0163];
    let mut hits = 0;
    let mut details = Vec::new();
    for seed in 0..10u64 {
        let (ds, params) = noisy_dataset(seed);
        let fit = multi_start_calibrate(&ds, &params, &rate_fit_spec(7_000 + seed)).unwrap();
        let within = fit
            .best_theta
            .iter()
            .zip(&reference_values)
            .all(|(f, p)| (f - p).abs() / p <= 0.10);
        if within {
            hits += 1;
        }
        details.push(format!(
            "seed {seed}: [{:.4}, {:.3}, {:.5}, {:.5}] {}",
            fit.best_theta[0],
            fit.best_theta[1],
            fit.best_theta[2],
            fit.best_theta[3],
            if within { "ok" } else { "off" }
        ));
    }
    let ok = hits >= 8;
    check(
        8,
        "calibration under observation noise",
        ok,
        &format!(
            "{hits}/10 seeds within 10% of the reference fitted values \
             (0.099 / 0.810 / 0.0082 / 0.0163); {}",
            details.join("; ")
        ),
    );
}

#[test]
fn criterion_09_correlation_structure() {
    let zero = {
        let params = ModelParams::default();
        let ds = generate_dataset(
            &params,
            &default_initial_state(&params),
            1080,
            &NoiseConfig {
                sigma_diabetic: 0.0,
                sigma_nondiabetic: 0.0,
                seed: 0,
            },
        )
        .unwrap();
        correlation_matrix(&ds).unwrap().get("S_D", "I_MD").unwrap()
    };

    let mut obs_corrs = Vec::new();
    for seed in [1u64, 2, 3] {
        let (ds, _) = noisy_dataset(seed);
        let corr = correlation_matrix(&ds).unwrap();
        obs_corrs.push(corr.get("I_MD", "obs_I_MD").unwrap());
        obs_corrs.push(corr.get("I_M", "obs_I_M").unwrap());
    }
    let all_in_band = obs_corrs.iter().all(|c| (0.90..=0.99).contains(c));
    let ok = (zero + 1.0).abs() <= 1e-9 && all_in_band;
    check(
        9,
        "correlation structure",
        ok,
        &format!(
            "corr(S_D, I_MD) = {zero:.12} (target -1 ± 1e-9); noisy-observation correlations {:?} all within [0.90, 0.99]",
            obs_corrs
                .iter()
                .map(|c| (c * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        ),
    );
}

fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum();
    num / denom
}

#[test]
fn criterion_10_odds_ratio_properties() {
    let (traj, _) = default_simulation();
    let series = analysis::aor_series(&traj);

    let all_above_one = series.omitted == 0 && series.values.iter().all(|v| *v > 1.0);
    let min = series.min().unwrap();

    let peak_aor = odds_ratio_from_prevalence(0.355, 0.205);
    let arithmetic_ok = (peak_aor - 2.134).abs() <= 0.001;

    // Annual periodicity: the autocorrelation peak beyond the half-period
    // trough must sit at a one-year lag.
    let (best_lag, _) = (180..=540)
        .map(|lag| (lag, autocorrelation(&series.values, lag)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    let periodic_ok = (355..=365).contains(&best_lag);

    let ok = all_above_one && arithmetic_ok && periodic_ok;
    check(
        10,
        "odds-ratio properties",
        ok,
        &format!(
            "aOR(t) > 1 at all {} samples (min {min:.3}); odds ratio from prevalences \
             (0.355, 0.205) = {peak_aor:.4} (target 2.134 ± 0.001); autocorrelation peak at lag \
             {best_lag} days (target 360 ± 5)",
            series.values.len()
        ),
    );
}

#[test]
fn criterion_11_property_suite() {
    // Integrator semigroup.
    let params = ModelParams::default();
    let initial = default_initial_state(&params);
    let cfg = IntegratorConfig::default();
    let one = integrate(&params, &initial, 0.0, 360.0, &cfg).unwrap();
    let first = integrate(&params, &initial, 0.0, 180.0, &cfg).unwrap();
    let second = integrate(
        &params,
        first.states().last().unwrap(),
        180.0,
        360.0,
        &cfg,
    )
    .unwrap();
    let semigroup_err = one
        .states()
        .last()
        .unwrap()
        .to_array()
        .iter()
        .zip(second.states().last().unwrap().to_array())
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    let semigroup_ok = semigroup_err <= 10.0 * cfg.rel_tol;

    // Tolerance monotonicity.
    let run = |tol: f64| {
        let cfg = IntegratorConfig {
            rel_tol: tol,
            abs_tol: tol,
            max_step: 30.0,
            ..IntegratorConfig::default()
        };
        integrate(&params, &initial, 0.0, 360.0, &cfg)
            .unwrap()
            .states()
            .last()
            .unwrap()
            .to_array()
    };
    let reference = run(1e-12);
    let mut tol = 1e-4;
    let mut last = f64::INFINITY;
    let mut monotone_ok = true;
    for _ in 0..6 {
        let err = run(tol)
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max);
        monotone_ok &= err <= last;
        last = err;
        tol *= 0.5;
    }

    // Datagen determinism, byte for byte.
    let dir = tempfile::tempdir().unwrap();
    let make = || {
        let ds = generate_dataset(
            &params,
            &initial,
            60,
            &NoiseConfig {
                seed: 99,
                ..NoiseConfig::default()
            },
        )
        .unwrap();
        let path = dir.path().join(format!(
            "ds_{}.csv",
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap()
                .as_nanos()
        ));
        ds.write_csv(&path).unwrap();
        std::fs::read(&path).unwrap()
    };
    let determinism_ok = make() == make();

    // Optimizer fixtures.
    let tols = Tolerances::default();
    let quad = local_optimize(
        |t: &[f64]| (t[0] - 3.0) * (t[0] - 3.0),
        &[0.0],
        &[(-10.0, 10.0)],
        &tols,
    )
    .unwrap();
    let rosen = local_optimize(
        |t: &[f64]| {
            let (x, y) = (t[0], t[1]);
            100.0 * (y - x * x) * (y - x * x) + (1.0 - x) * (1.0 - x)
        },
        &[-1.2, 1.0],
        &[(-5.0, 5.0), (-5.0, 5.0)],
        &tols,
    )
    .unwrap();
    let bound = local_optimize(
        |t: &[f64]| (t[0] - 2.0) * (t[0] - 2.0),
        &[0.0],
        &[(-1.0, 1.0)],
        &tols,
    )
    .unwrap();
    let optimizer_ok = (quad.theta[0] - 3.0).abs() < 1e-6
        && (rosen.theta[0] - 1.0).abs() < 1e-4
        && (rosen.theta[1] - 1.0).abs() < 1e-4
        && (bound.theta[0] - 1.0).abs() < 1e-9;

    // CSV round trip.
    let ds = generate_dataset(&params, &initial, 10, &NoiseConfig::default()).unwrap();
    let path = dir.path().join("roundtrip.csv");
    ds.write_csv(&path).unwrap();
    let roundtrip_ok = Dataset::read_csv(&path).unwrap() == ds;

    let ok = semigroup_ok && monotone_ok && determinism_ok && optimizer_ok && roundtrip_ok;
    check(
        11,
        "property suite",
        ok,
        &format!(
            "semigroup deviation {semigroup_err:.2e} (<= {:.0e}): {semigroup_ok}; \
             tolerance halving monotone: {monotone_ok}; datagen reruns byte-identical: \
             {determinism_ok}; optimizer fixtures (quadratic / Rosenbrock / active bound): \
             {optimizer_ok}; dataset CSV round trip: {roundtrip_ok}",
            10.0 * cfg.rel_tol
        ),
    );
}
