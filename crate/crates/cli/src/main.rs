//! `vbd` — reproducible command-line workflows over the two-host
//! vector-borne SIS model: simulate, reproduction numbers, synthetic data
//! generation, calibration, and analysis.
//!
//! Every command reads an optional JSON config file plus flags (flags win),
//! writes into an output directory it creates if absent, and refuses to
//! overwrite existing files unless `--force` is given. Exit codes: 0 on
//! success, 2 on user/input errors, 3 on numerical failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use vbd_core::analysis::summarize;
use vbd_core::calibrate::{multi_start_calibrate, FitError, FitSpec, FreeParam};
use vbd_core::datagen::{
    default_initial_state, generate_dataset, DataError, Dataset, NoiseConfig,
};
use vbd_core::model::{ModelParams, SystemState};
use vbd_core::ode::{integrate, IntegratorConfig, OdeError};
use vbd_core::reproduction::{
    directional_r0, effective_params, r0_effective, r0_ngm, r0_seasonal_series,
};

#[derive(Parser)]
#[command(
    name = "vbd",
    about = "Two-host vector-borne SIS model: simulation, R0, data generation, calibration, analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the model and write the trajectory plus an analysis report.
    Simulate(SimulateArgs),
    /// Report the reproduction numbers and their seasonal series.
    R0(R0Args),
    /// Generate a reproducible synthetic observation dataset.
    Generate(GenerateArgs),
    /// Fit free parameters to a dataset by multi-start bounded least squares.
    Calibrate(CalibrateArgs),
    /// Post-process a dataset: prevalence, odds ratios, correlations, peaks.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Model parameters JSON (defaults to the built-in parameter set).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON config file supplying defaults for any flag.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
    /// Suppress informational output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Simulation horizon in days.
    #[arg(long)]
    days: Option<u64>,
}

#[derive(Args)]
struct R0Args {
    #[command(flatten)]
    common: CommonArgs,
    /// Span of the seasonal series in days.
    #[arg(long)]
    days: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dataset length in days.
    #[arg(long)]
    days: Option<u64>,
    /// Noise RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record the generation time in the dataset metadata (off by default so
    /// reruns are byte-identical).
    #[arg(long)]
    timestamps: bool,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Observation dataset CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Number of multi-start local searches.
    #[arg(long)]
    starts: Option<usize>,
    /// Start-sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Observation dataset CSV.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

/// Optional JSON defaults for any command-line option; flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    params: Option<PathBuf>,
    dataset: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    days: Option<u64>,
    starts: Option<usize>,
    sigma_diabetic: Option<f64>,
    sigma_nondiabetic: Option<f64>,
    free: Option<Vec<FreeParam>>,
    init_frac_diabetic: Option<f64>,
    init_frac_nondiabetic: Option<f64>,
    init_frac_vector: Option<f64>,
    quiet: Option<bool>,
}

enum CliError {
    User(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::User(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::User(m) | CliError::Numerical(m) => m,
        }
    }
}

fn user<E: std::fmt::Display>(e: E) -> CliError {
    CliError::User(e.to_string())
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepSizeUnderflow { .. }
            | OdeError::TooManySteps { .. }
            | OdeError::ConservationViolated { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::User(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Ode(inner) => inner.into(),
            _ => CliError::User(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::AllStartsFailed { .. } => CliError::Numerical(e.to_string()),
            FitError::Ode(inner) => inner.into(),
            _ => CliError::User(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::R0(args) => cmd_r0(args),
        Command::Generate(args) => cmd_generate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Analyze(args) => cmd_analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

/// Everything resolved from config file + flags that commands share.
struct Context {
    config: FileConfig,
    params_path: Option<PathBuf>,
    out_dir: PathBuf,
    force: bool,
    quiet: bool,
}

impl Context {
    fn resolve(common: &CommonArgs) -> Result<Self, CliError> {
        let config: FileConfig = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::User(format!("{}: invalid config: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let params_path = common.params.clone().or_else(|| config.params.clone());
        let out_dir = common
            .out
            .clone()
            .or_else(|| config.out.clone())
            .unwrap_or_else(|| PathBuf::from("vbd-out"));
        let quiet = common.quiet || config.quiet.unwrap_or(false);
        Ok(Self {
            config,
            params_path,
            out_dir,
            force: common.force,
            quiet,
        })
    }

    fn load_params(&self) -> Result<ModelParams, CliError> {
        match &self.params_path {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
                ModelParams::from_json(&text).map_err(user)
            }
            None => Ok(ModelParams::default()),
        }
    }

    /// Initial state: config fractions where given, library defaults elsewhere.
    fn initial_state(&self, params: &ModelParams) -> SystemState {
        let base = default_initial_state(params);
        let i_md = self
            .config
            .init_frac_diabetic
            .map_or(base.i_md, |f| f * params.n_d as f64);
        let i_m = self
            .config
            .init_frac_nondiabetic
            .map_or(base.i_m, |f| f * params.n_nd as f64);
        let i_v = self
            .config
            .init_frac_vector
            .map_or(base.i_v, |f| f * params.n_v as f64);
        SystemState::with_infected(params, i_md, i_m, i_v)
    }

    /// Creates the output directory and pre-checks the overwrite policy for
    /// every file the command intends to write, before any work happens.
    fn prepare_outputs(&self, names: &[&str]) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| CliError::User(format!("{}: {e}", self.out_dir.display())))?;
        let paths: Vec<PathBuf> = names.iter().map(|n| self.out_dir.join(n)).collect();
        if !self.force {
            for p in &paths {
                if p.exists() {
                    return Err(CliError::User(format!(
                        "{} already exists; pass --force to overwrite",
                        p.display()
                    )));
                }
            }
        }
        Ok(paths)
    }

    fn info(&self, message: &str) {
        if !self.quiet {
            println!("{message}");
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let ctx = Context::resolve(&args.common)?;
    let params = ctx.load_params()?;
    let days = args.days.or(ctx.config.days).unwrap_or(1080);
    if days == 0 {
        return Err(CliError::User("--days must be at least 1".into()));
    }
    let outputs = ctx.prepare_outputs(&["trajectory.csv", "report.json"])?;

    let initial = ctx.initial_state(&params);
    let traj = integrate(
        &params,
        &initial,
        0.0,
        days as f64,
        &IntegratorConfig::default(),
    )?;
    // The report's observation columns mirror the noiseless model output.
    let dataset = Dataset::from_trajectory(&traj);
    let report = summarize(&traj, &dataset, &params).map_err(user)?;

    traj.write_csv_path(&outputs[0])
        .map_err(|e| CliError::User(format!("{}: {e}", outputs[0].display())))?;
    write_text(&outputs[1], &report.to_json())?;
    ctx.info(&format!(
        "wrote {} ({} rows) and {}",
        outputs[0].display(),
        traj.len(),
        outputs[1].display()
    ));
    Ok(())
}

fn cmd_r0(args: R0Args) -> Result<(), CliError> {
    let ctx = Context::resolve(&args.common)?;
    let params = ctx.load_params()?;
    params.validate().map_err(user)?;
    let days = args.days.or(ctx.config.days).unwrap_or(365);
    if days == 0 {
        return Err(CliError::User("--days must be at least 1".into()));
    }
    let outputs = ctx.prepare_outputs(&["r0_report.json", "r0_seasonal.csv"])?;

    let series = r0_seasonal_series(&params, 0.0, days as f64, 1.0);
    let report = serde_json::json!({
        "a_mean": params.a_mean,
        "effective_params": effective_params(&params),
        "r0_effective": r0_effective(&params, params.a_mean),
        "r0_ngm": r0_ngm(&params, params.a_mean),
        "directional": directional_r0(&params, params.a_mean),
        "seasonal": {
            "days": days,
            "r0_effective": series.effective,
            "r0_ngm": series.ngm,
        },
    });
    write_text(
        &outputs[0],
        &serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    let mut buf = Vec::new();
    series
        .write_csv(&mut buf)
        .map_err(|e| CliError::User(e.to_string()))?;
    write_text(&outputs[1], &String::from_utf8(buf).expect("utf8 csv"))?;
    ctx.info(&format!(
        "wrote {} and {}",
        outputs[0].display(),
        outputs[1].display()
    ));
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let ctx = Context::resolve(&args.common)?;
    let params = ctx.load_params()?;
    let days = args.days.or(ctx.config.days).unwrap_or(1080);
    let noise = NoiseConfig {
        sigma_diabetic: ctx.config.sigma_diabetic.unwrap_or(0.15),
        sigma_nondiabetic: ctx.config.sigma_nondiabetic.unwrap_or(0.20),
        seed: args.seed.or(ctx.config.seed).unwrap_or(0),
    };
    let outputs = ctx.prepare_outputs(&["dataset.csv", "dataset.meta.json"])?;

    let initial = ctx.initial_state(&params);
    let mut dataset = generate_dataset(&params, &initial, days, &noise)?;
    if args.timestamps {
        if let Some(p) = dataset.provenance.as_mut() {
            p.generated_at_unix = Some(
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .expect("clock after epoch")
                    .as_secs(),
            );
        }
    }
    dataset.write_csv(&outputs[0])?;
    ctx.info(&format!(
        "wrote {} ({} rows, seed {}) and {}",
        outputs[0].display(),
        dataset.len(),
        noise.seed,
        outputs[1].display()
    ));
    Ok(())
}

/// Fixed parameters for calibrate/analyze: the `--params` file when given,
/// otherwise the dataset's own provenance, otherwise built-in defaults.
fn fixed_params(ctx: &Context, dataset: &Dataset) -> Result<(ModelParams, &'static str), CliError> {
    if ctx.params_path.is_some() {
        return Ok((ctx.load_params()?, "params file"));
    }
    if let Some(p) = &dataset.provenance {
        p.params.validate().map_err(user)?;
        return Ok((p.params.clone(), "dataset provenance"));
    }
    Ok((ModelParams::default(), "built-in defaults"))
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let ctx = Context::resolve(&args.common)?;
    let dataset_path = args
        .dataset
        .clone()
        .or_else(|| ctx.config.dataset.clone())
        .ok_or_else(|| CliError::User("calibrate needs --dataset <file>".into()))?;
    let dataset = Dataset::read_csv(&dataset_path)?;
    let (params, params_source) = fixed_params(&ctx, &dataset)?;

    let free = ctx.config.free.clone().unwrap_or_else(|| {
        vec![
            FreeParam::AMean,
            FreeParam::AAmp,
            FreeParam::GammaMd,
            FreeParam::GammaNd,
        ]
    });
    let mut spec = FitSpec::new(free, args.seed.or(ctx.config.seed).unwrap_or(0));
    if let Some(starts) = args.starts.or(ctx.config.starts) {
        spec.n_starts = starts;
    }
    let outputs = ctx.prepare_outputs(&["fit.json", "fit_curves.csv"])?;

    ctx.info(&format!(
        "calibrating {} free parameters, {} starts, seed {} (fixed parameters from {params_source})",
        spec.free.len(),
        spec.n_starts,
        spec.seed
    ));
    let fit = multi_start_calibrate(&dataset, &params, &spec)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }

    write_text(&outputs[0], &fit.to_json())?;
    if let Some(bands) = &fit.bands {
        let mut buf = Vec::new();
        bands
            .write_csv(&mut buf)
            .map_err(|e| CliError::User(e.to_string()))?;
        write_text(&outputs[1], &String::from_utf8(buf).expect("utf8 csv"))?;
    }
    let pairs: Vec<String> = fit
        .free
        .iter()
        .zip(&fit.best_theta)
        .map(|(p, v)| format!("{} = {v:.6}", p.name()))
        .collect();
    ctx.info(&format!(
        "best loss {:.6e} from start {}: {}",
        fit.best_loss,
        fit.best_index,
        pairs.join(", ")
    ));
    ctx.info(&format!(
        "wrote {} and {}",
        outputs[0].display(),
        outputs[1].display()
    ));
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<(), CliError> {
    let ctx = Context::resolve(&args.common)?;
    let dataset_path = args
        .dataset
        .clone()
        .or_else(|| ctx.config.dataset.clone())
        .ok_or_else(|| CliError::User("analyze needs --dataset <file>".into()))?;
    let dataset = Dataset::read_csv(&dataset_path)?;
    if dataset.is_empty() {
        return Err(CliError::User(format!(
            "{}: dataset has no rows",
            dataset_path.display()
        )));
    }
    let (params, params_source) = fixed_params(&ctx, &dataset)?;
    if params_source == "built-in defaults" {
        ctx.info("no --params and no dataset metadata; using built-in defaults");
    }
    let outputs = ctx.prepare_outputs(&["report.json", "series.csv", "correlation.csv"])?;

    let traj = dataset.to_trajectory()?;
    let report = summarize(&traj, &dataset, &params).map_err(user)?;

    write_text(&outputs[0], &report.to_json())?;
    let mut buf = Vec::new();
    report
        .write_series_csv(&mut buf)
        .map_err(|e| CliError::User(e.to_string()))?;
    write_text(&outputs[1], &String::from_utf8(buf).expect("utf8 csv"))?;
    buf = Vec::new();
    report
        .correlation
        .write_csv(&mut buf)
        .map_err(|e| CliError::User(e.to_string()))?;
    write_text(&outputs[2], &String::from_utf8(buf).expect("utf8 csv"))?;
    ctx.info(&format!(
        "wrote {}, {}, {}",
        outputs[0].display(),
        outputs[1].display(),
        outputs[2].display()
    ));
    Ok(())
}
