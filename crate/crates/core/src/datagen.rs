//! Synthetic observation datasets: a noiseless daily model trajectory plus
//! noisy observed infected counts, fully reproducible from a seed.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, SystemState};
use crate::ode::{integrate, IntegratorConfig, OdeError};

/// Header of the dataset CSV schema.
pub const DATASET_CSV_HEADER: &str = "time,S_D,I_MD,S_ND,I_M,S_V,I_V,obs_I_MD,obs_I_M";

const COLUMN_NAMES: [&str; 9] = [
    "time", "S_D", "I_MD", "S_ND", "I_M", "S_V", "I_V", "obs_I_MD", "obs_I_M",
];

/// Errors from dataset generation and file I/O.
#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("invalid noise config: {0}")]
    InvalidNoise(String),
    #[error("invalid dataset request: {0}")]
    InvalidRequest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}, line {line}, column `{column}`: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: String,
        reason: String,
    },
    #[error("{path}: schema mismatch: {reason}")]
    Schema { path: PathBuf, reason: String },
    #[error("{path}: invalid provenance metadata: {reason}")]
    Meta { path: PathBuf, reason: String },
}

/// Relative Gaussian observation-noise settings and the RNG seed.
///
/// Observed counts are `max(0, value * (1 + sigma * z))` with `z` standard
/// normal. Draws come from a seeded ChaCha12 generator, one independent
/// stream per observed column: stream 0 for `obs_I_MD`, stream 1 for
/// `obs_I_M`, advanced row by row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative noise fraction on the diabetic infected series, in `[0, 1)`.
    pub sigma_diabetic: f64,
    /// Relative noise fraction on the non-diabetic infected series, in `[0, 1)`.
    pub sigma_nondiabetic: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_diabetic: 0.15,
            sigma_nondiabetic: 0.20,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        for (name, v) in [
            ("sigma_diabetic", self.sigma_diabetic),
            ("sigma_nondiabetic", self.sigma_nondiabetic),
        ] {
            if !v.is_finite() || !(0.0..1.0).contains(&v) {
                return Err(DataError::InvalidNoise(format!(
                    "{name} must lie in [0, 1), got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One daily observation row: the noiseless state plus the two noisy
/// observed infected counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub time: f64,
    pub s_d: f64,
    pub i_md: f64,
    pub s_nd: f64,
    pub i_m: f64,
    pub s_v: f64,
    pub i_v: f64,
    pub obs_i_md: f64,
    pub obs_i_m: f64,
}

/// How the dataset was produced; written as the sibling `.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub generator_version: String,
    pub params: ModelParams,
    pub initial: SystemState,
    pub duration_days: u64,
    pub noise: NoiseConfig,
    /// Rows per column outside the documented reference ranges (flag only).
    pub out_of_reference_range: BTreeMap<String, usize>,
    /// Unix seconds; populated only on request so reruns stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub generated_at_unix: Option<u64>,
}

/// A generated (or loaded) observation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub provenance: Option<Provenance>,
}

/// Reference ranges for the default population scale, used to flag (never
/// reject) unusual values at generation time.
const REFERENCE_RANGES: [(&str, f64, f64); 8] = [
    ("S_D", 75_000.0, 80_000.0),
    ("I_MD", 0.0, 5_000.0),
    ("S_ND", 870_000.0, 920_000.0),
    ("I_M", 0.0, 50_000.0),
    ("S_V", 1_900_000.0, 2_000_000.0),
    ("I_V", 0.0, 100_000.0),
    ("obs_I_MD", 0.0, 5_000.0),
    ("obs_I_M", 0.0, 50_000.0),
];

/// Default outbreak seeding: 2.5% of diabetics, 2.0% of non-diabetics, and
/// 1.0% of vectors start infected.
///
/// The group fractions differ so the two groups start from distinct
/// infection odds.
pub fn default_initial_state(params: &ModelParams) -> SystemState {
    SystemState::with_infected(
        params,
        0.025 * params.n_d as f64,
        0.020 * params.n_nd as f64,
        0.010 * params.n_v as f64,
    )
}

/// `max(0, value * (1 + sigma * z))`: multiplicative mean-one relative noise,
/// clamped at zero.
pub fn apply_relative_noise(value: f64, sigma: f64, z: f64) -> f64 {
    (value * (1.0 + sigma * z)).max(0.0)
}

fn column_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Integrates the model over `[0, duration_days]`, samples daily, and
/// attaches noisy observations of both infected series. Deterministic given
/// the seed.
pub fn generate_dataset(
    params: &ModelParams,
    initial: &SystemState,
    duration_days: u64,
    noise: &NoiseConfig,
) -> Result<Dataset, DataError> {
    if duration_days < 1 {
        return Err(DataError::InvalidRequest(
            "duration_days must be at least 1".into(),
        ));
    }
    noise.validate()?;

    let traj = integrate(
        params,
        initial,
        0.0,
        duration_days as f64,
        &IntegratorConfig::default(),
    )?;
    let mut rng_d = column_rng(noise.seed, 0);
    let mut rng_nd = column_rng(noise.seed, 1);

    let rows: Vec<DatasetRow> = traj
        .times()
        .iter()
        .zip(traj.states())
        .map(|(&t, s)| {
            let z_d: f64 = StandardNormal.sample(&mut rng_d);
            let z_nd: f64 = StandardNormal.sample(&mut rng_nd);
            DatasetRow {
                time: t,
                s_d: s.s_d,
                i_md: s.i_md,
                s_nd: s.s_nd,
                i_m: s.i_m,
                s_v: s.s_v,
                i_v: s.i_v,
                obs_i_md: apply_relative_noise(s.i_md, noise.sigma_diabetic, z_d),
                obs_i_m: apply_relative_noise(s.i_m, noise.sigma_nondiabetic, z_nd),
            }
        })
        .collect();

    let mut dataset = Dataset {
        rows,
        provenance: None,
    };
    dataset.provenance = Some(Provenance {
        generator: "vbd-core".into(),
        generator_version: env!("CARGO_PKG_VERSION").into(),
        params: params.clone(),
        initial: *initial,
        duration_days,
        noise: *noise,
        out_of_reference_range: dataset.reference_range_flags(),
        generated_at_unix: None,
    });
    Ok(dataset)
}

impl Dataset {
    /// Wraps a trajectory as a noise-free dataset: observed columns equal
    /// the model columns. No provenance attached.
    pub fn from_trajectory(traj: &crate::ode::Trajectory) -> Self {
        let rows = traj
            .times()
            .iter()
            .zip(traj.states())
            .map(|(&t, s)| DatasetRow {
                time: t,
                s_d: s.s_d,
                i_md: s.i_md,
                s_nd: s.s_nd,
                i_m: s.i_m,
                s_v: s.s_v,
                i_v: s.i_v,
                obs_i_md: s.i_md,
                obs_i_m: s.i_m,
            })
            .collect();
        Dataset {
            rows,
            provenance: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.time).collect()
    }

    /// The noiseless state columns as a trajectory (grid samples only).
    pub fn to_trajectory(&self) -> Result<crate::ode::Trajectory, OdeError> {
        let times = self.times();
        let states = self
            .rows
            .iter()
            .map(|r| SystemState {
                s_d: r.s_d,
                i_md: r.i_md,
                s_nd: r.s_nd,
                i_m: r.i_m,
                s_v: r.s_v,
                i_v: r.i_v,
            })
            .collect();
        crate::ode::Trajectory::from_samples(times, states)
    }

    /// Count of values per column outside the documented reference ranges.
    /// Columns with no excursions are omitted.
    pub fn reference_range_flags(&self) -> BTreeMap<String, usize> {
        let mut flags = BTreeMap::new();
        for row in &self.rows {
            let values = [
                row.s_d, row.i_md, row.s_nd, row.i_m, row.s_v, row.i_v, row.obs_i_md, row.obs_i_m,
            ];
            for ((name, lo, hi), v) in REFERENCE_RANGES.iter().zip(values) {
                if v < *lo || v > *hi {
                    *flags.entry((*name).to_string()).or_insert(0) += 1;
                }
            }
        }
        flags
    }

    fn meta_path(path: &Path) -> PathBuf {
        path.with_extension("meta.json")
    }

    /// Writes the CSV (exact schema header, shortest round-trip decimal
    /// literals) and, when provenance is present, the sibling `.meta.json`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<(), DataError> {
        let path = path.as_ref();
        let io_err = |source| DataError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{DATASET_CSV_HEADER}").map_err(io_err)?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.time, r.s_d, r.i_md, r.s_nd, r.i_m, r.s_v, r.i_v, r.obs_i_md, r.obs_i_m
            )
            .map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;

        if let Some(p) = &self.provenance {
            let meta = Self::meta_path(path);
            let text = serde_json::to_string_pretty(p).expect("provenance serializes");
            std::fs::write(&meta, text + "\n").map_err(|source| DataError::Io {
                path: meta.clone(),
                source,
            })?;
        }
        Ok(())
    }

    /// Reads a dataset CSV, enforcing the exact header, numeric cells, and a
    /// strictly increasing time column. Provenance is loaded from the
    /// sibling `.meta.json` when present.
    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self, DataError> {
        let path = path.as_ref();
        let io_err = |source| DataError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::open(path).map_err(io_err)?;
        let reader = std::io::BufReader::new(file);
        let mut lines = reader.lines();

        let header = match lines.next() {
            Some(line) => line.map_err(io_err)?,
            None => {
                return Err(DataError::Schema {
                    path: path.to_path_buf(),
                    reason: "file is empty; expected header".into(),
                })
            }
        };
        if header.trim_end() != DATASET_CSV_HEADER {
            return Err(DataError::Schema {
                path: path.to_path_buf(),
                reason: format!("header `{header}` does not match `{DATASET_CSV_HEADER}`"),
            });
        }

        let mut rows = Vec::new();
        let mut prev_time = f64::NEG_INFINITY;
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2; // header is line 1
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != COLUMN_NAMES.len() {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    column: "<row>".into(),
                    reason: format!("expected {} cells, found {}", COLUMN_NAMES.len(), cells.len()),
                });
            }
            let mut values = [0.0f64; 9];
            for (i, (cell, name)) in cells.iter().zip(COLUMN_NAMES).enumerate() {
                values[i] = cell.trim().parse().map_err(|e| DataError::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    column: name.to_string(),
                    reason: format!("`{cell}` is not a number ({e})"),
                })?;
            }
            if values[0] <= prev_time {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    column: "time".into(),
                    reason: format!(
                        "time column must be strictly increasing ({} after {prev_time})",
                        values[0]
                    ),
                });
            }
            prev_time = values[0];
            rows.push(DatasetRow {
                time: values[0],
                s_d: values[1],
                i_md: values[2],
                s_nd: values[3],
                i_m: values[4],
                s_v: values[5],
                i_v: values[6],
                obs_i_md: values[7],
                obs_i_m: values[8],
            });
        }

        let meta = Self::meta_path(path);
        let provenance = if meta.exists() {
            let text = std::fs::read_to_string(&meta).map_err(|source| DataError::Io {
                path: meta.clone(),
                source,
            })?;
            Some(
                serde_json::from_str(&text).map_err(|e| DataError::Meta {
                    path: meta.clone(),
                    reason: e.to_string(),
                })?,
            )
        } else {
            None
        };

        Ok(Dataset { rows, provenance })
    }
}
