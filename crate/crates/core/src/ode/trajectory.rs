//! Daily-sampled model trajectories with continuous interpolation.

use std::io::Write;
use std::path::Path;

use super::solver::DenseSolution;
use super::OdeError;
use crate::model::SystemState;

/// Header of the trajectory CSV schema.
pub const TRAJECTORY_CSV_HEADER: &str = "time,S_D,I_MD,S_ND,I_M,S_V,I_V";

/// A time-indexed sequence of states sampled at every day of the integration
/// span, with interpolation support for off-grid queries.
///
/// Trajectories produced by [`super::integrate`] interpolate with the
/// integrator's dense-output polynomial; trajectories rebuilt from stored
/// samples fall back to a cubic Hermite interpolant with centered-difference
/// slopes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<SystemState>,
    dense: Option<DenseSolution>,
}

impl Trajectory {
    pub(crate) fn new(
        times: Vec<f64>,
        states: Vec<SystemState>,
        dense: Option<DenseSolution>,
    ) -> Self {
        debug_assert_eq!(times.len(), states.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self {
            times,
            states,
            dense,
        }
    }

    /// Rebuilds a trajectory from stored samples (for example, the state
    /// columns of a dataset). Times must be strictly increasing.
    pub fn from_samples(times: Vec<f64>, states: Vec<SystemState>) -> Result<Self, OdeError> {
        if times.len() != states.len() {
            return Err(OdeError::InvalidInput(format!(
                "times and states length mismatch: {} vs {}",
                times.len(),
                states.len()
            )));
        }
        if times.is_empty() {
            return Err(OdeError::InvalidInput("empty trajectory".into()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(OdeError::InvalidInput(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            states,
            dense: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    /// Interpolated states at the requested times. Stored grid times return
    /// the stored state exactly; other times inside the span interpolate.
    pub fn sample_at(&self, times: &[f64]) -> Result<Vec<SystemState>, OdeError> {
        times.iter().map(|&t| self.state_at(t)).collect()
    }

    /// Single-time version of [`Trajectory::sample_at`].
    pub fn state_at(&self, t: f64) -> Result<SystemState, OdeError> {
        let (t0, t1) = (self.start_time(), self.end_time());
        if t < t0 || t > t1 {
            return Err(OdeError::OutOfSpan {
                requested: t,
                t0,
                t_end: t1,
            });
        }
        if let Ok(i) = self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).expect("finite times"))
        {
            return Ok(self.states[i]);
        }
        let state = match &self.dense {
            Some(dense) => {
                let mut y = [0.0; 6];
                dense.eval_into(t, &mut y)?;
                SystemState::from_array(y)
            }
            None => self.hermite_at(t),
        };
        Ok(state.clamped_non_negative())
    }

    /// Cubic Hermite interpolation on stored samples, with slopes from
    /// centered differences (one-sided at the ends).
    fn hermite_at(&self, t: f64) -> SystemState {
        let idx = self
            .times
            .partition_point(|&probe| probe <= t)
            .saturating_sub(1)
            .min(self.times.len() - 2);
        let (ta, tb) = (self.times[idx], self.times[idx + 1]);
        let h = tb - ta;
        let s = (t - ta) / h;
        let ya = self.states[idx].to_array();
        let yb = self.states[idx + 1].to_array();
        let ma = self.slope_at(idx);
        let mb = self.slope_at(idx + 1);

        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let mut y = [0.0; 6];
        for i in 0..6 {
            y[i] = h00 * ya[i] + h10 * h * ma[i] + h01 * yb[i] + h11 * h * mb[i];
        }
        SystemState::from_array(y)
    }

    fn slope_at(&self, i: usize) -> [f64; 6] {
        let n = self.times.len();
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        let dt = self.times[hi] - self.times[lo];
        let a = self.states[lo].to_array();
        let b = self.states[hi].to_array();
        let mut m = [0.0; 6];
        for c in 0..6 {
            m[c] = (b[c] - a[c]) / dt;
        }
        m
    }

    /// Writes the trajectory as CSV with header
    /// `time,S_D,I_MD,S_ND,I_M,S_V,I_V`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                t, s.s_d, s.i_md, s.s_nd, s.i_m, s.s_v, s.i_v
            )?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
