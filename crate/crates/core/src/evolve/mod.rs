//! Time integrators: split-step in physical space, RK4 in the profile frame
//! `v = F U(−t) u`, and the backward final-state solver.

mod final_state;
mod profile_frame;
mod residual;
mod split;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Field, Grid, Space};

pub use final_state::{seed_final_state, solve_final_state, uap_errors};
pub use profile_frame::{profile_frame_rhs, solve_profile_frame};
pub use residual::{residual_ej, ResidualNorms};
pub use split::{solve_cauchy, strang_step, SplitStepper};
pub use trajectory::{Observables, ProfileErrors, Trajectory};

/// Default tolerance on the mass fraction outside `|x| < L/4`.
pub const DEFAULT_LEAK_TOL: f64 = 1e-6;
pub const DEFAULT_STEPS_PER_DECADE: usize = 512;

/// Two components at one time, on one grid and in one space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub u1: Field,
    pub u2: Field,
    pub t: f64,
}

impl FieldPair {
    pub fn new(u1: Field, u2: Field, t: f64) -> Result<Self> {
        u1.check_compatible(&u2)?;
        Ok(Self { u1, u2, t })
    }

    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    pub fn space(&self) -> Space {
        self.u1.space()
    }

    pub fn component(&self, j: usize) -> Result<&Field> {
        match j {
            1 => Ok(&self.u1),
            2 => Ok(&self.u2),
            _ => Err(Error::InvalidInput(format!("component must be 1 or 2, got {j}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Physical,
    ProfileFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Physical mode step; the last step before each output time is shortened.
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_spd")]
    pub steps_per_decade: usize,
    pub t0: f64,
    pub t1: f64,
    /// Output times besides `t0` and `t1`; ones outside the run are ignored.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default = "default_leak_tol")]
    pub leak_tol: f64,
    /// Keep the fields at every output time.
    #[serde(default)]
    pub store_snapshots: bool,
    /// Test hook: `false` switches the nonlinear terms off.
    #[serde(default = "yes")]
    pub nonlinear: bool,
}

fn default_dt() -> f64 {
    0.05
}

fn default_spd() -> usize {
    DEFAULT_STEPS_PER_DECADE
}

fn default_leak_tol() -> f64 {
    DEFAULT_LEAK_TOL
}

fn yes() -> bool {
    true
}

impl SolverConfig {
    pub fn physical(t0: f64, t1: f64, dt: f64) -> Self {
        Self {
            mode: Mode::Physical,
            dt,
            steps_per_decade: DEFAULT_STEPS_PER_DECADE,
            t0,
            t1,
            snapshot_times: Vec::new(),
            leak_tol: DEFAULT_LEAK_TOL,
            store_snapshots: false,
            nonlinear: true,
        }
    }

    pub fn profile_frame(t0: f64, t1: f64, steps_per_decade: usize) -> Self {
        Self {
            mode: Mode::ProfileFrame,
            steps_per_decade,
            ..Self::physical(t0, t1, default_dt())
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn storing(mut self) -> Self {
        self.store_snapshots = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t0 == self.t1 {
            return Err(Error::Config(format!(
                "run needs distinct finite endpoints, got t0 = {}, t1 = {}",
                self.t0, self.t1
            )));
        }
        if !(self.leak_tol > 0.0 && self.leak_tol < 1.0) {
            return Err(Error::Config(format!("leak_tol must lie in (0, 1), got {}", self.leak_tol)));
        }
        match self.mode {
            Mode::Physical if !(self.dt.is_finite() && self.dt > 0.0) => {
                Err(Error::Config(format!("dt must be positive, got {}", self.dt)))
            }
            Mode::ProfileFrame if self.steps_per_decade == 0 => {
                Err(Error::Config("steps_per_decade must be positive".into()))
            }
            Mode::ProfileFrame if self.t0 < 1.0 || self.t1 < 1.0 => Err(Error::Config(format!(
                "profile frame runs need t >= 1, got [{}, {}]",
                self.t0, self.t1
            ))),
            _ => Ok(()),
        }
    }

    /// `t0`, the snapshot times strictly inside the run, and `t1`, ordered
    /// in the direction of integration.
    pub fn output_times(&self) -> Vec<f64> {
        let (lo, hi) = (self.t0.min(self.t1), self.t0.max(self.t1));
        let mut inner: Vec<f64> = self
            .snapshot_times
            .iter()
            .copied()
            .filter(|t| *t > lo && *t < hi)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        if self.t1 < self.t0 {
            inner.reverse();
        }
        let mut times = Vec::with_capacity(inner.len() + 2);
        times.push(self.t0);
        times.extend(inner);
        times.push(self.t1);
        times
    }
}

/// `n + 1` times `t0 · (t1/t0)^{k/n}`.
pub fn log_spaced(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let ratio = (t1 / t0).ln();
    (0..=n)
        .map(|k| {
            if k == n {
                t1
            } else {
                t0 * (ratio * k as f64 / n as f64).exp()
            }
        })
        .collect()
}

pub(crate) fn check_finite(pair: &[&Field], t: f64) -> Result<()> {
    if pair.iter().all(|f| f.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}
