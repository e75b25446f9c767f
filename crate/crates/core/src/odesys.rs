//! Limit ODE for general two-component cubic systems and a log-time RK4.
//!
//! For
//!
//! ```text
//! N1 = 3λ1|A1|²A1 + λ2(2|A1|²A2 + A1²Ā2) + λ3(2A1|A2|² + Ā1A2²) + 3λ4|A2|²A2
//! N2 = 3λ5|A1|²A1 + λ6(2|A1|²A2 + A1²Ā2) + λ7(2A1|A2|² + Ā1A2²) + 3λ8|A2|²A2
//! ```
//!
//! the amplitudes obey `i A' = t⁻¹ N(A)`. In `s = log t` the right-hand side
//! is autonomous, which is why the integrator steps uniformly in `s`.

use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::FinalData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Coupled,
    NewOde1,
    NewOde2,
    DecoupledSource,
    Custom,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" | "paper" => Ok(Preset::Coupled),
            "new1" | "new_ode_1" => Ok(Preset::NewOde1),
            "new2" | "new_ode_2" => Ok(Preset::NewOde2),
            "decoupled_source" => Ok(Preset::DecoupledSource),
            other => Err(Error::Config(format!(
                "unknown ODE system {other:?} (expected coupled, new1, new2 or decoupled_source)"
            ))),
        }
    }
}

/// Coefficients `λ1..λ8`, stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicSystem {
    pub lambdas: [f64; 8],
    pub preset: Preset,
}

impl CubicSystem {
    pub fn custom(lambdas: [f64; 8]) -> Self {
        Self {
            lambdas,
            preset: Preset::Custom,
        }
    }

    /// Only `λ1` and `λ6` nonzero.
    pub fn coupled(lambda1: f64, lambda6: f64) -> Self {
        let mut l = [0.0; 8];
        l[0] = lambda1;
        l[5] = lambda6;
        Self {
            lambdas: l,
            preset: Preset::Coupled,
        }
    }

    /// `N1 = 3|A1|²A1 − 3(2A1|A2|² + Ā1A2²)`, `N2 = 3(2|A1|²A2 + A1²Ā2) − 3|A2|²A2`.
    pub fn new_ode_1() -> Self {
        Self {
            lambdas: [1.0, 0.0, -3.0, 0.0, 0.0, 3.0, 0.0, -1.0],
            preset: Preset::NewOde1,
        }
    }

    /// `N1 = 3|A1|²A1 − (2A1|A2|² + Ā1A2²)`, `N2 = (2|A1|²A2 + A1²Ā2) − 3|A2|²A2`.
    pub fn new_ode_2() -> Self {
        Self {
            lambdas: [1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
            preset: Preset::NewOde2,
        }
    }

    /// `A2` is driven by `3|A1|²A1` alone.
    pub fn decoupled_source() -> Self {
        let mut l = [0.0; 8];
        l[4] = 1.0;
        Self {
            lambdas: l,
            preset: Preset::DecoupledSource,
        }
    }

    /// Preset by name; `lambda1`, `lambda6` are used only by `coupled`.
    pub fn from_preset(preset: Preset, lambda1: f64, lambda6: f64) -> Self {
        match preset {
            Preset::Coupled => Self::coupled(lambda1, lambda6),
            Preset::NewOde1 => Self::new_ode_1(),
            Preset::NewOde2 => Self::new_ode_2(),
            Preset::DecoupledSource => Self::decoupled_source(),
            Preset::Custom => Self::custom([0.0; 8]),
        }
    }

    /// `(N1, N2)`.
    pub fn nonlinearity(&self, a1: Complex64, a2: Complex64) -> (Complex64, Complex64) {
        let l = &self.lambdas;
        let (p1, p2) = (a1.norm_sqr(), a2.norm_sqr());
        let cube1 = 3.0 * p1 * a1;
        let cube2 = 3.0 * p2 * a2;
        let mixed_a = 2.0 * p1 * a2 + a1 * a1 * a2.conj();
        let mixed_b = 2.0 * p2 * a1 + a1.conj() * a2 * a2;
        (
            l[0] * cube1 + l[1] * mixed_a + l[2] * mixed_b + l[3] * cube2,
            l[4] * cube1 + l[5] * mixed_a + l[6] * mixed_b + l[7] * cube2,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub a1: Complex64,
    pub a2: Complex64,
}

impl OdeState {
    pub fn new(t: f64, a1: Complex64, a2: Complex64) -> Self {
        Self { t, a1, a2 }
    }
}

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// `(A1', A2') = −i t⁻¹ (N1, N2)`.
pub fn rhs(state: &OdeState, system: &CubicSystem) -> (Complex64, Complex64) {
    let (n1, n2) = system.nonlinearity(state.a1, state.a2);
    let k = MINUS_I / state.t;
    (k * n1, k * n2)
}

/// Classical RK4 with `n_steps` steps uniform in `log t`.
pub fn integrate_rk4(state0: OdeState, t_end: f64, n_steps: usize, system: &CubicSystem) -> Result<OdeState> {
    if !(state0.t >= 1.0 && t_end >= state0.t && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need t_end >= t0 >= 1, got t0 = {}, t_end = {t_end}",
            state0.t
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidInput("n_steps must be at least 1".into()));
    }
    if t_end == state0.t {
        return Ok(state0);
    }
    let s0 = state0.t.ln();
    let h = (t_end.ln() - s0) / n_steps as f64;
    // dA/ds = −i N(A)
    let f = |a1: Complex64, a2: Complex64| {
        let (n1, n2) = system.nonlinearity(a1, a2);
        (MINUS_I * n1, MINUS_I * n2)
    };
    let (mut a1, mut a2) = (state0.a1, state0.a2);
    let mut t = state0.t;
    for k in 0..n_steps {
        let next = if k + 1 == n_steps {
            t_end
        } else {
            (s0 + (k + 1) as f64 * h).exp()
        };
        if next <= t {
            return Err(Error::StepUnderflow { t });
        }
        let (k1a, k1b) = f(a1, a2);
        let (k2a, k2b) = f(a1 + 0.5 * h * k1a, a2 + 0.5 * h * k1b);
        let (k3a, k3b) = f(a1 + 0.5 * h * k2a, a2 + 0.5 * h * k2b);
        let (k4a, k4b) = f(a1 + h * k3a, a2 + h * k3b);
        a1 += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        a2 += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        t = next;
        if !(a1.re.is_finite() && a1.im.is_finite() && a2.re.is_finite() && a2.im.is_finite()) {
            return Err(Error::NonFinite { t });
        }
    }
    Ok(OdeState { t, a1, a2 })
}

/// Integrates `(W1(ξ), W2(ξ))` from `t = 1` to `t_end` at every node, in parallel.
pub fn integrate_final_data(
    data: &FinalData,
    t_end: f64,
    n_steps: usize,
    system: &CubicSystem,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let states: Vec<OdeState> = data
        .w1()
        .par_iter()
        .zip(data.w2().par_iter())
        .map(|(&w1, &w2)| integrate_rk4(OdeState::new(1.0, w1, w2), t_end, n_steps, system))
        .collect::<Result<_>>()?;
    Ok(states.into_iter().map(|s| (s.a1, s.a2)).unzip())
}
