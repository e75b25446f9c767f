//! Coefficient algebra for the cubic system.
//!
//! Everything downstream is parametrised by the pair `(λ1, λ6)` and the two
//! derived quantities `η = 3λ1 − 2λ6` and `μ = √(λ6² − η²)`. The sign of
//! `(λ6 − λ1)(λ6 − 3λ1)` separates three regimes:
//!
//! * `< 0`: deceleration; `μ` is real and positive and the second component
//!   carries the amplitude factors `t^{±μ|W1|²}`.
//! * `= 0`: threshold; logarithmic amplitude correction (not evaluated here).
//! * `> 0`: oscillatory; no amplification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for classifying the regime product as zero.
pub const THRESHOLD_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Deceleration,
    Threshold,
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    lambda1: f64,
    lambda6: f64,
    eta: f64,
    mu: Option<f64>,
    regime: Regime,
}

impl Coefficients {
    /// Derives `η`, `μ` and the regime from `(λ1, λ6)`.
    pub fn derive(lambda1: f64, lambda6: f64) -> Result<Self> {
        if !lambda1.is_finite() || !lambda6.is_finite() {
            return Err(Error::InvalidInput(format!(
                "coefficients must be finite, got ({lambda1}, {lambda6})"
            )));
        }
        if lambda1 == 0.0 && lambda6 == 0.0 {
            return Err(Error::ZeroCoefficients);
        }
        let eta = 3.0 * lambda1 - 2.0 * lambda6;
        let product = (lambda6 - lambda1) * (lambda6 - 3.0 * lambda1);
        let scale = lambda1.powi(2).max(lambda6.powi(2));
        let regime = if product.abs() <= THRESHOLD_RTOL * scale {
            Regime::Threshold
        } else if product < 0.0 {
            Regime::Deceleration
        } else {
            Regime::Oscillatory
        };
        // λ6² − η² = −3 (λ6 − λ1)(λ6 − 3λ1), so the regime test and the sign
        // of the radicand agree.
        let mu = match regime {
            Regime::Deceleration => Some((lambda6 * lambda6 - eta * eta).sqrt()),
            _ => None,
        };
        Ok(Self {
            lambda1,
            lambda6,
            eta,
            mu,
            regime,
        })
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda6(&self) -> f64 {
        self.lambda6
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `μ`, defined only in the deceleration regime.
    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    /// `μ`, or `WrongRegime` outside the deceleration regime.
    pub fn require_deceleration(&self) -> Result<f64> {
        self.mu.ok_or(Error::WrongRegime(self.regime))
    }
}
