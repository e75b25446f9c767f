use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[−L/2, L/2)` with `n` nodes.
///
/// Physical nodes are `x_k = −L/2 + k·dx`, frequency nodes are
/// `ξ_m = (m − n/2)·dξ` with `dξ = 2π/L`, so both start at their most
/// negative value and the frequency axis is centred (the single unpaired
/// Nyquist node sits at `−n/2·dξ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n must be a power of two and at least 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "length must be positive and finite, got {length}"
            )));
        }
        Ok(Self { n, length })
    }

    /// Grid with `dx = dξ`, i.e. `L = √(2πn)`. Convenient for the profile
    /// frame, where the same nodes serve as `ξ` and as its dual variable.
    pub fn balanced(n: usize) -> Result<Self> {
        Self::new(n, (2.0 * std::f64::consts::PI * n as f64).sqrt())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn dxi(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn x(&self, k: usize) -> f64 {
        -0.5 * self.length + k as f64 * self.dx()
    }

    pub fn xi(&self, m: usize) -> f64 {
        (m as f64 - (self.n / 2) as f64) * self.dxi()
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.x(k)).collect()
    }

    pub fn xi_nodes(&self) -> Vec<f64> {
        (0..self.n).map(|m| self.xi(m)).collect()
    }

    pub fn nodes(&self, space: super::Space) -> Vec<f64> {
        match space {
            super::Space::Physical => self.x_nodes(),
            super::Space::Frequency => self.xi_nodes(),
        }
    }

    /// Quadrature weight of the given space.
    pub fn spacing(&self, space: super::Space) -> f64 {
        match space {
            super::Space::Physical => self.dx(),
            super::Space::Frequency => self.dxi(),
        }
    }

    /// Largest representable frequency `π/dx`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }
}
