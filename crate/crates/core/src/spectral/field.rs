use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// Which variable a [`Field`] is sampled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Physical,
    Frequency,
}

/// Complex grid function sampled at the nodes of `space`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    space: Space,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, space: Space, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "field has {} samples but the grid has {} nodes",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self {
            grid,
            space,
            values,
        })
    }

    pub fn zeros(grid: Grid, space: Space) -> Self {
        Self {
            grid,
            space,
            values: vec![Complex64::new(0.0, 0.0); grid.n()],
        }
    }

    /// Samples `f` at the nodes of `space`.
    pub fn from_fn(grid: Grid, space: Space, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes(space).into_iter().map(f).collect();
        Self {
            grid,
            space,
            values,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes(self.space)
    }

    pub(crate) fn with_values(&self, space: Space, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), self.grid.n());
        Self {
            grid: self.grid,
            space,
            values,
        }
    }

    pub fn expect_space(&self, expected: Space) -> Result<()> {
        if self.space == expected {
            Ok(())
        } else {
            Err(Error::WrongSpace {
                expected,
                found: self.space,
            })
        }
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.space != other.space {
            return Err(Error::WrongSpace {
                expected: self.space,
                found: other.space,
            });
        }
        Ok(())
    }

    /// `∫|f|²` by the rectangle rule (exact for trigonometric polynomials).
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.spacing(self.space)
    }

    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Fraction of the mass located at nodes with `|node| ≥ radius`.
    pub fn mass_fraction_outside(&self, radius: f64) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = self
            .nodes()
            .iter()
            .zip(&self.values)
            .filter(|(x, _)| x.abs() >= radius)
            .map(|(_, v)| v.norm_sqr())
            .sum();
        outside / total
    }

    pub fn scaled(&self, factor: Complex64) -> Field {
        self.with_values(self.space, self.values.iter().map(|v| v * factor).collect())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.space,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        Ok(self.with_values(
            self.space,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    /// Pointwise product with a function of the node coordinate.
    pub fn map_nodes(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Field {
        let values = self
            .nodes()
            .into_iter()
            .zip(&self.values)
            .map(|(x, &v)| f(x, v))
            .collect();
        self.with_values(self.space, values)
    }
}
