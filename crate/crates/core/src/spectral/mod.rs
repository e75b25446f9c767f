//! Grids, the continuous Fourier transform and the operators built on it.
//!
//! Conventions follow the whole-line definitions
//!
//! ```text
//! (F f)(ξ)  = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx
//! U(t)      = exp(i t ∂x² / 2)          (free Schrödinger group)
//! M(t)      = e^{i x² / 2t} ×
//! (D(t)f)(x) = t^{-1/2} f(x/t) e^{-iπ/4}
//! J(t)      = x + i t ∂x
//! ```
//!
//! with `U(t) = M(t) D(t) F M(t)`. The domain is truncated to the periodic
//! box `[−L/2, L/2)`.

mod field;
mod grid;
pub mod interp;
pub mod io;

use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

pub use field::{Field, Space};
pub use grid::Grid;

use crate::error::{Error, Result};

/// Default fraction of `∫|g|²` allowed to fall outside a dilation window.
pub const DEFAULT_MASS_TOL: f64 = 1e-6;

/// Raised when part of a profile maps outside the target grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationWarning {
    pub lost_fraction: f64,
    pub mass_tol: f64,
}

impl std::fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:e} of the profile mass lies outside the mapped window (tolerance {:e})",
            self.lost_fraction, self.mass_tol
        )
    }
}

/// Result of a dilation onto a grid: the field plus the mass that did not fit.
#[derive(Debug, Clone)]
pub struct Mapped {
    pub field: Field,
    pub lost_fraction: f64,
    pub warning: Option<TruncationWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResidual {
    pub value: f64,
    pub warning: Option<TruncationWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub linf: f64,
    /// `‖⟨k⟩ f̂‖` with `f̂` the dual transform.
    pub h1: f64,
    /// `‖⟨node⟩ f‖`.
    pub h01: f64,
    /// `‖J(t) f‖`.
    pub j_norm: f64,
}

/// FFT-backed transform context for one grid.
///
/// Plans are shared read-only; every call allocates its own scratch.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

#[inline]
fn alternate(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `e^{iθ} − 1` without cancellation for small `θ`.
#[inline]
pub(crate) fn expm1_i(theta: f64) -> Complex64 {
    let half = 0.5 * theta;
    Complex64::new(0.0, 2.0 * half.sin()) * Complex64::from_polar(1.0, half)
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.n()),
            inverse: planner.plan_fft_inverse(grid.n()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if *f.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// In-place continuous transform of physical samples.
    ///
    /// With `x_k = (k − n/2)dx` and `ξ_m = (m − n/2)dξ`, `dx·dξ = 2π/n`:
    /// `x_k ξ_m = 2πkm/n − π(k + m) + πn/2`, and `e^{−iπn/2} = 1` for
    /// `n ≡ 0 mod 4`. The Riemann sum is therefore
    /// `(F f)_m = dx/√(2π) · (−1)^m · DFT[(−1)^k f_k]_m`.
    pub fn forward_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.grid.n());
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= alternate(k);
        }
        self.forward.process(buf);
        let scale = self.grid.dx() / (2.0 * PI).sqrt();
        for (m, v) in buf.iter_mut().enumerate() {
            *v *= scale * alternate(m);
        }
    }

    /// Inverse of [`Self::forward_in_place`]; same sign bookkeeping with
    /// weight `dξ/√(2π)`.
    pub fn inverse_in_place(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.grid.n());
        for (m, v) in buf.iter_mut().enumerate() {
            *v *= alternate(m);
        }
        self.inverse.process(buf);
        let scale = self.grid.dxi() / (2.0 * PI).sqrt();
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= scale * alternate(k);
        }
    }

    pub fn cft(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        f.expect_space(Space::Physical)?;
        let mut buf = f.values().to_vec();
        self.forward_in_place(&mut buf);
        Ok(f.with_values(Space::Frequency, buf))
    }

    pub fn icft(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        f.expect_space(Space::Frequency)?;
        let mut buf = f.values().to_vec();
        self.inverse_in_place(&mut buf);
        Ok(f.with_values(Space::Physical, buf))
    }

    /// Multiplies frequency samples by `e^{−itξ²/2}`.
    pub(crate) fn free_multiplier(&self, t: f64) -> Vec<Complex64> {
        self.grid
            .xi_nodes()
            .into_iter()
            .map(|xi| Complex64::from_polar(1.0, -0.5 * t * xi * xi))
            .collect()
    }

    pub(crate) fn propagate_in_place(&self, buf: &mut [Complex64], multiplier: &[Complex64]) {
        self.forward_in_place(buf);
        for (v, m) in buf.iter_mut().zip(multiplier) {
            *v *= m;
        }
        self.inverse_in_place(buf);
    }

    /// `U(t) f`.
    pub fn free_propagate(&self, f: &Field, t: f64) -> Result<Field> {
        self.check_grid(f)?;
        f.expect_space(Space::Physical)?;
        if t == 0.0 {
            return Ok(f.clone());
        }
        let mut buf = f.values().to_vec();
        self.propagate_in_place(&mut buf, &self.free_multiplier(t));
        Ok(f.with_values(Space::Physical, buf))
    }

    /// `M(t) f`, evaluated at the field's own nodes.
    pub fn apply_m(&self, f: &Field, t: f64) -> Result<Field> {
        if t == 0.0 {
            return Err(Error::ZeroTime);
        }
        Ok(f.map_nodes(|x, v| v * Complex64::from_polar(1.0, x * x / (2.0 * t))))
    }

    /// `M(t)^{-1} f`.
    pub fn apply_m_inv(&self, f: &Field, t: f64) -> Result<Field> {
        if t == 0.0 {
            return Err(Error::ZeroTime);
        }
        Ok(f.map_nodes(|x, v| v * Complex64::from_polar(1.0, -x * x / (2.0 * t))))
    }

    /// `D(t) g` for a frequency-space `g`, returned on this grid's x nodes.
    pub fn apply_d(&self, g: &Field, t: f64) -> Result<Mapped> {
        self.check_grid(g)?;
        dilate(g, t, self.grid, DEFAULT_MASS_TOL)
    }

    /// `‖U(t)f − M(t)D(t)F M(t)f‖ / ‖f‖`.
    pub fn factorization_residual(&self, f: &Field, t: f64) -> Result<FactorizationResidual> {
        if t <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "factorization residual needs t > 0, got {t}"
            )));
        }
        let exact = self.free_propagate(f, t)?;
        let mapped = self.apply_d(&self.cft(&self.apply_m(f, t)?)?, t)?;
        let factored = self.apply_m(&mapped.field, t)?;
        let norm = f.l2_norm();
        let value = if norm == 0.0 {
            0.0
        } else {
            exact.sub(&factored)?.l2_norm() / norm
        };
        Ok(FactorizationResidual {
            value,
            warning: mapped.warning,
        })
    }

    /// Spectral derivative with respect to the field's own variable; the
    /// unpaired Nyquist mode is zeroed.
    pub fn derivative(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        let mut buf = f.values().to_vec();
        let n = self.grid.n();
        match f.space() {
            Space::Physical => {
                self.forward_in_place(&mut buf);
                for (m, v) in buf.iter_mut().enumerate() {
                    *v *= if m == 0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, self.grid.xi(m))
                    };
                }
                self.inverse_in_place(&mut buf);
            }
            Space::Frequency => {
                // ∂ξ F g = F(−i x g)
                self.inverse_in_place(&mut buf);
                for (k, v) in buf.iter_mut().enumerate() {
                    *v *= if k == 0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, -self.grid.x(k))
                    };
                }
                self.forward_in_place(&mut buf);
            }
        }
        debug_assert_eq!(buf.len(), n);
        Ok(f.with_values(f.space(), buf))
    }

    /// `J(t) f = x f + i t ∂x f`.
    pub fn apply_j(&self, f: &Field, t: f64) -> Result<Field> {
        let weighted = f.map_nodes(|x, v| v * x);
        if t == 0.0 {
            return Ok(weighted);
        }
        let d = self.derivative(f)?;
        weighted.add(&d.scaled(Complex64::new(0.0, t)))
    }

    /// `F M(t) F^{-1} g` for a frequency-space `g` (equal to `U(−1/t) g`).
    pub fn conjugated_m(&self, g: &Field, t: f64) -> Result<Field> {
        self.check_grid(g)?;
        g.expect_space(Space::Frequency)?;
        if t == 0.0 {
            return Err(Error::ZeroTime);
        }
        let mut buf = g.values().to_vec();
        self.conjugated_m_in_place(&mut buf, &self.m_multiplier(t, 1.0));
        Ok(g.with_values(Space::Frequency, buf))
    }

    /// `e^{± i x²/2t}` on the x nodes (`sign = ±1`).
    pub(crate) fn m_multiplier(&self, t: f64, sign: f64) -> Vec<Complex64> {
        self.grid
            .x_nodes()
            .into_iter()
            .map(|x| Complex64::from_polar(1.0, sign * x * x / (2.0 * t)))
            .collect()
    }

    pub(crate) fn conjugated_m_in_place(&self, buf: &mut [Complex64], multiplier: &[Complex64]) {
        self.inverse_in_place(buf);
        for (v, m) in buf.iter_mut().zip(multiplier) {
            *v *= m;
        }
        self.forward_in_place(buf);
    }

    /// `‖(F M(t) F^{-1} − 1) f‖_∞` for a frequency-space `f`.
    pub fn conjugation_residual(&self, f: &Field, t: f64) -> Result<f64> {
        self.check_grid(f)?;
        f.expect_space(Space::Frequency)?;
        if t == 0.0 {
            return Err(Error::ZeroTime);
        }
        // (M − 1) applied directly keeps the small difference accurate.
        let mut buf = f.values().to_vec();
        self.inverse_in_place(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            let x = self.grid.x(k);
            *v *= expm1_i(x * x / (2.0 * t));
        }
        self.forward_in_place(&mut buf);
        Ok(buf.iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    pub fn norms(&self, f: &Field, t: f64) -> Result<Norms> {
        self.check_grid(f)?;
        let mut dual = f.values().to_vec();
        let dual_spacing = match f.space() {
            Space::Physical => {
                self.forward_in_place(&mut dual);
                self.grid.dxi()
            }
            Space::Frequency => {
                self.inverse_in_place(&mut dual);
                self.grid.dx()
            }
        };
        let dual_nodes = match f.space() {
            Space::Physical => self.grid.xi_nodes(),
            Space::Frequency => self.grid.x_nodes(),
        };
        let h1 = (dual_nodes
            .iter()
            .zip(&dual)
            .map(|(k, v)| (1.0 + k * k) * v.norm_sqr())
            .sum::<f64>()
            * dual_spacing)
            .sqrt();
        let spacing = self.grid.spacing(f.space());
        let h01 = (f
            .nodes()
            .iter()
            .zip(f.values())
            .map(|(x, v)| (1.0 + x * x) * v.norm_sqr())
            .sum::<f64>()
            * spacing)
            .sqrt();
        Ok(Norms {
            l2: f.l2_norm(),
            linf: f.linf_norm(),
            h1,
            h01,
            j_norm: self.apply_j(f, t)?.l2_norm(),
        })
    }
}

/// `(D(t) g)(x) = t^{-1/2} g(x/t) e^{−iπ/4}` sampled on `target`'s x nodes,
/// with `g` interpolated cubically on its own frequency nodes.
pub fn dilate(g: &Field, t: f64, target: Grid, mass_tol: f64) -> Result<Mapped> {
    g.expect_space(Space::Frequency)?;
    if t == 0.0 {
        return Err(Error::ZeroTime);
    }
    if t < 0.0 {
        return Err(Error::InvalidInput(format!("dilation needs t > 0, got {t}")));
    }
    let source = g.grid();
    let origin = source.xi(0);
    let spacing = source.dxi();
    let amplitude = Complex64::from_polar(t.powf(-0.5), -FRAC_PI_4);
    let values = target
        .x_nodes()
        .into_iter()
        .map(|x| interp::cubic(g.values(), origin, spacing, x / t).map_or(Complex64::new(0.0, 0.0), |v| v * amplitude))
        .collect();
    let field = Field::new(target, Space::Physical, values)?;

    // Target x in [−L/2, L/2) covers ξ in [−L/2t, L/2t).
    let half_window = 0.5 * target.length() / t;
    let total: f64 = g.values().iter().map(|v| v.norm_sqr()).sum();
    let lost: f64 = source
        .xi_nodes()
        .iter()
        .zip(g.values())
        .filter(|(xi, _)| **xi < -half_window || **xi >= half_window)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    let lost_fraction = if total > 0.0 { lost / total } else { 0.0 };
    let warning = (lost_fraction > mass_tol).then(|| {
        log::warn!("dilation at t = {t}: {lost_fraction:e} of the mass falls outside the grid");
        TruncationWarning {
            lost_fraction,
            mass_tol,
        }
    });
    Ok(Mapped {
        field,
        lost_fraction,
        warning,
    })
}
