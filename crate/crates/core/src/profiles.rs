//! Closed-form asymptotic profiles.
//!
//! Given final data `W1, W2` on a frequency grid,
//!
//! ```text
//! F1(t, ξ) = W1 e^{−3iλ1|W1|² log t}
//! F2(t, ξ) = W̃2(t, ξ) e^{−3iλ1|W1|² log t}
//! W̃2 = (2μ)⁻¹[(μ − iη)W2 + iλ6 e^{2iθ} W̄2] t^{−μ|W1|²}
//!     + (2μ)⁻¹[(μ + iη)W2 − iλ6 e^{2iθ} W̄2] t^{+μ|W1|²}
//! ```
//!
//! with `e^{iθ} = W1/|W1|`. `W̃2` is the first component of
//! `P Q(t) P⁻¹ (W2, W̄2)ᵀ`, which solves the linear equation
//! `i w' = t⁻¹(−η|W1|² w + λ6 W1² w̄)`.

use std::io::{Read, Write};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::spectral::{self, Field, Grid, Mapped, Space, Spectral};

/// `|W1| < ZERO_TOL · max|W1|` selects the constant branch `W̃2 = W2`.
pub const ZERO_TOL: f64 = 1e-10;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `a e^{−(ξ − ξ0)²/σ²} e^{iφ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "unit")]
    pub width: f64,
    #[serde(default)]
    pub phase: f64,
}

fn unit() -> f64 {
    1.0
}

impl GaussianSpec {
    pub fn new(amplitude: f64, width: f64) -> Self {
        Self {
            amplitude,
            center: 0.0,
            width,
            phase: 0.0,
        }
    }

    pub fn with_phase(self, phase: f64) -> Self {
        Self { phase, ..self }
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        let z = (xi - self.center) / self.width;
        Complex64::from_polar(self.amplitude * (-z * z).exp(), self.phase)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.center.is_finite() && self.phase.is_finite()) {
            return Err(Error::InvalidInput("gaussian parameters must be finite".into()));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gaussian width must be positive, got {}",
                self.width
            )));
        }
        Ok(())
    }
}

/// Final data `(W1, W2)` sampled on the frequency nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalData {
    grid: Grid,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
}

impl FinalData {
    pub fn new(grid: Grid, w1: Vec<Complex64>, w2: Vec<Complex64>) -> Result<Self> {
        if w1.len() != grid.n() || w2.len() != grid.n() {
            return Err(Error::InvalidInput(format!(
                "final data lengths ({}, {}) do not match the grid size {}",
                w1.len(),
                w2.len(),
                grid.n()
            )));
        }
        if w1.iter().chain(&w2).any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("final data must be finite".into()));
        }
        Ok(Self { grid, w1, w2 })
    }

    pub fn from_gaussians(grid: Grid, w1: &GaussianSpec, w2: &GaussianSpec) -> Result<Self> {
        w1.validate()?;
        w2.validate()?;
        let xi = grid.xi_nodes();
        Self::new(
            grid,
            xi.iter().map(|&x| w1.eval(x)).collect(),
            xi.iter().map(|&x| w2.eval(x)).collect(),
        )
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn w1(&self) -> &[Complex64] {
        &self.w1
    }

    pub fn w2(&self) -> &[Complex64] {
        &self.w2
    }

    pub fn w1_field(&self) -> Field {
        Field::new(self.grid, Space::Frequency, self.w1.clone()).expect("length checked")
    }

    pub fn w2_field(&self) -> Field {
        Field::new(self.grid, Space::Frequency, self.w2.clone()).expect("length checked")
    }

    pub fn max_w1(&self) -> f64 {
        self.w1.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Indices on the constant branch of `W̃2`.
    pub fn is_zero_w1(&self, index: usize) -> bool {
        is_below(self.w1[index], ZERO_TOL * self.max_w1())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["xi", "re_W1", "im_W1", "re_W2", "im_W2"])?;
        for (m, (a, b)) in self.w1.iter().zip(&self.w2).enumerate() {
            w.write_record(&[
                self.grid.xi(m).to_string(),
                a.re.to_string(),
                a.im.to_string(),
                b.re.to_string(),
                b.im.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `xi,re_W1,im_W1,re_W2,im_W2`; the grid is recovered from the
    /// node count and spacing and the nodes must match it.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != ["xi", "re_W1", "im_W1", "re_W2", "im_W2"] {
            return Err(Error::InvalidInput(format!(
                "final data header must be xi,re_W1,im_W1,re_W2,im_W2, got {}",
                header.join(",")
            )));
        }
        let rows: Vec<(f64, f64, f64, f64, f64)> =
            r.deserialize().collect::<std::result::Result<_, _>>()?;
        if rows.len() < 4 {
            return Err(Error::InvalidInput(format!("only {} rows of final data", rows.len())));
        }
        let dxi = rows[1].0 - rows[0].0;
        if !(dxi > 0.0) {
            return Err(Error::InvalidInput("xi column must be increasing".into()));
        }
        let grid = Grid::new(rows.len(), 2.0 * std::f64::consts::PI / dxi)?;
        for (m, row) in rows.iter().enumerate() {
            let node = grid.xi(m);
            if (row.0 - node).abs() > 1e-9 * (1.0 + node.abs()) {
                return Err(Error::InvalidInput(format!(
                    "row {m}: xi = {} is not on the centred grid (expected {node})",
                    row.0
                )));
            }
        }
        Self::new(
            grid,
            rows.iter().map(|r| Complex64::new(r.1, r.2)).collect(),
            rows.iter().map(|r| Complex64::new(r.3, r.4)).collect(),
        )
    }
}

#[inline]
fn is_below(w1: Complex64, threshold: f64) -> bool {
    w1.norm() < threshold || w1 == Complex64::new(0.0, 0.0)
}

/// `e^{−3iλ1|W1|² log t}`.
#[inline]
pub fn phase_factor(w1: Complex64, t: f64, lambda1: f64) -> Complex64 {
    Complex64::from_polar(1.0, -3.0 * lambda1 * w1.norm_sqr() * t.ln())
}

#[inline]
pub fn f1_point(w1: Complex64, t: f64, lambda1: f64) -> Complex64 {
    w1 * phase_factor(w1, t, lambda1)
}

/// `W̃2` at one point; `zero` selects the constant branch.
#[inline]
pub fn tilde_w2_point(w1: Complex64, w2: Complex64, t: f64, coeffs: &Coefficients, mu: f64, zero: bool) -> Complex64 {
    if zero {
        return w2;
    }
    let eta = coeffs.eta();
    let l6 = coeffs.lambda6();
    let e2 = (w1 / w1.norm()).powi(2);
    let rate = mu * w1.norm_sqr() * t.ln();
    let decaying = ((mu - I * eta) * w2 + I * l6 * e2 * w2.conj()) * (-rate).exp();
    let growing = ((mu + I * eta) * w2 - I * l6 * e2 * w2.conj()) * rate.exp();
    (decaying + growing) / (2.0 * mu)
}

/// `F1(t, ·)` on the final-data grid. Requires `t > 0`.
pub fn eval_f1(t: f64, data: &FinalData, coeffs: &Coefficients) -> Vec<Complex64> {
    data.w1.iter().map(|&w| f1_point(w, t, coeffs.lambda1())).collect()
}

pub fn eval_tilde_w2(t: f64, data: &FinalData, coeffs: &Coefficients) -> Result<Vec<Complex64>> {
    let mu = coeffs.require_deceleration()?;
    let threshold = ZERO_TOL * data.max_w1();
    Ok(data
        .w1
        .iter()
        .zip(&data.w2)
        .map(|(&w1, &w2)| tilde_w2_point(w1, w2, t, coeffs, mu, is_below(w1, threshold)))
        .collect())
}

pub fn eval_f2(t: f64, data: &FinalData, coeffs: &Coefficients) -> Result<Vec<Complex64>> {
    let tilde = eval_tilde_w2(t, data, coeffs)?;
    Ok(tilde
        .into_iter()
        .zip(&data.w1)
        .map(|(w, &w1)| w * phase_factor(w1, t, coeffs.lambda1()))
        .collect())
}

/// `(F1, F2)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePair {
    pub t: f64,
    pub f1: Vec<Complex64>,
    pub f2: Vec<Complex64>,
}

impl ProfilePair {
    pub fn at(t: f64, data: &FinalData, coeffs: &Coefficients) -> Result<Self> {
        Ok(Self {
            t,
            f1: eval_f1(t, data, coeffs),
            f2: eval_f2(t, data, coeffs)?,
        })
    }

    /// `F_j` for `j ∈ {1, 2}`.
    pub fn component(&self, j: usize) -> Result<&[Complex64]> {
        match j {
            1 => Ok(&self.f1),
            2 => Ok(&self.f2),
            _ => Err(Error::InvalidInput(format!("component must be 1 or 2, got {j}"))),
        }
    }
}

/// `Q(t) = diag(t^{−μ|W1|²}, t^{μ|W1|²})`.
pub fn q_matrix(t: f64, w1sq: f64, mu: f64) -> Matrix2<Complex64> {
    let r = t.powf(mu * w1sq);
    Matrix2::new(
        Complex64::new(1.0 / r, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
    )
}

/// Eigenbasis of the linear `w` system at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagonalizer {
    pub theta: f64,
    pub p: Matrix2<Complex64>,
    pub p_inv: Matrix2<Complex64>,
    pub w1sq: f64,
    mu: f64,
}

impl Diagonalizer {
    /// ```text
    /// P   = [[λ6 e^{2iθ}, η − iμ], [η − iμ, λ6 e^{−2iθ}]]
    /// P⁻¹ = (2iμ(η − iμ))⁻¹ [[λ6 e^{−2iθ}, −(η − iμ)], [−(η − iμ), λ6 e^{2iθ}]]
    /// ```
    /// (`det P = λ6² − (η − iμ)² = 2iμ(η − iμ)` since `λ6² = η² + μ²`.)
    pub fn new(theta: f64, w1sq: f64, coeffs: &Coefficients) -> Result<Self> {
        let mu = coeffs.require_deceleration()?;
        let l6 = coeffs.lambda6();
        let e2 = Complex64::from_polar(1.0, 2.0 * theta);
        let k = Complex64::new(coeffs.eta(), -mu);
        let p = Matrix2::new(l6 * e2, k, k, l6 * e2.conj());
        let scale = (2.0 * I * mu * k).inv();
        let p_inv = Matrix2::new(l6 * e2.conj(), -k, -k, l6 * e2) * scale;
        Ok(Self {
            theta,
            p,
            p_inv,
            w1sq,
            mu,
        })
    }

    /// `[[η, −λ6 e^{2iθ}], [λ6 e^{−2iθ}, −η]]`; the `(w, w̄)` system is
    /// `d/dt (w, w̄) = i|W1|² t⁻¹ B (w, w̄)` and `P⁻¹ B P = diag(iμ, −iμ)`.
    pub fn system_matrix(&self, coeffs: &Coefficients) -> Matrix2<Complex64> {
        let e2 = Complex64::from_polar(1.0, 2.0 * self.theta);
        let eta = Complex64::new(coeffs.eta(), 0.0);
        let l6 = coeffs.lambda6();
        Matrix2::new(eta, -l6 * e2, l6 * e2.conj(), -eta)
    }

    /// `P Q(t1/t0) P⁻¹ (w0, w̄0)ᵀ`.
    pub fn evolve_pair(&self, w0: Complex64, t0: f64, t1: f64) -> (Complex64, Complex64) {
        if self.w1sq == 0.0 {
            return (w0, w0.conj());
        }
        let v = self.p * q_matrix(t1 / t0, self.w1sq, self.mu) * self.p_inv * Vector2::new(w0, w0.conj());
        (v[0], v[1])
    }
}

/// Diagonalizer at grid index `xi_index`; fails on the constant branch.
pub fn build_diagonalizer(xi_index: usize, data: &FinalData, coeffs: &Coefficients) -> Result<Diagonalizer> {
    coeffs.require_deceleration()?;
    let w1 = *data.w1.get(xi_index).ok_or_else(|| {
        Error::InvalidInput(format!("xi index {xi_index} outside a grid of {}", data.grid.n()))
    })?;
    if data.is_zero_w1(xi_index) {
        return Err(Error::ZeroAmplitude { index: xi_index });
    }
    Diagonalizer::new(w1.arg(), w1.norm_sqr(), coeffs)
}

/// Leading component of the homogeneous `w` flow from `t0` to `t1`.
/// `None` stands for the `W1 = 0` branch, where the flow is the identity.
pub fn evolve_w_leading(w0: Complex64, t0: f64, t1: f64, diag: Option<&Diagonalizer>) -> Complex64 {
    evolve_w_pair(w0, t0, t1, diag).0
}

pub fn evolve_w_pair(w0: Complex64, t0: f64, t1: f64, diag: Option<&Diagonalizer>) -> (Complex64, Complex64) {
    match diag {
        Some(d) => d.evolve_pair(w0, t0, t1),
        None => (w0, w0.conj()),
    }
}

/// `u_ap,j(t, x) = t^{−1/2} F_j(t, x/t) e^{ix²/2t − iπ/4}` on `grid`'s x nodes.
pub fn sample_uap(t: f64, j: usize, data: &FinalData, coeffs: &Coefficients, grid: Grid) -> Result<Mapped> {
    sample_uap_with_tol(t, j, data, coeffs, grid, spectral::DEFAULT_MASS_TOL)
}

pub fn sample_uap_with_tol(
    t: f64,
    j: usize,
    data: &FinalData,
    coeffs: &Coefficients,
    grid: Grid,
    mass_tol: f64,
) -> Result<Mapped> {
    if !(t >= 1.0) {
        return Err(Error::InvalidInput(format!("u_ap is sampled for t >= 1, got {t}")));
    }
    let values = match j {
        1 => eval_f1(t, data, coeffs),
        2 => eval_f2(t, data, coeffs)?,
        _ => return Err(Error::InvalidInput(format!("component must be 1 or 2, got {j}"))),
    };
    let profile = Field::new(data.grid, Space::Frequency, values)?;
    let mut mapped = spectral::dilate(&profile, t, grid, mass_tol)?;
    mapped.field = Spectral::new(grid).apply_m(&mapped.field, t)?;
    Ok(mapped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odesys::{integrate_rk4, CubicSystem, OdeState};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coeffs(l1: f64, l6: f64) -> Coefficients {
        Coefficients::derive(l1, l6).unwrap()
    }

    fn gaussian_data(n: usize, a1: f64, a2: f64) -> FinalData {
        let grid = Grid::balanced(n).unwrap();
        FinalData::from_gaussians(grid, &GaussianSpec::new(a1, 1.0), &GaussianSpec::new(a2, 1.0)).unwrap()
    }

    #[test]
    fn f1_examples() {
        let got = f1_point(c(0.5, 0.0), std::f64::consts::E, 1.0);
        let expected = c(0.5 * 0.75f64.cos(), -0.5 * 0.75f64.sin());
        assert!((got - expected).norm() < 1e-15);
        assert!((got - c(0.365844, -0.340819)).norm() < 1e-6);
        let data = gaussian_data(256, 0.7, 1.0);
        let k = coeffs(1.0, 1.5);
        assert_eq!(eval_f1(1.0, &data, &k), data.w1());
        for &t in &[2.0, 10.0, 100.0] {
            for (f, w) in eval_f1(t, &data, &k).iter().zip(data.w1()) {
                assert!((f.norm() - w.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tilde_w2_hand_value() {
        let k = coeffs(1.0, 1.5);
        let got = tilde_w2_point(c(1.0, 0.0), c(1.0, 0.0), std::f64::consts::E, &k, 1.5, false);
        let (d, g) = ((-1.5f64).exp(), 1.5f64.exp());
        let expected = c(0.5 * (d + g), 0.5 * (d - g));
        assert!((got - expected).norm() < 1e-14);
        assert!((got - c(2.3524, -2.1293)).norm() < 1e-4);
    }

    #[test]
    fn tilde_w2_at_t_one_and_on_zeros() {
        let k = coeffs(1.0, 2.0);
        let grid = Grid::new(64, 20.0).unwrap();
        let xi = grid.xi_nodes();
        let data = FinalData::new(
            grid,
            xi.iter().map(|&x| c((x - 1.0).max(0.0), 0.3 * (x - 1.0).max(0.0))).collect(),
            xi.iter().map(|&x| c((-x * x / 9.0).exp(), 0.2)).collect(),
        )
        .unwrap();
        let at_one = eval_tilde_w2(1.0, &data, &k).unwrap();
        for (a, b) in at_one.iter().zip(data.w2()) {
            assert!((a - b).norm() < 1e-14);
        }
        let later = eval_f2(50.0, &data, &k).unwrap();
        for (m, &x) in xi.iter().enumerate() {
            if x <= 1.0 {
                assert_eq!(later[m], data.w2()[m]);
            }
        }
    }

    #[test]
    fn zero_w1_keeps_w2() {
        let grid = Grid::balanced(128).unwrap();
        let data = FinalData::from_gaussians(grid, &GaussianSpec::new(0.0, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        let k = coeffs(1.0, 1.5);
        assert_eq!(eval_f2(30.0, &data, &k).unwrap(), data.w2());
    }

    #[test]
    fn wrong_regime_rejected() {
        let data = gaussian_data(64, 0.5, 1.0);
        let k = coeffs(1.0, 5.0);
        assert!(matches!(eval_tilde_w2(2.0, &data, &k), Err(Error::WrongRegime(_))));
        assert!(matches!(build_diagonalizer(32, &data, &k), Err(Error::WrongRegime(_))));
    }

    #[test]
    fn closed_form_matches_rk4() {
        let k = coeffs(1.0, 1.5);
        let data = gaussian_data(128, 0.7, 1.0);
        let system = CubicSystem::coupled(1.0, 1.5);
        let f2 = eval_f2(10.0, &data, &k).unwrap();
        let f1 = eval_f1(10.0, &data, &k);
        for m in (0..128).step_by(5) {
            let s = integrate_rk4(OdeState::new(1.0, data.w1()[m], data.w2()[m]), 10.0, 4096, &system).unwrap();
            assert!((s.a1 - f1[m]).norm() < 1e-7);
            assert!((s.a2 - f2[m]).norm() < 1e-7, "m = {m}");
        }
    }

    #[test]
    fn q_group_law() {
        let (w1sq, mu) = (0.49, 1.5);
        let lhs = q_matrix(8.0, w1sq, mu) * q_matrix(2.0, w1sq, mu).try_inverse().unwrap();
        let rhs = q_matrix(4.0, w1sq, mu);
        assert!((lhs - rhs).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn diagonalizer_refuses_zero_amplitude() {
        let grid = Grid::new(16, 4.0).unwrap();
        let mut w1 = vec![c(1.0, 0.0); 16];
        w1[3] = c(0.0, 0.0);
        let data = FinalData::new(grid, w1, vec![c(1.0, 0.0); 16]).unwrap();
        let k = coeffs(1.0, 1.5);
        assert!(matches!(
            build_diagonalizer(3, &data, &k),
            Err(Error::ZeroAmplitude { index: 3 })
        ));
        assert!(build_diagonalizer(4, &data, &k).is_ok());
    }

    #[test]
    fn evolve_matches_closed_form() {
        let k = coeffs(1.0, 1.7);
        let data = gaussian_data(64, 0.6, 1.0);
        let m = 30;
        let d = build_diagonalizer(m, &data, &k).unwrap();
        let tilde = eval_tilde_w2(37.0, &data, &k).unwrap();
        let w = evolve_w_leading(data.w2()[m], 1.0, 37.0, Some(&d));
        assert!((w - tilde[m]).norm() < 1e-10);
        assert_eq!(evolve_w_leading(c(0.3, 0.1), 2.0, 9.0, None), c(0.3, 0.1));
    }

    #[test]
    fn continuity_bound_near_zeros() {
        // Linear ramp of W1 down to zero; bound valid while |η| + |λ6| ≲ 3μ.
        for &(l1, l6) in &[(1.0, 1.5), (1.0, 2.0)] {
            let k = coeffs(l1, l6);
            let mu = k.mu().unwrap();
            let grid = Grid::new(512, 20.0).unwrap();
            let xi = grid.xi_nodes();
            let data = FinalData::new(
                grid,
                xi.iter().map(|&x| c(0.05 * x.max(0.0), 0.0)).collect(),
                xi.iter().map(|&x| c(x.cos(), 0.5 * x.sin())).collect(),
            )
            .unwrap();
            for &t in &[2.0, 10.0, 1e3] {
                let tilde = eval_tilde_w2(t, &data, &k).unwrap();
                for (m, tw) in tilde.iter().enumerate() {
                    let a2 = data.w1()[m].norm_sqr();
                    if a2 * t.ln() > 0.1 {
                        continue;
                    }
                    let bound = 3.0 * mu * a2 * t.ln() * (data.w2()[m].norm() + 1.0);
                    assert!((tw - data.w2()[m]).norm() <= bound + 1e-15);
                }
            }
        }
    }

    #[test]
    fn uap_sup_norm_and_mass() {
        let k = coeffs(1.0, 1.5);
        let data = gaussian_data(1024, 0.7, 1.0);
        let t = 5.0;
        let grid = Grid::new(4096, 400.0).unwrap();
        let u = sample_uap(t, 1, &data, &k, grid).unwrap();
        assert!(u.warning.is_none());
        assert!((u.field.linf_norm() - 0.7 / t.sqrt()).abs() < 1e-4);
        // The L² norm converges to ‖W1‖ as the interpolated ξ grid refines.
        let mass_err = |d: &FinalData| (sample_uap(t, 1, d, &k, grid).unwrap().field.l2_norm() - d.w1_field().l2_norm()).abs();
        let coarse = mass_err(&data);
        let fine = mass_err(&gaussian_data(4096, 0.7, 1.0));
        assert!(fine < coarse / 8.0);
        assert!(fine < 5e-6);
        assert!(sample_uap(t, 3, &data, &k, grid).is_err());
        let small = sample_uap(t, 1, &data, &k, Grid::new(256, 10.0).unwrap()).unwrap();
        assert!(small.warning.is_some());
    }

    #[test]
    fn csv_round_trip() {
        let data = gaussian_data(64, 0.7, 1.0);
        let mut bytes = Vec::new();
        data.write_csv(&mut bytes).unwrap();
        assert!(String::from_utf8_lossy(&bytes).starts_with("xi,re_W1,im_W1,re_W2,im_W2\n"));
        let back = FinalData::read_csv(bytes.as_slice()).unwrap();
        assert_eq!(back.w1(), data.w1());
        assert_eq!(back.w2(), data.w2());
        assert!((back.grid().length() - data.grid().length()).abs() < 1e-9);
        assert!(FinalData::read_csv("xi,a\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn diagonalizer_identities(l1 in 0.1f64..5.0, frac in 0.02f64..0.98, theta in -4.0f64..4.0, sign in prop::bool::ANY) {
            let l1 = if sign { l1 } else { -l1 };
            let k = coeffs(l1, l1 + frac * 2.0 * l1);
            let mu = k.mu().unwrap();
            let d = Diagonalizer::new(theta, 0.3, &k).unwrap();
            let id = d.p * d.p_inv;
            prop_assert!((id - Matrix2::identity()).iter().all(|v| v.norm() < 1e-10));
            let diag = d.p_inv * d.system_matrix(&k) * d.p;
            let expected = Matrix2::new(I * mu, c(0.0, 0.0), c(0.0, 0.0), -I * mu);
            let scale = k.lambda6().abs().max(1.0);
            prop_assert!((diag - expected).iter().all(|v| v.norm() < 1e-10 * scale));
        }

        #[test]
        fn conjugate_pairs_preserved(re in -2.0f64..2.0, im in -2.0f64..2.0, theta in -3.0f64..3.0, t in 1.0f64..1e3) {
            let k = coeffs(1.0, 1.8);
            let d = Diagonalizer::new(theta, 0.4, &k).unwrap();
            let (a, b) = d.evolve_pair(c(re, im), 1.0, t);
            prop_assert!((b - a.conj()).norm() <= 1e-10 * a.norm().max(1.0));
            let (same, _) = d.evolve_pair(c(re, im), t, t);
            prop_assert!((same - c(re, im)).norm() < 1e-12);
        }
    }
}
