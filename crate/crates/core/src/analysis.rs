//! Post-processing: power-law fits, scattering data, profile errors and the
//! vanishing/nonvanishing split of final data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::evolve::{uap_errors, ProfileErrors, Trajectory};
use crate::profiles::FinalData;
use crate::spectral::{Grid, Space, Spectral};

pub const MIN_FIT_POINTS: usize = 8;
pub const MIN_SCATTERING_SNAPSHOTS: usize = 16;

/// Least-squares line through `(log t, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub fn fit_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidInput(format!("fit window ({lo}, {hi}) is empty")));
    }
    if times.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    // Window ends are inclusive up to rounding in generated time grids.
    let slack = 1e-12 * hi.abs().max(1.0);
    let mut points = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo - slack || t > hi + slack {
            continue;
        }
        if !(v > 0.0) || !(t > 0.0) {
            return Err(Error::NonPositiveValue { t, value: v });
        }
        points.push((t.ln(), v.ln()));
    }
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            found: points.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all fit points share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
        window,
        samples: points.len(),
    })
}

/// Inclusive bounds on a fitted exponent; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRange {
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ExpectedRange {
    pub fn between(min: f64, max: f64) -> Self {
        Self {
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn at_most(max: f64) -> Self {
        Self { min: None, max: Some(max) }
    }

    pub fn at_least(min: f64) -> Self {
        Self { min: Some(min), max: None }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.min.is_none_or(|m| x >= m) && self.max.is_none_or(|m| x <= m)
    }
}

/// JSON fit report: `{quantity, window, slope, r2, expected, pass}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub quantity: String,
    pub window: (f64, f64),
    pub slope: f64,
    pub r2: f64,
    pub expected: Option<ExpectedRange>,
    pub pass: Option<bool>,
}

impl FitReport {
    pub fn new(quantity: &str, fit: &DecayFit, expected: Option<ExpectedRange>) -> Self {
        Self {
            quantity: quantity.to_owned(),
            window: fit.window,
            slope: fit.slope,
            r2: fit.r_squared,
            expected,
            pass: expected.map(|e| e.contains(fit.slope)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringData {
    /// Snapshot times used, ascending, all `≥ 1`.
    pub times: Vec<f64>,
    /// `e^{3iλ1Φ1(t)} v1(t)` at every snapshot time; the last is `alpha`.
    pub alpha_series: Vec<Vec<Complex64>>,
    pub alpha: Vec<Complex64>,
    pub phi1_final: Vec<f64>,
    pub theta1: Vec<f64>,
    /// `e^{−3iλ1θ1} α`.
    pub w1_est: Vec<Complex64>,
    /// `‖v1(t)‖_∞` per snapshot.
    pub v1_sup: Vec<f64>,
}

impl ScatteringData {
    /// Sup distance between the `α` estimates at the snapshots nearest `ta` and `tb`.
    pub fn alpha_difference(&self, ta: f64, tb: f64) -> f64 {
        let nearest = |t: f64| {
            self.times
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
                .map(|(k, _)| k)
                .unwrap_or(0)
        };
        let (a, b) = (&self.alpha_series[nearest(ta)], &self.alpha_series[nearest(tb)]);
        a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
    }
}

/// Scattering data from the `u1` snapshots of a forward physical run.
///
/// `v1 = F U(−t) u1(t)`, `Φ1(t) = ∫₁ᵗ τ⁻¹|v1|² dτ` by the trapezoid rule in
/// `log τ`, `α = e^{3iλ1Φ1(t_end)} v1(t_end)`, and `θ1` is the mean of
/// `Φ1 − |α|² log t` over the last two snapshots.
pub fn extract_scattering(trajectory: &Trajectory, coeffs: &Coefficients) -> Result<ScatteringData> {
    let snaps: Vec<_> = trajectory.snapshots.iter().filter(|p| p.t >= 1.0).collect();
    if snaps.len() < MIN_SCATTERING_SNAPSHOTS {
        return Err(Error::InsufficientData {
            found: snaps.len(),
            needed: MIN_SCATTERING_SNAPSHOTS,
        });
    }
    if snaps.windows(2).any(|w| w[1].t <= w[0].t) {
        return Err(Error::InvalidInput("scattering needs increasing snapshot times".into()));
    }
    if snaps[0].t > 1.0 {
        log::warn!("first snapshot at t = {}; the phase integral starts there", snaps[0].t);
    }
    let grid = *snaps[0].grid();
    let s = Spectral::new(grid);
    let l1 = coeffs.lambda1();
    let n = grid.n();

    let mut phi = vec![0.0; n];
    let mut prev: Option<(f64, Vec<f64>)> = None;
    let mut alpha_series = Vec::with_capacity(snaps.len());
    let mut v1_sup = Vec::with_capacity(snaps.len());
    let mut tail = Vec::new();
    for (k, pair) in snaps.iter().enumerate() {
        pair.u1.expect_space(Space::Physical)?;
        if *pair.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let v1 = s.cft(&s.free_propagate(&pair.u1, -pair.t)?)?.into_values();
        let dens: Vec<f64> = v1.iter().map(|v| v.norm_sqr()).collect();
        let log_t = pair.t.ln();
        if let Some((prev_log, prev_dens)) = &prev {
            let h = log_t - prev_log;
            for m in 0..n {
                phi[m] += 0.5 * h * (prev_dens[m] + dens[m]);
            }
        }
        let alpha: Vec<Complex64> = v1
            .iter()
            .zip(&phi)
            .map(|(v, p)| v * Complex64::from_polar(1.0, 3.0 * l1 * p))
            .collect();
        v1_sup.push(v1.iter().map(|v| v.norm()).fold(0.0, f64::max));
        if k + 2 >= snaps.len() {
            tail.push((log_t, phi.clone()));
        }
        alpha_series.push(alpha);
        prev = Some((log_t, dens));
    }
    let alpha = alpha_series.last().cloned().unwrap_or_default();
    let theta1: Vec<f64> = (0..n)
        .map(|m| {
            let a2 = alpha[m].norm_sqr();
            tail.iter().map(|(lt, p)| p[m] - a2 * lt).sum::<f64>() / tail.len() as f64
        })
        .collect();
    let w1_est = alpha
        .iter()
        .zip(&theta1)
        .map(|(a, th)| a * Complex64::from_polar(1.0, -3.0 * l1 * th))
        .collect();
    Ok(ScatteringData {
        times: snaps.iter().map(|p| p.t).collect(),
        alpha_series,
        alpha,
        phi1_final: phi,
        theta1,
        w1_est,
        v1_sup,
    })
}

/// `‖u_j − u_ap,j‖` at every stored snapshot.
pub fn profile_error(trajectory: &Trajectory, data: &FinalData, coeffs: &Coefficients) -> Result<Vec<(f64, ProfileErrors)>> {
    if trajectory.snapshots.is_empty() {
        return Err(Error::InvalidInput("trajectory carries no snapshots".into()));
    }
    trajectory
        .snapshots
        .iter()
        .map(|pair| {
            if pair.grid() != data.grid() {
                return Err(Error::GridMismatch);
            }
            Ok((pair.t, uap_errors(pair, data, coeffs)?))
        })
        .collect()
}

/// `(μ + iη) W2 − iλ6 e^{2iθ} W̄2`, the coefficient of the growing mode.
fn growing_coefficient(w1: Complex64, w2: Complex64, coeffs: &Coefficients, mu: f64) -> Complex64 {
    let e2 = if w1.norm() > 0.0 {
        (w1 / w1.norm()).powi(2)
    } else {
        Complex64::new(1.0, 0.0)
    };
    Complex64::new(mu, coeffs.eta()) * w2 - Complex64::new(0.0, coeffs.lambda6()) * e2 * w2.conj()
}

/// Final data whose growing mode vanishes identically: `W2 = r e^{iψ}` with
/// `e^{2iψ} = iλ6 e^{2iθ}/(μ + iη)` (a unit number since `|μ + iη| = |λ6|`).
/// For real `W1` and `η = 0` this is `ψ = π/4`.
pub fn make_vanishing_data(grid: Grid, w1: &[f64], r: &[f64], coeffs: &Coefficients) -> Result<FinalData> {
    let mu = coeffs.require_deceleration()?;
    if w1.len() != grid.n() || r.len() != grid.n() {
        return Err(Error::InvalidInput("profile lengths must match the grid".into()));
    }
    // θ ∈ {0, π} for real W1, so e^{2iθ} = 1.
    let rot = Complex64::new(0.0, coeffs.lambda6()) / Complex64::new(mu, coeffs.eta());
    let e_psi = Complex64::from_polar(1.0, 0.5 * rot.arg());
    FinalData::new(
        grid,
        w1.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        r.iter().map(|&a| a * e_psi).collect(),
    )
}

/// True where the growing-mode coefficient exceeds `1e−10 (|W2| + 1)` and
/// `W1` is off its zero branch.
pub fn check_nonvanishing(data: &FinalData, coeffs: &Coefficients) -> Result<Vec<bool>> {
    let mu = coeffs.require_deceleration()?;
    Ok((0..data.grid().n())
        .map(|m| {
            let (w1, w2) = (data.w1()[m], data.w2()[m]);
            !data.is_zero_w1(m) && growing_coefficient(w1, w2, coeffs, mu).norm() > 1e-10 * (w2.norm() + 1.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{log_spaced, solve_cauchy, FieldPair, SolverConfig};
    use crate::profiles::GaussianSpec;
    use crate::spectral::Field;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exact_power_law() {
        let t = log_spaced(1.0, 100.0, 20);
        let v: Vec<f64> = t.iter().map(|t| t.powf(-0.5)).collect();
        let fit = fit_decay_rate(&t, &v, (1.0, 100.0)).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.samples, 21);
        let flat = fit_decay_rate(&t, &[3.0; 21], (1.0, 100.0)).unwrap();
        assert_eq!(flat.slope, 0.0);
    }

    #[test]
    fn wobbly_power_law() {
        let t = log_spaced(1.0, 1e4, 64);
        let v: Vec<f64> = t.iter().map(|t| t.powf(-0.5) * (1.0 + 0.01 * t.ln().sin())).collect();
        let fit = fit_decay_rate(&t, &v, (1.0, 1e4)).unwrap();
        assert!((-0.51..=-0.49).contains(&fit.slope));
    }

    #[test]
    fn fit_errors() {
        let t = log_spaced(1.0, 10.0, 5);
        let v = vec![1.0; 6];
        assert!(matches!(
            fit_decay_rate(&t, &v, (1.0, 10.0)),
            Err(Error::InsufficientData { found: 6, needed: 8 })
        ));
        let t = log_spaced(1.0, 10.0, 10);
        let mut v = vec![1.0; 11];
        v[4] = 0.0;
        assert!(matches!(
            fit_decay_rate(&t, &v, (1.0, 10.0)),
            Err(Error::NonPositiveValue { .. })
        ));
        // Points outside the window are ignored, even if non-positive.
        v[4] = 1.0;
        v[10] = -1.0;
        assert!(fit_decay_rate(&t, &v, (1.0, 9.0)).is_ok());
    }

    #[test]
    fn report_json_shape() {
        let t = log_spaced(1.0, 100.0, 10);
        let v: Vec<f64> = t.iter().map(|t| t.powf(-0.5)).collect();
        let fit = fit_decay_rate(&t, &v, (1.0, 100.0)).unwrap();
        let report = FitReport::new("linf_u1", &fit, Some(ExpectedRange::between(-0.55, -0.45)));
        assert_eq!(report.pass, Some(true));
        let json = serde_json::to_value(&report).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["quantity", "window", "slope", "r2", "expected", "pass"]);
        assert!(!ExpectedRange::at_most(-0.6).contains(fit.slope));
        assert!(ExpectedRange::at_least(-0.6).contains(fit.slope));
    }

    #[test]
    fn vanishing_eta_zero_is_quarter_turn() {
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        let grid = Grid::new(64, 20.0).unwrap();
        let xi = grid.xi_nodes();
        let w1: Vec<f64> = xi.iter().map(|x| 0.7 * (-x * x).exp()).collect();
        let r: Vec<f64> = xi.iter().map(|x| (-x * x).exp()).collect();
        let data = make_vanishing_data(grid, &w1, &r, &k).unwrap();
        let q = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        for (w2, r) in data.w2().iter().zip(&r) {
            assert!((w2 - r * q).norm() < 1e-15);
        }
        // μ e^{iπ/4} − iμ e^{−iπ/4} = 0
        assert!((1.5 * q - c(0.0, 1.5) * q.conj()).norm() < 1e-15);
        let mask = check_nonvanishing(&data, &k).unwrap();
        assert!(mask.iter().all(|m| !m));
        let zero = make_vanishing_data(grid, &w1, &vec![0.0; 64], &k).unwrap();
        assert!(zero.w2().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn gaussian_pair_is_nonvanishing() {
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        let grid = Grid::new(128, 20.0).unwrap();
        let data = FinalData::from_gaussians(grid, &GaussianSpec::new(0.3, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        let mask = check_nonvanishing(&data, &k).unwrap();
        for (m, ok) in mask.iter().enumerate() {
            if !data.is_zero_w1(m) {
                assert!(ok, "m = {m}");
            }
        }
        let none = FinalData::from_gaussians(grid, &GaussianSpec::new(0.3, 1.0), &GaussianSpec::new(0.0, 1.0)).unwrap();
        assert!(check_nonvanishing(&none, &k).unwrap().iter().all(|m| !m));
    }

    proptest! {
        #[test]
        fn vanishing_for_any_regime_pair(frac in 0.02f64..0.98, l1 in 0.2f64..3.0, r in 0.1f64..2.0) {
            let k = Coefficients::derive(l1, l1 * (1.0 + 2.0 * frac)).unwrap();
            let grid = Grid::new(8, 4.0).unwrap();
            let data = make_vanishing_data(grid, &[0.5; 8], &[r; 8], &k).unwrap();
            let mu = k.mu().unwrap();
            for m in 0..8 {
                let g = growing_coefficient(data.w1()[m], data.w2()[m], &k, mu);
                prop_assert!(g.norm() < 1e-12 * (r + 1.0) * k.lambda6().abs());
            }
        }
    }

    #[test]
    fn linear_run_recovers_transform() {
        let grid = Grid::new(2048, 400.0).unwrap();
        let k = Coefficients::derive(0.0, 1.0).unwrap();
        let u1 = Field::from_fn(grid, Space::Physical, |x| c((-x * x / 4.0).exp(), 0.2 * x * (-x * x / 4.0).exp()));
        let u2 = Field::zeros(grid, Space::Physical);
        let init = FieldPair::new(u1.clone(), u2, 0.0).unwrap();
        let times = log_spaced(1.0, 20.0, 16);
        let cfg = SolverConfig::physical(0.0, 20.0, 0.1).with_snapshots(times).storing();
        let traj = solve_cauchy(&init, &cfg, &k).unwrap();
        let sd = extract_scattering(&traj, &k).unwrap();
        assert_eq!(sd.times.len(), 17);
        let expected = Spectral::new(grid).cft(&u1).unwrap();
        let err = sd.alpha.iter().zip(expected.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        for (w, a) in sd.w1_est.iter().zip(&sd.alpha) {
            assert!((w.norm() - a.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn scattering_needs_snapshots() {
        let t = Trajectory::default();
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        assert!(matches!(extract_scattering(&t, &k), Err(Error::InsufficientData { .. })));
        let d = FinalData::from_gaussians(Grid::new(8, 2.0).unwrap(), &GaussianSpec::new(1.0, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        assert!(profile_error(&t, &d, &k).is_err());
    }
}
