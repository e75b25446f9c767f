use num_complex::Complex64;

use super::{check_finite, FieldPair, Mode, Observables, SolverConfig, Trajectory};
use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid, Space, Spectral};

const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// The profile-frame equations in `s = log t`:
///
/// ```text
/// dv_j/ds = −i F M(t)⁻¹ F⁻¹ N_j(F M(t) F⁻¹ v1, F M(t) F⁻¹ v2)
/// ```
///
/// which follows from `v = F U(−t) u`, `U(t) = M D F M` and the cubic
/// scaling `N(M D g) = t⁻¹ M D N(g)`.
struct ProfileFrame {
    spectral: Spectral,
    x_sq: Vec<f64>,
    lambda1: f64,
    lambda6: f64,
}

impl ProfileFrame {
    fn new(grid: Grid, coeffs: &Coefficients) -> Self {
        Self {
            spectral: Spectral::new(grid),
            x_sq: grid.x_nodes().iter().map(|x| x * x).collect(),
            lambda1: coeffs.lambda1(),
            lambda6: coeffs.lambda6(),
        }
    }

    fn multiplier(&self, t: f64, sign: f64) -> Vec<Complex64> {
        self.x_sq
            .iter()
            .map(|x2| Complex64::from_polar(1.0, sign * x2 / (2.0 * t)))
            .collect()
    }

    /// `g_j = F M F⁻¹ v_j`.
    fn physical_profiles(&self, t: f64, v1: &[Complex64], v2: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let m = self.multiplier(t, 1.0);
        let mut a = v1.to_vec();
        let mut b = v2.to_vec();
        self.spectral.conjugated_m_in_place(&mut a, &m);
        self.spectral.conjugated_m_in_place(&mut b, &m);
        (a, b)
    }

    fn rhs(&self, s: f64, v1: &[Complex64], v2: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let t = s.exp();
        let (a, b) = self.physical_profiles(t, v1, v2);
        let (l1, l6) = (self.lambda1, self.lambda6);
        let mut n1: Vec<Complex64> = a.iter().map(|&p| 3.0 * l1 * p.norm_sqr() * p).collect();
        let mut n2: Vec<Complex64> = a
            .iter()
            .zip(&b)
            .map(|(&p, &q)| l6 * (2.0 * p.norm_sqr() * q + p * p * q.conj()))
            .collect();
        let minv = self.multiplier(t, -1.0);
        self.spectral.conjugated_m_in_place(&mut n1, &minv);
        self.spectral.conjugated_m_in_place(&mut n2, &minv);
        for v in n1.iter_mut().chain(n2.iter_mut()) {
            *v *= MINUS_I;
        }
        (n1, n2)
    }

    fn rk4_step(&self, s: f64, h: f64, v1: &mut [Complex64], v2: &mut [Complex64]) {
        let axpy = |v: &[Complex64], k: &[Complex64], c: f64| -> Vec<Complex64> {
            v.iter().zip(k).map(|(a, b)| a + c * b).collect()
        };
        let (k1a, k1b) = self.rhs(s, v1, v2);
        let (k2a, k2b) = self.rhs(s + 0.5 * h, &axpy(v1, &k1a, 0.5 * h), &axpy(v2, &k1b, 0.5 * h));
        let (k3a, k3b) = self.rhs(s + 0.5 * h, &axpy(v1, &k2a, 0.5 * h), &axpy(v2, &k2b, 0.5 * h));
        let (k4a, k4b) = self.rhs(s + h, &axpy(v1, &k3a, h), &axpy(v2, &k3b, h));
        let w = h / 6.0;
        for i in 0..v1.len() {
            v1[i] += w * (k1a[i] + 2.0 * k2a[i] + 2.0 * k3a[i] + k4a[i]);
            v2[i] += w * (k1b[i] + 2.0 * k2b[i] + 2.0 * k3b[i] + k4b[i]);
        }
    }

    /// `‖v‖`, `t^{−1/2}‖F M F⁻¹ v‖∞` and `‖y F⁻¹ v‖ = ‖J u‖` per component.
    fn observables(&self, pair: &FieldPair) -> Observables {
        let t = pair.t;
        let (a, b) = self.physical_profiles(t, pair.u1.values(), pair.u2.values());
        let sup = |g: &[Complex64]| g.iter().map(|v| v.norm()).fold(0.0, f64::max) / t.sqrt();
        let grid = self.spectral.grid();
        let weighted = |v: &Field| {
            let mut y = v.values().to_vec();
            self.spectral.inverse_in_place(&mut y);
            (self
                .x_sq
                .iter()
                .zip(&y)
                .map(|(x2, g)| x2 * g.norm_sqr())
                .sum::<f64>()
                * grid.dx())
            .sqrt()
        };
        Observables {
            t,
            l2_u1: pair.u1.l2_norm(),
            linf_u1: sup(&a),
            j_u1: weighted(&pair.u1),
            l2_u2: pair.u2.l2_norm(),
            linf_u2: sup(&b),
            j_u2: weighted(&pair.u2),
            errors: None,
        }
    }
}

/// `dv/ds` at `v.t` (frequency-space pair).
pub fn profile_frame_rhs(v: &FieldPair, coeffs: &Coefficients) -> Result<FieldPair> {
    v.u1.expect_space(Space::Frequency)?;
    if v.t <= 0.0 {
        return Err(Error::InvalidInput(format!("profile frame needs t > 0, got {}", v.t)));
    }
    let grid = *v.grid();
    let frame = ProfileFrame::new(grid, coeffs);
    let (a, b) = frame.rhs(v.t.ln(), v.u1.values(), v.u2.values());
    FieldPair::new(
        Field::new(grid, Space::Frequency, a)?,
        Field::new(grid, Space::Frequency, b)?,
        v.t,
    )
}

/// RK4 in `log t` through the configured output times.
pub fn solve_profile_frame(initial_v: &FieldPair, config: &SolverConfig, coeffs: &Coefficients) -> Result<Trajectory> {
    config.validate()?;
    if config.mode != Mode::ProfileFrame {
        return Err(Error::Config("profile-frame runs need mode = profile_frame".into()));
    }
    initial_v.u1.expect_space(Space::Frequency)?;
    if initial_v.t != config.t0 {
        return Err(Error::InvalidInput(format!(
            "initial state is at t = {}, config starts at {}",
            initial_v.t, config.t0
        )));
    }
    let grid = *initial_v.grid();
    let frame = ProfileFrame::new(grid, coeffs);
    let mut trajectory = Trajectory::default();
    let record = |pair: &FieldPair, traj: &mut Trajectory| {
        traj.push(frame.observables(pair), config.store_snapshots.then(|| pair.clone()))
    };
    record(initial_v, &mut trajectory)?;

    let mut v1 = initial_v.u1.values().to_vec();
    let mut v2 = initial_v.u2.values().to_vec();
    let times = config.output_times();
    for w in times.windows(2) {
        let (s0, s1) = (w[0].ln(), w[1].ln());
        let decades = (s1 - s0).abs() / std::f64::consts::LN_10;
        let n = (decades * config.steps_per_decade as f64).ceil().max(1.0) as usize;
        let h = (s1 - s0) / n as f64;
        if config.nonlinear {
            for k in 0..n {
                frame.rk4_step(s0 + k as f64 * h, h, &mut v1, &mut v2);
            }
        }
        let pair = FieldPair::new(
            Field::new(grid, Space::Frequency, v1)?,
            Field::new(grid, Space::Frequency, v2)?,
            w[1],
        )?;
        check_finite(&[&pair.u1, &pair.u2], pair.t)?;
        record(&pair, &mut trajectory)?;
        v1 = pair.u1.into_values();
        v2 = pair.u2.into_values();
    }
    Ok(trajectory)
}
