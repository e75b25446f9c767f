use num_complex::Complex64;

use super::{check_finite, FieldPair, Mode, Observables, SolverConfig, Trajectory};
use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::spectral::{Field, Grid, Space, Spectral};

/// Strang splitting `U(dt/2) ∘ N(dt) ∘ U(dt/2)` with an exact nonlinear flow.
///
/// In the nonlinear substep `|u1|` is constant, so
/// `u1 ← u1 e^{−3iλ1|u1|² dt}` is exact. With `u1` frozen at its midpoint
/// phase `φ`, `(u2, ū2)` obeys `d/dt = −iλ6|u1|² A` with
/// `A = [[2, e^{2iφ}], [−e^{−2iφ}, −2]]`, and `A² = 3I` gives
/// `exp(−iτA) = cos(√3τ) − i sin(√3τ)/√3 · A`. Both substeps are inverted
/// exactly by `−dt`, so the scheme is time-reversible.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    spectral: Spectral,
    lambda1: f64,
    lambda6: f64,
    dt: f64,
    half: Vec<Complex64>,
    nonlinear: bool,
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

impl SplitStepper {
    pub fn new(grid: Grid, coeffs: &Coefficients, dt: f64) -> Self {
        let spectral = Spectral::new(grid);
        let half = spectral.free_multiplier(0.5 * dt);
        Self {
            spectral,
            lambda1: coeffs.lambda1(),
            lambda6: coeffs.lambda6(),
            dt,
            half,
            nonlinear: true,
        }
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// Exact flow of the nonlinear part over `dt`, pointwise.
    pub fn nonlinear_substep(&self, u1: &mut [Complex64], u2: &mut [Complex64]) {
        let dt = self.dt;
        let (l1, l6) = (self.lambda1, self.lambda6);
        for (a, b) in u1.iter_mut().zip(u2.iter_mut()) {
            let rho2 = a.norm_sqr();
            let mid = *a * Complex64::from_polar(1.0, -1.5 * l1 * rho2 * dt);
            *a *= Complex64::from_polar(1.0, -3.0 * l1 * rho2 * dt);
            let s = l6 * dt * rho2;
            let r3 = 3f64.sqrt() * s;
            let forcing = 2.0 * rho2 * *b + mid * mid * b.conj();
            *b = r3.cos() * *b - Complex64::new(0.0, sinc(r3) * l6 * dt) * forcing;
        }
    }

    /// One step in place on physical samples.
    pub fn step_in_place(&self, u1: &mut [Complex64], u2: &mut [Complex64]) {
        self.spectral.propagate_in_place(u1, &self.half);
        self.spectral.propagate_in_place(u2, &self.half);
        if self.nonlinear {
            self.nonlinear_substep(u1, u2);
        }
        self.spectral.propagate_in_place(u1, &self.half);
        self.spectral.propagate_in_place(u2, &self.half);
    }

    pub fn step(&self, state: &FieldPair) -> Result<FieldPair> {
        check_physical(state, self.spectral.grid())?;
        let mut u1 = state.u1.values().to_vec();
        let mut u2 = state.u2.values().to_vec();
        self.step_in_place(&mut u1, &mut u2);
        FieldPair::new(
            Field::new(*state.grid(), Space::Physical, u1)?,
            Field::new(*state.grid(), Space::Physical, u2)?,
            state.t + self.dt,
        )
    }
}

fn check_physical(state: &FieldPair, grid: &Grid) -> Result<()> {
    state.u1.expect_space(Space::Physical)?;
    if state.grid() != grid {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Fails with `DomainExhaustion` when a component has more than `tol` of its
/// mass outside `|x| < L/4`.
pub(crate) fn check_domain(pair: &FieldPair, tol: f64) -> Result<()> {
    let radius = 0.25 * pair.grid().length();
    for (j, f) in [(1, &pair.u1), (2, &pair.u2)] {
        let fraction = f.mass_fraction_outside(radius);
        if fraction > tol {
            return Err(Error::DomainExhaustion {
                t: pair.t,
                component: j,
                fraction,
                tolerance: tol,
            });
        }
    }
    Ok(())
}

/// One Strang step of size `dt` (negative for backward), with the domain check.
pub fn strang_step(state: &FieldPair, dt: f64, coeffs: &Coefficients) -> Result<FieldPair> {
    let next = SplitStepper::new(*state.grid(), coeffs, dt).step(state)?;
    check_finite(&[&next.u1, &next.u2], next.t)?;
    check_domain(&next, super::DEFAULT_LEAK_TOL)?;
    Ok(next)
}

pub(crate) fn physical_observables(spectral: &Spectral, pair: &FieldPair) -> Result<Observables> {
    let t = pair.t;
    Ok(Observables {
        t,
        l2_u1: pair.u1.l2_norm(),
        linf_u1: pair.u1.linf_norm(),
        j_u1: spectral.apply_j(&pair.u1, t)?.l2_norm(),
        l2_u2: pair.u2.l2_norm(),
        linf_u2: pair.u2.linf_norm(),
        j_u2: spectral.apply_j(&pair.u2, t)?.l2_norm(),
        errors: None,
    })
}

/// Steps through `config.output_times()` (either direction), calling
/// `record` at each. Every interval is split into equal steps no longer
/// than `config.dt`.
pub(crate) fn run_split(
    initial: &FieldPair,
    config: &SolverConfig,
    coeffs: &Coefficients,
    mut record: impl FnMut(&FieldPair) -> Result<()>,
) -> Result<()> {
    config.validate()?;
    if config.mode != Mode::Physical {
        return Err(Error::Config("split-step runs need mode = physical".into()));
    }
    let grid = *initial.grid();
    check_physical(initial, &grid)?;
    if initial.t != config.t0 {
        return Err(Error::InvalidInput(format!(
            "initial state is at t = {}, config starts at {}",
            initial.t, config.t0
        )));
    }
    let times = config.output_times();
    let mut u1 = initial.u1.values().to_vec();
    let mut u2 = initial.u2.values().to_vec();
    record(initial)?;
    let mut stepper: Option<SplitStepper> = None;
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let n = (span.abs() / config.dt).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let reuse = stepper.as_ref().is_some_and(|s| s.dt() == h);
        if !reuse {
            let s = SplitStepper::new(grid, coeffs, h);
            stepper = Some(if config.nonlinear { s } else { s.linear() });
        }
        let s = stepper.as_ref().expect("stepper set above");
        for k in 0..n {
            s.step_in_place(&mut u1, &mut u2);
            let t = w[0] + (k + 1) as f64 * h;
            let pair = FieldPair {
                u1: Field::new(grid, Space::Physical, std::mem::take(&mut u1))?,
                u2: Field::new(grid, Space::Physical, std::mem::take(&mut u2))?,
                t: if k + 1 == n { w[1] } else { t },
            };
            check_finite(&[&pair.u1, &pair.u2], pair.t)?;
            check_domain(&pair, config.leak_tol)?;
            if k + 1 == n {
                record(&pair)?;
            }
            u1 = pair.u1.into_values();
            u2 = pair.u2.into_values();
        }
    }
    Ok(())
}

/// Forward Cauchy problem in physical space.
pub fn solve_cauchy(initial: &FieldPair, config: &SolverConfig, coeffs: &Coefficients) -> Result<Trajectory> {
    if config.t1 <= config.t0 {
        return Err(Error::Config(format!(
            "the Cauchy solver runs forward, got t0 = {}, t1 = {}",
            config.t0, config.t1
        )));
    }
    let spectral = Spectral::new(*initial.grid());
    let mut trajectory = Trajectory::default();
    run_split(initial, config, coeffs, |pair| {
        let obs = physical_observables(&spectral, pair)?;
        trajectory.push(obs, config.store_snapshots.then(|| pair.clone()))
    })?;
    Ok(trajectory)
}
