use super::split::{physical_observables, run_split};
use super::{FieldPair, ProfileErrors, SolverConfig, Trajectory};
use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::profiles::{eval_f1, eval_f2, sample_uap, FinalData};
use crate::spectral::{Field, Space, Spectral};

/// `ũ_ap,j(t) = U(t) F⁻¹[F_j(t, ·)]` on the final-data grid.
pub fn seed_final_state(data: &FinalData, coeffs: &Coefficients, t: f64) -> Result<FieldPair> {
    let grid = *data.grid();
    let s = Spectral::new(grid);
    let lift = |values| -> Result<Field> {
        let profile = Field::new(grid, Space::Frequency, values)?;
        s.free_propagate(&s.icft(&profile)?, t)
    };
    FieldPair::new(lift(eval_f1(t, data, coeffs))?, lift(eval_f2(t, data, coeffs)?)?, t)
}

/// `‖u_j − u_ap,j‖` in L² and L∞ for a physical pair on the final-data grid.
pub fn uap_errors(pair: &FieldPair, data: &FinalData, coeffs: &Coefficients) -> Result<ProfileErrors> {
    pair.u1.expect_space(Space::Physical)?;
    let grid = *pair.grid();
    let d1 = pair.u1.sub(&sample_uap(pair.t, 1, data, coeffs, grid)?.field)?;
    let d2 = pair.u2.sub(&sample_uap(pair.t, 2, data, coeffs, grid)?.field)?;
    Ok(ProfileErrors {
        errl2_1: d1.l2_norm(),
        errlinf_1: d1.linf_norm(),
        errl2_2: d2.l2_norm(),
        errlinf_2: d2.linf_norm(),
    })
}

/// Seeds `ũ_ap` at `t_max` and steps backward to `t_final`, recording the
/// distance to `u_ap` at every output time.
///
/// The simulation grid is the final-data grid. `config` supplies `dt`,
/// snapshot times, `leak_tol` and storage; its `t0`/`t1` are replaced by
/// `t_max`/`t_final`.
pub fn solve_final_state(
    data: &FinalData,
    coeffs: &Coefficients,
    t_final: f64,
    t_max: f64,
    config: &SolverConfig,
) -> Result<Trajectory> {
    coeffs.require_deceleration()?;
    if !(t_final >= 2.0 && t_final < t_max && t_max.is_finite()) {
        return Err(Error::Config(format!(
            "final-state runs need 2 <= T < T_max, got T = {t_final}, T_max = {t_max}"
        )));
    }
    let mut cfg = config.clone();
    cfg.t0 = t_max;
    cfg.t1 = t_final;
    let seed = seed_final_state(data, coeffs, t_max)?;
    let spectral = Spectral::new(*data.grid());
    let mut trajectory = Trajectory::default();
    run_split(&seed, &cfg, coeffs, |pair| {
        let mut obs = physical_observables(&spectral, pair)?;
        obs.errors = Some(uap_errors(pair, data, coeffs)?);
        trajectory.push(obs, cfg.store_snapshots.then(|| pair.clone()))
    })?;
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::GaussianSpec;
    use crate::spectral::Grid;

    fn coeffs() -> Coefficients {
        Coefficients::derive(1.0, 1.5).unwrap()
    }

    #[test]
    fn rejects_bad_windows() {
        let grid = Grid::new(256, 100.0).unwrap();
        let data = FinalData::from_gaussians(grid, &GaussianSpec::new(0.3, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        let cfg = SolverConfig::physical(0.0, 1.0, 0.1);
        assert!(solve_final_state(&data, &coeffs(), 1.0, 10.0, &cfg).is_err());
        assert!(solve_final_state(&data, &coeffs(), 10.0, 5.0, &cfg).is_err());
        let osc = Coefficients::derive(1.0, 5.0).unwrap();
        assert!(matches!(
            solve_final_state(&data, &osc, 2.0, 5.0, &cfg),
            Err(Error::WrongRegime(_))
        ));
    }

    #[test]
    fn seeding_error_is_the_modification() {
        let grid = Grid::new(4096, 1024.0).unwrap();
        let k = coeffs();
        let data = FinalData::from_gaussians(grid, &GaussianSpec::new(0.3, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        let cfg = SolverConfig::physical(0.0, 1.0, 0.1).with_snapshots(vec![15.0]);
        let traj = solve_final_state(&data, &k, 10.0, 20.0, &cfg).unwrap();
        assert_eq!(traj.times(), vec![20.0, 15.0, 10.0]);
        let first = traj.observables[0].errors.unwrap();
        let direct = uap_errors(&seed_final_state(&data, &k, 20.0).unwrap(), &data, &k).unwrap();
        assert_eq!(first, direct);
        // ‖ũ_ap,1 − u_ap,1‖ shrinks with the seeding time.
        let later = uap_errors(&seed_final_state(&data, &k, 80.0).unwrap(), &data, &k).unwrap();
        assert!(later.errl2_1 < first.errl2_1);
    }

    #[test]
    fn zero_w1_is_linear() {
        let grid = Grid::new(2048, 512.0).unwrap();
        let k = coeffs();
        let data = FinalData::from_gaussians(grid, &GaussianSpec::new(0.0, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap();
        let cfg = SolverConfig::physical(0.0, 1.0, 0.1).storing();
        let traj = solve_final_state(&data, &k, 5.0, 20.0, &cfg).unwrap();
        let last = traj.snapshots.last().unwrap();
        assert_eq!(last.u1.linf_norm(), 0.0);
        // u2 is the free evolution of the seed.
        let s = Spectral::new(grid);
        let free = s.free_propagate(&s.icft(&data.w2_field()).unwrap(), 5.0).unwrap();
        assert!(last.u2.sub(&free).unwrap().l2_norm() < 1e-10);
    }
}
