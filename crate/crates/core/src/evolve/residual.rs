use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coeffs::Coefficients;
use crate::error::{Error, Result};
use crate::profiles::{eval_f1, eval_f2, FinalData};
use crate::spectral::{expm1_i, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub l2: f64,
    pub j_norm: f64,
}

/// Norms of `E_j = −t⁻¹ M D F (M − 1) F⁻¹ Ñ_j(F1, F2)`.
///
/// `M D F` is unitary and `J M D F = M D F y`, so
/// `‖E_j‖ = t⁻¹‖(M − 1) h‖` and `‖J E_j‖ = t⁻¹‖y (M − 1) h‖` with
/// `h = F⁻¹ Ñ_j`; both are evaluated on the final-data grid, where `y` is
/// the dual of `ξ`. `M − 1` uses the cancellation-free `e^{iθ} − 1`.
pub fn residual_ej(t: f64, data: &FinalData, coeffs: &Coefficients, j: usize) -> Result<ResidualNorms> {
    if !(t >= 2.0) {
        return Err(Error::InvalidInput(format!("residual needs t >= 2, got {t}")));
    }
    let f1 = eval_f1(t, data, coeffs);
    let mut h: Vec<Complex64> = match j {
        1 => f1.iter().map(|&a| 3.0 * coeffs.lambda1() * a.norm_sqr() * a).collect(),
        2 => {
            let f2 = eval_f2(t, data, coeffs)?;
            f1.iter()
                .zip(&f2)
                .map(|(&a, &b)| coeffs.lambda6() * (2.0 * a.norm_sqr() * b + a * a * b.conj()))
                .collect()
        }
        _ => return Err(Error::InvalidInput(format!("component must be 1 or 2, got {j}"))),
    };
    let grid = *data.grid();
    Spectral::new(grid).inverse_in_place(&mut h);
    let (mut l2, mut weighted) = (0.0, 0.0);
    for (k, v) in h.iter().enumerate() {
        let y = grid.x(k);
        let r = (expm1_i(y * y / (2.0 * t)) * v).norm_sqr();
        l2 += r;
        weighted += y * y * r;
    }
    let dy = grid.dx();
    Ok(ResidualNorms {
        l2: (l2 * dy).sqrt() / t,
        j_norm: (weighted * dy).sqrt() / t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fit_decay_rate;
    use crate::evolve::log_spaced;
    use crate::profiles::GaussianSpec;
    use crate::spectral::{Field, Grid, Space};

    fn data(eps: f64) -> FinalData {
        let grid = Grid::balanced(4096).unwrap();
        FinalData::from_gaussians(grid, &GaussianSpec::new(eps, 1.0), &GaussianSpec::new(1.0, 1.0)).unwrap()
    }

    #[test]
    fn vanishes_without_w1() {
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        let r = residual_ej(10.0, &data(0.0), &k, 1).unwrap();
        assert_eq!((r.l2, r.j_norm), (0.0, 0.0));
        assert!(residual_ej(1.0, &data(0.3), &k, 1).is_err());
        assert!(residual_ej(10.0, &data(0.3), &k, 3).is_err());
    }

    #[test]
    fn matches_direct_operator_evaluation() {
        // Build E1 through the spectral operators and compare norms.
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        let d = data(0.3);
        let grid = *d.grid();
        let s = Spectral::new(grid);
        let t = 20.0;
        let n1: Vec<Complex64> = eval_f1(t, &d, &k).iter().map(|&a| 3.0 * a.norm_sqr() * a).collect();
        let h = s.icft(&Field::new(grid, Space::Frequency, n1).unwrap()).unwrap();
        let diff = s.apply_m(&h, t).unwrap().sub(&h).unwrap();
        let back = s.cft(&diff).unwrap();
        let r = residual_ej(t, &d, &k, 1).unwrap();
        assert!((back.l2_norm() / t - r.l2).abs() < 1e-6 * r.l2);
    }

    #[test]
    fn decay_rates() {
        let k = Coefficients::derive(1.0, 1.5).unwrap();
        let d = data(0.3);
        let times = log_spaced(1e2, 1e4, 16);
        let (l2, jn): (Vec<f64>, Vec<f64>) = times
            .iter()
            .map(|&t| {
                let r = residual_ej(t, &d, &k, 1).unwrap();
                (r.l2, r.j_norm)
            })
            .unzip();
        assert!(fit_decay_rate(&times, &l2, (1e2, 1e4)).unwrap().slope <= -1.8);
        assert!(fit_decay_rate(&times, &jn, (1e2, 1e4)).unwrap().slope <= -1.3);
        let r2 = residual_ej(100.0, &d, &k, 2).unwrap();
        assert!(r2.l2 > 0.0 && r2.l2.is_finite());
    }
}
