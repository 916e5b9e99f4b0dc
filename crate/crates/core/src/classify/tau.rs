//! Increments of the spectral function by Stieltjes inversion.

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::quadrature;
use crate::weyl::MFunction;

/// Absolute tolerance of each inner integral.
pub const QUAD_TOL: f64 = 1e-9;
const MAX_PANELS: usize = 4000;

fn smoothed<F: MFunction + ?Sized>(mf: &F, l1: f64, l2: f64, nu: f64) -> Result<CMat> {
    let integrand = |t: f64| -> Result<CMat> {
        let ev = mf.eval(c(t, nu))?;
        if !ev.converged {
            return Err(Error::NotConverged(format!("M at {t} + {nu}i")));
        }
        Ok(linalg::im_part(&ev.value))
    };
    let v = quadrature::integrate(integrand, l1, l2, QUAD_TOL, 1e-10, MAX_PANELS)?;
    Ok(linalg::re_part(&v) / c(std::f64::consts::PI, 0.0))
}

/// `τ(λ₂) − τ(λ₁)` from `(1/π)∫ Im M(t + iν) dt` at `ν` and `ν/2`, combined
/// as `2I(ν/2) − I(ν)` to remove the linear term in `ν`.
pub fn tau_increment<F: MFunction + ?Sized>(mf: &F, l1: f64, l2: f64, nu: f64) -> Result<CMat> {
    if !(l1 < l2) || !(nu > 0.0) {
        return Err(Error::BadInput("tau_increment needs l1 < l2 and nu > 0".into()));
    }
    let coarse = smoothed(mf, l1, l2, nu)?;
    let fine = smoothed(mf, l1, l2, 0.5 * nu)?;
    Ok(fine * c(2.0, 0.0) - coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::herglotz::HerglotzModel;

    #[test]
    fn jump_inside_interval() {
        let model = HerglotzModel::scalar(&[(0.0, 1.0)], 0.0, 0.0).unwrap();
        let v = tau_increment(&model, -1.0, 1.0, 1e-3).unwrap();
        assert!((v[(0, 0)].re - 1.0).abs() < 1e-6);
        let gap = tau_increment(&model, 0.5, 1.0, 1e-3).unwrap();
        assert!(gap[(0, 0)].re.abs() < 1e-6);
    }
}
