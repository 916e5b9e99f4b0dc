//! Laurent coefficients of `M₊` about a real point by trapezoidal contour
//! quadrature on a circle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::weyl::MFunction;

/// Default number of contour nodes.
pub const NODES: usize = 64;

/// Samples of `M` on `|λ − center| = ρ` at the half-offset angles
/// `θ_j = 2π(j + ½)/Q`, which never touch the real axis.
pub struct ContourSamples {
    pub center: f64,
    pub rho: f64,
    thetas: Vec<f64>,
    values: Vec<CMat>,
}

impl ContourSamples {
    pub fn new<F: MFunction + ?Sized>(mf: &F, center: f64, rho: f64, q: usize) -> Result<Self> {
        if !(rho > 0.0) || q < 8 {
            return Err(Error::BadInput("contour needs rho > 0 and at least 8 nodes".into()));
        }
        let thetas: Vec<f64> = (0..q).map(|j| std::f64::consts::TAU * (j as f64 + 0.5) / q as f64).collect();
        let mut values = Vec::with_capacity(q);
        for &th in &thetas {
            let lambda = c(center, 0.0) + Complex64::from_polar(rho, th);
            let ev = mf.eval(lambda)?;
            if !ev.converged {
                return Err(Error::NotConverged(format!("M at contour node {lambda}")));
            }
            values.push(ev.value);
        }
        Ok(Self { center, rho, thetas, values })
    }

    /// `K_m = (1/Q) Σ_j M_j ρ^{−m} e^{−imθ_j}`.
    pub fn coefficient(&self, m: i32) -> CMat {
        let q = self.values.len() as f64;
        let n = self.values[0].nrows();
        let mut acc = linalg::zeros(n, n);
        for (th, v) in self.thetas.iter().zip(&self.values) {
            let w = Complex64::from_polar(self.rho.powi(-m), -(m as f64) * th);
            acc += v * w;
        }
        acc / c(q, 0.0)
    }
}

/// Requested `K_m` about `center`.
pub fn laurent_coeffs<F: MFunction + ?Sized>(mf: &F, center: f64, rho: f64, orders: &[i32]) -> Result<Vec<CMat>> {
    let samples = ContourSamples::new(mf, center, rho, NODES)?;
    let out: Vec<CMat> = orders.iter().map(|&m| samples.coefficient(m)).collect();
    if let Some(pos) = orders.iter().position(|&m| m == -1) {
        check_hermitian(&out[pos], center)?;
    }
    Ok(out)
}

fn check_hermitian(k: &CMat, center: f64) -> Result<()> {
    let skew = linalg::fro(&(k - k.adjoint()));
    if skew > 1e-6 * (1.0 + linalg::fro(k)) {
        return Err(Error::NotIsolated { lambda: center, reason: format!("residue is not Hermitian (skew part {skew:.2e})") });
    }
    Ok(())
}

/// Residue data about a refined pole position.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleData {
    pub position: f64,
    pub k_minus1: CMat,
    pub k0: CMat,
    pub k1: CMat,
}

/// Moves the contour center onto the pole using `d = tr K₋₂ / tr K₋₁`
/// (exact for a simple pole) and returns the coefficients there.
pub fn refine_pole<F: MFunction + ?Sized>(mf: &F, guess: f64, rho: f64, iterations: usize) -> Result<PoleData> {
    let mut center = guess;
    for _ in 0..iterations {
        let s = ContourSamples::new(mf, center, rho, NODES)?;
        let k1 = s.coefficient(-1);
        let k2 = s.coefficient(-2);
        let tr = linalg::trace(&k1);
        if tr.norm() < 1e-14 {
            break;
        }
        let d = (linalg::trace(&k2) / tr).re;
        if !d.is_finite() || d.abs() > 0.5 * rho {
            break;
        }
        center += d;
        if d.abs() < 1e-13 * (1.0 + center.abs()) {
            break;
        }
    }
    let s = ContourSamples::new(mf, center, rho, NODES)?;
    let k_minus1 = s.coefficient(-1);
    check_hermitian(&k_minus1, center)?;
    Ok(PoleData { position: center, k_minus1: linalg::re_part(&k_minus1), k0: s.coefficient(0), k1: s.coefficient(1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::herglotz::HerglotzModel;

    #[test]
    fn one_jump_model() {
        let model = HerglotzModel::scalar(&[(0.0, 1.0)], 0.25, 0.0).unwrap();
        let k = laurent_coeffs(&model, 0.0, 0.1, &[-1, 0, 1]).unwrap();
        assert!((k[0][(0, 0)] + linalg::ONE).norm() < 1e-12);
        assert!((k[1][(0, 0)] - c(0.25, 0.0)).norm() < 1e-12);
        assert!(k[2][(0, 0)].norm() < 1e-10);
    }

    #[test]
    fn shifted_center_refines() {
        let model = HerglotzModel::scalar(&[(0.013, 0.5)], 0.0, 0.0).unwrap();
        let p = refine_pole(&model, 0.0, 0.1, 4).unwrap();
        assert!((p.position - 0.013).abs() < 1e-12);
        assert!((p.k_minus1[(0, 0)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_pole_inside() {
        let model = HerglotzModel::scalar(&[(1.0, 1.0)], 0.0, 0.0).unwrap();
        let k = laurent_coeffs(&model, 0.0, 0.1, &[-1]).unwrap();
        assert!(k[0].norm() < 1e-12);
    }
}
