//! Boundary behaviour of `M₊` along `λ₀ + iν`, `ν ↓ 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrapolate;
use crate::linalg::{self, c, CMat};
use crate::weyl::MFunction;

/// Geometric schedule `ν_j = ν₀ r^j`, `j = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NuSchedule {
    pub nu0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for NuSchedule {
    fn default() -> Self {
        Self { nu0: 0.1, ratio: 0.5, count: 14 }
    }
}

/// Smallest admissible node.
pub const NU_FLOOR: f64 = 1e-8;

/// Minimum number of converged nodes for an extrapolation.
pub const MIN_NODES: usize = 3;

/// Highest polynomial order used by the extrapolation.
pub const MAX_ORDER: usize = 5;

impl NuSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0) || !(self.ratio > 0.0 && self.ratio < 1.0) || self.count < MIN_NODES {
            return Err(Error::BadInput("nu schedule needs nu0 > 0, 0 < r < 1, count >= 3".into()));
        }
        if self.nu0 * self.ratio.powi(self.count as i32 - 1) < NU_FLOOR {
            return Err(Error::BadInput(format!("smallest nu below the floor {NU_FLOOR:e}")));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.nu0 * self.ratio.powi(j as i32)).collect()
    }
}

/// Extrapolated boundary data at a real point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLimit {
    pub lambda0: f64,
    /// `lim ν M(λ₀ + iν)`
    pub l_hat: CMat,
    pub l_residual: f64,
    /// `lim Im M(λ₀ + iν)`
    pub density: CMat,
    pub density_residual: f64,
    /// `lim M(λ₀ + iν)`; meaningful only when `L̂ = 0`.
    pub m_boundary: CMat,
    pub m_residual: f64,
    /// `M(λ₀ + iν₀)`
    pub m_at_nu0: CMat,
    /// Converged nodes actually used.
    pub nus: Vec<f64>,
}

/// Evaluates the schedule until the first non-converged node and
/// extrapolates `νM`, `Im M` and `M` to `ν = 0`.
pub fn boundary_limit<F: MFunction + ?Sized>(mf: &F, lambda0: f64, schedule: &NuSchedule) -> Result<BoundaryLimit> {
    schedule.validate()?;
    let mut nus = Vec::new();
    let mut ms = Vec::new();
    for nu in schedule.nodes() {
        match mf.eval(c(lambda0, nu)) {
            Ok(ev) if ev.converged => {
                nus.push(nu);
                ms.push(ev.value);
            }
            Ok(_) | Err(Error::DegenerateSystem { .. }) | Err(Error::Overflow { .. }) => break,
            Err(e) => return Err(e),
        }
    }
    if nus.len() < MIN_NODES {
        return Err(Error::NotConverged(format!("only {} converged nu-nodes at lambda0 = {lambda0}", nus.len())));
    }
    let scaled: Vec<CMat> = nus.iter().zip(&ms).map(|(nu, m)| m * c(*nu, 0.0)).collect();
    let ims: Vec<CMat> = ms.iter().map(linalg::im_part).collect();
    let l = extrapolate::richardson(&nus, &scaled, MAX_ORDER);
    let d = extrapolate::richardson(&nus, &ims, MAX_ORDER);
    let m = extrapolate::richardson(&nus, &ms, MAX_ORDER);
    Ok(BoundaryLimit {
        lambda0,
        l_hat: l.value,
        l_residual: l.residual,
        density: linalg::re_part(&d.value),
        density_residual: d.residual,
        m_boundary: m.value,
        m_residual: m.residual,
        m_at_nu0: ms[0].clone(),
        nus,
    })
}

/// `L̂ = lim ν M(λ₀ + iν)` and its extrapolation residual.
pub fn boundary_limit_l<F: MFunction + ?Sized>(mf: &F, lambda0: f64, schedule: &NuSchedule) -> Result<(CMat, f64)> {
    let b = boundary_limit(mf, lambda0, schedule)?;
    Ok((b.l_hat, b.l_residual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::herglotz::HerglotzModel;

    #[test]
    fn unit_jump_gives_i() {
        let model = HerglotzModel::scalar(&[(0.0, 1.0)], 0.3, 0.0).unwrap();
        let (l, _) = boundary_limit_l(&model, 0.0, &NuSchedule::default()).unwrap();
        assert!((l[(0, 0)] - linalg::I).norm() < 1e-10);
    }

    #[test]
    fn schedule_floor() {
        let s = NuSchedule { nu0: 1e-6, ratio: 0.1, count: 5 };
        assert!(s.validate().is_err());
    }
}
