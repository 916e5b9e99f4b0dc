//! Eigenfunctions and residue consistency at an isolated eigenvalue.

use serde::Serialize;

use super::laurent::refine_pole;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::propagate::WeightedSequence;
use crate::system::{BoundaryMatrix, SymplecticSystem};
use crate::weyl::{self, LimitOptions, SystemMFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct EigenData {
    pub lambda: f64,
    pub k_minus1: CMat,
    /// Columns of `Z̃(λ*) K₋₁` on `[0, window]`.
    pub eigenfunctions: WeightedSequence,
    pub gram: CMat,
    /// `‖Gram + K₋₁‖`
    pub gram_residual: f64,
    /// `‖α Z̃_0(λ*) K₋₁‖`
    pub boundary_residual: f64,
    /// `‖Z̃(λ*)‖²_Ψ` when the columns of `Z̃(λ*)` are themselves summable.
    pub ztilde_gram: Option<CMat>,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub rho: f64,
    pub tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { rho: 0.1, tol: 1e-6 }
    }
}

fn lstsq(y0: &CMat, target: &CMat) -> Option<(CMat, f64)> {
    let gram = y0.adjoint() * y0;
    let coef = linalg::inverse(&gram)? * y0.adjoint() * target;
    let res = linalg::fro(&(y0 * &coef - target)) / linalg::fro(target).max(f64::MIN_POSITIVE);
    Some((coef, res))
}

fn gram_of(sys: &SymplecticSystem, ys: &[CMat], coef: &CMat, upto: usize) -> Result<CMat> {
    let m = coef.ncols();
    let mut g = linalg::zeros(m, m);
    for (k, y) in ys.iter().enumerate().take(upto + 1) {
        let e = y * coef;
        g += e.adjoint() * sys.psi(k)? * e;
    }
    Ok(linalg::re_part(&g))
}

/// Eigen data for a supplied residue `K₋₁`.
pub fn eigen_data_with_residue(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: f64,
    k_minus1: &CMat,
    tol: f64,
) -> Result<EigenData> {
    let n = sys.n();
    if k_minus1.shape() != (n, n) {
        return Err(Error::ShapeMismatch("K_-1 must be n x n".into()));
    }
    if linalg::fro(k_minus1) <= tol {
        return Err(Error::InconsistentResidue("zero residue gives a zero eigenfunction".into()));
    }
    let zt0 = -linalg::j_left(&alpha.matrix().adjoint());
    let target = &zt0 * k_minus1;
    let boundary_residual = linalg::fro(&(alpha.matrix() * &target));
    let lam = linalg::c(lambda, 0.0);
    let mut window = 64usize;
    loop {
        let ys = weyl::decaying_solutions(sys, alpha, lam, window, 1e-13)?;
        let (coef, fit) =
            lstsq(&ys[0], &target).ok_or_else(|| Error::InconsistentResidue("decaying solutions are degenerate at k = 0".into()))?;
        let gram = gram_of(sys, &ys, &coef, window)?;
        let half = gram_of(sys, &ys, &coef, window / 2)?;
        let settled = linalg::fro(&(&gram - &half)) <= 1e-15 * (1.0 + linalg::fro(&gram));
        if settled || window >= 1 << 16 {
            if fit > 1e-6 {
                return Err(Error::InconsistentResidue(format!(
                    "columns of Ztilde K_-1 leave the summable subspace (fit residual {fit:.2e})"
                )));
            }
            let eigenfunctions = WeightedSequence::new(0, ys.iter().map(|y| y * &coef).collect());
            let gram_residual = linalg::fro(&(&gram + k_minus1));
            if gram_residual > 100.0 * tol * linalg::fro(k_minus1).max(1.0) {
                return Err(Error::InconsistentResidue(format!("eigenfunction Gram differs from -K_-1 by {gram_residual:.2e}")));
            }
            let ztilde_gram = match lstsq(&ys[0], &zt0) {
                Some((c2, r2)) if r2 < 1e-8 => Some(gram_of(sys, &ys, &c2, window)?),
                _ => None,
            };
            return Ok(EigenData {
                lambda,
                k_minus1: k_minus1.clone(),
                eigenfunctions,
                gram,
                gram_residual,
                boundary_residual,
                ztilde_gram,
                window,
            });
        }
        window *= 2;
    }
}

/// Residue by contour quadrature, then the eigenfunction checks.
pub fn eigen_data(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: f64, opts: &EigenOptions) -> Result<EigenData> {
    let mf = SystemMFunction::new(sys.clone(), alpha.clone()).with_options(LimitOptions::default());
    let pole = refine_pole(&mf, lambda, opts.rho, 4)?;
    eigen_data_with_residue(sys, alpha, pole.position, &pole.k_minus1, opts.tol)
}
