//! Exact Nevanlinna functions built from a step spectral function, an
//! affine part and an optional semicircle density.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::weyl::{MFunction, MPlusEvaluation};

/// Right-continuous nondecreasing Hermitian step function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSpectralFunction {
    pub breakpoints: Vec<f64>,
    #[serde(skip)]
    pub increments: Vec<CMat>,
}

impl StepSpectralFunction {
    pub fn new(mut jumps: Vec<(f64, CMat)>, tol: f64) -> Result<Self> {
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = jumps.first().map_or(0, |j| j.1.nrows());
        for (t, inc) in &jumps {
            if !t.is_finite() {
                return Err(Error::BadInput("breakpoints must be finite".into()));
            }
            if inc.shape() != (n, n) {
                return Err(Error::ShapeMismatch("jump sizes must share one square shape".into()));
            }
            let herm = linalg::fro(&(inc - inc.adjoint()));
            if herm > tol * (1.0 + linalg::fro(inc)) || linalg::min_eig(inc) < -tol {
                return Err(Error::BadInput(format!("jump at {t} is not Hermitian psd")));
            }
        }
        if jumps.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::BadInput("breakpoints must be distinct".into()));
        }
        let (breakpoints, increments) = jumps.into_iter().unzip();
        Ok(Self { breakpoints, increments })
    }

    pub fn half_dim(&self) -> usize {
        self.increments.first().map_or(1, |m| m.nrows())
    }

    /// `τ(t) − τ(−∞)`, counting a jump at `t` itself.
    pub fn eval(&self, t: f64) -> CMat {
        let n = self.half_dim();
        self.breakpoints.iter().zip(&self.increments).filter(|(b, _)| **b <= t).fold(linalg::zeros(n, n), |acc, (_, inc)| acc + inc)
    }
}

/// `M⁰ + λM¹ + Σ c_t (1/(t − λ) − t/(1 + t²)) + W·m₀(λ)`, where `m₀` is the
/// free half-line function `(√(λ² − 4) − λ)/2` on the decaying branch.
#[derive(Debug, Clone, PartialEq)]
pub struct HerglotzModel {
    pub tau: StepSpectralFunction,
    pub m0: CMat,
    pub m1: CMat,
    pub semicircle: Option<CMat>,
}

/// `m₀(λ) = −ζ` with `ζ + 1/ζ = λ`, `|ζ| < 1`; on the real axis the limit
/// from the upper half-plane.
pub fn free_m(lambda: Complex64) -> Complex64 {
    let s = (lambda * lambda - c(4.0, 0.0)).sqrt();
    let z1 = (lambda - s) * 0.5;
    let z2 = (lambda + s) * 0.5;
    let (n1, n2) = (z1.norm(), z2.norm());
    if (n1 - n2).abs() > 1e-14 * (1.0 + n1) {
        return -(if n1 < n2 { z1 } else { z2 });
    }
    // |ζ| = 1: real λ inside the band, take Im M ≥ 0 for Im λ ≥ 0
    let cand = if (-z1).im >= 0.0 { -z1 } else { -z2 };
    if lambda.im < 0.0 {
        cand.conj()
    } else {
        cand
    }
}

impl HerglotzModel {
    pub fn new(tau: StepSpectralFunction, m0: CMat, m1: CMat, semicircle: Option<CMat>) -> Result<Self> {
        let n = m0.nrows();
        if m0.shape() != (n, n) || m1.shape() != (n, n) || (!tau.breakpoints.is_empty() && tau.half_dim() != n) {
            return Err(Error::ShapeMismatch("Herglotz data must share one n x n shape".into()));
        }
        if linalg::fro(&(&m0 - m0.adjoint())) > 1e-12 * (1.0 + linalg::fro(&m0)) {
            return Err(Error::BadInput("M0 must be Hermitian".into()));
        }
        if linalg::fro(&(&m1 - m1.adjoint())) > 1e-12 * (1.0 + linalg::fro(&m1)) || linalg::min_eig(&m1) < -1e-12 {
            return Err(Error::BadInput("M1 must be Hermitian psd".into()));
        }
        if let Some(w) = &semicircle {
            if w.shape() != (n, n) || linalg::min_eig(w) < -1e-12 {
                return Err(Error::BadInput("semicircle weight must be Hermitian psd".into()));
            }
        }
        Ok(Self { tau, m0, m1, semicircle })
    }

    /// Scalar model from `(position, size)` pairs.
    pub fn scalar(jumps: &[(f64, f64)], m0: f64, m1: f64) -> Result<Self> {
        let jumps = jumps.iter().map(|&(t, s)| (t, CMat::from_element(1, 1, c(s, 0.0)))).collect();
        let tau = StepSpectralFunction::new(jumps, 1e-12)?;
        Self::new(tau, CMat::from_element(1, 1, c(m0, 0.0)), CMat::from_element(1, 1, c(m1, 0.0)), None)
    }

    pub fn with_semicircle(mut self, weight: CMat) -> Result<Self> {
        let n = self.m0.nrows();
        if weight.shape() != (n, n) {
            return Err(Error::ShapeMismatch("semicircle weight must be n x n".into()));
        }
        self.semicircle = Some(weight);
        Ok(self)
    }

    pub fn half_dim(&self) -> usize {
        self.m0.nrows()
    }

    pub fn eval_exact(&self, lambda: Complex64) -> Result<CMat> {
        if lambda.im == 0.0 && self.tau.breakpoints.contains(&lambda.re) {
            return Err(Error::Pole(lambda.re));
        }
        let mut m = &self.m0 + &self.m1 * lambda;
        for (&t, inc) in self.tau.breakpoints.iter().zip(&self.tau.increments) {
            let k = c(1.0, 0.0) / (c(t, 0.0) - lambda) - c(t / (1.0 + t * t), 0.0);
            m += inc * k;
        }
        if let Some(w) = &self.semicircle {
            m += w * free_m(lambda);
        }
        Ok(m)
    }
}

/// Stand-alone form of [`HerglotzModel::eval_exact`].
pub fn herglotz_eval(tau: &StepSpectralFunction, m0: &CMat, m1: &CMat, lambda: Complex64) -> Result<CMat> {
    HerglotzModel::new(tau.clone(), m0.clone(), m1.clone(), None)?.eval_exact(lambda)
}

impl MFunction for HerglotzModel {
    fn half_dim(&self) -> usize {
        self.m0.nrows()
    }

    fn eval(&self, lambda: Complex64) -> Result<MPlusEvaluation> {
        Ok(MPlusEvaluation { lambda, value: self.eval_exact(lambda)?, n_used: 0, diameter: 0.0, on_circle_residual: 0.0, converged: true })
    }
}
