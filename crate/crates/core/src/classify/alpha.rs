//! Change of boundary matrix for `M₊`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::system::BoundaryMatrix;
use crate::weyl::{MFunction, MPlusEvaluation};

/// Bracket `αα̂* − αJα̂*M̂` counts as singular below this reciprocal condition.
pub const SINGULAR_RCOND: f64 = 1e-12;

/// `M(λ, α) = [αJα̂* + αα̂*M̂][αα̂* − αJα̂*M̂]⁻¹` for `M̂ = M(λ, α̂)`.
pub fn transform_alpha(lambda: Complex64, m_hat: &CMat, alpha: &BoundaryMatrix, alpha_hat: &BoundaryMatrix) -> Result<CMat> {
    let n = alpha.n();
    if alpha_hat.n() != n || m_hat.shape() != (n, n) {
        return Err(Error::ShapeMismatch("transform_alpha operands disagree in size".into()));
    }
    let aa = alpha.matrix() * alpha_hat.matrix().adjoint();
    let aja = linalg::j_right(alpha.matrix()) * alpha_hat.matrix().adjoint();
    let num = &aja + &aa * m_hat;
    let den = &aa - &aja * m_hat;
    let scale = linalg::fro(&aa) + linalg::fro(&aja) * linalg::fro(m_hat);
    let smin = linalg::singular_values(&den).last().copied().unwrap_or(0.0);
    if !(smin > SINGULAR_RCOND * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::PoleOfTransform(lambda));
    }
    let inv = linalg::inverse(&den).ok_or(Error::PoleOfTransform(lambda))?;
    Ok(num * inv)
}

/// `M(·, α)` evaluated through another function `M(·, α̂)`.
pub struct Transformed<'a, F: MFunction + ?Sized> {
    pub inner: &'a F,
    pub alpha: BoundaryMatrix,
    pub alpha_hat: BoundaryMatrix,
}

impl<F: MFunction + ?Sized> MFunction for Transformed<'_, F> {
    fn half_dim(&self) -> usize {
        self.alpha.n()
    }

    fn eval(&self, lambda: Complex64) -> Result<MPlusEvaluation> {
        let mut ev = self.inner.eval(lambda)?;
        ev.value = transform_alpha(lambda, &ev.value, &self.alpha, &self.alpha_hat)?;
        Ok(ev)
    }
}
