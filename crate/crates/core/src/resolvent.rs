//! Green's function of the half-line problem and application of the
//! resolvent to compactly supported data.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::propagate::{self, WeightedSequence};
use crate::system::{BoundaryMatrix, SymplecticSystem};
use crate::weyl;

/// Stabilization tolerance for the cached Weyl solutions.
pub const KERNEL_TOL: f64 = 1e-14;

/// Column families `Z̃(λ)`, `Z̃(λ̄)`, `X(λ)`, `X(λ̄)` on `[0, len)`.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub lambda: Complex64,
    pub m: CMat,
    pub m_bar: CMat,
    ztilde: Vec<CMat>,
    ztilde_bar: Vec<CMat>,
    x: Vec<CMat>,
    x_bar: Vec<CMat>,
}

impl GreenKernel {
    /// Caches all four families up to index `n_out`.
    pub fn new(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, n_out: usize) -> Result<Self> {
        Self::build(sys, alpha, lambda, n_out, n_out)
    }

    /// `Z̃` grows and is only needed up to `z_last`; the Weyl solutions
    /// decay and go up to `x_last`.
    fn build(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, z_last: usize, x_last: usize) -> Result<Self> {
        let fwd = propagate::fundamental(sys, alpha, lambda, z_last)?;
        let fwd_bar = propagate::fundamental(sys, alpha, lambda.conj(), z_last)?;
        let (x, m) = weyl::weyl_solution_stable(sys, alpha, lambda, x_last, KERNEL_TOL)?;
        let (x_bar, m_bar) = if lambda.im == 0.0 {
            (x.clone(), m.clone())
        } else {
            weyl::weyl_solution_stable(sys, alpha, lambda.conj(), x_last, KERNEL_TOL)?
        };
        Ok(Self { lambda, m, m_bar, ztilde: fwd.ztilde, ztilde_bar: fwd_bar.ztilde, x: x.values, x_bar: x_bar.values })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `G_kj = Z̃_k(λ) X_j*(λ̄)` for `k ≤ j`, `X_k(λ) Z̃_j*(λ̄)` for `k > j`.
    pub fn entry(&self, k: usize, j: usize) -> Result<CMat> {
        let z_len = self.ztilde.len();
        if k.max(j) >= self.len() || k.min(j) >= z_len {
            return Err(Error::BadInput(format!("kernel cached on [0, {}), asked for ({k}, {j})", z_len.min(self.len()))));
        }
        Ok(if k <= j { &self.ztilde[k] * self.x_bar[j].adjoint() } else { &self.x[k] * self.ztilde_bar[j].adjoint() })
    }

    pub fn weyl_solution(&self) -> &[CMat] {
        &self.x
    }
}

/// Single kernel entry `G_kj(λ)`.
pub fn green(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, k: usize, j: usize) -> Result<CMat> {
    GreenKernel::new(sys, alpha, lambda, k.max(j))?.entry(k, j)
}

/// `ẑ_k = X_k(λ)ξ + Σ_j G_kj(λ) Ψ_j f_j` on `[0, n_out]`. The sum over `j`
/// is exact over the support of `f`.
pub fn resolve(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: Complex64,
    f: &WeightedSequence,
    xi: &CMat,
    n_out: usize,
) -> Result<WeightedSequence> {
    let n = sys.n();
    let cols = xi.ncols();
    if xi.nrows() != n || (!f.values.is_empty() && (f.rows() != 2 * n || f.cols() != cols)) {
        return Err(Error::ShapeMismatch("f must be 2n x m and xi n x m".into()));
    }
    if f.values.iter().any(|v| !linalg::is_finite(v)) {
        return Err(Error::BadInput("f has non-finite entries".into()));
    }
    let len = n_out.max(f.end()) + 1;
    let kernel = GreenKernel::build(sys, alpha, lambda, f.end().min(len - 1), len - 1)?;

    let mut psi_f = vec![None; len];
    for (k, fk) in (f.start..).zip(&f.values) {
        psi_f[k] = Some(sys.psi(k)? * fk);
    }
    // tail[k] = Σ_{j ≥ k} X_j(λ̄)* Ψ_j f_j
    let mut tail = vec![linalg::zeros(n, cols); len + 1];
    for k in (0..len).rev() {
        let mut acc = tail[k + 1].clone();
        if let Some(pf) = &psi_f[k] {
            acc += kernel.x_bar[k].adjoint() * pf;
        }
        tail[k] = acc;
    }
    let mut head = linalg::zeros(n, cols);
    let mut values = Vec::with_capacity(n_out + 1);
    for k in 0..=n_out {
        let mut z = &kernel.x[k] * xi + &kernel.x[k] * &head;
        if k < f.end() {
            z += &kernel.ztilde[k] * &tail[k];
        }
        values.push(z);
        if let Some(pf) = &psi_f[k] {
            head += kernel.ztilde_bar[k].adjoint() * pf;
        }
    }
    Ok(WeightedSequence::new(0, values))
}

/// `max_k ‖ẑ_k − T_k(λ)ẑ_{k+1} + JΨ_k f_k‖` on `[0, n_out − 1]`.
pub fn resolve_defect(sys: &SymplecticSystem, lambda: Complex64, z: &WeightedSequence, f: &WeightedSequence) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in z.start..z.end().saturating_sub(1) {
        let t = propagate::transfer(sys, lambda, k, propagate::Direction::Backward)?;
        let mut r = z.get(k).expect("window") - t * z.get(k + 1).expect("window");
        if let Some(fk) = f.get(k) {
            r += linalg::j_left(&(sys.psi(k)? * fk));
        }
        worst = worst.max(linalg::fro(&r));
    }
    Ok(worst)
}
