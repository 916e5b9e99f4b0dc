//! Transfer-matrix stepping, fundamental solutions, Ψ-seminorms and the
//! extended Lagrange identity.

use std::borrow::Cow;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::system::{BoundaryMatrix, StepCoefficients, SymplecticSystem};

/// Largest coefficient table kept in memory for periodic systems.
const CACHE_LIMIT: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `T_k(λ) = S_k + λV_k`, mapping `z_{k+1}` to `z_k`.
    Backward,
    /// `T_k(λ)⁻¹ = -J (S_k + λ̄V_k)* J`, mapping `z_k` to `z_{k+1}`.
    Forward,
}

/// The inverse transfer matrix split as `T_k(λ)⁻¹ = A_k + λ B_k`.
#[derive(Debug, Clone)]
pub struct ForwardStep {
    pub a: CMat,
    pub b: CMat,
}

impl ForwardStep {
    pub fn from_coefficients(step: &StepCoefficients) -> Self {
        let a = -linalg::j_right(&linalg::j_left(&step.s.adjoint()));
        let b = -linalg::j_right(&linalg::j_left(&step.v().adjoint()));
        Self { a, b }
    }

    pub fn at(&self, lambda: Complex64) -> CMat {
        &self.a + &self.b * lambda
    }

    /// `out = (A + λB) x` without temporaries beyond `out`.
    pub fn apply_into(&self, lambda: Complex64, x: &CMat, out: &mut CMat) {
        out.gemm(linalg::ONE, &self.a, x, linalg::ZERO);
        out.gemm(lambda, &self.b, x, linalg::ONE);
    }
}

/// `T_k(λ)` in either direction.
pub fn transfer(sys: &SymplecticSystem, lambda: Complex64, k: usize, direction: Direction) -> Result<CMat> {
    let step = sys.coefficients(k)?;
    Ok(match direction {
        Direction::Backward => &step.s + step.v() * lambda,
        Direction::Forward => ForwardStep::from_coefficients(&step).at(lambda),
    })
}

/// Forward step matrices with a table for periodic coefficient tails.
#[derive(Debug, Clone)]
pub struct StepSource<'a> {
    sys: &'a SymplecticSystem,
    table: Vec<ForwardStep>,
    offset: usize,
    period: usize,
}

impl<'a> StepSource<'a> {
    pub fn new(sys: &'a SymplecticSystem) -> Result<Self> {
        let mut table = Vec::new();
        let (mut offset, mut period) = (0, 0);
        if let Some((o, p)) = sys.periodicity() {
            if o + p <= CACHE_LIMIT {
                for k in 0..o + p {
                    table.push(ForwardStep::from_coefficients(&sys.coefficients(k)?));
                }
                offset = o;
                period = p;
            }
        }
        Ok(Self { sys, table, offset, period })
    }

    pub fn system(&self) -> &SymplecticSystem {
        self.sys
    }

    pub fn step(&self, k: usize) -> Result<Cow<'_, ForwardStep>> {
        if self.period == 0 {
            return Ok(Cow::Owned(ForwardStep::from_coefficients(&self.sys.coefficients(k)?)));
        }
        let idx = if k < self.offset + self.period { k } else { self.offset + (k - self.offset) % self.period };
        Ok(Cow::Borrowed(&self.table[idx]))
    }
}

/// The pair `Ẑ(λ)`, `Z̃(λ)` on `k ∈ [0, N]`.
#[derive(Debug, Clone)]
pub struct FundamentalSolution {
    pub lambda: Complex64,
    pub alpha: BoundaryMatrix,
    pub zhat: Vec<CMat>,
    pub ztilde: Vec<CMat>,
    pub n_steps: usize,
}

impl FundamentalSolution {
    /// `Φ_k = (Ẑ_k, Z̃_k)`.
    pub fn phi(&self, k: usize) -> CMat {
        let (dim, n) = self.zhat[k].shape();
        let mut out = linalg::zeros(dim, 2 * n);
        out.columns_mut(0, n).copy_from(&self.zhat[k]);
        out.columns_mut(n, n).copy_from(&self.ztilde[k]);
        out
    }

    pub fn zhat_sequence(&self) -> WeightedSequence {
        WeightedSequence::new(0, self.zhat.clone())
    }

    pub fn ztilde_sequence(&self) -> WeightedSequence {
        WeightedSequence::new(0, self.ztilde.clone())
    }
}

/// `Φ_0 = (α*, -Jα*)`.
pub fn initial_phi(alpha: &BoundaryMatrix) -> CMat {
    let a_star = alpha.matrix().adjoint();
    let n = alpha.n();
    let mut phi = linalg::zeros(2 * n, 2 * n);
    phi.columns_mut(0, n).copy_from(&a_star);
    phi.columns_mut(n, n).copy_from(&(-linalg::j_left(&a_star)));
    phi
}

/// Propagates `Ẑ`, `Z̃` forward from `Ẑ_0 = α*`, `Z̃_0 = -Jα*`. Growing
/// columns are not rescaled; a non-finite entry raises `Overflow`.
pub fn fundamental(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, n_steps: usize) -> Result<FundamentalSolution> {
    if alpha.n() != sys.n() {
        return Err(Error::ShapeMismatch(format!("boundary matrix has n = {}, system has n = {}", alpha.n(), sys.n())));
    }
    let n = sys.n();
    let source = StepSource::new(sys)?;
    let mut phi = initial_phi(alpha);
    let mut next = phi.clone();
    let mut zhat = Vec::with_capacity(n_steps + 1);
    let mut ztilde = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        zhat.push(phi.columns(0, n).into_owned());
        ztilde.push(phi.columns(n, n).into_owned());
        if k == n_steps {
            break;
        }
        source.step(k)?.apply_into(lambda, &phi, &mut next);
        std::mem::swap(&mut phi, &mut next);
        if !linalg::is_finite(&phi) {
            return Err(Error::Overflow { index: k + 1 });
        }
    }
    Ok(FundamentalSolution { lambda, alpha: alpha.clone(), zhat, ztilde, n_steps })
}

/// Largest `‖Φ_k*(λ̄) J Φ_k(λ) − J‖` over `k ≤ n_steps`, each divided by
/// `max(1, √k)`.
pub fn wronskian_residual(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, n_steps: usize) -> Result<f64> {
    let f = fundamental(sys, alpha, lambda, n_steps)?;
    let g = fundamental(sys, alpha, lambda.conj(), n_steps)?;
    let j = linalg::j_matrix(sys.n());
    let mut worst: f64 = 0.0;
    for k in 0..=n_steps {
        let w = g.phi(k).adjoint() * linalg::j_left(&f.phi(k));
        let scale = (k as f64).sqrt().max(1.0);
        worst = worst.max(linalg::fro(&(w - &j)) / scale);
    }
    Ok(worst)
}

/// Matrix-valued sequence on the window `[start, start + len)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSequence {
    pub start: usize,
    pub values: Vec<CMat>,
}

impl WeightedSequence {
    pub fn new(start: usize, values: Vec<CMat>) -> Self {
        Self { start, values }
    }

    pub fn zeros(start: usize, len: usize, rows: usize, cols: usize) -> Self {
        Self::new(start, vec![linalg::zeros(rows, cols); len])
    }

    pub fn end(&self) -> usize {
        self.start + self.values.len()
    }

    pub fn get(&self, k: usize) -> Option<&CMat> {
        k.checked_sub(self.start).and_then(|i| self.values.get(i))
    }

    pub fn cols(&self) -> usize {
        self.values.first().map_or(0, |v| v.ncols())
    }

    pub fn rows(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }

    /// Value at `k`, zero outside the window.
    pub fn value_or_zero(&self, k: usize) -> CMat {
        self.get(k).cloned().unwrap_or_else(|| linalg::zeros(self.rows(), self.cols()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seminorm {
    pub gram: CMat,
    /// `√tr(Gram)`
    pub norm: f64,
}

/// `Σ_{k=k1}^{k2} z_k* Ψ_k z_k`.
pub fn seminorm(sys: &SymplecticSystem, z: &WeightedSequence, window: (usize, usize)) -> Result<Seminorm> {
    let (k1, k2) = window;
    if k1 < z.start || k2 >= z.end() || k1 > k2 {
        return Err(Error::BadInput(format!("window [{k1}, {k2}] outside sequence domain [{}, {})", z.start, z.end())));
    }
    let m = z.cols();
    let mut gram = linalg::zeros(m, m);
    for k in k1..=k2 {
        let zk = z.get(k).expect("checked window");
        gram += zk.adjoint() * sys.psi(k)? * zk;
    }
    let gram = linalg::re_part(&gram);
    let norm = linalg::trace(&gram).re.max(0.0).sqrt();
    Ok(Seminorm { gram, norm })
}

/// Cross Gram matrix `Σ z_k* Ψ_k u_k` on `[k1, k2]`.
pub fn inner(sys: &SymplecticSystem, z: &WeightedSequence, u: &WeightedSequence, window: (usize, usize)) -> Result<CMat> {
    let (k1, k2) = window;
    let mut acc = linalg::zeros(z.cols(), u.cols());
    for k in k1..=k2 {
        let (Some(zk), Some(uk)) = (z.get(k), u.get(k)) else {
            return Err(Error::BadInput(format!("index {k} outside sequence domain")));
        };
        acc += zk.adjoint() * sys.psi(k)? * uk;
    }
    Ok(acc)
}

/// Defect of the extended Lagrange identity on `[s, t]`:
///
/// `z_k*Ju_k |_{s}^{t+1} − Σ_{k=s}^{t} [(λ̄ − ν) z_k*Ψ_k u_k + f_k*Ψ_k u_k − z_k*Ψ_k g_k]`
///
/// where `z` solves `z_k = T_k(λ) z_{k+1} − JΨ_k f_k` and `u` the same
/// system at `ν` with inhomogeneity `g`. `f`, `g` are zero outside their
/// windows.
#[allow(clippy::too_many_arguments)]
pub fn lagrange_defect(
    sys: &SymplecticSystem,
    lambda: Complex64,
    nu: Complex64,
    z: &WeightedSequence,
    u: &WeightedSequence,
    f: &WeightedSequence,
    g: &WeightedSequence,
    window: (usize, usize),
) -> Result<CMat> {
    let (s, t) = window;
    let shape_err = |what: &str| Error::ShapeMismatch(format!("{what} does not cover the window [{s}, {}]", t + 1));
    let (zs, zt) = (z.get(s).ok_or_else(|| shape_err("z"))?, z.get(t + 1).ok_or_else(|| shape_err("z"))?);
    let (us, ut) = (u.get(s).ok_or_else(|| shape_err("u"))?, u.get(t + 1).ok_or_else(|| shape_err("u"))?);
    if zs.nrows() != sys.dim() || us.nrows() != sys.dim() {
        return Err(Error::ShapeMismatch("solution rows must equal 2n".into()));
    }
    let mut defect = zt.adjoint() * linalg::j_left(ut) - zs.adjoint() * linalg::j_left(us);
    let coef = lambda.conj() - nu;
    for k in s..=t {
        let psi = sys.psi(k)?;
        let zk = z.get(k).ok_or_else(|| shape_err("z"))?;
        let uk = u.get(k).ok_or_else(|| shape_err("u"))?;
        let psi_u = &psi * uk;
        defect -= zk.adjoint() * &psi_u * coef;
        if let Some(fk) = f.get(k) {
            defect -= fk.adjoint() * &psi_u;
        }
        if let Some(gk) = g.get(k) {
            defect += zk.adjoint() * &psi * gk;
        }
    }
    Ok(defect)
}

/// Solves `z_k = T_k(λ) z_{k+1} − JΨ_k f_k` forward from `z_0` on `[0, n_steps]`.
pub fn solve_forward(
    sys: &SymplecticSystem,
    lambda: Complex64,
    z0: &CMat,
    f: &WeightedSequence,
    n_steps: usize,
) -> Result<WeightedSequence> {
    let source = StepSource::new(sys)?;
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(z0.clone());
    for k in 0..n_steps {
        let mut rhs = values[k].clone();
        if let Some(fk) = f.get(k) {
            rhs += linalg::j_left(&(sys.psi(k)? * fk));
        }
        let next = source.step(k)?.at(lambda) * rhs;
        if !linalg::is_finite(&next) {
            return Err(Error::Overflow { index: k + 1 });
        }
        values.push(next);
    }
    Ok(WeightedSequence::new(0, values))
}
