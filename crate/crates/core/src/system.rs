//! Coefficient data of a time-reversed discrete symplectic system
//! `z_k = (S_k + λ V_k) z_{k+1}` and of its boundary matrices.
//!
//! A system is described by the pair `(S_k, Ψ_k)`; the companion
//! coefficient is always derived as `V_k = -J Ψ_k S_k`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};

/// Default tolerance band for the structural identities.
pub const DEFAULT_TOL: f64 = 1e-10;

const MAX_PERIOD: usize = 4096;

/// What happens past the end of a tabulated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TailRule {
    RepeatLast,
    Error,
}

/// Values that can be combined affinely in `k`.
pub trait SeqValue: Clone + fmt::Debug + Send + Sync {
    fn affine(offset: &Self, slope: &Self, k: f64) -> Self;
    fn is_zero(&self) -> bool;
}

impl SeqValue for f64 {
    fn affine(offset: &Self, slope: &Self, k: f64) -> Self {
        offset + slope * k
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl SeqValue for CMat {
    fn affine(offset: &Self, slope: &Self, k: f64) -> Self {
        offset + slope * c(k, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

/// A sequence indexed by `k ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Seq<T> {
    Const(T),
    /// `offset + slope * k`
    Affine {
        offset: T,
        slope: T,
    },
    Periodic(Vec<T>),
    Table {
        values: Vec<T>,
        tail: TailRule,
    },
}

pub type Sequence = Seq<f64>;
pub type MatrixSequence = Seq<CMat>;

impl<T: SeqValue> Seq<T> {
    pub fn at(&self, k: usize) -> Option<T> {
        match self {
            Seq::Const(v) => Some(v.clone()),
            Seq::Affine { offset, slope } => Some(T::affine(offset, slope, k as f64)),
            Seq::Periodic(values) => values.get(k % values.len().max(1)).cloned(),
            Seq::Table { values, tail } => match values.get(k) {
                Some(v) => Some(v.clone()),
                None if *tail == TailRule::RepeatLast => values.last().cloned(),
                None => None,
            },
        }
    }

    /// `(offset, period)` such that the value at `k ≥ offset` only depends
    /// on `(k - offset) mod period`.
    pub fn periodicity(&self) -> Option<(usize, usize)> {
        match self {
            Seq::Const(_) => Some((0, 1)),
            Seq::Affine { slope, .. } if slope.is_zero() => Some((0, 1)),
            Seq::Affine { .. } => None,
            Seq::Periodic(values) if !values.is_empty() => Some((0, values.len())),
            Seq::Periodic(_) => None,
            Seq::Table { values, tail: TailRule::RepeatLast } => Some((values.len().saturating_sub(1), 1)),
            Seq::Table { .. } => None,
        }
    }
}

/// Combines two periodicity descriptors; `None` if either is aperiodic.
pub fn combine_periodicity(a: Option<(usize, usize)>, b: Option<(usize, usize)>) -> Option<(usize, usize)> {
    let (oa, pa) = a?;
    let (ob, pb) = b?;
    let period = lcm(pa, pb);
    (period <= MAX_PERIOD).then_some((oa.max(ob), period))
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b).max(1) * b
}

/// The pair `(S_k, Ψ_k)` at a single index.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoefficients {
    pub s: CMat,
    pub psi: CMat,
}

impl StepCoefficients {
    /// `V_k = -J Ψ_k S_k`
    pub fn v(&self) -> CMat {
        -linalg::j_left(&(&self.psi * &self.s))
    }
}

/// Pure map `k ↦ (S_k, Ψ_k)`. Implementations must be safe to call from
/// several threads at once.
pub trait CoefficientProvider: Send + Sync + fmt::Debug {
    fn half_dim(&self) -> usize;

    fn coefficients(&self, k: usize) -> Result<StepCoefficients>;

    /// `(offset, period)` when the coefficients repeat from `offset` on.
    fn periodicity(&self) -> Option<(usize, usize)> {
        None
    }
}

/// Coefficients given directly as matrix sequences.
#[derive(Debug, Clone)]
pub struct MatrixCoefficients {
    pub n: usize,
    pub s: MatrixSequence,
    pub psi: MatrixSequence,
}

impl CoefficientProvider for MatrixCoefficients {
    fn half_dim(&self) -> usize {
        self.n
    }

    fn coefficients(&self, k: usize) -> Result<StepCoefficients> {
        let s = self.s.at(k).ok_or_else(|| Error::Provider { k, reason: "S table exhausted".into() })?;
        let psi = self.psi.at(k).ok_or_else(|| Error::Provider { k, reason: "Psi table exhausted".into() })?;
        let dim = 2 * self.n;
        if s.shape() != (dim, dim) || psi.shape() != (dim, dim) {
            return Err(Error::Provider { k, reason: format!("expected {dim}x{dim} coefficient matrices") });
        }
        Ok(StepCoefficients { s, psi })
    }

    fn periodicity(&self) -> Option<(usize, usize)> {
        combine_periodicity(self.s.periodicity(), self.psi.periodicity())
    }
}

/// A discrete symplectic system on the half-line.
#[derive(Clone)]
pub struct SymplecticSystem {
    n: usize,
    provider: Arc<dyn CoefficientProvider>,
    pub label: String,
}

impl fmt::Debug for SymplecticSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymplecticSystem").field("n", &self.n).field("label", &self.label).finish()
    }
}

impl SymplecticSystem {
    pub fn new(provider: Arc<dyn CoefficientProvider>, label: impl Into<String>) -> Self {
        Self { n: provider.half_dim(), provider, label: label.into() }
    }

    pub fn from_matrices(n: usize, s: MatrixSequence, psi: MatrixSequence, label: &str) -> Self {
        Self::new(Arc::new(MatrixCoefficients { n, s, psi }), label)
    }

    /// Half dimension `n`; coefficients are `2n × 2n`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n
    }

    pub fn coefficients(&self, k: usize) -> Result<StepCoefficients> {
        self.provider.coefficients(k)
    }

    pub fn psi(&self, k: usize) -> Result<CMat> {
        Ok(self.provider.coefficients(k)?.psi)
    }

    pub fn periodicity(&self) -> Option<(usize, usize)> {
        self.provider.periodicity()
    }

    pub fn provider(&self) -> &Arc<dyn CoefficientProvider> {
        &self.provider
    }
}

/// An element of `Γ = {α ∈ C^{n×2n} : αα* = I, αJα* = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMatrix {
    mat: CMat,
}

impl BoundaryMatrix {
    /// Validates membership in `Γ`; near-misses are rejected, never repaired.
    pub fn new(mat: CMat, tol: f64) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != 2 * n {
            return Err(Error::ShapeMismatch(format!("boundary matrix must be n x 2n, got {}x{}", mat.nrows(), mat.ncols())));
        }
        let (unit, iso) = Self::residuals_of(&mat);
        if unit > tol || iso > tol {
            return Err(Error::Structure(format!("alpha: not in Gamma (|aa*-I| = {unit:.3e}, |aJa*| = {iso:.3e})")));
        }
        Ok(Self { mat })
    }

    /// `α = (sin α₀, cos α₀)` for the scalar case.
    pub fn from_angle(angle: f64) -> Self {
        Self { mat: CMat::from_row_slice(1, 2, &[c(angle.sin(), 0.0), c(angle.cos(), 0.0)]) }
    }

    /// `α = (I, 0)`, which imposes `x₀ = 0` on the first half of the state.
    pub fn dirichlet(n: usize) -> Self {
        let mut mat = linalg::zeros(n, 2 * n);
        for i in 0..n {
            mat[(i, i)] = linalg::ONE;
        }
        Self { mat }
    }

    /// Block-diagonal combination matching [`crate::models::direct_sum`].
    pub fn direct_sum(parts: &[BoundaryMatrix]) -> Self {
        let n: usize = parts.iter().map(|p| p.n()).sum();
        let mut mat = linalg::zeros(n, 2 * n);
        let mut off = 0;
        for p in parts {
            let m = p.n();
            for i in 0..m {
                for j in 0..m {
                    mat[(off + i, off + j)] = p.mat[(i, j)];
                    mat[(off + i, n + off + j)] = p.mat[(i, m + j)];
                }
            }
            off += m;
        }
        Self { mat }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Returns `(‖αα* − I‖, ‖αJα*‖)`.
    pub fn residuals(&self) -> (f64, f64) {
        Self::residuals_of(&self.mat)
    }

    fn residuals_of(mat: &CMat) -> (f64, f64) {
        let n = mat.nrows();
        let unit = linalg::fro(&(mat * mat.adjoint() - linalg::identity(n)));
        let iso = linalg::fro(&(linalg::j_right(mat) * mat.adjoint()));
        (unit, iso)
    }

    /// `αJ`, the complementary element of `Γ`.
    pub fn complement(&self) -> Self {
        Self { mat: linalg::j_right(&self.mat) }
    }

    /// `cos(Θ) α + sin(Θ) αJ` for a Hermitian generator given through its
    /// eigen-decomposition `Θ = U diag(θ) U*`; the result stays in `Γ`.
    pub fn rotated(&self, unitary: &CMat, angles: &[f64]) -> Self {
        let n = self.n();
        let cos = CMat::from_fn(n, n, |i, j| if i == j { c(angles[i].cos(), 0.0) } else { linalg::ZERO });
        let sin = CMat::from_fn(n, n, |i, j| if i == j { c(angles[i].sin(), 0.0) } else { linalg::ZERO });
        let cu = unitary * cos * unitary.adjoint();
        let su = unitary * sin * unitary.adjoint();
        Self { mat: &cu * &self.mat + &su * linalg::j_right(&self.mat) }
    }

    /// The angle `α₀ ∈ [0, 2π)` for a real scalar boundary row.
    pub fn angle(&self) -> Option<f64> {
        if self.n() != 1 {
            return None;
        }
        let (s, co) = (self.mat[(0, 0)], self.mat[(0, 1)]);
        // a common unimodular phase is allowed
        let phase = if s.norm() >= co.norm() { s / s.norm() } else { co / co.norm() };
        let (s, co) = (s / phase, co / phase);
        if s.im.abs() > 1e-12 || co.im.abs() > 1e-12 {
            return None;
        }
        Some(s.re.atan2(co.re).rem_euclid(std::f64::consts::TAU))
    }
}

/// Outcome of one structural identity over an index window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub worst_residual: f64,
    pub first_offending_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub k_max: usize,
    pub tol: f64,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }
}

pub const CHECK_SYMPLECTIC: &str = "S symplectic";
pub const CHECK_HERMITIAN: &str = "psi hermitian";
pub const CHECK_PSD: &str = "psi psd";
pub const CHECK_ISOTROPIC: &str = "psi isotropic";
pub const CHECK_ROUNDTRIP: &str = "psi-v roundtrip";

struct Tracker {
    name: &'static str,
    worst: f64,
    first_bad: Option<usize>,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self { name, worst: 0.0, first_bad: None }
    }

    fn record(&mut self, k: usize, residual: f64, bound: f64) {
        let residual = if residual.is_nan() { f64::INFINITY } else { residual };
        self.worst = self.worst.max(residual);
        if residual > bound && self.first_bad.is_none() {
            self.first_bad = Some(k);
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult { name: self.name, passed: self.first_bad.is_none(), worst_residual: self.worst, first_offending_index: self.first_bad }
    }
}

/// Checks `S*JS = J`, `Ψ = Ψ* ≥ 0`, `ΨJΨ = 0` and the `Ψ ↔ V` roundtrip on
/// `k ∈ [0, k_max]`. Each residual is compared with `tol · max(1, ‖coeff‖)`.
pub fn validate_system(sys: &SymplecticSystem, k_max: usize, tol: f64) -> Result<ValidationReport> {
    if k_max < 1 || !(tol > 0.0) {
        return Err(Error::BadInput("validate_system needs k_max >= 1 and tol > 0".into()));
    }
    let n = sys.n();
    let j = linalg::j_matrix(n);
    let mut symp = Tracker::new(CHECK_SYMPLECTIC);
    let mut herm = Tracker::new(CHECK_HERMITIAN);
    let mut psd = Tracker::new(CHECK_PSD);
    let mut iso = Tracker::new(CHECK_ISOTROPIC);
    let mut round = Tracker::new(CHECK_ROUNDTRIP);
    for k in 0..=k_max {
        let step = sys.coefficients(k)?;
        let s_scale = linalg::fro(&step.s).max(1.0);
        let p_scale = linalg::fro(&step.psi).max(1.0);
        symp.record(k, linalg::fro(&(step.s.adjoint() * &j * &step.s - &j)), tol * s_scale * s_scale);
        herm.record(k, linalg::fro(&(&step.psi - step.psi.adjoint())), tol * p_scale);
        psd.record(k, (-linalg::min_eig(&step.psi)).max(0.0), tol * p_scale);
        iso.record(k, linalg::fro(&(&step.psi * &j * &step.psi)), tol * p_scale * p_scale);
        let back = psi_from_v(&step.s, &step.v());
        round.record(k, linalg::fro(&(back - &step.psi)), tol * p_scale * s_scale * s_scale);
    }
    let checks: Vec<CheckResult> = [symp, herm, psd, iso, round].into_iter().map(Tracker::finish).collect();
    let pass = checks.iter().all(|c| c.passed);
    Ok(ValidationReport { k_max, tol, checks, pass })
}

/// Conversion direction for [`psi_v_convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conversion {
    PsiToV,
    VToPsi,
}

/// `V = -JΨS` or `Ψ = JSJV*J`, after checking that `S` is symplectic.
pub fn psi_v_convert(s: &CMat, x: &CMat, direction: Conversion, tol: f64) -> Result<CMat> {
    let dim = s.nrows();
    if !dim.is_multiple_of(2) || s.ncols() != dim || x.shape() != (dim, dim) {
        return Err(Error::ShapeMismatch("psi_v_convert expects square 2n x 2n inputs".into()));
    }
    let j = linalg::j_matrix(dim / 2);
    let scale = linalg::fro(s).max(1.0);
    let res = linalg::fro(&(s.adjoint() * &j * s - &j));
    if res > tol * scale * scale {
        return Err(Error::Structure(format!("S is not symplectic (residual {res:.3e})")));
    }
    Ok(match direction {
        Conversion::PsiToV => -linalg::j_left(&(x * s)),
        Conversion::VToPsi => psi_from_v(s, x),
    })
}

fn psi_from_v(s: &CMat, v: &CMat) -> CMat {
    // J S J V* J
    linalg::j_right(&(linalg::j_right(&linalg::j_left(s)) * v.adjoint()))
}

/// Result of the strong Atkinson check.
#[derive(Debug, Clone, PartialEq)]
pub struct AtkinsonReport {
    pub holds: bool,
    pub window: usize,
    pub gram: CMat,
    pub min_eigenvalue: f64,
}

/// The strong Atkinson condition on `[0, n0]`, tested through positive
/// definiteness of `Σ Φ_k*(λ̄) Ψ_k Φ_k(λ)` at the probe `λ = 0`, where `Φ` is
/// the fundamental matrix with `Φ_0 = I`.
pub fn check_atkinson(sys: &SymplecticSystem, n0: usize, tol: f64) -> Result<AtkinsonReport> {
    let dim = sys.dim();
    let lambda = linalg::ZERO;
    let mut phi = linalg::identity(dim);
    let mut gram = linalg::zeros(dim, dim);
    for k in 0..=n0 {
        let psi = sys.psi(k)?;
        gram += phi.adjoint() * &psi * &phi;
        if k < n0 {
            let step = crate::propagate::transfer(sys, lambda, k, crate::propagate::Direction::Forward)?;
            phi = step * phi;
            if !linalg::is_finite(&phi) {
                return Err(Error::Overflow { index: k + 1 });
            }
        }
    }
    let min_eigenvalue = linalg::min_eig(&gram);
    Ok(AtkinsonReport { holds: min_eigenvalue > tol, window: n0, gram, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_real_rows;

    fn constant(n: usize, s: CMat, psi: CMat) -> SymplecticSystem {
        SymplecticSystem::from_matrices(n, Seq::Const(s), Seq::Const(psi), "test")
    }

    #[test]
    fn identity_system_with_zero_weight_passes() {
        let sys = constant(1, linalg::identity(2), linalg::zeros(2, 2));
        let report = validate_system(&sys, 10, DEFAULT_TOL).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn negative_weight_fails_psd_at_index_zero() {
        let s = linalg::identity(2);
        let psi = from_real_rows(&[&[0.0, 0.0], &[0.0, -1.0]]);
        let sys = constant(1, s, psi);
        let report = validate_system(&sys, 5, DEFAULT_TOL).unwrap();
        assert!(!report.pass);
        let psd = report.check(CHECK_PSD).unwrap();
        assert!(!psd.passed);
        assert_eq!(psd.first_offending_index, Some(0));
    }

    #[test]
    fn free_jacobi_conversion() {
        let s = from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let psi = linalg::diag_real(&[0.0, 1.0]);
        let v = psi_v_convert(&s, &psi, Conversion::PsiToV, DEFAULT_TOL).unwrap();
        assert!(linalg::fro(&(v.clone() - from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]))) < 1e-15);
        let back = psi_v_convert(&s, &v, Conversion::VToPsi, DEFAULT_TOL).unwrap();
        assert!(linalg::fro(&(back - psi)) < 1e-15);
        let zero = psi_v_convert(&s, &linalg::zeros(2, 2), Conversion::PsiToV, DEFAULT_TOL).unwrap();
        assert_eq!(linalg::fro(&zero), 0.0);
    }

    #[test]
    fn conversion_rejects_non_symplectic() {
        let s = linalg::diag_real(&[2.0, 2.0]);
        let err = psi_v_convert(&s, &linalg::zeros(2, 2), Conversion::PsiToV, DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn table_tail_rules() {
        let seq = Seq::Table { values: vec![1.0, 2.0], tail: TailRule::RepeatLast };
        assert_eq!(seq.at(5), Some(2.0));
        assert_eq!(seq.periodicity(), Some((1, 1)));
        let strict = Seq::Table { values: vec![1.0, 2.0], tail: TailRule::Error };
        assert_eq!(strict.at(2), None);
        let aff = Seq::Affine { offset: 1.0, slope: 0.5 };
        assert_eq!(aff.at(4), Some(3.0));
        assert_eq!(aff.periodicity(), None);
        let per = Seq::Periodic(vec![1.0, 2.0, 3.0]);
        assert_eq!(per.at(4), Some(2.0));
        assert_eq!(combine_periodicity(per.periodicity(), Some((2, 2))), Some((2, 6)));
    }

    #[test]
    fn exhausted_table_is_a_provider_error() {
        let sys = SymplecticSystem::from_matrices(
            1,
            Seq::Table { values: vec![linalg::identity(2)], tail: TailRule::Error },
            Seq::Const(linalg::zeros(2, 2)),
            "short",
        );
        let err = validate_system(&sys, 3, DEFAULT_TOL).unwrap_err();
        assert!(matches!(err, Error::Provider { k: 1, .. }));
    }

    #[test]
    fn boundary_matrices() {
        let a = BoundaryMatrix::from_angle(std::f64::consts::FRAC_PI_2);
        let (u, i) = a.residuals();
        assert!(u < 1e-15 && i < 1e-15);
        assert!((a.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!(a.matrix()[(0, 1)].norm() < 1e-15);
        assert!((a.angle().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let bad = BoundaryMatrix::new(from_real_rows(&[&[2.0, 0.0]]), 1e-10);
        assert!(matches!(bad, Err(Error::Structure(msg)) if msg.starts_with("alpha: not in Gamma")));
        let comp = a.complement();
        assert!(comp.residuals().0 < 1e-15 && comp.residuals().1 < 1e-15);
        let sum = BoundaryMatrix::direct_sum(&[a.clone(), BoundaryMatrix::from_angle(0.3)]);
        let (u, i) = sum.residuals();
        assert!(u < 1e-14 && i < 1e-14);
    }

    #[test]
    fn atkinson_fails_for_zero_weight() {
        let sys = constant(1, linalg::identity(2), linalg::zeros(2, 2));
        let rep = check_atkinson(&sys, 5, 1e-10).unwrap();
        assert!(!rep.holds);
        assert_eq!(rep.min_eigenvalue, 0.0);
    }
}
