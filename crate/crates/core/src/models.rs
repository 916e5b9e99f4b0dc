//! Model builders: Jacobi operators in symplectic form, block direct sums,
//! seeded random systems and the canned test models.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::herglotz::HerglotzModel;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::system::{combine_periodicity, CoefficientProvider, Seq, Sequence, StepCoefficients, SymplecticSystem};

/// Indices checked eagerly when a Jacobi model is built; later indices are
/// checked when the provider is queried.
pub const JACOBI_SAMPLE: usize = 1024;

/// Three-term recurrence `a_{k+1}y_{k+2} + b_{k+1}y_{k+1} + a_k y_k = λ w_{k+1} y_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiModel {
    pub a: Sequence,
    pub b: Sequence,
    pub w: Sequence,
}

impl JacobiModel {
    pub fn new(a: Sequence, b: Sequence, w: Sequence) -> Self {
        Self { a, b, w }
    }

    pub fn a(&self, k: usize) -> Result<f64> {
        let v = self.a.at(k).ok_or_else(|| exhausted(k, "a"))?;
        if v == 0.0 || !v.is_finite() {
            return Err(Error::BadModel { k, reason: format!("a_{k} = {v} must be nonzero") });
        }
        Ok(v)
    }

    pub fn b(&self, k: usize) -> Result<f64> {
        let v = self.b.at(k).ok_or_else(|| exhausted(k, "b"))?;
        if !v.is_finite() {
            return Err(Error::BadModel { k, reason: format!("b_{k} is not finite") });
        }
        Ok(v)
    }

    pub fn w(&self, k: usize) -> Result<f64> {
        let v = self.w.at(k).ok_or_else(|| exhausted(k, "w"))?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::BadModel { k, reason: format!("w_{k} = {v} must be positive") });
        }
        Ok(v)
    }

    /// Checks `a_k ≠ 0`, `w_k > 0` on the first `count` indices. Finite
    /// tables are checked over their full length.
    pub fn check(&self, count: usize) -> Result<()> {
        for k in 0..count {
            if self.a.at(k).is_none() && self.b.at(k).is_none() && self.w.at(k).is_none() {
                break;
            }
            if self.a.at(k).is_some() {
                self.a(k)?;
            }
            if self.b.at(k).is_some() {
                self.b(k)?;
            }
            if self.w.at(k).is_some() {
                self.w(k)?;
            }
        }
        Ok(())
    }
}

fn exhausted(k: usize, name: &str) -> Error {
    Error::Provider { k, reason: format!("sequence {name} exhausted") }
}

/// State `z_k = (y_k, -a_k y_{k+1})`.
#[derive(Debug, Clone)]
pub struct JacobiProvider {
    pub model: JacobiModel,
}

impl CoefficientProvider for JacobiProvider {
    fn half_dim(&self) -> usize {
        1
    }

    fn coefficients(&self, k: usize) -> Result<StepCoefficients> {
        let to_provider = |e: Error| match e {
            Error::BadModel { k, reason } => Error::Provider { k, reason },
            other => other,
        };
        let a = self.model.a(k).map_err(to_provider)?;
        let b = self.model.b(k + 1).map_err(to_provider)?;
        let w = self.model.w(k + 1).map_err(to_provider)?;
        let s = CMat::from_row_slice(2, 2, &[c(-b / a, 0.0), c(1.0 / a, 0.0), c(-a, 0.0), linalg::ZERO]);
        let psi = linalg::diag_real(&[0.0, w / (a * a)]);
        Ok(StepCoefficients { s, psi })
    }

    fn periodicity(&self) -> Option<(usize, usize)> {
        let ab = combine_periodicity(self.model.a.periodicity(), self.model.b.periodicity());
        combine_periodicity(ab, self.model.w.periodicity())
    }
}

pub fn jacobi_to_symplectic(model: &JacobiModel) -> Result<SymplecticSystem> {
    model.check(JACOBI_SAMPLE + 2)?;
    Ok(SymplecticSystem::new(Arc::new(JacobiProvider { model: model.clone() }), "jacobi"))
}

pub fn free_jacobi_model() -> JacobiModel {
    JacobiModel::new(Seq::Const(1.0), Seq::Const(0.0), Seq::Const(1.0))
}

/// `a ≡ 1`, `b_k = c·k`, `w ≡ 1`.
pub fn oscillator_model(slope: f64) -> JacobiModel {
    JacobiModel::new(Seq::Const(1.0), Seq::Affine { offset: 0.0, slope }, Seq::Const(1.0))
}

pub fn free_jacobi() -> SymplecticSystem {
    let mut sys = jacobi_to_symplectic(&free_jacobi_model()).expect("free model is valid");
    sys.label = "free_jacobi".into();
    sys
}

pub fn oscillator(slope: f64) -> SymplecticSystem {
    let mut sys = jacobi_to_symplectic(&oscillator_model(slope)).expect("oscillator model is valid");
    sys.label = format!("oscillator({slope})");
    sys
}

/// Exact synthetic M-function `c/(t₀ − λ) − c t₀/(1 + t₀²)`.
pub fn one_jump_synthetic(size: f64, at: f64) -> Result<HerglotzModel> {
    HerglotzModel::scalar(&[(at, size)], 0.0, 0.0)
}

#[derive(Debug, Clone)]
pub enum Builtin {
    System(SymplecticSystem),
    MFunction(HerglotzModel),
}

/// `free_jacobi`, `oscillator` (parameter `c`, default 1) or
/// `one_jump_synthetic` (parameters `c`, `t0`).
pub fn builtin(name: &str, params: &[f64]) -> Result<Builtin> {
    match name {
        "free_jacobi" => Ok(Builtin::System(free_jacobi())),
        "oscillator" => Ok(Builtin::System(oscillator(params.first().copied().unwrap_or(1.0)))),
        "one_jump_synthetic" => {
            let size = params.first().copied().unwrap_or(1.0);
            let at = params.get(1).copied().unwrap_or(0.0);
            Ok(Builtin::MFunction(one_jump_synthetic(size, at)?))
        }
        other => Err(Error::UnknownModel(other.to_string())),
    }
}

/// Block-diagonal direct sum, state ordered as `(x₁, x₂, …, u₁, u₂, …)`.
#[derive(Debug, Clone)]
pub struct DirectSum {
    parts: Vec<SymplecticSystem>,
}

/// Embeds the blocks `m_i` (each `2n_i × 2n_i`) into the interleaved layout.
pub fn embed_blocks(blocks: &[CMat]) -> CMat {
    let sizes: Vec<usize> = blocks.iter().map(|b| b.nrows() / 2).collect();
    let n: usize = sizes.iter().sum();
    let mut out = linalg::zeros(2 * n, 2 * n);
    let mut off = 0;
    for (blk, &m) in blocks.iter().zip(&sizes) {
        let map = |i: usize| if i < m { off + i } else { n + off + i - m };
        for i in 0..2 * m {
            for j in 0..2 * m {
                out[(map(i), map(j))] = blk[(i, j)];
            }
        }
        off += m;
    }
    out
}

impl CoefficientProvider for DirectSum {
    fn half_dim(&self) -> usize {
        self.parts.iter().map(|p| p.n()).sum()
    }

    fn coefficients(&self, k: usize) -> Result<StepCoefficients> {
        let steps = self.parts.iter().map(|p| p.coefficients(k)).collect::<Result<Vec<_>>>()?;
        let s: Vec<CMat> = steps.iter().map(|st| st.s.clone()).collect();
        let psi: Vec<CMat> = steps.iter().map(|st| st.psi.clone()).collect();
        Ok(StepCoefficients { s: embed_blocks(&s), psi: embed_blocks(&psi) })
    }

    fn periodicity(&self) -> Option<(usize, usize)> {
        self.parts.iter().map(|p| p.periodicity()).reduce(combine_periodicity).flatten()
    }
}

pub fn direct_sum(parts: &[SymplecticSystem]) -> Result<SymplecticSystem> {
    if parts.is_empty() {
        return Err(Error::BadInput("direct sum of zero systems".into()));
    }
    let label = parts.iter().map(|p| p.label.as_str()).collect::<Vec<_>>().join(" + ");
    Ok(SymplecticSystem::new(Arc::new(DirectSum { parts: parts.to_vec() }), label))
}

/// Parameters of a seeded random periodic system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSystemSpec {
    pub n: usize,
    pub period: usize,
    pub seed: u64,
    /// Scale of the weight `Ψ_k`.
    pub psi_scale: f64,
    /// Scale of the non-unitary shear factors in `S_k`.
    pub shear: f64,
}

impl RandomSystemSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, period: 7, seed, psi_scale: 1e-3, shear: 0.02 }
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let mut h = linalg::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = c(scale * rng.gen_range(-1.0..1.0), 0.0);
        for j in i + 1..n {
            let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale;
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

fn block(tl: &CMat, tr: &CMat, bl: &CMat, br: &CMat) -> CMat {
    let n = tl.nrows();
    let mut out = linalg::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, n)).copy_from(tr);
    out.view_mut((n, 0), (n, n)).copy_from(bl);
    out.view_mut((n, n), (n, n)).copy_from(br);
    out
}

/// Cayley transform `(I − X/2)⁻¹(I + X/2)` of `X = JH`; symplectic for any
/// Hermitian `H`.
fn cayley_symplectic(h: &CMat) -> CMat {
    let x = linalg::j_left(h) * c(0.5, 0.0);
    let id = linalg::identity(h.nrows());
    let lhs = &id - &x;
    linalg::inverse(&lhs).expect("Cayley denominator is invertible for bounded generators") * (&id + &x)
}

/// One period of random `(S_k, Ψ_k)`: `S_k` is a product of a unitary
/// symplectic rotation with two small shears, and `Ψ_k = L C L*` with
/// `L = (I; H)`, `H` Hermitian, `C ⪰ 0`, so that `ΨJΨ = 0`.
pub fn random_coefficients(spec: &RandomSystemSpec) -> Vec<StepCoefficients> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zero = linalg::zeros(n, n);
    let id = linalg::identity(n);
    (0..spec.period.max(1))
        .map(|_| {
            // generator commuting with J gives a unitary factor
            let p = random_hermitian(&mut rng, n, 1.0);
            let q = random_hermitian(&mut rng, n, 1.0) * linalg::I;
            let rot = cayley_symplectic(&block(&p, &q, &(-&q), &p));
            let upper = block(&id, &random_hermitian(&mut rng, n, spec.shear), &zero, &id);
            let lower = block(&id, &zero, &random_hermitian(&mut rng, n, spec.shear), &id);
            let s = upper * rot * lower;

            let hl = random_hermitian(&mut rng, n, 1.0);
            let g = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let cpsd = &g * g.adjoint() * c(spec.psi_scale, 0.0);
            let mut l = linalg::zeros(2 * n, n);
            l.view_mut((0, 0), (n, n)).copy_from(&id);
            l.view_mut((n, 0), (n, n)).copy_from(&hl);
            let psi = linalg::re_part(&(&l * cpsd * l.adjoint()));
            StepCoefficients { s, psi }
        })
        .collect()
}

pub fn random_system(spec: &RandomSystemSpec) -> SymplecticSystem {
    let steps = random_coefficients(spec);
    let s = Seq::Periodic(steps.iter().map(|st| st.s.clone()).collect());
    let psi = Seq::Periodic(steps.iter().map(|st| st.psi.clone()).collect());
    let mut sys = SymplecticSystem::from_matrices(spec.n, s, psi, "random");
    sys.label = format!("random(n={}, seed={})", spec.n, spec.seed);
    sys
}
