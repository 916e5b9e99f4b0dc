//! Regular Weyl–Titchmarsh functions `M_N`, the adaptive limit `M₊`, Weyl
//! solutions and the numerical limit-point diagnosis.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMat};
use crate::propagate::{self, FundamentalSolution, StepSource, WeightedSequence};
use crate::system::{BoundaryMatrix, SymplecticSystem};

/// `βZ̃_N` counts as singular below this relative smallest singular value.
pub const SINGULAR_RCOND: f64 = 1e-13;

/// Rescale the propagated frame once its largest entry passes this.
const RESCALE_AT: f64 = 1e64;

/// First checkpoint of the dyadic `N` schedule.
pub const N_MIN: usize = 16;

/// Default cap of the dyadic `N` schedule.
pub const N_MAX: usize = 1 << 20;

/// An adaptive approximation of `M₊(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MPlusEvaluation {
    #[serde(serialize_with = "crate::serde_complex::scalar")]
    pub lambda: Complex64,
    #[serde(serialize_with = "crate::serde_complex::matrix")]
    pub value: CMat,
    pub n_used: usize,
    /// Largest pairwise distance of the β-probe values at `n_used`.
    pub diameter: f64,
    pub on_circle_residual: f64,
    pub converged: bool,
}

/// Anything that evaluates an `n × n` Nevanlinna function off the real axis
/// (and at real points where it is analytic).
pub trait MFunction: Sync {
    fn half_dim(&self) -> usize;
    fn eval(&self, lambda: Complex64) -> Result<MPlusEvaluation>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitOptions {
    pub tol: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub seed: u64,
    /// Overrides the default β-probe set.
    pub probes: Option<Vec<BoundaryMatrix>>,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self { tol: 1e-10, n_min: N_MIN, n_max: N_MAX, seed: 0x5eed, probes: None }
    }
}

/// Default probes: angles `{0, π/4, π/2}` for `n = 1`; otherwise `α`, `αJ`,
/// their balanced combination and one seeded random element of `Γ`.
pub fn default_probes(alpha: &BoundaryMatrix, seed: u64) -> Vec<BoundaryMatrix> {
    let n = alpha.n();
    if n == 1 {
        return [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2].into_iter().map(BoundaryMatrix::from_angle).collect();
    }
    let id = linalg::identity(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let unitary = g.qr().q();
    let angles: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::PI)).collect();
    vec![alpha.clone(), alpha.complement(), alpha.rotated(&id, &vec![std::f64::consts::FRAC_PI_4; n]), alpha.rotated(&unitary, &angles)]
}

/// Forward frame `Φ_k` with a running common scale; `M_N` is invariant
/// under the scale.
struct ScaledFrame<'a> {
    source: StepSource<'a>,
    lambda: Complex64,
    phi: CMat,
    next: CMat,
    k: usize,
}

impl<'a> ScaledFrame<'a> {
    fn new(sys: &'a SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64) -> Result<Self> {
        if alpha.n() != sys.n() {
            return Err(Error::ShapeMismatch(format!("boundary matrix has n = {}, system has n = {}", alpha.n(), sys.n())));
        }
        let phi = propagate::initial_phi(alpha);
        Ok(Self { source: StepSource::new(sys)?, lambda, next: phi.clone(), phi, k: 0 })
    }

    fn advance_to(&mut self, target: usize) -> Result<()> {
        while self.k < target {
            self.source.step(self.k)?.apply_into(self.lambda, &self.phi, &mut self.next);
            std::mem::swap(&mut self.phi, &mut self.next);
            self.k += 1;
            let big = linalg::max_abs(&self.phi);
            if !big.is_finite() {
                return Err(Error::Overflow { index: self.k });
            }
            if big > RESCALE_AT {
                self.phi /= c(big, 0.0);
            } else if big == 0.0 {
                return Err(Error::DegenerateSystem { lambda: self.lambda, n: self.k });
            }
        }
        Ok(())
    }

    fn n(&self) -> usize {
        self.phi.nrows() / 2
    }

    fn zhat(&self) -> CMat {
        self.phi.columns(0, self.n()).into_owned()
    }

    fn ztilde(&self) -> CMat {
        let n = self.n();
        self.phi.columns(n, n).into_owned()
    }
}

/// `-(βZ̃)⁻¹ βẐ`, or `None` when `βZ̃` is numerically singular.
fn m_from_frame(zhat: &CMat, ztilde: &CMat, beta: &BoundaryMatrix) -> Option<CMat> {
    let bz = beta.matrix() * ztilde;
    let bh = beta.matrix() * zhat;
    let scale = linalg::fro(ztilde);
    if scale == 0.0 {
        return None;
    }
    let smin = linalg::singular_values(&bz).last().copied().unwrap_or(0.0);
    if smin < SINGULAR_RCOND * scale {
        return None;
    }
    if bz.nrows() == 1 {
        return Some(CMat::from_element(1, 1, -bh[(0, 0)] / bz[(0, 0)]));
    }
    bz.lu().solve(&bh).map(|x| -x)
}

/// `M_N(λ, α, β) = -[βZ̃_N(λ)]⁻¹ βẐ_N(λ)`.
pub fn regular_m(sys: &SymplecticSystem, alpha: &BoundaryMatrix, beta: &BoundaryMatrix, lambda: Complex64, n_steps: usize) -> Result<CMat> {
    let singular = Error::SingularBoundary { lambda, n: n_steps };
    if sys.n() > 1 {
        check_shape(sys, alpha)?;
        return m_backward(sys, alpha, beta, lambda, n_steps)?.ok_or(singular);
    }
    let mut frame = ScaledFrame::new(sys, alpha, lambda)?;
    frame.advance_to(n_steps)?;
    m_from_frame(&frame.zhat(), &frame.ztilde(), beta).ok_or(singular)
}

fn check_shape(sys: &SymplecticSystem, alpha: &BoundaryMatrix) -> Result<()> {
    if alpha.n() != sys.n() {
        return Err(Error::ShapeMismatch(format!("boundary matrix has n = {}, system has n = {}", alpha.n(), sys.n())));
    }
    Ok(())
}

fn orthonormal_columns(y: &CMat) -> CMat {
    y.clone().qr().q()
}

/// `M_N` from the backward side: `Y_N = −Jβ*` spans the solutions with
/// `βY_N = 0`, and `M_N = αJY_0(αY_0)⁻¹`. Columns are re-orthonormalized
/// along the way so directions of very different growth stay separate.
fn m_backward(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    n_steps: usize,
) -> Result<Option<CMat>> {
    let mut y = -linalg::j_left(&beta.matrix().adjoint());
    for k in (0..n_steps).rev() {
        let st = sys.coefficients(k)?;
        y = (&st.s + st.v() * lambda) * y;
        if k % 4 == 0 || linalg::max_abs(&y) > 1e16 {
            if !linalg::is_finite(&y) {
                return Err(Error::Overflow { index: k });
            }
            y = orthonormal_columns(&y);
        }
    }
    let p = alpha.matrix() * &y;
    let smin = linalg::singular_values(&p).last().copied().unwrap_or(0.0);
    if smin < SINGULAR_RCOND {
        return Ok(None);
    }
    let q = alpha.matrix() * linalg::j_left(&y);
    Ok(linalg::inverse(&p).map(|inv| q * inv))
}

/// `‖X_N* J X_N‖ / (‖Φ_N‖² (1 + ‖M‖)²)` with `X_N = Ẑ_N + Z̃_N M`; the
/// normalization removes the common growth of the frame.
fn circle_residual_from_frame(zhat: &CMat, ztilde: &CMat, m: &CMat) -> f64 {
    let x = zhat + ztilde * m;
    let raw = linalg::fro(&(x.adjoint() * linalg::j_left(&x)));
    let scale = (linalg::fro(zhat).powi(2) + linalg::fro(ztilde).powi(2)) * (1.0 + linalg::fro(m)).powi(2);
    if scale > 0.0 {
        raw / scale
    } else {
        raw
    }
}

/// Regular `M_N` together with its normalized on-circle residual.
pub fn circle_residual(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    lambda: Complex64,
    n_steps: usize,
) -> Result<(CMat, f64)> {
    let mut frame = ScaledFrame::new(sys, alpha, lambda)?;
    frame.advance_to(n_steps)?;
    let (zh, zt) = (frame.zhat(), frame.ztilde());
    let m = m_from_frame(&zh, &zt, beta).ok_or(Error::SingularBoundary { lambda, n: n_steps })?;
    let res = circle_residual_from_frame(&zh, &zt, &m);
    Ok((m, res))
}

/// Value and probe spread at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub n: usize,
    pub value: CMat,
    pub spread: f64,
    pub on_circle_residual: f64,
}

fn summarize(n: usize, values: &[CMat], on_circle_residual: f64) -> Checkpoint {
    let mut spread: f64 = 0.0;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            spread = spread.max(linalg::fro(&(&values[i] - &values[j])));
        }
    }
    let dim = values[0].nrows();
    let mut mean = linalg::zeros(dim, dim);
    for v in values {
        mean += v;
    }
    mean /= c(values.len() as f64, 0.0);
    Checkpoint { n, value: mean, spread, on_circle_residual }
}

fn checkpoint(frame: &ScaledFrame<'_>, probes: &[BoundaryMatrix]) -> Option<Checkpoint> {
    let (zh, zt) = (frame.zhat(), frame.ztilde());
    let values: Vec<CMat> = probes.iter().filter_map(|b| m_from_frame(&zh, &zt, b)).collect();
    if values.is_empty() {
        return None;
    }
    Some(summarize(frame.k, &values, circle_residual_from_frame(&zh, &zt, &values[0])))
}

/// Checkpoints at arbitrary `N`: the forward frame for `n = 1`, backward
/// probes otherwise. Backward probes satisfy `βX_N = 0` exactly, so their
/// on-circle residual is the `Γ` residual of the first probe.
enum Prober<'a> {
    Forward(ScaledFrame<'a>),
    Backward { sys: &'a SymplecticSystem, alpha: &'a BoundaryMatrix, lambda: Complex64 },
}

impl<'a> Prober<'a> {
    fn new(sys: &'a SymplecticSystem, alpha: &'a BoundaryMatrix, lambda: Complex64) -> Result<Self> {
        if sys.n() == 1 {
            return Ok(Prober::Forward(ScaledFrame::new(sys, alpha, lambda)?));
        }
        check_shape(sys, alpha)?;
        Ok(Prober::Backward { sys, alpha, lambda })
    }

    fn at(&mut self, n: usize, probes: &[BoundaryMatrix]) -> Result<Option<Checkpoint>> {
        match self {
            Prober::Forward(frame) => {
                frame.advance_to(n)?;
                Ok(checkpoint(frame, probes))
            }
            Prober::Backward { sys, alpha, lambda } => {
                let mut values = Vec::with_capacity(probes.len());
                for b in probes {
                    if let Some(m) = m_backward(sys, alpha, b, *lambda, n)? {
                        values.push(m);
                    }
                }
                if values.is_empty() {
                    return Ok(None);
                }
                let on_circle = probes[0].residuals().1;
                Ok(Some(summarize(n, &values, on_circle)))
            }
        }
    }
}

/// Probe checkpoints along the dyadic schedule up to `n_max`, without a
/// stopping rule.
pub fn spread_history(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: Complex64,
    n_max: usize,
    probes: &[BoundaryMatrix],
) -> Result<Vec<Checkpoint>> {
    let mut prober = Prober::new(sys, alpha, lambda)?;
    let mut out = Vec::new();
    let mut n = N_MIN;
    while n <= n_max {
        if let Some(cp) = prober.at(n, probes)? {
            out.push(cp);
        }
        n *= 2;
    }
    Ok(out)
}

/// Adaptive `M₊(λ)`: dyadic doubling of `N` until the β-probe spread and the
/// change since the previous checkpoint both fall below `tol·(1 + ‖M‖)`.
/// Reaching `n_max` yields `converged = false`, not an error.
pub fn limit_m(sys: &SymplecticSystem, alpha: &BoundaryMatrix, lambda: Complex64, opts: &LimitOptions) -> Result<MPlusEvaluation> {
    if !(opts.tol > 0.0) || opts.n_min == 0 || opts.n_max < opts.n_min {
        return Err(Error::BadInput("limit_m needs tol > 0 and 0 < n_min <= n_max".into()));
    }
    let probes = opts.probes.clone().unwrap_or_else(|| default_probes(alpha, opts.seed));
    if probes.iter().any(|p| p.n() != sys.n()) {
        return Err(Error::ShapeMismatch("beta-probe size differs from the system".into()));
    }
    let mut prober = Prober::new(sys, alpha, lambda)?;
    let mut prev: Option<CMat> = None;
    let mut n = opts.n_min;
    loop {
        let mut cp = prober.at(n, &probes)?;
        // all probes singular: step a few indices past the degenerate one
        let mut at = n;
        while cp.is_none() && at < n + 4 {
            at += 1;
            cp = prober.at(at, &probes)?;
        }
        let Some(cp) = cp else {
            return Err(Error::DegenerateSystem { lambda, n: at });
        };
        let band = opts.tol * (1.0 + linalg::fro(&cp.value));
        let settled = prev.as_ref().is_some_and(|p| linalg::fro(&(p - &cp.value)) < band);
        let converged = settled && cp.spread < band;
        if converged || n >= opts.n_max {
            return Ok(MPlusEvaluation {
                lambda,
                value: cp.value,
                n_used: cp.n,
                diameter: cp.spread,
                on_circle_residual: cp.on_circle_residual,
                converged,
            });
        }
        prev = Some(cp.value);
        n = (at * 2).min(opts.n_max).max(at + 1);
    }
}

/// `M₊` of a system with a fixed boundary matrix.
#[derive(Debug, Clone)]
pub struct SystemMFunction {
    pub sys: SymplecticSystem,
    pub alpha: BoundaryMatrix,
    pub opts: LimitOptions,
}

impl SystemMFunction {
    pub fn new(sys: SymplecticSystem, alpha: BoundaryMatrix) -> Self {
        Self { sys, alpha, opts: LimitOptions::default() }
    }

    pub fn with_options(mut self, opts: LimitOptions) -> Self {
        self.opts = opts;
        self
    }
}

impl MFunction for SystemMFunction {
    fn half_dim(&self) -> usize {
        self.sys.n()
    }

    fn eval(&self, lambda: Complex64) -> Result<MPlusEvaluation> {
        limit_m(&self.sys, &self.alpha, lambda, &self.opts)
    }
}

/// `X_k = Ẑ_k + Z̃_k M` on the window of `fund`. Direct evaluation; loses
/// accuracy once `Z̃` has grown by more than `1/ε` relative to `X`.
pub fn weyl_solution(fund: &FundamentalSolution, m: &CMat) -> Result<WeightedSequence> {
    let n = fund.alpha.n();
    if m.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!("M must be {n}x{n}")));
    }
    let values = fund.zhat.iter().zip(&fund.ztilde).map(|(zh, zt)| zh + zt * m).collect();
    Ok(WeightedSequence::new(0, values))
}

/// Solution of the finite problem `βY_{far} = 0`, obtained by backward
/// recursion from `far` and returned on `[0, n_out]` up to a right factor.
/// Beyond `n_out` the columns are re-orthonormalized; inside the window each
/// column carries its own scale so that blocks of very different size
/// survive.
fn backward_solution(sys: &SymplecticSystem, beta: &BoundaryMatrix, lambda: Complex64, n_out: usize, far: usize) -> Result<Vec<CMat>> {
    let mut y = -linalg::j_left(&beta.matrix().adjoint());
    let cols = y.ncols();
    let mut logs = vec![0.0_f64; cols];
    let mut stored: Vec<(CMat, Vec<f64>)> = Vec::with_capacity(n_out + 1);
    for k in (0..far).rev() {
        let st = sys.coefficients(k)?;
        y = (&st.s + st.v() * lambda) * y;
        if !linalg::is_finite(&y) {
            return Err(Error::Overflow { index: k });
        }
        if k > n_out {
            if k % 4 == 0 || linalg::max_abs(&y) > 1e16 {
                y = orthonormal_columns(&y);
            }
            continue;
        }
        for (j, log) in logs.iter_mut().enumerate() {
            let norm = y.column(j).norm();
            if norm == 0.0 {
                return Err(Error::DegenerateSystem { lambda, n: k });
            }
            if !(1.0 / RESCALE_AT..=RESCALE_AT).contains(&norm) {
                y.column_mut(j).unscale_mut(norm);
                *log += norm.ln();
            }
        }
        stored.push((y.clone(), logs.clone()));
    }
    stored.reverse();
    let s0 = stored[0].1.clone();
    Ok(stored
        .into_iter()
        .map(|(mut v, s)| {
            // true columns are v_j e^{s_j}; express them relative to Y_0's scales
            for j in 0..cols {
                v.column_mut(j).scale_mut((s[j] - s0[j]).exp());
            }
            v
        })
        .collect())
}

fn max_rel_change(a: &[CMat], b: &[CMat]) -> f64 {
    let top = a.iter().map(linalg::fro).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| linalg::fro(&(x - y))).fold(0.0, f64::max) / top
}

/// Normalized Weyl solution `X` with `αX_0 = I` on `[0, n_out]` and the value
/// `M = αJX_0`, both from backward recursion with padding doubled until the
/// window is stable to `tol`.
pub fn weyl_solution_stable(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    lambda: Complex64,
    n_out: usize,
    tol: f64,
) -> Result<(WeightedSequence, CMat)> {
    let normalize = |ys: Vec<CMat>| -> Result<Vec<CMat>> {
        let a0 = alpha.matrix() * &ys[0];
        let inv = linalg::inverse(&a0).ok_or(Error::SingularBoundary { lambda, n: 0 })?;
        Ok(ys.into_iter().map(|y| y * &inv).collect())
    };
    let mut pad = 64usize;
    let mut prev = normalize(backward_solution(sys, alpha, lambda, n_out, n_out + pad)?)?;
    loop {
        pad *= 2;
        let cur = normalize(backward_solution(sys, alpha, lambda, n_out, n_out + pad)?)?;
        let change = max_rel_change(&cur, &prev);
        if change < tol {
            let m = alpha.matrix() * linalg::j_left(&cur[0]);
            return Ok((WeightedSequence::new(0, cur), m));
        }
        if pad > (1 << 22) {
            return Err(Error::NotConverged(format!("Weyl solution at lambda = {lambda} did not stabilize (change {change:.2e})")));
        }
        prev = cur;
    }
}

/// Unnormalized subdominant solution space on `[0, n_out]`: columns of
/// `Y` with `βY_far = 0`, stabilized the same way.
pub fn decaying_solutions(sys: &SymplecticSystem, beta: &BoundaryMatrix, lambda: Complex64, n_out: usize, tol: f64) -> Result<Vec<CMat>> {
    let to_unit = |ys: Vec<CMat>| -> Vec<CMat> {
        // fix the column basis through Y_0 so successive paddings compare
        let y0 = ys[0].clone();
        let gram = y0.adjoint() * &y0;
        match linalg::inverse(&gram) {
            Some(g) => {
                let p = g * y0.adjoint();
                let r = &p * &ys[0];
                let fix = linalg::inverse(&r).unwrap_or_else(|| linalg::identity(r.nrows()));
                ys.into_iter().map(|y| y * &fix).collect()
            }
            None => ys,
        }
    };
    let mut pad = 64usize;
    let mut prev = to_unit(backward_solution(sys, beta, lambda, n_out, n_out + pad)?);
    loop {
        pad *= 2;
        let cur = to_unit(backward_solution(sys, beta, lambda, n_out, n_out + pad)?);
        let aligned = align_basis(&cur, &prev);
        if max_rel_change(&aligned, &prev) < tol || pad > (1 << 22) {
            return Ok(cur);
        }
        prev = cur;
    }
}

/// Re-expresses `a` in the column basis that best matches `b` at index 0.
fn align_basis(a: &[CMat], b: &[CMat]) -> Vec<CMat> {
    let a0 = &a[0];
    let gram = a0.adjoint() * a0;
    match linalg::inverse(&gram) {
        Some(g) => {
            let coef = g * a0.adjoint() * &b[0];
            a.iter().map(|y| y * &coef).collect()
        }
        None => a.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitPointVerdict {
    LimitPoint,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitPointReport {
    #[serde(serialize_with = "crate::serde_complex::scalars")]
    pub probes: Vec<Complex64>,
    /// Summable directions found per probe.
    pub summable: Vec<usize>,
    /// `max ‖X_N*(ν) J X_N(σ)‖` over probe pairs at the window end.
    pub cross_wronskian_tail: f64,
    pub verdict: LimitPointVerdict,
}

/// Natural logs of dyadic tail increments `Σ_{k ∈ [2^j, 2^{j+1})} z_k*Ψ_k z_k`
/// per column, computed with a running scale so growing columns do not
/// overflow.
fn log_dyadic_increments(sys: &SymplecticSystem, z0: &CMat, lambda: Complex64, window: usize) -> Result<Vec<Vec<f64>>> {
    let source = StepSource::new(sys)?;
    let cols = z0.ncols();
    let mut z = z0.clone();
    let mut next = z.clone();
    let mut log_scale = 0.0_f64;
    let mut out = vec![Vec::new(); cols];
    let mut acc = vec![0.0_f64; cols];
    let mut block_end = 2usize;
    for k in 0..=window {
        let psi = sys.psi(k)?;
        let pz = &psi * &z;
        for (j, a) in acc.iter_mut().enumerate() {
            *a += (z.column(j).adjoint() * pz.column(j))[(0, 0)].re.max(0.0);
        }
        if k + 1 == block_end || k == window {
            if k + 1 >= 2 {
                for j in 0..cols {
                    let lg = if acc[j] > 0.0 { acc[j].ln() + 2.0 * log_scale } else { f64::NEG_INFINITY };
                    out[j].push(lg);
                    acc[j] = 0.0;
                }
            }
            block_end *= 2;
        }
        if k == window {
            break;
        }
        source.step(k)?.apply_into(lambda, &z, &mut next);
        std::mem::swap(&mut z, &mut next);
        let big = linalg::max_abs(&z);
        if !big.is_finite() {
            return Err(Error::Overflow { index: k + 1 });
        }
        if big > RESCALE_AT {
            z /= c(big, 0.0);
            // pending accumulator is in the old scale
            for a in acc.iter_mut() {
                *a /= big * big;
            }
            log_scale += big.ln();
        }
    }
    Ok(out)
}

/// Summable iff the last three dyadic increments shrink by at least 2× each
/// and the final one is below `tol·(1 + partial sum)`.
fn tail_summable(logs: &[f64], tol: f64) -> bool {
    if logs.len() < 3 || logs.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let last3 = &logs[logs.len() - 3..];
    let shrinking = last3.windows(2).all(|w| w[0] - w[1] >= std::f64::consts::LN_2);
    let max_log = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let partial = logs.iter().map(|v| (v - max_log).exp()).sum::<f64>().ln() + max_log;
    let bound = tol.ln() + partial.exp().ln_1p().max(0.0).max(partial.max(0.0));
    shrinking && *last3.last().expect("three entries") < bound
}

/// Numerical evidence for the limit point case with `α = (I, 0)`.
pub fn diagnose_limit_point(sys: &SymplecticSystem, probes: &[Complex64], window: usize, tol: f64) -> Result<LimitPointReport> {
    let n = sys.n();
    let alpha = BoundaryMatrix::dirichlet(n);
    let mut summable = Vec::with_capacity(probes.len());
    let mut ends: Vec<CMat> = Vec::new();
    let mut ok = true;
    for &lambda in probes {
        if lambda.im == 0.0 {
            return Err(Error::BadInput("limit point probes must be non-real".into()));
        }
        let opts = LimitOptions { n_max: window.max(N_MIN) * 64, ..LimitOptions::default() };
        let eval = limit_m(sys, &alpha, lambda, &opts);
        let mut count = 0;
        let mut x_end = None;
        if let Ok(eval) = eval.as_ref().map_err(Clone::clone) {
            if eval.converged {
                let x0 = propagate::initial_phi(&alpha);
                let x0 = x0.columns(0, n).into_owned() + x0.columns(n, n).into_owned() * &eval.value;
                if let Ok(logs) = log_dyadic_increments(sys, &x0, lambda, window) {
                    count += logs.iter().filter(|l| tail_summable(l, tol)).count();
                }
                if let Ok((xs, _)) = weyl_solution_stable(sys, &alpha, lambda, window, 1e-12) {
                    x_end = xs.values.last().cloned();
                }
            }
        }
        let zt0 = -linalg::j_left(&alpha.matrix().adjoint());
        match log_dyadic_increments(sys, &zt0, lambda, window) {
            Ok(logs) => count += logs.iter().filter(|l| tail_summable(l, tol)).count(),
            Err(Error::Overflow { .. }) => {}
            Err(e) => return Err(e),
        }
        ok &= count == n;
        summable.push(count);
        match x_end {
            Some(x) => ends.push(x),
            None => ok = false,
        }
    }
    let mut cross: f64 = 0.0;
    for a in &ends {
        for b in &ends {
            cross = cross.max(linalg::fro(&(a.adjoint() * linalg::j_left(b))));
        }
    }
    if ends.is_empty() {
        cross = f64::INFINITY;
    }
    let verdict = if ok && cross < tol.max(1e-12) { LimitPointVerdict::LimitPoint } else { LimitPointVerdict::Inconclusive };
    Ok(LimitPointReport { probes: probes.to_vec(), summable, cross_wronskian_tail: cross, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn hand_recurrence_regular_m() {
        let sys = models::free_jacobi();
        let d = BoundaryMatrix::dirichlet(1);
        let m1 = regular_m(&sys, &d, &d, linalg::ZERO, 1).unwrap();
        assert!(m1[(0, 0)].norm() < 1e-15);
        let err = regular_m(&sys, &d, &d, linalg::ZERO, 2).unwrap_err();
        assert!(matches!(err, Error::SingularBoundary { n: 2, .. }));
    }

    #[test]
    fn free_jacobi_at_i() {
        let sys = models::free_jacobi();
        let d = BoundaryMatrix::dirichlet(1);
        let ev = limit_m(&sys, &d, linalg::I, &LimitOptions::default()).unwrap();
        assert!(ev.converged);
        assert!((ev.value[(0, 0)] - c(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm() < 1e-9);
    }

    #[test]
    fn backward_probe_matches_forward_frame() {
        let sys = models::oscillator(0.5);
        let a = BoundaryMatrix::from_angle(0.3);
        let b = BoundaryMatrix::from_angle(1.2);
        let lambda = c(0.7, 0.2);
        let fwd = regular_m(&sys, &a, &b, lambda, 25).unwrap();
        let bwd = m_backward(&sys, &a, &b, lambda, 25).unwrap().unwrap();
        assert!(linalg::fro(&(fwd - bwd)) < 1e-12);
    }

    #[test]
    fn direct_sum_with_disparate_growth() {
        let sys = models::direct_sum(&[models::free_jacobi(), models::oscillator(1.0)]).unwrap();
        let d = BoundaryMatrix::dirichlet(2);
        let ev = limit_m(&sys, &d, linalg::I, &LimitOptions::default()).unwrap();
        let free = limit_m(&models::free_jacobi(), &BoundaryMatrix::dirichlet(1), linalg::I, &LimitOptions::default()).unwrap();
        assert!(ev.converged);
        assert!((ev.value[(0, 0)] - free.value[(0, 0)]).norm() < 1e-9);
        assert!(ev.value[(0, 1)].norm() < 1e-12);
    }

    #[test]
    fn stable_solution_matches_limit() {
        let sys = models::free_jacobi();
        let d = BoundaryMatrix::dirichlet(1);
        let lambda = c(0.5, 0.3);
        let ev = limit_m(&sys, &d, lambda, &LimitOptions::default()).unwrap();
        let (xs, m) = weyl_solution_stable(&sys, &d, lambda, 40, 1e-13).unwrap();
        assert!((m[(0, 0)] - ev.value[(0, 0)]).norm() < 1e-9);
        assert!((d.matrix() * &xs.values[0] - linalg::identity(1)).norm() < 1e-12);
    }
}
