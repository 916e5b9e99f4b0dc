//! Brute-force finite-section eigenvalues: a symmetric tridiagonal
//! eigensolver and a determinant root scan of the symplectic problem.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, c};
use crate::models::JacobiModel;
use crate::propagate::StepSource;
use crate::system::{BoundaryMatrix, SymplecticSystem};

pub const MAX_TRUNCATION: usize = 1 << 22;

/// Eigenvalues of a symmetric tridiagonal matrix (diagonal `d`, sub-diagonal
/// `e`, `e.len() == d.len() − 1`) by implicit QL with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(diag: &[f64], off: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if off.len() + 1 != n {
        return Err(Error::ShapeMismatch("off-diagonal must have n - 1 entries".into()));
    }
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NotConverged(format!("tridiagonal QL stalled at row {l}")));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut cc, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = cc * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                cc = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * cc * b;
                p = s * r;
                d[i + 1] = g + p;
                g = cc * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Finite section of `a_{k+1}y_{k+2} + b_{k+1}y_{k+1} + a_k y_k = λ w_{k+1} y_{k+1}`
/// with `sin α₀ y₀ = cos α₀ a₀ y₁` on the left and a Dirichlet condition on
/// the right. With `sin α₀ ≠ 0` the unknowns are `y_1..y_size`; with
/// `sin α₀ = 0` the left condition forces `y₁ = 0` and the unknowns are
/// `y_2..y_{size+1}`.
pub fn jacobi_truncation_eigs(model: &JacobiModel, size: usize, left_angle: f64) -> Result<Vec<f64>> {
    if size == 0 || size > MAX_TRUNCATION {
        return Err(Error::BadInput(format!("truncation size must be in 1..={MAX_TRUNCATION}")));
    }
    let (s, co) = left_angle.sin_cos();
    let first = if s.abs() < 1e-15 { 2 } else { 1 };
    let idx: Vec<usize> = (first..first + size).collect();
    let mut diag = Vec::with_capacity(size);
    let mut off = Vec::with_capacity(size - 1);
    for (row, &j) in idx.iter().enumerate() {
        let w = model.w(j)?;
        let mut b = model.b(j)?;
        if j == 1 {
            let a0 = model.a(0)?;
            b += a0 * a0 * co / s;
        }
        diag.push(b / w);
        if row + 1 < size {
            off.push(model.a(j)? / (w * model.w(j + 1)?).sqrt());
        }
    }
    tridiagonal_eigenvalues(&diag, &off)
}

/// Phase and `ln|·|` of `det(β Z̃_{N+1}(λ))`, with the frame rescaled by
/// positive factors along the way. The phase is `0` at an exact zero.
pub fn det_log(
    source: &StepSource<'_>,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    n_steps: usize,
    lambda: Complex64,
) -> Result<(Complex64, f64)> {
    let mut z = -linalg::j_left(&alpha.matrix().adjoint());
    let mut next = z.clone();
    let mut log_scale = 0.0;
    for k in 0..=n_steps {
        source.step(k)?.apply_into(lambda, &z, &mut next);
        std::mem::swap(&mut z, &mut next);
        let big = linalg::max_abs(&z);
        if !big.is_finite() || big == 0.0 {
            return Err(Error::Overflow { index: k + 1 });
        }
        if !(1e-32..=1e32).contains(&big) {
            z /= c(big, 0.0);
            log_scale += big.ln();
        }
    }
    let d: Complex64 = (beta.matrix() * &z).determinant();
    let mag = d.norm();
    if mag == 0.0 {
        return Ok((c(0.0, 0.0), f64::NEG_INFINITY));
    }
    Ok((d / mag, mag.ln() + alpha.n() as f64 * log_scale))
}

/// Sign and `ln|·|` of `det(β Z̃_{N+1}(λ))` at real `λ`.
pub fn det_boundary(
    source: &StepSource<'_>,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    n_steps: usize,
    lambda: f64,
) -> Result<(f64, f64)> {
    let (phase, log) = det_log(source, alpha, beta, n_steps, c(lambda, 0.0))?;
    let sign = if phase.re == 0.0 { 0.0 } else { phase.re.signum() };
    Ok((sign, log))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootScan {
    /// Roots with multiplicity, ascending.
    pub roots: Vec<f64>,
    /// Grid intervals whose zero count exceeded their sign changes.
    pub refined_intervals: usize,
}

const ROOT_TOL: f64 = 1e-12;

/// Replacement root lists keyed by grid interval.
type Fixes = Vec<(usize, Vec<f64>)>;

/// Largest phase step accepted between neighbouring contour samples.
const MAX_PHASE_STEP: f64 = std::f64::consts::FRAC_PI_4;

fn bisect<F: Fn(f64) -> Result<f64>>(sign: &F, mut lo: f64, mut hi: f64, s_lo: f64) -> Result<f64> {
    while hi - lo > ROOT_TOL * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        let sm = sign(mid)?;
        if sm == 0.0 {
            return Ok(mid);
        }
        if sm == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Zeros inside the box `[x0, x1] × [−h, h]`, `h = (x1 − x0)/2`, by the
/// argument principle with adaptive phase tracking; `None` if the contour
/// passes through a zero.
fn zero_count<F: Fn(Complex64) -> Result<Complex64>>(phase: &F, x0: f64, x1: f64) -> Result<Option<usize>> {
    let h = 0.5 * (x1 - x0);
    let corners = [c(x0, -h), c(x1, -h), c(x1, h), c(x0, h)];
    let mut total = 0.0;
    for e in 0..4 {
        let (p, q) = (corners[e], corners[(e + 1) % 4]);
        let at = |u: f64| p + (q - p) * u;
        let mut u: f64 = 0.0;
        let mut pu = phase(at(0.0))?;
        let base: f64 = 1.0 / 16.0;
        let mut step = base;
        while u < 1.0 {
            if pu == c(0.0, 0.0) {
                return Ok(None);
            }
            let v = (u + step).min(1.0);
            let pv = phase(at(v))?;
            if pv == c(0.0, 0.0) {
                return Ok(None);
            }
            let d = (pv / pu).arg();
            if d.abs() > MAX_PHASE_STEP && step > 1e-9 {
                step *= 0.5;
                continue;
            }
            total += d;
            u = v;
            pu = pv;
            step = (2.0 * step).min(base);
        }
    }
    let turns = total / std::f64::consts::TAU;
    Ok(Some(turns.round().max(0.0) as usize))
}

/// All roots in `(x0, x1)` given their number: bisection for an isolated
/// sign change, otherwise halving with a zero count on each half.
fn locate<S, P>(sign: &S, phase: &P, x0: f64, x1: f64, count: usize, out: &mut Vec<f64>) -> Result<()>
where
    S: Fn(f64) -> Result<f64>,
    P: Fn(Complex64) -> Result<Complex64>,
{
    if count == 0 {
        return Ok(());
    }
    if x1 - x0 <= ROOT_TOL * (1.0 + x0.abs()) {
        out.extend(std::iter::repeat_n(0.5 * (x0 + x1), count));
        return Ok(());
    }
    if count == 1 {
        let (s0, s1) = (sign(x0)?, sign(x1)?);
        if s0 != 0.0 && s1 != 0.0 && s0 != s1 {
            out.push(bisect(sign, x0, x1, s0)?);
            return Ok(());
        }
    }
    // off-centre split so a symmetric cluster does not sit on the cut
    let mut xm = x0 + 0.4999 * (x1 - x0);
    let mut left = zero_count(phase, x0, xm)?;
    if left.is_none() {
        if sign(xm)? == 0.0 {
            out.push(xm);
            return locate(sign, phase, x0, x1, count - 1, out).map(|_| ());
        }
        xm = x0 + 0.5003 * (x1 - x0);
        left = zero_count(phase, x0, xm)?;
    }
    let left = left.ok_or_else(|| Error::NotConverged(format!("zero count on [{x0}, {xm}] hit a zero")))?.min(count);
    locate(sign, phase, x0, xm, left, out)?;
    locate(sign, phase, xm, x1, count - left, out)
}

/// Real roots of `λ ↦ det(β Z̃_{N+1}(λ))` on `[a, b]`. Sign changes on a grid
/// of `resolution` points are bisected to `1e-12`; blocks of the grid are
/// then checked with an argument-principle zero count, and intervals that
/// hold more zeros than sign changes (close pairs, even multiplicities) are
/// split until every zero is isolated.
pub fn det_root_scan(
    sys: &SymplecticSystem,
    alpha: &BoundaryMatrix,
    beta: &BoundaryMatrix,
    n_steps: usize,
    a: f64,
    b: f64,
    resolution: usize,
) -> Result<RootScan> {
    if a > b {
        return Err(Error::BadInput("det_root_scan needs a <= b".into()));
    }
    if a == b {
        return Ok(RootScan { roots: Vec::new(), refined_intervals: 0 });
    }
    let resolution = resolution.max(3);
    let source = StepSource::new(sys)?;
    let sign = |t: f64| det_boundary(&source, alpha, beta, n_steps, t).map(|v| v.0);
    let phase = |z: Complex64| det_log(&source, alpha, beta, n_steps, z).map(|v| v.0);
    let h = (b - a) / (resolution - 1) as f64;
    let grid: Vec<f64> = (0..resolution).map(|i| a + h * i as f64).collect();
    let signs: Vec<f64> = grid.par_iter().map(|&t| sign(t)).collect::<Result<_>>()?;

    // per-interval roots from sign changes; exact grid zeros stand alone
    let mut exact = Vec::new();
    let mut per_interval: Vec<Vec<f64>> = vec![Vec::new(); resolution - 1];
    for i in 0..resolution {
        if signs[i] == 0.0 {
            exact.push(grid[i]);
        }
    }
    let found: Vec<Result<Vec<f64>>> = (0..resolution - 1)
        .into_par_iter()
        .map(|i| {
            let (s0, s1) = (signs[i], signs[i + 1]);
            if s0 != 0.0 && s1 != 0.0 && s0 != s1 {
                Ok(vec![bisect(&sign, grid[i], grid[i + 1], s0)?])
            } else {
                Ok(Vec::new())
            }
        })
        .collect();
    for (slot, r) in per_interval.iter_mut().zip(found) {
        *slot = r?;
    }

    const BLOCK: usize = 32;
    let blocks: Vec<(usize, usize)> = (0..resolution - 1).step_by(BLOCK).map(|s| (s, (s + BLOCK).min(resolution - 1))).collect();
    let refined: Vec<Result<Fixes>> = blocks
        .par_iter()
        .map(|&(s, e)| {
            let have: usize = per_interval[s..e].iter().map(Vec::len).sum();
            let Some(total) = zero_count(&phase, grid[s], grid[e])? else {
                return Ok(Vec::new());
            };
            if total == have {
                return Ok(Vec::new());
            }
            let mut fixes = Vec::new();
            for i in s..e {
                let Some(n_i) = zero_count(&phase, grid[i], grid[i + 1])? else {
                    continue;
                };
                if n_i != per_interval[i].len() {
                    let mut roots = Vec::new();
                    locate(&sign, &phase, grid[i], grid[i + 1], n_i, &mut roots)?;
                    fixes.push((i, roots));
                }
            }
            Ok(fixes)
        })
        .collect();
    let mut refined_intervals = 0;
    for fixes in refined {
        for (i, roots) in fixes? {
            per_interval[i] = roots;
            refined_intervals += 1;
        }
    }
    let mut roots: Vec<f64> = per_interval.into_iter().flatten().chain(exact).collect();
    roots.sort_by(f64::total_cmp);
    Ok(RootScan { roots, refined_intervals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::system::{Seq, TailRule};

    #[test]
    fn free_model_size_three() {
        let eigs = jacobi_truncation_eigs(&models::free_jacobi_model(), 3, std::f64::consts::FRAC_PI_2).unwrap();
        let r2 = 2f64.sqrt();
        for (x, y) in eigs.iter().zip([-r2, 0.0, r2]) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn single_site() {
        let m = models::JacobiModel::new(Seq::Const(1.0), Seq::Const(5.0), Seq::Const(1.0));
        assert_eq!(jacobi_truncation_eigs(&m, 1, std::f64::consts::FRAC_PI_2).unwrap(), vec![5.0]);
        let m = models::JacobiModel::new(Seq::Const(1.0), Seq::Const(2.0), Seq::Const(4.0));
        assert_eq!(jacobi_truncation_eigs(&m, 1, std::f64::consts::FRAC_PI_2).unwrap(), vec![0.5]);
    }

    #[test]
    fn determinant_roots_match_truncation() {
        let sys = models::free_jacobi();
        let d = BoundaryMatrix::dirichlet(1);
        let scan = det_root_scan(&sys, &d, &d, 3, -3.0, 3.0, 200).unwrap();
        let r2 = 2f64.sqrt();
        assert_eq!(scan.roots.len(), 3);
        for (x, y) in scan.roots.iter().zip([-r2, 0.0, r2]) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
        assert!(det_root_scan(&sys, &d, &d, 20, 2.5, 3.0, 50).unwrap().roots.is_empty());
        assert!(det_root_scan(&sys, &d, &d, 20, 1.0, 1.0, 50).unwrap().roots.is_empty());
    }

    #[test]
    fn close_pair_inside_one_interval() {
        // two decoupled sites at 0 and 1e-4
        let m = models::JacobiModel::new(
            Seq::Table { values: vec![1.0, 1e-7, 1.0], tail: TailRule::RepeatLast },
            Seq::Table { values: vec![0.0, 0.0, 1e-4, 0.0], tail: TailRule::RepeatLast },
            Seq::Const(1.0),
        );
        let eigs = jacobi_truncation_eigs(&m, 2, std::f64::consts::FRAC_PI_2).unwrap();
        let sys = models::jacobi_to_symplectic(&m).unwrap();
        let d = BoundaryMatrix::dirichlet(1);
        let scan = det_root_scan(&sys, &d, &d, 2, -0.93, 1.07, 11).unwrap();
        assert_eq!(scan.roots.len(), 2);
        assert!(scan.refined_intervals >= 1, "{eigs:?} {scan:?}");
        for (x, y) in scan.roots.iter().zip(&eigs) {
            assert!((x - y).abs() < 1e-10, "{x} vs {y}");
        }
    }
}
