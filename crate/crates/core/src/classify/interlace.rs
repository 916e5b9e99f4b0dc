//! Interlacing of eigenvalues for two boundary matrices.

use serde::Serialize;

use super::scan::{scan_spectrum, ScanOptions, Verdict};
use crate::error::{Error, Result};
use crate::linalg;
use crate::system::BoundaryMatrix;
use crate::weyl::MFunction;

/// Two eigenvalues closer than this count as equal.
const SAME: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterlaceReport {
    pub n: usize,
    /// `rank αJα̂*`
    pub m: usize,
    pub window: (f64, f64),
    pub alpha_eigs: Vec<f64>,
    pub hat_eigs: Vec<f64>,
    /// At most `m` α̂-eigenvalues strictly between consecutive α-eigenvalues.
    pub at_most_m_between: bool,
    /// At least one α̂-eigenvalue among any `n + 1` consecutive α-eigenvalues.
    pub at_least_one_per_block: bool,
    /// `n = 1`, `m = 1`: exactly one strictly between; `None` otherwise.
    pub exactly_one_between: Option<bool>,
    /// At most `m` α̂-eigenvalues below the smallest and above the largest
    /// α-eigenvalue in the window.
    pub edges_at_most_m: bool,
    pub violations: Vec<String>,
    pub pass: bool,
}

fn count_open(xs: &[f64], lo: f64, hi: f64) -> usize {
    xs.iter().filter(|&&x| x > lo + SAME && x < hi - SAME).count()
}

/// Checks the interlacing statements on two sorted eigenvalue lists from
/// the window `[a, b]`.
pub fn interlace_from_lists(alpha_eigs: &[f64], hat_eigs: &[f64], n: usize, m: usize, window: (f64, f64)) -> InterlaceReport {
    let mut violations = Vec::new();
    let mut between_ok = true;
    let mut exact_ok = true;
    for w in alpha_eigs.windows(2) {
        let cnt = count_open(hat_eigs, w[0], w[1]);
        if cnt > m {
            between_ok = false;
            violations.push(format!("{cnt} eigenvalues in ({}, {})", w[0], w[1]));
        }
        if cnt != 1 {
            exact_ok = false;
        }
    }
    let mut block_ok = true;
    if alpha_eigs.len() > n {
        for i in 0..alpha_eigs.len() - n {
            let (lo, hi) = (alpha_eigs[i], alpha_eigs[i + n]);
            if !hat_eigs.iter().any(|&x| x >= lo - SAME && x <= hi + SAME) {
                block_ok = false;
                violations.push(format!("no eigenvalue in [{lo}, {hi}]"));
            }
        }
    }
    let mut edges_ok = true;
    if let (Some(&first), Some(&last)) = (alpha_eigs.first(), alpha_eigs.last()) {
        let below = hat_eigs.iter().filter(|&&x| x < first - SAME).count();
        let above = hat_eigs.iter().filter(|&&x| x > last + SAME).count();
        if below > m || above > m {
            edges_ok = false;
            violations.push(format!("{below} below / {above} above the outermost eigenvalues"));
        }
    }
    let exactly_one_between = (n == 1 && m == 1).then_some(exact_ok);
    if exactly_one_between == Some(false) {
        violations.push("not exactly one eigenvalue between consecutive ones".into());
    }
    let pass = between_ok && block_ok && edges_ok && exactly_one_between.unwrap_or(true);
    InterlaceReport {
        n,
        m,
        window,
        alpha_eigs: alpha_eigs.to_vec(),
        hat_eigs: hat_eigs.to_vec(),
        at_most_m_between: between_ok,
        at_least_one_per_block: block_ok,
        exactly_one_between,
        edges_at_most_m: edges_ok,
        violations,
        pass,
    }
}

/// Scans `[a, b]` for both boundary matrices and compares the eigenvalues.
#[allow(clippy::too_many_arguments)]
pub fn interlace_check<F: MFunction + ?Sized, G: MFunction + ?Sized>(
    mf_alpha: &F,
    mf_hat: &G,
    alpha: &BoundaryMatrix,
    alpha_hat: &BoundaryMatrix,
    a: f64,
    b: f64,
    resolution: usize,
    opts: &ScanOptions,
) -> Result<InterlaceReport> {
    let coupling = linalg::j_right(alpha.matrix()) * alpha_hat.matrix().adjoint();
    let m = linalg::numerical_rank(&coupling, 1e-10);
    let first = scan_spectrum(mf_alpha, a, b, resolution, opts)?;
    let second = scan_spectrum(mf_hat, a, b, resolution, opts)?;
    for map in [&first, &second] {
        let bad = map.count(Verdict::Undetermined) + map.eigenvalues.iter().filter(|e| e.verdict != Verdict::DiscreteEigenvalue).count();
        if bad > 0 {
            return Err(Error::Inconclusive(format!("{bad} undetermined or non-isolated points in [{a}, {b}]")));
        }
    }
    Ok(interlace_from_lists(&first.discrete_eigenvalues(), &second.discrete_eigenvalues(), alpha.n(), m, (a, b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_interlacing() {
        let r = interlace_from_lists(&[1.0, 2.0, 3.0], &[0.5, 1.5, 2.5, 3.5], 1, 1, (0.0, 4.0));
        assert!(r.pass, "{:?}", r.violations);
        let bad = interlace_from_lists(&[1.0, 2.0, 3.0], &[1.2, 1.5, 2.5], 1, 1, (0.0, 4.0));
        assert!(!bad.pass);
    }

    #[test]
    fn identical_lists_with_zero_rank() {
        let r = interlace_from_lists(&[1.0, 2.0], &[1.0, 2.0], 1, 0, (0.0, 3.0));
        assert!(r.pass);
    }
}
