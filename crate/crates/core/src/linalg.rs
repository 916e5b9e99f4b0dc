//! Small dense complex matrix helpers shared by every module.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let cols = rows.first().map_or(0, |row| row.len());
    CMat::from_fn(r, cols, |i, j| c(rows[i][j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c(values[i], 0.0) } else { ZERO })
}

/// The canonical skew matrix `[[0, I], [-I, 0]]` of size 2n.
pub fn j_matrix(n: usize) -> CMat {
    let mut j = zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = ONE;
        j[(n + i, i)] = -ONE;
    }
    j
}

/// `J * m` without a full product: swaps the half blocks of rows.
pub fn j_left(m: &CMat) -> CMat {
    let n = m.nrows() / 2;
    let mut out = zeros(m.nrows(), m.ncols());
    for col in 0..m.ncols() {
        for i in 0..n {
            out[(i, col)] = m[(n + i, col)];
            out[(n + i, col)] = -m[(i, col)];
        }
    }
    out
}

/// `m * J` without a full product.
pub fn j_right(m: &CMat) -> CMat {
    let n = m.ncols() / 2;
    let mut out = zeros(m.nrows(), m.ncols());
    for row in 0..m.nrows() {
        for i in 0..n {
            out[(row, n + i)] = m[(row, i)];
            out[(row, i)] = -m[(row, n + i)];
        }
    }
    out
}

pub fn adjoint(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn fro(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// `(m + m*) / 2`
pub fn re_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// `(m - m*) / (2i)`
pub fn im_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * c(0.0, -0.5)
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let h = re_part(m);
    if h.nrows() == 1 {
        return vec![h[(0, 0)].re];
    }
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

pub fn min_eig(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &CMat) -> f64 {
    hermitian_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Reciprocal 2-norm condition number; 0 for an exactly singular matrix.
pub fn rcond(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return if m[(0, 0)].norm() > 0.0 { 1.0 } else { 0.0 };
    }
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top.max(1.0)).count()
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    if m.nrows() == 1 && m.ncols() == 1 {
        let v = m[(0, 0)];
        return (v.norm() > 0.0).then(|| CMat::from_element(1, 1, v.inv()));
    }
    m.clone().try_inverse()
}

pub fn trace(m: &CMat) -> Complex64 {
    m.trace()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_shortcuts_match_products() {
        let j = j_matrix(2);
        let m = CMat::from_fn(4, 3, |i, k| c(i as f64 + 0.5, k as f64 - 1.0));
        assert!(fro(&(j_left(&m) - &j * &m)) < 1e-15);
        let m2 = CMat::from_fn(3, 4, |i, k| c(i as f64 * 0.3, k as f64 + 2.0));
        assert!(fro(&(j_right(&m2) - &m2 * &j)) < 1e-15);
        assert!(fro(&(&j * &j + identity(4))) < 1e-15);
    }

    #[test]
    fn imaginary_part_of_scalar() {
        let m = CMat::from_element(1, 1, c(2.0, -3.0));
        assert_eq!(im_part(&m)[(0, 0)], c(-3.0, 0.0));
        assert_eq!(re_part(&m)[(0, 0)], c(2.0, 0.0));
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let m = diag_real(&[3.0, -1.0, 2.0]);
        assert_eq!(hermitian_eigenvalues(&m), vec![-1.0, 2.0, 3.0]);
        assert_eq!(min_eig(&m), -1.0);
    }
}
