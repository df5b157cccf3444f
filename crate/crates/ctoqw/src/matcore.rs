//! Dense complex linear algebra in the row-stacking vec convention.
//!
//! `vec` stacks rows, so `vec(A X Bᵀ) = (A ⊗ B) vec(X)` and the map
//! `ρ ↦ B ρ B*` is represented by `sandwich(B) = B ⊗ conj(B)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Relative tolerance used when deciding whether an input is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatError {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("matrix is singular or numerically singular")]
    Singular,
    #[error("non-finite entry encountered")]
    NonFinite,
}

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(n: usize) -> CMat {
    CMat::zeros(n, n)
}

/// Builds a complex matrix from real row-major data.
pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    CMat::from_fn(r, c, |i, j| c64(rows[i][j], 0.0))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    CMat::from_fn(n, n, |i, j| if i == j { c64(values[i], 0.0) } else { C64::default() })
}

fn require_square(m: &CMat) -> Result<usize, MatError> {
    if m.nrows() != m.ncols() {
        return Err(MatError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Row-stacking vectorization: entry `i·d + j` is `m[i, j]`.
pub fn vec(m: &CMat) -> Result<CVec, MatError> {
    let d = require_square(m)?;
    Ok(CVec::from_fn(d * d, |k, _| m[(k / d, k % d)]))
}

pub fn unvec(v: &CVec, d: usize) -> Result<CMat, MatError> {
    if v.len() != d * d {
        return Err(MatError::Dimension(format!("vector of length {} is not {d}x{d}", v.len())));
    }
    Ok(CMat::from_fn(d, d, |i, j| v[i * d + j]))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// `⌈B⌉ = B ⊗ conj(B)`.
pub fn sandwich(b: &CMat) -> Result<CMat, MatError> {
    require_square(b)?;
    Ok(b.kronecker(&b.map(|z| z.conj())))
}

pub fn conj(m: &CMat) -> CMat {
    m.map(|z| z.conj())
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entrywise deviation between `m` and `m*`.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    max_abs(&(m - m.adjoint()))
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    hermitian_deviation(m) <= tol * max_abs(m).max(1.0)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// `(M − M*)/(2i)`, Hermitian for every square `M`.
pub fn anti_hermitian_part(m: &CMat) -> CMat {
    (m - m.adjoint()) * c64(0.0, -0.5)
}

pub fn norm1(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inverse(m: &CMat) -> Result<CMat, MatError> {
    require_square(m)?;
    let inv = m.clone().try_inverse().ok_or(MatError::Singular)?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(MatError::Singular);
    }
    Ok(inv)
}

/// Spectral condition number from singular values; infinite when singular.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigendecomposition of a Hermitian matrix with ascending eigenvalues.
pub fn eig_hermitian(m: &CMat) -> Result<(Vec<f64>, CMat), MatError> {
    let n = require_square(m)?;
    if !is_hermitian(m, HERMITIAN_TOL) {
        return Err(MatError::NotHermitian(hermitian_deviation(m)));
    }
    if n == 0 {
        return Ok((Vec::new(), CMat::zeros(0, 0)));
    }
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Applies a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> C64) -> Result<CMat, MatError> {
    let (values, u) = eig_hermitian(m)?;
    let fd = CMat::from_diagonal(&CVec::from_iterator(values.len(), values.iter().map(|&x| f(x))));
    Ok(&u * fd * u.adjoint())
}

/// Unique positive semidefinite square root.
pub fn sqrt_psd(m: &CMat) -> Result<CMat, MatError> {
    let (values, u) = eig_hermitian(m)?;
    let floor = -1e-10 * max_abs(m).max(1.0);
    if let Some(&bad) = values.iter().find(|&&x| x < floor) {
        return Err(MatError::NotPsd(bad));
    }
    let d = CVec::from_iterator(values.len(), values.iter().map(|&x| c64(x.max(0.0).sqrt(), 0.0)));
    Ok(&u * CMat::from_diagonal(&d) * u.adjoint())
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn inv_sqrt_pd(m: &CMat) -> Result<CMat, MatError> {
    let (values, u) = eig_hermitian(m)?;
    let floor = 1e-14 * max_abs(m).max(1e-300);
    if let Some(&bad) = values.iter().find(|&&x| x <= floor) {
        return Err(MatError::NotPsd(bad));
    }
    let d = CVec::from_iterator(values.len(), values.iter().map(|&x| c64(1.0 / x.sqrt(), 0.0)));
    Ok(&u * CMat::from_diagonal(&d) * u.adjoint())
}

/// Dense matrix exponential (Padé scaling and squaring from nalgebra).
pub fn expm(g: &CMat) -> Result<CMat, MatError> {
    require_square(g)?;
    check_finite(g.iter())?;
    Ok(g.exp())
}

fn check_finite<'a>(mut it: impl Iterator<Item = &'a C64>) -> Result<(), MatError> {
    if it.any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Err(MatError::NonFinite)
    } else {
        Ok(())
    }
}

/// `e^{tG} v` for a dense `G`.
pub fn expm_action(g: &CMat, v: &CVec, t: f64) -> Result<CVec, MatError> {
    require_square(g)?;
    if g.nrows() != v.len() {
        return Err(MatError::Dimension(format!("{}x{} matrix applied to vector of length {}", g.nrows(), g.ncols(), v.len())));
    }
    check_finite(g.iter())?;
    let bound = norm1(g).max(norm_inf(g));
    expm_action_op(|x| g * x, bound, v, t)
}

/// `e^{tG} v` given only the action of `G` and a bound on its 2-norm.
///
/// Taylor series on substeps with `‖hG‖ ≤ 1`, truncated once two
/// consecutive terms fall below unit roundoff relative to the partial sum.
pub fn expm_action_op(apply: impl Fn(&CVec) -> CVec, norm_bound: f64, v: &CVec, t: f64) -> Result<CVec, MatError> {
    check_finite(v.iter())?;
    if t < 0.0 || !t.is_finite() || !norm_bound.is_finite() {
        return Err(MatError::NonFinite);
    }
    if t == 0.0 || norm_bound == 0.0 {
        return Ok(v.clone());
    }
    let steps = (norm_bound * t).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut w = v.clone();
    for _ in 0..steps {
        let mut term = w.clone();
        let mut acc = w.clone();
        let mut small = 0;
        for k in 1..200 {
            term = apply(&term) * c64(h / k as f64, 0.0);
            acc += &term;
            if term.norm() <= 1e-17 * acc.norm().max(f64::MIN_POSITIVE) {
                small += 1;
                if small == 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        w = acc;
        check_finite(w.iter())?;
    }
    Ok(w)
}
