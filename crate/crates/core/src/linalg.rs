//! Dense helpers on top of nalgebra used across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::scalar::{cabs, Real};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Gathers `m[rows, cols]` into a new matrix.
pub fn select<T: nalgebra::Scalar + Copy>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn singular_values<T: Real>(m: &CMatrix<T>) -> DVector<T> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Spectral norm; zero for an empty matrix.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    singular_values(m).iter().copied().fold(T::zero(), |a, b| a.max(b))
}

/// Smallest singular value; `+inf` for an empty matrix.
pub fn sigma_min<T: Real>(m: &CMatrix<T>) -> T {
    if m.is_empty() {
        return T::INFINITY;
    }
    singular_values(m)
        .iter()
        .copied()
        .fold(T::INFINITY, |a, b| a.min(b))
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .map(|z| z.re * z.re + z.im * z.im)
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

pub fn max_abs<T: Real>(v: &CVector<T>) -> T {
    v.iter().map(|z| cabs(*z)).fold(T::zero(), |a, b| a.max(b))
}

/// Ratio of extreme singular values; `+inf` when the matrix is singular.
pub fn condition_number<T: Real>(m: &CMatrix<T>) -> T {
    let sv = singular_values(m);
    let hi = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let lo = sv.iter().copied().fold(T::INFINITY, |a, b| a.min(b));
    if lo <= T::zero() {
        T::INFINITY
    } else {
        hi / lo
    }
}

pub fn conj<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    m.map(|z| z.conj())
}

pub fn to_complex<T: Real>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}
