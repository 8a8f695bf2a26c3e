use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::InjectionSpec;
use crate::grid::KronReduction;
use crate::linalg::{sigma_min, CMatrix, CVector};
use crate::scalar::{czero, Real};

/// Injected power `s = v ⊙ conj(Y v + b)` on the reduced network.
pub fn evaluate_injection<T: Real>(red: &KronReduction<T>, v: &CVector<T>) -> CVector<T> {
    let i = &red.y * v + &red.b;
    v.zip_map(&i, |vk, ik| vk * ik.conj())
}

/// Active load implied by a voltage: `Re s_g(v) − Re s(v)`.
pub fn implied_active_load<T: Real>(red: &KronReduction<T>, v: &CVector<T>, pv: &InjectionSpec<T>) -> DVector<T> {
    let s = evaluate_injection(red, v);
    let g = pv.generation(v);
    DVector::from_iterator(s.len(), (0..s.len()).map(|k| g[k].re - s[k].re))
}

/// `J = D(v) M̃` with `D(v) = diag(v, v̄)`.
#[derive(Clone, Debug)]
pub struct WirtingerJacobian<T: Real> {
    pub m_tilde: CMatrix<T>,
    pub d_diag: CVector<T>,
    pub effective: bool,
}

impl<T: Real> WirtingerJacobian<T> {
    pub fn n(&self) -> usize {
        self.d_diag.len() / 2
    }

    /// The full Wirtinger Jacobian `D(v) M̃`.
    pub fn full(&self) -> CMatrix<T> {
        let d = &self.d_diag;
        CMatrix::from_fn(self.m_tilde.nrows(), self.m_tilde.ncols(), |r, c| d[r] * self.m_tilde[(r, c)])
    }

    /// Real `2n × 2n` Jacobian of `(Re s, Im s)` with respect to `(Re v, Im v)`.
    pub fn real_form(&self) -> DMatrix<T> {
        real_representation(&self.full())
    }

    /// `‖M̃⁻¹‖_op = 1/σ_min(M̃)`.
    pub fn inverse_norm(&self) -> T {
        let s = sigma_min(&self.m_tilde);
        if s <= T::zero() {
            T::INFINITY
        } else {
            T::one() / s
        }
    }
}

/// Converts a `2n × 2n` Wirtinger matrix `[[A, B], [B̄, Ā]]` to the real map
/// `[[Re(A+B), −Im(A−B)], [Im(A+B), Re(A−B)]]`.
pub fn real_representation<T: Real>(jw: &CMatrix<T>) -> DMatrix<T> {
    let n = jw.nrows() / 2;
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let (i, j) = (r % n, c % n);
        let a = jw[(i, j)];
        let b = jw[(i, j + n)];
        match (r < n, c < n) {
            (true, true) => (a + b).re,
            (true, false) => -(a - b).im,
            (false, true) => (a + b).im,
            (false, false) => (a - b).re,
        }
    })
}

/// Builds `M̃`; when `pv` carries voltage-dependent generation the correction
/// `D(v)⁻¹ J_Γh` is subtracted and the result is flagged effective.
pub fn wirtinger_jacobian<T: Real>(
    red: &KronReduction<T>,
    v: &CVector<T>,
    pv: Option<&InjectionSpec<T>>,
) -> WirtingerJacobian<T> {
    let n = v.len();
    let i = &red.y * v + &red.b;
    let mut m = CMatrix::from_element(2 * n, 2 * n, czero());
    for r in 0..n {
        m[(r, r)] = i[r].conj() / v[r];
        m[(n + r, n + r)] = i[r] / v[r].conj();
        for c in 0..n {
            m[(r, n + c)] = red.y[(r, c)].conj();
            m[(n + r, c)] = red.y[(r, c)];
        }
    }
    let mut effective = false;
    if let Some(spec) = pv.filter(|s| s.has_voltvar()) {
        let (ag, bg) = spec.generation_derivatives(v);
        for k in 0..n {
            if ag[k] == czero() && bg[k] == czero() {
                continue;
            }
            effective = true;
            let vk = v[k];
            let vkc = vk.conj();
            m[(k, k)] -= ag[k] / vk;
            m[(k, n + k)] -= bg[k] / vk;
            m[(n + k, k)] -= bg[k].conj() / vkc;
            m[(n + k, n + k)] -= ag[k].conj() / vkc;
        }
    }
    let mut d = CVector::from_element(2 * n, czero());
    for k in 0..n {
        d[k] = v[k];
        d[n + k] = v[k].conj();
    }
    WirtingerJacobian {
        m_tilde: m,
        d_diag: d,
        effective,
    }
}

/// Power-flow residual `s(v) − s_g(v) + s_p`.
pub fn mismatch<T: Real>(red: &KronReduction<T>, v: &CVector<T>, spec: &InjectionSpec<T>) -> CVector<T> {
    evaluate_injection(red, v) - spec.generation(v) + spec.consumption()
}

pub(crate) fn split_real<T: Real>(z: &CVector<T>) -> DVector<T> {
    let n = z.len();
    DVector::from_fn(2 * n, |r, _| if r < n { z[r].re } else { z[r - n].im })
}

pub(crate) fn join_complex<T: Real>(x: &DVector<T>) -> CVector<T> {
    let n = x.len() / 2;
    CVector::from_fn(n, |r, _| Complex::new(x[r], x[n + r]))
}
