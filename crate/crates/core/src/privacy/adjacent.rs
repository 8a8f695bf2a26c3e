use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::grid::{BusKind, KronReduction};
use crate::linalg::{frobenius, CMatrix, CVector};
use crate::powerflow::BusLayout;
use crate::scalar::{cplx, czero, Real};

/// Most voltage samples used to build the consistency constraints.
pub const MAX_CONSTRAINT_SAMPLES: usize = 8;

#[derive(Clone, Debug)]
pub struct AdjacentPerturbation<T: Real> {
    /// Perturbation of the non-slack power-flow matrix.
    pub dy: CMatrix<T>,
    pub null_dim: usize,
    /// Largest consistency residual at the sample points, relative to `‖ΔY‖_F`.
    pub residual: f64,
}

/// Symmetric perturbation of the reduced matrix with `‖ΔY‖_F = κ r` that
/// leaves the implied injections power-factor consistent at the sampled
/// voltages: at load buses `Im e_k = tan θ_k Re e_k`, elsewhere `e_k = 0`,
/// where `e = v ⊙ conj(ΔY v)`.
///
/// The constraints are linear in `ΔY`, so they are assembled column by
/// column from unit directions and a Gaussian direction is projected onto
/// their numerical null space. This holds the shared-manifold condition to
/// first order only.
pub fn construct_adjacent_y<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    samples: &[CVector<T>],
    r: f64,
    kappa: f64,
    rng: &mut dyn RngCore,
) -> Result<AdjacentPerturbation<T>> {
    if !(r > 0.0) {
        return Err(invalid("adjacency radius must be positive"));
    }
    if samples.is_empty() {
        return Err(invalid("need at least one voltage sample"));
    }
    let n = red.n();
    if layout.len() != n || samples.iter().any(|v| v.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: samples[0].len(),
        });
    }
    let picked: Vec<&CVector<T>> = if samples.len() <= MAX_CONSTRAINT_SAMPLES {
        samples.iter().collect()
    } else {
        (0..MAX_CONSTRAINT_SAMPLES)
            .map(|i| &samples[i * (samples.len() - 1) / (MAX_CONSTRAINT_SAMPLES - 1)])
            .collect()
    };

    let unknowns = n * (n + 1);
    let columns: Vec<DVector<T>> = (0..unknowns)
        .map(|u| {
            let mut x = DVector::zeros(unknowns);
            x[u] = T::one();
            constraints(&unpack(&x, n), layout, &picked)
        })
        .collect();
    let rows = columns[0].len();
    let mut a = DMatrix::<T>::zeros(rows.max(unknowns), unknowns);
    for (c, col) in columns.iter().enumerate() {
        a.view_mut((0, c), (rows, 1)).copy_from(col);
    }

    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let s_max = svd.singular_values.max();
    let rel = T::lit(1e-8).max(T::MACHINE_EPSILON * T::lit(1e3));
    let null: Vec<usize> = (0..unknowns)
        .filter(|&i| svd.singular_values[i] <= rel * s_max || s_max == T::zero())
        .collect();
    if null.is_empty() {
        return Err(Error::EmptyNullSpace);
    }

    let z = DVector::<T>::from_fn(unknowns, |_, _| {
        let g: f64 = StandardNormal.sample(rng);
        T::lit(g)
    });
    let mut x = DVector::<T>::zeros(unknowns);
    for &i in &null {
        let basis = vt.row(i).transpose();
        x += &basis * basis.dot(&z);
    }
    let mut dy = unpack(&x, n);
    let norm = frobenius(&dy);
    if norm == T::zero() {
        return Err(Error::EmptyNullSpace);
    }
    let target = T::lit(kappa * r);
    dy *= cplx(target / norm, T::zero());

    let norm = frobenius(&dy).as_f64();
    let residual = constraints(&dy, layout, &picked).amax().as_f64() / norm;
    Ok(AdjacentPerturbation {
        dy,
        null_dim: null.len(),
        residual,
    })
}

/// Maps `n(n+1)` reals to a symmetric complex matrix, upper triangle row by row,
/// real part then imaginary part.
fn unpack<T: Real>(x: &DVector<T>, n: usize) -> CMatrix<T> {
    let mut m = CMatrix::from_element(n, n, czero());
    let mut u = 0;
    for i in 0..n {
        for j in i..n {
            let z = cplx(x[u], x[u + 1]);
            m[(i, j)] = z;
            m[(j, i)] = z;
            u += 2;
        }
    }
    m
}

fn constraints<T: Real>(dy: &CMatrix<T>, layout: &BusLayout<T>, samples: &[&CVector<T>]) -> DVector<T> {
    let mut out = Vec::new();
    for v in samples {
        let i = dy * *v;
        for k in 0..v.len() {
            let e = v[k] * i[k].conj();
            if layout.kinds[k] == BusKind::Load {
                out.push(e.im - layout.tan_theta[k] * e.re);
            } else {
                out.push(e.re);
                out.push(e.im);
            }
        }
    }
    DVector::from_vec(out)
}
