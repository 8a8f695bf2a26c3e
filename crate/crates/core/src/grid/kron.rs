use nalgebra::DVector;
use num_complex::Complex;
use serde::Serialize;

use super::admittance::{components, FullAdmittance};
use super::model::{BusKind, NetworkModel};
use crate::error::{Error, Result};
use crate::linalg::{op_norm, select, CMatrix, CVector};
use crate::scalar::{czero, Real};

/// Result of eliminating the zero-injection buses.
///
/// `y_reduced` and `phi` are indexed by `retained_ids`, which include the
/// slack. The power-flow quantities `y` and `b` drop the slack row and
/// column, so they are indexed by `bus_ids`.
#[derive(Clone, Debug)]
pub struct KronReduction<T: Real> {
    pub y_reduced: CMatrix<T>,
    pub phi: CMatrix<T>,
    pub retained_ids: Vec<String>,
    pub zero_ids: Vec<String>,
    pub slack_pos: usize,
    pub slack_voltage: Complex<T>,
    /// Reduced matrix without the slack row/column.
    pub y: CMatrix<T>,
    /// Constant current offset from the slack, `Y_{k,slack} * v_slack`.
    pub b: CVector<T>,
    /// Non-slack retained bus ids, in the order used by `y`, `b` and every voltage vector.
    pub bus_ids: Vec<String>,
    pub kappa_kron: T,
    /// Regulation band of the good set.
    pub v_min: T,
    pub v_max: T,
}

impl<T: Real> KronReduction<T> {
    /// Builds a reduction directly from a power-flow pair `(Y, b)` with the
    /// slack placed first and no eliminated buses. Handy for small hand-made
    /// instances.
    pub fn from_parts(y: CMatrix<T>, b: CVector<T>, v_min: T, v_max: T) -> Result<Self> {
        let n = y.nrows();
        if y.ncols() != n || b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: b.len() });
        }
        let slack_voltage = Complex::new(T::one(), T::zero());
        let mut y_reduced = CMatrix::from_element(n + 1, n + 1, czero());
        let mut total = czero::<T>();
        for k in 0..n {
            y_reduced[(k + 1, 0)] = b[k];
            y_reduced[(0, k + 1)] = b[k];
            total -= b[k];
            for j in 0..n {
                y_reduced[(k + 1, j + 1)] = y[(k, j)];
            }
        }
        y_reduced[(0, 0)] = total;
        let mut retained_ids = vec!["slack".to_string()];
        let bus_ids: Vec<String> = (1..=n).map(|k| k.to_string()).collect();
        retained_ids.extend(bus_ids.iter().cloned());
        Ok(Self {
            y_reduced,
            phi: CMatrix::from_element(0, n + 1, czero()),
            retained_ids,
            zero_ids: Vec::new(),
            slack_pos: 0,
            slack_voltage,
            y,
            b,
            bus_ids,
            kappa_kron: T::one(),
            v_min,
            v_max,
        })
    }

    /// Number of non-slack retained buses.
    pub fn n(&self) -> usize {
        self.bus_ids.len()
    }

    /// Inserts the slack voltage into a power-flow voltage vector.
    pub fn with_slack(&self, v: &CVector<T>) -> CVector<T> {
        let mut out = Vec::with_capacity(v.len() + 1);
        out.extend(v.iter().take(self.slack_pos).copied());
        out.push(self.slack_voltage);
        out.extend(v.iter().skip(self.slack_pos).copied());
        DVector::from_vec(out)
    }

    /// No-load voltage `-Y^{-1} b`.
    pub fn no_load_voltage(&self) -> Result<CVector<T>> {
        let lu = self.y.clone().lu();
        lu.solve(&(-&self.b)).ok_or(Error::SingularAtPoint)
    }

    /// Copy with `y_reduced` replaced, `y` and `b` rebuilt to match.
    pub fn with_y_reduced(&self, y_reduced: CMatrix<T>) -> Self {
        let mut out = self.clone();
        let (y, b) = split_slack(&y_reduced, self.slack_pos, self.slack_voltage);
        out.y_reduced = y_reduced;
        out.y = y;
        out.b = b;
        out
    }

    /// Copy with the power-flow matrix perturbed by `dy`, leaving the slack
    /// coupling `b` untouched.
    pub fn perturbed(&self, dy: &CMatrix<T>) -> Self {
        let mut out = self.clone();
        out.y = &self.y + dy;
        let nonslack: Vec<usize> = (0..self.retained_ids.len()).filter(|&k| k != self.slack_pos).collect();
        for (a, &i) in nonslack.iter().enumerate() {
            for (c, &j) in nonslack.iter().enumerate() {
                out.y_reduced[(i, j)] = out.y[(a, c)];
            }
        }
        out
    }
}

/// Which buses a reduction eliminates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Elimination {
    /// Every `zero-injection` bus.
    #[default]
    ZeroInjection,
    /// Nothing; zero-injection buses stay as retained buses with zero injection.
    None,
}

pub fn kron_reduce<T: Real>(y_full: &FullAdmittance<T>, network: &NetworkModel<T>) -> Result<KronReduction<T>> {
    kron_reduce_with(y_full, network, Elimination::ZeroInjection)
}

pub fn kron_reduce_with<T: Real>(
    y_full: &FullAdmittance<T>,
    network: &NetworkModel<T>,
    mode: Elimination,
) -> Result<KronReduction<T>> {
    let (keep, elim) = partition(y_full, network, mode)?;
    let (y_reduced, phi) = schur_eliminate(&y_full.matrix, &keep, &elim).map_err(|_| singular_island(y_full, &elim))?;
    let slack = network.slack_index()?;
    let slack_pos = keep.iter().position(|&k| k == slack).expect("slack is retained");
    let (y, b) = split_slack(&y_reduced, slack_pos, network.slack_voltage);
    let retained_ids: Vec<String> = keep.iter().map(|&k| y_full.ids[k].clone()).collect();
    let bus_ids = retained_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != slack_pos)
        .map(|(_, s)| s.clone())
        .collect();
    let kappa_kron = kappa_from_blocks(&y_full.matrix, &keep, &elim)?;
    Ok(KronReduction {
        y_reduced,
        phi,
        retained_ids,
        zero_ids: elim.iter().map(|&k| y_full.ids[k].clone()).collect(),
        slack_pos,
        slack_voltage: network.slack_voltage,
        y,
        b,
        bus_ids,
        kappa_kron,
        v_min: network.v_min,
        v_max: network.v_max,
    })
}

/// `v_z = Φ v_r`. Accepts either the full retained vector (slack included)
/// or a power-flow vector over the non-slack buses.
pub fn recover_zero_voltages<T: Real>(red: &KronReduction<T>, v_r: &CVector<T>) -> Result<CVector<T>> {
    let full;
    let v = if v_r.len() == red.retained_ids.len() {
        v_r
    } else if v_r.len() == red.n() {
        full = red.with_slack(v_r);
        &full
    } else {
        return Err(Error::DimensionMismatch {
            expected: red.retained_ids.len(),
            found: v_r.len(),
        });
    };
    if red.phi.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    Ok(&red.phi * v)
}

/// Kron amplification factor `(1 + ‖Y_RZ‖‖Y_ZZ⁻¹‖)²`.
pub fn kappa_kron<T: Real>(y_full: &FullAdmittance<T>, network: &NetworkModel<T>) -> Result<T> {
    let (keep, elim) = partition(y_full, network, Elimination::ZeroInjection)?;
    kappa_from_blocks(&y_full.matrix, &keep, &elim).map_err(|_| singular_island(y_full, &elim))
}

/// Eliminates `elim` from `y`, returning the Schur complement over `keep`
/// and the recovery map `-Y_ZZ⁻¹ Y_ZR`.
pub fn schur_eliminate<T: Real>(y: &CMatrix<T>, keep: &[usize], elim: &[usize]) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let y_rr = select(y, keep, keep);
    if elim.is_empty() {
        return Ok((y_rr, CMatrix::from_element(0, keep.len(), czero())));
    }
    let y_rz = select(y, keep, elim);
    let y_zr = select(y, elim, keep);
    let y_zz = select(y, elim, elim);
    let lu = y_zz.lu();
    let x = lu.solve(&y_zr).ok_or(Error::SingularAtPoint)?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularAtPoint);
    }
    let reduced = y_rr - &y_rz * &x;
    Ok((reduced, -x))
}

fn partition<T: Real>(
    y_full: &FullAdmittance<T>,
    network: &NetworkModel<T>,
    mode: Elimination,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if y_full.len() != network.buses.len() {
        return Err(Error::DimensionMismatch {
            expected: network.buses.len(),
            found: y_full.len(),
        });
    }
    let mut keep = Vec::new();
    let mut elim = Vec::new();
    for (i, bus) in network.buses.iter().enumerate() {
        if y_full.ids[i] != bus.id {
            return Err(Error::InvalidInput(format!(
                "admittance ordering does not match network at bus `{}`",
                bus.id
            )));
        }
        if mode == Elimination::ZeroInjection && bus.kind == BusKind::ZeroInjection {
            elim.push(i);
        } else {
            keep.push(i);
        }
    }
    Ok((keep, elim))
}

fn kappa_from_blocks<T: Real>(y: &CMatrix<T>, keep: &[usize], elim: &[usize]) -> Result<T> {
    if elim.is_empty() {
        return Ok(T::one());
    }
    let a = op_norm(&select(y, keep, elim));
    let inv = select(y, elim, elim).try_inverse().ok_or(Error::SingularAtPoint)?;
    let b = op_norm(&inv);
    if !b.is_finite() {
        return Err(Error::SingularAtPoint);
    }
    let ab = a * b;
    Ok(T::one() + ab + ab + ab * ab)
}

fn split_slack<T: Real>(y_reduced: &CMatrix<T>, slack_pos: usize, v_slack: Complex<T>) -> (CMatrix<T>, CVector<T>) {
    let idx: Vec<usize> = (0..y_reduced.nrows()).filter(|&k| k != slack_pos).collect();
    let y = select(y_reduced, &idx, &idx);
    let b = DVector::from_iterator(idx.len(), idx.iter().map(|&k| y_reduced[(k, slack_pos)] * v_slack));
    (y, b)
}

// Finds the connected island of zero-injection buses whose block is singular.
fn singular_island<T: Real>(y_full: &FullAdmittance<T>, elim: &[usize]) -> Error {
    let pos = |k: usize| elim.iter().position(|&e| e == k);
    let adj: Vec<Vec<usize>> = elim
        .iter()
        .map(|&i| {
            elim.iter()
                .filter(|&&j| j != i && (y_full.matrix[(i, j)].re != T::zero() || y_full.matrix[(i, j)].im != T::zero()))
                .filter_map(|&j| pos(j))
                .collect()
        })
        .collect();
    let islands = components(&adj);
    let tol = T::lit(1e-13);
    for island in &islands {
        let members: Vec<usize> = island.iter().map(|&p| elim[p]).collect();
        let block = select(&y_full.matrix, &members, &members);
        let sv = crate::linalg::singular_values(&block);
        let hi = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
        let lo = sv.iter().copied().fold(T::INFINITY, |a, b| a.min(b));
        if lo <= tol * hi {
            return Error::SingularZeroBlock {
                island: members.iter().map(|&k| y_full.ids[k].clone()).collect(),
            };
        }
    }
    Error::SingularZeroBlock {
        island: elim.iter().map(|&k| y_full.ids[k].clone()).collect(),
    }
}

/// Network constants derived from the power-flow matrix `Y` and offset `b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkStats<T: Real> {
    pub d_max: usize,
    pub sigma_min_y: T,
    pub flat_mismatch: T,
    pub row_sum_norm: T,
}

/// Degree counts every structurally nonzero entry of a row, diagonal
/// included; entries below `1e-12·‖Y‖_F` are treated as fill-in noise.
pub fn network_stats<T: Real>(red: &KronReduction<T>) -> NetworkStats<T> {
    stats_of(&red.y, &red.b)
}

pub fn stats_of<T: Real>(y: &CMatrix<T>, b: &CVector<T>) -> NetworkStats<T> {
    let n = y.nrows();
    let thresh = T::lit(1e-12) * crate::linalg::frobenius(y);
    let d_max = (0..n)
        .map(|i| (0..n).filter(|&j| crate::scalar::cabs(y[(i, j)]) >= thresh && crate::scalar::cabs(y[(i, j)]) > T::zero()).count())
        .max()
        .unwrap_or(0);
    let ones = CVector::from_element(n, Complex::new(T::one(), T::zero()));
    let mismatch = y * ones + b;
    let row_sum_norm = (0..n)
        .map(|i| y.row(i).iter().map(|z| crate::scalar::cabs(*z)).fold(T::zero(), |a, b| a + b))
        .fold(T::zero(), |a, b| a.max(b));
    NetworkStats {
        d_max,
        sigma_min_y: if n == 0 { T::zero() } else { crate::linalg::sigma_min(y) },
        flat_mismatch: crate::linalg::max_abs(&mismatch),
        row_sum_norm,
    }
}
