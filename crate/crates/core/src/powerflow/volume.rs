use nalgebra::DMatrix;

use super::jacobian::wirtinger_jacobian;
use super::InjectionSpec;
use crate::error::{Error, Result};
use crate::grid::KronReduction;
use crate::linalg::CVector;
use crate::scalar::Real;

/// Derivative of the voltage with respect to the active loads,
/// `DG = −J_eff⁻¹ R` with `R = [I; diag(tan θ)]`, in `(Re v, Im v)` rows.
pub fn load_to_voltage_jacobian<T: Real>(
    red: &KronReduction<T>,
    v: &CVector<T>,
    spec: &InjectionSpec<T>,
) -> Result<DMatrix<T>> {
    let n = v.len();
    let j = wirtinger_jacobian(red, v, Some(spec)).real_form();
    let r = DMatrix::from_fn(2 * n, n, |row, col| {
        if row < n {
            if row == col {
                T::one()
            } else {
                T::zero()
            }
        } else if row - n == col {
            spec.tan_theta[col]
        } else {
            T::zero()
        }
    });
    let x = j.lu().solve(&r).ok_or(Error::SingularAtPoint)?;
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::SingularAtPoint);
    }
    Ok(-x)
}

/// `log √det(DGᵀ DG)`, from the diagonal of the QR factor of `DG`.
pub fn log_volume_factor<T: Real>(red: &KronReduction<T>, v: &CVector<T>, spec: &InjectionSpec<T>) -> Result<T> {
    log_det_gram(load_to_voltage_jacobian(red, v, spec)?)
}

/// As [`log_volume_factor`] with only the listed buses' loads free to vary.
pub fn log_volume_factor_on<T: Real>(
    red: &KronReduction<T>,
    v: &CVector<T>,
    spec: &InjectionSpec<T>,
    buses: &[usize],
) -> Result<T> {
    log_det_gram(load_to_voltage_jacobian(red, v, spec)?.select_columns(buses))
}

fn log_det_gram<T: Real>(dg: DMatrix<T>) -> Result<T> {
    let r = dg.qr().r();
    let mut acc = T::zero();
    for k in 0..r.nrows().min(r.ncols()) {
        let d = r[(k, k)].abs();
        if d == T::zero() {
            return Err(Error::SingularAtPoint);
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Surface volume factor `|J_Y(v)| = √det(DGᵀ DG)`.
pub fn volume_factor<T: Real>(red: &KronReduction<T>, v: &CVector<T>, spec: &InjectionSpec<T>) -> Result<T> {
    Ok(log_volume_factor(red, v, spec)?.exp())
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;
    use num_complex::Complex;

    use super::*;
    use crate::linalg::CMatrix;
    use crate::powerflow::{solve_powerflow, PowerFlowConfig};

    #[test]
    fn one_bus_matches_finite_difference() {
        let red = KronReduction::from_parts(
            CMatrix::from_element(1, 1, Complex::new(10.0, -4.0)),
            CVector::from_element(1, Complex::new(-10.0, 4.0)),
            0.9,
            1.1,
        )
        .unwrap();
        let cfg = PowerFlowConfig::default();
        let solve = |p: f64| {
            let spec = InjectionSpec::loads(DVector::from_element(1, p), DVector::zeros(1));
            solve_powerflow(&red, &spec, &cfg).unwrap().v[0]
        };
        let p = 0.6;
        let spec = InjectionSpec::loads(DVector::from_element(1, p), DVector::zeros(1));
        let v = CVector::from_element(1, solve(p));
        let h = 1e-6;
        let d = (solve(p + h) - solve(p - h)) / (2.0 * h);
        let fd = (d.re * d.re + d.im * d.im).sqrt();
        let vol = volume_factor(&red, &v, &spec).unwrap();
        assert!((vol - fd).abs() < 1e-6 * fd, "{vol} vs {fd}");
    }
}
