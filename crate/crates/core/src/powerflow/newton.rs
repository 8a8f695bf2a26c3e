use serde::{Deserialize, Serialize};

use super::jacobian::{join_complex, mismatch, split_real, wirtinger_jacobian};
use super::InjectionSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::KronReduction;
use crate::linalg::CVector;
use crate::scalar::{cabs, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Init {
    #[serde(rename = "flat")]
    Flat,
    #[default]
    #[serde(rename = "no-load", alias = "no_load")]
    NoLoad,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct PowerFlowConfig<T> {
    pub tol: T,
    pub max_iter: usize,
    pub init: Init,
    pub damping: T,
}

impl<T: Real> Default for PowerFlowConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 50,
            init: Init::NoLoad,
            damping: T::one(),
        }
    }
}

impl<T: Real> PowerFlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(invalid("power-flow tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter must be at least 1"));
        }
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(invalid("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct VoltageSolution<T: Real> {
    pub v: CVector<T>,
    pub residual: T,
    pub iterations: usize,
    pub in_good_set: bool,
}

const MAX_HALVINGS: usize = 40;

/// Newton–Raphson on `(Re v, Im v)`, started from the no-load point unless
/// configured otherwise. A step that does not reduce the residual 2-norm is
/// halved until it does.
pub fn solve_powerflow<T: Real>(
    red: &KronReduction<T>,
    spec: &InjectionSpec<T>,
    cfg: &PowerFlowConfig<T>,
) -> Result<VoltageSolution<T>> {
    cfg.validate()?;
    if spec.len() != red.n() {
        return Err(Error::DimensionMismatch {
            expected: red.n(),
            found: spec.len(),
        });
    }
    let v0 = match cfg.init {
        Init::NoLoad => red.no_load_voltage()?,
        Init::Flat => CVector::from_element(red.n(), crate::scalar::cone()),
    };
    solve_from(red, spec, cfg, v0)
}

/// Newton from an explicit starting voltage.
pub fn solve_from<T: Real>(
    red: &KronReduction<T>,
    spec: &InjectionSpec<T>,
    cfg: &PowerFlowConfig<T>,
    mut v: CVector<T>,
) -> Result<VoltageSolution<T>> {
    let mut f = mismatch(red, &v, spec);
    let mut res = inf_norm(&f);
    let mut norm2 = f.norm();
    for it in 0..cfg.max_iter {
        if res <= cfg.tol {
            return Ok(finish(red, v, res, it));
        }
        let j = wirtinger_jacobian(red, &v, Some(spec)).real_form();
        let rhs = -split_real(&f);
        let dx = j.lu().solve(&rhs).ok_or(Error::SingularJacobian { iteration: it })?;
        if dx.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularJacobian { iteration: it });
        }
        let dv = join_complex(&dx);
        let mut step = cfg.damping;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &v + &dv * nalgebra::Complex::new(step, T::zero());
            let ft = mismatch(red, &trial, spec);
            let nt = ft.norm();
            if nt.is_finite() && nt < norm2 {
                v = trial;
                f = ft;
                norm2 = nt;
                res = inf_norm(&f);
                accepted = true;
                break;
            }
            step *= T::lit(0.5);
        }
        if !accepted {
            return Err(Error::NonConvergence {
                iterations: it + 1,
                residual: res.as_f64(),
            });
        }
    }
    if res <= cfg.tol {
        return Ok(finish(red, v, res, cfg.max_iter));
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iter,
        residual: res.as_f64(),
    })
}

fn finish<T: Real>(red: &KronReduction<T>, v: CVector<T>, residual: T, iterations: usize) -> VoltageSolution<T> {
    let in_good_set = in_good_set(red, &v);
    VoltageSolution {
        v,
        residual,
        iterations,
        in_good_set,
    }
}

/// Every magnitude inside `[v_min, v_max]`.
pub fn in_good_set<T: Real>(red: &KronReduction<T>, v: &CVector<T>) -> bool {
    v.iter().all(|z| {
        let m = cabs(*z);
        m >= red.v_min && m <= red.v_max
    })
}

fn inf_norm<T: Real>(z: &CVector<T>) -> T {
    crate::linalg::max_abs(z)
}

#[cfg(test)]
mod tests {
    use nalgebra::DVector;
    use num_complex::Complex;

    use super::*;
    use crate::linalg::CMatrix;
    use crate::powerflow::evaluate_injection;

    fn one_bus() -> KronReduction<f64> {
        KronReduction::from_parts(
            CMatrix::from_element(1, 1, Complex::new(10.0, 0.0)),
            CVector::from_element(1, Complex::new(-10.0, 0.0)),
            0.85,
            1.05,
        )
        .unwrap()
    }

    #[test]
    fn quadratic_instance() {
        let red = one_bus();
        let spec = InjectionSpec::loads(DVector::from_element(1, 1.0), DVector::zeros(1));
        let sol = solve_powerflow(&red, &spec, &PowerFlowConfig::default()).unwrap();
        let root = (10.0 + 60f64.sqrt()) / 20.0;
        assert!((sol.v[0] - Complex::new(root, 0.0)).norm() < 1e-9);
        assert!(sol.residual < 1e-10);
        assert!(sol.in_good_set);
        let s = evaluate_injection(&red, &sol.v);
        assert!((s[0] + 1.0).norm() < 1e-10);
    }

    #[test]
    fn zero_load_is_no_load_point() {
        let red = one_bus();
        let spec = InjectionSpec::loads(DVector::zeros(1), DVector::zeros(1));
        let sol = solve_powerflow(&red, &spec, &PowerFlowConfig::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert!((sol.v[0] - Complex::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn beyond_nose_fails() {
        let red = one_bus();
        let spec = InjectionSpec::loads(DVector::from_element(1, 3.0), DVector::zeros(1));
        let err = solve_powerflow(&red, &spec, &PowerFlowConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. } | Error::SingularJacobian { .. }), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = PowerFlowConfig::<f64>::default();
        assert!(cfg.validate().is_ok());
        cfg.damping = 0.0;
        assert!(cfg.validate().is_err());
        cfg.damping = 1.0;
        cfg.max_iter = 0;
        assert!(cfg.validate().is_err());
        let parsed: PowerFlowConfig<f64> = serde_json::from_str(r#"{"init": "flat", "tol": 1e-8}"#).unwrap();
        assert_eq!(parsed.init, Init::Flat);
        assert_eq!(parsed.max_iter, 50);
    }
}
