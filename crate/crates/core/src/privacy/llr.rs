use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::grid::KronReduction;
use crate::linalg::CVector;
use crate::load::LoadClassModel;
use crate::powerflow::{implied_active_load, log_volume_factor_on, BusLayout};
use crate::scalar::Real;

/// Log-likelihood ratio of one released trajectory under `Y` versus `Y'`,
/// split into the injection term and the Jacobian term.
#[derive(Clone, Debug, PartialEq)]
pub struct LlrTerms {
    pub term1: f64,
    pub term2: f64,
    /// Jacobian term of each time step.
    pub term2_steps: Vec<f64>,
}

impl LlrTerms {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2
    }
}

/// Evaluates `log f_Y(v) − log f_{Y'}(v)` for the trajectory `v[t]`.
///
/// The injection term uses the midpoint form of the log-normal density ratio
/// at each load bus, `Δᵀ Σ⁻¹ (μ − ξ̄) − 1ᵀΔ` with `Δ = ξ − ξ'` and
/// `ξ̄ = (ξ + ξ')/2`; the truncation constant cancels. The Jacobian term is
/// `log vol_{Y'} − log vol_Y`, the volume of the load-to-voltage map entering
/// the pushforward density as a divisor.
pub fn empirical_llr<T: Real>(
    red: &KronReduction<T>,
    red_prime: &KronReduction<T>,
    layout: &BusLayout<T>,
    model: &LoadClassModel<T>,
    voltages: &[CVector<T>],
    irradiance: &[T],
) -> Result<LlrTerms> {
    let horizon = model.horizon();
    if voltages.len() != horizon || irradiance.len() != horizon {
        return Err(invalid("trajectory, irradiance and model horizon must agree"));
    }
    let loads = layout.load_buses();
    let mut classes = Vec::with_capacity(loads.len());
    for &k in &loads {
        let c = model
            .class_of(&layout.ids[k])
            .ok_or_else(|| invalid(format!("load bus `{}` belongs to no class", layout.ids[k])))?;
        classes.push(c);
    }
    let precisions = model
        .classes
        .iter()
        .map(|c| {
            let s = c.sigma_t.map(|x| x.as_f64());
            s.cholesky()
                .map(|ch| ch.inverse())
                .ok_or(Error::IllConditioned { condition: f64::INFINITY })
        })
        .collect::<Result<Vec<DMatrix<f64>>>>()?;

    let n_l = loads.len();
    let mut xi = DMatrix::<f64>::zeros(n_l, horizon);
    let mut xi_p = DMatrix::<f64>::zeros(n_l, horizon);
    let mut term2_steps = Vec::with_capacity(horizon);
    for (t, v) in voltages.iter().enumerate() {
        let spec = layout.injection(DVector::zeros(layout.len()), irradiance[t])?;
        let p = implied_active_load(red, v, &spec);
        let pp = implied_active_load(red_prime, v, &spec);
        for (row, &k) in loads.iter().enumerate() {
            for (val, out) in [(p[k], &mut xi), (pp[k], &mut xi_p)] {
                if !(val > T::zero()) {
                    return Err(Error::NonPositiveImpliedLoad {
                        bus: layout.ids[k].clone(),
                        step: t,
                        value: val.as_f64(),
                    });
                }
                out[(row, t)] = val.as_f64().ln();
            }
        }
        let lv = log_volume_factor_on(red, v, &spec, &loads)?.as_f64();
        let lvp = log_volume_factor_on(red_prime, v, &spec, &loads)?.as_f64();
        term2_steps.push(lvp - lv);
    }

    let mut term1 = 0.0;
    for (row, &c) in classes.iter().enumerate() {
        let mu = model.classes[c].mu.map(|x| x.as_f64());
        let x = xi.row(row).transpose();
        let xp = xi_p.row(row).transpose();
        let d = &x - &xp;
        let mid = (&x + &xp) * 0.5;
        term1 += d.dot(&(&precisions[c] * (mu - mid))) - d.sum();
    }
    Ok(LlrTerms {
        term1,
        term2: term2_steps.iter().sum(),
        term2_steps,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex;

    use super::*;
    use crate::load::LoadClass;
    use crate::powerflow::{solve_powerflow, PowerFlowConfig};

    fn one_bus(y: f64) -> KronReduction<f64> {
        let ym = DMatrix::from_element(1, 1, Complex::new(y, 0.0));
        let b = DVector::from_element(1, Complex::new(-y, 0.0));
        KronReduction::from_parts(ym, b, 0.9, 1.1).unwrap()
    }

    fn model() -> LoadClassModel<f64> {
        LoadClassModel {
            classes: vec![LoadClass {
                mu: DVector::from_vec(vec![-0.9, -1.1]),
                sigma_t: DMatrix::from_row_slice(2, 2, &[0.04, 0.01, 0.01, 0.05]),
                theta_deg: 0.0,
                p_min: 0.1,
                p_max: 1.0,
                members: vec!["1".into()],
                margins_from_data: false,
            }],
        }
    }

    fn trajectory(red: &KronReduction<f64>, layout: &BusLayout<f64>, p: &[f64]) -> Vec<CVector<f64>> {
        p.iter()
            .map(|&x| {
                let spec = layout.injection(DVector::from_element(1, x), 0.0).unwrap();
                solve_powerflow(red, &spec, &PowerFlowConfig::default()).unwrap().v
            })
            .collect()
    }

    fn log_density(x: &DVector<f64>, m: &LoadClassModel<f64>) -> f64 {
        let c = &m.classes[0];
        let prec = c.sigma_t.clone().try_inverse().unwrap();
        let r = x - &c.mu;
        -0.5 * r.dot(&(&prec * &r)) - x.sum()
    }

    #[test]
    fn identical_networks_give_zero() {
        let red = one_bus(10.0);
        let layout = BusLayout::loads_only(DVector::zeros(1));
        let v = trajectory(&red, &layout, &[0.4, 0.3]);
        let l = empirical_llr(&red, &red, &layout, &model(), &v, &[0.0, 0.0]).unwrap();
        assert_eq!(l.term1, 0.0);
        assert_eq!(l.term2, 0.0);
    }

    #[test]
    fn midpoint_matches_density_ratio() {
        let red = one_bus(10.0);
        let dy = DMatrix::from_element(1, 1, Complex::new(0.03, 0.0));
        let red_p = red.perturbed(&dy);
        let layout = BusLayout::loads_only(DVector::zeros(1));
        let v = trajectory(&red, &layout, &[0.4, 0.3]);
        let m = model();
        let l = empirical_llr(&red, &red_p, &layout, &m, &v, &[0.0, 0.0]).unwrap();

        let spec = layout.injection(DVector::zeros(1), 0.0).unwrap();
        let x = DVector::from_iterator(2, v.iter().map(|vt| implied_active_load(&red, vt, &spec)[0].ln()));
        let xp = DVector::from_iterator(2, v.iter().map(|vt| implied_active_load(&red_p, vt, &spec)[0].ln()));
        let direct = log_density(&x, &m) - log_density(&xp, &m);
        assert!((l.term1 - direct).abs() < 1e-8, "{} vs {direct}", l.term1);
        assert!(l.term2 != 0.0);

        let back = empirical_llr(&red_p, &red, &layout, &m, &v, &[0.0, 0.0]).unwrap();
        assert!((back.term1 + l.term1).abs() < 1e-12);
        assert!((back.term2 + l.term2).abs() < 1e-12);
    }

    #[test]
    fn negative_implied_load_is_rejected() {
        let red = one_bus(10.0);
        let layout = BusLayout::loads_only(DVector::zeros(1));
        let v = vec![CVector::from_element(1, Complex::new(1.01, 0.0)); 2];
        assert!(matches!(
            empirical_llr(&red, &red, &layout, &model(), &v, &[0.0, 0.0]),
            Err(Error::NonPositiveImpliedLoad { .. })
        ));
    }
}
