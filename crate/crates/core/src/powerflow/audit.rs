use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{solve_powerflow, wirtinger_jacobian, BusLayout, PowerFlowConfig};
use crate::error::Result;
use crate::grid::KronReduction;
use crate::load::LoadClassModel;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltVarCheck {
    pub bus: String,
    pub max_slope: f64,
    /// `1/(γ h_max)`.
    pub limit: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub samples: usize,
    pub solver_failures: usize,
    /// Solutions with every magnitude in `[V_min, V_max]`.
    pub in_good_set: usize,
    /// Smallest `σ_min(J_eff)` over the good-set solutions.
    pub min_sigma_jeff: f64,
    /// Per class, the share of load entries at good-set solutions that sit inside the class margins.
    pub class_in_margin_fraction: Vec<f64>,
    pub voltvar: Vec<VoltVarCheck>,
    pub stability_ok: bool,
    pub voltvar_ok: bool,
    pub seed: u64,
}

/// Samples operating points and checks the stability margin, the loading
/// envelope and volt-var slope compliance.
///
/// Loads are drawn uniformly on `[p_min/2, 3 p_max/2]` of each bus's class and the
/// irradiance uniformly on `[0, h_max]`; only solutions in the good set enter
/// checks (i) and (ii).
pub fn feasibility_audit<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    model: &LoadClassModel<T>,
    h_max: f64,
    cfg: &PowerFlowConfig<T>,
    n_samples: usize,
    seed: u64,
) -> Result<FeasibilityReport> {
    let loads = layout.load_buses();
    let class_of: Vec<Option<usize>> = loads.iter().map(|&k| model.class_of(&layout.ids[k])).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut good = 0;
    let mut min_sigma = f64::INFINITY;
    let mut inside = vec![0usize; model.classes.len()];
    let mut totals = vec![0usize; model.classes.len()];
    for _ in 0..n_samples {
        let mut p = DVector::zeros(layout.len());
        for (i, &k) in loads.iter().enumerate() {
            let (lo, hi) = class_of[i].map_or((0.0, 1.0), |c| {
                let cls = &model.classes[c];
                (0.5 * cls.p_min.as_f64(), 1.5 * cls.p_max.as_f64())
            });
            p[k] = T::lit(rng.random_range(lo..hi));
        }
        let h = T::lit(rng.random_range(0.0..=h_max));
        let spec = layout.injection(p, h)?;
        let sol = match solve_powerflow(red, &spec, cfg) {
            Ok(s) => s,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if !sol.in_good_set {
            continue;
        }
        good += 1;
        let jr = wirtinger_jacobian(red, &sol.v, Some(&spec)).real_form();
        min_sigma = min_sigma.min(jr.singular_values().min().as_f64());
        for (i, &k) in loads.iter().enumerate() {
            if let Some(c) = class_of[i] {
                let cls = &model.classes[c];
                totals[c] += 1;
                if spec.p[k] >= cls.p_min && spec.p[k] <= cls.p_max {
                    inside[c] += 1;
                }
            }
        }
    }
    let voltvar: Vec<VoltVarCheck> = layout
        .pv_buses()
        .into_iter()
        .map(|k| {
            let slope = layout.voltvar[k]
                .as_ref()
                .map_or(0.0, |c| c.max_abs_slope(red.v_min, red.v_max).as_f64());
            let limit = 1.0 / (layout.gamma[k].as_f64() * h_max);
            VoltVarCheck {
                bus: layout.ids[k].clone(),
                max_slope: slope,
                limit,
                pass: slope < limit,
            }
        })
        .collect();
    Ok(FeasibilityReport {
        samples: n_samples,
        solver_failures: failures,
        in_good_set: good,
        min_sigma_jeff: min_sigma,
        class_in_margin_fraction: inside
            .iter()
            .zip(&totals)
            .map(|(&c, &n)| if n == 0 { 0.0 } else { c as f64 / n as f64 })
            .collect(),
        stability_ok: good > 0 && min_sigma > 0.0,
        voltvar_ok: voltvar.iter().all(|c| c.pass),
        voltvar,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;
    use num_complex::Complex;

    use super::*;
    use crate::load::LoadClass;

    fn setup(p_min: f64, p_max: f64) -> (KronReduction<f64>, BusLayout<f64>, LoadClassModel<f64>) {
        let y = DMatrix::from_element(1, 1, Complex::new(10.0, 0.0));
        let b = DVector::from_element(1, Complex::new(-10.0, 0.0));
        let red = KronReduction::from_parts(y, b, 0.95, 1.05).unwrap();
        let layout = BusLayout::loads_only(DVector::zeros(1));
        let model = LoadClassModel {
            classes: vec![LoadClass {
                mu: DVector::zeros(1),
                sigma_t: DMatrix::identity(1, 1),
                theta_deg: 0.0,
                p_min,
                p_max,
                members: vec!["1".into()],
                margins_from_data: false,
            }],
        };
        (red, layout, model)
    }

    #[test]
    fn one_bus_is_stable() {
        let (red, layout, model) = setup(0.1, 0.3);
        let rep = feasibility_audit(&red, &layout, &model, 1.0, &PowerFlowConfig::default(), 200, 4).unwrap();
        assert!(rep.in_good_set > 0);
        assert!(rep.stability_ok && rep.min_sigma_jeff > 0.0);
        assert!(rep.voltvar.is_empty() && rep.voltvar_ok);
        assert!(rep.class_in_margin_fraction[0] < 1.0);
    }

    #[test]
    fn envelope_covering_the_good_set_passes() {
        // every good-set solution of this bus has p below 0.5
        let (red, layout, model) = setup(1e-12, 0.5);
        let rep = feasibility_audit(&red, &layout, &model, 1.0, &PowerFlowConfig::default(), 100, 1).unwrap();
        assert!(rep.in_good_set > 0);
        assert_eq!(rep.class_in_margin_fraction[0], 1.0);
    }
}
