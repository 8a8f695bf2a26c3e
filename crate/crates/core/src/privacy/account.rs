//! Glue between a fitted load model and the scalar accountant.

use serde::{Deserialize, Serialize};

use super::bounds::precision_sum;
use super::report::{epsilon_total, AccountantNetwork, AdjacencyParams, ClassInput, MTildeStar, PrivacyReport};
use crate::error::{invalid, Result};
use crate::grid::{network_stats, KronReduction};
use crate::load::LoadClassModel;
use crate::scalar::Real;

/// What one unit of the guarantee covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accounting {
    /// Every voltage sample on its own: the horizon is one step and the
    /// worst step of the day is reported.
    #[default]
    PerSample,
    /// The whole day as one release.
    PerDay,
}

impl Accounting {
    /// Number of samples one budget covers for a day of `horizon` steps.
    pub fn samples(self, horizon: usize) -> usize {
        match self {
            Accounting::PerSample => 1,
            Accounting::PerDay => horizon,
        }
    }
}

impl AccountantNetwork {
    pub fn of<T: Real>(red: &KronReduction<T>, horizon: usize) -> Self {
        Self {
            n: red.n(),
            horizon,
            d_max: network_stats(red).d_max,
            v_min: red.v_min.as_f64(),
            v_max: red.v_max.as_f64(),
            kappa: red.kappa_kron.as_f64(),
        }
    }
}

/// Accountant inputs of every class over the full horizon.
pub fn class_inputs<T: Real>(model: &LoadClassModel<T>) -> Result<Vec<ClassInput>> {
    model
        .classes
        .iter()
        .map(|c| {
            Ok(ClassInput {
                p_min: c.p_min.as_f64(),
                p_max: c.p_max.as_f64(),
                size: c.members.len(),
                gamma: precision_sum(&c.sigma_t)?,
                one_sigma_one: c.sigma_t.iter().map(|x| x.as_f64()).sum(),
            })
        })
        .collect()
}

/// Accountant inputs of every class restricted to time step `t`.
pub fn class_inputs_at<T: Real>(model: &LoadClassModel<T>, t: usize) -> Result<Vec<ClassInput>> {
    model
        .classes
        .iter()
        .map(|c| {
            let s = c.sigma_t[(t, t)].as_f64();
            if !(s > 0.0) {
                return Err(invalid(format!("class variance at step {t} is not positive")));
            }
            Ok(ClassInput {
                p_min: c.p_min.as_f64(),
                p_max: c.p_max.as_f64(),
                size: c.members.len(),
                gamma: 1.0 / s,
                one_sigma_one: s,
            })
        })
        .collect()
}

/// Runs the accountant on a fitted model. `net.horizon` is overwritten from
/// the model and the accounting mode.
pub fn account_model<T: Real>(
    model: &LoadClassModel<T>,
    net: &AccountantNetwork,
    params: &AdjacencyParams,
    m_star: MTildeStar,
    accounting: Accounting,
) -> Result<PrivacyReport> {
    let horizon = model.horizon();
    match accounting {
        Accounting::PerDay => {
            let net = AccountantNetwork { horizon, ..*net };
            epsilon_total(params, &net, &class_inputs(model)?, m_star)
        }
        Accounting::PerSample => {
            let net = AccountantNetwork { horizon: 1, ..*net };
            let mut worst: Option<(usize, PrivacyReport)> = None;
            for t in 0..horizon {
                let rep = epsilon_total(params, &net, &class_inputs_at(model, t)?, m_star)?;
                if worst.as_ref().is_none_or(|w| rep.epsilon > w.1.epsilon) {
                    worst = Some((t, rep));
                }
            }
            let (t, mut rep) = worst.ok_or_else(|| invalid("model has an empty horizon"))?;
            rep.notes.push(format!("per-sample accounting; worst step {t}"));
            Ok(rep)
        }
    }
}
