use serde::{Deserialize, Serialize};

use super::bounds::{
    alpha_param, c_star, chi2_tail_tau, psi_bar, sensitivity_d, term1_bound, term2_bound, ClassTerm,
};
use crate::error::{invalid, Result};

/// Radius and failure probability of physical adjacency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyParams {
    pub r: f64,
    pub delta: f64,
}

impl AdjacencyParams {
    pub fn new(r: f64, delta: f64) -> Result<Self> {
        let p = Self { r, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(invalid("adjacency radius must be a nonnegative number"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MTildeSource {
    ClosedForm,
    MonteCarlo,
    Supplied,
}

/// Worst-case `‖M̃⁻¹‖` over the good set and the adjacency ball, with where it came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MTildeStar {
    pub value: f64,
    pub source: MTildeSource,
}

/// Accountant inputs describing one load class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassInput {
    pub p_min: f64,
    pub p_max: f64,
    pub size: usize,
    /// Precision sum `1ᵀ|Σ⁻¹|1`.
    pub gamma: f64,
    /// `1ᵀΣ1`.
    pub one_sigma_one: f64,
}

/// Network quantities the accountant needs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccountantNetwork {
    pub n: usize,
    pub horizon: usize,
    pub d_max: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub d_ell: f64,
    pub gamma_ell: f64,
    pub size: usize,
    pub one_sigma_one: f64,
    /// `κ r d_ℓ √(γ_ℓ|C_ℓ|) √(1ᵀΣ_ℓ1)`.
    pub bias_contribution: f64,
    pub p_min: f64,
    pub p_max: f64,
}

/// Every intermediate of the guarantee, plus the inputs it was computed from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub epsilon: f64,
    pub delta_total: f64,
    pub alpha: f64,
    pub lambda_bar_ii: f64,
    pub psi_bar: f64,
    pub tau: f64,
    pub bias_b: f64,
    pub term1_bound: f64,
    pub c_star: f64,
    pub classes: Vec<ClassReport>,
    pub m_tilde_star: MTildeStar,
    pub admissible: bool,
    pub params: AdjacencyParams,
    pub network: AccountantNetwork,
    /// Monte Carlo failure probability added to `delta`, if calibration was used.
    pub delta_m: Option<f64>,
    pub notes: Vec<String>,
}

impl PrivacyReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Adds a Monte Carlo calibration failure probability to `delta_total`.
    pub fn with_calibration(mut self, delta_m: f64) -> Self {
        self.delta_total = self.params.delta + delta_m;
        self.delta_m = Some(delta_m);
        self
    }
}

/// `ε = B + ψ̄ τ(δ)` with `B = Λ̄_II + ψ̄²/2 + κr Σ_ℓ d_ℓ√(γ_ℓ|C_ℓ|)√(1ᵀΣ_ℓ1)`.
pub fn epsilon_total(
    params: &AdjacencyParams,
    net: &AccountantNetwork,
    classes: &[ClassInput],
    m_tilde_star: MTildeStar,
) -> Result<PrivacyReport> {
    params.validate()?;
    if classes.is_empty() {
        return Err(invalid("accountant needs at least one load class"));
    }
    if net.n == 0 || net.horizon == 0 {
        return Err(invalid("accountant needs n ≥ 1 and T ≥ 1"));
    }
    let kr = net.kappa * params.r;
    let mut terms = Vec::with_capacity(classes.len());
    let mut class_reports = Vec::with_capacity(classes.len());
    for c in classes {
        let d = sensitivity_d(net.v_max, net.d_max, c.p_min)?;
        let term = ClassTerm {
            d,
            gamma: c.gamma,
            size: c.size,
            one_sigma_one: c.one_sigma_one,
        };
        class_reports.push(ClassReport {
            d_ell: d,
            gamma_ell: c.gamma,
            size: c.size,
            one_sigma_one: c.one_sigma_one,
            bias_contribution: kr * term.linear_bias(),
            p_min: c.p_min,
            p_max: c.p_max,
        });
        terms.push(term);
    }
    let dg: Vec<(f64, f64)> = terms.iter().map(|t| (t.d, t.gamma)).collect();
    let psi = psi_bar(net.kappa, params.r, &dg);
    let tau = chi2_tail_tau(net.n, net.horizon, params.delta);
    let alpha = alpha_param(m_tilde_star.value, net.n, net.v_min, net.v_max, net.kappa, params.r);
    let lambda = term2_bound(alpha, net.n, net.horizon)?;
    let t1 = term1_bound(psi, tau, net.kappa, params.r, &terms);
    let bias = lambda + 0.5 * psi * psi + class_reports.iter().map(|c| c.bias_contribution).sum::<f64>();
    let epsilon = bias + psi * tau;
    let notes = vec![
        "adjacency enforced to first order only; the shared-manifold condition is not certified".to_string(),
        "class covariances are the ones used for sampling (after privatization)".to_string(),
    ];
    Ok(PrivacyReport {
        epsilon,
        delta_total: params.delta,
        alpha,
        lambda_bar_ii: lambda,
        psi_bar: psi,
        tau,
        bias_b: bias,
        term1_bound: t1,
        c_star: c_star(net.n, net.v_min, net.v_max),
        classes: class_reports,
        m_tilde_star,
        admissible: true,
        params: *params,
        network: *net,
        delta_m: None,
        notes,
    })
}
