//! Sensitivities and noise scales of the Gaussian-mechanism baselines.

use serde::{Deserialize, Serialize};

/// Classical Gaussian mechanism scale `Δ √(2 ln(1.25/δ)) / ε`. Returns 0 for `ε = ∞`.
pub fn gaussian_sigma(sensitivity: f64, eps: f64, delta: f64) -> f64 {
    if eps.is_infinite() {
        return 0.0;
    }
    sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / eps
}

/// Voltage sensitivity to an admissible change of the admittance matrix:
/// `V_max² √n κ r ‖M̃⁻¹‖_⋆ / V_min`.
pub fn delta2_y(v_min: f64, v_max: f64, n: usize, kappa: f64, r: f64, m_tilde_star: f64) -> f64 {
    v_max * v_max * (n as f64).sqrt() * kappa * r * m_tilde_star / v_min
}

/// Voltage sensitivity to one load entry moving by `Δ_load`: `√2 Δ_load ‖M̃⁻¹‖_⋆ / V_min`.
pub fn delta2_load_v(delta_load: f64, m_tilde_star: f64, v_min: f64) -> f64 {
    std::f64::consts::SQRT_2 * delta_load * m_tilde_star / v_min
}

/// Per-coordinate voltage noise scale over a horizon of `T` samples.
pub fn sigma_voltage(delta2: f64, eps: f64, delta: f64, horizon: usize) -> f64 {
    (horizon as f64).sqrt() * gaussian_sigma(delta2, eps, delta)
}

/// Per-entry noise scale on an `n_L × T` load matrix.
pub fn sigma_load(n_loads: usize, horizon: usize, delta_load: f64, eps: f64, delta: f64) -> f64 {
    ((n_loads * horizon) as f64).sqrt() * gaussian_sigma(delta_load, eps, delta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInputs {
    pub v_min: f64,
    pub v_max: f64,
    pub n: usize,
    pub kappa: f64,
    pub r: f64,
    pub m_tilde_star: f64,
    /// Width of the load range, `p_max − p_min` over all classes.
    pub delta_load: f64,
    pub n_loads: usize,
    pub horizon: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityTable {
    pub delta2_y: f64,
    pub delta2_load_v: f64,
    pub delta2_joint: f64,
    pub sigma_voltage_y: f64,
    pub sigma_voltage_joint: f64,
    pub sigma_load: f64,
}

/// Evaluates every baseline row at budget `(ε, δ)` for the voltage mechanisms and
/// `(ε_load, δ)` for the load mechanism.
pub fn baseline_sensitivities(inp: &SensitivityInputs, eps: f64, eps_load: f64, delta: f64) -> SensitivityTable {
    let dy = delta2_y(inp.v_min, inp.v_max, inp.n, inp.kappa, inp.r, inp.m_tilde_star);
    let dl = delta2_load_v(inp.delta_load, inp.m_tilde_star, inp.v_min);
    let joint = dy.max(dl);
    SensitivityTable {
        delta2_y: dy,
        delta2_load_v: dl,
        delta2_joint: joint,
        sigma_voltage_y: sigma_voltage(dy, eps, delta, inp.horizon),
        sigma_voltage_joint: sigma_voltage(joint, eps.min(eps_load), delta, inp.horizon),
        sigma_load: sigma_load(inp.n_loads, inp.horizon, inp.delta_load, eps_load, delta),
    }
}
