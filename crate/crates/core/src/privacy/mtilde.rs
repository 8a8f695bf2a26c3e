use super::bounds::c_star;
use crate::error::{Error, Result};
use crate::grid::{network_stats, KronReduction, NetworkStats};
use crate::powerflow::BusLayout;
use crate::scalar::Real;

/// Terms of the analytical bound on `‖M̃⁻¹‖_⋆`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormTerms {
    pub sigma_m: f64,
    pub c3: f64,
    pub delta_inf: f64,
    pub c_vv: f64,
    pub c_star: f64,
    pub denominator: f64,
}

/// `C_vv = h_max / V_min · max_k γ_k ‖φ'_k‖_∞`, zero without volt-var.
pub fn voltvar_constant<T: Real>(layout: &BusLayout<T>, h_max: f64, v_min: f64, v_max: f64) -> f64 {
    let worst = (0..layout.len())
        .filter_map(|k| {
            layout.voltvar[k]
                .as_ref()
                .map(|c| layout.gamma[k].as_f64() * c.max_abs_slope(T::lit(v_min), T::lit(v_max)).as_f64())
        })
        .fold(0.0, f64::max);
    h_max * worst / v_min
}

pub fn closed_form_terms<T: Real>(stats: &NetworkStats<T>, n: usize, v_min: f64, v_max: f64, kappa: f64, r: f64, c_vv: f64) -> ClosedFormTerms {
    let mismatch = stats.flat_mismatch.as_f64();
    let sigma_m = stats.sigma_min_y.as_f64() - mismatch;
    let c3 = (stats.row_sum_norm.as_f64() + mismatch) / v_min;
    let delta_inf = (v_max - 1.0).max(1.0 - v_min).max(0.0);
    let cs = c_star(n, v_min, v_max);
    ClosedFormTerms {
        sigma_m,
        c3,
        delta_inf,
        c_vv,
        c_star: cs,
        denominator: sigma_m - c3 * delta_inf - c_vv - cs * kappa * r,
    }
}

/// `1 / (σ_M̃ − C₃Δ_∞ − C_vv − C_⋆κr)`, where `σ_M̃ = σ_min(Y) − ‖Y1+b‖_∞`.
pub fn m_tilde_closed_form<T: Real>(
    stats: &NetworkStats<T>,
    n: usize,
    v_min: f64,
    v_max: f64,
    kappa: f64,
    r: f64,
    c_vv: f64,
) -> Result<f64> {
    let t = closed_form_terms(stats, n, v_min, v_max, kappa, r, c_vv);
    if !(t.denominator > 0.0) {
        return Err(Error::NonPositiveDenominator {
            denominator: t.denominator,
        });
    }
    Ok(1.0 / t.denominator)
}

/// [`m_tilde_closed_form`] for a reduced feeder with irradiance at most `h_max`.
pub fn m_tilde_for_feeder<T: Real>(red: &KronReduction<T>, layout: &BusLayout<T>, h_max: f64, r: f64) -> Result<f64> {
    let (v_min, v_max) = (red.v_min.as_f64(), red.v_max.as_f64());
    let c_vv = voltvar_constant(layout, h_max, v_min, v_max);
    m_tilde_closed_form(&network_stats(red), red.n(), v_min, v_max, red.kappa_kron.as_f64(), r, c_vv)
}
