use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::bounds::c_star;
use crate::error::{invalid, Result};
use crate::grid::KronReduction;
use crate::load::{sample_network_loads, LoadClassModel};
use crate::powerflow::{solve_powerflow, wirtinger_jacobian, BusLayout, PowerFlowConfig};
use crate::scalar::Real;

/// One-sided upper Clopper–Pearson bound on a binomial rate after observing
/// `k` successes in `n` trials: the `p` at which `P(X ≤ k) = 1 − c`.
pub fn clopper_pearson_upper(k: u64, n: u64, confidence: f64) -> Result<f64> {
    if n == 0 || k > n {
        return Err(invalid("need 0 ≤ k ≤ n and n ≥ 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid("confidence must lie in (0, 1)"));
    }
    if k == n {
        return Ok(1.0);
    }
    let target = 1.0 - confidence;
    let cdf = |p: f64| Binomial::new(p, n).map(|b| b.cdf(k)).unwrap_or(0.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Threshold after accounting for the adjacency shift: `μ₀/(1 + μ₀ C_⋆ κ r)`.
pub fn shifted_threshold(mu0: f64, c_star: f64, kappa_r: f64) -> f64 {
    if mu0.is_infinite() {
        return if kappa_r > 0.0 { 1.0 / (c_star * kappa_r) } else { f64::INFINITY };
    }
    mu0 / (1.0 + mu0 * c_star * kappa_r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    #[serde(with = "crate::eval::maybe_inf")]
    pub mu0: f64,
    #[serde(with = "crate::eval::maybe_inf")]
    pub mu0_prime: f64,
    pub exceedances: u64,
    pub trials: u64,
    pub delta_m_upper: f64,
    pub confidence: f64,
    /// Trajectories in which a solve failed; each also counts as an exceedance.
    pub solver_failures: u64,
    /// Largest `‖M̃⁻¹‖_op` seen across all solved steps.
    pub max_observed: f64,
    pub seed: u64,
}

/// Counts exceedances of an arbitrary per-trial indicator and bounds the
/// exceedance rate.
pub fn calibrate_indicator(
    trials: u64,
    confidence: f64,
    exceeds: impl Fn(u64) -> bool + Sync,
) -> Result<(u64, f64)> {
    let k = (0..trials).into_par_iter().filter(|&i| exceeds(i)).count() as u64;
    Ok((k, clopper_pearson_upper(k, trials, confidence)?))
}

/// Inputs shared by the Monte Carlo routines that simulate days of the mechanism.
pub struct Scenario<'a, T: Real> {
    pub red: &'a KronReduction<T>,
    pub layout: &'a BusLayout<T>,
    pub model: &'a LoadClassModel<T>,
    pub irradiance: &'a [T],
    pub pf: &'a PowerFlowConfig<T>,
}

/// Draws `n_traj` trajectories of the mechanism and counts those where some
/// step has `‖M̃_eff⁻¹‖_op > μ₀′`. A failed solve counts as an exceedance.
/// Trajectory `i` uses ChaCha stream `i` of `seed`.
pub fn mc_calibrate<T: Real>(
    sc: &Scenario<'_, T>,
    mu0: f64,
    n_traj: u64,
    confidence: f64,
    kappa: f64,
    r: f64,
    seed: u64,
) -> Result<CalibrationResult> {
    if !(mu0 > 0.0) {
        return Err(invalid("mu0 must be positive"));
    }
    if n_traj == 0 {
        return Err(invalid("need at least one trajectory"));
    }
    if sc.irradiance.len() != sc.model.horizon() {
        return Err(invalid("irradiance series length must equal the model horizon"));
    }
    let n = sc.red.n();
    let cs = c_star(n, sc.red.v_min.as_f64(), sc.red.v_max.as_f64());
    let mu0_prime = shifted_threshold(mu0, cs, kappa * r);
    let outcomes: Vec<(bool, bool, f64)> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            trajectory_worst(sc, &mut rng)
                .map(|w| (w > mu0_prime, false, w))
                .unwrap_or((true, true, f64::NAN))
        })
        .collect();
    let k = outcomes.iter().filter(|o| o.0).count() as u64;
    let failures = outcomes.iter().filter(|o| o.1).count() as u64;
    let max_observed = outcomes.iter().map(|o| o.2).filter(|x| x.is_finite()).fold(0.0, f64::max);
    Ok(CalibrationResult {
        mu0,
        mu0_prime,
        exceedances: k,
        trials: n_traj,
        delta_m_upper: clopper_pearson_upper(k, n_traj, confidence)?,
        confidence,
        solver_failures: failures,
        max_observed,
        seed,
    })
}

fn trajectory_worst<T: Real>(sc: &Scenario<'_, T>, rng: &mut ChaCha8Rng) -> Result<f64> {
    let loads = sample_network_loads(sc.model, sc.layout, rng)?;
    let mut worst = 0.0f64;
    for t in 0..loads.ncols() {
        let spec = sc.layout.injection(loads.column(t).into_owned(), sc.irradiance[t])?;
        let sol = solve_powerflow(sc.red, &spec, sc.pf)?;
        let norm = wirtinger_jacobian(sc.red, &sol.v, Some(&spec)).inverse_norm().as_f64();
        worst = worst.max(norm);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn zero_successes_closed_form() {
        let u = clopper_pearson_upper(0, 59, 0.95).unwrap();
        let exact = 1.0 - 0.05f64.powf(1.0 / 59.0);
        assert!((u - exact).abs() < 1e-10, "{u} vs {exact}");
        assert!((u - 0.049_507_609_9).abs() < 1e-9);
        assert_eq!(clopper_pearson_upper(5, 5, 0.95).unwrap(), 1.0);
    }

    #[test]
    fn upper_bound_matches_tail() {
        let u = clopper_pearson_upper(7, 100, 0.9).unwrap();
        let cdf = Binomial::new(u, 100).unwrap().cdf(7);
        assert!((cdf - 0.1).abs() < 1e-9);
    }

    #[test]
    fn threshold_shift() {
        let m = shifted_threshold(2.0, 2.977_291_710_3, 0.01);
        assert!((m - 1.887_601_211_2).abs() < 1e-9);
        assert!((shifted_threshold(f64::INFINITY, 2.0, 0.5) - 1.0).abs() < 1e-15);
        assert!(shifted_threshold(f64::INFINITY, 2.0, 0.0).is_infinite());
    }

    #[test]
    fn planted_rate_is_covered() {
        // indicator with exceedance probability 0.1
        let trials = 4000;
        let (k, upper) = calibrate_indicator(trials, 0.95, |i| {
            let mut r = ChaCha8Rng::seed_from_u64(17);
            r.set_stream(i);
            r.random::<f64>() < 0.1
        })
        .unwrap();
        let rate = k as f64 / trials as f64;
        let se = (0.1f64 * 0.9 / trials as f64).sqrt();
        assert!((rate - 0.1).abs() < 4.0 * se, "{rate}");
        assert!(upper >= 0.1 - 1e-3 && upper < 0.1 + 6.0 * se, "{upper}");
    }
}
