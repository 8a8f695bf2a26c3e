//! The proposed release and the Gaussian baselines it is compared with.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::KronReduction;
use crate::linalg::CMatrix;
use crate::load::sample_network_loads;
use crate::powerflow::{solve_powerflow, BusLayout, PowerFlowConfig};
use crate::privacy::{sigma_voltage, Scenario};
use crate::scalar::{cabs, cplx, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    DpPowerflow,
    NoiseFree,
    JointVoltageNoise,
    DpgmmPlusGauss,
    NoisyLoadsPlusGauss,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::DpPowerflow,
        MechanismKind::NoiseFree,
        MechanismKind::JointVoltageNoise,
        MechanismKind::DpgmmPlusGauss,
        MechanismKind::NoisyLoadsPlusGauss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::DpPowerflow => "dp_powerflow",
            MechanismKind::NoiseFree => "noise_free",
            MechanismKind::JointVoltageNoise => "joint_voltage_noise",
            MechanismKind::DpgmmPlusGauss => "dpgmm_plus_gauss",
            MechanismKind::NoisyLoadsPlusGauss => "noisy_loads_plus_gauss",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown mechanism `{s}`")))
    }
}

/// Privacy budget a release was produced under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    #[serde(with = "crate::eval::maybe_inf")]
    pub eps_day: f64,
    pub delta_day: f64,
    #[serde(with = "crate::eval::maybe_inf")]
    pub eps_total: f64,
    pub delta_total: f64,
}

impl Budget {
    pub fn new(eps_day: f64, delta_day: f64, days: usize) -> Self {
        let (eps_total, delta_total) = compose_budget(eps_day, delta_day, days.max(1));
        Self {
            eps_day,
            delta_day,
            eps_total,
            delta_total,
        }
    }

    /// No protection at all.
    pub fn none(days: usize) -> Self {
        Self::new(f64::INFINITY, 0.0, days)
    }
}

/// Basic composition over `days` releases.
pub fn compose_budget(eps_day: f64, delta_day: f64, days: usize) -> (f64, f64) {
    let d = days as f64;
    (d * eps_day, d * delta_day)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReleaseWarnings {
    /// Released steps with some magnitude outside `[V_min, V_max]`, before noise.
    pub out_of_good_set: usize,
    /// Load entries moved by clipping into the margins.
    pub clipped_loads: usize,
    /// Per-coordinate voltage noise scale, if any.
    pub voltage_sigma: Option<f64>,
    /// Per-entry load noise scale, if any.
    pub load_sigma: Option<f64>,
}

/// Voltages of `d` days, each `T × n` with rows in time order and columns in
/// `bus_ids` order.
#[derive(Clone, Debug, PartialEq)]
pub struct MechanismRelease<T: Real> {
    pub kind: MechanismKind,
    pub bus_ids: Vec<String>,
    pub days: Vec<CMatrix<T>>,
    pub budget: Budget,
    pub seed: u64,
    pub warnings: ReleaseWarnings,
    pub notes: Vec<String>,
}

impl<T: Real> MechanismRelease<T> {
    pub fn horizon(&self) -> usize {
        self.days.first().map_or(0, |d| d.nrows())
    }

    /// All magnitudes, day by day, row-major within a day.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.days
            .iter()
            .flat_map(|d| d.transpose().iter().map(|z| cabs(*z).as_f64()).collect::<Vec<_>>())
            .collect()
    }

    /// Magnitudes of one bus over all days.
    pub fn bus_magnitudes(&self, bus: usize) -> Vec<f64> {
        self.days
            .iter()
            .flat_map(|d| d.column(bus).iter().map(|z| cabs(*z).as_f64()).collect::<Vec<_>>())
            .collect()
    }
}

fn day_rng(seed: u64, day: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(day as u64);
    r
}

/// Solves one day of loads (`n × T`) on the true network; returns `T × n`
/// voltages and the number of steps outside the good set.
pub fn solve_day<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    loads: &DMatrix<T>,
    irradiance: &[T],
    pf: &PowerFlowConfig<T>,
) -> Result<(CMatrix<T>, usize)> {
    if loads.nrows() != layout.len() || loads.ncols() != irradiance.len() {
        return Err(Error::DimensionMismatch {
            expected: irradiance.len(),
            found: loads.ncols(),
        });
    }
    let mut out = CMatrix::zeros(loads.ncols(), layout.len());
    let mut outside = 0;
    for t in 0..loads.ncols() {
        let spec = layout.injection(loads.column(t).into_owned(), irradiance[t])?;
        let sol = solve_powerflow(red, &spec, pf)?;
        if !sol.in_good_set {
            outside += 1;
        }
        out.row_mut(t).copy_from(&sol.v.transpose());
    }
    Ok((out, outside))
}

fn solve_days<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    irradiance: &[T],
    pf: &PowerFlowConfig<T>,
    days: usize,
    loads_of: impl Fn(usize) -> Result<DMatrix<T>> + Sync,
) -> Result<(Vec<CMatrix<T>>, usize)> {
    let solved: Vec<(CMatrix<T>, usize)> = (0..days)
        .into_par_iter()
        .map(|d| {
            let loads = loads_of(d)?;
            solve_day(red, layout, &loads, irradiance, pf).map_err(|e| match e {
                Error::NonConvergence { .. } | Error::SingularJacobian { .. } => {
                    invalid(format!("day {d}: power flow failed: {e}"))
                }
                other => other,
            })
        })
        .collect::<Result<_>>()?;
    let outside = solved.iter().map(|s| s.1).sum();
    Ok((solved.into_iter().map(|s| s.0).collect(), outside))
}

/// The proposed mechanism: loads drawn from the fitted model, pushed through
/// the power flow of the true network, no voltage noise. `eps_day` is the
/// accountant's guarantee for one day. Day `d` draws from stream `d` of `seed`.
pub fn release_dp_powerflow<T: Real>(
    sc: &Scenario<'_, T>,
    days: usize,
    eps_day: f64,
    delta: f64,
    seed: u64,
) -> Result<MechanismRelease<T>> {
    if days == 0 {
        return Err(invalid("need at least one day"));
    }
    if sc.irradiance.len() != sc.model.horizon() {
        return Err(invalid("irradiance series length must equal the model horizon"));
    }
    let (voltages, outside) = solve_days(sc.red, sc.layout, sc.irradiance, sc.pf, days, |d| {
        sample_network_loads(sc.model, sc.layout, &mut day_rng(seed, d))
    })?;
    Ok(MechanismRelease {
        kind: MechanismKind::DpPowerflow,
        bus_ids: sc.layout.ids.clone(),
        days: voltages,
        budget: Budget::new(eps_day, delta, days),
        seed,
        warnings: ReleaseWarnings {
            out_of_good_set: outside,
            ..Default::default()
        },
        notes: Vec::new(),
    })
}

/// Power flow on the true network with recorded loads (`n × T` per day).
pub fn release_noise_free<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    loads: &[DMatrix<T>],
    irradiance: &[T],
    pf: &PowerFlowConfig<T>,
) -> Result<MechanismRelease<T>> {
    if loads.is_empty() {
        return Err(invalid("need at least one day of loads"));
    }
    let (voltages, outside) = solve_days(red, layout, irradiance, pf, loads.len(), |d| Ok(loads[d].clone()))?;
    Ok(MechanismRelease {
        kind: MechanismKind::NoiseFree,
        bus_ids: layout.ids.clone(),
        days: voltages,
        budget: Budget::none(loads.len()),
        seed: 0,
        warnings: ReleaseWarnings {
            out_of_good_set: outside,
            ..Default::default()
        },
        notes: Vec::new(),
    })
}

/// Adds i.i.d. `N(0, σ²)` to the real and imaginary part of every voltage,
/// with `σ = √T Δ₂ √(2 ln(1.25/δ)) / ε`. Day `d` uses stream `d` of `seed`.
pub fn release_gaussian_voltage<T: Real>(
    base: &MechanismRelease<T>,
    kind: MechanismKind,
    delta2: f64,
    eps: f64,
    delta: f64,
    horizon: usize,
    seed: u64,
) -> Result<MechanismRelease<T>> {
    check_budget(eps, delta)?;
    let sigma = sigma_voltage(delta2, eps, delta, horizon);
    let days = add_voltage_noise(&base.days, sigma, seed)?;
    let mut warnings = base.warnings.clone();
    warnings.voltage_sigma = Some(sigma);
    Ok(MechanismRelease {
        kind,
        bus_ids: base.bus_ids.clone(),
        days,
        budget: Budget::new(eps, delta, base.days.len()),
        seed,
        warnings,
        notes: base.notes.clone(),
    })
}

/// One Gaussian mechanism on the noise-free voltages covering both the
/// network and the loads: sensitivity `max(Δ₂^Y, Δ₂^load)`, budget `min(ε_load, ε)`.
#[allow(clippy::too_many_arguments)]
pub fn release_joint_voltage<T: Real>(
    noise_free: &MechanismRelease<T>,
    delta2_y: f64,
    delta2_load_v: f64,
    eps: f64,
    eps_load: f64,
    delta: f64,
    horizon: usize,
    seed: u64,
) -> Result<MechanismRelease<T>> {
    let mut out = release_gaussian_voltage(
        noise_free,
        MechanismKind::JointVoltageNoise,
        delta2_y.max(delta2_load_v),
        eps.min(eps_load),
        delta,
        horizon,
        seed,
    )?;
    out.notes
        .push("the single supplied delta covers the one Gaussian invocation".to_string());
    Ok(out)
}

/// The proposed sampling followed by Gaussian voltage noise at `Δ₂^Y`.
/// Loads use `seed`; the voltage noise uses `seed + 1`.
#[allow(clippy::too_many_arguments)]
pub fn release_dpgmm_plus_gauss<T: Real>(
    sc: &Scenario<'_, T>,
    days: usize,
    delta2_y: f64,
    eps: f64,
    delta: f64,
    horizon: usize,
    seed: u64,
) -> Result<MechanismRelease<T>> {
    let base = release_dp_powerflow(sc, days, f64::INFINITY, delta, seed)?;
    let mut out = release_gaussian_voltage(&base, MechanismKind::DpgmmPlusGauss, delta2_y, eps, delta, horizon, seed.wrapping_add(1))?;
    out.seed = seed;
    Ok(out)
}

/// Parameters of the load-noise stage of [`release_noisy_loads_plus_gauss`].
#[derive(Clone, Debug, PartialEq)]
pub struct LoadNoise<T: Real> {
    /// Global load range `Δ_load = p_max − p_min`.
    pub delta_load: f64,
    pub eps_load: f64,
    pub delta: f64,
    /// Samples covered by one budget, the `T` of the noise scales.
    pub horizon: usize,
    /// Clip box per bus of the layout; ignored off the load buses.
    pub margins: Vec<(T, T)>,
}

/// Recorded loads with i.i.d. Gaussian noise per entry, clipped to the margins,
/// solved on the true network, then Gaussian voltage noise at `Δ₂^Y`.
/// Load noise uses `seed`; voltage noise uses `seed + 1`.
#[allow(clippy::too_many_arguments)]
pub fn release_noisy_loads_plus_gauss<T: Real>(
    red: &KronReduction<T>,
    layout: &BusLayout<T>,
    loads: &[DMatrix<T>],
    irradiance: &[T],
    pf: &PowerFlowConfig<T>,
    noise: &LoadNoise<T>,
    delta2_y: f64,
    eps_y: f64,
    delta_y: f64,
    seed: u64,
) -> Result<MechanismRelease<T>> {
    check_budget(noise.eps_load, noise.delta)?;
    if noise.margins.len() != layout.len() {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            found: noise.margins.len(),
        });
    }
    let load_buses = layout.load_buses();
    let horizon = noise.horizon;
    let sigma = crate::privacy::sigma_load(load_buses.len(), horizon, noise.delta_load, noise.eps_load, noise.delta);
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    let mut clipped = 0;
    let noisy: Vec<DMatrix<T>> = loads
        .iter()
        .enumerate()
        .map(|(d, day)| {
            let mut rng = day_rng(seed, d);
            let mut out = day.clone();
            for t in 0..day.ncols() {
                for &k in &load_buses {
                    let (lo, hi) = noise.margins[k];
                    let x = day[(k, t)] + T::lit(normal.sample(&mut rng));
                    let c = x.max(lo).min(hi);
                    if c != x {
                        clipped += 1;
                    }
                    out[(k, t)] = c;
                }
            }
            out
        })
        .collect();
    let base = release_noise_free(red, layout, &noisy, irradiance, pf)?;
    let mut out = release_gaussian_voltage(
        &base,
        MechanismKind::NoisyLoadsPlusGauss,
        delta2_y,
        eps_y,
        delta_y,
        horizon,
        seed.wrapping_add(1),
    )?;
    out.seed = seed;
    out.warnings.clipped_loads = clipped;
    out.warnings.load_sigma = Some(sigma);
    out.budget = Budget::new(eps_y.min(noise.eps_load), delta_y + noise.delta, loads.len());
    Ok(out)
}

fn check_budget(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta must lie in (0, 1)"));
    }
    Ok(())
}

fn add_voltage_noise<T: Real>(days: &[CMatrix<T>], sigma: f64, seed: u64) -> Result<Vec<CMatrix<T>>> {
    if sigma == 0.0 {
        return Ok(days.to_vec());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| invalid(e.to_string()))?;
    Ok(days
        .iter()
        .enumerate()
        .map(|(d, v)| {
            let mut rng = day_rng(seed, d);
            let mut out = v.clone();
            // row-major so the draw order follows time
            for t in 0..v.nrows() {
                for k in 0..v.ncols() {
                    let re = T::lit(normal.sample(&mut rng));
                    let im = T::lit(normal.sample(&mut rng));
                    out[(t, k)] += cplx(re, im);
                }
            }
            out
        })
        .collect())
}

#[cfg(test)]
mod tests;
