//! Desk-scale reference feeder with synthetic load and irradiance shapes.
//!
//! Thirty retained buses (slack included) hang off ten zero-injection hubs.
//! Every hub has a short trunk to the substation and three leaf buses
//! (two for the last hub). Six leaves carry PV with a volt-var curve, the
//! rest are loads in three classes.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use std::path::Path;

use super::{write_irradiance, ExperimentConfig};
use crate::error::Result;
use crate::grid::{Bus, BusKind, Line, NetworkModel};
use crate::load::{DpFitConfig, LoadPanel};
use crate::powerflow::VoltVarCurve;

pub const REFERENCE_HORIZON: usize = 96;
pub const REFERENCE_DAYS: usize = 365;
pub const PV_BUSES: [usize; 6] = [5, 10, 14, 19, 23, 28];
const HUBS: usize = 10;
const LEAVES: usize = 29;

/// Power-factor angle of each class, degrees.
pub const CLASS_ANGLES: [f64; 3] = [18.0, 25.0, 30.0];

pub fn reference_voltvar() -> VoltVarCurve<f64> {
    VoltVarCurve::new(vec![(0.92, 0.3), (0.98, 0.0), (1.02, 0.0), (1.08, -0.3)]).expect("valid curve")
}

fn hub_of(leaf: usize) -> usize {
    ((leaf - 1) / 3 + 1).min(HUBS)
}

fn class_of_hub(hub: usize) -> usize {
    match hub {
        1..=4 => 0,
        5..=7 => 1,
        _ => 2,
    }
}

pub fn reference_feeder() -> NetworkModel<f64> {
    let mut buses = vec![Bus::new("0", BusKind::Slack)];
    let mut lines = Vec::new();
    for h in 1..=HUBS {
        buses.push(Bus::new(format!("h{h}"), BusKind::ZeroInjection));
        let r = 0.004 + 0.0005 * (h % 3) as f64;
        lines.push(Line::from_impedance("0", format!("h{h}"), r, 2.0 * r));
    }
    for k in 1..=LEAVES {
        let id = format!("b{k}");
        let hub = hub_of(k);
        if PV_BUSES.contains(&k) {
            buses.push(Bus::pv(id.clone(), 0.15, Some(reference_voltvar())));
        } else {
            let c = class_of_hub(hub);
            buses.push(Bus::load(id.clone(), c, CLASS_ANGLES[c]));
        }
        let r = 0.03 + 0.01 * (k % 3) as f64;
        lines.push(Line::from_impedance(format!("h{hub}"), id, r, 2.0 * r));
    }
    NetworkModel {
        buses,
        lines,
        slack_voltage: Complex::new(1.0, 0.0),
        v_min: 0.95,
        v_max: 1.05,
    }
}

/// Clear-sky half sine between 06:00 and 18:00, peak 1.
pub fn reference_irradiance(horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| {
            let hour = 24.0 * t as f64 / horizon as f64;
            if (6.0..=18.0).contains(&hour) {
                (std::f64::consts::PI * (hour - 6.0) / 12.0).sin().max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-(h - centre).powi(2) / (2.0 * width * width)).exp()
}

/// Mean daily shape of a class in p.u.
pub fn class_shape(class: usize, hour: f64) -> f64 {
    match class {
        0 => 0.07 * (1.0 + 0.6 * bump(hour, 7.5, 1.2) + 1.1 * bump(hour, 19.5, 2.0)),
        1 => {
            let open = 1.0 / (1.0 + (-(hour - 8.0) * 2.0).exp()) - 1.0 / (1.0 + (-(hour - 18.0) * 2.0).exp());
            0.06 + 0.11 * open
        }
        _ => 0.1 + 0.02 * (2.0 * std::f64::consts::PI * hour / 8.0).cos(),
    }
}

/// Load panel of the reference feeder: log-loads are the class shape plus a
/// per-day level and an AR(1) path with coefficient 0.9. Members of a class
/// are exchangeable.
pub fn reference_panel(days: usize, seed: u64) -> LoadPanel<f64> {
    let net = reference_feeder();
    let loads: Vec<(String, usize)> = net
        .buses
        .iter()
        .filter(|b| b.kind == BusKind::Load)
        .map(|b| (b.id.clone(), b.class_id.unwrap_or(0)))
        .collect();
    let t_len = REFERENCE_HORIZON;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = Normal::new(0.0, 0.07).expect("valid normal");
    let innov = Normal::new(0.0, 0.05).expect("valid normal");
    let rho: f64 = 0.9;
    let mut values = DMatrix::zeros(loads.len(), days * t_len);
    for (i, (_, class)) in loads.iter().enumerate() {
        for d in 0..days {
            let lvl = level.sample(&mut rng);
            let mut e = innov.sample(&mut rng) / (1.0 - rho * rho).sqrt();
            for t in 0..t_len {
                let hour = 24.0 * t as f64 / t_len as f64;
                values[(i, d * t_len + t)] = (class_shape(*class, hour).ln() + lvl + e).exp();
                e = rho * e + innov.sample(&mut rng);
            }
        }
    }
    LoadPanel::new(values, loads.into_iter().map(|l| l.0).collect(), 15).expect("positive synthetic loads")
}

/// Sweep settings used for the reference feeder.
pub fn reference_experiment() -> ExperimentConfig {
    ExperimentConfig {
        r: 2e-4,
        fit: DpFitConfig {
            mean_fraction: 0.1,
            cov_fraction: 0.9,
            ..DpFitConfig::default()
        },
        ..ExperimentConfig::default()
    }
}

/// Writes `feeder.json`, `loads.csv`, `irradiance.csv` and `experiment.json`
/// into `dir`. The config refers to the other files by relative path.
pub fn write_reference_inputs(dir: impl AsRef<Path>, days: usize, seed: u64) -> Result<ExperimentConfig> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("feeder.json"), reference_feeder().to_json_string()? + "\n")?;
    reference_panel(days, seed).write_csv(dir.join("loads.csv"))?;
    write_irradiance(dir.join("irradiance.csv"), &reference_irradiance(REFERENCE_HORIZON))?;
    let cfg = ExperimentConfig {
        seed,
        output: Some("results".into()),
        ..reference_experiment()
    };
    std::fs::write(dir.join("experiment.json"), serde_json::to_string_pretty(&cfg)? + "\n")?;
    Ok(cfg)
}
