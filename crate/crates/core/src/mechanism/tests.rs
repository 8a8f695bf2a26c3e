use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use super::*;
use crate::load::{LoadClass, LoadClassModel};

fn feeder() -> (KronReduction<f64>, BusLayout<f64>) {
    let g = Complex::new(6.0, -12.0);
    let y = CMatrix::from_row_slice(2, 2, &[g * 2.0, -g, -g, g]);
    let b = nalgebra::DVector::from_vec(vec![-g, Complex::new(0.0, 0.0)]);
    let red = KronReduction::from_parts(y, b, 0.9, 1.1).unwrap();
    let layout = BusLayout::loads_only(DVector::from_vec(vec![0.2, 0.3]));
    (red, layout)
}

fn model(spread: f64, p_min: f64, p_max: f64) -> LoadClassModel<f64> {
    LoadClassModel {
        classes: vec![LoadClass {
            mu: DVector::from_element(3, 0.4f64.ln()),
            sigma_t: DMatrix::identity(3, 3) * spread,
            theta_deg: 0.0,
            p_min,
            p_max,
            members: vec!["1".into(), "2".into()],
            margins_from_data: false,
        }],
    }
}

#[test]
fn kind_names_round_trip() {
    for k in MechanismKind::ALL {
        assert_eq!(k.name().parse::<MechanismKind>().unwrap(), k);
        assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
    }
    assert!("gauss".parse::<MechanismKind>().is_err());
}

#[test]
fn composition() {
    assert_eq!(compose_budget(3.0, 1e-5, 1), (3.0, 1e-5));
    assert_eq!(compose_budget(25.0, 0.0, 7).0, 175.0);
    assert!(Budget::none(3).eps_total.is_infinite());
}

#[test]
fn collapsed_model_reproduces_deterministic_solve() {
    let (red, layout) = feeder();
    let m = model(1e-20, 0.4 * (1.0 - 1e-9), 0.4 * (1.0 + 1e-9));
    let h = [0.0; 3];
    let pf = PowerFlowConfig::default();
    let sc = Scenario {
        red: &red,
        layout: &layout,
        model: &m,
        irradiance: &h,
        pf: &pf,
    };
    let rel = release_dp_powerflow(&sc, 2, 1.0, 1e-5, 3).unwrap();
    let loads = DMatrix::from_element(2, 3, 0.4);
    let (v, _) = solve_day(&red, &layout, &loads, &h, &pf).unwrap();
    for day in &rel.days {
        assert!((day - &v).iter().all(|z| z.norm() < 1e-8));
    }
    assert_eq!(rel.warnings.out_of_good_set, 0);
    assert_eq!(rel.budget.eps_total, 2.0);
}

#[test]
fn seeded_release_replays() {
    let (red, layout) = feeder();
    let m = model(0.01, 0.2, 0.8);
    let h = [0.0; 3];
    let pf = PowerFlowConfig::default();
    let sc = Scenario {
        red: &red,
        layout: &layout,
        model: &m,
        irradiance: &h,
        pf: &pf,
    };
    let a = release_dp_powerflow(&sc, 4, 1.0, 1e-5, 7).unwrap();
    let b = release_dp_powerflow(&sc, 4, 1.0, 1e-5, 7).unwrap();
    let c = release_dp_powerflow(&sc, 4, 1.0, 1e-5, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.days, c.days);
    let g1 = release_dpgmm_plus_gauss(&sc, 2, 0.01, 1.0, 0.05, 3, 5).unwrap();
    let g2 = release_dpgmm_plus_gauss(&sc, 2, 0.01, 1.0, 0.05, 3, 5).unwrap();
    assert_eq!(g1, g2);
}

fn zero_release(rows: usize, cols: usize) -> MechanismRelease<f64> {
    MechanismRelease {
        kind: MechanismKind::NoiseFree,
        bus_ids: (0..cols).map(|k| k.to_string()).collect(),
        days: vec![CMatrix::zeros(rows, cols)],
        budget: Budget::none(1),
        seed: 0,
        warnings: ReleaseWarnings::default(),
        notes: Vec::new(),
    }
}

#[test]
fn voltage_noise_scale() {
    let base = zero_release(1000, 500);
    let out = release_gaussian_voltage(&base, MechanismKind::DpgmmPlusGauss, 1.0, 1.0, 0.05, 1, 11).unwrap();
    let sigma = (2.0 * 25f64.ln()).sqrt();
    assert!((out.warnings.voltage_sigma.unwrap() - sigma).abs() < 1e-12);
    let n = out.days[0].len() as f64;
    let var = out.days[0].iter().map(|z| z.re * z.re).sum::<f64>() / n;
    assert!((var.sqrt() / sigma - 1.0).abs() < 0.02);
    let two = release_gaussian_voltage(&base, MechanismKind::DpgmmPlusGauss, 1.0, 1.0, 0.05, 2, 11).unwrap();
    assert!((two.warnings.voltage_sigma.unwrap() / sigma - 2f64.sqrt()).abs() < 1e-12);
    let none = release_gaussian_voltage(&base, MechanismKind::DpgmmPlusGauss, 1.0, f64::INFINITY, 0.05, 1, 11).unwrap();
    assert_eq!(none.days, base.days);
}

#[test]
fn joint_uses_larger_sensitivity_and_smaller_budget() {
    let base = zero_release(2, 2);
    let a = release_joint_voltage(&base, 0.3, 0.1, 2.0, 5.0, 0.05, 1, 1).unwrap();
    let b = release_gaussian_voltage(&base, MechanismKind::JointVoltageNoise, 0.3, 2.0, 0.05, 1, 1).unwrap();
    assert_eq!(a.days, b.days);
    let c = release_joint_voltage(&base, 0.02321, 0.14887, 1.0, 0.5, 0.05, 1, 1).unwrap();
    let expect = crate::privacy::sigma_voltage(0.14887, 0.5, 0.05, 1);
    assert!((c.warnings.voltage_sigma.unwrap() - expect).abs() < 1e-15);
}

#[test]
fn noisy_loads_limit_and_clipping() {
    let (red, layout) = feeder();
    let h = [0.0; 3];
    let pf = PowerFlowConfig::default();
    let loads = vec![DMatrix::from_row_slice(2, 3, &[0.3, 0.4, 0.5, 0.2, 0.25, 0.3])];
    let exact = release_noise_free(&red, &layout, &loads, &h, &pf).unwrap();
    let noise = LoadNoise {
        delta_load: 0.6,
        eps_load: f64::INFINITY,
        delta: 1e-5,
        horizon: 3,
        margins: vec![(0.1, 0.7); 2],
    };
    let same = release_noisy_loads_plus_gauss(&red, &layout, &loads, &h, &pf, &noise, 0.01, f64::INFINITY, 1e-5, 2).unwrap();
    assert_eq!(same.days, exact.days);
    assert_eq!(same.warnings.clipped_loads, 0);

    let loud = LoadNoise { eps_load: 0.5, ..noise };
    let out = release_noisy_loads_plus_gauss(&red, &layout, &loads, &h, &pf, &loud, 0.01, f64::INFINITY, 1e-5, 2).unwrap();
    assert!(out.warnings.clipped_loads > 0);
    assert!(out.warnings.load_sigma.unwrap() > 1.0);
}
