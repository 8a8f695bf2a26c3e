use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpgrid::grid::{build_admittance, kron_reduce, Bus, BusKind, KronReduction, Line, NetworkModel};
use dpgrid::linalg::{CMatrix, CVector};
use dpgrid::powerflow::{
    evaluate_injection, implied_active_load, load_to_voltage_jacobian, log_volume_factor, solve_powerflow,
    wirtinger_jacobian, BusLayout, InjectionSpec, PowerFlowConfig,
};

/// Radial all-load feeder with `n` non-slack buses.
fn feeder(n: usize, seed: u64) -> (KronReduction<f64>, BusLayout<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = vec![Bus::new("s", BusKind::Slack)];
    let mut lines = Vec::new();
    for k in 1..=n {
        buses.push(Bus::load(format!("b{k}"), 0, rng.random_range(0.0..30.0)));
        let parent = if k == 1 { "s".into() } else { format!("b{}", rng.random_range(1..k)) };
        let g = rng.random_range(10.0..40.0);
        lines.push(Line::new(parent, format!("b{k}"), Complex::new(g, -2.0 * g)));
    }
    let net = NetworkModel {
        buses,
        lines,
        slack_voltage: Complex::new(1.0, 0.0),
        v_min: 0.9,
        v_max: 1.1,
    };
    let red = kron_reduce(&build_admittance(&net).unwrap(), &net).unwrap();
    let layout = BusLayout::new(&net, &red).unwrap();
    (red, layout)
}

fn loads(n: usize, seed: u64, level: f64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    DVector::from_fn(n, |_, _| level * rng.random_range(0.2..1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solution_satisfies_the_injection_equations(n in 1usize..7, seed in any::<u64>(), level in 0.0f64..0.1) {
        let (red, layout) = feeder(n, seed);
        let p = loads(n, seed, level);
        let spec = layout.injection(p.clone(), 0.0).unwrap();
        let cfg = PowerFlowConfig::default();
        let sol = solve_powerflow(&red, &spec, &cfg).unwrap();
        prop_assert!(sol.residual <= cfg.tol);
        let s = evaluate_injection(&red, &sol.v);
        let target = spec.generation(&sol.v) - spec.consumption();
        for k in 0..n {
            prop_assert!((s[k] - target[k]).norm() <= cfg.tol);
        }
        let back = implied_active_load(&red, &sol.v, &spec);
        prop_assert!((back - p).amax() < 1e-8);
    }

    #[test]
    fn jacobian_has_the_conjugate_block_structure(n in 1usize..6, seed in any::<u64>()) {
        let (red, _) = feeder(n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = CVector::from_fn(n, |_, _| Complex::from_polar(rng.random_range(0.9..1.1), rng.random_range(-0.1..0.1)));
        let j = wirtinger_jacobian(&red, &v, None);
        let m = &j.m_tilde;
        for r in 0..n {
            for c in 0..n {
                prop_assert!((m[(n + r, n + c)] - m[(r, c)].conj()).norm() < 1e-12);
                prop_assert!((m[(n + r, c)] - m[(r, n + c)].conj()).norm() < 1e-12);
            }
        }
        let full = j.full();
        for r in 0..2 * n {
            for c in 0..2 * n {
                prop_assert!((full[(r, c)] - j.d_diag[r] * m[(r, c)]).norm() < 1e-12);
            }
        }
    }
}

/// Real map `x ↦ (Re s, Im s)` Jacobian at `v`.
fn real_jacobian(red: &KronReduction<f64>, v: &CVector<f64>) -> DMatrix<f64> {
    wirtinger_jacobian(red, v, None).real_form()
}

/// The volume ratio of two adjacent networks at a shared voltage equals
/// `det(I − W)` with `W = Uᵀ(I − S⁻¹)U`, `S = (I+K)(I+K)ᵀ`, `K = J⁻¹ΔJ`
/// and `U` the left singular vectors of the load-to-voltage map.
#[test]
fn volume_ratio_matches_compressed_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    for trial in 0..40u64 {
        let n = 1 + (trial as usize % 4);
        let (red, layout) = feeder(n, trial);
        let spec = layout.injection(loads(n, trial, 0.08), 0.0).unwrap();
        let v = solve_powerflow(&red, &spec, &PowerFlowConfig::default()).unwrap().v;
        let mut dy = CMatrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        dy = (&dy + dy.transpose()) * Complex::new(0.01, 0.0);
        let red_p = red.perturbed(&dy);

        let lv = log_volume_factor(&red, &v, &spec).unwrap();
        let lvp = log_volume_factor(&red_p, &v, &spec).unwrap();

        let j = real_jacobian(&red, &v);
        let jp = real_jacobian(&red_p, &v);
        let k = j.clone().lu().solve(&(&jp - &j)).unwrap();
        let ik = DMatrix::identity(2 * n, 2 * n) + k;
        let s = &ik * ik.transpose();
        let dg = load_to_voltage_jacobian(&red, &v, &spec).unwrap();
        let u = dg.svd(true, false).u.unwrap();
        let w = u.transpose() * (DMatrix::identity(2 * n, 2 * n) - s.try_inverse().unwrap()) * &u;
        let det = (DMatrix::identity(n, n) - w).determinant();
        let per_step = -0.5 * det.ln();
        assert!((per_step - (lv - lvp)).abs() < 1e-8, "n={n}: {per_step} vs {}", lv - lvp);
        checked += 1;
    }
    assert_eq!(checked, 40);
}

#[test]
fn one_bus_quadratic_in_single_precision() {
    let red = KronReduction::<f32>::from_parts(
        CMatrix::from_element(1, 1, Complex::new(10.0, 0.0)),
        CVector::from_element(1, Complex::new(-10.0, 0.0)),
        0.8,
        1.2,
    )
    .unwrap();
    let spec = InjectionSpec::loads(DVector::from_element(1, 1.0f32), DVector::zeros(1));
    let cfg = PowerFlowConfig { tol: 1e-5f32, ..Default::default() };
    let sol = solve_powerflow(&red, &spec, &cfg).unwrap();
    assert!((sol.v[0].re - 0.887_298_3).abs() < 1e-5);
    assert!(sol.v[0].im.abs() < 1e-5);
}
