use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dpgrid::grid::{
    build_admittance, kron_reduce, kron_reduce_with, recover_zero_voltages, row_sums, schur_eliminate, Bus, BusKind,
    Elimination, Line, NetworkModel,
};
use dpgrid::linalg::CMatrix;
use dpgrid::powerflow::{solve_powerflow, BusLayout, PowerFlowConfig};

/// Radial feeder on `n` buses with bus 0 the slack. About a third of the
/// other buses are zero-injection; the last bus is always a load.
fn feeder(n: usize, seed: u64) -> NetworkModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buses = vec![Bus::new("0", BusKind::Slack)];
    let mut lines = Vec::new();
    for k in 1..n {
        let id = k.to_string();
        if k + 1 < n && rng.random_bool(0.35) {
            buses.push(Bus::new(id.clone(), BusKind::ZeroInjection));
        } else {
            buses.push(Bus::load(id.clone(), 0, rng.random_range(0.0..30.0)));
        }
        let parent = rng.random_range(0..k).to_string();
        let g = rng.random_range(4.0..40.0);
        let mut line = Line::new(parent, id, Complex::new(g, -g * rng.random_range(0.5..3.0)));
        line.shunt_admittance = Complex::new(0.0, rng.random_range(0.0..0.01));
        lines.push(line);
    }
    NetworkModel {
        buses,
        lines,
        slack_voltage: Complex::new(1.0, 0.0),
        v_min: 0.9,
        v_max: 1.1,
    }
}

fn max_diff(a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn admittance_is_symmetric_with_shunt_row_sums(n in 2usize..10, seed in any::<u64>()) {
        let net = feeder(n, seed);
        let y = build_admittance(&net).unwrap();
        prop_assert!(max_diff(&y.matrix, &y.matrix.transpose()) == 0.0);
        let shunts = row_sums(&y.matrix);
        for (i, bus) in net.buses.iter().enumerate() {
            let expect: Complex<f64> = net
                .lines
                .iter()
                .filter(|l| l.from == bus.id || l.to == bus.id)
                .map(|l| l.shunt_admittance)
                .sum();
            prop_assert!((shunts[i] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn elimination_order_does_not_matter(n in 4usize..10, seed in any::<u64>(), split in 1usize..4) {
        let net = feeder(n, seed);
        let y = build_admittance(&net).unwrap().matrix;
        // eliminate the trailing buses (never the slack) in one block or one at a time
        let elim_count = split.min(n - 2);
        let keep: Vec<usize> = (0..n - elim_count).collect();
        let (block, _) = schur_eliminate(&y, &keep, &(n - elim_count..n).collect::<Vec<_>>()).unwrap();
        let mut step = y.clone();
        for m in (n - elim_count..n).rev() {
            let keep_m: Vec<usize> = (0..m).collect();
            step = schur_eliminate(&step, &keep_m, &[m]).unwrap().0;
        }
        let scale = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(max_diff(&block, &step) <= 1e-12 * scale, "{}", max_diff(&block, &step));
    }

    #[test]
    fn kappa_at_least_one(n in 2usize..10, seed in any::<u64>()) {
        let net = feeder(n, seed);
        let red = kron_reduce(&build_admittance(&net).unwrap(), &net).unwrap();
        prop_assert!(red.kappa_kron >= 1.0);
        if red.zero_ids.is_empty() {
            prop_assert_eq!(red.kappa_kron, 1.0);
        }
    }

    #[test]
    fn full_and_reduced_solves_agree(n in 3usize..10, seed in any::<u64>(), level in 0.01f64..0.08) {
        let net = feeder(n, seed);
        let y = build_admittance(&net).unwrap();
        let red = kron_reduce(&y, &net).unwrap();
        let full = kron_reduce_with(&y, &net, Elimination::None).unwrap();
        let layout = BusLayout::new(&net, &red).unwrap();
        let layout_full = BusLayout::new(&net, &full).unwrap();
        let load = |id: &str| level * (1.0 + (id.parse::<f64>().unwrap() * 0.37).sin().abs());
        let p = layout.scatter_loads(&layout.load_buses().iter().map(|&k| load(&layout.ids[k])).collect::<Vec<_>>()).unwrap();
        let pf = layout_full
            .scatter_loads(&layout_full.load_buses().iter().map(|&k| load(&layout_full.ids[k])).collect::<Vec<_>>())
            .unwrap();
        let cfg = PowerFlowConfig::default();
        let vr = solve_powerflow(&red, &layout.injection(p, 0.0).unwrap(), &cfg).unwrap().v;
        let vf = solve_powerflow(&full, &layout_full.injection(pf, 0.0).unwrap(), &cfg).unwrap().v;
        let at = |id: &String| full.bus_ids.iter().position(|b| b == id).unwrap();
        for (k, id) in red.bus_ids.iter().enumerate() {
            prop_assert!((vr[k] - vf[at(id)]).norm() < 1e-8);
        }
        let vz = recover_zero_voltages(&red, &vr).unwrap();
        for (k, id) in red.zero_ids.iter().enumerate() {
            prop_assert!((vz[k] - vf[at(id)]).norm() < 1e-8);
        }
    }
}

#[test]
fn reduction_runs_in_single_precision() {
    let net64 = feeder(8, 3);
    let net32: NetworkModel<f32> = NetworkModel::from_json_str(&net64.to_json_string().unwrap()).unwrap();
    let r64 = kron_reduce(&build_admittance(&net64).unwrap(), &net64).unwrap();
    let r32 = kron_reduce(&build_admittance(&net32).unwrap(), &net32).unwrap();
    assert_eq!(r64.bus_ids, r32.bus_ids);
    let scale = r64.y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for (a, b) in r64.y.iter().zip(r32.y.iter()) {
        assert!((a.re - b.re as f64).abs() < 1e-5 * scale && (a.im - b.im as f64).abs() < 1e-5 * scale);
    }
    assert!((r64.kappa_kron - r32.kappa_kron as f64).abs() < 1e-4 * r64.kappa_kron);
}
