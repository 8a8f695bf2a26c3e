use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dpgrid::eval::reference::{write_reference_inputs, REFERENCE_DAYS};
use dpgrid::eval::{
    class_setup, read_irradiance, read_release, run_sweep, wasserstein1, write_release, ExperimentConfig, PoolMode,
};
use dpgrid::grid::{build_admittance, kron_reduce, network_stats, KronReduction, NetworkModel};
use dpgrid::load::{default_margins, fit_load_model, DpFitConfig, GaussianMomentFitter, LoadClassModel, LoadPanel};
use dpgrid::mechanism::{
    release_dp_powerflow, release_dpgmm_plus_gauss, release_joint_voltage, release_noise_free,
    release_noisy_loads_plus_gauss, LoadNoise, MechanismKind,
};
use dpgrid::powerflow::{feasibility_audit, BusLayout, PowerFlowConfig};
use dpgrid::privacy::{
    account_model, delta2_load_v, delta2_y, m_tilde_for_feeder, mc_calibrate, AccountantNetwork, Accounting,
    AdjacencyParams, MTildeSource, MTildeStar, Scenario,
};
use dpgrid::{Error, Result};

#[derive(Parser)]
#[command(name = "dpgrid", version, about = "Differentially private synthetic voltage phasors for distribution feeders")]
struct Cli {
    /// Seed of every random draw; the config's seed or 0 when absent.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config; supplies file paths and parameters not given as flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kron-reduce a feeder and report the reduction constants.
    Kron {
        #[arg(long)]
        feeder: Option<PathBuf>,
    },
    /// Sample operating points and check the supported regime.
    AuditFeasibility {
        #[arg(long)]
        feeder: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        irradiance: Option<PathBuf>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Fit the per-class log-normal load model.
    Fit {
        #[arg(long)]
        feeder: Option<PathBuf>,
        #[arg(long)]
        loads: Option<PathBuf>,
        /// k-means classes; the feeder's class ids when absent.
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long, value_parser = parse_budget, default_value = "inf")]
        eps_load: f64,
        #[arg(long, default_value_t = 1e-5)]
        delta_load: f64,
    },
    /// Evaluate the privacy guarantee of a fitted model on a feeder.
    PrivacyAudit {
        #[arg(long)]
        feeder: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Worst-case inverse Jacobian norm; the closed-form bound when absent.
        #[arg(long)]
        m_tilde: Option<f64>,
        /// Calibration failure probability added to delta.
        #[arg(long)]
        delta_m: Option<f64>,
        /// Largest irradiance, used by the closed-form bound.
        #[arg(long, default_value_t = 1.0)]
        h_max: f64,
        /// Account for a whole day instead of per sample.
        #[arg(long)]
        per_day: bool,
    },
    /// Monte Carlo calibration of the inverse Jacobian norm.
    Calibrate {
        #[arg(long)]
        feeder: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        irradiance: Option<PathBuf>,
        #[arg(long)]
        r: Option<f64>,
        /// Threshold; the closed-form bound when absent.
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long, default_value_t = 200)]
        trajectories: u64,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
    },
    /// Produce a release and write it as CSV files plus a JSON sidecar.
    Release {
        #[arg(long)]
        mechanism: MechanismKind,
        #[arg(long)]
        feeder: Option<PathBuf>,
        /// Fitted model, for dp_powerflow and dpgmm_plus_gauss.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Historical loads, for the other mechanisms.
        #[arg(long)]
        loads: Option<PathBuf>,
        #[arg(long)]
        irradiance: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        days: usize,
        #[arg(long, value_parser = parse_budget, default_value = "inf")]
        eps: f64,
        #[arg(long, value_parser = parse_budget, default_value = "inf")]
        eps_load: f64,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        m_tilde: Option<f64>,
    },
    /// Wasserstein-1 distance between the voltage magnitudes of two releases.
    Evaluate {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "pooled")]
        pool: Pool,
    },
    /// Run the full experiment described by --config.
    Sweep,
    /// Write the desk-scale reference feeder, loads, irradiance and config.
    Reference {
        #[arg(long, default_value_t = REFERENCE_DAYS)]
        days: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Pool {
    Pooled,
    PerBus,
}

fn parse_budget(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| format!("`{s}` is not a number or `inf`")),
    }
}

fn input(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    cfg: Option<ExperimentConfig>,
}

impl Ctx {
    fn path(&self, flag: Option<PathBuf>, name: &str, pick: fn(&ExperimentConfig) -> &PathBuf) -> Result<PathBuf> {
        flag.or_else(|| self.cfg.as_ref().map(|c| pick(c).clone()))
            .ok_or_else(|| input(format!("--{name} is required without --config")))
    }

    fn feeder(&self, flag: Option<PathBuf>) -> Result<(NetworkModel<f64>, KronReduction<f64>, BusLayout<f64>)> {
        let net = NetworkModel::load(self.path(flag, "feeder", |c| &c.feeder)?)?;
        net.validate()?;
        let red = kron_reduce(&build_admittance(&net)?, &net)?;
        let layout = BusLayout::new(&net, &red)?;
        Ok((net, red, layout))
    }

    fn irradiance(&self, flag: Option<PathBuf>) -> Result<Vec<f64>> {
        read_irradiance(self.path(flag, "irradiance", |c| &c.irradiance)?)
    }

    fn panel(&self, flag: Option<PathBuf>) -> Result<LoadPanel<f64>> {
        let res = self.cfg.as_ref().map_or(15, |c| c.resolution_minutes);
        LoadPanel::from_csv(self.path(flag, "loads", |c| &c.loads)?, res)
    }

    fn r(&self, flag: Option<f64>) -> Result<f64> {
        flag.or(self.cfg.as_ref().map(|c| c.r)).ok_or_else(|| input("--r is required without --config"))
    }

    fn delta(&self, flag: Option<f64>) -> f64 {
        flag.or(self.cfg.as_ref().map(|c| c.delta)).unwrap_or(1e-2)
    }

    fn pf(&self) -> PowerFlowConfig<f64> {
        self.cfg.as_ref().map(|c| c.powerflow.clone()).unwrap_or_default()
    }

    /// Writes JSON to `--out` or stdout.
    fn emit(&self, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

fn m_star(flag: Option<f64>, red: &KronReduction<f64>, layout: &BusLayout<f64>, h_max: f64, r: f64) -> Result<MTildeStar> {
    Ok(match flag {
        Some(value) => MTildeStar {
            value,
            source: MTildeSource::Supplied,
        },
        None => MTildeStar {
            value: m_tilde_for_feeder(red, layout, h_max, r)?,
            source: MTildeSource::ClosedForm,
        },
    })
}

#[derive(Serialize)]
struct KronReport {
    retained_ids: Vec<String>,
    zero_ids: Vec<String>,
    y_reduced: Vec<Vec<[f64; 2]>>,
    phi: Vec<Vec<[f64; 2]>>,
    kappa_kron: f64,
    d_max: usize,
    sigma_min_y: f64,
}

fn complex_rows(m: &dpgrid::linalg::CMatrix<f64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.config.as_deref().map(ExperimentConfig::load).transpose()?;
    let ctx = Ctx {
        seed: cli.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(0),
        out: cli.out,
        cfg,
    };
    match cli.command {
        Command::Kron { feeder } => {
            let (_, red, _) = ctx.feeder(feeder)?;
            let stats = network_stats(&red);
            ctx.emit(&KronReport {
                retained_ids: red.retained_ids.clone(),
                zero_ids: red.zero_ids.clone(),
                y_reduced: complex_rows(&red.y_reduced),
                phi: complex_rows(&red.phi),
                kappa_kron: red.kappa_kron,
                d_max: stats.d_max,
                sigma_min_y: stats.sigma_min_y,
            })
        }
        Command::AuditFeasibility {
            feeder,
            model,
            irradiance,
            samples,
        } => {
            let (_, red, layout) = ctx.feeder(feeder)?;
            let model = LoadClassModel::<f64>::load(model)?;
            let h_max = ctx.irradiance(irradiance)?.into_iter().fold(0.0, f64::max);
            let rep = feasibility_audit(&red, &layout, &model, h_max, &ctx.pf(), samples, ctx.seed)?;
            ctx.emit(&rep)
        }
        Command::Fit {
            feeder,
            loads,
            classes,
            eps_load,
            delta_load,
        } => {
            let (net, _, _) = ctx.feeder(feeder)?;
            let panel = ctx.panel(loads)?;
            let (horizon, margins, base_fit) = match &ctx.cfg {
                Some(c) => (c.horizon, c.margins.clone(), c.fit.clone()),
                None => (96, None, DpFitConfig::default()),
            };
            let classes = classes.or(ctx.cfg.as_ref().and_then(|c| c.classes));
            let (assignment, specs) = class_setup(&net, &panel, horizon, classes, margins.as_deref(), ctx.seed)?;
            let fit = DpFitConfig {
                eps_load,
                delta_load,
                ..base_fit
            };
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let model = fit_load_model(
                &panel,
                &assignment,
                &specs,
                horizon,
                &GaussianMomentFitter { cfg: fit.clone() },
                &fit,
                &mut rng,
            )?;
            let text = model.to_json_string()? + "\n";
            match &ctx.out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::PrivacyAudit {
            feeder,
            model,
            r,
            delta,
            m_tilde,
            delta_m,
            h_max,
            per_day,
        } => {
            let (_, red, layout) = ctx.feeder(feeder)?;
            let model = LoadClassModel::<f64>::load(model)?;
            let r = ctx.r(r)?;
            let params = AdjacencyParams::new(r, ctx.delta(delta))?;
            let star = m_star(m_tilde, &red, &layout, h_max, r)?;
            let accounting = if per_day {
                Accounting::PerDay
            } else {
                ctx.cfg.as_ref().map_or(Accounting::PerSample, |c| c.accounting)
            };
            let net = AccountantNetwork::of(&red, model.horizon());
            let mut rep = account_model(&model, &net, &params, star, accounting)?;
            if let Some(dm) = delta_m {
                rep = rep.with_calibration(dm);
            }
            ctx.emit(&rep)
        }
        Command::Calibrate {
            feeder,
            model,
            irradiance,
            r,
            mu0,
            trajectories,
            confidence,
        } => {
            let (_, red, layout) = ctx.feeder(feeder)?;
            let model = LoadClassModel::<f64>::load(model)?;
            let h = ctx.irradiance(irradiance)?;
            let r = ctx.r(r)?;
            let h_max = h.iter().copied().fold(0.0, f64::max);
            let mu0 = match mu0 {
                Some(m) => m,
                None => m_tilde_for_feeder(&red, &layout, h_max, r)?,
            };
            let pf = ctx.pf();
            let sc = Scenario {
                red: &red,
                layout: &layout,
                model: &model,
                irradiance: &h,
                pf: &pf,
            };
            let rep = mc_calibrate(&sc, mu0, trajectories, confidence, red.kappa_kron, r, ctx.seed)?;
            ctx.emit(&rep)
        }
        Command::Release {
            mechanism,
            feeder,
            model,
            loads,
            irradiance,
            days,
            eps,
            eps_load,
            delta,
            r,
            m_tilde,
        } => release(
            &ctx,
            ReleaseArgs {
                mechanism,
                feeder,
                model,
                loads,
                irradiance,
                days,
                eps,
                eps_load,
                delta,
                r,
                m_tilde,
            },
        ),
        Command::Evaluate { a, b, pool } => {
            let a = read_release(a)?;
            let b = read_release(b)?;
            let pool = match pool {
                Pool::Pooled => PoolMode::Pooled,
                Pool::PerBus => PoolMode::PerBus,
            };
            let w1 = match pool {
                PoolMode::Pooled => wasserstein1(&a.magnitudes(), &b.magnitudes())?,
                PoolMode::PerBus => {
                    if a.bus_ids != b.bus_ids {
                        return Err(input("per-bus comparison needs releases over the same buses"));
                    }
                    let mut acc = 0.0;
                    for k in 0..a.bus_ids.len() {
                        acc += wasserstein1(&a.bus_magnitudes(k), &b.bus_magnitudes(k))?;
                    }
                    acc / a.bus_ids.len() as f64
                }
            };
            #[derive(Serialize)]
            struct Out {
                w1: f64,
                pool: PoolMode,
            }
            ctx.emit(&Out { w1, pool })
        }
        Command::Sweep => {
            let cfg = ctx.cfg.as_ref().ok_or_else(|| input("sweep needs --config"))?;
            let cfg = ExperimentConfig {
                seed: ctx.seed,
                ..cfg.clone()
            };
            let report = run_sweep(&cfg)?;
            let dir = ctx.out.clone().or(cfg.output.clone()).unwrap_or_else(|| PathBuf::from("results"));
            report.write(&dir)?;
            eprintln!(
                "ordering holds at {} of {} budgets; {} runs excluded; written to {}",
                report.ordering_points,
                report.ordering.len(),
                report.excluded_runs,
                dir.display()
            );
            Ok(())
        }
        Command::Reference { days } => {
            let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("data"));
            write_reference_inputs(&dir, days, ctx.seed)?;
            eprintln!("reference inputs written to {}", dir.display());
            Ok(())
        }
    }
}

struct ReleaseArgs {
    mechanism: MechanismKind,
    feeder: Option<PathBuf>,
    model: Option<PathBuf>,
    loads: Option<PathBuf>,
    irradiance: Option<PathBuf>,
    days: usize,
    eps: f64,
    eps_load: f64,
    delta: Option<f64>,
    r: Option<f64>,
    m_tilde: Option<f64>,
}

fn release(ctx: &Ctx, a: ReleaseArgs) -> Result<()> {
    let (_, red, layout) = ctx.feeder(a.feeder)?;
    let h = ctx.irradiance(a.irradiance)?;
    let h_max = h.iter().copied().fold(0.0, f64::max);
    let pf = ctx.pf();
    let delta = ctx.delta(a.delta);
    let seed = ctx.seed;
    let load_model = |p: Option<PathBuf>| -> Result<LoadClassModel<f64>> {
        LoadClassModel::load(p.ok_or_else(|| input(format!("{} needs --model", a.mechanism)))?)
    };
    // historical days over the layout, first `days` of the panel
    let history = || -> Result<(Vec<nalgebra::DMatrix<f64>>, Vec<(f64, f64)>)> {
        let panel = ctx.panel(a.loads.clone())?;
        let rows = layout.load_buses();
        let ids: Vec<String> = rows.iter().map(|&k| layout.ids[k].clone()).collect();
        let panel = panel.select(&ids)?;
        let t = h.len();
        if panel.days(t) < a.days {
            return Err(input(format!("load panel has {} whole days, {} requested", panel.days(t), a.days)));
        }
        let days = (0..a.days)
            .map(|d| {
                let mut m = nalgebra::DMatrix::zeros(layout.len(), t);
                for (i, &k) in rows.iter().enumerate() {
                    for s in 0..t {
                        m[(k, s)] = panel.values[(i, d * t + s)];
                    }
                }
                m
            })
            .collect();
        let (lo, hi) = default_margins(panel.values.iter().copied());
        let margins = (0..layout.len()).map(|_| (lo, hi)).collect();
        Ok((days, margins))
    };
    let rel = match a.mechanism {
        MechanismKind::DpPowerflow | MechanismKind::DpgmmPlusGauss => {
            let model = load_model(a.model)?;
            let r = ctx.r(a.r)?;
            let star = m_star(a.m_tilde, &red, &layout, h_max, r)?;
            let sc = Scenario {
                red: &red,
                layout: &layout,
                model: &model,
                irradiance: &h,
                pf: &pf,
            };
            if a.mechanism == MechanismKind::DpPowerflow {
                let accounting = ctx.cfg.as_ref().map_or(Accounting::PerSample, |c| c.accounting);
                let rep = account_model(
                    &model,
                    &AccountantNetwork::of(&red, model.horizon()),
                    &AdjacencyParams::new(r, delta)?,
                    star,
                    accounting,
                )?;
                release_dp_powerflow(&sc, a.days, rep.epsilon, rep.delta_total, seed)?
            } else {
                let d2y = delta2_y(red.v_min, red.v_max, red.n(), red.kappa_kron, r, star.value);
                release_dpgmm_plus_gauss(&sc, a.days, d2y, a.eps, delta, noise_horizon(ctx, h.len()), seed)?
            }
        }
        MechanismKind::NoiseFree => release_noise_free(&red, &layout, &history()?.0, &h, &pf)?,
        MechanismKind::JointVoltageNoise | MechanismKind::NoisyLoadsPlusGauss => {
            let (days, margins) = history()?;
            let r = ctx.r(a.r)?;
            let star = m_star(a.m_tilde, &red, &layout, h_max, r)?;
            let d2y = delta2_y(red.v_min, red.v_max, red.n(), red.kappa_kron, r, star.value);
            let load_buses = layout.load_buses();
            let (lo, hi) = load_buses.first().map_or((0.0, 1.0), |&k| margins[k]);
            let delta_load = hi - lo;
            let nh = noise_horizon(ctx, h.len());
            if a.mechanism == MechanismKind::JointVoltageNoise {
                let base = release_noise_free(&red, &layout, &days, &h, &pf)?;
                let d2l = delta2_load_v(delta_load, star.value, red.v_min);
                release_joint_voltage(&base, d2y, d2l, a.eps, a.eps_load, delta, nh, seed)?
            } else {
                let noise = LoadNoise {
                    delta_load,
                    eps_load: a.eps_load,
                    delta,
                    horizon: nh,
                    margins,
                };
                release_noisy_loads_plus_gauss(&red, &layout, &days, &h, &pf, &noise, d2y, a.eps, delta, seed)?
            }
        }
    };
    let dir = ctx.out.clone().unwrap_or_else(|| PathBuf::from("release"));
    let sidecar = write_release(&rel, &dir, a.mechanism.name())?;
    eprintln!("release written to {}", sidecar.display());
    Ok(())
}

fn noise_horizon(ctx: &Ctx, horizon: usize) -> usize {
    ctx.cfg.as_ref().map_or(Accounting::PerSample, |c| c.accounting).samples(horizon)
}

fn exit_code(e: &Error) -> u8 {
    if e.is_inadmissible() {
        3
    } else if e.is_input_error() {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
