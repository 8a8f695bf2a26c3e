use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LoadClass, LoadClassModel, LoadPanel};
use crate::error::{invalid, Result};
use crate::privacy::gaussian_sigma;
use crate::scalar::Real;

/// Settings of the differentially private moment fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DpFitConfig {
    /// Total budget of the fit; `f64::INFINITY` disables noise.
    #[serde(with = "crate::eval::maybe_inf")]
    pub eps_load: f64,
    pub delta_load: f64,
    /// Clip box in log space. When absent the class margins are used.
    pub clip: Option<(f64, f64)>,
    pub mean_fraction: f64,
    pub cov_fraction: f64,
    pub eig_floor: f64,
}

impl Default for DpFitConfig {
    fn default() -> Self {
        Self {
            eps_load: 1.0,
            delta_load: 1e-5,
            clip: None,
            mean_fraction: 0.5,
            cov_fraction: 0.5,
            eig_floor: 1e-6,
        }
    }
}

impl DpFitConfig {
    pub fn non_private() -> Self {
        Self {
            eps_load: f64::INFINITY,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_load > 0.0) {
            return Err(invalid("eps_load must be positive"));
        }
        if !(self.delta_load > 0.0 && self.delta_load < 1.0) {
            return Err(invalid("delta_load must lie in (0, 1)"));
        }
        if self.mean_fraction < 0.0 || self.cov_fraction < 0.0 || (self.mean_fraction + self.cov_fraction - 1.0).abs() > 1e-12 {
            return Err(invalid("budget split fractions must be nonnegative and sum to 1"));
        }
        if let Some((lo, hi)) = self.clip {
            if !(lo < hi) {
                return Err(invalid("clip bounds must satisfy lo < hi"));
            }
        }
        if !(self.eig_floor > 0.0) {
            return Err(invalid("eigenvalue floor must be positive"));
        }
        Ok(())
    }
}

/// Fits `(μ, Σ_T)` to the log-profiles of one class.
pub trait LoadModelFitter<T: Real> {
    fn fit(&self, log_profiles: &[DVector<T>], clip: (T, T), rng: &mut dyn RngCore) -> Result<(DVector<T>, DMatrix<T>)>;
}

/// Gaussian mechanism on the clipped first and second moments, followed by a
/// projection of the covariance onto `{Σ : λ_min(Σ) ≥ floor}`.
///
/// With `m` profiles in a clip box of diameter `D = (hi − lo)√T`, the mean has
/// L2 sensitivity `D/m` and the second moment about the box centre `D²/(2m)`.
/// The mean noise (`T` draws) is drawn before the upper-triangular covariance
/// noise (row-major, diagonal included).
#[derive(Clone, Debug)]
pub struct GaussianMomentFitter {
    pub cfg: DpFitConfig,
}

impl<T: Real> LoadModelFitter<T> for GaussianMomentFitter {
    fn fit(&self, log_profiles: &[DVector<T>], clip: (T, T), rng: &mut dyn RngCore) -> Result<(DVector<T>, DMatrix<T>)> {
        let cfg = &self.cfg;
        cfg.validate()?;
        let m = log_profiles.len();
        if m < 2 {
            return Err(invalid("fitting a class needs at least two profiles"));
        }
        let t = log_profiles[0].len();
        if log_profiles.iter().any(|p| p.len() != t) {
            return Err(invalid("profiles of one class must share a horizon"));
        }
        let (lo, hi) = clip;
        if !(lo < hi) {
            return Err(invalid("clip bounds must satisfy lo < hi"));
        }
        let center = (lo + hi) * T::lit(0.5);
        let mf = T::from_usize_lossy(m);
        let clipped: Vec<DVector<T>> = log_profiles.iter().map(|p| p.map(|x| x.max(lo).min(hi))).collect();
        let mut mean = clipped.iter().fold(DVector::zeros(t), |a, p| a + p) / mf;
        let mut second = clipped.iter().fold(DMatrix::zeros(t, t), |a, p| {
            let d = p.add_scalar(-center);
            a + &d * d.transpose()
        }) / mf;

        if cfg.eps_load.is_finite() {
            let diam = (hi - lo).as_f64() * (t as f64).sqrt();
            let sd_mean = gaussian_sigma(diam / m as f64, cfg.eps_load * cfg.mean_fraction, cfg.delta_load * cfg.mean_fraction);
            let sd_cov = gaussian_sigma(
                diam * diam / (2.0 * m as f64),
                cfg.eps_load * cfg.cov_fraction,
                cfg.delta_load * cfg.cov_fraction,
            );
            for i in 0..t {
                let z: f64 = StandardNormal.sample(rng);
                mean[i] += T::lit(z * sd_mean);
            }
            for i in 0..t {
                for j in i..t {
                    let z: f64 = StandardNormal.sample(rng);
                    let e = T::lit(z * sd_cov);
                    second[(i, j)] += e;
                    if i != j {
                        second[(j, i)] += e;
                    }
                }
            }
        }
        let dm = mean.add_scalar(-center);
        let cov = second - &dm * dm.transpose();
        Ok((mean, project_psd(&cov, T::lit(cfg.eig_floor))))
    }
}

/// Convenience wrapper around [`GaussianMomentFitter`].
pub fn fit_dp_gaussian<T: Real>(
    log_profiles: &[DVector<T>],
    cfg: &DpFitConfig,
    clip: (T, T),
    rng: &mut dyn RngCore,
) -> Result<(DVector<T>, DMatrix<T>)> {
    GaussianMomentFitter { cfg: cfg.clone() }.fit(log_profiles, clip, rng)
}

/// Symmetrizes and clamps eigenvalues from below.
pub fn project_psd<T: Real>(m: &DMatrix<T>, floor: T) -> DMatrix<T> {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&vals) * q.transpose();
    (&out + out.transpose()) * T::lit(0.5)
}

/// Margins used when the feeder study does not supply them: the observed
/// class range widened by 10% on each side.
pub fn default_margins<T: Real>(values: impl Iterator<Item = T>) -> (T, T) {
    let (lo, hi) = values.fold((T::INFINITY, T::zero()), |(lo, hi), x| (lo.min(x), hi.max(x)));
    (lo * T::lit(0.9), hi * T::lit(1.1))
}

/// Per-class inputs besides the data.
#[derive(Clone, Debug)]
pub struct ClassSpec<T: Real> {
    pub theta_deg: T,
    pub margins: Option<(T, T)>,
}

/// Fits every class of a partitioned panel. `assignment[i]` is the class of
/// panel row `i`; each daily profile of each member bus is one record.
pub fn fit_load_model<T: Real>(
    panel: &LoadPanel<T>,
    assignment: &[usize],
    specs: &[ClassSpec<T>],
    horizon: usize,
    fitter: &dyn LoadModelFitter<T>,
    cfg: &DpFitConfig,
    rng: &mut dyn RngCore,
) -> Result<LoadClassModel<T>> {
    if assignment.len() != panel.n_buses() {
        return Err(invalid("class assignment does not cover the panel"));
    }
    if panel.days(horizon) == 0 {
        return Err(invalid("load panel is shorter than one horizon"));
    }
    let n_classes = specs.len();
    let mut classes = Vec::with_capacity(n_classes);
    for (c, spec) in specs.iter().enumerate() {
        let rows: Vec<usize> = (0..panel.n_buses()).filter(|&i| assignment[i] == c).collect();
        if rows.is_empty() {
            return Err(invalid(format!("class {c} has no member buses")));
        }
        let profiles: Vec<DVector<T>> = rows.iter().flat_map(|&i| panel.profiles(i, horizon)).collect();
        let (margins, from_data) = match spec.margins {
            Some(m) => (m, false),
            None => (default_margins(profiles.iter().flat_map(|p| p.iter().copied())), true),
        };
        let clip = cfg
            .clip
            .map(|(a, b)| (T::lit(a), T::lit(b)))
            .unwrap_or((margins.0.ln(), margins.1.ln()));
        let logs: Vec<DVector<T>> = profiles.iter().map(|p| p.map(|x| x.ln())).collect();
        let (mu, sigma_t) = fitter.fit(&logs, clip, rng)?;
        classes.push(LoadClass {
            mu,
            sigma_t,
            theta_deg: spec.theta_deg,
            p_min: margins.0,
            p_max: margins.1,
            members: rows.iter().map(|&i| panel.bus_ids[i].clone()).collect(),
            margins_from_data: from_data,
        });
    }
    if assignment.iter().any(|&a| a >= n_classes) {
        return Err(invalid("class assignment references an unknown class"));
    }
    let model = LoadClassModel { classes };
    model.validate(T::lit(cfg.eig_floor))?;
    Ok(model)
}
