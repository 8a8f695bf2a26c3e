//! Load classes, private model fitting and truncated sampling of load days.

mod fit;
mod model;
mod panel;
mod partition;
mod sampler;

use nalgebra::DMatrix;
use rand::RngCore;

pub use fit::{
    default_margins, fit_dp_gaussian, fit_load_model, project_psd, ClassSpec, DpFitConfig, GaussianMomentFitter,
    LoadModelFitter,
};
pub use model::{LoadClass, LoadClassModel};
pub use panel::LoadPanel;
pub use partition::{kmeans, partition_classes};
pub use sampler::{sample_truncated_loads, sample_truncated_with_stats, TruncatedDraw, MIN_ACCEPTANCE, PILOT_DRAWS};

pub use crate::powerflow::{pv_injection, reactive_from_active};

use crate::error::{invalid, Result};
use crate::powerflow::BusLayout;
use crate::scalar::Real;

/// One day of active loads for every bus of `layout`, `n × T`, zero off the
/// load buses. Classes are sampled in model order, each taking one draw
/// from `rng` to seed its rows.
pub fn sample_network_loads<T: Real>(
    model: &LoadClassModel<T>,
    layout: &BusLayout<T>,
    rng: &mut dyn RngCore,
) -> Result<DMatrix<T>> {
    let loads = layout.load_buses();
    let mut by_class = vec![Vec::new(); model.classes.len()];
    for &k in &loads {
        let c = model
            .class_of(&layout.ids[k])
            .ok_or_else(|| invalid(format!("load bus `{}` belongs to no class", layout.ids[k])))?;
        by_class[c].push(k);
    }
    let mut out = DMatrix::zeros(layout.len(), model.horizon());
    for (c, buses) in by_class.iter().enumerate() {
        if buses.is_empty() {
            continue;
        }
        let draw = sample_truncated_loads(&model.classes[c], buses.len(), rng)?;
        for (row, &k) in buses.iter().enumerate() {
            out.row_mut(k).copy_from(&draw.row(row));
        }
    }
    Ok(out)
}
