//! Feeder description, nodal admittance assembly and Kron reduction.

mod admittance;
mod kron;
mod model;

pub use admittance::{build_admittance, row_sums, FullAdmittance};
pub use kron::{
    kappa_kron, kron_reduce, kron_reduce_with, network_stats, recover_zero_voltages, schur_eliminate, stats_of,
    Elimination, KronReduction, NetworkStats,
};
pub use model::{reim, Bus, BusKind, Line, NetworkModel};
