//! AC power flow on the Kron-reduced network.

mod audit;
mod injection;
mod jacobian;
mod newton;
mod voltvar;
mod volume;

pub use audit::{feasibility_audit, FeasibilityReport, VoltVarCheck};
pub use injection::{pv_injection, reactive_from_active, BusLayout, InjectionSpec};
pub use jacobian::{
    evaluate_injection, implied_active_load, mismatch, real_representation, wirtinger_jacobian, WirtingerJacobian,
};
pub use newton::{in_good_set, solve_from, solve_powerflow, Init, PowerFlowConfig, VoltageSolution};
pub use voltvar::VoltVarCurve;
pub use volume::{load_to_voltage_jacobian, log_volume_factor, log_volume_factor_on, volume_factor};
