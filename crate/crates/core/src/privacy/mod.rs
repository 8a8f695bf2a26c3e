//! Privacy accounting for synthetic voltage releases.

mod account;
mod adjacent;
mod baseline;
mod bounds;
mod calibrate;
mod llr;
mod mtilde;
mod report;

pub use account::{account_model, class_inputs, class_inputs_at, Accounting};
pub use adjacent::{construct_adjacent_y, AdjacentPerturbation, MAX_CONSTRAINT_SAMPLES};
pub use baseline::{
    baseline_sensitivities, delta2_load_v, delta2_y, gaussian_sigma, sigma_load, sigma_voltage, SensitivityInputs,
    SensitivityTable,
};
pub use bounds::{
    alpha_param, c_star, chi2_tail_tau, is_admissible, precision_sum, psi_bar, sensitivity_d, term1_bound,
    term2_bound, ClassTerm, MAX_CONDITION,
};
pub use calibrate::{
    calibrate_indicator, clopper_pearson_upper, mc_calibrate, shifted_threshold, CalibrationResult, Scenario,
};
pub use llr::{empirical_llr, LlrTerms};
pub use mtilde::{closed_form_terms, m_tilde_closed_form, m_tilde_for_feeder, voltvar_constant, ClosedFormTerms};
pub use report::{
    epsilon_total, AccountantNetwork, AdjacencyParams, ClassInput, ClassReport, MTildeSource, MTildeStar,
    PrivacyReport,
};
