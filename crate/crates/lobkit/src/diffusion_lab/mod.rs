//! Correlated Itô-pair simulation and numerical verification of the
//! continuum-limit statements: spread-cost and general-book transaction-cost
//! limits, the price-recovery bound, the trade-clock time change, and the
//! supply-and-demand construction with its flat-book special case.

pub mod checks;
pub mod coeffs;
pub mod phi;
pub mod sim;
pub mod supply_demand;

pub use checks::{
    general_cost_limit_check, recovery_statistic, spread_cost_limit_check, ConvergenceReport,
    GeneralCostReport,
};
pub use coeffs::{
    time_change, CoeffError, CoefficientsConfig, ItoCoefficients, PriceCoef, PriceCoefConfig,
    TimeCoef, TimeCoefConfig,
};
pub use phi::{
    phi_abs, phi_fn, phi_pwq, phi_pwq_deriv_sq, phi_pwq_id_deriv, phi_pwq_second_deriv,
    phi_square, phi_square_minus_spread_abs, PhiError,
};
pub use sim::{simulate_paths, simulate_paths_from, PathBundle, SimConfig, SimError};
pub use supply_demand::{
    flat_book_identity_check, flat_book_identity_for_increments, supply_demand_simulate, Driver,
    FlatBookReport, MomentCheck, SupplyDemandReport,
};
