//! Applications of the continuous self-financing equations: option
//! replication with limit/market orders and optimal market-maker spreads.

pub mod hedge;
pub mod market_maker;

pub use hedge::{
    black_scholes_call, hedge_inventory_vol, hedge_pde_solve, GridSpec, HedgeError,
    HedgeProblem, HedgeSurface, InventoryVol, LocalVol, OrderType, Payoff,
};
pub use market_maker::{
    explicit_pair_printed_spread, explicit_pair_stationary_spread, mm_alpha, mm_objective,
    mm_optimal_rescaled_spread, mm_solve, MmError, MmProblem, MmSolution, PriceModel,
    SpreadSolution,
};
