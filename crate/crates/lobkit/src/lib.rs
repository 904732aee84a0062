//! Self-financing calculus for limit-order-book markets.
//!
//! Discrete trade-clock accounting on execution tapes, measure-valued order
//! books with their shape/cost (Legendre) machinery, Monte Carlo
//! verification of the continuum-limit equations, the hedging and
//! market-making applications, order-flow toxicity indexes, and the
//! functional-CLT covariation test.
//!
//! Modules:
//! - [`lob_core`]: order books, market-order execution, shape functions and
//!   exact transaction-cost conjugates;
//! - [`trade_tape`]: tape ingestion, filtering, trade-clock series and the
//!   exact integer provider ledger;
//! - [`sfe_discrete`]: the discrete self-financing reconstructions,
//!   microstructure validation and toxicity indexes;
//! - [`diffusion_lab`]: correlated Itô simulation and the diffusion-limit
//!   convergence checks, time change, supply-demand model, flat-book case;
//! - [`applications`]: the replication equation with its order-type
//!   classification, and the optimal market-maker spread;
//! - [`stat_tests`]: covariation CLT, confidence bands, the windowed
//!   rejection procedure and the cross-sectional table;
//! - [`synth`]: deterministic synthetic tapes and books.

// `!(x > 0.0)` rejects NaN along with the out-of-range values, and indexed
// loops over parallel arrays read better than zip chains in the numerics.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod applications;
pub mod diffusion_lab;
pub mod lob_core;
pub mod pwq;
pub mod sfe_discrete;
pub mod synth;
pub mod trade_tape;

pub use pwq::{PiecewiseQuadratic, Segment};
