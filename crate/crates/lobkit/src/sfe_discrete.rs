//! Discrete self-financing reconstructions, microstructure validation and
//! toxicity indexes on trade-clock series.
//!
//! Three nested wealth reconstructions share the increment
//!
//! ```text
//! Δ_n X = L_n·Δ_n p                                   (frictionless)
//! Δ_n X = L_n·Δ_n p + (s_n/2)·|Δ_n L|                 (classical costs)
//! Δ_n X = L_n·Δ_n p + (s_n/2)·|Δ_n L| + Δ_n p·Δ_n L   (proposed)
//! ```
//!
//! and the proposed one telescopes to the ledger wealth exactly on any tape
//! whose trades execute at the best quotes. A general-book variant replaces
//! the spread term with a per-step transaction-cost function evaluated at the
//! traded volume. Validation counts violations of the two microstructure
//! inequalities `Δ_n L·Δ_n p ≤ 0` (price impact) and `|Δ_n p| ≤ s_n` (price
//! recovery).

use crate::lob_core::CostFunction;
use crate::trade_tape::{TapeError, TradeClockSeries};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SfeError {
    #[error(transparent)]
    Series(#[from] TapeError),
    #[error("general-book model needs one cost function per trade ({expected}), got {got}")]
    CostCount { expected: usize, got: usize },
    #[error("traded volume {volume} at step {step} is outside the cost function's domain")]
    CostDomain { step: usize, volume: f64 },
    #[error("window {lo}..={hi} is out of range (have {n} increments)")]
    WindowOutOfRange { lo: usize, hi: usize, n: usize },
    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
}

/// Which self-financing increment to accumulate.
#[derive(Debug, Clone)]
pub enum WealthModel {
    Frictionless,
    Classical,
    Proposed,
    /// One transaction-cost function per trade step, used as
    /// `c_n(v)` with `v = −Δ_n L` the traded volume.
    GeneralBook(Vec<CostFunction>),
}

/// Exact integer reconstruction (in `tick/2 × share` units) for the three
/// spread-based models. `X_0 = 0`; entry `n` is the wealth just before trade
/// `n`, so the path aligns index-by-index with [`crate::trade_tape::build_ledger`].
pub fn reconstruct_wealth_units(
    series: &TradeClockSeries,
    model: &WealthModel,
) -> Result<Vec<i64>, SfeError> {
    series.validate()?;
    let n = series.len();
    let mut out = Vec::with_capacity(n.max(1));
    out.push(0i64);
    if n == 0 {
        return Ok(out);
    }
    let mut x: i128 = 0;
    let mut l: i128 = 0;
    for k in 0..n - 1 {
        let dp = (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as i128;
        let dl = series.delta_l[k] as i128;
        let mut inc = l * dp;
        match model {
            WealthModel::Frictionless => {}
            WealthModel::Classical => inc += (series.s_half_ticks[k] as i128 / 2) * dl.abs(),
            WealthModel::Proposed => {
                inc += (series.s_half_ticks[k] as i128 / 2) * dl.abs() + dp * dl;
            }
            WealthModel::GeneralBook(_) => {
                return Err(SfeError::Undefined("general-book model has no integer path"))
            }
        }
        x += inc;
        l += dl;
        out.push(x.try_into().map_err(|_| TapeError::Overflow)?);
    }
    Ok(out)
}

/// Wealth path in currency, `X_0 = 0`. For the spread models this scales the
/// exact integer path; the general-book model accumulates
/// `L_n·Δ_n p + c_n(−Δ_n L) + Δ_n p·Δ_n L` in floating point and fails if a
/// traded volume falls outside its step's cost domain.
pub fn reconstruct_wealth(
    series: &TradeClockSeries,
    model: &WealthModel,
) -> Result<Vec<f64>, SfeError> {
    if let WealthModel::GeneralBook(costs) = model {
        series.validate()?;
        let n = series.len();
        if costs.len() != n {
            return Err(SfeError::CostCount { expected: n, got: costs.len() });
        }
        let unit = series.unit();
        let mut out = Vec::with_capacity(n.max(1));
        out.push(0.0);
        let mut x = 0.0;
        let mut l: i128 = 0;
        for k in 0..n.saturating_sub(1) {
            let dp = (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as f64 * unit;
            let dl = series.delta_l[k] as f64;
            let cost = costs[k].eval(-dl);
            if !cost.is_finite() {
                return Err(SfeError::CostDomain { step: k, volume: -dl });
            }
            x += l as f64 * dp + cost + dp * dl;
            l += series.delta_l[k] as i128;
            out.push(x);
        }
        return Ok(out);
    }
    let unit = series.unit();
    Ok(reconstruct_wealth_units(series, model)?
        .into_iter()
        .map(|u| u as f64 * unit)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    pub count: usize,
    pub fraction: f64,
    pub indices: Vec<usize>,
}

/// Counts of microstructure-inequality violations on a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_trades: usize,
    /// Number of testable steps (`n_trades − 1`; each needs the next mid).
    pub n_increments: usize,
    /// Steps with `Δ_n L·Δ_n p > 0`.
    pub impact: Violations,
    /// Steps with `|Δ_n p| > s_n`.
    pub recovery: Violations,
}

/// Deterministic scan for impact and recovery violations.
pub fn validate(series: &TradeClockSeries) -> Result<ValidationReport, SfeError> {
    series.validate()?;
    let n = series.len();
    let m = n.saturating_sub(1);
    let mut impact_idx = Vec::new();
    let mut recovery_idx = Vec::new();
    for k in 0..m {
        let dp = series.p_half_ticks[k + 1] - series.p_half_ticks[k];
        if series.delta_l[k] as i128 * dp as i128 > 0 {
            impact_idx.push(k);
        }
        if dp.abs() > series.s_half_ticks[k] {
            recovery_idx.push(k);
        }
    }
    let frac = |c: usize| if m == 0 { 0.0 } else { c as f64 / m as f64 };
    Ok(ValidationReport {
        n_trades: n,
        n_increments: m,
        impact: Violations {
            count: impact_idx.len(),
            fraction: frac(impact_idx.len()),
            indices: impact_idx,
        },
        recovery: Violations {
            count: recovery_idx.len(),
            fraction: frac(recovery_idx.len()),
            indices: recovery_idx,
        },
    })
}

/// Inclusive range of increment indices; `None` means the whole tape.
pub type Window = Option<(usize, usize)>;

fn window_bounds(series: &TradeClockSeries, window: Window) -> Result<(usize, usize), SfeError> {
    let m = series.len().saturating_sub(1);
    let (lo, hi) = window.unwrap_or((0, m.saturating_sub(1)));
    if m == 0 || hi >= m || lo > hi {
        return Err(SfeError::WindowOutOfRange { lo, hi, n: m });
    }
    Ok((lo, hi))
}

/// Discrete toxicity index `ρ` over a window: the negative Pearson
/// correlation of the per-trade volume and mid-price increments. Invariant
/// under positive rescaling of either series.
pub fn toxicity_rho(series: &TradeClockSeries, window: Window) -> Result<f64, SfeError> {
    let (lo, hi) = window_bounds(series, window)?;
    let m = hi - lo + 1;
    if m < 2 {
        return Err(SfeError::Undefined("correlation needs at least 2 increments"));
    }
    let mut sl = 0.0;
    let mut sp = 0.0;
    for k in lo..=hi {
        sl += series.delta_l[k] as f64;
        sp += (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as f64;
    }
    let (ml, mp) = (sl / m as f64, sp / m as f64);
    let (mut vll, mut vpp, mut vlp) = (0.0, 0.0, 0.0);
    for k in lo..=hi {
        let a = series.delta_l[k] as f64 - ml;
        let b = (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as f64 - mp;
        vll += a * a;
        vpp += b * b;
        vlp += a * b;
    }
    if vll == 0.0 || vpp == 0.0 {
        return Err(SfeError::Undefined("zero variance in window"));
    }
    Ok(-vlp / (vll.sqrt() * vpp.sqrt()))
}

/// Discrete toxicity ratio and its two transaction-cost components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToxicityRatio {
    /// `r = −2·Σ Δ_n p·Δ_n L / Σ s_n·|Δ_n L|`.
    pub ratio: f64,
    /// Spread component `Σ (s_n/2)·|Δ_n L|` in currency.
    pub spread_component: f64,
    /// Price-impact component `Σ Δ_n p·Δ_n L` in currency·shares.
    pub impact_component: f64,
}

/// Ratio of integrated price impact to collected spread over a window.
pub fn toxicity_ratio(series: &TradeClockSeries, window: Window) -> Result<ToxicityRatio, SfeError> {
    let (lo, hi) = window_bounds(series, window)?;
    let mut impact: i128 = 0;
    let mut spread_half: i128 = 0; // Σ (s/2)|ΔL| in integer units
    for k in lo..=hi {
        let dp = (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as i128;
        let dl = series.delta_l[k] as i128;
        impact += dp * dl;
        spread_half += (series.s_half_ticks[k] as i128 / 2) * dl.abs();
    }
    if spread_half == 0 {
        return Err(SfeError::Undefined("zero spread volume in window"));
    }
    let unit = series.unit();
    Ok(ToxicityRatio {
        ratio: -(impact as f64) / (spread_half as f64),
        spread_component: spread_half as f64 * unit,
        impact_component: impact as f64 * unit,
    })
}

/// Cumulative quadratic covariation `Σ_{k≤n} Δ_k p·Δ_k L` in
/// currency·shares, starting at 0. Non-increasing whenever the price-impact
/// inequality holds at every step.
pub fn quad_covariation_path(series: &TradeClockSeries) -> Vec<f64> {
    let n = series.len();
    let unit = series.unit();
    let mut out = Vec::with_capacity(n.max(1));
    out.push(0.0);
    let mut acc: i128 = 0;
    for k in 0..n.saturating_sub(1) {
        let dp = (series.p_half_ticks[k + 1] - series.p_half_ticks[k]) as i128;
        acc += dp * series.delta_l[k] as i128;
        out.push(acc as f64 * unit);
    }
    out
}
