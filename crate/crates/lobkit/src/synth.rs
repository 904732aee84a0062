//! Synthetic tape and book generation for desk-scale reproduction of the
//! empirical pipeline. Deterministic given the seed; the two microstructure
//! inequalities are violated at exactly the configured Bernoulli rates.

use crate::lob_core::OrderBook;
use crate::trade_tape::{Aggressor, TradeFlags, TradeRecord};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("compliance rates must lie in [0, 1], got {0}")]
    BadRate(f64),
    #[error("base price must be positive and spread at least 2 ticks, even")]
    BadQuotes,
    #[error("price walked below the spread; raise the base price or shorten the tape")]
    PriceUnderflow,
}

/// How the mid moves between trades.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MidMoveLaw {
    /// |Δp| uniform on {0, …, s} in half-tick steps (recovery-compliant
    /// draws), violations overshooting to s + 1 tick.
    UniformWithinSpread,
    /// |Δp| = s/2 exactly at every step (the frictionless-recovery regime).
    ExactHalfSpread,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapeParams {
    pub n_trades: usize,
    /// Base mid price in ticks (tick = 1e-4 currency).
    pub base_price_ticks: i64,
    /// Constant spread in ticks; must be even and ≥ 2 so the mid stays on
    /// the half-tick grid and |Δp| = s/2 is representable.
    pub spread_ticks: i64,
    /// Probability that a step satisfies `Δ_n L·Δ_n p ≤ 0`.
    pub impact_compliance: f64,
    /// Probability that a step satisfies `|Δ_n p| ≤ s_n`.
    pub recovery_compliance: f64,
    pub max_size: u32,
    pub mid_move: MidMoveLaw,
}

impl Default for TapeParams {
    fn default() -> Self {
        TapeParams {
            n_trades: 10_000,
            base_price_ticks: 1_000_000,
            spread_ticks: 2,
            impact_compliance: 1.0,
            recovery_compliance: 1.0,
            max_size: 100,
            mid_move: MidMoveLaw::UniformWithinSpread,
        }
    }
}

/// Generates an at-quotes tape: every trade prints on the aggressor's side
/// of a constant-spread book, and the mid then moves by a draw from the
/// configured law whose sign honors (or violates) the impact inequality.
pub fn generate_tape(params: &TapeParams, seed: u64) -> Result<Vec<TradeRecord>, SynthError> {
    for rate in [params.impact_compliance, params.recovery_compliance] {
        if !(0.0..=1.0).contains(&rate) {
            return Err(SynthError::BadRate(rate));
        }
    }
    if params.base_price_ticks <= 0 || params.spread_ticks < 2 || params.spread_ticks % 2 != 0 {
        return Err(SynthError::BadQuotes);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half_spread = params.spread_ticks / 2;
    // mid in half-ticks so half-spread moves stay on grid
    let mut mid_ht = 2 * params.base_price_ticks;
    let s_ht = 2 * params.spread_ticks;
    let mut out = Vec::with_capacity(params.n_trades);
    for n in 0..params.n_trades {
        let sell: bool = rng.gen();
        let size: u32 = rng.gen_range(1..=params.max_size.max(1));
        if mid_ht % 2 != 0 {
            // keep quotes on integer ticks: nudge the mid onto the grid
            mid_ht += 1;
        }
        let bid_ticks = mid_ht / 2 - half_spread;
        let ask_ticks = mid_ht / 2 + half_spread;
        if bid_ticks <= 0 {
            return Err(SynthError::PriceUnderflow);
        }
        let (aggressor, price_ticks) = if sell {
            (Aggressor::Sell, bid_ticks)
        } else {
            (Aggressor::Buy, ask_ticks)
        };
        out.push(TradeRecord {
            seq: n as u64 + 1,
            ts_ns: 1_000_000_000 + n as i64 * 1_000_000,
            price_ticks,
            size,
            aggressor,
            flags: TradeFlags::default(),
            bid_ticks,
            ask_ticks,
        });

        // mid move after the trade; dl > 0 when the provider buys (sell order)
        let dl_sign = if sell { 1i64 } else { -1i64 };
        let impact_ok = rng.gen_bool(params.impact_compliance);
        let recovery_ok = rng.gen_bool(params.recovery_compliance);
        let magnitude_ht: i64 = match params.mid_move {
            MidMoveLaw::ExactHalfSpread => s_ht / 2,
            MidMoveLaw::UniformWithinSpread => {
                if recovery_ok {
                    rng.gen_range(0..=s_ht)
                } else {
                    s_ht + 2 // one tick beyond the recovery bound
                }
            }
        };
        // an impact violation needs a strictly positive co-movement
        let magnitude_ht = if !impact_ok && magnitude_ht == 0 { 2 } else { magnitude_ht };
        let dp_sign = if impact_ok { -dl_sign } else { dl_sign };
        mid_ht += dp_sign * magnitude_ht;
    }
    Ok(out)
}

/// Renders records in the tape CSV format
/// (`seq,ts_ns,price,size,aggressor,flags,bid,ask`). Byte-identical for
/// identical inputs.
pub fn tape_to_csv(records: &[TradeRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 48 + 64);
    out.push_str("seq,ts_ns,price,size,aggressor,flags,bid,ask\n");
    for r in records {
        let fmt_price = |ticks: i64| {
            let whole = ticks / 10_000;
            let frac = (ticks % 10_000).abs();
            format!("{whole}.{frac:04}")
        };
        let mut flags = String::new();
        if r.flags.special_deal {
            flags.push('C');
        }
        if r.flags.hidden {
            if !flags.is_empty() {
                flags.push(';');
            }
            flags.push('H');
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.seq,
            r.ts_ns,
            fmt_price(r.price_ticks),
            r.size,
            match r.aggressor {
                Aggressor::Buy => "B",
                Aggressor::Sell => "S",
            },
            flags,
            fmt_price(r.bid_ticks),
            fmt_price(r.ask_ticks),
        ));
    }
    out
}

/// A random no-arbitrage book with up to `max_levels` per side on the given
/// tick grid, integer volumes when `integer_volumes` is set.
pub fn random_book(
    rng: &mut ChaCha8Rng,
    tick: f64,
    max_levels: usize,
    integer_volumes: bool,
) -> OrderBook {
    let mid_ticks: i64 = rng.gen_range(500_000..1_500_000);
    let half_spread: i64 = rng.gen_range(1..=50);
    let mut bids = Vec::new();
    let mut asks = Vec::new();
    let n_bids = rng.gen_range(1..=max_levels.max(1));
    let n_asks = rng.gen_range(1..=max_levels.max(1));
    let mut level = mid_ticks - half_spread;
    for _ in 0..n_bids {
        let vol = if integer_volumes {
            rng.gen_range(1..=500) as f64
        } else {
            rng.gen_range(0.5..500.0)
        };
        bids.push((level as f64 * tick, vol));
        level -= rng.gen_range(1..=20);
        if level <= 0 {
            break;
        }
    }
    let mut level = mid_ticks + half_spread;
    for _ in 0..n_asks {
        let vol = if integer_volumes {
            rng.gen_range(1..=500) as f64
        } else {
            rng.gen_range(0.5..500.0)
        };
        asks.push((level as f64 * tick, vol));
        level += rng.gen_range(1..=20);
    }
    OrderBook::new(tick, &bids, &asks).expect("constructed books are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfe_discrete;
    use crate::trade_tape;

    #[test]
    fn deterministic_csv() {
        let params = TapeParams { n_trades: 200, ..TapeParams::default() };
        let a = tape_to_csv(&generate_tape(&params, 99).unwrap());
        let b = tape_to_csv(&generate_tape(&params, 99).unwrap());
        assert_eq!(a, b);
        let c = tape_to_csv(&generate_tape(&params, 100).unwrap());
        assert_ne!(a, c);
    }

    #[test]
    fn full_compliance_validates_clean() {
        let params = TapeParams { n_trades: 5_000, ..TapeParams::default() };
        let records = generate_tape(&params, 7).unwrap();
        let (series, build) = trade_tape::build_series(&records).unwrap();
        assert_eq!(build.n_rejected(), 0);
        let report = sfe_discrete::validate(&series).unwrap();
        assert_eq!(report.impact.count, 0);
        assert_eq!(report.recovery.count, 0);
    }

    #[test]
    fn violation_rates_within_binomial_bands() {
        let params = TapeParams {
            n_trades: 20_000,
            impact_compliance: 0.99,
            recovery_compliance: 0.95,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, 11).unwrap();
        let (series, _) = trade_tape::build_series(&records).unwrap();
        let report = sfe_discrete::validate(&series).unwrap();
        let n = report.n_increments as f64;
        for (frac, rate) in [
            (report.impact.fraction, 0.01),
            (report.recovery.fraction, 0.05),
        ] {
            let band = 3.0 * (rate * (1.0 - rate) / n).sqrt();
            assert!((frac - rate).abs() <= band, "{frac} vs {rate} ± {band}");
        }
    }

    #[test]
    fn csv_round_trips_through_ingest() {
        use std::io::Write;
        let params = TapeParams { n_trades: 300, ..TapeParams::default() };
        let records = generate_tape(&params, 3).unwrap();
        let csv = tape_to_csv(&records);
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(csv.as_bytes()).unwrap();
        f.flush().unwrap();
        let back = trade_tape::ingest(f.path()).unwrap();
        assert_eq!(records, back);
    }
}
