//! Execution-tape ingestion and trade-clock accounting.
//!
//! Tapes arrive as CSV with the quotes that prevailed just before each trade
//! travelling inside the record, so no book reconstruction is needed. After
//! filtering out special deals and hidden executions, every remaining trade
//! executes at the best bid or ask, and the aggregate provider's cash moves by
//! `ΔK = −p·ΔL + (s/2)·|ΔL|` per trade.
//!
//! Prices are fixed point: ticks of `1e-4` currency units in the file, and
//! half-ticks internally so the mid-price `(bid + ask)/2` stays on the grid.
//! Cash and wealth accumulate in integer `half-tick × share` units, which
//! makes the ledger and every identity on it exact.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Tick size of the tape format (prices have at most 4 fractional digits).
pub const TAPE_TICK: f64 = 1e-4;

const HEADER: [&str; 8] = ["seq", "ts_ns", "price", "size", "aggressor", "flags", "bid", "ask"];

#[derive(Debug, Error)]
pub enum TapeError {
    #[error("I/O error reading tape: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: expected `seq,ts_ns,price,size,aggressor,flags,bid,ask`, got `{0}`")]
    Header(String),
    #[error("line {line}: field `{field}`: {msg}")]
    Field { line: u64, field: &'static str, msg: String },
    #[error("line {line}: sequence numbers out of order ({prev} then {cur})")]
    NonMonotoneSeq { line: u64, prev: u64, cur: u64 },
    #[error("line {line}: bid {bid} does not sit below ask {ask}")]
    CrossedQuotes { line: u64, bid: f64, ask: f64 },
    #[error("integer overflow accumulating the ledger")]
    Overflow,
}

/// Direction of the market order that triggered the trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggressor {
    Buy,
    Sell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TradeFlags {
    pub special_deal: bool,
    pub hidden: bool,
}

/// One raw execution, prices in integer ticks of [`TAPE_TICK`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeRecord {
    pub seq: u64,
    pub ts_ns: i64,
    pub price_ticks: i64,
    pub size: u32,
    pub aggressor: Aggressor,
    pub flags: TradeFlags,
    pub bid_ticks: i64,
    pub ask_ticks: i64,
}

/// Exact decimal-to-ticks conversion; rejects more than 4 fractional digits.
fn parse_price_ticks(s: &str) -> Result<i64, String> {
    let s = s.trim();
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err("empty price".into());
    }
    if frac_part.len() > 4 {
        return Err(format!("more than 4 fractional digits in `{s}`"));
    }
    let whole: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| format!("bad integer part `{int_part}`"))?
    };
    if whole < 0 || int_part.starts_with('-') {
        return Err(format!("negative price `{s}`"));
    }
    let mut frac: i64 = 0;
    if !frac_part.is_empty() {
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad fractional part `{frac_part}`"));
        }
        frac = frac_part.parse().map_err(|_| format!("bad fractional part `{frac_part}`"))?;
        for _ in frac_part.len()..4 {
            frac *= 10;
        }
    }
    Ok(whole * 10_000 + frac)
}

/// Reads a tape CSV (header `seq,ts_ns,price,size,aggressor,flags,bid,ask`),
/// validating as it streams: positive integer sizes, positive on-grid prices,
/// strictly increasing sequence numbers, `bid < ask`.
pub fn ingest(path: impl AsRef<Path>) -> Result<Vec<TradeRecord>, TapeError> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header = reader.headers()?.clone();
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != HEADER {
        return Err(TapeError::Header(got.join(",")));
    }
    let mut out = Vec::new();
    let mut prev_seq: Option<u64> = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &'static str| -> Result<&str, TapeError> {
            record.get(idx).ok_or(TapeError::Field {
                line,
                field: name,
                msg: "missing column".into(),
            })
        };
        let err = |field: &'static str, msg: String| TapeError::Field { line, field, msg };

        let seq: u64 = field(0, "seq")?
            .trim()
            .parse()
            .map_err(|e| err("seq", format!("{e}")))?;
        if let Some(prev) = prev_seq {
            if seq <= prev {
                return Err(TapeError::NonMonotoneSeq { line, prev, cur: seq });
            }
        }
        prev_seq = Some(seq);

        let ts_ns: i64 = field(1, "ts_ns")?
            .trim()
            .parse()
            .map_err(|e| err("ts_ns", format!("{e}")))?;
        let price_ticks = parse_price_ticks(field(2, "price")?).map_err(|m| err("price", m))?;
        if price_ticks <= 0 {
            return Err(err("price", "price must be positive".into()));
        }
        let size: i64 = field(3, "size")?
            .trim()
            .parse()
            .map_err(|e| err("size", format!("{e}")))?;
        if size <= 0 || size > u32::MAX as i64 {
            return Err(err("size", format!("size must be a positive integer, got {size}")));
        }
        let aggressor = match field(4, "aggressor")?.trim() {
            "B" => Aggressor::Buy,
            "S" => Aggressor::Sell,
            other => return Err(err("aggressor", format!("expected B or S, got `{other}`"))),
        };
        let mut flags = TradeFlags::default();
        let raw_flags = field(5, "flags")?.trim();
        if !raw_flags.is_empty() {
            for f in raw_flags.split(';') {
                match f.trim() {
                    "C" => flags.special_deal = true,
                    "H" => flags.hidden = true,
                    other => return Err(err("flags", format!("unknown flag `{other}`"))),
                }
            }
        }
        let bid_ticks = parse_price_ticks(field(6, "bid")?).map_err(|m| err("bid", m))?;
        let ask_ticks = parse_price_ticks(field(7, "ask")?).map_err(|m| err("ask", m))?;
        if bid_ticks <= 0 {
            return Err(err("bid", "bid must be positive".into()));
        }
        if bid_ticks >= ask_ticks {
            return Err(TapeError::CrossedQuotes {
                line,
                bid: bid_ticks as f64 * TAPE_TICK,
                ask: ask_ticks as f64 * TAPE_TICK,
            });
        }
        out.push(TradeRecord {
            seq,
            ts_ns,
            price_ticks,
            size: size as u32,
            aggressor,
            flags,
            bid_ticks,
            ask_ticks,
        });
    }
    Ok(out)
}

/// What [`filter_tape`] removed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub n_input: usize,
    pub n_kept: usize,
    pub dropped_special_deal: usize,
    pub dropped_hidden: usize,
}

impl FilterReport {
    pub fn fraction_dropped(&self) -> f64 {
        if self.n_input == 0 {
            0.0
        } else {
            (self.n_input - self.n_kept) as f64 / self.n_input as f64
        }
    }
}

impl fmt::Display for FilterReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kept {}/{} trades ({:.2}% dropped: {} special-deal, {} hidden)",
            self.n_kept,
            self.n_input,
            100.0 * self.fraction_dropped(),
            self.dropped_special_deal,
            self.dropped_hidden,
        )
    }
}

/// Drops records flagged as special deals or hidden executions. Idempotent.
pub fn filter_tape(records: &[TradeRecord]) -> (Vec<TradeRecord>, FilterReport) {
    let mut report = FilterReport {
        n_input: records.len(),
        n_kept: 0,
        dropped_special_deal: 0,
        dropped_hidden: 0,
    };
    let mut kept = Vec::with_capacity(records.len());
    for r in records {
        if r.flags.special_deal {
            report.dropped_special_deal += 1;
        } else if r.flags.hidden {
            report.dropped_hidden += 1;
        } else {
            kept.push(*r);
        }
    }
    report.n_kept = kept.len();
    (kept, report)
}

/// Per-trade arrays in the trade clock, all integers on the half-tick grid:
/// `p` is the mid just before each trade, `s` the spread, `dl` the provider's
/// signed volume and `dk` her cash flow in `half-tick × share` units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeClockSeries {
    /// Currency value of one tick; one cash unit is `tick/2 × 1 share`.
    pub tick: f64,
    pub p_half_ticks: Vec<i64>,
    pub s_half_ticks: Vec<i64>,
    pub delta_l: Vec<i64>,
    pub delta_k_units: Vec<i64>,
}

impl TradeClockSeries {
    pub fn len(&self) -> usize {
        self.p_half_ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_half_ticks.is_empty()
    }

    /// Currency value of one accounting unit (`tick/2` per share).
    pub fn unit(&self) -> f64 {
        0.5 * self.tick
    }

    /// Mid-price before trade `n`, in currency.
    pub fn price(&self, n: usize) -> f64 {
        self.p_half_ticks[n] as f64 * self.unit()
    }

    /// Spread before trade `n`, in currency.
    pub fn spread(&self, n: usize) -> f64 {
        self.s_half_ticks[n] as f64 * self.unit()
    }

    /// Provider cash change at trade `n`, in currency.
    pub fn cash_change(&self, n: usize) -> f64 {
        self.delta_k_units[n] as f64 * self.unit()
    }

    pub fn validate(&self) -> Result<(), TapeError> {
        let n = self.len();
        if self.s_half_ticks.len() != n || self.delta_l.len() != n || self.delta_k_units.len() != n
        {
            return Err(TapeError::Field {
                line: 0,
                field: "series",
                msg: "array lengths differ".into(),
            });
        }
        if !(self.tick > 0.0 && self.tick.is_finite()) {
            return Err(TapeError::Field {
                line: 0,
                field: "tick",
                msg: "tick must be positive".into(),
            });
        }
        for i in 0..n {
            if self.s_half_ticks[i] <= 0 {
                return Err(TapeError::Field {
                    line: i as u64,
                    field: "spread",
                    msg: "spread must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// Why a record was excluded from the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// Priced strictly inside the quoted spread.
    InsideSpread,
    /// Priced strictly outside the quoted spread.
    OutsideSpread,
    /// At a quote, but on the side opposite the aggressor.
    WrongSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub n_input: usize,
    pub n_kept: usize,
    pub rejected: Vec<(u64, RejectReason)>,
}

impl BuildReport {
    pub fn n_rejected(&self) -> usize {
        self.rejected.len()
    }
}

/// Builds the trade-clock series from filtered records. A record must trade
/// exactly at the quote on its aggressor's side (sell at the bid, buy at the
/// ask); anything else is excluded and reported. The cash flow per kept trade
/// is `ΔK = −(p − s/2)·ΔL` when the provider buys and `−(p + s/2)·ΔL` when
/// she sells, i.e. `ΔK = −p·ΔL + (s/2)·|ΔL|`.
pub fn build_series(records: &[TradeRecord]) -> Result<(TradeClockSeries, BuildReport), TapeError> {
    let mut series = TradeClockSeries {
        tick: TAPE_TICK,
        p_half_ticks: Vec::with_capacity(records.len()),
        s_half_ticks: Vec::with_capacity(records.len()),
        delta_l: Vec::with_capacity(records.len()),
        delta_k_units: Vec::with_capacity(records.len()),
    };
    let mut report = BuildReport { n_input: records.len(), n_kept: 0, rejected: Vec::new() };

    for r in records {
        let expected_ticks = match r.aggressor {
            Aggressor::Sell => r.bid_ticks,
            Aggressor::Buy => r.ask_ticks,
        };
        if r.price_ticks != expected_ticks {
            let reason = if r.price_ticks == r.bid_ticks || r.price_ticks == r.ask_ticks {
                RejectReason::WrongSide
            } else if r.price_ticks > r.bid_ticks && r.price_ticks < r.ask_ticks {
                RejectReason::InsideSpread
            } else {
                RejectReason::OutsideSpread
            };
            report.rejected.push((r.seq, reason));
            continue;
        }
        let p_ht = r.bid_ticks + r.ask_ticks; // mid in half-ticks
        let s_ht = 2 * (r.ask_ticks - r.bid_ticks);
        let dl: i64 = match r.aggressor {
            Aggressor::Sell => r.size as i64,
            Aggressor::Buy => -(r.size as i64),
        };
        // trade price on the aggressor side, in half-ticks
        let trade_ht = 2 * r.price_ticks;
        let dk = (-(trade_ht as i128) * dl as i128)
            .try_into()
            .map_err(|_| TapeError::Overflow)?;
        series.p_half_ticks.push(p_ht);
        series.s_half_ticks.push(s_ht);
        series.delta_l.push(dl);
        series.delta_k_units.push(dk);
    }
    report.n_kept = series.len();
    Ok((series, report))
}

/// Cumulative inventory, cash and mid-marked wealth of the aggregate
/// provider. Entry `n` is the state just before trade `n`, marked at `p_n`;
/// the totals after the final trade are in `final_inventory`/`final_cash`
/// (the tape carries no quote after its last trade to mark them with).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderLedger {
    pub tick: f64,
    pub inventory: Vec<i64>,
    pub cash_units: Vec<i64>,
    pub wealth_units: Vec<i64>,
    pub final_inventory: i64,
    pub final_cash_units: i64,
}

impl ProviderLedger {
    pub fn len(&self) -> usize {
        self.wealth_units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wealth_units.is_empty()
    }

    pub fn unit(&self) -> f64 {
        0.5 * self.tick
    }

    /// Wealth path in currency.
    pub fn wealth(&self) -> Vec<f64> {
        let u = self.unit();
        self.wealth_units.iter().map(|&x| x as f64 * u).collect()
    }
}

/// Builds the ledger by cumulative summation, `L_0 = K_0 = 0`, and marks
/// `X_n = p_n·L_n + K_n` exactly in integer units.
pub fn build_ledger(series: &TradeClockSeries) -> Result<ProviderLedger, TapeError> {
    series.validate()?;
    let n = series.len();
    let rows = n.max(1);
    let mut ledger = ProviderLedger {
        tick: series.tick,
        inventory: Vec::with_capacity(rows),
        cash_units: Vec::with_capacity(rows),
        wealth_units: Vec::with_capacity(rows),
        final_inventory: 0,
        final_cash_units: 0,
    };
    let mut l: i128 = 0;
    let mut k: i128 = 0;
    if n == 0 {
        ledger.inventory.push(0);
        ledger.cash_units.push(0);
        ledger.wealth_units.push(0);
        return Ok(ledger);
    }
    for i in 0..n {
        let x = series.p_half_ticks[i] as i128 * l + k;
        ledger.inventory.push(l.try_into().map_err(|_| TapeError::Overflow)?);
        ledger.cash_units.push(k.try_into().map_err(|_| TapeError::Overflow)?);
        ledger.wealth_units.push(x.try_into().map_err(|_| TapeError::Overflow)?);
        l += series.delta_l[i] as i128;
        k += series.delta_k_units[i] as i128;
    }
    ledger.final_inventory = l.try_into().map_err(|_| TapeError::Overflow)?;
    ledger.final_cash_units = k.try_into().map_err(|_| TapeError::Overflow)?;
    Ok(ledger)
}
