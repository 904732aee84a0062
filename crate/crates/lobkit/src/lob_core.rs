//! Measure-valued order-book representation and the shape/cost calculus.
//!
//! A book is a pair of discrete measures (bids, asks) on a fixed price grid.
//! Executing a market order at price `α` consumes every ask at or below `α`
//! and every bid at or above it, which gives the provider's inventory and
//! cash changes directly. Around a quoted price `p` strictly inside the
//! spread, the cumulative depth integrates to a convex shape function `γ`
//! with `γ(0) = γ'(0) = 0`; its Legendre conjugate `c` prices a trade by
//! volume instead of by order price. Both live in [`PiecewiseQuadratic`]
//! form, so conjugation and the Fenchel pairing are exact.

use crate::pwq::{PiecewiseQuadratic, PwqError, Segment};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default price grid: one hundredth of a cent.
pub const DEFAULT_TICK: f64 = 1e-4;

/// Comparison slack for snapping currency prices onto the tick grid,
/// measured in ticks.
const GRID_EPS: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum LobError {
    #[error("tick size must be positive and finite")]
    BadTick,
    #[error("price {0} is not on the declared tick grid")]
    OffGridPrice(f64),
    #[error("negative volume {1} at price {0}")]
    NegativeVolume(f64, f64),
    #[error("duplicate level at price {0}")]
    DuplicateLevel(f64),
    #[error("crossed book: best bid {bid} >= best ask {ask}")]
    CrossedBook { bid: f64, ask: f64 },
    #[error("market order price must be positive, got {0}")]
    NonPositiveAlpha(f64),
    #[error("expected price must be positive, got {0}")]
    NonPositiveExpectedPrice(f64),
    #[error("quoted price {p} is not strictly inside the spread")]
    QuotedPriceOutsideSpread { p: f64 },
    #[error("book has an empty side and no default quoted price; pass one explicitly")]
    QuotedPriceRequired,
    #[error("volume {0} exceeds available book depth")]
    VolumeExceedsDepth(f64),
    #[error("shape function is not convex")]
    NotConvex,
}

impl From<PwqError> for LobError {
    fn from(_: PwqError) -> Self {
        LobError::NotConvex
    }
}

/// One resting level: price as an integer number of ticks, strictly positive volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub ticks: i64,
    pub volume: f64,
}

/// A no-arbitrage limit order book on a fixed tick grid.
///
/// Invariants held after construction: volumes strictly positive, price lists
/// strictly increasing with no duplicates, and max bid < min ask whenever both
/// sides are non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderBook {
    tick: f64,
    bids: Vec<Level>,
    asks: Vec<Level>,
}

#[derive(Serialize, Deserialize)]
struct RawBook {
    tick: f64,
    bids: Vec<(f64, f64)>,
    asks: Vec<(f64, f64)>,
}

impl Serialize for OrderBook {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        RawBook {
            tick: self.tick,
            bids: self.bids.iter().map(|l| (self.price_of(l.ticks), l.volume)).collect(),
            asks: self.asks.iter().map(|l| (self.price_of(l.ticks), l.volume)).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for OrderBook {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = RawBook::deserialize(de)?;
        OrderBook::new(raw.tick, &raw.bids, &raw.asks).map_err(serde::de::Error::custom)
    }
}

fn to_ticks(price: f64, tick: f64) -> Result<i64, LobError> {
    let x = price / tick;
    let t = x.round();
    if (x - t).abs() > GRID_EPS || !t.is_finite() {
        return Err(LobError::OffGridPrice(price));
    }
    Ok(t as i64)
}

impl OrderBook {
    /// Builds a book from `(price, volume)` pairs in currency units.
    /// Zero-volume levels are dropped; negative volumes, off-grid or
    /// duplicated prices and crossed quotes are rejected.
    pub fn new(tick: f64, bids: &[(f64, f64)], asks: &[(f64, f64)]) -> Result<Self, LobError> {
        if !(tick.is_finite() && tick > 0.0) {
            return Err(LobError::BadTick);
        }
        let side = |levels: &[(f64, f64)]| -> Result<Vec<Level>, LobError> {
            let mut out = Vec::with_capacity(levels.len());
            for &(price, volume) in levels {
                if volume < 0.0 || !volume.is_finite() {
                    return Err(LobError::NegativeVolume(price, volume));
                }
                if volume == 0.0 {
                    continue;
                }
                out.push(Level { ticks: to_ticks(price, tick)?, volume });
            }
            out.sort_by_key(|l| l.ticks);
            for w in out.windows(2) {
                if w[0].ticks == w[1].ticks {
                    return Err(LobError::DuplicateLevel(w[0].ticks as f64 * tick));
                }
            }
            Ok(out)
        };
        let book = OrderBook { tick, bids: side(bids)?, asks: side(asks)? };
        if let (Some(bid), Some(ask)) = (book.best_bid_ticks(), book.best_ask_ticks()) {
            if bid >= ask {
                return Err(LobError::CrossedBook {
                    bid: book.price_of(bid),
                    ask: book.price_of(ask),
                });
            }
        }
        Ok(book)
    }

    pub fn tick(&self) -> f64 {
        self.tick
    }

    pub fn bids(&self) -> &[Level] {
        &self.bids
    }

    pub fn asks(&self) -> &[Level] {
        &self.asks
    }

    pub fn price_of(&self, ticks: i64) -> f64 {
        ticks as f64 * self.tick
    }

    fn best_bid_ticks(&self) -> Option<i64> {
        self.bids.last().map(|l| l.ticks)
    }

    fn best_ask_ticks(&self) -> Option<i64> {
        self.asks.first().map(|l| l.ticks)
    }

    /// Best bid (sup of the bid support) and best ask (inf of the ask
    /// support); `None` on an empty side.
    pub fn best_quotes(&self) -> (Option<f64>, Option<f64>) {
        (
            self.best_bid_ticks().map(|t| self.price_of(t)),
            self.best_ask_ticks().map(|t| self.price_of(t)),
        )
    }

    /// Mid-price, defined when both sides are quoted.
    pub fn mid(&self) -> Option<f64> {
        match (self.best_bid_ticks(), self.best_ask_ticks()) {
            (Some(b), Some(a)) => Some((b + a) as f64 * 0.5 * self.tick),
            _ => None,
        }
    }

    pub fn total_bid_volume(&self) -> f64 {
        self.bids.iter().map(|l| l.volume).sum()
    }

    pub fn total_ask_volume(&self) -> f64 {
        self.asks.iter().map(|l| l.volume).sum()
    }
}

/// Inventory and cash changes of the liquidity provider caused by one
/// market order, together with the order price that triggered them.
///
/// Sign conventions: a sell market order (`α ≤` best bid) gives
/// `delta_l > 0, delta_k < 0` (the provider buys and pays); a buy
/// (`α ≥` best ask) gives `delta_l < 0, delta_k > 0`; an order strictly
/// inside the spread trades nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Execution {
    pub delta_l: f64,
    pub delta_k: f64,
    pub trade_price_alpha: f64,
}

/// Executes the market order `(β, α) = (α, α)`: consumes all asks priced
/// `≤ α` and all bids priced `≥ α`, no slippage, no partial fills.
/// Returns the execution and the book with the filled levels removed.
pub fn execute_market_order(
    book: &OrderBook,
    alpha: f64,
) -> Result<(Execution, OrderBook), LobError> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(LobError::NonPositiveAlpha(alpha));
    }
    let x = alpha / book.tick; // order price in tick units
    let mut delta_l = 0.0;
    let mut k_ticks = 0.0; // signed cash in tick·volume units
    let mut bids = Vec::with_capacity(book.bids.len());
    let mut asks = Vec::with_capacity(book.asks.len());
    for l in &book.asks {
        if (l.ticks as f64) <= x + GRID_EPS {
            delta_l -= l.volume;
            k_ticks += l.ticks as f64 * l.volume;
        } else {
            asks.push(*l);
        }
    }
    // bids accumulate best-first, the same float-summation order the shape
    // function uses, so executed volumes land exactly on its breakpoints
    for l in book.bids.iter().rev() {
        if (l.ticks as f64) >= x - GRID_EPS {
            delta_l += l.volume;
            k_ticks -= l.ticks as f64 * l.volume;
        } else {
            bids.push(*l);
        }
    }
    bids.reverse();
    let exec = Execution {
        delta_l,
        delta_k: k_ticks * book.tick,
        trade_price_alpha: alpha,
    };
    let after = OrderBook { tick: book.tick, bids, asks };
    Ok((exec, after))
}

/// The risk-neutral taker's optimal order price: sending `β = α = E[p]`
/// maximizes the expected wealth change `−E[p]·ΔL − ΔK` over all controls.
pub fn taker_optimal_order(book: &OrderBook, expected_price: f64) -> Result<f64, LobError> {
    if !(expected_price > 0.0) || !expected_price.is_finite() {
        return Err(LobError::NonPositiveExpectedPrice(expected_price));
    }
    let _ = book; // the optimum does not depend on the book contents
    Ok(expected_price)
}

/// Cumulative-depth potential of a book around a quoted price.
///
/// `γ(u)` integrates ask depth at offsets in `(0, u]` minus bid depth at
/// offsets in `[u, 0)`, so it is convex, vanishes with its derivative at 0,
/// and grows at most linearly (the book's total volume bounds `γ'`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFunction {
    pub quoted_price: f64,
    gamma: PiecewiseQuadratic,
}

impl ShapeFunction {
    pub fn from_parts(quoted_price: f64, gamma: PiecewiseQuadratic) -> Result<Self, LobError> {
        gamma.check_convex()?;
        Ok(ShapeFunction { quoted_price, gamma })
    }

    pub fn gamma(&self) -> &PiecewiseQuadratic {
        &self.gamma
    }

    /// `γ(u)` at a currency offset `u` from the quoted price.
    pub fn eval(&self, u: f64) -> f64 {
        self.gamma.eval(u)
    }

    /// `γ'(u)` with the execution convention at breakpoints: jumps are taken
    /// on the side away from zero, mirroring the closed execution intervals
    /// `a(0, α]` and `b[α, ∞)`. The comparison is exact in `f64`: to land on
    /// a breakpoint, evaluate at an offset derived from the same level
    /// arithmetic (`price_of(ticks) − p`), not at a perturbed float.
    pub fn slope(&self, u: f64) -> f64 {
        let (left, right) = self.gamma.deriv_one_sided(u);
        if u >= 0.0 {
            if right.is_finite() { right } else { left }
        } else if left.is_finite() {
            left
        } else {
            right
        }
    }

    /// Offsets of the depth breakpoints (level price minus quoted price).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.gamma.breakpoints()
    }
}

/// Builds the shape function of `book` at quoted price `p` (default:
/// mid-price). `p` must lie strictly inside the spread.
pub fn shape_from_book(book: &OrderBook, p: Option<f64>) -> Result<ShapeFunction, LobError> {
    let p = match p {
        Some(p) => p,
        None => book.mid().ok_or(LobError::QuotedPriceRequired)?,
    };
    let (bid, ask) = book.best_quotes();
    if bid.is_some_and(|b| p <= b) || ask.is_some_and(|a| p >= a) || !(p > 0.0) {
        return Err(LobError::QuotedPriceOutsideSpread { p });
    }

    // offsets from p in currency, walked outward from zero on each side
    let mut segs: Vec<Segment> = Vec::with_capacity(book.bids.len() + book.asks.len() + 1);

    // bid side: slopes are minus the cumulative bid volume, built rightmost-first
    let mut left_segs: Vec<Segment> = Vec::new();
    let mut cum = 0.0;
    let mut gamma_here = 0.0;
    let mut prev_off = f64::NAN;
    for l in book.bids.iter().rev() {
        let off = book.price_of(l.ticks) - p;
        if !prev_off.is_nan() {
            // γ(u) = γ(prev_off) + cum·(prev_off − u) on [off, prev_off]
            left_segs.push(Segment::new(off, prev_off, 0.0, -cum, gamma_here + cum * prev_off));
            gamma_here += cum * (prev_off - off);
        }
        cum += l.volume;
        prev_off = off;
    }
    if !prev_off.is_nan() {
        left_segs.push(Segment::new(
            f64::NEG_INFINITY,
            prev_off,
            0.0,
            -cum,
            gamma_here + cum * prev_off,
        ));
    }
    left_segs.reverse();
    segs.extend(left_segs);

    // flat middle across the spread
    let mid_lo = book
        .bids
        .last()
        .map(|l| book.price_of(l.ticks) - p)
        .unwrap_or(f64::NEG_INFINITY);
    let mid_hi = book
        .asks
        .first()
        .map(|l| book.price_of(l.ticks) - p)
        .unwrap_or(f64::INFINITY);
    segs.push(Segment::new(mid_lo, mid_hi, 0.0, 0.0, 0.0));

    // ask side: slopes are the cumulative ask volume
    cum = 0.0;
    gamma_here = 0.0;
    prev_off = f64::NAN;
    for l in &book.asks {
        let off = book.price_of(l.ticks) - p;
        if !prev_off.is_nan() {
            segs.push(Segment::new(prev_off, off, 0.0, cum, gamma_here - cum * prev_off));
            gamma_here += cum * (off - prev_off);
        }
        cum += l.volume;
        prev_off = off;
    }
    if !prev_off.is_nan() {
        segs.push(Segment::new(prev_off, f64::INFINITY, 0.0, cum, gamma_here - cum * prev_off));
    }

    let gamma = PiecewiseQuadratic::new(segs).map_err(|_| LobError::NotConvex)?;
    ShapeFunction::from_parts(p, gamma)
}

/// Transaction costs as a function of traded volume: the Legendre transform
/// of the shape function. Finite exactly on the volumes the book can absorb;
/// outside that range the cost is `+∞` (a hard domain bound, not a large
/// number).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFunction {
    pub quoted_price: f64,
    c: PiecewiseQuadratic,
}

impl CostFunction {
    pub fn from_parts(quoted_price: f64, c: PiecewiseQuadratic) -> Result<Self, LobError> {
        c.check_convex()?;
        Ok(CostFunction { quoted_price, c })
    }

    pub fn function(&self) -> &PiecewiseQuadratic {
        &self.c
    }

    /// `c(v)` for a traded volume `v` (the taker's buy volume when positive);
    /// `+∞` beyond the available depth.
    pub fn eval(&self, v: f64) -> f64 {
        self.c.eval(v)
    }

    /// Volumes with finite cost: `[−total bid volume, +total ask volume]`
    /// for a book-derived cost.
    pub fn domain(&self) -> (f64, f64) {
        self.c.domain()
    }
}

/// Exact conjugation `c(l) = sup_u (u·l − γ(u))`.
pub fn legendre(shape: &ShapeFunction) -> Result<CostFunction, LobError> {
    Ok(CostFunction {
        quoted_price: shape.quoted_price,
        c: shape.gamma.conjugate()?,
    })
}

/// Inverse transform: biconjugation returns the (closed convex) shape exactly.
pub fn legendre_inverse(cost: &CostFunction) -> Result<ShapeFunction, LobError> {
    Ok(ShapeFunction {
        quoted_price: cost.quoted_price,
        gamma: cost.c.conjugate()?,
    })
}

/// Post-trade transaction-price offset from the quoted price: `c'(−ΔL)`,
/// the price impact in the absence of price recovery. The derivative is
/// taken on the side toward zero, so a volume that exactly exhausts `k`
/// levels reports the deepest executed level.
pub fn impact_price(cost: &CostFunction, delta_l: f64) -> Result<f64, LobError> {
    let v = -delta_l;
    let (lo, hi) = cost.domain();
    if !(lo <= v && v <= hi) {
        return Err(LobError::VolumeExceedsDepth(v));
    }
    if v == 0.0 {
        return Ok(0.0);
    }
    let (left, right) = cost.c.deriv_one_sided(v);
    let side_toward_zero = if v > 0.0 { left } else { right };
    if side_toward_zero.is_finite() {
        Ok(side_toward_zero)
    } else {
        Err(LobError::VolumeExceedsDepth(v))
    }
}
