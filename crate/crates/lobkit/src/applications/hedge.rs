//! Replication of European payoffs under spread-proportional costs.
//!
//! With the spread scaled to volatility as `s = √(2π)·λ·σ` and λ > 1/2, the
//! replication argument turns the usual pricing equation into
//!
//! ```text
//! ∂_t v + (λ − 1/2)·σ²(t, p)·∂²_p v = 0,   v(T, p) = f(p)
//! ```
//!
//! i.e. a multiplicative factor √(2λ−1) on the implied local volatility.
//! The hedger's inventory volatility is `l = Γ·σ`, so negative-convexity
//! payoffs are replicated with limit orders and positive-convexity ones
//! with market orders.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HedgeError {
    #[error("lambda must exceed 1/2, got {0}")]
    BadLambda(f64),
    #[error("grid needs at least 3 price nodes and 1 time step")]
    BadGrid,
    #[error("price range must satisfy 0 <= p_min < p_max")]
    BadRange,
    #[error("volatility must be positive on the grid (failed at p = {0})")]
    BadVol(f64),
    #[error("maturity must be positive")]
    BadMaturity,
}

/// Terminal payoff.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    /// Piecewise-linear payoff through the given `(price, value)` knots,
    /// extrapolated linearly outside.
    Custom { knots: Vec<(f64, f64)> },
}

impl Payoff {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            Payoff::Call { strike } => (p - strike).max(0.0),
            Payoff::Put { strike } => (strike - p).max(0.0),
            Payoff::Custom { knots } => {
                if knots.is_empty() {
                    return 0.0;
                }
                if knots.len() == 1 {
                    return knots[0].1;
                }
                let i = match knots.iter().position(|&(x, _)| x > p) {
                    Some(0) => 0,
                    Some(i) => i - 1,
                    None => knots.len() - 2,
                };
                let (x0, y0) = knots[i];
                let (x1, y1) = knots[i + 1];
                y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            }
        }
    }
}

/// Local volatility of the price in currency per unit trade-clock time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LocalVol {
    /// σ(t, p) = value (arithmetic).
    Constant { value: f64 },
    /// σ(t, p) = vol·p (lognormal; `vol` is the usual relative volatility).
    Proportional { vol: f64 },
}

impl LocalVol {
    pub fn eval(&self, _t: f64, p: f64) -> f64 {
        match *self {
            LocalVol::Constant { value } => value,
            LocalVol::Proportional { vol } => vol * p,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub p_min: f64,
    pub p_max: f64,
    /// Number of price nodes.
    pub np: usize,
    /// Number of time steps.
    pub nt: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HedgeProblem {
    pub payoff: Payoff,
    pub local_vol: LocalVol,
    /// Spread/volatility ratio; must exceed 1/2 for the equation to be
    /// parabolic in the backward direction.
    pub lambda: f64,
    pub maturity: f64,
    pub grid: GridSpec,
}

/// Value surface and Greeks on the grid; `values[j][i]` is `v(t_j, p_i)`
/// with `t_0 = 0` and `t_nt = T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HedgeSurface {
    pub prices: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub delta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    /// Grid-quality notes; never fatal (the scheme is unconditionally
    /// stable) but worth surfacing.
    pub diagnostics: Vec<String>,
}

impl HedgeSurface {
    /// Surface interpolation: local quadratic in price (the value has
    /// curvature the grid must not alias into O(dp²) error), linear in time.
    pub fn value_at(&self, t: f64, p: f64) -> f64 {
        let bracket = |xs: &[f64], x: f64| -> (usize, f64) {
            if x <= xs[0] {
                return (0, 0.0);
            }
            if x >= xs[xs.len() - 1] {
                return (xs.len() - 2, 1.0);
            }
            let i = (xs.partition_point(|&v| v <= x) - 1).min(xs.len() - 2);
            (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
        };
        let (j, wt) = bracket(&self.times, t);
        let quad = |row: &[f64]| -> f64 {
            let n = self.prices.len();
            let (i, _) = bracket(&self.prices, p);
            // centered 3-point Lagrange stencil
            let c = i.clamp(1, n - 2);
            let (x0, x1, x2) = (self.prices[c - 1], self.prices[c], self.prices[c + 1]);
            let (y0, y1, y2) = (row[c - 1], row[c], row[c + 1]);
            y0 * (p - x1) * (p - x2) / ((x0 - x1) * (x0 - x2))
                + y1 * (p - x0) * (p - x2) / ((x1 - x0) * (x1 - x2))
                + y2 * (p - x0) * (p - x1) / ((x2 - x0) * (x2 - x1))
        };
        quad(&self.values[j]) * (1.0 - wt) + quad(&self.values[j + 1]) * wt
    }
}

/// Tridiagonal solve (Thomas algorithm); diagonals indexed by row.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c_star = vec![0.0; n];
    let mut d = diag.to_vec();
    c_star[0] = upper[0] / d[0];
    rhs[0] /= d[0];
    for i in 1..n {
        let m = d[i] - lower[i] * c_star[i - 1];
        c_star[i] = upper[i] / m;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / m;
        d[i] = m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_star[i] * rhs[i + 1];
    }
}

/// Crank–Nicolson backward solve of the replication equation with `Γ = 0`
/// boundary conditions (the boundary values stay at their terminal payoff).
/// The first two time steps are taken fully implicit to damp the oscillatory
/// response of the scheme to the payoff kink.
pub fn hedge_pde_solve(problem: &HedgeProblem) -> Result<HedgeSurface, HedgeError> {
    if !(problem.lambda > 0.5) {
        return Err(HedgeError::BadLambda(problem.lambda));
    }
    if !(problem.maturity > 0.0) {
        return Err(HedgeError::BadMaturity);
    }
    let g = &problem.grid;
    if g.np < 3 || g.nt < 1 {
        return Err(HedgeError::BadGrid);
    }
    if !(g.p_min >= 0.0 && g.p_min < g.p_max) {
        return Err(HedgeError::BadRange);
    }
    let np = g.np;
    let nt = g.nt;
    let dp = (g.p_max - g.p_min) / (np - 1) as f64;
    let dt = problem.maturity / nt as f64;
    let prices: Vec<f64> = (0..np).map(|i| g.p_min + i as f64 * dp).collect();
    let times: Vec<f64> = (0..=nt).map(|j| j as f64 * dt).collect();

    // diffusion coefficient a(t, p) = (λ − 1/2)·σ²
    let lam = problem.lambda - 0.5;
    let coef = |t: f64, p: f64| -> Result<f64, HedgeError> {
        let sigma = problem.local_vol.eval(t, p);
        if !(sigma > 0.0) && p > g.p_min && p < g.p_max {
            return Err(HedgeError::BadVol(p));
        }
        Ok(lam * sigma * sigma)
    };
    coef(0.0, 0.5 * (g.p_min + g.p_max))?;

    let mut values = vec![vec![0.0; np]; nt + 1];
    for (i, &p) in prices.iter().enumerate() {
        values[nt][i] = problem.payoff.eval(p);
    }

    let mut diagnostics = Vec::new();
    let mesh_ratio = prices
        .iter()
        .map(|&p| coef(0.0, p).unwrap_or(0.0) * dt / (dp * dp))
        .fold(0.0f64, f64::max);
    if mesh_ratio > 100.0 {
        diagnostics.push(format!(
            "time step is large relative to the price mesh (a·dt/dp² = {mesh_ratio:.1}); \
             the scheme stays stable but Greeks may oscillate near payoff kinks"
        ));
    }

    let mut lower = vec![0.0; np];
    let mut diag = vec![0.0; np];
    let mut upper = vec![0.0; np];
    let mut rhs = vec![0.0; np];

    // two initial fully-implicit steps (θ = 1), then Crank–Nicolson (θ = 1/2)
    for j in (0..nt).rev() {
        let theta: f64 = if j >= nt.saturating_sub(2) { 1.0 } else { 0.5 };
        let t = times[j];
        diag[0] = 1.0;
        upper[0] = 0.0;
        rhs[0] = values[j + 1][0];
        diag[np - 1] = 1.0;
        lower[np - 1] = 0.0;
        rhs[np - 1] = values[j + 1][np - 1];
        for i in 1..np - 1 {
            let a = coef(t, prices[i])?;
            let r = a * dt / (dp * dp);
            lower[i] = -theta * r;
            diag[i] = 1.0 + 2.0 * theta * r;
            upper[i] = -theta * r;
            let explicit = (1.0 - theta) * r;
            rhs[i] = values[j + 1][i]
                + explicit * (values[j + 1][i + 1] - 2.0 * values[j + 1][i] + values[j + 1][i - 1]);
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        values[j].copy_from_slice(&rhs);
    }

    // central-difference Greeks; one-sided at the edges, forward θ in time
    let mut delta = vec![vec![0.0; np]; nt + 1];
    let mut gamma = vec![vec![0.0; np]; nt + 1];
    let mut theta_g = vec![vec![0.0; np]; nt + 1];
    for j in 0..=nt {
        for i in 0..np {
            delta[j][i] = if i == 0 {
                (values[j][1] - values[j][0]) / dp
            } else if i == np - 1 {
                (values[j][np - 1] - values[j][np - 2]) / dp
            } else {
                (values[j][i + 1] - values[j][i - 1]) / (2.0 * dp)
            };
            gamma[j][i] = if i == 0 || i == np - 1 {
                0.0
            } else {
                (values[j][i + 1] - 2.0 * values[j][i] + values[j][i - 1]) / (dp * dp)
            };
            theta_g[j][i] = if j == nt {
                (values[j][i] - values[j - 1][i]) / dt
            } else {
                (values[j + 1][i] - values[j][i]) / dt
            };
        }
    }
    Ok(HedgeSurface { prices, times, values, delta, gamma, theta: theta_g, diagnostics })
}

/// How the replicating inventory trades at a grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderType {
    /// `l < 0`: providing liquidity.
    Limit,
    /// `l > 0`: taking liquidity.
    Market,
    /// `l = 0`: no convexity to trade.
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InventoryVol {
    /// `l(t, p) = Γ(t, p)·σ(t, p)` on the grid.
    pub l: Vec<Vec<f64>>,
    pub order_type: Vec<Vec<OrderType>>,
}

/// Inventory volatility of the replicating strategy and the order-type
/// classification; `tol` is the absolute threshold below which `l` counts
/// as zero (grid noise on affine payoffs).
pub fn hedge_inventory_vol(
    surface: &HedgeSurface,
    local_vol: &LocalVol,
    tol: f64,
) -> InventoryVol {
    let mut l = Vec::with_capacity(surface.times.len());
    let mut order_type = Vec::with_capacity(surface.times.len());
    for (j, &t) in surface.times.iter().enumerate() {
        let mut lrow = Vec::with_capacity(surface.prices.len());
        let mut orow = Vec::with_capacity(surface.prices.len());
        for (i, &p) in surface.prices.iter().enumerate() {
            let li = surface.gamma[j][i] * local_vol.eval(t, p);
            lrow.push(li);
            orow.push(if li > tol {
                OrderType::Market
            } else if li < -tol {
                OrderType::Limit
            } else {
                OrderType::None
            });
        }
        l.push(lrow);
        order_type.push(orow);
    }
    InventoryVol { l, order_type }
}

/// Zero-rate Black–Scholes call price; the closed-form oracle used by tests
/// and the self-check against the λ-rescaled equation.
pub fn black_scholes_call(spot: f64, strike: f64, vol: f64, maturity: f64) -> f64 {
    if maturity <= 0.0 || vol <= 0.0 {
        return (spot - strike).max(0.0);
    }
    let st = vol * maturity.sqrt();
    let d1 = ((spot / strike).ln() + 0.5 * st * st) / st;
    let d2 = d1 - st;
    let cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    spot * cdf(d1) - strike * cdf(d2)
}
