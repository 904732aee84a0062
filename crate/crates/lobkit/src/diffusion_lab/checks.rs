//! Monte Carlo verification of the diffusion-limit statements.
//!
//! Each check discretizes the continuous pair at tick size `1/√N`, forms the
//! trade-clock sum the theory renormalizes, and compares the Monte Carlo mean
//! against the limiting integral. The pass rule is
//! `|mean − target| ≤ 3·stderr + bias allowance`, with the `C/√N` bias
//! allowance estimated from a second run at a coarser `N` (Euler bias and
//! floor effects are absorbed there rather than modeled).

use super::coeffs::{integrate, ItoCoefficients};
use super::phi::{phi_pwq, phi_pwq_deriv_sq};
use super::sim::{mean_stderr, per_path_stats, SimConfig, SimError};
use crate::pwq::PiecewiseQuadratic;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Stream-id offsets so the fine run, the coarse bias run and any secondary
/// statistic draw independent randomness from one seed.
const STREAM_FINE: u64 = 0;
const STREAM_COARSE: u64 = 1 << 32;

/// Outcome of one limit check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub check: String,
    pub steps_per_unit: u64,
    pub paths: u64,
    pub horizon: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub target: f64,
    /// `|Ĉ|/√N` with `Ĉ` fitted from the coarse and fine means.
    pub bias_allowance: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    fn from_samples(
        check: &str,
        cfg: &SimConfig,
        samples: &[f64],
        coarse_mean: f64,
        coarse_n: u64,
        target: f64,
    ) -> ConvergenceReport {
        let (mean, stderr) = mean_stderr(samples);
        let inv = |n: u64| 1.0 / (n as f64).sqrt();
        let denom = inv(coarse_n) - inv(cfg.steps_per_unit);
        let c_hat = if denom.abs() > 0.0 { (coarse_mean - mean) / denom } else { 0.0 };
        let bias_allowance = c_hat.abs() * inv(cfg.steps_per_unit);
        let pass = (mean - target).abs() <= 3.0 * stderr + bias_allowance;
        ConvergenceReport {
            check: check.to_string(),
            steps_per_unit: cfg.steps_per_unit,
            paths: cfg.paths,
            horizon: cfg.horizon,
            mc_mean: mean,
            mc_stderr: stderr,
            target,
            bias_allowance,
            pass,
        }
    }
}

/// Spread-cost sum `S_N = Σ_k (s(k/N)/2)·(1/√N)·|Δ_k L|` against its limit
/// `∫ s(t)·|l(t)|/√(2π) dt`.
pub fn spread_cost_limit_check(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
) -> Result<ConvergenceReport, SimError> {
    let stat = |n: f64| {
        move |path: &super::sim::PathState| -> Result<f64, SimError> {
            let mut sum = 0.0;
            for k in 0..path.inventory.len() - 1 {
                let dl = path.inventory[k + 1] - path.inventory[k];
                sum += 0.5 * coeffs.spread.eval(path.t[k]) / n.sqrt() * dl.abs();
            }
            Ok(sum)
        }
    };
    let fine = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, stat(cfg.steps_per_unit as f64))?;
    let coarse_cfg = cfg.with_steps_per_unit((cfg.steps_per_unit / 4).max(2));
    let coarse = per_path_stats(
        coeffs,
        &coarse_cfg,
        100.0,
        0.0,
        STREAM_COARSE,
        stat(coarse_cfg.steps_per_unit as f64),
    )?;
    let target = integrate(
        &|t| coeffs.spread.eval(t) * coeffs.l.eval(t).abs() / (2.0 * PI).sqrt(),
        0.0,
        cfg.horizon,
        1e-10,
    );
    Ok(ConvergenceReport::from_samples(
        "spread-limit",
        cfg,
        &fine,
        mean_stderr(&coarse).0,
        coarse_cfg.steps_per_unit,
        target,
    ))
}

/// Price-recovery statistic
/// `(1/N)·Σ_{⌊t1·N⌋ ≤ k ≤ ⌊t2·N⌋} ((√N·Δ_k p)² − s(k/N)·|√N·Δ_k p|)`
/// against `∫_{t1}^{t2} (σ − √(2/π)·s)·σ dt`. The target is accumulated along
/// each path so price-dependent volatilities are handled too.
pub fn recovery_statistic(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
    t1: f64,
    t2: f64,
) -> Result<ConvergenceReport, SimError> {
    if !(0.0 <= t1 && t1 < t2 && t2 <= cfg.horizon) {
        return Err(SimError::BadHorizon(t2));
    }
    let stat = |n: f64| {
        move |path: &super::sim::PathState| -> Result<f64, SimError> {
            let k1 = (t1 * n).floor() as usize;
            let k2 = ((t2 * n).floor() as usize).min(path.price.len().saturating_sub(2));
            let mut sum = 0.0;
            for k in k1..=k2 {
                let dp_scaled = (path.price[k + 1] - path.price[k]) * n.sqrt();
                sum += (dp_scaled * dp_scaled
                    - coeffs.spread.eval(path.t[k]) * dp_scaled.abs())
                    / n;
            }
            Ok(sum)
        }
    };
    // on-path target: the same index range, Riemann-summed
    let target_stat = |n: f64| {
        move |path: &super::sim::PathState| -> Result<f64, SimError> {
            let k1 = (t1 * n).floor() as usize;
            let k2 = ((t2 * n).floor() as usize).min(path.price.len().saturating_sub(2));
            let mut sum = 0.0;
            let two_over_pi_sqrt = (2.0 / PI).sqrt();
            for k in k1..=k2 {
                let sigma = coeffs.sigma.eval(path.t[k], path.price[k]);
                let s = coeffs.spread.eval(path.t[k]);
                sum += (sigma - two_over_pi_sqrt * s) * sigma / n;
            }
            Ok(sum)
        }
    };
    let n = cfg.steps_per_unit as f64;
    let fine = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, stat(n))?;
    let targets = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, target_stat(n))?;
    let coarse_cfg = cfg.with_steps_per_unit((cfg.steps_per_unit / 4).max(2));
    let coarse = per_path_stats(
        coeffs,
        &coarse_cfg,
        100.0,
        0.0,
        STREAM_COARSE,
        stat(coarse_cfg.steps_per_unit as f64),
    )?;
    Ok(ConvergenceReport::from_samples(
        "recovery",
        cfg,
        &fine,
        mean_stderr(&coarse).0,
        coarse_cfg.steps_per_unit,
        mean_stderr(&targets).0,
    ))
}

/// Both statistics of the general-book limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralCostReport {
    /// `(1/N)·Σ c(√N·Δ_k L)` vs `∫ Φ_{l(t)}(c) dt`.
    pub cost_limit: ConvergenceReport,
    /// `(1/N)·Σ ((√N·Δ_k p)² − c'(√N·Δ_k L)²)` vs `∫ (σ² − Φ_{l(t)}((c')²)) dt`.
    pub vol_bound: ConvergenceReport,
}

/// Samples the growth condition `c(v) ≤ C·v²` at increasing volumes; a
/// bounded cost domain (finite book) fails it.
fn check_growth(cost: &PiecewiseQuadratic, vol_scale: f64) -> Result<(), SimError> {
    let reach = 16.0 * vol_scale.max(1.0);
    let mut v = 1.0f64.min(reach);
    while v <= reach {
        for sign in [-1.0, 1.0] {
            let c = cost.eval(sign * v);
            if !c.is_finite() {
                return Err(SimError::GrowthCondition(format!(
                    "cost is not finite at volume {}",
                    sign * v
                )));
            }
            if c > 1e12 * v * v {
                return Err(SimError::GrowthCondition(format!(
                    "cost at volume {} exceeds the quadratic envelope",
                    sign * v
                )));
            }
        }
        v *= 2.0;
    }
    Ok(())
}

/// Verifies the renormalized transaction-cost sum and the volatility-bound
/// statistic for a convex cost `c` with `c(0) = 0` and quadratic growth.
/// The microscopic sum uses `c^N(v) = c(√N·v)/N` exactly as renormalized.
pub fn general_cost_limit_check(
    coeffs: &ItoCoefficients,
    cost: &PiecewiseQuadratic,
    cfg: &SimConfig,
) -> Result<GeneralCostReport, SimError> {
    cost.check_convex()
        .map_err(|e| SimError::GrowthCondition(format!("cost not convex: {e}")))?;
    let l_scale = (0..=16)
        .map(|k| coeffs.l.eval(cfg.horizon * k as f64 / 16.0).abs())
        .fold(0.0f64, f64::max);
    check_growth(cost, l_scale)?;

    let n = cfg.steps_per_unit as f64;
    // path-independent targets per step, precomputed on the time grid
    let steps = cfg.steps();
    let mut phi_c = Vec::with_capacity(steps);
    let mut phi_dsq = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = k as f64 / n;
        let l = coeffs.l.eval(t).abs();
        if l == 0.0 {
            phi_c.push(cost.eval(0.0));
            phi_dsq.push(0.0);
        } else {
            phi_c.push(phi_pwq(l, cost).map_err(|e| SimError::GrowthCondition(e.to_string()))?);
            phi_dsq
                .push(phi_pwq_deriv_sq(l, cost).map_err(|e| {
                    SimError::GrowthCondition(e.to_string())
                })?);
        }
    }
    let cost_target = phi_c.iter().sum::<f64>() / n;

    let cost_stat = |nn: f64| {
        move |path: &super::sim::PathState| -> Result<f64, SimError> {
            let mut sum = 0.0;
            for k in 0..path.inventory.len() - 1 {
                let dl = (path.inventory[k + 1] - path.inventory[k]) * nn.sqrt();
                let c = cost.eval(dl);
                if !c.is_finite() {
                    return Err(SimError::CostDomain { volume: dl, t: path.t[k] });
                }
                sum += c / nn;
            }
            Ok(sum)
        }
    };
    let fine = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, cost_stat(n))?;
    let coarse_cfg = cfg.with_steps_per_unit((cfg.steps_per_unit / 4).max(2));
    let coarse = per_path_stats(
        coeffs,
        &coarse_cfg,
        100.0,
        0.0,
        STREAM_COARSE,
        cost_stat(coarse_cfg.steps_per_unit as f64),
    )?;
    let cost_limit = ConvergenceReport::from_samples(
        "general-cost",
        cfg,
        &fine,
        mean_stderr(&coarse).0,
        coarse_cfg.steps_per_unit,
        cost_target,
    );

    // volatility-bound statistic, paired with its on-path σ² integral
    let vol_stat = move |path: &super::sim::PathState| -> Result<f64, SimError> {
        let mut sum = 0.0;
        for k in 0..path.price.len() - 1 {
            let dp = (path.price[k + 1] - path.price[k]) * n.sqrt();
            let dl = (path.inventory[k + 1] - path.inventory[k]) * n.sqrt();
            let slope = cost.deriv(dl);
            if !slope.is_finite() {
                return Err(SimError::CostDomain { volume: dl, t: path.t[k] });
            }
            sum += (dp * dp - slope * slope) / n;
        }
        Ok(sum)
    };
    let vol_target_stat = |path: &super::sim::PathState| -> Result<f64, SimError> {
        let mut sum = 0.0;
        for k in 0..path.price.len() - 1 {
            let sigma = coeffs.sigma.eval(path.t[k], path.price[k]);
            sum += (sigma * sigma - phi_dsq[k]) / n;
        }
        Ok(sum)
    };
    let vol_fine = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, vol_stat)?;
    let vol_targets = per_path_stats(coeffs, cfg, 100.0, 0.0, STREAM_FINE, vol_target_stat)?;
    let vol_bound = ConvergenceReport::from_samples(
        "general-cost-vol-bound",
        cfg,
        &vol_fine,
        mean_stderr(&vol_fine).0, // no separate coarse run: bias folded into stderr
        coarse_cfg.steps_per_unit,
        mean_stderr(&vol_targets).0,
    );

    Ok(GeneralCostReport { cost_limit, vol_bound })
}
