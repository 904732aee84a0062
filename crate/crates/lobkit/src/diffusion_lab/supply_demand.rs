//! Supply-and-demand construction: perfect fill rate with deterministic
//! price recovery.
//!
//! Given one side of the pair, the other is built microscopically step by
//! step through the renormalized book: `Δp = λ·c^N'(−ΔL)` when the inventory
//! drives, `ΔL = −γ^N'(Δp/λ)` when the price does, with
//! `c^N(v) = c(√N·v)/N` so `c^N'(v) = c'(√N·v)/√N`. The recovery coefficient
//! `λ ∈ (0, 1]` scales how much of the impact survives; `λ → 0` freezes the
//! price entirely.

use super::coeffs::ItoCoefficients;
use super::phi::{phi_pwq_deriv_sq, phi_pwq_id_deriv, phi_pwq_second_deriv};
use super::sim::{mean_stderr, simulate_one, PathBundle, SimConfig, SimError};
use crate::pwq::PiecewiseQuadratic;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which process is simulated as an Itô diffusion; the other is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Driver {
    InventoryGiven,
    PriceGiven,
}

/// One first/second-moment comparison at 3 Monte Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub pass: bool,
}

fn moment(samples: &[f64], target: f64) -> MomentCheck {
    let (estimate, stderr) = mean_stderr(samples);
    MomentCheck { estimate, stderr, target, pass: (estimate - target).abs() <= 3.0 * stderr }
}

/// Moments of the constructed process against the limit theorem, all per
/// unit time over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyDemandReport {
    pub driver: Driver,
    pub lambda_r: f64,
    /// Drift of the constructed process.
    pub drift: MomentCheck,
    /// Realized variance of the constructed process (target is the squared
    /// limit volatility).
    pub variance: MomentCheck,
    /// Realized quadratic covariation `Σ Δp·ΔL` per unit time.
    pub covariation: MomentCheck,
    /// Covariation of the driving Brownian motions (the realized covariation
    /// normalized by both volatilities); its target is free of `λ`.
    pub brownian_covariation: MomentCheck,
    /// The covariation target as printed without the recovery coefficient,
    /// for side-by-side comparison with `covariation.target = λ·(this)`.
    pub covariation_target_unscaled: f64,
}

/// Simulates the driving process and constructs the other one through the
/// book, then checks the constructed moments against the limit theorem:
/// drift `−λ·b·Φ_l(c'')`, volatility `λ·√(Φ_l((c')²))` and covariation
/// `d[p, L] = −λ·Φ_l(id·c') dt` (reported both with and without `λ`).
pub fn supply_demand_simulate(
    coeffs: &ItoCoefficients,
    cost: &PiecewiseQuadratic,
    cfg: &SimConfig,
    driver: Driver,
) -> Result<(PathBundle, SupplyDemandReport), SimError> {
    cfg.validate()?;
    coeffs.validate(cfg.horizon, 100.0)?;
    cost.check_convex()
        .map_err(|e| SimError::GrowthCondition(format!("cost not convex: {e}")))?;
    let lambda = coeffs.lambda_r;
    let n = cfg.steps_per_unit as f64;
    let sqrt_n = n.sqrt();
    let gamma = match driver {
        Driver::PriceGiven => Some(cost.conjugate().map_err(|e| {
            SimError::GrowthCondition(format!("cost has no conjugate shape: {e}"))
        })?),
        Driver::InventoryGiven => None,
    };

    type PricesAndInventories = Vec<(Vec<f64>, Vec<f64>)>;
    let paths: Result<PricesAndInventories, SimError> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let driven = simulate_one(coeffs, cfg, 100.0, 0.0, i)?;
            match driver {
                Driver::InventoryGiven => {
                    let inventory = driven.inventory;
                    let mut price = Vec::with_capacity(inventory.len());
                    let mut p = 100.0;
                    price.push(p);
                    for k in 0..inventory.len() - 1 {
                        let dl = inventory[k + 1] - inventory[k];
                        let slope = cost.deriv(-sqrt_n * dl);
                        if !slope.is_finite() {
                            return Err(SimError::CostDomain {
                                volume: -sqrt_n * dl,
                                t: driven.t[k],
                            });
                        }
                        p += lambda * slope / sqrt_n;
                        price.push(p);
                    }
                    Ok((price, inventory))
                }
                Driver::PriceGiven => {
                    let gamma = gamma.as_ref().unwrap();
                    let price = driven.price;
                    let mut inventory = Vec::with_capacity(price.len());
                    let mut l = 0.0;
                    inventory.push(l);
                    for k in 0..price.len() - 1 {
                        let dp = price[k + 1] - price[k];
                        let slope = gamma.deriv(sqrt_n * dp / lambda);
                        if !slope.is_finite() {
                            return Err(SimError::CostDomain {
                                volume: sqrt_n * dp / lambda,
                                t: driven.t[k],
                            });
                        }
                        l -= slope / sqrt_n;
                        inventory.push(l);
                    }
                    Ok((price, inventory))
                }
            }
        })
        .collect();
    let paths = paths?;

    let bundle = PathBundle {
        steps_per_unit: cfg.steps_per_unit,
        horizon: cfg.horizon,
        price: paths.iter().map(|(p, _)| p.clone()).collect(),
        inventory: paths.into_iter().map(|(_, l)| l).collect(),
    };

    // per-path realized moments of the constructed process, per unit time
    let t_total = cfg.steps() as f64 / n;
    let constructed: Vec<&Vec<f64>> = match driver {
        Driver::InventoryGiven => bundle.price.iter().collect(),
        Driver::PriceGiven => bundle.inventory.iter().collect(),
    };
    let drift_samples: Vec<f64> = constructed
        .iter()
        .map(|x| (x[x.len() - 1] - x[0]) / t_total)
        .collect();
    let var_samples: Vec<f64> = constructed
        .iter()
        .map(|x| x.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum::<f64>() / t_total)
        .collect();
    let cov_samples: Vec<f64> = bundle
        .price
        .iter()
        .zip(&bundle.inventory)
        .map(|(p, l)| {
            p.windows(2)
                .zip(l.windows(2))
                .map(|(wp, wl)| (wp[1] - wp[0]) * (wl[1] - wl[0]))
                .sum::<f64>()
                / t_total
        })
        .collect();

    // limit-theorem targets, time-averaged over the horizon
    let avg = |f: &dyn Fn(f64) -> Result<f64, SimError>| -> Result<f64, SimError> {
        let grid = 64;
        let mut sum = 0.0;
        for k in 0..grid {
            let t = cfg.horizon * (k as f64 + 0.5) / grid as f64;
            sum += f(t)?;
        }
        Ok(sum / grid as f64)
    };
    let phi_err = |e: super::phi::PhiError| SimError::GrowthCondition(e.to_string());

    let report = match driver {
        Driver::InventoryGiven => {
            let drift_target = -lambda
                * avg(&|t| {
                    let l = coeffs.l.eval(t).abs().max(1e-300);
                    Ok(coeffs.b.eval(t) * phi_pwq_second_deriv(l, cost).map_err(phi_err)?)
                })?;
            let var_target = lambda
                * lambda
                * avg(&|t| {
                    let l = coeffs.l.eval(t).abs().max(1e-300);
                    phi_pwq_deriv_sq(l, cost).map_err(phi_err)
                })?;
            let cov_unscaled =
                -avg(&|t| {
                    let l = coeffs.l.eval(t).abs().max(1e-300);
                    phi_pwq_id_deriv(l, cost).map_err(phi_err)
                })?;
            let cov_target = lambda * cov_unscaled;
            // normalized by both limit volatilities: λ cancels
            let l_avg = avg(&|t| Ok(coeffs.l.eval(t).abs()))?;
            let brownian_samples: Vec<f64> = cov_samples
                .iter()
                .map(|c| c / (var_target.sqrt() * l_avg))
                .collect();
            let brownian_target = cov_target / (var_target.sqrt() * l_avg);
            SupplyDemandReport {
                driver,
                lambda_r: lambda,
                drift: moment(&drift_samples, drift_target),
                variance: moment(&var_samples, var_target),
                covariation: moment(&cov_samples, cov_target),
                brownian_covariation: moment(&brownian_samples, brownian_target),
                covariation_target_unscaled: cov_unscaled,
            }
        }
        Driver::PriceGiven => {
            // with g(y) = γ(y/λ): γ''(λ⁻¹y) = λ²·g''(y), (γ'(λ⁻¹y))² =
            // λ²·(g'(y))², id·γ'(λ⁻¹y) = λ·(id·g'(y))
            let gamma = gamma.as_ref().unwrap();
            let scaled = gamma.scale_arg(1.0 / lambda);
            let lam2 = lambda * lambda;
            let drift_target = -lam2
                * avg(&|t| {
                    let sigma = coeffs.sigma.eval(t, 100.0);
                    Ok(coeffs.mu.eval(t, 100.0)
                        * phi_pwq_second_deriv(sigma, &scaled).map_err(phi_err)?)
                })?;
            let var_target = lam2
                * avg(&|t| {
                    let sigma = coeffs.sigma.eval(t, 100.0);
                    phi_pwq_deriv_sq(sigma, &scaled).map_err(phi_err)
                })?;
            let cov_target = -lambda
                * avg(&|t| {
                    let sigma = coeffs.sigma.eval(t, 100.0);
                    phi_pwq_id_deriv(sigma, &scaled).map_err(phi_err)
                })?;
            let sigma_avg = avg(&|t| Ok(coeffs.sigma.eval(t, 100.0)))?;
            let brownian_samples: Vec<f64> = cov_samples
                .iter()
                .map(|c| c / (var_target.sqrt() * sigma_avg))
                .collect();
            SupplyDemandReport {
                driver,
                lambda_r: lambda,
                drift: moment(&drift_samples, drift_target),
                variance: moment(&var_samples, var_target),
                covariation: moment(&cov_samples, cov_target),
                brownian_covariation: moment(
                    &brownian_samples,
                    cov_target / (var_target.sqrt() * sigma_avg),
                ),
                covariation_target_unscaled: cov_target,
            }
        }
    };
    Ok((bundle, report))
}

/// Flat-book wealth identity report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatBookReport {
    pub lambda_r: f64,
    pub depth: f64,
    pub steps: usize,
    pub paths: u64,
    /// Max over paths and steps of the deviation from the exact telescoped
    /// identity `X_n − X_0 = −(λ/m)·(L_n² − L_0²)/2 + ((1−λ)/(2m))·Σ ΔL²`.
    pub max_identity_error: f64,
    /// For `λ = 1, m = 1` this is the verified closed form
    /// `X_n − X_0 = −(L_n² − L_0²)/2`.
    pub max_half_square_error: Option<f64>,
    /// Deviation from the identity as printed with a unit factor,
    /// `X_n − X_0 = −(L_n² − L_0²)`: reported for comparison, it does not
    /// hold (the exact telescoping carries the factor 1/2).
    pub max_printed_form_error: Option<f64>,
    pub final_wealth: f64,
    pub final_inventory: f64,
}

/// Runs the flat-book special case `γ'' = m` microscopically on supplied
/// inventory increments: `Δp = −(λ/m)·ΔL` per step, wealth increment
/// `L·Δp + ΔL²/(2m) + Δp·ΔL`, and verifies the telescoped identity exactly.
pub fn flat_book_identity_for_increments(
    increments: &[f64],
    lambda_r: f64,
    depth: f64,
) -> FlatBookReport {
    let (lam, m) = (lambda_r, depth);
    let mut l = 0.0f64;
    let mut x = 0.0f64;
    let mut sum_dl_sq = 0.0f64;
    let mut max_identity_error = 0.0f64;
    let mut max_half_sq = 0.0f64;
    let mut max_printed = 0.0f64;
    for &dl in increments {
        let dp = -(lam / m) * dl;
        x += l * dp + dl * dl / (2.0 * m) + dp * dl;
        l += dl;
        sum_dl_sq += dl * dl;
        let closed = -(lam / m) * l * l / 2.0 + (1.0 - lam) / (2.0 * m) * sum_dl_sq;
        max_identity_error = max_identity_error.max((x - closed).abs());
        if lam == 1.0 && m == 1.0 {
            max_half_sq = max_half_sq.max((x + l * l / 2.0).abs());
            max_printed = max_printed.max((x + l * l).abs());
        }
    }
    let unit_case = lambda_r == 1.0 && depth == 1.0;
    FlatBookReport {
        lambda_r,
        depth,
        steps: increments.len(),
        paths: 1,
        max_identity_error,
        max_half_square_error: unit_case.then_some(max_half_sq),
        max_printed_form_error: unit_case.then_some(max_printed),
        final_wealth: x,
        final_inventory: l,
    }
}

/// As [`flat_book_identity_for_increments`] with Euler–Maruyama inventory
/// paths drawn from the coefficients; errors are maxed over paths.
pub fn flat_book_identity_check(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
    lambda_r: f64,
    depth: f64,
) -> Result<FlatBookReport, SimError> {
    cfg.validate()?;
    let reports: Result<Vec<FlatBookReport>, SimError> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_one(coeffs, cfg, 100.0, 0.0, i)?;
            let increments: Vec<f64> =
                path.inventory.windows(2).map(|w| w[1] - w[0]).collect();
            Ok(flat_book_identity_for_increments(&increments, lambda_r, depth))
        })
        .collect();
    let reports = reports?;
    let mut out = reports[0].clone();
    for r in &reports[1..] {
        out.max_identity_error = out.max_identity_error.max(r.max_identity_error);
        out.max_half_square_error = match (out.max_half_square_error, r.max_half_square_error) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        out.max_printed_form_error =
            match (out.max_printed_form_error, r.max_printed_form_error) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
    }
    out.paths = cfg.paths;
    out.final_wealth = reports[reports.len() - 1].final_wealth;
    out.final_inventory = reports[reports.len() - 1].final_inventory;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_book_linear_impact_is_exact() {
        // Δp = −(λ/m)·ΔL per step, checked off the constructed paths
        let coeffs = ItoCoefficients { lambda_r: 0.5, ..ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0) };
        let cost = PiecewiseQuadratic::half_quadratic(1.0 / 2.0); // m = 2 → c = v²/4
        let cfg = SimConfig { steps_per_unit: 128, paths: 4, horizon: 1.0, seed: 10 };
        let (bundle, _) =
            supply_demand_simulate(&coeffs, &cost, &cfg, Driver::InventoryGiven).unwrap();
        for (p, l) in bundle.price.iter().zip(&bundle.inventory) {
            for k in 0..p.len() - 1 {
                let dp = p[k + 1] - p[k];
                let dl = l[k + 1] - l[k];
                assert!((dp + 0.5 / 2.0 * dl).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovery_zero_limit_freezes_price() {
        let coeffs = ItoCoefficients {
            lambda_r: 1e-9,
            ..ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
        };
        let cost = PiecewiseQuadratic::half_quadratic(1.0);
        let cfg = SimConfig { steps_per_unit: 64, paths: 2, horizon: 1.0, seed: 11 };
        let (bundle, _) =
            supply_demand_simulate(&coeffs, &cost, &cfg, Driver::InventoryGiven).unwrap();
        for p in &bundle.price {
            assert!((p[p.len() - 1] - p[0]).abs() < 1e-6);
        }
    }

    #[test]
    fn moments_match_limit_flat_book() {
        // m = 1, b = 0, l = 1: vol target λ, covariation target −λ,
        // Brownian covariation −1 for both λ values
        for (lambda, seed) in [(0.5, 12), (1.0, 13)] {
            let coeffs = ItoCoefficients {
                lambda_r: lambda,
                ..ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)
            };
            let cost = PiecewiseQuadratic::half_quadratic(1.0);
            let cfg = SimConfig { steps_per_unit: 2_000, paths: 100, horizon: 1.0, seed };
            let (_, report) =
                supply_demand_simulate(&coeffs, &cost, &cfg, Driver::InventoryGiven).unwrap();
            assert!((report.variance.target - lambda * lambda).abs() < 1e-12);
            assert!((report.covariation.target - (-lambda)).abs() < 1e-12);
            assert!((report.covariation_target_unscaled - (-1.0)).abs() < 1e-12);
            assert!((report.brownian_covariation.target - (-1.0)).abs() < 1e-12);
            assert!(report.drift.pass, "{report:?}");
            assert!(report.variance.pass, "{report:?}");
            assert!(report.covariation.pass, "{report:?}");
            assert!(report.brownian_covariation.pass, "{report:?}");
        }
    }

    #[test]
    fn price_given_direction_matches_inventory_given() {
        // flat book both ways: ΔL = −(m/λ)·Δp
        let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        let cost = PiecewiseQuadratic::half_quadratic(1.0);
        let cfg = SimConfig { steps_per_unit: 512, paths: 20, horizon: 1.0, seed: 14 };
        let (bundle, report) =
            supply_demand_simulate(&coeffs, &cost, &cfg, Driver::PriceGiven).unwrap();
        for (p, l) in bundle.price.iter().zip(&bundle.inventory) {
            for k in 0..p.len() - 1 {
                let dp = p[k + 1] - p[k];
                let dl = l[k + 1] - l[k];
                assert!((dl + dp).abs() < 1e-12);
            }
        }
        assert!(report.variance.pass && report.covariation.pass, "{report:?}");
    }

    #[test]
    fn flat_book_identity_single_step_and_walk() {
        // one unit step: ΔX = 0·(−1) + 1/2 − 1 = −1/2 = −(1² − 0²)/2
        let r = flat_book_identity_for_increments(&[1.0], 1.0, 1.0);
        assert!((r.final_wealth - (-0.5)).abs() < 1e-15);
        assert!(r.max_half_square_error.unwrap() < 1e-15);

        // ±1 random-walk inventory: the identity is exact in floating point
        let mut incs = Vec::new();
        let mut s = 1u64;
        for _ in 0..10_000 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            incs.push(if s >> 63 == 0 { 1.0 } else { -1.0 });
        }
        let r = flat_book_identity_for_increments(&incs, 1.0, 1.0);
        assert_eq!(r.max_half_square_error.unwrap(), 0.0);
        // the printed unit-factor form does not hold
        assert!(r.max_printed_form_error.unwrap() > 0.1);

        // inventory round trip implies zero wealth change
        let mut round_trip = incs.clone();
        round_trip.push(-incs.iter().sum::<f64>());
        let r = flat_book_identity_for_increments(&round_trip, 1.0, 1.0);
        assert_eq!(r.final_inventory, 0.0);
        assert_eq!(r.final_wealth, 0.0);
    }

    #[test]
    fn flat_book_identity_gaussian_paths() {
        let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        let cfg = SimConfig { steps_per_unit: 10_000, paths: 3, horizon: 1.0, seed: 15 };
        let r = flat_book_identity_check(&coeffs, &cfg, 1.0, 1.0).unwrap();
        assert!(r.max_half_square_error.unwrap() < 1e-12, "{r:?}");
    }
}
