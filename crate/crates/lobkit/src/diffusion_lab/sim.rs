//! Euler–Maruyama simulation of the correlated price/inventory pair with
//! deterministic parallelism.
//!
//! Each path owns a ChaCha stream keyed by its index, so path `i` is
//! bit-identical no matter how many threads run, and per-path statistics are
//! reduced pairwise in index order to keep the sums deterministic too.

use super::coeffs::{CoeffError, ItoCoefficients};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("steps per unit time must be at least 2, got {0}")]
    BadSteps(u64),
    #[error("path count must be at least 1")]
    NoPaths,
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Coeff(#[from] CoeffError),
    #[error("non-finite {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },
    #[error("volume {volume} left the cost function's domain at t = {t}")]
    CostDomain { volume: f64, t: f64 },
    #[error("cost function violates the quadratic growth condition: {0}")]
    GrowthCondition(String),
}

/// Discretization: tick size `1/√N`, `M` paths, horizon `T`, seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Steps per unit of trade-clock time (`N`).
    pub steps_per_unit: u64,
    /// Number of Monte Carlo paths (`M`).
    pub paths: u64,
    /// Horizon `T`.
    pub horizon: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps_per_unit < 2 {
            return Err(SimError::BadSteps(self.steps_per_unit));
        }
        if self.paths < 1 {
            return Err(SimError::NoPaths);
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SimError::BadHorizon(self.horizon));
        }
        Ok(())
    }

    /// Number of increments: `⌊N·T⌋`.
    pub fn steps(&self) -> usize {
        (self.steps_per_unit as f64 * self.horizon).floor() as usize
    }

    /// With a different discretization level, same everything else.
    pub fn with_steps_per_unit(&self, n: u64) -> SimConfig {
        SimConfig { steps_per_unit: n, ..*self }
    }
}

/// Discretized paths: `price[i][k] = p_{k/N}` along path `i`, and likewise
/// for the inventory. Arrays have `⌊N·T⌋ + 1` points and are reproducible
/// from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathBundle {
    pub steps_per_unit: u64,
    pub horizon: f64,
    pub price: Vec<Vec<f64>>,
    pub inventory: Vec<Vec<f64>>,
}

impl PathBundle {
    /// Renormalized spread at step `k`: `s(k/N)/√N`.
    pub fn spread_renorm(&self, coeffs: &ItoCoefficients, k: usize) -> f64 {
        coeffs.spread.eval(k as f64 / self.steps_per_unit as f64)
            / (self.steps_per_unit as f64).sqrt()
    }
}

pub(crate) struct PathState {
    pub t: Vec<f64>,
    pub price: Vec<f64>,
    pub inventory: Vec<f64>,
}

/// One Euler–Maruyama path of the pair, started at `(p0, l0)`, using the
/// given ChaCha stream. Correlated Gaussian increments come from the
/// Cholesky factor of `[[1, ρ], [ρ, 1]]`.
pub(crate) fn simulate_one(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
    p0: f64,
    l0: f64,
    stream: u64,
) -> Result<PathState, SimError> {
    let n = cfg.steps_per_unit as f64;
    let dt = 1.0 / n;
    let sqrt_dt = dt.sqrt();
    let steps = cfg.steps();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);

    let mut t = Vec::with_capacity(steps + 1);
    let mut price = Vec::with_capacity(steps + 1);
    let mut inventory = Vec::with_capacity(steps + 1);
    let (mut p, mut l) = (p0, l0);
    t.push(0.0);
    price.push(p);
    inventory.push(l);
    for k in 0..steps {
        let tk = k as f64 * dt;
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let rho = coeffs.rho.eval(tk).clamp(-1.0, 1.0);
        let w_p = z1;
        let w_l = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
        p += coeffs.mu.eval(tk, p) * dt + coeffs.sigma.eval(tk, p) * sqrt_dt * w_p;
        l += coeffs.b.eval(tk) * dt + coeffs.l.eval(tk) * sqrt_dt * w_l;
        if !p.is_finite() {
            return Err(SimError::NonFinite { what: "price", t: tk });
        }
        if !l.is_finite() {
            return Err(SimError::NonFinite { what: "inventory", t: tk });
        }
        t.push(tk + dt);
        price.push(p);
        inventory.push(l);
    }
    Ok(PathState { t, price, inventory })
}

/// Simulates all paths in parallel; deterministic per seed regardless of
/// thread count.
pub fn simulate_paths(coeffs: &ItoCoefficients, cfg: &SimConfig) -> Result<PathBundle, SimError> {
    simulate_paths_from(coeffs, cfg, 100.0, 0.0)
}

/// As [`simulate_paths`] with explicit initial price and inventory.
pub fn simulate_paths_from(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
    p0: f64,
    l0: f64,
) -> Result<PathBundle, SimError> {
    cfg.validate()?;
    coeffs.validate(cfg.horizon, p0)?;
    let paths: Result<Vec<PathState>, SimError> = (0..cfg.paths)
        .into_par_iter()
        .map(|i| simulate_one(coeffs, cfg, p0, l0, i))
        .collect();
    let paths = paths?;
    Ok(PathBundle {
        steps_per_unit: cfg.steps_per_unit,
        horizon: cfg.horizon,
        price: paths.iter().map(|s| s.price.clone()).collect(),
        inventory: paths.into_iter().map(|s| s.inventory).collect(),
    })
}

/// Runs `stat` on each simulated path and returns the per-path values in
/// path order. `stream_base` offsets the RNG streams so different runs of
/// the same seed stay independent.
pub(crate) fn per_path_stats<F>(
    coeffs: &ItoCoefficients,
    cfg: &SimConfig,
    p0: f64,
    l0: f64,
    stream_base: u64,
    stat: F,
) -> Result<Vec<f64>, SimError>
where
    F: Fn(&PathState) -> Result<f64, SimError> + Sync,
{
    cfg.validate()?;
    coeffs.validate(cfg.horizon, p0)?;
    (0..cfg.paths)
        .into_par_iter()
        .map(|i| {
            let path = simulate_one(coeffs, cfg, p0, l0, stream_base + i)?;
            stat(&path)
        })
        .collect()
}

/// Pairwise sum in fixed order: deterministic and accurate for long vectors.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_cfg() -> SimConfig {
        SimConfig { steps_per_unit: 4, paths: 3, horizon: 1.0, seed: 7 }
    }

    #[test]
    fn reproducible_and_stream_separated() {
        let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        let cfg = base_cfg();
        let a = simulate_paths(&coeffs, &cfg).unwrap();
        let b = simulate_paths(&coeffs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.price[0].len(), 5);
        // distinct paths differ
        assert_ne!(a.price[0], a.price[1]);
    }

    #[test]
    fn golden_path_and_straight_line_reimplementation() {
        // independent re-derivation of path 0: draw the same normals from
        // the same stream and step the recursion by hand
        let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 1.0);
        let cfg = SimConfig { steps_per_unit: 4, paths: 1, horizon: 1.0, seed: 42 };
        let bundle = simulate_paths(&coeffs, &cfg).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        rng.set_stream(0);
        let (mut p, mut l) = (100.0f64, 0.0f64);
        let mut expect_p = vec![p];
        let mut expect_l = vec![l];
        for _ in 0..4 {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            p += 0.5 * z1; // σ·√dt = 1/2, ρ = 0
            l += 0.5 * z2;
            expect_p.push(p);
            expect_l.push(l);
        }
        assert_eq!(bundle.price[0], expect_p);
        assert_eq!(bundle.inventory[0], expect_l);

        let golden_p = golden_path_values();
        for (a, b) in bundle.price[0].iter().zip(&golden_p) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    /// Frozen from the first run of seed 42 / stream 0; the straight-line
    /// reimplementation above cross-checks the recipe.
    fn golden_path_values() -> [f64; 5] {
        [
            100.0,
            100.23899061917551,
            100.13355727753999,
            99.87751196651192,
            99.37632304444311,
        ]
    }

    #[test]
    fn perfect_anticorrelation_is_exact() {
        let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, -1.0, 1.0);
        let cfg = SimConfig { steps_per_unit: 64, paths: 2, horizon: 1.0, seed: 3 };
        let bundle = simulate_paths(&coeffs, &cfg).unwrap();
        for i in 0..2 {
            for k in 0..64 {
                let dp = bundle.price[i][k + 1] - bundle.price[i][k];
                let dl = bundle.inventory[i][k + 1] - bundle.inventory[i][k];
                assert!((dp + dl).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn variance_matches_sigma_squared_t() {
        let sigma = 0.7;
        let coeffs = ItoCoefficients::constant(0.0, sigma, 0.0, 1.0, 0.0, 1.0);
        let cfg = SimConfig { steps_per_unit: 16, paths: 10_000, horizon: 1.0, seed: 11 };
        let bundle = simulate_paths(&coeffs, &cfg).unwrap();
        let sq_changes: Vec<f64> = bundle
            .price
            .iter()
            .map(|p| {
                let d = p[p.len() - 1] - p[0];
                d * d
            })
            .collect();
        let (mean, se) = mean_stderr(&sq_changes);
        let target = sigma * sigma;
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "var {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig { steps_per_unit: 1, paths: 1, horizon: 1.0, seed: 0 }
            .validate()
            .is_err());
        assert!(SimConfig { steps_per_unit: 4, paths: 0, horizon: 1.0, seed: 0 }
            .validate()
            .is_err());
        assert!(SimConfig { steps_per_unit: 4, paths: 1, horizon: -1.0, seed: 0 }
            .validate()
            .is_err());
    }
}
