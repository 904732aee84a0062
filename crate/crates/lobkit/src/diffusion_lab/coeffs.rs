//! Coefficient processes for the price/inventory diffusion pair and the
//! trade-clock time change.
//!
//! Price drift and volatility may depend on `(t, p)`; the inventory drift
//! `b`, inventory volatility `l` (signed: negative means trading via limit
//! orders), Brownian correlation `ρ`, and spread `s` (in tick units) are
//! functions of time. Simple parametric forms are serializable for the CLI;
//! arbitrary closures are accepted through the `custom` constructors.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CoeffError {
    #[error("coefficient `{0}` violated its bound at t = {1}")]
    Bound(&'static str, f64),
    #[error("time-change rate must stay above {min}, found {found} at t = {t}")]
    RateTooSmall { min: f64, found: f64, t: f64 },
    #[error("lambda_r must lie in (0, 1], got {0}")]
    BadLambdaR(f64),
}

type TpFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type TFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A coefficient of `(t, p)`.
#[derive(Clone)]
pub struct PriceCoef {
    f: TpFn,
    /// Constant value when the form is known constant (enables closed-form
    /// targets in the convergence checks).
    constant: Option<f64>,
    p_dependent: bool,
}

impl PriceCoef {
    pub fn constant(v: f64) -> Self {
        PriceCoef { f: Arc::new(move |_, _| v), constant: Some(v), p_dependent: false }
    }

    /// `intercept + slope·p` (proportional volatility is `(0, σ)`).
    pub fn affine_in_p(intercept: f64, slope: f64) -> Self {
        PriceCoef {
            f: Arc::new(move |_, p| intercept + slope * p),
            constant: if slope == 0.0 { Some(intercept) } else { None },
            p_dependent: slope != 0.0,
        }
    }

    /// Mean-reverting drift `rate·(mean − p)`.
    pub fn ou_drift(rate: f64, mean: f64) -> Self {
        PriceCoef {
            f: Arc::new(move |_, p| rate * (mean - p)),
            constant: None,
            p_dependent: true,
        }
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        PriceCoef { f: Arc::new(f), constant: None, p_dependent: true }
    }

    pub fn eval(&self, t: f64, p: f64) -> f64 {
        (self.f)(t, p)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn depends_on_p(&self) -> bool {
        self.p_dependent
    }
}

impl fmt::Debug for PriceCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(v) => write!(f, "PriceCoef(const {v})"),
            None => write!(f, "PriceCoef(fn)"),
        }
    }
}

/// A coefficient of `t` only.
#[derive(Clone)]
pub struct TimeCoef {
    f: TFn,
    constant: Option<f64>,
}

impl TimeCoef {
    pub fn constant(v: f64) -> Self {
        TimeCoef { f: Arc::new(move |_| v), constant: Some(v) }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeCoef { f: Arc::new(f), constant: None }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for TimeCoef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(v) => write!(f, "TimeCoef(const {v})"),
            None => write!(f, "TimeCoef(fn)"),
        }
    }
}

/// Drift/volatility/correlation specification of the pair
/// `dp = μ dt + σ dW`, `dL = b dt + l dW'` with `d[W, W'] = ρ dt`, plus the
/// spread process and the two scale constants.
#[derive(Clone, Debug)]
pub struct ItoCoefficients {
    pub mu: PriceCoef,
    pub sigma: PriceCoef,
    pub b: TimeCoef,
    pub l: TimeCoef,
    pub rho: TimeCoef,
    pub spread: TimeCoef,
    /// Spread/volatility ratio when the model `s = √(2π)·λ_s·σ` is in force.
    pub lambda_s: Option<f64>,
    /// Price-recovery coefficient of the supply-demand model, in `(0, 1]`.
    pub lambda_r: f64,
}

impl ItoCoefficients {
    /// All-constant coefficients; the common test configuration.
    pub fn constant(mu: f64, sigma: f64, b: f64, l: f64, rho: f64, spread: f64) -> Self {
        ItoCoefficients {
            mu: PriceCoef::constant(mu),
            sigma: PriceCoef::constant(sigma),
            b: TimeCoef::constant(b),
            l: TimeCoef::constant(l),
            rho: TimeCoef::constant(rho),
            spread: TimeCoef::constant(spread),
            lambda_s: None,
            lambda_r: 1.0,
        }
    }

    /// Spot-checks the bounds σ > 0, |ρ| ≤ 1, s > 0 on a grid of times
    /// (and the reference price for the p-dependent forms).
    pub fn validate(&self, horizon: f64, p_ref: f64) -> Result<(), CoeffError> {
        if !(self.lambda_r > 0.0 && self.lambda_r <= 1.0) {
            return Err(CoeffError::BadLambdaR(self.lambda_r));
        }
        let steps = 64;
        for k in 0..=steps {
            let t = horizon * k as f64 / steps as f64;
            if !(self.sigma.eval(t, p_ref) > 0.0) {
                return Err(CoeffError::Bound("sigma", t));
            }
            if self.rho.eval(t).abs() > 1.0 + 1e-12 {
                return Err(CoeffError::Bound("rho", t));
            }
            if !(self.spread.eval(t) > 0.0) {
                return Err(CoeffError::Bound("spread", t));
            }
        }
        Ok(())
    }
}

/// Serializable coefficient forms for configuration files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PriceCoefConfig {
    Constant { value: f64 },
    /// `intercept + slope·p`.
    AffineInP { intercept: f64, slope: f64 },
    /// `rate·(mean − p)`.
    Ou { rate: f64, mean: f64 },
}

impl PriceCoefConfig {
    pub fn build(&self) -> PriceCoef {
        match *self {
            PriceCoefConfig::Constant { value } => PriceCoef::constant(value),
            PriceCoefConfig::AffineInP { intercept, slope } => {
                PriceCoef::affine_in_p(intercept, slope)
            }
            PriceCoefConfig::Ou { rate, mean } => PriceCoef::ou_drift(rate, mean),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TimeCoefConfig {
    Constant { value: f64 },
}

impl TimeCoefConfig {
    pub fn build(&self) -> TimeCoef {
        match *self {
            TimeCoefConfig::Constant { value } => TimeCoef::constant(value),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub mu: PriceCoefConfig,
    pub sigma: PriceCoefConfig,
    pub b: TimeCoefConfig,
    pub l: TimeCoefConfig,
    pub rho: TimeCoefConfig,
    pub spread: TimeCoefConfig,
    #[serde(default)]
    pub lambda_s: Option<f64>,
    #[serde(default = "default_lambda_r")]
    pub lambda_r: f64,
}

fn default_lambda_r() -> f64 {
    1.0
}

impl CoefficientsConfig {
    /// Builds runtime coefficients. When `lambda_s` is set the spread is
    /// tied to the volatility as `s = √(2π)·λ_s·σ`, overriding the explicit
    /// spread entry (the volatility must not depend on the price for the
    /// spread to stay a function of time).
    pub fn build(&self) -> ItoCoefficients {
        let sigma = self.sigma.build();
        let spread = match self.lambda_s {
            Some(ls) if !sigma.depends_on_p() => {
                let sigma = sigma.clone();
                TimeCoef::custom(move |t| {
                    (2.0 * std::f64::consts::PI).sqrt() * ls * sigma.eval(t, 0.0)
                })
            }
            _ => self.spread.build(),
        };
        ItoCoefficients {
            mu: self.mu.build(),
            sigma,
            b: self.b.build(),
            l: self.l.build(),
            rho: self.rho.build(),
            spread,
            lambda_s: self.lambda_s,
            lambda_r: self.lambda_r,
        }
    }
}

/// Adaptive Simpson quadrature, used for time integrals of coefficients.
pub(crate) fn integrate(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if lo == hi {
        return 0.0;
    }
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(m), f(hi));
    let whole = simpson(lo, hi, fa, fm, fb);
    recurse(f, lo, hi, fa, fm, fb, whole, tol, 40)
}

/// Transforms coefficients under the time change `dτ = n²·dt` with `n`
/// bounded away from zero: drifts pick up `n²`, volatilities and the spread
/// pick up `n`, everything composed with `τ`.
pub fn time_change(
    coeffs: &ItoCoefficients,
    rate: impl Fn(f64) -> f64 + Send + Sync + 'static,
    horizon: f64,
) -> Result<ItoCoefficients, CoeffError> {
    let rate = Arc::new(rate);
    let min_rate = 1e-9;
    let steps = 256;
    for k in 0..=steps {
        let t = horizon * k as f64 / steps as f64;
        let n = rate(t);
        if !(n >= min_rate) {
            return Err(CoeffError::RateTooSmall { min: min_rate, found: n, t });
        }
    }
    let tau = {
        let rate = Arc::clone(&rate);
        move |t: f64| {
            let r = Arc::clone(&rate);
            integrate(&move |u| r(u) * r(u), 0.0, t, 1e-12 * (1.0 + t.abs()))
        }
    };
    let tau = Arc::new(tau);

    macro_rules! wrap_t {
        ($field:expr, $power:expr) => {{
            let inner = $field.clone();
            let rate = Arc::clone(&rate);
            let tau = Arc::clone(&tau);
            TimeCoef::custom(move |t| rate(t).powi($power) * inner.eval(tau(t)))
        }};
    }
    macro_rules! wrap_tp {
        ($field:expr, $power:expr) => {{
            let inner = $field.clone();
            let rate = Arc::clone(&rate);
            let tau = Arc::clone(&tau);
            PriceCoef::custom(move |t, p| rate(t).powi($power) * inner.eval(tau(t), p))
        }};
    }

    Ok(ItoCoefficients {
        mu: wrap_tp!(coeffs.mu, 2),
        sigma: wrap_tp!(coeffs.sigma, 1),
        b: wrap_t!(coeffs.b, 2),
        l: wrap_t!(coeffs.l, 1),
        rho: {
            let inner = coeffs.rho.clone();
            let tau = Arc::clone(&tau);
            TimeCoef::custom(move |t| inner.eval(tau(t)))
        },
        spread: wrap_t!(coeffs.spread, 1),
        lambda_s: coeffs.lambda_s,
        lambda_r: coeffs.lambda_r,
    })
}
