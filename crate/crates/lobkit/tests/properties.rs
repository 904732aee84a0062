//! Property tests for the book calculus and the discrete accounting
//! identities on randomized inputs.

use lobkit::diffusion_lab::{phi_abs, phi_fn, phi_pwq, phi_square, phi_square_minus_spread_abs};
use lobkit::lob_core::{execute_market_order, legendre, legendre_inverse, shape_from_book};
use lobkit::pwq::PiecewiseQuadratic;
use lobkit::sfe_discrete::{reconstruct_wealth_units, toxicity_rho, validate, WealthModel};
use lobkit::synth::{generate_tape, random_book, MidMoveLaw, TapeParams};
use lobkit::trade_tape::{build_ledger, build_series};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Conjugacy round trip and the Fenchel identity at all breakpoints.
    #[test]
    fn conjugacy_round_trip(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 1e-4, 20, false);
        let Some(mid) = book.mid() else { return Ok(()) };
        let shape = shape_from_book(&book, Some(mid)).unwrap();
        let cost = legendre(&shape).unwrap();
        let back = legendre_inverse(&cost).unwrap();
        for u in shape.breakpoints() {
            prop_assert!(rel_close(back.eval(u), shape.eval(u), 1e-12));
            // u·γ'(u) = γ(u) + c(γ'(u)) wherever γ is differentiable
            let (dl, dr) = shape.gamma().deriv_one_sided(u);
            for m in [dl, dr] {
                if m.is_finite() {
                    prop_assert!(rel_close(u * m, shape.eval(u) + cost.eval(m), 1e-12));
                }
            }
        }
    }

    /// Execution accounting matches the dual formulas and the wealth
    /// transfer is −γ(u) ≤ 0; integer-volume books make the match exact.
    #[test]
    fn execution_accounting(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 1e-4, 12, true);
        let Some(mid) = book.mid() else { return Ok(()) };
        let shape = shape_from_book(&book, Some(mid)).unwrap();
        let cost = legendre(&shape).unwrap();
        // probe exact level prices and half-tick offsets; half-ticks never
        // straddle a neighboring level boundary within float noise
        let mut alphas: Vec<f64> = vec![mid];
        for l in book.bids().iter().chain(book.asks().iter()) {
            let p = book.price_of(l.ticks);
            alphas.extend([p, p + 0.5e-4, p - 0.5e-4]);
        }
        for alpha in alphas {
            if alpha <= 0.0 { continue; }
            let (e, after) = execute_market_order(&book, alpha).unwrap();
            let u = alpha - mid;
            let slope = shape.slope(u);
            prop_assert!(rel_close(e.delta_l, -slope, 1e-12));
            prop_assert!(rel_close(e.delta_k, (u + mid) * slope - shape.eval(u), 1e-12));
            // trade-marked wealth transfer; 1e-12 relative to the cash
            // magnitudes being cancelled, not to the small difference
            let dx = alpha * e.delta_l + e.delta_k;
            let scale = alpha * e.delta_l.abs() + e.delta_k.abs();
            prop_assert!((dx - (-shape.eval(u))).abs() <= 1e-12 * (1.0 + scale));
            prop_assert!(dx <= 1e-12 * (1.0 + scale));
            // cost identity at the traded volume
            prop_assert!(
                (e.delta_k - (-mid * e.delta_l + cost.eval(-e.delta_l))).abs()
                    <= 1e-12 * (1.0 + scale)
            );
            // no-arbitrage: the taker never both buys and sells
            let ask_consumed = book.total_ask_volume() - after.total_ask_volume();
            let bid_consumed = book.total_bid_volume() - after.total_bid_volume();
            prop_assert!(!(ask_consumed > 0.0 && bid_consumed > 0.0));
        }
    }

    /// The proposed reconstruction telescopes to the ledger wealth exactly
    /// (integer units) on any at-quotes tape.
    #[test]
    fn proposed_equals_ledger(seed in 0u64..10_000, n in 50usize..400) {
        let params = TapeParams {
            n_trades: n,
            impact_compliance: 0.9,
            recovery_compliance: 0.9,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, seed).unwrap();
        let (series, _) = build_series(&records).unwrap();
        let ledger = build_ledger(&series).unwrap();
        let proposed = reconstruct_wealth_units(&series, &WealthModel::Proposed).unwrap();
        prop_assert_eq!(proposed.len(), ledger.wealth_units.len());
        for (a, b) in proposed.iter().zip(&ledger.wealth_units) {
            prop_assert_eq!(*a, *b);
        }
    }

    /// Termwise ordering frictionless ≤ proposed ≤ classical on tapes whose
    /// price moves stay within half the spread.
    #[test]
    fn wealth_model_ordering(seed in 0u64..10_000) {
        let params = TapeParams {
            n_trades: 300,
            mid_move: MidMoveLaw::ExactHalfSpread,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, seed).unwrap();
        let (series, _) = build_series(&records).unwrap();
        let f = reconstruct_wealth_units(&series, &WealthModel::Frictionless).unwrap();
        let p = reconstruct_wealth_units(&series, &WealthModel::Proposed).unwrap();
        let c = reconstruct_wealth_units(&series, &WealthModel::Classical).unwrap();
        for k in 0..f.len() {
            prop_assert!(f[k] <= p[k] && p[k] <= c[k]);
        }
    }

    /// Filtering at-quotes compliance: fully compliant tapes validate clean.
    #[test]
    fn compliant_tapes_validate_clean(seed in 0u64..10_000) {
        let params = TapeParams { n_trades: 200, ..TapeParams::default() };
        let records = generate_tape(&params, seed).unwrap();
        let (series, _) = build_series(&records).unwrap();
        let report = validate(&series).unwrap();
        prop_assert_eq!(report.impact.count, 0);
        prop_assert_eq!(report.recovery.count, 0);
    }

    /// Toxicity correlation is invariant under positive volume rescaling.
    #[test]
    fn toxicity_scale_invariance(seed in 0u64..10_000, scale in 2i64..50) {
        let params = TapeParams {
            n_trades: 120,
            impact_compliance: 0.7,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, seed).unwrap();
        let (mut series, _) = build_series(&records).unwrap();
        let Ok(base) = toxicity_rho(&series, None) else { return Ok(()) };
        for dl in &mut series.delta_l {
            *dl *= scale;
        }
        let scaled = toxicity_rho(&series, None).unwrap();
        prop_assert!((base - scaled).abs() < 1e-9);
    }

    /// Φ closed forms against the quadrature routes across scales.
    #[test]
    fn phi_routes_agree(exp in -3i32..=3) {
        let sigma = 10f64.powi(exp);
        let abs = PiecewiseQuadratic::scaled_abs(1.0);
        prop_assert!(rel_close(phi_pwq(sigma, &abs).unwrap(), phi_abs(sigma), 1e-10));
        let square = PiecewiseQuadratic::quadratic(1.0, 0.0, 0.0);
        prop_assert!(rel_close(phi_pwq(sigma, &square).unwrap(), phi_square(sigma), 1e-10));
        // smooth route on the pure quadratic
        prop_assert!(rel_close(phi_fn(sigma, |y| y * y).unwrap(), phi_square(sigma), 1e-10));
        // mixed form via per-piece moments
        let s = 0.4;
        let mixed = PiecewiseQuadratic::new(vec![
            lobkit::Segment::new(f64::NEG_INFINITY, 0.0, 1.0, s, 0.0),
            lobkit::Segment::new(0.0, f64::INFINITY, 1.0, -s, 0.0),
        ])
        .unwrap();
        prop_assert!(rel_close(
            phi_pwq(sigma, &mixed).unwrap(),
            phi_square_minus_spread_abs(sigma, s),
            1e-10
        ));
    }
}
