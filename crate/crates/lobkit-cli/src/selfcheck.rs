//! Fast acceptance subset: scaled-down versions of the acceptance criteria
//! that run in a few seconds, one PASS/FAIL line each.

use crate::{invalid, CmdError};
use lobkit::applications::{
    black_scholes_call, explicit_pair_stationary_spread, hedge_pde_solve,
    mm_optimal_rescaled_spread, GridSpec, HedgeProblem, LocalVol, Payoff,
};
use lobkit::diffusion_lab::{
    flat_book_identity_for_increments, phi_abs, phi_pwq, spread_cost_limit_check,
    ItoCoefficients, SimConfig,
};
use lobkit::lob_core::{execute_market_order, legendre, legendre_inverse, shape_from_book};
use lobkit::pwq::PiecewiseQuadratic;
use lobkit::sfe_discrete::{reconstruct_wealth_units, WealthModel};
use lobkit::stat_tests::{parse_report_table, report_table, TableRow};
use lobkit::synth::{generate_tape, random_book, MidMoveLaw, TapeParams};
use lobkit::trade_tape::{build_ledger, build_series};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Check {
    name: &'static str,
    run: fn() -> Result<(), String>,
}

fn accounting_exactness() -> Result<(), String> {
    for seed in 0..100u64 {
        let params = TapeParams {
            n_trades: 2_000,
            impact_compliance: 0.95,
            recovery_compliance: 0.9,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, seed).map_err(|e| e.to_string())?;
        let (series, _) = build_series(&records).map_err(|e| e.to_string())?;
        let ledger = build_ledger(&series).map_err(|e| e.to_string())?;
        let proposed =
            reconstruct_wealth_units(&series, &WealthModel::Proposed).map_err(|e| e.to_string())?;
        if proposed != ledger.wealth_units {
            return Err(format!("seed {seed}: proposed reconstruction differs from ledger"));
        }
    }
    Ok(())
}

fn frictionless_recovery() -> Result<(), String> {
    for seed in 0..20u64 {
        let params = TapeParams {
            n_trades: 2_000,
            mid_move: MidMoveLaw::ExactHalfSpread,
            ..TapeParams::default()
        };
        let records = generate_tape(&params, seed).map_err(|e| e.to_string())?;
        let (series, _) = build_series(&records).map_err(|e| e.to_string())?;
        let p = reconstruct_wealth_units(&series, &WealthModel::Proposed).map_err(|e| e.to_string())?;
        let f = reconstruct_wealth_units(&series, &WealthModel::Frictionless)
            .map_err(|e| e.to_string())?;
        if p != f {
            return Err(format!("seed {seed}: proposed != frictionless on half-spread tape"));
        }
    }
    Ok(())
}

fn legendre_consistency() -> Result<(), String> {
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 1e-4, 20, false);
        let Some(mid) = book.mid() else { continue };
        let shape = shape_from_book(&book, Some(mid)).map_err(|e| e.to_string())?;
        let cost = legendre(&shape).map_err(|e| e.to_string())?;
        let back = legendre_inverse(&cost).map_err(|e| e.to_string())?;
        for u in shape.breakpoints() {
            if (back.eval(u) - shape.eval(u)).abs() > 1e-12 * (1.0 + shape.eval(u).abs()) {
                return Err(format!("seed {seed}: biconjugation off at u = {u}"));
            }
        }
        for alpha in book.bids().iter().chain(book.asks()).map(|l| book.price_of(l.ticks)) {
            let (e, _) = execute_market_order(&book, alpha).map_err(|e| e.to_string())?;
            let rhs = -mid * e.delta_l + cost.eval(-e.delta_l);
            let scale = 1.0 + mid * e.delta_l.abs() + e.delta_k.abs();
            if (e.delta_k - rhs).abs() > 1e-12 * scale {
                return Err(format!("seed {seed}: cost identity off at alpha = {alpha}"));
            }
        }
    }
    Ok(())
}

fn flat_book_identity() -> Result<(), String> {
    let mut incs = Vec::with_capacity(10_000);
    let mut s = 9u64;
    for _ in 0..10_000 {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        incs.push(if s >> 63 == 0 { 1.0 } else { -1.0 });
    }
    let r = flat_book_identity_for_increments(&incs, 1.0, 1.0);
    let err = r.max_half_square_error.unwrap_or(f64::INFINITY);
    if err > 1e-12 {
        return Err(format!("identity error {err}"));
    }
    Ok(())
}

fn mm_solver() -> Result<(), String> {
    let f = |x: f64| 1.0 / ((1.0 + x) * (1.0 + x));
    let rho = |x: f64| 1.0 / (1.0 + x);
    let mut prev = f64::INFINITY;
    for a in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let sol = mm_optimal_rescaled_spread(a, &f, &rho).map_err(|e| e.to_string())?;
        if !(sol.argmax > 0.0) {
            return Err(format!("m({a}) not positive"));
        }
        if !(sol.max_value < prev) {
            return Err(format!("M({a}) not decreasing"));
        }
        prev = sol.max_value;
        let expect = explicit_pair_stationary_spread(a);
        if (sol.argmax - expect).abs() > 1e-6 {
            return Err(format!("m({a}) = {} vs closed form {expect}", sol.argmax));
        }
    }
    Ok(())
}

fn phi_closed_forms() -> Result<(), String> {
    let abs = PiecewiseQuadratic::scaled_abs(1.0);
    for exp in -3..=3 {
        let sigma = 10f64.powi(exp);
        let got = phi_pwq(sigma, &abs).map_err(|e| e.to_string())?;
        if (got - phi_abs(sigma)).abs() > 1e-10 * phi_abs(sigma) {
            return Err(format!("phi(|y|) off at sigma = {sigma}"));
        }
    }
    Ok(())
}

fn spread_limit_small() -> Result<(), String> {
    let coeffs = ItoCoefficients::constant(0.0, 1.0, 0.0, 1.0, 0.0, 0.02);
    let cfg = SimConfig { steps_per_unit: 2_000, paths: 50, horizon: 1.0, seed: 17 };
    let report = spread_cost_limit_check(&coeffs, &cfg).map_err(|e| e.to_string())?;
    if !report.pass {
        return Err(format!(
            "mc {} vs target {} (3se {}, bias {})",
            report.mc_mean,
            report.target,
            3.0 * report.mc_stderr,
            report.bias_allowance
        ));
    }
    Ok(())
}

fn hedge_bs_small() -> Result<(), String> {
    let sigma = 0.2;
    let width = (8.0f64 * sigma).exp();
    let problem = HedgeProblem {
        payoff: Payoff::Call { strike: 100.0 },
        local_vol: LocalVol::Proportional { vol: sigma },
        lambda: 1.0,
        maturity: 1.0,
        grid: GridSpec { p_min: 100.0 / width, p_max: 100.0 * width, np: 200, nt: 200 },
    };
    let surface = hedge_pde_solve(&problem).map_err(|e| e.to_string())?;
    let got = surface.value_at(0.0, 100.0);
    let expect = black_scholes_call(100.0, 100.0, sigma, 1.0);
    if (got - expect).abs() > 3e-3 * expect {
        return Err(format!("{got} vs {expect}"));
    }
    Ok(())
}

fn table_round_trip() -> Result<(), String> {
    let rows = vec![TableRow {
        stock: "SYNTH".into(),
        proba_reject: 0.999,
        nb_false: 3,
        nb_trades: 2_000,
        percent_false: 0.15,
        recovery_rejection: 4.2,
    }];
    let (csv, _) = report_table(&rows);
    let parsed = parse_report_table(&csv)?;
    if parsed != rows {
        return Err("CSV round trip changed the rows".into());
    }
    Ok(())
}

pub fn run() -> Result<(), CmdError> {
    let checks = [
        Check { name: "accounting-exactness", run: accounting_exactness },
        Check { name: "frictionless-recovery", run: frictionless_recovery },
        Check { name: "legendre-consistency", run: legendre_consistency },
        Check { name: "flat-book-identity", run: flat_book_identity },
        Check { name: "market-maker-solver", run: mm_solver },
        Check { name: "phi-closed-forms", run: phi_closed_forms },
        Check { name: "spread-cost-limit", run: spread_limit_small },
        Check { name: "hedge-pde-vs-closed-form", run: hedge_bs_small },
        Check { name: "report-table-round-trip", run: table_round_trip },
    ];
    let mut failures = 0;
    for check in &checks {
        match (check.run)() {
            Ok(()) => println!("PASS {}", check.name),
            Err(msg) => {
                println!("FAIL {}: {msg}", check.name);
                failures += 1;
            }
        }
    }
    if failures > 0 {
        Err(invalid(format!("{failures} selfcheck criteria failed")))
    } else {
        Ok(())
    }
}
