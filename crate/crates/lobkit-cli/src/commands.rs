//! Command handlers: file wiring around the library operations.

use crate::{invalid, io_err, CmdError};
use lobkit::applications::{
    hedge_inventory_vol, hedge_pde_solve, mm_solve, GridSpec, HedgeProblem, LocalVol, MmProblem,
    Payoff, PriceModel,
};
use lobkit::diffusion_lab::{
    flat_book_identity_check, general_cost_limit_check, recovery_statistic,
    spread_cost_limit_check, supply_demand_simulate, CoefficientsConfig, Driver, SimConfig,
};
use lobkit::lob_core::{legendre, shape_from_book, OrderBook};
use lobkit::pwq::PiecewiseQuadratic;
use lobkit::sfe_discrete::{
    quad_covariation_path, reconstruct_wealth, toxicity_ratio, toxicity_rho, WealthModel,
};
use lobkit::stat_tests::{reject_null_series, report_table, TableRow};
use lobkit::synth::{generate_tape, tape_to_csv, MidMoveLaw, TapeParams};
use lobkit::trade_tape::{build_ledger, build_series, filter_tape, ingest as tape_ingest, TradeClockSeries};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs;
use std::path::Path;

fn read_json<T: serde::de::DeserializeOwned>(path: &str) -> Result<T, CmdError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(format!("{path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{path}: {e}")))
}

fn write_text(path: &str, text: &str) -> Result<(), CmdError> {
    fs::write(path, text).map_err(|e| io_err(format!("{path}: {e}")))
}

fn write_json<T: Serialize>(path: Option<&str>, value: &T) -> Result<(), CmdError> {
    let text = serde_json::to_string_pretty(value).map_err(invalid)?;
    match path {
        Some(p) => write_text(p, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_series(path: &str) -> Result<TradeClockSeries, CmdError> {
    let series: TradeClockSeries = read_json(path)?;
    series.validate().map_err(invalid)?;
    Ok(series)
}

pub fn ingest(tape: &str, out: &str) -> Result<(), CmdError> {
    let records = tape_ingest(tape).map_err(|e| match e {
        lobkit::trade_tape::TapeError::Io(e) => io_err(e),
        other => invalid(other),
    })?;
    let (kept, filter_report) = filter_tape(&records);
    if kept.is_empty() {
        eprintln!("warning: all {} trades were filtered out", filter_report.n_input);
    }
    let (series, build_report) = build_series(&kept).map_err(invalid)?;
    eprintln!("{filter_report}");
    if build_report.n_rejected() > 0 {
        eprintln!(
            "warning: rejected {} off-quote trades: {:?}",
            build_report.n_rejected(),
            &build_report.rejected[..build_report.n_rejected().min(10)]
        );
    }
    let text = serde_json::to_string(&series).map_err(invalid)?;
    write_text(out, &text)
}

pub fn validate(series: &str, out: Option<&str>) -> Result<(), CmdError> {
    let series = load_series(series)?;
    let report = lobkit::sfe_discrete::validate(&series).map_err(invalid)?;
    write_json(out, &report)
}

fn load_book_costs(path: &str, n: usize) -> Result<Vec<lobkit::lob_core::CostFunction>, CmdError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(format!("{path}: {e}")))?;
    let one: Result<OrderBook, _> = serde_json::from_str(&text);
    let books: Vec<OrderBook> = match one {
        Ok(book) => vec![book; n],
        Err(_) => serde_json::from_str(&text).map_err(|e| invalid(format!("{path}: {e}")))?,
    };
    if books.len() != n {
        return Err(invalid(format!("need {n} books (one per trade), got {}", books.len())));
    }
    books
        .iter()
        .map(|b| {
            let shape = shape_from_book(b, None).map_err(invalid)?;
            legendre(&shape).map_err(invalid)
        })
        .collect()
}

pub fn reconstruct(
    series_path: &str,
    model: &str,
    book_costs: Option<&str>,
    out: Option<&str>,
    out_csv: Option<&str>,
) -> Result<(), CmdError> {
    let series = load_series(series_path)?;
    let ledger = build_ledger(&series).map_err(invalid)?;
    let ledger_wealth = ledger.wealth();
    let x0 = ledger_wealth.first().copied().unwrap_or(0.0);
    let ledger_rel: Vec<f64> = ledger_wealth.iter().map(|x| x - x0).collect();

    let chosen = match model {
        "proposed" => WealthModel::Proposed,
        "classical" => WealthModel::Classical,
        "frictionless" => WealthModel::Frictionless,
        "general" => {
            let path = book_costs
                .ok_or_else(|| invalid("--book-costs is required for the general model"))?;
            WealthModel::GeneralBook(load_book_costs(path, series.len())?)
        }
        other => return Err(invalid(format!("unknown model `{other}`"))),
    };
    let chosen_path = reconstruct_wealth(&series, &chosen).map_err(invalid)?;

    let frictionless = reconstruct_wealth(&series, &WealthModel::Frictionless).map_err(invalid)?;
    let classical = reconstruct_wealth(&series, &WealthModel::Classical).map_err(invalid)?;
    let proposed = reconstruct_wealth(&series, &WealthModel::Proposed).map_err(invalid)?;

    let max_err = chosen_path
        .iter()
        .zip(&ledger_rel)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let report = json!({
        "model": model,
        "n_points": chosen_path.len(),
        "final_wealth": chosen_path.last(),
        "final_ledger_wealth": ledger_rel.last(),
        "max_abs_deviation_from_ledger": max_err,
    });
    write_json(out, &report)?;

    if let Some(csv_path) = out_csv {
        let mut csv = String::from("n,ledger,frictionless,classical,proposed,model\n");
        for k in 0..chosen_path.len() {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                k, ledger_rel[k], frictionless[k], classical[k], proposed[k], chosen_path[k]
            ));
        }
        write_text(csv_path, &csv)?;
    }
    Ok(())
}

fn parse_window(window: Option<&str>) -> Result<Option<(usize, usize)>, CmdError> {
    match window {
        None => Ok(None),
        Some(w) => {
            let (a, b) = w
                .split_once(':')
                .ok_or_else(|| invalid(format!("window must be `a:b`, got `{w}`")))?;
            let a = a.parse().map_err(|e| invalid(format!("window start: {e}")))?;
            let b = b.parse().map_err(|e| invalid(format!("window end: {e}")))?;
            Ok(Some((a, b)))
        }
    }
}

pub fn toxicity(series: &str, window: Option<&str>, out: Option<&str>) -> Result<(), CmdError> {
    let series = load_series(series)?;
    let window = parse_window(window)?;
    let rho = toxicity_rho(&series, window).map_err(invalid)?;
    let ratio = toxicity_ratio(&series, window).map_err(invalid)?;
    let covariation = quad_covariation_path(&series);
    let report = json!({
        "window": window,
        "rho_d": rho,
        "r_d": ratio.ratio,
        "spread_component": ratio.spread_component,
        "impact_component": ratio.impact_component,
        "final_quad_covariation": covariation.last(),
    });
    write_json(out, &report)
}

/// Cost-process forms accepted by the simulate checks.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CostSpec {
    /// `c(v) = v²/(2·depth)`: the flat book.
    Quadratic { depth: f64 },
    /// `c(v) = half_spread·|v|`: the pure bid-ask book.
    SpreadAbs { half_spread: f64 },
    /// Conjugate of a book's shape function, with optional quadratic tails
    /// of the given density so the cost covers all volumes.
    Book {
        book: OrderBook,
        quoted_price: Option<f64>,
        tail_density: Option<f64>,
    },
}

impl CostSpec {
    pub fn build(&self) -> Result<PiecewiseQuadratic, CmdError> {
        match self {
            CostSpec::Quadratic { depth } => {
                if !(*depth > 0.0) {
                    return Err(invalid("quadratic cost needs positive depth"));
                }
                Ok(PiecewiseQuadratic::half_quadratic(1.0 / depth))
            }
            CostSpec::SpreadAbs { half_spread } => {
                if !(*half_spread >= 0.0) {
                    return Err(invalid("half spread must be non-negative"));
                }
                Ok(PiecewiseQuadratic::scaled_abs(*half_spread))
            }
            CostSpec::Book { book, quoted_price, tail_density } => {
                let shape = shape_from_book(book, *quoted_price).map_err(invalid)?;
                let cost = legendre(&shape).map_err(invalid)?;
                match tail_density {
                    Some(d) if *d > 0.0 => {
                        cost.function().with_quadratic_tails(*d).map_err(invalid)
                    }
                    _ => Ok(cost.function().clone()),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub coefficients: CoefficientsConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub recovery: Option<RecoveryWindow>,
    #[serde(default)]
    pub cost: Option<CostSpec>,
    #[serde(default)]
    pub driver: Option<Driver>,
    #[serde(default)]
    pub flat_book_depth: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryWindow {
    pub t1: f64,
    pub t2: f64,
}

pub fn simulate(config: &str, check: &str, out: Option<&str>, seed: Option<u64>) -> Result<(), CmdError> {
    let file: SimulateFile = read_json(config)?;
    let mut cfg = file.sim;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let coeffs = file.coefficients.build();
    match check {
        "spread-limit" => {
            let report = spread_cost_limit_check(&coeffs, &cfg).map_err(invalid)?;
            write_json(out, &report)
        }
        "recovery" => {
            let w = file.recovery.unwrap_or(RecoveryWindow { t1: 0.0, t2: cfg.horizon });
            let report = recovery_statistic(&coeffs, &cfg, w.t1, w.t2).map_err(invalid)?;
            write_json(out, &report)
        }
        "general-cost" => {
            let cost = file
                .cost
                .as_ref()
                .ok_or_else(|| invalid("general-cost needs a `cost` entry"))?
                .build()?;
            let report = general_cost_limit_check(&coeffs, &cost, &cfg).map_err(invalid)?;
            write_json(out, &report)
        }
        "supply-demand" => {
            let cost = file
                .cost
                .as_ref()
                .ok_or_else(|| invalid("supply-demand needs a `cost` entry"))?
                .build()?;
            let driver = file.driver.unwrap_or(Driver::InventoryGiven);
            let (_, report) =
                supply_demand_simulate(&coeffs, &cost, &cfg, driver).map_err(invalid)?;
            write_json(out, &report)
        }
        "flat-book" => {
            let depth = file.flat_book_depth.unwrap_or(1.0);
            let report = flat_book_identity_check(&coeffs, &cfg, coeffs.lambda_r, depth)
                .map_err(invalid)?;
            write_json(out, &report)
        }
        other => Err(invalid(format!("unknown check `{other}`"))),
    }
}

fn parse_payoff(payoff: &str) -> Result<Payoff, CmdError> {
    // a bare CSV file name is shorthand for custom:FILE
    let (kind, arg) = match payoff.split_once(':') {
        Some(pair) => pair,
        None if payoff.ends_with(".csv") => ("custom", payoff),
        None => return Err(invalid(format!("payoff must be kind:arg, got `{payoff}`"))),
    };
    // strikes accept both `call:100` and `call:K=100`
    let arg = arg.strip_prefix("K=").unwrap_or(arg);
    match kind {
        "call" => Ok(Payoff::Call { strike: arg.parse().map_err(|e| invalid(format!("strike: {e}")))? }),
        "put" => Ok(Payoff::Put { strike: arg.parse().map_err(|e| invalid(format!("strike: {e}")))? }),
        "custom" => {
            let text = fs::read_to_string(arg).map_err(|e| io_err(format!("{arg}: {e}")))?;
            let mut knots: Vec<(f64, f64)> = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                    continue;
                }
                let (p, v) = line
                    .split_once(',')
                    .ok_or_else(|| invalid(format!("{arg}:{}: expected price,value", i + 1)))?;
                knots.push((
                    p.trim().parse().map_err(|e| invalid(format!("{arg}:{}: {e}", i + 1)))?,
                    v.trim().parse().map_err(|e| invalid(format!("{arg}:{}: {e}", i + 1)))?,
                ));
            }
            if knots.len() < 2 {
                return Err(invalid("custom payoff needs at least 2 knots"));
            }
            knots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Ok(Payoff::Custom { knots })
        }
        other => Err(invalid(format!("unknown payoff kind `{other}`"))),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn hedge(
    payoff: &str,
    lambda: f64,
    sigma: f64,
    sigma_mode: &str,
    maturity: f64,
    grid: &str,
    spot: f64,
    out: Option<&str>,
    out_csv: Option<&str>,
) -> Result<(), CmdError> {
    let payoff = parse_payoff(payoff)?;
    let local_vol = match sigma_mode {
        "proportional" => LocalVol::Proportional { vol: sigma },
        "constant" => LocalVol::Constant { value: sigma },
        other => return Err(invalid(format!("unknown sigma mode `{other}`"))),
    };
    let grid = if grid == "auto" {
        let eff = (2.0 * lambda - 1.0).max(1e-9).sqrt() * sigma * maturity.sqrt();
        match local_vol {
            LocalVol::Proportional { .. } => {
                let width = (4.0 * eff).exp();
                GridSpec { p_min: spot / width, p_max: spot * width, np: 400, nt: 400 }
            }
            LocalVol::Constant { .. } => {
                let half = 4.0 * eff;
                GridSpec { p_min: (spot - half).max(0.0), p_max: spot + half, np: 400, nt: 400 }
            }
        }
    } else {
        let parts: Vec<&str> = grid.split(':').collect();
        if parts.len() != 4 {
            return Err(invalid("grid must be `pmin:pmax:np:nt` or `auto`"));
        }
        GridSpec {
            p_min: parts[0].parse().map_err(|e| invalid(format!("pmin: {e}")))?,
            p_max: parts[1].parse().map_err(|e| invalid(format!("pmax: {e}")))?,
            np: parts[2].parse().map_err(|e| invalid(format!("np: {e}")))?,
            nt: parts[3].parse().map_err(|e| invalid(format!("nt: {e}")))?,
        }
    };
    let problem = HedgeProblem { payoff, local_vol, lambda, maturity, grid };
    let surface = hedge_pde_solve(&problem).map_err(invalid)?;
    for note in &surface.diagnostics {
        eprintln!("warning: {note}");
    }
    let inv = hedge_inventory_vol(&surface, &problem.local_vol, 1e-9);
    let report = json!({
        "lambda": lambda,
        "implied_vol_multiplier": (2.0 * lambda - 1.0).sqrt(),
        "value_at_spot": surface.value_at(0.0, spot),
        "grid": problem.grid,
    });
    write_json(out, &report)?;
    if let Some(csv_path) = out_csv {
        let mut csv = String::from("price,value,delta,gamma,theta,l,order_type\n");
        for (i, &p) in surface.prices.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{:?}\n",
                p,
                surface.values[0][i],
                surface.delta[0][i],
                surface.gamma[0][i],
                surface.theta[0][i],
                inv.l[0][i],
                inv.order_type[0][i],
            ));
        }
        write_text(csv_path, &csv)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn market_maker(
    model: &str,
    f: &str,
    rho: &str,
    horizon: f64,
    mu: f64,
    sigma: f64,
    reversion: f64,
    p0: f64,
    path: Option<&str>,
    out: Option<&str>,
) -> Result<(), CmdError> {
    let model = match model {
        "martingale" => PriceModel::Martingale,
        "bs" => PriceModel::BlackScholes { mu, sigma },
        "ou" => PriceModel::OrnsteinUhlenbeck { reversion, mean: p0, sigma },
        other => return Err(invalid(format!("unknown price model `{other}`"))),
    };
    if f != "inv-square" {
        return Err(invalid(format!("unknown fill-intensity `{f}`")));
    }
    let problem = match rho {
        "inv" => MmProblem::explicit_pair(model, horizon),
        "zero" => MmProblem::no_adverse_selection(model, horizon),
        other => return Err(invalid(format!("unknown correlation `{other}`"))),
    };
    let path_points: Vec<(f64, f64, f64)> = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(format!("{p}: {e}")))?;
            let mut pts = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || (i == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
                    continue;
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(invalid(format!("{p}:{}: expected t,p,sigma", i + 1)));
                }
                let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| invalid(format!("{p}:{}: {e}", i + 1)));
                pts.push((parse(cols[0])?, parse(cols[1])?, parse(cols[2])?));
            }
            pts
        }
        None => (0..=50)
            .map(|k| (horizon * k as f64 / 50.0, p0, sigma))
            .collect(),
    };
    let solution = mm_solve(&problem, &path_points).map_err(invalid)?;
    write_json(out, &solution)
}

pub fn covartest(
    series: &str,
    window: usize,
    level: f64,
    out: Option<&str>,
    out_csv: Option<&str>,
) -> Result<(), CmdError> {
    let series = load_series(series)?;
    let report = reject_null_series(&series, window, level).map_err(invalid)?;
    if let Some(csv_path) = out_csv {
        let mut csv = String::from("n,c,v,ci_lower,ci_upper\n");
        for k in 0..report.c_path.len() {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                k, report.c_path[k], report.v_path[k], report.ci_lower[k], report.ci_upper[k]
            ));
        }
        write_text(csv_path, &csv)?;
    }
    write_json(out, &report)
}

pub fn report(inputs: &str, out: &str) -> Result<(), CmdError> {
    let mut rows = Vec::new();
    let dir = fs::read_dir(inputs).map_err(|e| io_err(format!("{inputs}: {e}")))?;
    let mut paths: Vec<_> = dir
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let stock = Path::new(&path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("?")
            .to_uppercase();
        let report: lobkit::stat_tests::CovariationTestReport =
            read_json(path.to_str().unwrap())?;
        rows.push(TableRow::from_report(stock, &report));
    }
    let (csv, text) = report_table(&rows);
    write_text(out, &csv)?;
    print!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn gen_tape(
    out: &str,
    n: usize,
    base: f64,
    spread_ticks: i64,
    impact_rate: f64,
    recovery_rate: f64,
    max_size: u32,
    mid_move: &str,
    seed: u64,
) -> Result<(), CmdError> {
    let mid_move = match mid_move {
        "uniform" => MidMoveLaw::UniformWithinSpread,
        "half-spread" => MidMoveLaw::ExactHalfSpread,
        other => return Err(invalid(format!("unknown mid-move law `{other}`"))),
    };
    let params = TapeParams {
        n_trades: n,
        base_price_ticks: (base / 1e-4).round() as i64,
        spread_ticks,
        impact_compliance: impact_rate,
        recovery_compliance: recovery_rate,
        max_size,
        mid_move,
    };
    let records = generate_tape(&params, seed).map_err(invalid)?;
    write_text(out, &tape_to_csv(&records))
}
