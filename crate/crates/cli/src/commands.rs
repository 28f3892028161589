//! Per-command builders: read and digest inputs, call the library, and
//! shape the results into serializable payloads plus path-statistic rows.

use crate::report::{InputDigest, StatRow};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::str::FromStr;

use sdf_core::ftap::{ftap_verdict, sdf_solution_space, FtapError, FtapReport, SdfSolutionSpace};
use sdf_core::ito::{
    self, at_quartiles, bessel_counterexamples, martingale_test, mean_se, pi_star,
    risk_premium_star, sdf_compose, wealth_paths, ItoError, ItoModelSpec, MartingaleTestReport,
    PathSeries, StatsError, BESSEL_STEPS, MIN_PATHS,
};
use sdf_core::pricing::{
    covariance_decomposition, indifference_price, price_bounds, replication_check, state_prices,
    CovarianceDecomposition, IndifferenceOutcome, PriceInterval, PricingError, Replication,
    StatePriceDensity,
};
use sdf_core::utility::{optimize, OptimalSolution, UtilityError, UtilitySpec};
use sdf_core::{ClaimPayoff, DiscreteMarket};

/// One failure, carrying the stable code and the process exit class:
/// 2 for input problems, 1 for domain-level failures.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl CliError {
    pub fn input(code: &'static str, message: impl ToString) -> Self {
        CliError {
            code,
            exit: 2,
            message: message.to_string(),
        }
    }

    pub fn domain(code: &'static str, message: impl ToString) -> Self {
        CliError {
            code,
            exit: 1,
            message: message.to_string(),
        }
    }
}

pub type CommandOutput = (Value, Vec<StatRow>, Vec<InputDigest>);

fn read_input(path: &Path) -> Result<(String, InputDigest), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::input("E201", format!("cannot read {}: {e}", path.display())))?;
    let digest = InputDigest {
        path: path.display().to_string(),
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    };
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::input("E201", format!("{} is not UTF-8", path.display())))?;
    Ok((text, digest))
}

fn parse_market(path: &Path) -> Result<(DiscreteMarket, InputDigest), CliError> {
    let (text, digest) = read_input(path)?;
    let market = DiscreteMarket::from_json_str(&text)
        .map_err(|e| CliError::input("E202", format!("invalid market file: {e}")))?;
    Ok((market, digest))
}

fn parse_claim(
    path: &Path,
    market: &DiscreteMarket,
) -> Result<(ClaimPayoff, InputDigest), CliError> {
    let (text, digest) = read_input(path)?;
    let claim = ClaimPayoff::from_json_str(&text, market)
        .map_err(|e| CliError::input("E203", format!("invalid claim file: {e}")))?;
    Ok((claim, digest))
}

fn parse_model(path: &Path) -> Result<(ItoModelSpec, InputDigest), CliError> {
    let (text, digest) = read_input(path)?;
    let model = ItoModelSpec::from_json_str(&text)
        .map_err(|e| CliError::input("E204", format!("invalid model file: {e}")))?;
    Ok((model, digest))
}

fn parse_utility(spec: &str) -> Result<UtilitySpec, CliError> {
    UtilitySpec::from_str(spec).map_err(|e| CliError::input("E205", e))
}

fn map_ftap(e: FtapError) -> CliError {
    CliError::domain("E108", e)
}

fn map_utility(e: UtilityError) -> CliError {
    match e {
        UtilityError::ArbitrageDetected => CliError::domain(
            "E101",
            "the market admits arbitrage; expected utility is unbounded",
        ),
        UtilityError::DidNotConverge(msg) => CliError::domain("E102", msg),
        UtilityError::DomainViolation { .. } => CliError::domain("E103", e),
        UtilityError::InvalidCapital(_)
        | UtilityError::Parse { .. }
        | UtilityError::InvalidGamma(_)
        | UtilityError::InvalidAlpha(_) => CliError::input("E205", e),
        other => CliError::domain("E108", other),
    }
}

fn map_pricing(e: PricingError) -> CliError {
    match e {
        PricingError::MarketHasArbitrage => CliError::domain(
            "E101",
            "the market admits arbitrage; prices are unconstrained",
        ),
        PricingError::Utility(u) => map_utility(u),
        PricingError::BaselineNotConstantRate { .. } => CliError::domain("E104", e),
        PricingError::Claim(_) => CliError::domain("E104", e),
        PricingError::Lp(_) | PricingError::Ftap(_) => CliError::domain("E108", e),
    }
}

fn map_ito(e: ItoError) -> CliError {
    match e {
        ItoError::Parse(_)
        | ItoError::SingularCovariation { .. }
        | ItoError::TooManyAssets { .. }
        | ItoError::InvalidParameter { .. } => CliError::input("E204", e),
        ItoError::DimensionMismatch { .. }
        | ItoError::InvalidStepCount
        | ItoError::InvalidPathCount
        | ItoError::WrongKind => CliError::input("E205", e),
        ItoError::KappaNotInKernel { .. } => CliError::domain("E105", e),
        ItoError::Stats(s) => map_stats(s),
        ItoError::Internal(_) => CliError::domain("E108", e),
    }
}

fn map_stats(e: StatsError) -> CliError {
    match e {
        StatsError::InsufficientPaths { .. } => CliError::domain("E106", e),
        other => CliError::domain("E108", other),
    }
}

fn to_value<T: Serialize>(payload: &T) -> Value {
    serde_json::to_value(payload).expect("payload converts to a JSON value")
}

#[derive(Serialize)]
struct Verdicts {
    no_arbitrage: bool,
    sdf_exists: bool,
    risk_neutral_exists: bool,
}

#[derive(Serialize)]
struct AnalyzePayload {
    outcomes: usize,
    assets: usize,
    verdicts: Verdicts,
    ftap: FtapReport,
    solution_space: Option<SdfSolutionSpace>,
}

pub fn analyze(market_path: &Path) -> Result<CommandOutput, CliError> {
    let (market, digest) = parse_market(market_path)?;
    let ftap = ftap_verdict(&market).map_err(map_ftap)?;
    let solution_space = sdf_solution_space(&market).map_err(map_ftap)?;
    let payload = AnalyzePayload {
        outcomes: market.n_outcomes(),
        assets: market.n_assets(),
        verdicts: Verdicts {
            no_arbitrage: ftap.arbitrage_free,
            sdf_exists: ftap.sdf.is_some(),
            risk_neutral_exists: ftap.risk_neutral.is_some(),
        },
        ftap,
        solution_space,
    };
    Ok((to_value(&payload), Vec::new(), vec![digest]))
}

#[derive(Serialize)]
struct OptimizePayload {
    solution: OptimalSolution,
    state_prices: StatePriceDensity,
}

pub fn optimize_cmd(market_path: &Path, utility: &str, x: f64) -> Result<CommandOutput, CliError> {
    let (market, digest) = parse_market(market_path)?;
    let utility = parse_utility(utility)?;
    let solution = optimize(&market, &utility, x).map_err(map_utility)?;
    let state_prices = state_prices(&market, &solution.sdf);
    let payload = OptimizePayload {
        solution,
        state_prices,
    };
    Ok((to_value(&payload), Vec::new(), vec![digest]))
}

#[derive(Serialize)]
struct PricePayload {
    claim: String,
    capital: f64,
    indifference: IndifferenceOutcome,
    bounds: PriceInterval,
    replication: Replication,
    /// Present only when the baseline grows at one constant rate.
    decomposition: Option<CovarianceDecomposition>,
}

pub fn price(
    market_path: &Path,
    claim_path: &Path,
    utility: &str,
    x: f64,
) -> Result<CommandOutput, CliError> {
    let (market, market_digest) = parse_market(market_path)?;
    let (claim, claim_digest) = parse_claim(claim_path, &market)?;
    let utility = parse_utility(utility)?;
    let indifference = indifference_price(&market, &utility, x, &claim).map_err(map_pricing)?;
    let bounds = price_bounds(&market, &claim).map_err(map_pricing)?;
    let replication = replication_check(&market, &claim).map_err(map_pricing)?;
    let solution = optimize(&market, &utility, x).map_err(map_utility)?;
    let decomposition = match covariance_decomposition(&market, &solution.sdf, &claim) {
        Ok(d) => Some(d),
        Err(PricingError::BaselineNotConstantRate { .. }) => None,
        Err(e) => return Err(map_pricing(e)),
    };
    let payload = PricePayload {
        claim: claim.name().to_string(),
        capital: x,
        indifference,
        bounds,
        replication,
        decomposition,
    };
    Ok((
        to_value(&payload),
        Vec::new(),
        vec![market_digest, claim_digest],
    ))
}

#[derive(Serialize)]
struct BoundsPayload {
    claim: String,
    interval: PriceInterval,
    replication: Replication,
}

pub fn bounds(market_path: &Path, claim_path: &Path) -> Result<CommandOutput, CliError> {
    let (market, market_digest) = parse_market(market_path)?;
    let (claim, claim_digest) = parse_claim(claim_path, &market)?;
    let interval = price_bounds(&market, &claim).map_err(map_pricing)?;
    let replication = replication_check(&market, &claim).map_err(map_pricing)?;
    let payload = BoundsPayload {
        claim: claim.name().to_string(),
        interval,
        replication,
    };
    Ok((
        to_value(&payload),
        Vec::new(),
        vec![market_digest, claim_digest],
    ))
}

#[derive(Serialize)]
struct NamedMartingale {
    process: String,
    report: MartingaleTestReport,
}

#[derive(Serialize)]
struct RiskPremiumEcho {
    lambda_star: Vec<f64>,
    kernel_basis: Vec<Vec<f64>>,
    kappa: Vec<f64>,
    pi_star: Vec<f64>,
    growth_optimal_drift: f64,
}

#[derive(Serialize)]
struct SimulatePayload {
    kind: &'static str,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    risk_premium: Option<RiskPremiumEcho>,
    martingale_tests: Vec<NamedMartingale>,
    statistics: Vec<StatRow>,
}

fn quartile_rows(name: &str, series: &PathSeries) -> Vec<StatRow> {
    let (times, columns) = at_quartiles(series);
    times
        .iter()
        .zip(&columns)
        .map(|(&time, column)| {
            let (mean, std_error) = mean_se(column);
            StatRow {
                time,
                statistic: name.to_string(),
                mean,
                std_error,
                n_paths: column.len(),
            }
        })
        .collect()
}

fn quartile_test(name: &str, series: &PathSeries) -> Result<NamedMartingale, CliError> {
    let (times, columns) = at_quartiles(series);
    let report = martingale_test(&times, &columns, series.initial()).map_err(map_stats)?;
    Ok(NamedMartingale {
        process: name.to_string(),
        report,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    model_path: &Path,
    steps: usize,
    paths: usize,
    seed: u64,
    portfolio: Option<Vec<f64>>,
    kappa: Option<Vec<f64>>,
) -> Result<CommandOutput, CliError> {
    let (model, digest) = parse_model(model_path)?;
    let ensemble = ito::simulate(&model, steps, paths, seed).map_err(map_ito)?;
    let mut statistics = Vec::new();
    let mut tests = Vec::new();
    // Verdicts need a real sample; below the threshold only raw statistics
    // are reported.
    let testable = paths >= MIN_PATHS;

    let (kind, risk_premium) = match &model {
        ItoModelSpec::ConstantCoefficients(_) => {
            let mut rp = risk_premium_star(&model).map_err(map_ito)?;
            if let Some(k) = kappa {
                rp = rp.with_kappa(&model, k).map_err(map_ito)?;
            }
            let pi = pi_star(&model).map_err(map_ito)?;
            let drift = ito::log_wealth_drift(&model, &pi).map_err(map_ito)?;
            let y = sdf_compose(&ensemble, &rp).map_err(map_ito)?;
            statistics.extend(quartile_rows("sdf", &y));
            let deflated_baseline =
                ito::product_paths(&y, &ensemble.baseline_series()).map_err(map_ito)?;
            statistics.extend(quartile_rows("sdf_times_baseline", &deflated_baseline));
            if testable {
                tests.push(quartile_test("sdf_times_baseline", &deflated_baseline)?);
            }
            for i in 0..ensemble.n_assets() {
                let asset = ensemble.asset_series(i);
                statistics.extend(quartile_rows(&format!("asset_{i}"), &asset));
                let deflated = ito::product_paths(&y, &asset).map_err(map_ito)?;
                let name = format!("sdf_times_asset_{i}");
                statistics.extend(quartile_rows(&name, &deflated));
                if testable {
                    tests.push(quartile_test(&name, &deflated)?);
                }
            }
            if let Some(pi_user) = portfolio {
                let wealth = wealth_paths(&ensemble, &pi_user).map_err(map_ito)?;
                statistics.extend(quartile_rows("wealth", &wealth));
                let priced = ito::product_paths(&y, &wealth).map_err(map_ito)?;
                statistics.extend(quartile_rows("sdf_times_wealth", &priced));
                if testable {
                    tests.push(quartile_test("sdf_times_wealth", &priced)?);
                }
            }
            let echo = RiskPremiumEcho {
                lambda_star: rp.lambda_star.clone(),
                kernel_basis: rp.kernel_basis.clone(),
                kappa: rp.kappa_or_zero(ensemble.m_brownian()),
                pi_star: pi,
                growth_optimal_drift: drift,
            };
            ("constant_coefficients", Some(echo))
        }
        ItoModelSpec::Bessel3 { .. } | ItoModelSpec::InverseBessel3 { .. } => {
            if portfolio.is_some() || kappa.is_some() {
                return Err(CliError::input(
                    "E205",
                    "--portfolio and --kappa apply only to constant-coefficient models",
                ));
            }
            let asset = ensemble.asset_series(0);
            statistics.extend(quartile_rows("asset_0", &asset));
            let kind = if matches!(model, ItoModelSpec::Bessel3 { .. }) {
                let reciprocal = ito::reciprocal_paths(&asset);
                statistics.extend(quartile_rows("reciprocal_asset_0", &reciprocal));
                if testable {
                    tests.push(quartile_test("reciprocal_asset_0", &reciprocal)?);
                }
                "bessel3"
            } else {
                if testable {
                    tests.push(quartile_test("asset_0", &asset)?);
                }
                "inverse_bessel3"
            };
            (kind, None)
        }
    };

    let payload = SimulatePayload {
        kind,
        horizon: model.horizon(),
        n_steps: steps,
        n_paths: paths,
        seed,
        risk_premium,
        martingale_tests: tests,
        statistics: statistics.clone(),
    };
    Ok((to_value(&payload), statistics, vec![digest]))
}

#[derive(Serialize)]
struct PricingCheck {
    asset: String,
    initial: f64,
    terminal_mean: f64,
    terminal_se: f64,
    z: f64,
}

#[derive(Serialize)]
struct DecomposePayload {
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    lambda_star: Vec<f64>,
    lambda_norm_sq: f64,
    kernel_basis: Vec<Vec<f64>>,
    kappa: Vec<f64>,
    kappa_norm_sq: f64,
    combined_norm_sq: f64,
    pythagoras_residual: f64,
    pi_star: Vec<f64>,
    growth_optimal_drift: f64,
    verification: Vec<PricingCheck>,
    martingale_tests: Vec<NamedMartingale>,
    statistics: Vec<StatRow>,
}

pub fn decompose(
    model_path: &Path,
    kappa: Vec<f64>,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<CommandOutput, CliError> {
    let (model, digest) = parse_model(model_path)?;
    let rp = risk_premium_star(&model)
        .map_err(map_ito)?
        .with_kappa(&model, kappa)
        .map_err(map_ito)?;
    let kappa = rp.kappa_or_zero(rp.lambda_star.len());
    let sq = |v: &[f64]| -> f64 { v.iter().map(|x| x * x).sum() };
    let combined: Vec<f64> = rp
        .lambda_star
        .iter()
        .zip(&kappa)
        .map(|(l, k)| l + k)
        .collect();
    let lambda_norm_sq = sq(&rp.lambda_star);
    let kappa_norm_sq = sq(&kappa);
    let combined_norm_sq = sq(&combined);

    let ensemble = ito::simulate(&model, steps, paths, seed).map_err(map_ito)?;
    let y = sdf_compose(&ensemble, &rp).map_err(map_ito)?;
    let mut statistics = quartile_rows("sdf", &y);
    let mut tests = Vec::new();
    let mut verification = Vec::new();
    let last = ensemble.n_steps();
    let check = |name: String, series: &PathSeries| -> PricingCheck {
        let (terminal_mean, terminal_se) = mean_se(&series.column(last));
        let initial = series.initial();
        let z = if terminal_se > 0.0 {
            (terminal_mean - initial) / terminal_se
        } else {
            0.0
        };
        PricingCheck {
            asset: name,
            initial,
            terminal_mean,
            terminal_se,
            z,
        }
    };
    let deflated_baseline = ito::product_paths(&y, &ensemble.baseline_series()).map_err(map_ito)?;
    statistics.extend(quartile_rows("sdf_times_baseline", &deflated_baseline));
    tests.push(quartile_test("sdf_times_baseline", &deflated_baseline)?);
    verification.push(check("baseline".to_string(), &deflated_baseline));
    for i in 0..ensemble.n_assets() {
        let asset = ensemble.asset_series(i);
        let deflated = ito::product_paths(&y, &asset).map_err(map_ito)?;
        let name = format!("sdf_times_asset_{i}");
        statistics.extend(quartile_rows(&name, &deflated));
        tests.push(quartile_test(&name, &deflated)?);
        verification.push(check(format!("asset_{i}"), &deflated));
    }

    let pi = pi_star(&model).map_err(map_ito)?;
    let drift = ito::log_wealth_drift(&model, &pi).map_err(map_ito)?;
    let payload = DecomposePayload {
        horizon: model.horizon(),
        n_steps: steps,
        n_paths: paths,
        seed,
        lambda_star: rp.lambda_star.clone(),
        lambda_norm_sq,
        kernel_basis: rp.kernel_basis.clone(),
        kappa,
        kappa_norm_sq,
        combined_norm_sq,
        pythagoras_residual: combined_norm_sq - lambda_norm_sq - kappa_norm_sq,
        pi_star: pi,
        growth_optimal_drift: drift,
        verification,
        martingale_tests: tests,
        statistics: statistics.clone(),
    };
    Ok((to_value(&payload), statistics, vec![digest]))
}

#[derive(Serialize)]
struct BesselPayload {
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    example1: Option<ito::StrictLocalMartingaleReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    example2: Option<ito::PriceGapReport>,
    statistics: Vec<StatRow>,
}

pub fn bessel(
    kind: Option<u8>,
    horizon: f64,
    paths: usize,
    seed: u64,
) -> Result<CommandOutput, CliError> {
    if let Some(k) = kind {
        if k != 1 && k != 2 {
            return Err(CliError::input(
                "E205",
                format!("--kind must be 1 or 2, got {k}"),
            ));
        }
    }
    let report = bessel_counterexamples(horizon, paths, seed).map_err(map_ito)?;
    let mut statistics = Vec::new();
    let want = |k: u8| kind.is_none() || kind == Some(k);
    if want(1) {
        for c in &report.example1.reciprocal.checkpoints {
            statistics.push(StatRow {
                time: c.time,
                statistic: "example1_reciprocal".to_string(),
                mean: c.mean,
                std_error: c.std_error,
                n_paths: report.n_paths,
            });
        }
    }
    if want(2) {
        for c in &report.example2.martingale.checkpoints {
            statistics.push(StatRow {
                time: c.time,
                statistic: "example2_price".to_string(),
                mean: c.mean,
                std_error: c.std_error,
                n_paths: report.n_paths,
            });
        }
    }
    let payload = BesselPayload {
        horizon: report.horizon,
        n_steps: BESSEL_STEPS,
        n_paths: report.n_paths,
        seed,
        example1: want(1).then_some(report.example1),
        example2: want(2).then_some(report.example2),
        statistics: statistics.clone(),
    };
    Ok((to_value(&payload), statistics, vec![]))
}
