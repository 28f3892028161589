//! Pricing of contingent claims: no-arbitrage bounds, replication,
//! marginal utility prices, state prices, and the covariance form of the
//! pricing rule.
//!
//! A claim that is not traded has no single price; it has the interval
//! swept out by E[Y H] as Y runs over the market's discount factors. The
//! functions here compute that interval, decide whether its endpoints are
//! actually reached, and produce point estimates (replication cost when
//! the claim is spanned, marginal utility price otherwise).

use crate::ftap::{self, FtapError, SdfVector};
use crate::linalg::{self, Matrix};
use crate::lp::{ConstraintOp, LpError, LpProblem};
use crate::market::{ClaimPayoff, DiscreteMarket, MarketError};
use crate::utility::{self, UtilityError, UtilitySpec};
use serde::Serialize;
use thiserror::Error;

/// Endpoints within this of the LP optimum count as attained only if a
/// discount factor with min component above this still achieves them.
const ATTAINMENT_TOL: f64 = 1e-9;
/// Sup-norm residual (relative to the claim scale) below which a
/// least-squares hedge counts as exact replication.
const REPLICATION_TOL: f64 = 1e-9;
/// Outcome-to-outcome growth spread tolerated while still calling the
/// baseline a constant-rate account.
const CONSTANT_RATE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("market admits arbitrage; claims have no consistent prices")]
    MarketHasArbitrage,
    #[error("claim is invalid for this market: {0}")]
    Claim(#[from] MarketError),
    #[error("linear program failed: {0}")]
    Lp(LpError),
    #[error(transparent)]
    Ftap(#[from] FtapError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("baseline growth varies across outcomes ({min} to {max}); no riskless rate")]
    BaselineNotConstantRate { min: f64, max: f64 },
}

/// No-arbitrage price interval of a claim. `lower`/`upper` are the inf/sup
/// of E[Y H] over all discount factors; an endpoint is `attained` when some
/// strictly positive discount factor reaches it, in which case extending
/// the market by the claim at that price is still arbitrage-free.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_attained: bool,
    pub upper_attained: bool,
}

impl PriceInterval {
    pub fn contains(&self, price: f64) -> bool {
        let above = if self.lower_attained {
            price >= self.lower
        } else {
            price > self.lower
        };
        let below = if self.upper_attained {
            price <= self.upper
        } else {
            price < self.upper
        };
        above && below
    }

    pub fn is_degenerate(&self) -> bool {
        self.upper - self.lower <= ATTAINMENT_TOL * self.upper.abs().max(1.0)
    }
}

enum Goal {
    Minimize,
    Maximize,
}

/// One endpoint of the claim-price range over nonnegative solutions of the
/// pricing equalities. `None` means the range is unbounded on that side.
fn price_endpoint(
    pricing: &Matrix,
    quoted: &[f64],
    weighted_claim: &[f64],
    goal: Goal,
) -> Result<Option<f64>, PricingError> {
    let n = weighted_claim.len();
    let mut lp = LpProblem::new();
    let y_vars: Vec<usize> = (0..n)
        .map(|w| lp.add_var(0.0, f64::INFINITY, weighted_claim[w]))
        .collect();
    for (row, &price) in quoted.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..n).map(|w| (y_vars[w], pricing.get(row, w))).collect();
        lp.add_constraint(&terms, ConstraintOp::Eq, price);
    }
    let solved = match goal {
        Goal::Minimize => lp.minimize(),
        Goal::Maximize => lp.maximize(),
    };
    match solved {
        Ok(sol) => Ok(Some(sol.objective)),
        Err(LpError::Unbounded) => Ok(None),
        Err(e) => Err(PricingError::Lp(e)),
    }
}

/// Whether some discount factor bounded away from zero still prices the
/// claim at `endpoint`: maximize the smallest component of y over the
/// optimal face.
fn endpoint_attained(
    pricing: &Matrix,
    quoted: &[f64],
    weighted_claim: &[f64],
    endpoint: f64,
) -> Result<bool, PricingError> {
    let n = weighted_claim.len();
    let mut lp = LpProblem::new();
    let y_vars: Vec<usize> = (0..n)
        .map(|_| lp.add_var(0.0, f64::INFINITY, 0.0))
        .collect();
    let t = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
    for (row, &price) in quoted.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..n).map(|w| (y_vars[w], pricing.get(row, w))).collect();
        lp.add_constraint(&terms, ConstraintOp::Eq, price);
    }
    let claim_row: Vec<(usize, f64)> = (0..n).map(|w| (y_vars[w], weighted_claim[w])).collect();
    lp.add_constraint(&claim_row, ConstraintOp::Eq, endpoint);
    for &y in &y_vars {
        lp.add_constraint(&[(y, 1.0), (t, -1.0)], ConstraintOp::Ge, 0.0);
    }
    match lp.maximize() {
        Ok(sol) => Ok(sol.objective > ATTAINMENT_TOL),
        // The endpoint equality can be unbounded in t only through
        // numerical slack; a face reached this way is genuinely interior.
        Err(LpError::Unbounded) => Ok(true),
        Err(e) => Err(PricingError::Lp(e)),
    }
}

/// No-arbitrage price bounds of a claim, with endpoint attainment flags.
/// Requires an arbitrage-free market.
pub fn price_bounds(
    market: &DiscreteMarket,
    claim: &ClaimPayoff,
) -> Result<PriceInterval, PricingError> {
    claim.check_alignment(market)?;
    if ftap::find_sdf(market)?.is_none() {
        return Err(PricingError::MarketHasArbitrage);
    }
    let (pricing, quoted) = ftap::pricing_system(market);
    let weighted_claim: Vec<f64> = market
        .prob()
        .iter()
        .zip(claim.payoff())
        .map(|(p, h)| p * h)
        .collect();

    let lower = price_endpoint(&pricing, &quoted, &weighted_claim, Goal::Minimize)?;
    let upper = price_endpoint(&pricing, &quoted, &weighted_claim, Goal::Maximize)?;
    let lower_attained = match lower {
        Some(v) => endpoint_attained(&pricing, &quoted, &weighted_claim, v)?,
        None => false,
    };
    let upper_attained = match upper {
        Some(v) => endpoint_attained(&pricing, &quoted, &weighted_claim, v)?,
        None => false,
    };
    Ok(PriceInterval {
        lower: lower.unwrap_or(f64::NEG_INFINITY),
        upper: upper.unwrap_or(f64::INFINITY),
        lower_attained,
        upper_attained,
    })
}

/// Least-squares hedge of a claim by the baseline and the traded assets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    /// Initial capital of the hedge; its price when `replicable`.
    pub x: f64,
    pub theta: Vec<f64>,
    /// Worst absolute gap between hedge payoff and claim payoff.
    pub residual_sup: f64,
    pub replicable: bool,
}

/// Solves x growth(w) + sum_i theta_i excess_i(w) = H(w) in the least
/// squares sense and reports whether the fit is exact. When it is, the
/// claim is traded in all but name and `x` is its only arbitrage-free
/// price.
pub fn replication_check(
    market: &DiscreteMarket,
    claim: &ClaimPayoff,
) -> Result<Replication, PricingError> {
    claim.check_alignment(market)?;
    let n = market.n_outcomes();
    let d = market.n_assets();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|w| {
            let mut row = Vec::with_capacity(d + 1);
            row.push(market.growth(w));
            for i in 0..d {
                row.push(market.excess_payoff(i, w));
            }
            row
        })
        .collect();
    let fit = linalg::lstsq(&Matrix::from_rows(&rows), claim.payoff());
    let residual_sup = linalg::sup_norm(&fit.residual);
    let scale = linalg::sup_norm(claim.payoff()).max(1.0);
    Ok(Replication {
        x: fit.solution[0],
        theta: fit.solution[1..].to_vec(),
        residual_sup,
        replicable: residual_sup <= REPLICATION_TOL * scale,
    })
}

/// Marginal utility price of a claim, with its consistency check.
#[derive(Debug, Clone, Serialize)]
pub struct IndifferenceOutcome {
    /// E[Y H] under the optimizer's discount factor: the price at which a
    /// first, infinitesimal position in the claim leaves the investor
    /// indifferent.
    pub price: f64,
    /// Claim position after re-optimizing in the market extended by the
    /// claim quoted at `price`. Near zero when the check succeeds; `None`
    /// when the extended payoff matrix is rank-deficient and the position
    /// is not identified.
    pub claim_position: Option<f64>,
}

/// Prices a claim by marginal utility: optimize the market, price with the
/// induced discount factor, then verify by re-optimizing the market
/// extended with the claim quoted at that price. At the marginal price the
/// first-order conditions already hold with a zero claim position, so the
/// re-optimization must not want to trade it.
pub fn indifference_price(
    market: &DiscreteMarket,
    utility: &UtilitySpec,
    x: f64,
    claim: &ClaimPayoff,
) -> Result<IndifferenceOutcome, PricingError> {
    claim.check_alignment(market)?;
    let sol = utility::optimize(market, utility, x)?;
    let price = sol.sdf.price(market, claim.payoff());

    let extended = market.augment_with_claim(claim, price, claim.name())?;
    let mut warm = sol.theta.clone();
    warm.push(0.0);
    let ext = utility::optimize_from(&extended, utility, x, &warm)?;

    let n = market.n_outcomes();
    let cols = extended.n_assets() + 1;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|w| {
            let mut row = Vec::with_capacity(cols);
            row.push(extended.growth(w));
            for i in 0..extended.n_assets() {
                row.push(extended.excess_payoff(i, w));
            }
            row
        })
        .collect();
    let identified = linalg::rank(&Matrix::from_rows(&rows), 1e-10) == cols;
    Ok(IndifferenceOutcome {
        price,
        claim_position: identified.then(|| *ext.theta.last().unwrap()),
    })
}

/// Prices of the unit indicator payoffs, one per outcome:
/// q(w) = P(w) Y(w). Nonnegative pricing in its most granular form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePriceDensity {
    state_prices: Vec<f64>,
}

impl StatePriceDensity {
    pub fn state_prices(&self) -> &[f64] {
        &self.state_prices
    }

    /// Price of an arbitrary payoff: sum_w q(w) H(w).
    pub fn price(&self, payoff: &[f64]) -> f64 {
        debug_assert_eq!(payoff.len(), self.state_prices.len());
        self.state_prices
            .iter()
            .zip(payoff)
            .map(|(q, h)| q * h)
            .sum()
    }

    /// Price of the sure unit payoff, E[Y].
    pub fn unit_discount(&self) -> f64 {
        self.state_prices.iter().sum()
    }
}

pub fn state_prices(market: &DiscreteMarket, sdf: &SdfVector) -> StatePriceDensity {
    StatePriceDensity {
        state_prices: market
            .prob()
            .iter()
            .zip(sdf.values())
            .map(|(p, y)| p * y)
            .collect(),
    }
}

/// Price of a claim split into its discounted expectation and a covariance
/// premium: E[Y H] = E[Y] E[H] + cov(Y, H), with E[Y] = 1/growth when the
/// baseline is a constant-rate account.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceDecomposition {
    /// E[Y H], computed directly.
    pub price: f64,
    pub expected_payoff: f64,
    /// E[Y]; the price of the sure unit payoff.
    pub mean_discount: f64,
    /// cov(Y, H) from centered moments, so the identity
    /// price = mean_discount * expected_payoff + covariance is a real
    /// numerical statement rather than a rearrangement.
    pub covariance: f64,
    /// Common growth factor of the baseline across outcomes.
    pub riskless_growth: f64,
}

pub fn covariance_decomposition(
    market: &DiscreteMarket,
    sdf: &SdfVector,
    claim: &ClaimPayoff,
) -> Result<CovarianceDecomposition, PricingError> {
    claim.check_alignment(market)?;
    let n = market.n_outcomes();
    let growth: Vec<f64> = (0..n).map(|w| market.growth(w)).collect();
    let gmin = growth.iter().cloned().fold(f64::INFINITY, f64::min);
    let gmax = growth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if gmax - gmin > CONSTANT_RATE_TOL * gmax.abs().max(1.0) {
        return Err(PricingError::BaselineNotConstantRate {
            min: gmin,
            max: gmax,
        });
    }

    let p = market.prob();
    let y = sdf.values();
    let h = claim.payoff();
    let price: f64 = (0..n).map(|w| p[w] * y[w] * h[w]).sum();
    let expected_payoff: f64 = (0..n).map(|w| p[w] * h[w]).sum();
    let mean_discount: f64 = (0..n).map(|w| p[w] * y[w]).sum();
    let covariance: f64 = (0..n)
        .map(|w| p[w] * (y[w] - mean_discount) * (h[w] - expected_payoff))
        .sum();
    Ok(CovarianceDecomposition {
        price,
        expected_payoff,
        mean_discount,
        covariance,
        riskless_growth: gmax,
    })
}
