//! Arbitrage detection and stochastic discount factors in one-period
//! markets.
//!
//! The two sides are linked by the fundamental theorem of asset pricing:
//! a market admits no arbitrage exactly when some strictly positive vector
//! discounts every traded asset back to its quoted price. Both directions
//! are decided here by linear programs, and `ftap_verdict` insists that the
//! two independent programs agree before reporting anything.

use crate::linalg::{self, Matrix};
use crate::lp::{ConstraintOp, LpError, LpProblem};
use crate::market::{deflate, DiscreteMarket};
use serde::Serialize;
use thiserror::Error;

/// Pricing equations must hold to this combined absolute/relative tolerance.
pub const SDF_PRICING_TOL: f64 = 1e-9;
/// Discount factor components are searched for above this floor; a market
/// whose only candidates dip below it is treated as having none.
pub const SDF_FLOOR: f64 = 1e-9;
/// Arbitrage-search optima above this value certify an arbitrage. The
/// search is scale-free: the optimum is 0 in an arbitrage-free market and
/// at least 1 otherwise, so the threshold has a wide safety margin.
pub const ARBITRAGE_TOL: f64 = 1e-8;
/// Certificate gains may dip this far below zero before verification fails.
const CERT_NEG_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SdfViolation {
    #[error("component {outcome} is {value}, not strictly positive")]
    NonPositive { outcome: usize, value: f64 },
    #[error("asset {asset:?} prices to {actual}, quoted {expected}")]
    Pricing {
        asset: String,
        expected: f64,
        actual: f64,
    },
    #[error("expected {expected} components, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite component {value}")]
    NonFinite { value: f64 },
}

#[derive(Debug, Error)]
pub enum FtapError {
    #[error("discount factor rejected: {0}")]
    InvalidSdf(#[from] SdfViolation),
    #[error("linear program failed: {0}")]
    Lp(LpError),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
}

/// Strictly positive vector pricing every traded asset, baseline included:
/// sum_w P(w) Y(w) S^i_T(w) = S^i_0 for each i.
///
/// Construction runs the full check, so a held `SdfVector` is always valid
/// for the market it was built against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfVector {
    values: Vec<f64>,
}

impl SdfVector {
    pub fn new(market: &DiscreteMarket, values: Vec<f64>) -> Result<Self, SdfViolation> {
        if values.len() != market.n_outcomes() {
            return Err(SdfViolation::Dimension {
                expected: market.n_outcomes(),
                got: values.len(),
            });
        }
        for (w, &y) in values.iter().enumerate() {
            if !y.is_finite() {
                return Err(SdfViolation::NonFinite { value: y });
            }
            if y <= 0.0 {
                return Err(SdfViolation::NonPositive {
                    outcome: w,
                    value: y,
                });
            }
        }
        let check = |name: &str, s0: f64, st: &[f64]| -> Result<(), SdfViolation> {
            let priced: f64 = market
                .prob()
                .iter()
                .zip(values.iter().zip(st))
                .map(|(p, (y, s))| p * y * s)
                .sum();
            if (priced - s0).abs() > SDF_PRICING_TOL * s0.abs().max(1.0) {
                return Err(SdfViolation::Pricing {
                    asset: name.to_string(),
                    expected: s0,
                    actual: priced,
                });
            }
            Ok(())
        };
        check("baseline", market.baseline_s0(), market.baseline_st())?;
        for i in 0..market.n_assets() {
            check(
                &market.asset_names()[i],
                market.asset_s0()[i],
                market.asset_st(i),
            )?;
        }
        Ok(SdfVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Price of an arbitrary payoff under this discount factor:
    /// sum_w P(w) Y(w) H(w).
    pub fn price(&self, market: &DiscreteMarket, payoff: &[f64]) -> f64 {
        debug_assert_eq!(payoff.len(), self.values.len());
        market
            .prob()
            .iter()
            .zip(self.values.iter().zip(payoff))
            .map(|(p, (y, h))| p * y * h)
            .sum()
    }
}

/// Strictly positive probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskNeutralMeasure {
    q: Vec<f64>,
}

impl RiskNeutralMeasure {
    /// Validates positivity and normalizes the total to one. Inputs already
    /// summing to one (within a few ulp) are left bit-for-bit unchanged.
    pub fn new(q: Vec<f64>) -> Result<Self, SdfViolation> {
        if q.is_empty() {
            return Err(SdfViolation::Dimension {
                expected: 1,
                got: 0,
            });
        }
        for (w, &v) in q.iter().enumerate() {
            if !v.is_finite() {
                return Err(SdfViolation::NonFinite { value: v });
            }
            if v <= 0.0 {
                return Err(SdfViolation::NonPositive {
                    outcome: w,
                    value: v,
                });
            }
        }
        let sum: f64 = q.iter().sum();
        let q = if (sum - 1.0).abs() <= 4.0 * f64::EPSILON {
            q
        } else {
            q.into_iter().map(|v| v / sum).collect()
        };
        Ok(RiskNeutralMeasure { q })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    pub fn expect(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.q.len());
        self.q.iter().zip(values).map(|(q, v)| q * v).sum()
    }
}

/// Zero-cost strategy whose deflated gains are nonnegative everywhere and
/// strictly positive somewhere. Construction re-derives the gains from the
/// strategy and verifies both properties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageCertificate {
    pub theta: Vec<f64>,
    /// Deflated gains per outcome: sum_i theta_i (beta_T S^i_T - S^i_0)(w).
    pub gains: Vec<f64>,
}

impl ArbitrageCertificate {
    pub fn new(market: &DiscreteMarket, theta: Vec<f64>) -> Result<Self, FtapError> {
        if theta.len() != market.n_assets() {
            return Err(SdfViolation::Dimension {
                expected: market.n_assets(),
                got: theta.len(),
            }
            .into());
        }
        let gains = deflated_gains(market, &theta);
        let min = gains.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = gains.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min < -CERT_NEG_TOL * max.abs().max(1.0) || max <= ARBITRAGE_TOL {
            return Err(FtapError::InternalInconsistency(format!(
                "candidate strategy is not an arbitrage: gains range [{min}, {max}]"
            )));
        }
        Ok(ArbitrageCertificate { theta, gains })
    }
}

/// Deflated excess payoffs per asset, with entries at rounding scale
/// clipped to exact zero. Without the clip, computing beta_T * S_T for an
/// asset that is a riskless multiple of the baseline leaves one-sided
/// 1e-16 residue that a free-scaling search would amplify into a phantom
/// arbitrage.
fn clipped_excess(market: &DiscreteMarket) -> Vec<Vec<f64>> {
    let beta = deflate(market);
    (0..market.n_assets())
        .map(|i| {
            let mut col: Vec<f64> = (0..market.n_outcomes())
                .map(|w| beta.beta_t()[w] * market.asset_st(i)[w] - market.asset_s0()[i])
                .collect();
            let scale = (0..market.n_outcomes())
                .map(|w| (beta.beta_t()[w] * market.asset_st(i)[w]).abs())
                .fold(market.asset_s0()[i].abs(), f64::max)
                .max(1.0);
            for v in col.iter_mut() {
                if v.abs() <= 1e-12 * scale {
                    *v = 0.0;
                }
            }
            col
        })
        .collect()
}

/// Deflated gains of a zero-capital position theta.
fn deflated_gains(market: &DiscreteMarket, theta: &[f64]) -> Vec<f64> {
    let excess = clipped_excess(market);
    (0..market.n_outcomes())
        .map(|w| {
            theta
                .iter()
                .zip(&excess)
                .map(|(&th, col)| th * col[w])
                .sum()
        })
        .collect()
}

/// Searches for an arbitrage by maximizing slack variables dominated by the
/// deflated gains of a free position:
///
///   max sum_w s_w   s.t.   gains_theta(w) >= s_w,  0 <= s_w <= 1.
///
/// Scaling theta freely makes the optimum 0 precisely in arbitrage-free
/// markets and at least 1 otherwise.
pub fn find_arbitrage(market: &DiscreteMarket) -> Result<Option<ArbitrageCertificate>, FtapError> {
    let n = market.n_outcomes();
    let d = market.n_assets();
    let excess = clipped_excess(market);

    let mut lp = LpProblem::new();
    let theta_vars: Vec<usize> = (0..d)
        .map(|_| lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0))
        .collect();
    let slack_vars: Vec<usize> = (0..n).map(|_| lp.add_var(0.0, 1.0, 1.0)).collect();
    for w in 0..n {
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(d + 1);
        for i in 0..d {
            terms.push((theta_vars[i], excess[i][w]));
        }
        terms.push((slack_vars[w], -1.0));
        lp.add_constraint(&terms, ConstraintOp::Ge, 0.0);
    }

    let sol = lp.maximize().map_err(FtapError::Lp)?;
    if sol.objective <= ARBITRAGE_TOL {
        return Ok(None);
    }
    let theta: Vec<f64> = theta_vars.iter().map(|&v| sol.values[v]).collect();
    ArbitrageCertificate::new(market, theta).map(Some)
}

/// Searches for a discount factor by a feasibility program over
/// y >= SDF_FLOOR subject to the pricing equalities, maximizing the
/// smallest component to land strictly inside the feasible set when it has
/// interior. Returns `Ok(None)` when no candidate clears the floor, which
/// by the fundamental theorem means the market has an arbitrage.
pub fn find_sdf(market: &DiscreteMarket) -> Result<Option<SdfVector>, FtapError> {
    let n = market.n_outcomes();
    let (pricing, quoted) = pricing_system(market);

    let mut lp = LpProblem::new();
    let y_vars: Vec<usize> = (0..n)
        .map(|_| lp.add_var(SDF_FLOOR, f64::INFINITY, 0.0))
        .collect();
    let t = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
    for (row, &price) in quoted.iter().enumerate() {
        let terms: Vec<(usize, f64)> = (0..n).map(|w| (y_vars[w], pricing.get(row, w))).collect();
        lp.add_constraint(&terms, ConstraintOp::Eq, price);
    }
    for &y in &y_vars {
        lp.add_constraint(&[(y, 1.0), (t, -1.0)], ConstraintOp::Ge, 0.0);
    }

    let values = match lp.maximize() {
        Ok(sol) => y_vars.iter().map(|&v| sol.values[v]).collect::<Vec<f64>>(),
        Err(LpError::Infeasible) => return Ok(None),
        Err(e) => return Err(FtapError::Lp(e)),
    };

    // The program decides feasibility only up to its phase tolerance, which
    // is wider than P(w) times the floor, so a market whose exact pricing
    // forces some component to zero can sneak through with that component
    // parked on the floor and a sub-tolerance residual. Re-impose the
    // equalities exactly and let the floor judge the corrected vector.
    let off_by = {
        let priced = pricing.mul_vec(&values);
        quoted
            .iter()
            .zip(&priced)
            .map(|(b, a)| b - a)
            .collect::<Vec<f64>>()
    };
    let scale = quoted.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let fit = linalg::lstsq(&pricing, &off_by);
    if linalg::sup_norm(&fit.residual) > 1e-10 * scale {
        // The equalities have no exact solution at all.
        return Ok(None);
    }
    let refined: Vec<f64> = values
        .iter()
        .zip(&fit.solution)
        .map(|(y, d)| y + d)
        .collect();
    if refined.iter().cloned().fold(f64::INFINITY, f64::min) < 0.5 * SDF_FLOOR {
        return Ok(None);
    }
    match SdfVector::new(market, refined) {
        Ok(sdf) => Ok(Some(sdf)),
        Err(_) => Ok(None),
    }
}

/// P-weighted payoff matrix of the pricing equalities, baseline row first,
/// together with the quoted prices they must hit.
pub(crate) fn pricing_system(market: &DiscreteMarket) -> (Matrix, Vec<f64>) {
    let n = market.n_outcomes();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(market.n_assets() + 1);
    let mut quoted = Vec::with_capacity(market.n_assets() + 1);
    rows.push(
        (0..n)
            .map(|w| market.prob()[w] * market.baseline_st()[w])
            .collect(),
    );
    quoted.push(market.baseline_s0());
    for i in 0..market.n_assets() {
        rows.push(
            (0..n)
                .map(|w| market.prob()[w] * market.asset_st(i)[w])
                .collect(),
        );
        quoted.push(market.asset_s0()[i]);
    }
    (Matrix::from_rows(&rows), quoted)
}

/// Affine description of every discount factor of a market:
/// `particular + sum_k alpha_k directions[k]`, restricted to strictly
/// positive vectors.
#[derive(Debug, Clone, Serialize)]
pub struct SdfSolutionSpace {
    pub particular: SdfVector,
    /// Null-space basis of the pricing equations under the P-weighted
    /// payoff matrix.
    pub directions: Vec<Vec<f64>>,
    /// Per-direction open coefficient ranges that keep
    /// `particular + alpha * direction` strictly positive when moved one
    /// direction at a time. Joint moves need a joint positivity check.
    pub intervals: Vec<(f64, f64)>,
}

impl SdfSolutionSpace {
    pub fn dimension(&self) -> usize {
        self.directions.len()
    }
}

/// Describes the full family of discount factors, or `Ok(None)` when the
/// market has none.
pub fn sdf_solution_space(market: &DiscreteMarket) -> Result<Option<SdfSolutionSpace>, FtapError> {
    let Some(particular) = find_sdf(market)? else {
        return Ok(None);
    };
    let n = market.n_outcomes();
    let (pricing, _) = pricing_system(market);
    let directions = linalg::null_space(&pricing, 1e-10);

    let y = particular.values();
    let intervals = directions
        .iter()
        .map(|v| {
            let scale = linalg::sup_norm(v);
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for w in 0..n {
                if v[w].abs() <= 1e-12 * scale.max(1.0) {
                    continue;
                }
                let boundary = -y[w] / v[w];
                if v[w] > 0.0 {
                    lo = lo.max(boundary);
                } else {
                    hi = hi.min(boundary);
                }
            }
            (lo, hi)
        })
        .collect();

    Ok(Some(SdfSolutionSpace {
        particular,
        directions,
        intervals,
    }))
}

/// Probabilities q(w) proportional to (S0_T(w)/S0_0) Y(w) P(w). With a valid
/// discount factor these already sum to one up to the pricing tolerance; the
/// result is normalized exactly.
pub fn sdf_to_risk_neutral(market: &DiscreteMarket, sdf: &SdfVector) -> RiskNeutralMeasure {
    let q: Vec<f64> = (0..market.n_outcomes())
        .map(|w| market.growth(w) * sdf.values()[w] * market.prob()[w])
        .collect();
    RiskNeutralMeasure::new(q).expect("positive discount factor yields a positive measure")
}

/// Inverse of `sdf_to_risk_neutral`: y(w) = (S0_0/S0_T(w)) q(w)/P(w).
///
/// The result is re-checked against the market, so a measure that does not
/// actually price the traded assets is rejected here. Tolerances compose:
/// a discount factor hovering at the edge of the pricing tolerance may fail
/// the round trip.
pub fn risk_neutral_to_sdf(
    market: &DiscreteMarket,
    measure: &RiskNeutralMeasure,
) -> Result<SdfVector, FtapError> {
    if measure.probabilities().len() != market.n_outcomes() {
        return Err(SdfViolation::Dimension {
            expected: market.n_outcomes(),
            got: measure.probabilities().len(),
        }
        .into());
    }
    let values: Vec<f64> = (0..market.n_outcomes())
        .map(|w| measure.probabilities()[w] / (market.growth(w) * market.prob()[w]))
        .collect();
    Ok(SdfVector::new(market, values)?)
}

/// Joint verdict with witnesses. Runs both independent programs and refuses
/// to answer unless they agree on which side of the theorem the market is.
#[derive(Debug, Clone, Serialize)]
pub struct FtapReport {
    pub arbitrage_free: bool,
    pub sdf: Option<SdfVector>,
    pub risk_neutral: Option<RiskNeutralMeasure>,
    pub certificate: Option<ArbitrageCertificate>,
}

pub fn ftap_verdict(market: &DiscreteMarket) -> Result<FtapReport, FtapError> {
    let certificate = find_arbitrage(market)?;
    let sdf = find_sdf(market)?;
    match (certificate.is_some(), sdf.is_some()) {
        (true, true) => Err(FtapError::InternalInconsistency(
            "found both an arbitrage and a discount factor".into(),
        )),
        (false, false) => Err(FtapError::InternalInconsistency(
            "found neither an arbitrage nor a discount factor".into(),
        )),
        _ => {
            let risk_neutral = sdf.as_ref().map(|y| sdf_to_risk_neutral(market, y));
            Ok(FtapReport {
                arbitrage_free: sdf.is_some(),
                sdf,
                risk_neutral,
                certificate,
            })
        }
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::testutil::market;
    use proptest::prelude::*;

    /// Grid-valued payoffs keep every LP decision far from its threshold.
    fn quarter(r: std::ops::RangeInclusive<i32>) -> impl Strategy<Value = f64> {
        r.prop_map(|v| v as f64 * 0.25)
    }

    #[derive(Debug, Clone)]
    struct Case {
        probs: Vec<f64>,
        baseline_st: Vec<f64>,
        asset_s0: f64,
        asset_st: Vec<f64>,
    }

    fn case_strategy() -> impl Strategy<Value = Case> {
        (2..=5usize)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(1..=4u32, n),
                    prop::collection::vec(quarter(2..=6), n),
                    quarter(1..=16),
                    prop::collection::vec(quarter(1..=16), n),
                )
            })
            .prop_map(|(weights, baseline_st, asset_s0, asset_st)| {
                let total: u32 = weights.iter().sum();
                Case {
                    probs: weights.iter().map(|&w| w as f64 / total as f64).collect(),
                    baseline_st,
                    asset_s0,
                    asset_st,
                }
            })
    }

    fn build(case: &Case) -> DiscreteMarket {
        market(
            &case.probs,
            1.0,
            &case.baseline_st,
            &[("stock", case.asset_s0, &case.asset_st)],
        )
    }

    /// For one risky asset an arbitrage exists exactly when the deflated
    /// excess payoffs all share a sign (with at least one strictly nonzero):
    /// scaling +-theta turns the common sign into riskless gains.
    fn single_asset_arbitrage_exists(m: &DiscreteMarket) -> bool {
        let beta = crate::market::deflate(m);
        let excess: Vec<f64> = (0..m.n_outcomes())
            .map(|w| beta.beta_t()[w] * m.asset_st(0)[w] - m.asset_s0()[0])
            .collect();
        let pos = excess.iter().any(|&e| e > 1e-12);
        let neg = excess.iter().any(|&e| e < -1e-12);
        (pos && !neg) || (neg && !pos)
    }

    proptest! {
        #[test]
        fn triad_agrees_on_single_asset_markets(case in case_strategy()) {
            let m = build(&case);
            let verdict = ftap_verdict(&m).expect("verdict must be consistent");
            let oracle_arb = single_asset_arbitrage_exists(&m);
            prop_assert_eq!(verdict.arbitrage_free, !oracle_arb);
            prop_assert_eq!(verdict.sdf.is_some(), !oracle_arb);
            prop_assert_eq!(verdict.certificate.is_some(), oracle_arb);
        }

        #[test]
        fn priced_markets_admit_a_discount_factor(
            weights in prop::collection::vec(1..=4u32, 2..=6),
            y_grid in prop::collection::vec(1..=12u32, 2..=6),
            payoff in prop::collection::vec(quarter(1..=16), 2..=6),
        ) {
            // Build the discount factor first and quote prices from it, so
            // the market is arbitrage-free by construction.
            let n = weights.len().min(y_grid.len()).min(payoff.len());
            let total: u32 = weights[..n].iter().sum();
            let probs: Vec<f64> = weights[..n].iter().map(|&w| w as f64 / total as f64).collect();
            let y: Vec<f64> = y_grid[..n].iter().map(|&g| g as f64 * 0.25).collect();
            let baseline_st: Vec<f64> = y.iter().map(|v| 1.0 / v).collect();
            let s0: f64 = probs
                .iter()
                .zip(y.iter().zip(&payoff[..n]))
                .map(|(p, (yv, h))| p * yv * h)
                .sum();
            let m = market(&probs, 1.0, &baseline_st, &[("stock", s0, &payoff[..n])]);

            let verdict = ftap_verdict(&m).expect("consistent verdict");
            prop_assert!(verdict.arbitrage_free);
            let sdf = verdict.sdf.unwrap();

            // Round trips stay within 1e-12.
            let q = sdf_to_risk_neutral(&m, &sdf);
            let y2 = risk_neutral_to_sdf(&m, &q).unwrap();
            let q2 = sdf_to_risk_neutral(&m, &y2);
            for w in 0..m.n_outcomes() {
                prop_assert!((q.probabilities()[w] - q2.probabilities()[w]).abs() <= 1e-12);
            }
        }
    }
}
