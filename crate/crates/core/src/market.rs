//! Finite-state one-period markets: a baseline asset, d risky assets,
//! probabilities over outcomes, deflation, and wealth arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities must sum to one within this tolerance before renormalization.
pub const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("outcome {outcome}: probability {value} is not strictly positive")]
    NonPositiveProbability { outcome: String, value: f64 },
    #[error("probabilities sum to {sum}, not 1 (tolerance {PROB_SUM_TOL:e})")]
    ProbabilityNotNormalized { sum: f64 },
    #[error("baseline price {value} is not strictly positive")]
    NonPositiveBaseline { value: f64 },
    #[error("{context}: expected length {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("market has no outcomes")]
    EmptyOutcomeSpace,
    #[error("{context}: non-finite value {value}")]
    NonFiniteValue { context: &'static str, value: f64 },
}

/// Unvalidated market description, also the on-disk JSON schema.
///
/// ```json
/// {
///   "outcomes": ["u", "d"],
///   "probabilities": [0.5, 0.5],
///   "baseline": { "s0": 1.0, "sT": [1.0, 1.0] },
///   "assets": [ { "name": "stock", "s0": 1.0, "sT": [2.0, 0.5] } ]
/// }
/// ```
///
/// Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarket {
    pub outcomes: Vec<String>,
    pub probabilities: Vec<f64>,
    pub baseline: RawBaseline,
    #[serde(default)]
    pub assets: Vec<RawAsset>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBaseline {
    pub s0: f64,
    #[serde(rename = "sT")]
    pub s_t: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAsset {
    pub name: String,
    pub s0: f64,
    #[serde(rename = "sT")]
    pub s_t: Vec<f64>,
}

/// Validated one-period market over a finite outcome space.
///
/// All fields are immutable after construction; operations borrow the market
/// and may run concurrently.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMarket {
    outcomes: Vec<String>,
    prob: Vec<f64>,
    baseline_s0: f64,
    baseline_st: Vec<f64>,
    asset_names: Vec<String>,
    asset_s0: Vec<f64>,
    /// Row i holds asset i's payoff across outcomes.
    asset_st: Vec<Vec<f64>>,
}

impl DiscreteMarket {
    /// Validates a raw description. Probabilities within `PROB_SUM_TOL` of
    /// unity are renormalized; anything further off is an error.
    pub fn validate(raw: &RawMarket) -> Result<Self, MarketError> {
        let n = raw.outcomes.len();
        if n == 0 {
            return Err(MarketError::EmptyOutcomeSpace);
        }
        if raw.probabilities.len() != n {
            return Err(MarketError::DimensionMismatch {
                context: "probabilities",
                expected: n,
                got: raw.probabilities.len(),
            });
        }
        if raw.baseline.s_t.len() != n {
            return Err(MarketError::DimensionMismatch {
                context: "baseline.sT",
                expected: n,
                got: raw.baseline.s_t.len(),
            });
        }
        for (label, &p) in raw.outcomes.iter().zip(&raw.probabilities) {
            if !p.is_finite() {
                return Err(MarketError::NonFiniteValue {
                    context: "probabilities",
                    value: p,
                });
            }
            if p <= 0.0 {
                return Err(MarketError::NonPositiveProbability {
                    outcome: label.clone(),
                    value: p,
                });
            }
        }
        let sum: f64 = raw.probabilities.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOL {
            return Err(MarketError::ProbabilityNotNormalized { sum });
        }
        let prob = renormalize(&raw.probabilities, sum);

        if !raw.baseline.s0.is_finite() || raw.baseline.s0 <= 0.0 {
            return Err(MarketError::NonPositiveBaseline {
                value: raw.baseline.s0,
            });
        }
        for &v in &raw.baseline.s_t {
            if !v.is_finite() || v <= 0.0 {
                return Err(MarketError::NonPositiveBaseline { value: v });
            }
        }
        let mut asset_names = Vec::with_capacity(raw.assets.len());
        let mut asset_s0 = Vec::with_capacity(raw.assets.len());
        let mut asset_st = Vec::with_capacity(raw.assets.len());
        for a in &raw.assets {
            if a.s_t.len() != n {
                return Err(MarketError::DimensionMismatch {
                    context: "asset.sT",
                    expected: n,
                    got: a.s_t.len(),
                });
            }
            if !a.s0.is_finite() {
                return Err(MarketError::NonFiniteValue {
                    context: "asset.s0",
                    value: a.s0,
                });
            }
            for &v in &a.s_t {
                if !v.is_finite() {
                    return Err(MarketError::NonFiniteValue {
                        context: "asset.sT",
                        value: v,
                    });
                }
            }
            asset_names.push(a.name.clone());
            asset_s0.push(a.s0);
            asset_st.push(a.s_t.clone());
        }
        Ok(DiscreteMarket {
            outcomes: raw.outcomes.clone(),
            prob,
            baseline_s0: raw.baseline.s0,
            baseline_st: raw.baseline.s_t.clone(),
            asset_names,
            asset_s0,
            asset_st,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, MarketFileError> {
        let raw: RawMarket = serde_json::from_str(s)?;
        Ok(Self::validate(&raw)?)
    }

    pub fn to_raw(&self) -> RawMarket {
        RawMarket {
            outcomes: self.outcomes.clone(),
            probabilities: self.prob.clone(),
            baseline: RawBaseline {
                s0: self.baseline_s0,
                s_t: self.baseline_st.clone(),
            },
            assets: (0..self.n_assets())
                .map(|i| RawAsset {
                    name: self.asset_names[i].clone(),
                    s0: self.asset_s0[i],
                    s_t: self.asset_st[i].clone(),
                })
                .collect(),
        }
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_s0.len()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn prob(&self) -> &[f64] {
        &self.prob
    }

    pub fn baseline_s0(&self) -> f64 {
        self.baseline_s0
    }

    pub fn baseline_st(&self) -> &[f64] {
        &self.baseline_st
    }

    pub fn asset_names(&self) -> &[String] {
        &self.asset_names
    }

    pub fn asset_s0(&self) -> &[f64] {
        &self.asset_s0
    }

    pub fn asset_st(&self, i: usize) -> &[f64] {
        &self.asset_st[i]
    }

    /// Baseline growth factor S0_T(w) / S0_0 per outcome.
    pub fn growth(&self, outcome: usize) -> f64 {
        self.baseline_st[outcome] / self.baseline_s0
    }

    /// Excess payoff of asset i in outcome w:
    /// S^i_T(w) - (S0_T(w)/S0_0) * S^i_0.
    pub fn excess_payoff(&self, asset: usize, outcome: usize) -> f64 {
        self.asset_st[asset][outcome] - self.growth(outcome) * self.asset_s0[asset]
    }

    /// Expectation of a vector over outcomes under P.
    pub fn expect(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_outcomes());
        self.prob.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// New market with the claim appended as a traded asset at the given price.
    pub fn augment_with_claim(
        &self,
        claim: &ClaimPayoff,
        price: f64,
        name: &str,
    ) -> Result<DiscreteMarket, MarketError> {
        claim.check_alignment(self)?;
        if !price.is_finite() {
            return Err(MarketError::NonFiniteValue {
                context: "claim price",
                value: price,
            });
        }
        let mut out = self.clone();
        out.asset_names.push(name.to_string());
        out.asset_s0.push(price);
        out.asset_st.push(claim.payoff().to_vec());
        Ok(out)
    }
}

/// Renormalizes probabilities so they sum to 1 exactly, then nudges the last
/// entry until the left-to-right float sum is 1.0 bit-exactly. Already
/// normalized inputs (within 4 ulp) are left untouched so that re-validating
/// a serialized market is a bit-for-bit no-op.
fn renormalize(probs: &[f64], sum: f64) -> Vec<f64> {
    let mut out: Vec<f64> = probs.to_vec();
    if (sum - 1.0).abs() <= 4.0 * f64::EPSILON {
        return out;
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    let last = out.len() - 1;
    for _ in 0..8 {
        let s: f64 = out.iter().sum();
        if s == 1.0 {
            break;
        }
        out[last] += 1.0 - s;
    }
    out
}

/// Errors from reading a market or claim file.
#[derive(Debug, Error)]
pub enum MarketFileError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Deflator beta_T(w) = S0_0 / S0_T(w).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deflator {
    beta_t: Vec<f64>,
}

impl Deflator {
    pub fn beta_t(&self) -> &[f64] {
        &self.beta_t
    }
}

/// Computes the deflator of a validated market.
pub fn deflate(market: &DiscreteMarket) -> Deflator {
    let beta_t = market
        .baseline_st()
        .iter()
        .map(|&st| market.baseline_s0() / st)
        .collect();
    Deflator { beta_t }
}

/// Trading strategy: initial capital plus units held in each risky asset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strategy {
    pub x: f64,
    pub theta: Vec<f64>,
}

impl Strategy {
    pub fn new(x: f64, theta: Vec<f64>) -> Result<Self, MarketError> {
        if !x.is_finite() {
            return Err(MarketError::NonFiniteValue {
                context: "strategy capital",
                value: x,
            });
        }
        for &t in &theta {
            if !t.is_finite() {
                return Err(MarketError::NonFiniteValue {
                    context: "strategy theta",
                    value: t,
                });
            }
        }
        Ok(Strategy { x, theta })
    }
}

/// Terminal wealth X_T(w) = x S0_T(w)/S0_0 + sum_i theta_i (S^i_T - (S0_T/S0_0) S^i_0)(w).
pub fn terminal_wealth(market: &DiscreteMarket, strat: &Strategy) -> Result<Vec<f64>, MarketError> {
    if strat.theta.len() != market.n_assets() {
        return Err(MarketError::DimensionMismatch {
            context: "strategy theta",
            expected: market.n_assets(),
            got: strat.theta.len(),
        });
    }
    let n = market.n_outcomes();
    let mut wealth = vec![0.0; n];
    for w in 0..n {
        let mut acc = strat.x * market.growth(w);
        for (i, &th) in strat.theta.iter().enumerate() {
            acc += th * market.excess_payoff(i, w);
        }
        wealth[w] = acc;
    }
    Ok(wealth)
}

/// Claim payoff H_T aligned with the market's outcome order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimPayoff {
    name: String,
    h_t: Vec<f64>,
}

impl ClaimPayoff {
    pub fn new(name: &str, h_t: Vec<f64>) -> Result<Self, MarketError> {
        for &v in &h_t {
            if !v.is_finite() {
                return Err(MarketError::NonFiniteValue {
                    context: "claim payoff",
                    value: v,
                });
            }
        }
        Ok(ClaimPayoff {
            name: name.to_string(),
            h_t,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn payoff(&self) -> &[f64] {
        &self.h_t
    }

    pub fn check_alignment(&self, market: &DiscreteMarket) -> Result<(), MarketError> {
        if self.h_t.len() != market.n_outcomes() {
            return Err(MarketError::DimensionMismatch {
                context: "claim payoff",
                expected: market.n_outcomes(),
                got: self.h_t.len(),
            });
        }
        Ok(())
    }

    pub fn from_json_str(s: &str, market: &DiscreteMarket) -> Result<Self, MarketFileError> {
        let raw: RawClaim = serde_json::from_str(s)?;
        let claim = ClaimPayoff::new(&raw.name, raw.payoff)?;
        claim.check_alignment(market)?;
        Ok(claim)
    }

    pub fn to_raw(&self) -> RawClaim {
        RawClaim {
            name: self.name.clone(),
            payoff: self.h_t.clone(),
        }
    }
}

/// Claim file schema: `{ "name": ..., "payoff": [...] }`, payoff aligned with
/// the market's `outcomes`. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawClaim {
    pub name: String,
    pub payoff: Vec<f64>,
}
