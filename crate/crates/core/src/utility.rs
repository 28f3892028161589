//! Expected-utility maximization over one-period strategies and the
//! discount factor it induces.
//!
//! At an interior optimum the first-order conditions say the marginal
//! utility of terminal wealth, normalized by its baseline-weighted mean,
//! prices every traded asset. The optimizer therefore hands back that
//! vector as a checked `SdfVector`: if the candidate cannot pass the strict
//! pricing check, the run reports failure instead of returning something
//! unverified.

use crate::ftap::{find_arbitrage, FtapError, SdfVector};
use crate::linalg::{self, Matrix};
use crate::market::DiscreteMarket;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

const GRAD_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 200;
/// Extra gradient-shrinking Newton steps taken after the tolerance is met.
const POLISH_STEPS: usize = 20;
/// Line searches keep min wealth at or above this fraction of the initial
/// capital when the utility needs positive wealth.
const WEALTH_FLOOR_FRAC: f64 = 1e-12;
const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
/// Doubling steps an improving in-domain ray must survive before the run
/// is declared unbounded.
const PROBE_DOUBLINGS: usize = 60;
/// Objective changes smaller than this (relative) count as "still
/// improving" in the unboundedness probe; exponential utility flattens to
/// numerically exact plateaus along its unbounded rays.
const IMPROVE_EPS: f64 = 1e-15;
/// Caps the condition number of the damped Newton system: the ridge added
/// to -H is its largest entry divided by this (plus a tiny absolute floor
/// so the LU pivot threshold can never reject the damped matrix). Large
/// enough to keep near-redundant assets solvable, small enough that well
/// conditioned steps still contract superlinearly.
const HESSIAN_COND_LIMIT: f64 = 1e8;
const HESSIAN_RIDGE_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, PartialEq)]
pub enum UtilityError {
    #[error("gamma must be positive and different from 1, got {0}")]
    InvalidGamma(f64),
    #[error("alpha must be strictly positive, got {0}")]
    InvalidAlpha(f64),
    #[error("utility failed the increase/concavity check on the test grid")]
    ShapeCheck,
    #[error("cannot parse utility {input:?}: {reason}")]
    Parse { input: String, reason: String },
    #[error("initial capital {0} is invalid for this utility")]
    InvalidCapital(f64),
    #[error("wealth {wealth} at outcome {outcome} is outside the utility domain")]
    DomainViolation { outcome: usize, wealth: f64 },
    #[error("expected {expected} positions, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the market admits arbitrage; expected utility has no maximum")]
    ArbitrageDetected,
    #[error("optimizer did not converge: {0}")]
    DidNotConverge(String),
    #[error("solution does not use logarithmic utility")]
    NotLogUtility,
}

/// Strictly increasing, strictly concave utility on its natural domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UtilitySpec {
    /// U(x) = ln x on x > 0.
    Log,
    /// U(x) = x^(1-gamma) / (1-gamma) on x > 0, gamma in (0,1) or (1,inf).
    Power { gamma: f64 },
    /// U(x) = -exp(-alpha x) on all of R, alpha > 0.
    Exp { alpha: f64 },
}

impl UtilitySpec {
    pub fn log() -> Self {
        UtilitySpec::Log
    }

    pub fn power(gamma: f64) -> Result<Self, UtilityError> {
        if !gamma.is_finite() || gamma <= 0.0 || gamma == 1.0 {
            return Err(UtilityError::InvalidGamma(gamma));
        }
        let u = UtilitySpec::Power { gamma };
        u.shape_check()?;
        Ok(u)
    }

    pub fn exponential(alpha: f64) -> Result<Self, UtilityError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(UtilityError::InvalidAlpha(alpha));
        }
        let u = UtilitySpec::Exp { alpha };
        u.shape_check()?;
        Ok(u)
    }

    /// Spot check that the implemented derivatives really describe an
    /// increasing concave function.
    fn shape_check(&self) -> Result<(), UtilityError> {
        for &x in &[0.25, 0.5, 1.0, 2.0, 4.0] {
            let du = self.marginal(x).ok_or(UtilityError::ShapeCheck)?;
            let d2u = self.curvature(x).ok_or(UtilityError::ShapeCheck)?;
            if !(du > 0.0) || !(d2u < 0.0) {
                return Err(UtilityError::ShapeCheck);
            }
        }
        Ok(())
    }

    pub fn requires_positive_wealth(&self) -> bool {
        !matches!(self, UtilitySpec::Exp { .. })
    }

    /// U(x), or `None` outside the domain.
    pub fn value(&self, x: f64) -> Option<f64> {
        match *self {
            UtilitySpec::Log => (x > 0.0).then(|| x.ln()),
            UtilitySpec::Power { gamma } => (x > 0.0).then(|| x.powf(1.0 - gamma) / (1.0 - gamma)),
            UtilitySpec::Exp { alpha } => Some(-(-alpha * x).exp()),
        }
    }

    /// U'(x), or `None` outside the domain.
    pub fn marginal(&self, x: f64) -> Option<f64> {
        match *self {
            UtilitySpec::Log => (x > 0.0).then(|| 1.0 / x),
            UtilitySpec::Power { gamma } => (x > 0.0).then(|| x.powf(-gamma)),
            UtilitySpec::Exp { alpha } => Some(alpha * (-alpha * x).exp()),
        }
    }

    /// U''(x), or `None` outside the domain.
    pub fn curvature(&self, x: f64) -> Option<f64> {
        match *self {
            UtilitySpec::Log => (x > 0.0).then(|| -1.0 / (x * x)),
            UtilitySpec::Power { gamma } => (x > 0.0).then(|| -gamma * x.powf(-gamma - 1.0)),
            UtilitySpec::Exp { alpha } => Some(-alpha * alpha * (-alpha * x).exp()),
        }
    }
}

impl fmt::Display for UtilitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UtilitySpec::Log => write!(f, "log"),
            UtilitySpec::Power { gamma } => write!(f, "power:gamma={gamma}"),
            UtilitySpec::Exp { alpha } => write!(f, "exp:alpha={alpha}"),
        }
    }
}

impl FromStr for UtilitySpec {
    type Err = UtilityError;

    /// Accepts `log`, `power:gamma=G`, and `exp:alpha=A`.
    fn from_str(s: &str) -> Result<Self, UtilityError> {
        let parse_param = |spec: &str, key: &str| -> Result<f64, UtilityError> {
            let err = |reason: &str| UtilityError::Parse {
                input: s.to_string(),
                reason: reason.to_string(),
            };
            let (k, v) = spec
                .split_once('=')
                .ok_or_else(|| err(&format!("expected {key}=<number>")))?;
            if k != key {
                return Err(err(&format!("unknown parameter {k:?}, expected {key:?}")));
            }
            v.parse::<f64>()
                .map_err(|_| err(&format!("cannot parse {v:?} as a number")))
        };
        match s.split_once(':') {
            None if s == "log" => Ok(UtilitySpec::Log),
            Some(("power", rest)) => UtilitySpec::power(parse_param(rest, "gamma")?),
            Some(("exp", rest)) => UtilitySpec::exponential(parse_param(rest, "alpha")?),
            _ => Err(UtilityError::Parse {
                input: s.to_string(),
                reason: "expected log, power:gamma=<g>, or exp:alpha=<a>".to_string(),
            }),
        }
    }
}

/// Expected utility and its gradient in the positions theta.
#[derive(Debug, Clone)]
pub struct ExpectedUtility {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub wealth: Vec<f64>,
}

/// Evaluates E[U(X_T)] and d/dtheta_i E[U(X_T)] = E[U'(X_T) (S^i_T - growth S^i_0)].
pub fn expected_utility(
    market: &DiscreteMarket,
    utility: &UtilitySpec,
    x: f64,
    theta: &[f64],
) -> Result<ExpectedUtility, UtilityError> {
    if theta.len() != market.n_assets() {
        return Err(UtilityError::DimensionMismatch {
            expected: market.n_assets(),
            got: theta.len(),
        });
    }
    let ctx = EvalContext::new(market, *utility, x);
    let wealth = ctx.wealth(theta);
    ctx.value_grad(&wealth)
        .map(|(value, gradient)| ExpectedUtility {
            value,
            gradient,
            wealth,
        })
}

/// Interior maximizer of expected utility together with the discount factor
/// its first-order conditions induce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimalSolution {
    pub utility: UtilitySpec,
    pub x: f64,
    pub theta: Vec<f64>,
    pub wealth: Vec<f64>,
    pub objective: f64,
    /// U'(X*) / E[growth U'(X*)], verified to price the market.
    pub sdf: SdfVector,
    pub iterations: usize,
    pub gradient_sup: f64,
}

/// Maximizes expected utility after confirming by linear program that the
/// market is arbitrage-free (a market with an arbitrage has no maximizer).
pub fn optimize(
    market: &DiscreteMarket,
    utility: &UtilitySpec,
    x: f64,
) -> Result<OptimalSolution, UtilityError> {
    match find_arbitrage(market) {
        Ok(None) => {}
        Ok(Some(_)) => return Err(UtilityError::ArbitrageDetected),
        Err(FtapError::Lp(e)) => {
            return Err(UtilityError::DidNotConverge(format!(
                "arbitrage precheck failed: {e}"
            )))
        }
        Err(e) => {
            return Err(UtilityError::DidNotConverge(format!(
                "arbitrage precheck failed: {e}"
            )))
        }
    }
    optimize_unchecked(market, utility, x)
}

/// Maximizes expected utility without the arbitrage precheck, relying on
/// the unboundedness probe to notice runs along arbitrage rays. `optimize`
/// is the safer entry point; this one exists so the probe itself can be
/// exercised and trusted.
pub fn optimize_unchecked(
    market: &DiscreteMarket,
    utility: &UtilitySpec,
    x: f64,
) -> Result<OptimalSolution, UtilityError> {
    optimize_from(market, utility, x, &vec![0.0; market.n_assets()])
}

/// Same as `optimize_unchecked` but starting from the given positions.
pub fn optimize_from(
    market: &DiscreteMarket,
    utility: &UtilitySpec,
    x: f64,
    theta0: &[f64],
) -> Result<OptimalSolution, UtilityError> {
    if theta0.len() != market.n_assets() {
        return Err(UtilityError::DimensionMismatch {
            expected: market.n_assets(),
            got: theta0.len(),
        });
    }
    if !x.is_finite() || (utility.requires_positive_wealth() && x <= 0.0) {
        return Err(UtilityError::InvalidCapital(x));
    }

    let ctx = EvalContext::new(market, *utility, x);
    let mut theta = theta0.to_vec();
    let mut wealth = ctx.wealth(&theta);
    let (mut value, mut grad) = ctx.value_grad(&wealth)?;

    for iter in 0..MAX_ITERATIONS {
        let gsup = linalg::sup_norm(&grad);
        if gsup <= GRAD_TOL * value.abs().max(1.0) {
            // First order identities inherit residuals of order
            // |theta| * gsup, so the tolerance alone leaves positions far
            // from the origin with visibly imperfect optima. A few more
            // damped Newton steps reach the evaluation noise floor; stop
            // as soon as the gradient no longer strictly shrinks.
            for _ in 0..POLISH_STEPS {
                let dir = ctx.newton_direction(&wealth, &grad);
                if linalg::dot(&dir, &grad) <= 0.0 {
                    break;
                }
                let mut t2 = theta.clone();
                let mut w2 = wealth.clone();
                let mut v2 = value;
                let mut g2 = grad.clone();
                if !matches!(
                    ctx.step(&mut t2, &mut w2, &mut v2, &mut g2, &dir)?,
                    StepOutcome::Moved
                ) {
                    break;
                }
                if linalg::sup_norm(&g2) >= linalg::sup_norm(&grad) {
                    break;
                }
                theta = t2;
                wealth = w2;
                value = v2;
                grad = g2;
            }
            if let Ok(sdf) = ctx.foc_sdf(&wealth) {
                let gsup = linalg::sup_norm(&grad);
                return Ok(OptimalSolution {
                    utility: *utility,
                    x,
                    theta,
                    wealth,
                    objective: value,
                    sdf,
                    iterations: iter,
                    gradient_sup: gsup,
                });
            }
            // Gradient is small but not small enough for the pricing check;
            // keep polishing, the steps below contract quadratically.
        }

        let mut direction = ctx.newton_direction(&wealth, &grad);
        if linalg::dot(&direction, &grad) <= 0.0 {
            direction = grad.clone();
        }
        match ctx.step(&mut theta, &mut wealth, &mut value, &mut grad, &direction)? {
            StepOutcome::Moved => continue,
            StepOutcome::Stalled => {
                // Newton made no progress; try plain gradient ascent once
                // before giving up.
                let fallback = grad.clone();
                match ctx.step(&mut theta, &mut wealth, &mut value, &mut grad, &fallback)? {
                    StepOutcome::Moved => continue,
                    StepOutcome::Stalled => {
                        return if let Ok(sdf) = ctx.foc_sdf(&wealth) {
                            Ok(OptimalSolution {
                                utility: *utility,
                                x,
                                theta,
                                wealth,
                                objective: value,
                                sdf,
                                iterations: iter,
                                gradient_sup: linalg::sup_norm(&grad),
                            })
                        } else {
                            Err(UtilityError::DidNotConverge(format!(
                                "stalled with gradient sup-norm {:.3e}",
                                linalg::sup_norm(&grad)
                            )))
                        };
                    }
                }
            }
        }
    }
    Err(UtilityError::DidNotConverge(format!(
        "gradient sup-norm {:.3e} after {MAX_ITERATIONS} iterations",
        linalg::sup_norm(&grad)
    )))
}

enum StepOutcome {
    Moved,
    Stalled,
}

/// Cached market quantities and the utility being optimized.
struct EvalContext<'m> {
    market: &'m DiscreteMarket,
    utility: UtilitySpec,
    /// excess[i][w] = S^i_T(w) - growth(w) S^i_0.
    excess: Vec<Vec<f64>>,
    /// base[w] = x * growth(w): wealth of the all-baseline position.
    base: Vec<f64>,
    wealth_floor: f64,
}

impl<'m> EvalContext<'m> {
    fn new(market: &'m DiscreteMarket, utility: UtilitySpec, x: f64) -> Self {
        let n = market.n_outcomes();
        let d = market.n_assets();
        let excess = (0..d)
            .map(|i| (0..n).map(|w| market.excess_payoff(i, w)).collect())
            .collect();
        let base = (0..n).map(|w| x * market.growth(w)).collect();
        let wealth_floor = if utility.requires_positive_wealth() {
            WEALTH_FLOOR_FRAC * x
        } else {
            f64::NEG_INFINITY
        };
        EvalContext {
            market,
            utility,
            excess,
            base,
            wealth_floor,
        }
    }

    fn n(&self) -> usize {
        self.base.len()
    }

    fn d(&self) -> usize {
        self.excess.len()
    }

    fn wealth(&self, theta: &[f64]) -> Vec<f64> {
        let mut w = self.base.clone();
        for (i, &th) in theta.iter().enumerate() {
            if th != 0.0 {
                for (ww, &e) in w.iter_mut().zip(&self.excess[i]) {
                    *ww += th * e;
                }
            }
        }
        w
    }

    fn value_grad(&self, wealth: &[f64]) -> Result<(f64, Vec<f64>), UtilityError> {
        let p = self.market.prob();
        let mut value = 0.0;
        let mut marg = vec![0.0; self.n()];
        for w in 0..self.n() {
            let u = self
                .utility
                .value(wealth[w])
                .ok_or(UtilityError::DomainViolation {
                    outcome: w,
                    wealth: wealth[w],
                })?;
            value += p[w] * u;
            marg[w] = self.utility.marginal(wealth[w]).unwrap();
        }
        let grad = (0..self.d())
            .map(|i| {
                (0..self.n())
                    .map(|w| p[w] * marg[w] * self.excess[i][w])
                    .sum()
            })
            .collect();
        Ok((value, grad))
    }

    fn value_only(&self, wealth: &[f64]) -> Option<f64> {
        let p = self.market.prob();
        let mut value = 0.0;
        for w in 0..self.n() {
            value += p[w] * self.utility.value(wealth[w])?;
        }
        Some(value)
    }

    /// Damped Newton ascent direction from the exact Hessian
    /// H_ij = E[U''(X) excess_i excess_j]. Concavity makes H negative
    /// semidefinite, so (-H + mu I) d = g with a small relative ridge mu is
    /// always solvable and always yields an ascent direction, even when
    /// near-redundant assets make H singular. Plain gradient ascent is the
    /// fallback only when the curvature or the solve is unavailable.
    fn newton_direction(&self, wealth: &[f64], grad: &[f64]) -> Vec<f64> {
        let d = self.d();
        if d == 0 {
            return Vec::new();
        }
        let p = self.market.prob();
        let mut h = Matrix::zeros(d, d);
        for w in 0..self.n() {
            let c = match self.utility.curvature(wealth[w]) {
                Some(c) => p[w] * c,
                None => return grad.to_vec(),
            };
            for i in 0..d {
                let ei = self.excess[i][w];
                if ei == 0.0 {
                    continue;
                }
                for j in i..d {
                    let v = h.get(i, j) + c * ei * self.excess[j][w];
                    h.set(i, j, v);
                    h.set(j, i, v);
                }
            }
        }
        let max_abs = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .fold(0.0f64, |a, (i, j)| a.max(h.get(i, j).abs()));
        if !(max_abs > 0.0) {
            return grad.to_vec();
        }
        let mu = max_abs / HESSIAN_COND_LIMIT + HESSIAN_RIDGE_FLOOR;
        let mut damped = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let ridge = if i == j { mu } else { 0.0 };
                damped.set(i, j, ridge - h.get(i, j));
            }
        }
        match linalg::solve(&damped, grad) {
            Some(step) => step,
            None => grad.to_vec(),
        }
    }

    /// One damped step along `direction`. Detects unbounded improving rays
    /// and reports them as arbitrage.
    fn step(
        &self,
        theta: &mut Vec<f64>,
        wealth: &mut Vec<f64>,
        value: &mut f64,
        grad: &mut Vec<f64>,
        direction: &[f64],
    ) -> Result<StepOutcome, UtilityError> {
        let slope: Vec<f64> = (0..self.n())
            .map(|w| {
                direction
                    .iter()
                    .zip(&self.excess)
                    .map(|(&d, col)| d * col[w])
                    .sum()
            })
            .collect();
        let gd = linalg::dot(grad, direction);
        if gd <= 0.0 {
            return Ok(StepOutcome::Stalled);
        }

        // A direction whose wealth never decreases anywhere can only be
        // capped by the objective itself; probe it before stepping.
        let slope_scale = linalg::sup_norm(&slope);
        let one_sided = slope.iter().all(|&s| s >= -1e-12 * slope_scale.max(1.0));
        if one_sided && slope_scale > 0.0 {
            self.probe_ray(wealth, *value, &slope)?;
        }

        // Largest step keeping wealth above the domain floor.
        let mut t_max = f64::INFINITY;
        if self.utility.requires_positive_wealth() {
            for w in 0..self.n() {
                if slope[w] < 0.0 {
                    t_max = t_max.min((wealth[w] - self.wealth_floor) / -slope[w]);
                }
            }
            t_max = t_max.max(0.0);
        }

        // Near the optimum the predicted gain ARMIJO_C * t * gd drops below
        // the float resolution of the objective; the sufficient-increase
        // test then rejects genuine Newton steps on evaluation noise alone.
        // Accepting within that noise keeps the iterate moving, and a step
        // too small to change theta bitwise is reported as a stall.
        let noise = 4.0 * f64::EPSILON * (1.0 + value.abs());
        let mut t = t_max.min(1.0);
        for _ in 0..MAX_HALVINGS {
            if t <= 0.0 {
                break;
            }
            let trial: Vec<f64> = wealth
                .iter()
                .zip(&slope)
                .map(|(x0, s)| x0 + t * s)
                .collect();
            if let Some(v) = self.value_only(&trial) {
                if v + noise >= *value + ARMIJO_C * t * gd {
                    let before = theta.clone();
                    for (th, &d) in theta.iter_mut().zip(direction) {
                        *th += t * d;
                    }
                    if *theta == before {
                        return Ok(StepOutcome::Stalled);
                    }
                    *wealth = self.wealth(theta);
                    let (v2, g2) = self.value_grad(wealth)?;
                    *value = v2;
                    *grad = g2;
                    return Ok(StepOutcome::Moved);
                }
            }
            t *= 0.5;
        }
        Ok(StepOutcome::Stalled)
    }

    /// Doubles the step along an everywhere-nonnegative wealth slope up to
    /// 2^PROBE_DOUBLINGS. An objective that never stops improving certifies
    /// that expected utility is unbounded, i.e. the slope is the payoff of
    /// an arbitrage.
    fn probe_ray(&self, wealth: &[f64], value: f64, slope: &[f64]) -> Result<(), UtilityError> {
        let mut t = 1.0;
        let mut prev = value;
        for _ in 0..PROBE_DOUBLINGS {
            let trial: Vec<f64> = wealth.iter().zip(slope).map(|(x0, s)| x0 + t * s).collect();
            let Some(v) = self.value_only(&trial) else {
                return Ok(());
            };
            if v < prev - IMPROVE_EPS * (1.0 + prev.abs()) {
                return Ok(());
            }
            prev = v;
            t *= 2.0;
        }
        Err(UtilityError::ArbitrageDetected)
    }

    /// Discount factor induced by the first-order conditions:
    /// Y = U'(X) / E[growth U'(X)].
    fn foc_sdf(&self, wealth: &[f64]) -> Result<SdfVector, UtilityError> {
        let p = self.market.prob();
        let mut marg = vec![0.0; self.n()];
        for w in 0..self.n() {
            marg[w] = self
                .utility
                .marginal(wealth[w])
                .ok_or(UtilityError::DomainViolation {
                    outcome: w,
                    wealth: wealth[w],
                })?;
        }
        let denom: f64 = (0..self.n())
            .map(|w| p[w] * self.market.growth(w) * marg[w])
            .sum();
        let y: Vec<f64> = marg.iter().map(|m| m / denom).collect();
        SdfVector::new(self.market, y).map_err(|e| {
            UtilityError::DidNotConverge(format!("first-order discount factor rejected: {e}"))
        })
    }
}

/// Budget identity check: under the solution's discount factor, every
/// strategy with the same initial capital has E[Y X_T] = x. Tries `trials`
/// random positions drawn from `seed` and reports whether all of them hold
/// within tolerance.
pub fn verify_sdf_martingale(
    market: &DiscreteMarket,
    solution: &OptimalSolution,
    trials: u32,
    seed: u64,
) -> bool {
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let mut uniform = move || {
        // 53-bit uniform in (0,1), then mapped to [-2, 2).
        let u = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        4.0 * u - 2.0
    };
    let ctx = EvalContext::new(market, solution.utility, solution.x);
    let y = solution.sdf.values();
    for _ in 0..trials {
        let theta: Vec<f64> = (0..market.n_assets()).map(|_| uniform()).collect();
        let wealth = ctx.wealth(&theta);
        let priced: f64 = market
            .prob()
            .iter()
            .zip(y.iter().zip(&wealth))
            .map(|(p, (yv, xv))| p * yv * xv)
            .sum();
        let scale: f64 = theta
            .iter()
            .enumerate()
            .map(|(i, th)| th.abs() * market.asset_s0()[i].abs().max(1.0))
            .sum::<f64>()
            + solution.x.abs().max(1.0);
        if (priced - solution.x).abs() > 1e-8 * scale {
            return false;
        }
    }
    true
}

/// For logarithmic utility the optimal wealth and its discount factor are
/// exact reciprocals up to the capital: Y X* = x outcome by outcome, and
/// E[growth / X*] = 1/x. Returns the worst relative deviation of the two
/// identities.
pub fn log_optimal_identity(
    market: &DiscreteMarket,
    solution: &OptimalSolution,
) -> Result<f64, UtilityError> {
    if !matches!(solution.utility, UtilitySpec::Log) {
        return Err(UtilityError::NotLogUtility);
    }
    let x = solution.x;
    let mut worst = 0.0f64;
    for w in 0..market.n_outcomes() {
        let dev = (solution.sdf.values()[w] * solution.wealth[w] - x).abs() / x.abs().max(1.0);
        worst = worst.max(dev);
    }
    let mean_growth_over_wealth: f64 = (0..market.n_outcomes())
        .map(|w| market.prob()[w] * market.growth(w) / solution.wealth[w])
        .sum();
    worst = worst.max((mean_growth_over_wealth * x - 1.0).abs());
    Ok(worst)
}
