//! Markets driven by Brownian motion: risk premia, discount factor
//! construction, Monte Carlo verification, and the two Bessel models where
//! the martingale property genuinely fails.
//!
//! Two model families are supported. Constant-coefficient markets have d
//! assets driven by m >= d Brownian motions through a volatility matrix of
//! full column rank; everything about them is computable in closed form
//! and the simulator exists to verify those forms. The Bessel models are
//! the opposite: exact simulations of processes that are local martingales
//! but not martingales, where naive pricing identities break by a
//! measurable amount.

pub mod rng;
pub mod simulate;
pub mod stats;

pub use simulate::{
    at_quartiles, bessel_counterexamples, orthogonal_martingale_paths, product_paths,
    reciprocal_paths, sdf_compose, sdf_star_paths, simulate, wealth_paths, BesselReport,
    PathEnsemble, PathSeries, PriceGapReport, StrictLocalMartingaleReport, BESSEL_STEPS,
};
pub use stats::{
    martingale_test, mean_se, pairwise_sum, CheckpointStat, MartingaleTestReport,
    MartingaleVerdict, StatsError, MIN_PATHS,
};

use crate::linalg::{self, Matrix};
use serde::Deserialize;
use thiserror::Error;

/// Relative floor on the smallest singular value of the volatility matrix.
const RANK_TOL: f64 = 1e-10;
/// Sup-norm tolerance for kernel membership and premium residuals.
const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum ItoError {
    #[error("cannot parse model: {0}")]
    Parse(String),
    #[error("volatility matrix is rank deficient (singular values {min_singular:.3e} .. {max_singular:.3e})")]
    SingularCovariation {
        min_singular: f64,
        max_singular: f64,
    },
    #[error("{d} assets need at least {d} Brownian drivers, got {m}")]
    TooManyAssets { d: usize, m: usize },
    #[error("{context}: expected {expected} entries, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid {what}: {value}")]
    InvalidParameter { what: &'static str, value: f64 },
    #[error("operation requires a constant-coefficient model")]
    WrongKind,
    #[error(
        "kappa is not orthogonal to the volatility columns: |sigma^T kappa|_inf = {residual:.3e}"
    )]
    KappaNotInKernel { residual: f64 },
    #[error("step count must be positive")]
    InvalidStepCount,
    #[error("path count must be positive")]
    InvalidPathCount,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("internal: {0}")]
    Internal(String),
}

/// Constant-coefficient market: d assets with appreciation rates b and
/// volatility loadings in the columns of sigma (m x d), a savings account
/// growing at rate r, horizon T.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmParameters {
    pub d: usize,
    pub m: usize,
    pub r: f64,
    pub b: Vec<f64>,
    /// m x d; column i is asset i's loading on the m Brownian coordinates.
    pub sigma: Matrix,
    pub s0: Vec<f64>,
    pub baseline_s0: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ItoModelSpec {
    ConstantCoefficients(GbmParameters),
    /// |B_t + (s0, 0, 0)| for a 3-dimensional Brownian motion B.
    Bessel3 {
        s0: f64,
        horizon: f64,
    },
    /// The reciprocal of the above.
    InverseBessel3 {
        s0: f64,
        horizon: f64,
    },
}

fn default_unit() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGbmModel {
    #[allow(dead_code)]
    kind: String,
    d: usize,
    m: usize,
    r: f64,
    b: Vec<f64>,
    /// Row-major m x d.
    sigma: Vec<f64>,
    s0: Vec<f64>,
    #[serde(default = "default_unit")]
    baseline_s0: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBesselModel {
    #[allow(dead_code)]
    kind: String,
    #[serde(default = "default_unit")]
    s0: f64,
    #[serde(rename = "T")]
    horizon: f64,
}

impl ItoModelSpec {
    pub fn from_json_str(s: &str) -> Result<Self, ItoError> {
        let value: serde_json::Value =
            serde_json::from_str(s).map_err(|e| ItoError::Parse(e.to_string()))?;
        let kind = value
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| ItoError::Parse("missing string field \"kind\"".to_string()))?
            .to_string();
        match kind.as_str() {
            "constant_coefficients" => {
                let raw: RawGbmModel = serde_json::from_value(value)
                    .map_err(|e| ItoError::Parse(e.to_string()))?;
                if raw.sigma.len() != raw.m * raw.d {
                    return Err(ItoError::DimensionMismatch {
                        context: "sigma (row-major m x d)",
                        expected: raw.m * raw.d,
                        got: raw.sigma.len(),
                    });
                }
                let rows: Vec<Vec<f64>> = raw
                    .sigma
                    .chunks(raw.d.max(1))
                    .map(|c| c.to_vec())
                    .collect();
                let sigma = if raw.d == 0 {
                    Matrix::zeros(raw.m, 0)
                } else {
                    Matrix::from_rows(&rows)
                };
                let model = ItoModelSpec::ConstantCoefficients(GbmParameters {
                    d: raw.d,
                    m: raw.m,
                    r: raw.r,
                    b: raw.b,
                    sigma,
                    s0: raw.s0,
                    baseline_s0: raw.baseline_s0,
                    horizon: raw.horizon,
                });
                model.validate()?;
                Ok(model)
            }
            "bessel3" | "inverse_bessel3" => {
                let raw: RawBesselModel = serde_json::from_value(value)
                    .map_err(|e| ItoError::Parse(e.to_string()))?;
                let model = if kind == "bessel3" {
                    ItoModelSpec::Bessel3 {
                        s0: raw.s0,
                        horizon: raw.horizon,
                    }
                } else {
                    ItoModelSpec::InverseBessel3 {
                        s0: raw.s0,
                        horizon: raw.horizon,
                    }
                };
                model.validate()?;
                Ok(model)
            }
            other => Err(ItoError::Parse(format!(
                "unknown kind {other:?}; expected constant_coefficients, bessel3, or inverse_bessel3"
            ))),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self {
            ItoModelSpec::ConstantCoefficients(p) => p.horizon,
            ItoModelSpec::Bessel3 { horizon, .. } => *horizon,
            ItoModelSpec::InverseBessel3 { horizon, .. } => *horizon,
        }
    }

    pub fn validate(&self) -> Result<(), ItoError> {
        let horizon = self.horizon();
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(ItoError::InvalidParameter {
                what: "horizon T",
                value: horizon,
            });
        }
        match self {
            ItoModelSpec::ConstantCoefficients(p) => p.validate(),
            ItoModelSpec::Bessel3 { s0, .. } | ItoModelSpec::InverseBessel3 { s0, .. } => {
                if !(*s0 > 0.0) || !s0.is_finite() {
                    return Err(ItoError::InvalidParameter {
                        what: "initial value s0",
                        value: *s0,
                    });
                }
                Ok(())
            }
        }
    }

    pub(crate) fn constant_coefficients(&self) -> Result<&GbmParameters, ItoError> {
        match self {
            ItoModelSpec::ConstantCoefficients(p) => Ok(p),
            _ => Err(ItoError::WrongKind),
        }
    }
}

impl GbmParameters {
    fn validate(&self) -> Result<(), ItoError> {
        if self.d > self.m {
            return Err(ItoError::TooManyAssets {
                d: self.d,
                m: self.m,
            });
        }
        if self.b.len() != self.d {
            return Err(ItoError::DimensionMismatch {
                context: "appreciation rates b",
                expected: self.d,
                got: self.b.len(),
            });
        }
        if self.s0.len() != self.d {
            return Err(ItoError::DimensionMismatch {
                context: "initial prices s0",
                expected: self.d,
                got: self.s0.len(),
            });
        }
        if self.sigma.rows() != self.m || self.sigma.cols() != self.d {
            return Err(ItoError::DimensionMismatch {
                context: "sigma",
                expected: self.m * self.d,
                got: self.sigma.rows() * self.sigma.cols(),
            });
        }
        if !(self.r >= 0.0) || !self.r.is_finite() {
            return Err(ItoError::InvalidParameter {
                what: "short rate r",
                value: self.r,
            });
        }
        if !(self.baseline_s0 > 0.0) || !self.baseline_s0.is_finite() {
            return Err(ItoError::InvalidParameter {
                what: "baseline_s0",
                value: self.baseline_s0,
            });
        }
        for &v in &self.b {
            if !v.is_finite() {
                return Err(ItoError::InvalidParameter {
                    what: "appreciation rate",
                    value: v,
                });
            }
        }
        for &v in &self.s0 {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ItoError::InvalidParameter {
                    what: "initial price",
                    value: v,
                });
            }
        }
        // Full column rank: smallest singular value of sigma within
        // RANK_TOL of the largest, via the eigenvalues of c = sigma^T sigma.
        if self.d > 0 {
            let c = self.covariation();
            let eig = linalg::sym_eigenvalues(&c);
            let min_singular = eig
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
                .sqrt();
            let max_singular = eig.iter().cloned().fold(0.0f64, f64::max).sqrt();
            if min_singular <= RANK_TOL * max_singular || max_singular == 0.0 {
                return Err(ItoError::SingularCovariation {
                    min_singular,
                    max_singular,
                });
            }
        }
        Ok(())
    }

    /// c = sigma^T sigma, the d x d instantaneous covariation of returns.
    pub fn covariation(&self) -> Matrix {
        self.sigma.gram()
    }

    /// Excess appreciation over the short rate, b - r 1.
    pub fn excess_rates(&self) -> Vec<f64> {
        self.b.iter().map(|bi| bi - self.r).collect()
    }

    /// Volatility loading of asset i: column i of sigma.
    pub fn vol_column(&self, i: usize) -> Vec<f64> {
        (0..self.m).map(|j| self.sigma.get(j, i)).collect()
    }
}

/// Minimal-norm market price of risk and the directions it cannot see.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskPremium {
    /// lambda* = sigma c^{-1} (b - r 1), the unique premium in the range
    /// of sigma.
    pub lambda_star: Vec<f64>,
    /// Orthonormal basis of ker(sigma^T), the premia invisible to pricing.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Optional kernel direction chosen to tilt the discount factor.
    pub kappa: Option<Vec<f64>>,
}

impl RiskPremium {
    /// Attaches a kernel direction after verifying sigma^T kappa = 0.
    pub fn with_kappa(mut self, model: &ItoModelSpec, kappa: Vec<f64>) -> Result<Self, ItoError> {
        let p = model.constant_coefficients()?;
        if kappa.len() != p.m {
            return Err(ItoError::DimensionMismatch {
                context: "kappa",
                expected: p.m,
                got: kappa.len(),
            });
        }
        let projected = p.sigma.mul_vec_t(&kappa);
        let residual = linalg::sup_norm(&projected);
        let scale = 1.0 + linalg::sup_norm(&kappa);
        if residual > KERNEL_TOL * scale {
            return Err(ItoError::KappaNotInKernel { residual });
        }
        self.kappa = Some(kappa);
        Ok(self)
    }

    pub fn kappa_or_zero(&self, m: usize) -> Vec<f64> {
        self.kappa.clone().unwrap_or_else(|| vec![0.0; m])
    }
}

/// Growth-optimal portfolio proportions pi* = c^{-1}(b - r 1).
pub fn pi_star(model: &ItoModelSpec) -> Result<Vec<f64>, ItoError> {
    let p = model.constant_coefficients()?;
    if p.d == 0 {
        return Ok(Vec::new());
    }
    let c = p.covariation();
    linalg::solve(&c, &p.excess_rates())
        .ok_or_else(|| ItoError::Internal("covariation solve failed after rank check".to_string()))
}

/// Per-unit-time drift of log wealth for constant proportions pi:
/// r + <pi, b - r 1> - <pi, c pi>/2.
pub fn log_wealth_drift(model: &ItoModelSpec, pi: &[f64]) -> Result<f64, ItoError> {
    let p = model.constant_coefficients()?;
    if pi.len() != p.d {
        return Err(ItoError::DimensionMismatch {
            context: "portfolio pi",
            expected: p.d,
            got: pi.len(),
        });
    }
    let excess = p.excess_rates();
    let c_pi = p.covariation().mul_vec(pi);
    Ok(p.r + linalg::dot(pi, &excess) - 0.5 * linalg::dot(pi, &c_pi))
}

/// The premium lambda* in the range of sigma, solved through the
/// covariation (never an explicit inverse), plus an orthonormal basis of
/// its blind spot ker(sigma^T).
pub fn risk_premium_star(model: &ItoModelSpec) -> Result<RiskPremium, ItoError> {
    let p = model.constant_coefficients()?;
    let pi = pi_star(model)?;
    let lambda_star = p.sigma.mul_vec(&pi);

    // |lambda*|^2 must equal <b - r1, c^{-1}(b - r1)>; both sides are
    // computed, so a mismatch means the solve went numerically wrong.
    let excess = p.excess_rates();
    let norm_sq: f64 = lambda_star.iter().map(|v| v * v).sum();
    let quad = linalg::dot(&excess, &pi);
    let scale = norm_sq.abs().max(1.0);
    if (norm_sq - quad).abs() > 1e-9 * scale {
        return Err(ItoError::Internal(format!(
            "premium norm cross-check failed: {norm_sq} vs {quad}"
        )));
    }
    let residual = {
        let back = p.sigma.mul_vec_t(&lambda_star);
        let diff: Vec<f64> = back.iter().zip(&excess).map(|(a, b)| a - b).collect();
        linalg::sup_norm(&diff)
    };
    if residual > KERNEL_TOL * (1.0 + linalg::sup_norm(&excess)) {
        return Err(ItoError::Internal(format!(
            "premium does not reproduce the excess rates (residual {residual:.3e})"
        )));
    }

    let columns: Vec<Vec<f64>> = (0..p.d).map(|i| p.vol_column(i)).collect();
    let kernel_basis = linalg::orthogonal_complement(&columns, p.m);
    Ok(RiskPremium {
        lambda_star,
        kernel_basis,
        kappa: None,
    })
}

/// Drift of a non-traded diffusion with volatility loading f under the
/// pricing measure tilted by kappa.
#[derive(Debug, Clone, PartialEq)]
pub struct NontradedDrift {
    /// a - <f, lambda*> - <f, kappa>.
    pub drift: f64,
    /// True when f is orthogonal to the whole kernel, i.e. the exposure is
    /// spanned by traded assets and every tilt prices it identically.
    pub kappa_invariant: bool,
}

pub fn nontraded_drift(
    model: &ItoModelSpec,
    premium: &RiskPremium,
    a: f64,
    f: &[f64],
) -> Result<NontradedDrift, ItoError> {
    let p = model.constant_coefficients()?;
    if f.len() != p.m {
        return Err(ItoError::DimensionMismatch {
            context: "volatility loading f",
            expected: p.m,
            got: f.len(),
        });
    }
    let kappa = premium.kappa_or_zero(p.m);
    let drift = a - linalg::dot(f, &premium.lambda_star) - linalg::dot(f, &kappa);
    let f_scale = linalg::sup_norm(f).max(1.0);
    let kappa_invariant = premium
        .kernel_basis
        .iter()
        .all(|basis| linalg::dot(f, basis).abs() <= KERNEL_TOL * f_scale);
    Ok(NontradedDrift {
        drift,
        kappa_invariant,
    })
}
