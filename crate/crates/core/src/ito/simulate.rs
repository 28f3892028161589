//! Monte Carlo engine: exact-in-law path generation, derived processes
//! (wealth, discount factors, orthogonal tilts), and the two Bessel
//! demonstrations of discount factors that are not martingales.

use super::rng::{path_rng, standard_normal};
use super::stats::{martingale_test, mean_se, MartingaleTestReport};
use super::{log_wealth_drift, GbmParameters, ItoError, ItoModelSpec, RiskPremium};
use crate::linalg;
use rayon::prelude::*;
use serde::Serialize;

/// Step count used by the fixed Bessel demonstrations. The Bessel paths
/// are exact in law at every grid time, so steps only set checkpoint
/// resolution, not accuracy.
pub const BESSEL_STEPS: usize = 16;

/// A simulated ensemble: Brownian increments, asset paths, and the
/// deterministic deflator on a uniform grid over [0, T].
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    model: ItoModelSpec,
    times: Vec<f64>,
    n_paths: usize,
    n_steps: usize,
    m_brownian: usize,
    n_assets: usize,
    seed: u64,
    /// Flat [path][step][driver].
    increments: Vec<f64>,
    /// Flat [path][time][asset], time index 0..=n_steps.
    assets: Vec<f64>,
    /// exp(-r t_k) for k = 0..=n_steps.
    deflator: Vec<f64>,
}

impl PathEnsemble {
    pub fn model(&self) -> &ItoModelSpec {
        &self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn m_brownian(&self) -> usize {
        self.m_brownian
    }

    pub fn n_assets(&self) -> usize {
        self.n_assets
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// exp(-r t_k) along the grid.
    pub fn deflator(&self) -> &[f64] {
        &self.deflator
    }

    /// Brownian increments over step k of one path (m values).
    pub fn increments_at(&self, path: usize, step: usize) -> &[f64] {
        let base = (path * self.n_steps + step) * self.m_brownian;
        &self.increments[base..base + self.m_brownian]
    }

    pub fn asset_at(&self, path: usize, time_index: usize, asset: usize) -> f64 {
        self.assets[(path * (self.n_steps + 1) + time_index) * self.n_assets + asset]
    }

    /// The savings account S0_t = baseline_s0 exp(r t), deterministic but
    /// replicated per path so it composes with the pathwise operations.
    /// Bessel models carry an implicit unit account (r = 0).
    pub fn baseline_series(&self) -> PathSeries {
        let (s0, r) = match &self.model {
            ItoModelSpec::ConstantCoefficients(p) => (p.baseline_s0, p.r),
            _ => (1.0, 0.0),
        };
        let n_times = self.n_steps + 1;
        let curve: Vec<f64> = self.times.iter().map(|t| s0 * (r * t).exp()).collect();
        let mut data = vec![0.0; self.n_paths * n_times];
        for chunk in data.chunks_mut(n_times) {
            chunk.copy_from_slice(&curve);
        }
        PathSeries {
            times: self.times.clone(),
            n_paths: self.n_paths,
            initial: s0,
            data,
        }
    }

    /// One asset's paths as a standalone series.
    pub fn asset_series(&self, asset: usize) -> PathSeries {
        assert!(asset < self.n_assets, "asset index out of range");
        let n_times = self.n_steps + 1;
        let mut data = vec![0.0; self.n_paths * n_times];
        for path in 0..self.n_paths {
            for k in 0..n_times {
                data[path * n_times + k] = self.asset_at(path, k, asset);
            }
        }
        PathSeries {
            times: self.times.clone(),
            n_paths: self.n_paths,
            initial: self.asset_at(0, 0, asset),
            data,
        }
    }

    /// Builds a derived per-path series by running `fill` on every path.
    /// `fill` writes all n_steps+1 values of its output slice and must be
    /// a pure function of the path index and stored increments, which
    /// keeps the result independent of the worker count.
    fn derive_series<F>(&self, initial: f64, fill: F) -> PathSeries
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let n_times = self.n_steps + 1;
        let mut data = vec![0.0; self.n_paths * n_times];
        data.par_chunks_mut(n_times)
            .enumerate()
            .for_each(|(path, out)| fill(path, out));
        PathSeries {
            times: self.times.clone(),
            n_paths: self.n_paths,
            initial,
            data,
        }
    }
}

/// Per-path values of one scalar process on the ensemble's time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSeries {
    times: Vec<f64>,
    n_paths: usize,
    initial: f64,
    /// Flat [path][time].
    data: Vec<f64>,
}

impl PathSeries {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn at(&self, path: usize, time_index: usize) -> f64 {
        self.data[path * self.times.len() + time_index]
    }

    pub fn path(&self, path: usize) -> &[f64] {
        let n = self.times.len();
        &self.data[path * n..(path + 1) * n]
    }

    /// All paths' values at one time index.
    pub fn column(&self, time_index: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.at(p, time_index)).collect()
    }

    pub fn terminal_column(&self) -> Vec<f64> {
        self.column(self.times.len() - 1)
    }
}

/// Pathwise product of two series from the same ensemble.
pub fn product_paths(a: &PathSeries, b: &PathSeries) -> Result<PathSeries, ItoError> {
    if a.times != b.times || a.n_paths != b.n_paths {
        return Err(ItoError::DimensionMismatch {
            context: "product of path series",
            expected: a.data.len(),
            got: b.data.len(),
        });
    }
    let data: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(PathSeries {
        times: a.times.clone(),
        n_paths: a.n_paths,
        initial: a.initial * b.initial,
        data,
    })
}

/// Pathwise reciprocal; requires a strictly positive series.
pub fn reciprocal_paths(a: &PathSeries) -> PathSeries {
    let data: Vec<f64> = a
        .data
        .iter()
        .map(|&x| {
            assert!(x > 0.0, "reciprocal of a non-positive path value");
            1.0 / x
        })
        .collect();
    PathSeries {
        times: a.times.clone(),
        n_paths: a.n_paths,
        initial: 1.0 / a.initial,
        data,
    }
}

/// Checkpoint times and per-path value columns at the quartiles of the
/// grid (indices q n/4, q = 1..4, deduplicated for very coarse grids).
pub fn at_quartiles(series: &PathSeries) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n_steps = series.n_times() - 1;
    let mut indices: Vec<usize> = (1..=4).map(|q| q * n_steps / 4).collect();
    indices.dedup();
    let times = indices.iter().map(|&k| series.times[k]).collect();
    let columns = indices.iter().map(|&k| series.column(k)).collect();
    (times, columns)
}

/// Simulates the model on a uniform n_steps grid with n_paths paths.
///
/// Every path derives its own RNG stream from (seed, path index), so the
/// ensemble is bit-identical no matter how the paths are partitioned
/// across threads. Constant-coefficient assets use the exact exponential
/// update; Bessel paths are the norm of a shifted 3-dimensional Brownian
/// motion, exact in law at the grid times.
pub fn simulate(
    model: &ItoModelSpec,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble, ItoError> {
    if n_steps == 0 {
        return Err(ItoError::InvalidStepCount);
    }
    if n_paths == 0 {
        return Err(ItoError::InvalidPathCount);
    }
    model.validate()?;

    let horizon = model.horizon();
    let dt = horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let times: Vec<f64> = (0..=n_steps).map(|k| k as f64 * dt).collect();
    let (m, d, r) = match model {
        ItoModelSpec::ConstantCoefficients(p) => (p.m, p.d, p.r),
        ItoModelSpec::Bessel3 { .. } | ItoModelSpec::InverseBessel3 { .. } => (3, 1, 0.0),
    };
    let deflator: Vec<f64> = times.iter().map(|t| (-r * t).exp()).collect();

    let inc_stride = n_steps * m;
    let asset_stride = (n_steps + 1) * d;
    let mut increments = vec![0.0; n_paths * inc_stride];
    let mut assets = vec![0.0; n_paths * asset_stride];

    match model {
        ItoModelSpec::ConstantCoefficients(p) => {
            let c = p.covariation();
            let log_drift: Vec<f64> = (0..d).map(|i| (p.b[i] - 0.5 * c.get(i, i)) * dt).collect();
            increments
                .par_chunks_mut(inc_stride)
                .zip(assets.par_chunks_mut(asset_stride))
                .enumerate()
                .for_each(|(path, (inc, asset))| {
                    fill_gbm(
                        p,
                        &log_drift,
                        sqrt_dt,
                        n_steps,
                        seed,
                        path as u64,
                        inc,
                        asset,
                    );
                });
        }
        ItoModelSpec::Bessel3 { s0, .. } | ItoModelSpec::InverseBessel3 { s0, .. } => {
            let invert = matches!(model, ItoModelSpec::InverseBessel3 { .. });
            increments
                .par_chunks_mut(inc_stride)
                .zip(assets.par_chunks_mut(asset_stride))
                .enumerate()
                .for_each(|(path, (inc, asset))| {
                    fill_bessel(*s0, invert, sqrt_dt, n_steps, seed, path as u64, inc, asset);
                });
        }
    }

    Ok(PathEnsemble {
        model: model.clone(),
        times,
        n_paths,
        n_steps,
        m_brownian: m,
        n_assets: d,
        seed,
        increments,
        assets,
        deflator,
    })
}

#[allow(clippy::too_many_arguments)]
fn fill_gbm(
    p: &GbmParameters,
    log_drift: &[f64],
    sqrt_dt: f64,
    n_steps: usize,
    seed: u64,
    path: u64,
    inc: &mut [f64],
    asset: &mut [f64],
) {
    let mut rng = path_rng(seed, path);
    for v in inc.iter_mut() {
        *v = standard_normal(&mut rng) * sqrt_dt;
    }
    let (d, m) = (p.d, p.m);
    asset[..d].copy_from_slice(&p.s0);
    for k in 0..n_steps {
        let dw = &inc[k * m..(k + 1) * m];
        for i in 0..d {
            let mut shock = 0.0;
            for (j, dwj) in dw.iter().enumerate() {
                shock += p.sigma.get(j, i) * dwj;
            }
            let next = asset[k * d + i] * (log_drift[i] + shock).exp();
            assert!(
                next > 0.0,
                "exponential price update left the positive cone"
            );
            asset[(k + 1) * d + i] = next;
        }
    }
}

fn fill_bessel(
    s0: f64,
    invert: bool,
    sqrt_dt: f64,
    n_steps: usize,
    seed: u64,
    path: u64,
    inc: &mut [f64],
    asset: &mut [f64],
) {
    let mut rng = path_rng(seed, path);
    for v in inc.iter_mut() {
        *v = standard_normal(&mut rng) * sqrt_dt;
    }
    // Norm of (s0, 0, 0) + B_t; the norm is a Bessel(3) process started
    // at s0, and the shifted start keeps every grid value strictly
    // positive almost surely.
    let mut b = [s0, 0.0, 0.0];
    let record = |b: &[f64; 3]| -> f64 {
        let norm = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        assert!(norm > 0.0, "Bessel path hit the origin");
        if invert {
            1.0 / norm
        } else {
            norm
        }
    };
    asset[0] = record(&b);
    for k in 0..n_steps {
        let dw = &inc[k * 3..(k + 1) * 3];
        b[0] += dw[0];
        b[1] += dw[1];
        b[2] += dw[2];
        asset[k + 1] = record(&b);
    }
}

/// Wealth paths of the constant-proportion portfolio pi from unit initial
/// capital, via the exact per-step exponential.
pub fn wealth_paths(ens: &PathEnsemble, pi: &[f64]) -> Result<PathSeries, ItoError> {
    let p = ens.model.constant_coefficients()?;
    if pi.len() != p.d {
        return Err(ItoError::DimensionMismatch {
            context: "portfolio pi",
            expected: p.d,
            got: pi.len(),
        });
    }
    let drift = log_wealth_drift(&ens.model, pi)?;
    let exposure = p.sigma.mul_vec(pi);
    let dt = ens.dt();
    Ok(ens.derive_series(1.0, |path, out| {
        let mut x = 1.0f64;
        out[0] = x;
        for k in 0..ens.n_steps {
            let dw = ens.increments_at(path, k);
            x *= (drift * dt + linalg::dot(&exposure, dw)).exp();
            assert!(x > 0.0, "wealth left the positive cone");
            out[k + 1] = x;
        }
    }))
}

/// The discount factor built from the minimal premium:
/// deflator times exp(-<lambda*, W_t> - |lambda*|^2 t / 2).
pub fn sdf_star_paths(ens: &PathEnsemble, rp: &RiskPremium) -> Result<PathSeries, ItoError> {
    ens.model.constant_coefficients()?;
    exponential_tilt(ens, &rp.lambda_star, true, "lambda_star")
}

/// The unit-mean exponential martingale exp(-<kappa, W_t> - |kappa|^2 t / 2)
/// for a constant direction kappa.
pub fn orthogonal_martingale_paths(
    ens: &PathEnsemble,
    kappa: &[f64],
) -> Result<PathSeries, ItoError> {
    exponential_tilt(ens, kappa, false, "kappa")
}

/// Shared core of the two exponential factors. With `deflate` the series
/// starts at deflator[0] = 1 and carries exp(-r t) along.
fn exponential_tilt(
    ens: &PathEnsemble,
    direction: &[f64],
    deflate: bool,
    what: &'static str,
) -> Result<PathSeries, ItoError> {
    if direction.len() != ens.m_brownian {
        return Err(ItoError::DimensionMismatch {
            context: what,
            expected: ens.m_brownian,
            got: direction.len(),
        });
    }
    let half_norm_sq = 0.5 * linalg::dot(direction, direction);
    let direction = direction.to_vec();
    Ok(ens.derive_series(1.0, move |path, out| {
        let mut cum = 0.0f64;
        out[0] = if deflate { ens.deflator[0] } else { 1.0 };
        for k in 0..ens.n_steps {
            cum += linalg::dot(&direction, ens.increments_at(path, k));
            let t = ens.times[k + 1];
            let factor = (-cum - half_norm_sq * t).exp();
            out[k + 1] = if deflate {
                ens.deflator[k + 1] * factor
            } else {
                factor
            };
            assert!(out[k + 1] > 0.0, "discount factor left the positive cone");
        }
    }))
}

/// Composed discount factor Y = Y* N^kappa, using the tilt stored in the
/// premium (zero tilt if none was attached).
pub fn sdf_compose(ens: &PathEnsemble, rp: &RiskPremium) -> Result<PathSeries, ItoError> {
    let kappa = rp.kappa_or_zero(ens.m_brownian);
    let star = sdf_star_paths(ens, rp)?;
    let tilt = orthogonal_martingale_paths(ens, &kappa)?;
    product_paths(&star, &tilt)
}

/// Result of the first Bessel demonstration: the reciprocal Bessel
/// discount factor prices the risky asset exactly (their product is
/// identically one) yet fails to price the riskless baseline, because
/// the reciprocal is a strictly mean-decreasing local martingale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrictLocalMartingaleReport {
    /// sup over paths and times of |(1/S) * S - 1|.
    pub product_sup_error: f64,
    /// Martingale test of the reciprocal process itself.
    pub reciprocal: MartingaleTestReport,
    pub terminal_mean: f64,
    pub terminal_se: f64,
}

/// Result of the second demonstration: an asset whose price process is a
/// strict local martingale, so its quoted initial price exceeds the
/// sample mean of its terminal value by a statistically firm gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceGapReport {
    pub initial_price: f64,
    pub terminal_mean: f64,
    pub terminal_se: f64,
    /// initial_price - terminal_mean.
    pub gap: f64,
    pub martingale: MartingaleTestReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BesselReport {
    pub horizon: f64,
    pub n_paths: usize,
    pub example1: StrictLocalMartingaleReport,
    pub example2: PriceGapReport,
}

/// Runs both Bessel demonstrations at the given horizon. The second uses
/// an offset seed so the two examples draw independent randomness.
pub fn bessel_counterexamples(
    horizon: f64,
    n_paths: usize,
    seed: u64,
) -> Result<BesselReport, ItoError> {
    let model1 = ItoModelSpec::Bessel3 { s0: 1.0, horizon };
    let ens1 = simulate(&model1, BESSEL_STEPS, n_paths, seed)?;
    let s = ens1.asset_series(0);
    let y = reciprocal_paths(&s);
    let product = product_paths(&y, &s)?;
    let mut product_sup_error = 0.0f64;
    for path in 0..product.n_paths() {
        for &v in product.path(path) {
            product_sup_error = product_sup_error.max((v - 1.0).abs());
        }
    }
    let (times1, cols1) = at_quartiles(&y);
    let reciprocal = martingale_test(&times1, &cols1, y.initial())?;
    let (terminal_mean, terminal_se) = mean_se(&y.terminal_column());
    let example1 = StrictLocalMartingaleReport {
        product_sup_error,
        reciprocal,
        terminal_mean,
        terminal_se,
    };

    let model2 = ItoModelSpec::InverseBessel3 { s0: 1.0, horizon };
    let ens2 = simulate(&model2, BESSEL_STEPS, n_paths, seed.wrapping_add(1))?;
    let price = ens2.asset_series(0);
    let (times2, cols2) = at_quartiles(&price);
    let martingale = martingale_test(&times2, &cols2, price.initial())?;
    let (mean2, se2) = mean_se(&price.terminal_column());
    let example2 = PriceGapReport {
        initial_price: price.initial(),
        terminal_mean: mean2,
        terminal_se: se2,
        gap: price.initial() - mean2,
        martingale,
    };

    Ok(BesselReport {
        horizon,
        n_paths,
        example1,
        example2,
    })
}
