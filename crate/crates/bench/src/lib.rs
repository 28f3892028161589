//! Deterministic market generators shared by the benchmarks.
//!
//! Both generators are seeded and allocation-light so benchmark inputs are
//! reproducible across runs and machines.

use sdf_core::{DiscreteMarket, RawAsset, RawBaseline, RawMarket};

/// Minimal deterministic generator; quality is irrelevant here, stability is.
fn xorshift(state: &mut u64) -> u64 {
    let mut x = *state;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    *state = x;
    x
}

fn pick(state: &mut u64, lo: i64, hi: i64) -> i64 {
    let span = (hi - lo + 1) as u64;
    lo + (xorshift(state) % span) as i64
}

/// Quarter-grid value in [lo/4, hi/4].
fn grid(state: &mut u64, lo: i64, hi: i64) -> f64 {
    pick(state, lo, hi) as f64 * 0.25
}

/// Uniform in [0, 1) with 53 random bits.
fn unit(state: &mut u64) -> f64 {
    (xorshift(state) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn build(probs: Vec<f64>, baseline_st: Vec<f64>, assets: Vec<(f64, Vec<f64>)>) -> DiscreteMarket {
    let raw = RawMarket {
        outcomes: (0..probs.len()).map(|w| format!("w{w}")).collect(),
        probabilities: probs,
        baseline: RawBaseline {
            s0: 1.0,
            s_t: baseline_st,
        },
        assets: assets
            .into_iter()
            .enumerate()
            .map(|(i, (s0, s_t))| RawAsset {
                name: format!("a{i}"),
                s0,
                s_t,
            })
            .collect(),
    };
    DiscreteMarket::validate(&raw).expect("generated market must validate")
}

/// Random market with up to `max_outcomes` outcomes and `max_assets` assets.
/// Payoffs sit on a quarter grid; arbitrage and no-arbitrage cases both occur.
pub fn grid_market(seed: u64, max_outcomes: usize, max_assets: usize) -> DiscreteMarket {
    let mut st = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let n = pick(&mut st, 2, max_outcomes as i64) as usize;
    let d = pick(&mut st, 1, max_assets as i64) as usize;
    let weights: Vec<f64> = (0..n).map(|_| pick(&mut st, 1, 4) as f64).collect();
    let total: f64 = weights.iter().sum();
    let probs = weights.iter().map(|w| w / total).collect();
    let baseline_st = (0..n).map(|_| grid(&mut st, 2, 6)).collect();
    let assets = (0..d)
        .map(|_| {
            let s0 = grid(&mut st, 1, 16);
            let s_t = (0..n).map(|_| grid(&mut st, 1, 16)).collect();
            (s0, s_t)
        })
        .collect();
    build(probs, baseline_st, assets)
}

/// Random arbitrage-free market: asset prices are expectations of their
/// payoffs under an explicit positive discount factor, so a pricing density
/// exists by construction.
pub fn priced_market(seed: u64, max_outcomes: usize, max_assets: usize) -> DiscreteMarket {
    let mut st = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(0x2545f4914f6cdd1d);
    let n = pick(&mut st, 2, max_outcomes as i64) as usize;
    let d = pick(&mut st, 1, max_assets as i64) as usize;
    let weights: Vec<f64> = (0..n).map(|_| pick(&mut st, 1, 4) as f64).collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let baseline_st: Vec<f64> = (0..n).map(|_| 0.5 + unit(&mut st)).collect();

    // Positive candidate density, rescaled so it prices the baseline exactly.
    let mut y: Vec<f64> = (0..n).map(|_| 0.5 + unit(&mut st)).collect();
    let priced_baseline: f64 = probs
        .iter()
        .zip(y.iter().zip(&baseline_st))
        .map(|(p, (yv, g))| p * yv * g)
        .sum();
    for yv in &mut y {
        *yv /= priced_baseline;
    }

    let assets = (0..d)
        .map(|_| {
            let s_t: Vec<f64> = (0..n).map(|_| 0.25 + 3.75 * unit(&mut st)).collect();
            let s0 = probs
                .iter()
                .zip(y.iter().zip(&s_t))
                .map(|(p, (yv, h))| p * yv * h)
                .sum();
            (s0, s_t)
        })
        .collect();
    build(probs, baseline_st, assets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdf_core::ftap::find_sdf;

    #[test]
    fn priced_markets_are_arbitrage_free() {
        for seed in 0..50 {
            let m = priced_market(seed, 6, 4);
            assert!(
                find_sdf(&m).unwrap().is_some(),
                "seed {seed} produced an arbitrage"
            );
        }
    }

    #[test]
    fn grid_markets_validate_and_vary() {
        let mut verdicts = [false, false];
        for seed in 0..50 {
            let m = grid_market(seed, 6, 4);
            verdicts[usize::from(find_sdf(&m).unwrap().is_some())] = true;
        }
        assert_eq!(verdicts, [true, true], "want both verdicts in the mix");
    }
}
