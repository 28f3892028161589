//! Stochastic discount factor toolkit: arbitrage analysis and optimal
//! investment in finite one-period markets, plus Monte Carlo construction of
//! discount factors for diffusion market models.

pub mod ftap;
pub mod ito;
pub mod linalg;
pub mod lp;
pub mod market;
pub mod pricing;
pub mod utility;

pub use market::terminal_wealth;
pub use market::{
    deflate, ClaimPayoff, Deflator, DiscreteMarket, MarketError, MarketFileError, RawAsset,
    RawBaseline, RawClaim, RawMarket, Strategy,
};
