//! Static replication of contingent claims with options on a limited
//! liability asset, order-closure checks for the generated sublattice, and
//! arbitrage pricing of claims from bond and call prices.
//!
//! Everything works on finite state spaces: a [`FiniteMarket`] is a list of
//! atoms with positive probabilities and the payoff of the underlying on each
//! atom. Claims are state-indexed payoff vectors.

pub mod cli;
pub mod error;
pub mod lattice;
pub mod lp;
pub mod market;
pub mod pricing;
pub mod replication;
pub mod span;
pub mod tol;
pub mod topology;

pub use error::{Error, Result};
pub use market::{build_market, conditional_expectation, is_measurable, sigma_of, Claim, FiniteMarket, Partition};
pub use pricing::{PriceBounds, PricingFunctional};
pub use span::{Leg, MembershipResult, OptionPortfolio};
pub use topology::{NormSpec, PairingBank, StatePriceDensity, YoungFunction};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
