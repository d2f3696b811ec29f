//! Portfolios of calls and the bond, i.e. elements of the option span of the
//! underlying.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Claim, FiniteMarket};
use crate::replication;
use crate::tol;

/// A call position: `weight * (f - strike)^+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub strike: f64,
    pub weight: f64,
}

/// Cash in the bond plus a ladder of calls.
///
/// Legs are kept sorted by strike with duplicates merged, so two portfolios
/// holding the same positions compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPortfolio")]
pub struct OptionPortfolio {
    cash: f64,
    legs: Vec<Leg>,
}

#[derive(Deserialize)]
struct RawPortfolio {
    cash: f64,
    #[serde(default)]
    legs: Vec<Leg>,
}

impl TryFrom<RawPortfolio> for OptionPortfolio {
    type Error = Error;
    fn try_from(raw: RawPortfolio) -> Result<Self> {
        OptionPortfolio::new(raw.cash, raw.legs)
    }
}

impl OptionPortfolio {
    pub fn new(cash: f64, legs: Vec<Leg>) -> Result<Self> {
        if !cash.is_finite() || legs.iter().any(|l| !l.strike.is_finite() || !l.weight.is_finite()) {
            return Err(Error::NonFinite { what: "portfolio" });
        }
        Ok(Self::canonical(cash, legs))
    }

    fn canonical(cash: f64, mut legs: Vec<Leg>) -> Self {
        legs.sort_by(|a, b| a.strike.total_cmp(&b.strike));
        let mut merged: Vec<Leg> = Vec::with_capacity(legs.len());
        for leg in legs {
            match merged.last_mut() {
                Some(last) if last.strike == leg.strike => last.weight += leg.weight,
                _ => merged.push(leg),
            }
        }
        merged.retain(|l| l.weight != 0.0);
        OptionPortfolio { cash, legs: merged }
    }

    pub fn cash_only(cash: f64) -> Self {
        OptionPortfolio { cash, legs: Vec::new() }
    }

    pub fn zero() -> Self {
        Self::cash_only(0.0)
    }

    pub fn call(strike: f64) -> Self {
        Self::canonical(0.0, vec![Leg { strike, weight: 1.0 }])
    }

    /// The underlying itself, `f = (f - 0)^+` for `f >= 0`.
    pub fn underlying() -> Self {
        Self::call(0.0)
    }

    pub fn cash(&self) -> f64 {
        self.cash
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn scale(&self, a: f64) -> Self {
        let legs = self.legs.iter().map(|l| Leg { strike: l.strike, weight: a * l.weight }).collect();
        Self::canonical(a * self.cash, legs)
    }

    pub fn plus(&self, other: &Self) -> Self {
        let legs = self.legs.iter().chain(&other.legs).copied().collect();
        Self::canonical(self.cash + other.cash, legs)
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(-1.0))
    }

    /// `cash + sum w_j (f_i - k_j)^+` at every state.
    pub fn payoff(&self, market: &FiniteMarket) -> Claim {
        market.underlying().map(|f| self.payoff_at(f))
    }

    /// Payoff at a single underlying value, with compensated summation.
    pub fn payoff_at(&self, f: f64) -> f64 {
        let mut sum = self.cash;
        let mut comp = 0.0;
        for leg in &self.legs {
            let term = leg.weight * (f - leg.strike).max(0.0);
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        sum + comp
    }
}

/// A put at `strike` built by parity: `(k - f)^+ = (f - k)^+ - f + k`,
/// using that `f = (f - 0)^+` is in the span because `f >= 0`.
pub fn put(strike: f64) -> OptionPortfolio {
    OptionPortfolio::canonical(strike, vec![Leg { strike: 0.0, weight: -1.0 }, Leg { strike, weight: 1.0 }])
}

/// Answer to a span membership query, with a checkable certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum MembershipResult {
    /// The claim is the payoff of this portfolio.
    Member { portfolio: OptionPortfolio },
    /// Two states with the same underlying value where the claim differs.
    NonMember { first: usize, second: usize, underlying: f64, values: (f64, f64) },
}

impl MembershipResult {
    pub fn is_member(&self) -> bool {
        matches!(self, MembershipResult::Member { .. })
    }

    pub fn portfolio(&self) -> Option<&OptionPortfolio> {
        match self {
            MembershipResult::Member { portfolio } => Some(portfolio),
            MembershipResult::NonMember { .. } => None,
        }
    }
}

/// On a finite market the option span is exactly the sigma(f)-measurable
/// claims, so membership is decided on level sets.
pub fn is_in_span(claim: &Claim, market: &FiniteMarket) -> Result<MembershipResult> {
    claim.check_len(market.len())?;
    match replication::exact_replicate(claim, market) {
        Ok(portfolio) => Ok(MembershipResult::Member { portfolio }),
        Err(Error::NotMeasurable { first, second }) => Ok(MembershipResult::NonMember {
            first,
            second,
            underlying: market.underlying()[first],
            values: (claim[first], claim[second]),
        }),
        Err(e) => Err(e),
    }
}

/// Largest pointwise mismatch between `(f - k(f + 1))^+` and its rewriting
/// in the span: zero for `k >= 1`, `(1 - k) (f - k/(1 - k))^+` for `k < 1`.
pub fn z_identity_residual(market: &FiniteMarket, k: f64) -> f64 {
    let f = market.underlying();
    let lhs = f.map(|x| (x - k * (x + 1.0)).max(0.0));
    let rhs = if k >= 1.0 {
        Claim::zeros(market.len())
    } else {
        OptionPortfolio::call(k / (1.0 - k)).scale(1.0 - k).payoff(market)
    };
    lhs.values()
        .iter()
        .zip(rhs.values())
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Checks, strike by strike, that `Span{b, s, (s - k b)^+}` with `b = f + 1`
/// and `s = f` stays inside the option span.
pub fn z_identity_check(market: &FiniteMarket, strikes: &[f64]) -> bool {
    strikes.iter().all(|&k| k.is_finite() && z_identity_residual(market, k) <= tol::IDENTITY)
}
