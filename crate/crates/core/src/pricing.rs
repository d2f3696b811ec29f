//! Pricing functionals on the option span given by a bond price and a call
//! price curve; no-free-lunch certification by a separating strictly
//! positive density; and the range of prices of other claims that are
//! consistent with the quotes.
//!
//! A density `y` is normalized so that `E[y] = 1`; the scale `lambda` then
//! equals the bond price and the price of a claim `g` is `lambda E[g y]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, Direction, LinearProgram, LpStatus};
use crate::market::{Claim, FiniteMarket};
use crate::span::{Leg, OptionPortfolio};
use crate::topology::{pair, StatePriceDensity};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CallQuote {
    pub k: f64,
    pub price: f64,
}

/// Bond price and call prices at a finite strike set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPricing")]
pub struct PricingFunctional {
    bond: f64,
    calls: Vec<CallQuote>,
}

#[derive(Deserialize)]
struct RawPricing {
    bond: f64,
    calls: Vec<CallQuote>,
}

impl TryFrom<RawPricing> for PricingFunctional {
    type Error = Error;
    fn try_from(raw: RawPricing) -> Result<Self> {
        PricingFunctional::new(raw.bond, raw.calls)
    }
}

impl PricingFunctional {
    pub fn new(bond: f64, calls: Vec<CallQuote>) -> Result<Self> {
        if !bond.is_finite() || calls.iter().any(|c| !c.k.is_finite() || !c.price.is_finite()) {
            return Err(Error::NonFinite { what: "pricing functional" });
        }
        if bond < 0.0 {
            return Err(Error::NegativeBondPrice(bond));
        }
        if calls.is_empty() || calls.windows(2).any(|w| w[0].k >= w[1].k) {
            return Err(Error::InvalidStrikes);
        }
        Ok(PricingFunctional { bond, calls })
    }

    /// Quotes generated by an (unnormalized) density: bond `E[y]`, calls
    /// `E[(f-k)^+ y]`.
    pub fn from_density(market: &FiniteMarket, density: &StatePriceDensity, strikes: &[f64]) -> Result<Self> {
        let bond = pair(&Claim::one(market.len()), density, market)?;
        let calls = strikes
            .iter()
            .map(|&k| {
                let payoff = OptionPortfolio::call(k).payoff(market);
                Ok(CallQuote { k, price: pair(&payoff, density, market)? })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bond, calls)
    }

    pub fn bond(&self) -> f64 {
        self.bond
    }

    pub fn calls(&self) -> &[CallQuote] {
        &self.calls
    }

    pub fn strikes(&self) -> Vec<f64> {
        self.calls.iter().map(|c| c.k).collect()
    }

    /// Bond first, then one call per strike.
    fn quoted_prices(&self) -> Vec<f64> {
        std::iter::once(self.bond).chain(self.calls.iter().map(|c| c.price)).collect()
    }

    fn instrument_payoffs(&self, market: &FiniteMarket) -> Vec<Vec<f64>> {
        std::iter::once(Claim::one(market.len()).into_values())
            .chain(self.calls.iter().map(|c| OptionPortfolio::call(c.k).payoff(market).into_values()))
            .collect()
    }

    /// Portfolio holding `theta[0]` bonds and `theta[j]` calls at the j-th strike.
    pub fn portfolio_of(&self, theta: &[f64]) -> OptionPortfolio {
        let legs = self.calls.iter().zip(&theta[1..]).map(|(c, &w)| Leg { strike: c.k, weight: w }).collect();
        OptionPortfolio::new(theta[0], legs).expect("finite coefficients")
    }

    /// Price of a quoted-instrument combination.
    pub fn price_of(&self, theta: &[f64]) -> f64 {
        self.quoted_prices().iter().zip(theta).map(|(p, t)| p * t).sum()
    }

    /// Largest mismatch between the quotes and the prices `lambda E[x y]`.
    pub fn repricing_error(&self, market: &FiniteMarket, density: &StatePriceDensity, lambda: f64) -> Result<f64> {
        let payoffs = self.instrument_payoffs(market);
        let mut worst = 0.0f64;
        for (x, q) in payoffs.into_iter().zip(self.quoted_prices()) {
            worst = worst.max((lambda * pair(&Claim::new(x), density, market)? - q).abs());
        }
        Ok(worst)
    }
}

/// A combination of quoted instruments with its payoff and price.
#[derive(Debug, Clone)]
struct Combo {
    theta: Vec<f64>,
    payoff: Vec<f64>,
    price: f64,
}

impl Combo {
    fn axpy(&mut self, a: f64, other: &Combo) {
        for (t, o) in self.theta.iter_mut().zip(&other.theta) {
            *t += a * o;
        }
        for (x, o) in self.payoff.iter_mut().zip(&other.payoff) {
            *x += a * o;
        }
        self.price += a * other.price;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Instrument payoffs split into an independent family and the
/// combinations that vanish, by Gram-Schmidt with re-orthogonalization.
struct Reduction {
    basis: Vec<Combo>,
    null: Vec<Combo>,
}

fn reduce(pi: &PricingFunctional, market: &FiniteMarket) -> Reduction {
    let payoffs = pi.instrument_payoffs(market);
    let prices = pi.quoted_prices();
    let count = payoffs.len();
    let scale = payoffs.iter().map(|x| dot(x, x).sqrt()).fold(0.0, f64::max).max(1.0);
    let mut basis: Vec<Combo> = Vec::new();
    let mut null = Vec::new();
    for (j, (x, price)) in payoffs.into_iter().zip(prices).enumerate() {
        let mut theta = vec![0.0; count];
        theta[j] = 1.0;
        let mut c = Combo { theta, payoff: x, price };
        for _ in 0..2 {
            for q in &basis {
                let a = dot(&c.payoff, &q.payoff) / dot(&q.payoff, &q.payoff);
                c.axpy(-a, q);
            }
        }
        if dot(&c.payoff, &c.payoff).sqrt() <= 1e-10 * scale {
            null.push(c);
        } else {
            basis.push(c);
        }
    }
    Reduction { basis, null }
}

/// Pricing data preprocessed for one market: an independent payoff family,
/// a basis of the zero-price subspace, and any zero-payoff combination whose
/// price does not vanish.
struct Analysis<'a> {
    pi: &'a PricingFunctional,
    market: &'a FiniteMarket,
    zero_price: Vec<Combo>,
    inconsistent: Option<Combo>,
}

impl<'a> Analysis<'a> {
    fn new(pi: &'a PricingFunctional, market: &'a FiniteMarket) -> Result<Self> {
        let red = reduce(pi, market);
        let price_scale = pi.quoted_prices().iter().fold(0.0f64, |m, p| m.max(p.abs()));
        if price_scale == 0.0 {
            return Err(Error::DegeneratePi);
        }
        let inconsistent = red
            .null
            .iter()
            .find(|c| {
                let gross: f64 = c.theta.iter().zip(pi.quoted_prices()).map(|(t, p)| (t * p).abs()).sum();
                c.price.abs() > 1e-9 * gross.max(price_scale)
            })
            .cloned();
        let zero_price = match red.basis.iter().enumerate().max_by(|a, b| a.1.price.abs().total_cmp(&b.1.price.abs())) {
            Some((star, anchor)) if anchor.price != 0.0 => red
                .basis
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != star)
                .map(|(_, b)| {
                    let mut m = b.clone();
                    m.axpy(-b.price / anchor.price, anchor);
                    m
                })
                .collect(),
            _ => red.basis.clone(),
        };
        Ok(Analysis { pi, market, zero_price, inconsistent })
    }

    /// Rows `E[m y] = 0` for each zero-price basis element and `E[y] = 1`,
    /// written over variables `offset + i` for state `i`.
    fn density_rows(&self, lp: &mut LinearProgram, offset: usize, common: Option<usize>) {
        let n = self.market.len();
        let p = self.market.probs();
        let width = lp.num_vars();
        let mut push = |coef: Vec<f64>, rhs: f64| {
            let mut row = vec![0.0; width];
            for i in 0..n {
                row[offset + i] = coef[i] * p[i];
                if let Some(e) = common {
                    row[e] += coef[i] * p[i];
                }
            }
            lp.add_equality(row, rhs);
        };
        for m in &self.zero_price {
            push(m.payoff.clone(), 0.0);
        }
        push(vec![1.0; n], 1.0);
    }

    /// `max eps` over densities `y = eps + s`, `s >= 0`, orthogonal to the
    /// zero-price subspace with `E[y] = 1`.
    fn separation(&self) -> Result<Option<(StatePriceDensity, f64)>> {
        if self.inconsistent.is_some() || self.pi.bond() <= 0.0 {
            return Ok(None);
        }
        let n = self.market.len();
        let mut prog = LinearProgram::new(n + 1, Direction::Maximize);
        prog.set_free(n).set_objective_coef(n, 1.0);
        self.density_rows(&mut prog, 0, Some(n));
        let sol = lp::solve(&prog)?;
        match sol.status {
            LpStatus::Optimal => {
                let eps = sol.primal[n];
                if eps <= tol::NFL_MARGIN {
                    return Ok(None);
                }
                let y = sol.primal[..n].iter().map(|s| s + eps).collect();
                Ok(Some((StatePriceDensity::new(y)?, eps)))
            }
            LpStatus::Infeasible => Ok(None),
            LpStatus::Unbounded => Err(Error::LpStatus(sol.status, "separation")),
        }
    }

    /// A zero-price portfolio with nonnegative, nonzero payoff.
    fn free_lunch(&self) -> Result<Option<FreeLunchCertificate>> {
        let pi = self.pi;
        let n = self.market.len();
        let count = pi.calls().len() + 1;
        let theta = if let Some(c) = &self.inconsistent {
            // zero payoff at nonzero price; swap it against the bond
            if pi.bond() > 0.0 {
                let s = -c.price.signum();
                let mut t: Vec<f64> = c.theta.iter().map(|v| s * v).collect();
                t[0] += c.price.abs() / pi.bond();
                Some(t)
            } else {
                let mut t = vec![0.0; count];
                t[0] = 1.0;
                Some(t)
            }
        } else if pi.bond() == 0.0 {
            let mut t = vec![0.0; count];
            t[0] = 1.0;
            Some(t)
        } else {
            // max E[x] s.t. x = payoff(theta) >= 0, price(theta) = 0, E[x] <= 1
            let payoffs = pi.instrument_payoffs(self.market);
            let prices = pi.quoted_prices();
            let p = self.market.probs();
            let vars = count + n + 1;
            let mut prog = LinearProgram::new(vars, Direction::Maximize);
            for j in 0..count {
                prog.set_free(j);
            }
            for i in 0..n {
                prog.set_objective_coef(count + i, p[i]);
                let mut row = vec![0.0; vars];
                for j in 0..count {
                    row[j] = payoffs[j][i];
                }
                row[count + i] = -1.0;
                prog.add_equality(row, 0.0);
            }
            let mut row = vec![0.0; vars];
            row[..count].copy_from_slice(&prices);
            prog.add_equality(row, 0.0);
            let mut row = vec![0.0; vars];
            row[count..count + n].copy_from_slice(p);
            row[count + n] = 1.0;
            prog.add_equality(row, 1.0);
            let sol = lp::solve(&prog)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::LpStatus(sol.status, "free lunch search"));
            }
            (sol.objective > 1e-9).then(|| sol.primal[..count].to_vec())
        };
        Ok(theta.map(|mut t| {
            if pi.bond() > 0.0 {
                let residual = pi.price_of(&t);
                t[0] -= residual / pi.bond();
            }
            FreeLunchCertificate::from_theta(pi, self.market, t)
        }))
    }
}

/// An element `c = m - z` of the free-lunch cone with `m` a zero-price
/// portfolio payoff, `z >= 0`, and `c >= 0`, `c != 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeLunchCertificate {
    /// Holdings: bond first, then one per quoted strike.
    pub theta: Vec<f64>,
    pub portfolio: OptionPortfolio,
    pub price: f64,
    /// Payoff `m` of the portfolio.
    pub zero_price_payoff: Claim,
    /// `z = m^-`, absorbing rounding noise.
    pub disposal: Claim,
    /// `c = m - z = m^+`.
    pub element: Claim,
}

impl FreeLunchCertificate {
    fn from_theta(pi: &PricingFunctional, market: &FiniteMarket, theta: Vec<f64>) -> Self {
        let portfolio = pi.portfolio_of(&theta);
        let m = portfolio.payoff(market);
        FreeLunchCertificate {
            price: pi.price_of(&theta),
            disposal: m.negative_part(),
            element: m.positive_part(),
            zero_price_payoff: m,
            portfolio,
            theta,
        }
    }

    /// Rechecks the certificate against the quotes: zero price, `c = m - z`,
    /// `z >= 0`, `c >= 0`, and `c` not identically zero.
    pub fn verify(&self, pi: &PricingFunctional, market: &FiniteMarket, tol: f64) -> bool {
        let scale = pi.quoted_prices().iter().zip(&self.theta).map(|(p, t)| (p * t).abs()).sum::<f64>().max(1.0);
        let m = pi.portfolio_of(&self.theta).payoff(market);
        let rebuilt = &m - &self.disposal;
        pi.price_of(&self.theta).abs() <= tol * scale
            && rebuilt.sup_distance(&self.element) <= tol * m.max_abs().max(1.0)
            && self.disposal.is_nonnegative()
            && self.element.is_nonnegative()
            && self.element.max_value() > tol
            && self.disposal.max_abs() <= tol * m.max_abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum NflResult {
    /// A strictly positive density that, scaled by `lambda`, reprices every
    /// quote. `margin` is its smallest weight.
    NoFreeLunch { witness: StatePriceDensity, lambda: f64, margin: f64 },
    FreeLunch { certificate: FreeLunchCertificate },
}

impl NflResult {
    pub fn is_nfl(&self) -> bool {
        matches!(self, NflResult::NoFreeLunch { .. })
    }
}

/// Decides whether the quotes admit a free lunch on the option span.
pub fn no_free_lunch(pi: &PricingFunctional, market: &FiniteMarket) -> Result<NflResult> {
    Analysis::new(pi, market)?.decide()
}

impl Analysis<'_> {
    fn decide(&self) -> Result<NflResult> {
        if let Some((witness, margin)) = self.separation()? {
            return Ok(NflResult::NoFreeLunch { witness, lambda: self.pi.bond(), margin });
        }
        match self.free_lunch()? {
            Some(certificate) => Ok(NflResult::FreeLunch { certificate }),
            None => Err(Error::LpStatus(LpStatus::Infeasible, "no separating density and no free lunch found")),
        }
    }
}

/// Outcome of [`check_positivity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityResult {
    pub positive: bool,
    /// A portfolio with nonnegative payoff and negative price.
    pub violation: Option<Violation>,
    /// Nonnegative (possibly not strict) density reproducing the quotes.
    pub state_prices: Option<StatePriceDensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub theta: Vec<f64>,
    pub portfolio: OptionPortfolio,
    pub payoff: Claim,
    pub price: f64,
}

/// Whether the quotes define a positive functional: no combination of the
/// bond and quoted calls has nonnegative payoff and negative price.
pub fn check_positivity(pi: &PricingFunctional, market: &FiniteMarket) -> Result<PositivityResult> {
    let count = pi.calls().len() + 1;
    let violation = |theta: Vec<f64>| {
        let portfolio = pi.portfolio_of(&theta);
        Violation { payoff: portfolio.payoff(market), price: pi.price_of(&theta), portfolio, theta }
    };
    if let Some(j) = pi.calls().iter().position(|c| c.price < 0.0) {
        let mut theta = vec![0.0; count];
        theta[j + 1] = 1.0;
        return Ok(PositivityResult { positive: false, violation: Some(violation(theta)), state_prices: None });
    }

    let n = market.len();
    let payoffs = pi.instrument_payoffs(market);
    let prices = pi.quoted_prices();
    // payoff(theta) - s = 0, s >= 0, price(theta) = -1
    let vars = count + n;
    let mut prog = LinearProgram::new(vars, Direction::Minimize);
    for j in 0..count {
        prog.set_free(j);
    }
    for i in 0..n {
        let mut row = vec![0.0; vars];
        for j in 0..count {
            row[j] = payoffs[j][i];
        }
        row[count + i] = -1.0;
        prog.add_equality(row, 0.0);
    }
    let mut row = vec![0.0; vars];
    row[..count].copy_from_slice(&prices);
    prog.add_equality(row, -1.0);
    let sol = lp::solve(&prog)?;
    if sol.status == LpStatus::Optimal {
        let theta = sol.primal[..count].to_vec();
        return Ok(PositivityResult { positive: false, violation: Some(violation(theta)), state_prices: None });
    }

    // state prices q >= 0 with sum_i q_i payoff_j(i) = price_j
    let mut prog = LinearProgram::new(n, Direction::Minimize);
    for (x, price) in payoffs.iter().zip(&prices) {
        prog.add_equality(x.clone(), *price);
    }
    let sol = lp::solve(&prog)?;
    let state_prices = if sol.is_optimal() {
        let y = sol.primal.iter().zip(market.probs()).map(|(q, p)| q.max(0.0) / p).collect();
        Some(StatePriceDensity::new(y)?)
    } else {
        None
    };
    Ok(PositivityResult { positive: true, violation: None, state_prices })
}

/// Range of prices for a claim that are consistent with the quotes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceBounds {
    /// Bounds over all consistent densities; the closure of the strictly
    /// positive ones gives the same infimum and supremum.
    pub p_min: f64,
    pub p_max: f64,
    /// Bounds attained by densities with every weight at least `delta`.
    pub p_min_strict: f64,
    pub p_max_strict: f64,
    pub delta: f64,
    pub lower_certificate: StatePriceDensity,
    pub upper_certificate: StatePriceDensity,
    pub lambda: f64,
    pub unique: bool,
    pub gap: f64,
}

fn bound(an: &Analysis<'_>, g: &Claim, floor: f64, direction: Direction) -> Result<(f64, StatePriceDensity)> {
    let n = an.market.len();
    let lambda = an.pi.bond();
    let mut prog = LinearProgram::new(n, direction);
    for i in 0..n {
        prog.set_lower(i, floor);
        prog.set_objective_coef(i, lambda * g[i] * an.market.probs()[i]);
    }
    an.density_rows(&mut prog, 0, None);
    let sol = lp::solve(&prog)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::LpStatus(sol.status, "price bound"));
    }
    let y = sol.primal.iter().map(|v| v.max(floor)).collect();
    Ok((sol.objective, StatePriceDensity::new(y)?))
}

pub fn price_bounds(g: &Claim, pi: &PricingFunctional, market: &FiniteMarket) -> Result<PriceBounds> {
    g.check_len(market.len())?;
    let an = Analysis::new(pi, market)?;
    let Some((_, margin)) = an.separation()? else {
        return Err(Error::FreeLunchPresent);
    };
    bounds_with(&an, g, margin)
}

fn bounds_with(an: &Analysis<'_>, g: &Claim, margin: f64) -> Result<PriceBounds> {
    let delta = tol::DENSITY_FLOOR.min(0.5 * margin);
    let (p_min, _) = bound(an, g, 0.0, Direction::Minimize)?;
    let (p_max, _) = bound(an, g, 0.0, Direction::Maximize)?;
    let (p_min_strict, lower_certificate) = bound(an, g, delta, Direction::Minimize)?;
    let (p_max_strict, upper_certificate) = bound(an, g, delta, Direction::Maximize)?;
    let gap = p_max - p_min;
    Ok(PriceBounds {
        p_min,
        p_max,
        p_min_strict,
        p_max_strict,
        delta,
        lower_certificate,
        upper_certificate,
        lambda: an.pi.bond(),
        unique: gap < tol::UNIQUE_REL * p_max.abs().max(1.0),
        gap,
    })
}

/// The unique price of a sigma(f)-measurable claim consistent with the
/// quotes.
pub fn extend_by_arbitrage(g: &Claim, pi: &PricingFunctional, market: &FiniteMarket) -> Result<f64> {
    g.check_len(market.len())?;
    let an = Analysis::new(pi, market)?;
    let Some((witness, margin)) = an.separation()? else {
        return Err(Error::FreeLunchPresent);
    };
    if let Some((first, second)) = market.sigma_f().measurability_violation(g) {
        return Err(Error::NotMeasurable { first, second });
    }
    let b = bounds_with(&an, g, margin)?;
    if !b.unique {
        return Err(Error::NotDeterminedByArbitrage { p_min: b.p_min, p_max: b.p_max });
    }
    Ok(pi.bond() * pair(g, &witness, market)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::put;

    fn m012() -> FiniteMarket {
        FiniteMarket::uniform(vec![0.0, 1.0, 2.0]).unwrap()
    }

    fn quotes(bond: f64, calls: &[(f64, f64)]) -> PricingFunctional {
        PricingFunctional::new(bond, calls.iter().map(|&(k, price)| CallQuote { k, price }).collect()).unwrap()
    }

    #[test]
    fn construction_validates() {
        assert_eq!(PricingFunctional::new(-1.0, vec![CallQuote { k: 0.0, price: 1.0 }]), Err(Error::NegativeBondPrice(-1.0)));
        assert_eq!(PricingFunctional::new(1.0, vec![]), Err(Error::InvalidStrikes));
        let dup = vec![CallQuote { k: 1.0, price: 1.0 }, CallQuote { k: 1.0, price: 1.0 }];
        assert_eq!(PricingFunctional::new(1.0, dup), Err(Error::InvalidStrikes));
        let p: PricingFunctional = serde_json::from_str(r#"{"bond":1.0,"calls":[{"k":0,"price":1.0}]}"#).unwrap();
        assert_eq!(p.strikes(), vec![0.0]);
    }

    #[test]
    fn density_generated_quotes() {
        let pi = PricingFunctional::from_density(&m012(), &StatePriceDensity::one(3), &[0.0, 1.0]).unwrap();
        assert!((pi.bond() - 1.0).abs() < 1e-15);
        assert!((pi.calls()[0].price - 1.0).abs() < 1e-15);
        assert!((pi.calls()[1].price - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn positivity_examples() {
        let m = m012();
        let pi = quotes(1.0, &[(0.0, 1.0), (1.0, 1.0 / 3.0)]);
        let r = check_positivity(&pi, &m).unwrap();
        assert!(r.positive);
        let y = r.state_prices.unwrap();
        assert!(pi.repricing_error(&m, &y, 1.0).unwrap() < 1e-12);

        let r = check_positivity(&quotes(1.0, &[(0.0, 1.0), (1.0, -0.1)]), &m).unwrap();
        assert!(!r.positive);
        let v = r.violation.unwrap();
        assert_eq!(v.portfolio, OptionPortfolio::call(1.0));
        assert!(v.price < 0.0);

        let pi = quotes(1.0, &[(0.0, 1.0), (0.5, 0.2), (1.0, 0.9)]);
        let r = check_positivity(&pi, &m).unwrap();
        assert!(!r.positive);
        let v = r.violation.unwrap();
        assert!(v.payoff.values().iter().all(|&x| x >= -1e-12));
        assert!(v.price < -0.5);
    }

    #[test]
    fn nfl_examples() {
        let m = m012();
        let pi = quotes(1.0, &[(0.0, 1.0), (1.0, 1.0 / 3.0)]);
        match no_free_lunch(&pi, &m).unwrap() {
            NflResult::NoFreeLunch { witness, lambda, .. } => {
                assert_eq!(lambda, 1.0);
                for w in witness.weights() {
                    assert!((w - 1.0).abs() < 1e-12);
                }
            }
            other => panic!("{other:?}"),
        }

        let bad = quotes(1.0, &[(0.0, 1.0), (1.0, 0.9)]);
        match no_free_lunch(&bad, &m).unwrap() {
            NflResult::FreeLunch { certificate } => assert!(certificate.verify(&bad, &m, 1e-9)),
            other => panic!("{other:?}"),
        }

        let single = build_single();
        let pi = quotes(1.0, &[(0.0, 1.0)]);
        match no_free_lunch(&pi, &single).unwrap() {
            NflResult::NoFreeLunch { witness, .. } => assert!((witness.weights()[0] - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    fn build_single() -> FiniteMarket {
        crate::market::build_market(vec![1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn brute_force_confirms_the_free_lunch_example() {
        // (y2 + 2 y3)/3 = 1, y3/3 = 0.9 and (y1 + y2 + y3)/3 = 1 force y2 < 0
        let mut feasible = false;
        for a in 1..=300 {
            for b in 1..=300 {
                let (y1, y2) = (a as f64 * 0.01, b as f64 * 0.01);
                let y3 = 2.7;
                let ok = ((y1 + y2 + y3) / 3.0 - 1.0).abs() < 0.02 && ((y2 + 2.0 * y3) / 3.0 - 1.0).abs() < 0.02;
                feasible |= ok;
            }
        }
        assert!(!feasible);
    }

    #[test]
    fn degenerate_pi_is_an_error() {
        let pi = quotes(0.0, &[(0.0, 0.0)]);
        assert_eq!(no_free_lunch(&pi, &m012()), Err(Error::DegeneratePi));
    }

    #[test]
    fn zero_bond_is_a_free_lunch() {
        let pi = quotes(0.0, &[(0.0, 1.0)]);
        let NflResult::FreeLunch { certificate } = no_free_lunch(&pi, &m012()).unwrap() else { panic!() };
        assert!(certificate.verify(&pi, &m012(), 1e-9));
        assert_eq!(certificate.element, Claim::one(3));
    }

    #[test]
    fn inconsistent_dependent_quotes_are_a_free_lunch() {
        // calls at 0 and -1 differ by exactly one bond on f >= 0
        let m = m012();
        let pi = quotes(1.0, &[(-1.0, 2.5), (0.0, 1.0)]);
        let NflResult::FreeLunch { certificate } = no_free_lunch(&pi, &m).unwrap() else { panic!() };
        assert!(certificate.verify(&pi, &m, 1e-9));
        // out of range strike with a positive price
        let pi = quotes(1.0, &[(0.0, 1.0), (5.0, 0.1)]);
        let NflResult::FreeLunch { certificate } = no_free_lunch(&pi, &m).unwrap() else { panic!() };
        assert!(certificate.verify(&pi, &m, 1e-9));
        // consistent dependent quotes are fine
        let pi = quotes(1.0, &[(-1.0, 2.0), (0.0, 1.0), (5.0, 0.0)]);
        assert!(no_free_lunch(&pi, &m).unwrap().is_nfl());
    }

    #[test]
    fn price_bounds_examples() {
        let m = m012();
        let pi = PricingFunctional::from_density(&m, &StatePriceDensity::one(3), &[0.0, 1.0]).unwrap();
        let b = price_bounds(&Claim::new(vec![0.0, 1.0, 4.0]), &pi, &m).unwrap();
        assert!(b.unique);
        assert!((b.p_min - 5.0 / 3.0).abs() < 1e-9 && (b.p_max - 5.0 / 3.0).abs() < 1e-9);

        let b = price_bounds(&Claim::one(3), &pi, &m).unwrap();
        assert!((b.p_min - 1.0).abs() < 1e-12 && (b.p_max - 1.0).abs() < 1e-12);

        let m4 = FiniteMarket::uniform(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let pi4 = PricingFunctional::from_density(&m4, &StatePriceDensity::one(4), &[0.0, 1.0]).unwrap();
        let b = price_bounds(&Claim::new(vec![0.0, 1.0, 2.0, 2.0]), &pi4, &m4).unwrap();
        assert!(!b.unique);
        // cell {1,2} carries price mass 1/2; g moves between 1 and 2 inside it
        assert!((b.p_min - 1.0).abs() < 1e-9, "{}", b.p_min);
        assert!((b.p_max - 1.5).abs() < 1e-9, "{}", b.p_max);
        assert!(b.p_min <= b.p_min_strict && b.p_max_strict <= b.p_max);
        for y in [&b.lower_certificate, &b.upper_certificate] {
            assert!(y.is_strict());
            assert!(pi4.repricing_error(&m4, y, b.lambda).unwrap() < 1e-8);
        }
    }

    #[test]
    fn extension_examples() {
        let m = m012();
        let pi = PricingFunctional::from_density(&m, &StatePriceDensity::one(3), &[0.0, 1.0]).unwrap();
        let p = extend_by_arbitrage(&Claim::new(vec![0.0, 1.0, 4.0]), &pi, &m).unwrap();
        assert!((p - 5.0 / 3.0).abs() < 1e-9);
        let p = extend_by_arbitrage(&put(1.0).payoff(&m), &pi, &m).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-9);
        let port = OptionPortfolio::call(1.0).scale(3.0).plus(&OptionPortfolio::cash_only(-0.5));
        let p = extend_by_arbitrage(&port.payoff(&m), &pi, &m).unwrap();
        assert!((p - (3.0 * pi.calls()[1].price - 0.5 * pi.bond())).abs() < 1e-9);

        let m4 = FiniteMarket::uniform(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let pi4 = PricingFunctional::from_density(&m4, &StatePriceDensity::one(4), &[0.0, 1.0]).unwrap();
        assert_eq!(
            extend_by_arbitrage(&Claim::new(vec![0.0, 1.0, 2.0, 2.0]), &pi4, &m4),
            Err(Error::NotMeasurable { first: 1, second: 2 })
        );
        // only one strike: the level f = 1 is not separated from f = 2
        let coarse = PricingFunctional::from_density(&m, &StatePriceDensity::one(3), &[0.0]).unwrap();
        assert!(matches!(
            extend_by_arbitrage(&Claim::new(vec![0.0, 1.0, 4.0]), &coarse, &m),
            Err(Error::NotDeterminedByArbitrage { .. })
        ));
        let bad = quotes(1.0, &[(0.0, 1.0), (1.0, 0.9)]);
        assert_eq!(extend_by_arbitrage(&Claim::one(3), &bad, &m), Err(Error::FreeLunchPresent));
    }
}
