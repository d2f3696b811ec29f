//! Explicit option portfolios that reach a target claim: call-spread
//! indicators, dyadic staircases, and exact piecewise-linear replication.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{conditional_expectation, Claim, FiniteMarket};
use crate::span::{is_in_span, Leg, MembershipResult, OptionPortfolio};
use crate::topology::{convergence_report, ConvergenceReport, NormSpec, PairingBank};

/// `slope (f - r)^+ - slope (f - r - 1/slope)^+`, which equals
/// `min(slope (f - r)^+, 1)` pointwise.
fn call_spread(r: f64, slope: f64) -> OptionPortfolio {
    OptionPortfolio::new(
        0.0,
        vec![Leg { strike: r, weight: slope }, Leg { strike: r + 1.0 / slope, weight: -slope }],
    )
    .expect("finite strikes")
}

/// `n (f - r)^+ ∧ 1` as a call spread; increases to the indicator of
/// `{f > r}` and hits it exactly once `1/n` is below the gap above `r`.
pub fn indicator_ladder(r: f64, n: u32) -> Result<OptionPortfolio> {
    if n < 1 {
        return Err(Error::InvalidN);
    }
    if !r.is_finite() {
        return Err(Error::NonFinite { what: "threshold" });
    }
    Ok(call_spread(r, n as f64))
}

/// Distance from `r` to the nearest underlying value strictly above it.
pub fn gap_above(market: &FiniteMarket, r: f64) -> Option<f64> {
    market.underlying().values().iter().filter(|&&f| f > r).map(|&f| f - r).reduce(f64::min)
}

struct LevelValues {
    values: Vec<f64>,
    targets: Vec<f64>,
}

fn level_values(target: &Claim, market: &FiniteMarket) -> Result<LevelValues> {
    target.check_len(market.len())?;
    let part = market.sigma_f();
    if let Some((first, second)) = part.measurability_violation(target) {
        return Err(Error::NotMeasurable { first, second });
    }
    let levels = market.levels();
    Ok(LevelValues {
        values: levels.iter().map(|l| l.value).collect(),
        targets: levels.iter().map(|l| target[l.states[0]]).collect(),
    })
}

/// The `n`-th monotone staircase for a nonnegative sigma(f)-measurable
/// target `h(f)`: levels are rounded down to the grid of step
/// `max(h) / 2^n`, and each jump is placed with a call spread of width
/// `min(1/n, gap/2)` at the level below, where `gap` is the smallest spacing
/// of distinct underlying values. That width is below the gap, so every
/// spread is already saturated at the next level.
pub fn simple_ladder(target: &Claim, market: &FiniteMarket, n: u32) -> Result<OptionPortfolio> {
    if n < 1 {
        return Err(Error::InvalidN);
    }
    if let Some((index, &value)) = target.values().iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeTarget { index, value });
    }
    let lv = level_values(target, market)?;
    let top = lv.targets.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return Ok(OptionPortfolio::zero());
    }
    let step = top * 0.5f64.powi(n as i32);
    let rounded: Vec<f64> = lv.targets.iter().map(|h| step * (h / step).floor()).collect();
    let gap = lv.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let slope = if gap.is_finite() && 2.0 / gap > n as f64 { 2.0 / gap } else { n as f64 };

    let mut port = OptionPortfolio::cash_only(rounded[0]);
    for j in 1..rounded.len() {
        let jump = rounded[j] - rounded[j - 1];
        if jump != 0.0 {
            port = port.plus(&call_spread(lv.values[j - 1], slope).scale(jump));
        }
    }
    Ok(port)
}

/// [`simple_ladder`] applied to the positive and negative parts separately.
pub fn signed_ladder(target: &Claim, market: &FiniteMarket, n: u32) -> Result<OptionPortfolio> {
    let up = simple_ladder(&target.positive_part(), market, n)?;
    let down = simple_ladder(&target.negative_part(), market, n)?;
    Ok(up.minus(&down))
}

/// Signed ladders for `n = 1, 2, ...` up to `n_max`, stopping early at the
/// first element whose payoff reproduces the target to within `1e-12`
/// relative to the target's size.
pub fn ladder_sequence(target: &Claim, market: &FiniteMarket, n_max: u32) -> Result<Vec<OptionPortfolio>> {
    if n_max < 1 {
        return Err(Error::InvalidN);
    }
    let scale = target.max_abs().max(1.0);
    let mut out = Vec::new();
    for n in 1..=n_max {
        let port = signed_ladder(target, market, n)?;
        let done = port.payoff(market).sup_distance(target) <= 1e-12 * scale;
        out.push(port);
        if done {
            break;
        }
    }
    Ok(out)
}

/// The unique portfolio with strikes at the distinct underlying values
/// (all but the largest) that reproduces a sigma(f)-measurable target:
/// cash equals the target at the lowest level, the first call carries the
/// first slope, and each further call the change in slope.
pub fn exact_replicate(target: &Claim, market: &FiniteMarket) -> Result<OptionPortfolio> {
    let lv = level_values(target, market)?;
    let (v, h) = (&lv.values, &lv.targets);
    let mut legs = Vec::with_capacity(v.len());
    let mut prev_slope = 0.0;
    for j in 0..v.len().saturating_sub(1) {
        let slope = (h[j + 1] - h[j]) / (v[j + 1] - v[j]);
        legs.push(Leg { strike: v[j], weight: slope - prev_slope });
        prev_slope = slope;
    }
    OptionPortfolio::new(h[0], legs)
}

/// Per-target result of [`completion_demo`].
#[derive(Debug, Clone, Serialize)]
pub struct CompletionOutcome {
    pub index: usize,
    pub replicable: bool,
    /// Exact replicating portfolio of the target, or of its projection
    /// onto sigma(f) when the target is not replicable.
    pub portfolio: OptionPortfolio,
    pub certificate: Option<MembershipResult>,
    pub projection: Option<Claim>,
    pub report: ConvergenceReport,
}

/// For each target, the ladder sequence toward it (or toward its
/// conditional expectation given sigma(f) when it is not in the span) and
/// its error report measured against the target itself.
pub fn completion_demo(
    market: &FiniteMarket,
    targets: &[Claim],
    norms: &[NormSpec],
    bank: &PairingBank,
    n_max: u32,
) -> Result<Vec<CompletionOutcome>> {
    targets
        .par_iter()
        .enumerate()
        .map(|(index, target)| {
            let membership = is_in_span(target, market)?;
            let (replicable, aim, projection, certificate) = match membership {
                MembershipResult::Member { .. } => (true, target.clone(), None, None),
                cert @ MembershipResult::NonMember { .. } => {
                    let proj = conditional_expectation(target, &market.sigma_f(), market)?;
                    (false, proj.clone(), Some(proj), Some(cert))
                }
            };
            let seq = ladder_sequence(&aim, market, n_max)?;
            let payoffs: Vec<Claim> = seq.iter().map(|p| p.payoff(market)).collect();
            let report = convergence_report(&payoffs, target, market, norms, bank)?;
            let portfolio = exact_replicate(&aim, market)?;
            Ok(CompletionOutcome { index, replicable, portfolio, certificate, projection, report })
        })
        .collect()
}
