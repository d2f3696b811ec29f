//! Numerical tolerances shared across modules.

/// Relative tolerance for treating two payoff values as the same level.
pub const LEVEL_REL: f64 = 1e-9;

/// Allowed drift of the probability sum before a market is rejected.
pub const PROB_SUM: f64 = 1e-12;

/// Final-error threshold for flagging a convergence mode as converged.
pub const CONVERGED: f64 = 1e-8;

/// Relative width at which Luxemburg bisection stops.
pub const LUXEMBURG_WIDTH: f64 = 1e-12;

/// Pointwise agreement for algebraic payoff identities.
pub const IDENTITY: f64 = 1e-12;

/// Relative gap below which consistent prices are declared unique.
pub const UNIQUE_REL: f64 = 1e-8;

/// Lower bound on density weights in the strict (open-set) price bound LPs.
pub const DENSITY_FLOOR: f64 = 1e-7;

/// Smallest separation margin accepted as evidence of no free lunch.
pub const NFL_MARGIN: f64 = 1e-10;

/// `a` and `b` are the same level: `|a-b| <= LEVEL_REL * max(1, |a|, |b|)`.
pub fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_REL * 1f64.max(a.abs()).max(b.abs())
}
