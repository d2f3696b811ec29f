//! Gauges for the three ways a sequence of claims can approach a target:
//! pointwise (the a.e. mode on atoms), in a lattice norm, and weakly against
//! a bank of state-price densities.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::market::{Claim, FiniteMarket};
use crate::tol;

/// Young functions available for Orlicz norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungFunction {
    /// `t^p` with `p >= 1`.
    Power(f64),
    /// `exp(t) - 1`.
    Exp,
    /// `t * ln(1 + t)`.
    XLog,
}

impl YoungFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            YoungFunction::Power(p) => t.powf(p),
            YoungFunction::Exp => t.exp_m1(),
            YoungFunction::XLog => t * t.ln_1p(),
        }
    }
}

/// Which norm to measure errors in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    Lp(f64),
    Linf,
    Orlicz(YoungFunction),
}

impl NormSpec {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidNormSpec(format!("Lp:{p}")));
        }
        Ok(NormSpec::Lp(p))
    }

    pub fn orlicz_pow(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::InvalidNormSpec(format!("Orlicz:pow:{p}")));
        }
        Ok(NormSpec::Orlicz(YoungFunction::Power(p)))
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Lp(p) if *p == 1.0 => write!(f, "L1"),
            NormSpec::Lp(p) if *p == 2.0 => write!(f, "L2"),
            NormSpec::Lp(p) => write!(f, "Lp:{p}"),
            NormSpec::Linf => write!(f, "Linf"),
            NormSpec::Orlicz(YoungFunction::Exp) => write!(f, "Orlicz:exp"),
            NormSpec::Orlicz(YoungFunction::XLog) => write!(f, "Orlicz:xlog"),
            NormSpec::Orlicz(YoungFunction::Power(p)) => write!(f, "Orlicz:pow:{p}"),
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidNormSpec(s.to_string());
        let parse_p = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["L1"] => Ok(NormSpec::Lp(1.0)),
            ["L2"] => Ok(NormSpec::Lp(2.0)),
            ["Linf"] => Ok(NormSpec::Linf),
            ["Lp", p] => NormSpec::lp(parse_p(p)?).map_err(|_| bad()),
            ["Orlicz", "exp"] => Ok(NormSpec::Orlicz(YoungFunction::Exp)),
            ["Orlicz", "xlog"] => Ok(NormSpec::Orlicz(YoungFunction::XLog)),
            ["Orlicz", "pow", p] => NormSpec::orlicz_pow(parse_p(p)?).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Parses a comma separated list such as `"L1,L2,Orlicz:exp"`.
pub fn parse_norm_list(s: &str) -> Result<Vec<NormSpec>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

/// Norm of a claim on a finite market.
pub fn norm(claim: &Claim, market: &FiniteMarket, spec: NormSpec) -> Result<f64> {
    claim.check_len(market.len())?;
    let scale = claim.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let p = market.probs();
    Ok(match spec {
        NormSpec::Linf => scale,
        NormSpec::Lp(q) => {
            let s: f64 = claim.values().iter().zip(p).map(|(x, w)| w * (x.abs() / scale).powf(q)).sum();
            scale * s.powf(1.0 / q)
        }
        NormSpec::Orlicz(phi) => luxemburg(claim.values(), p, phi),
    })
}

fn modular(x: &[f64], p: &[f64], phi: YoungFunction, lambda: f64) -> f64 {
    x.iter().zip(p).map(|(v, w)| w * phi.eval(v.abs() / lambda)).sum()
}

/// `inf { lambda > 0 : sum p_i phi(|x_i| / lambda) <= 1 }` by bisection.
/// `x` must not be identically zero.
fn luxemburg(x: &[f64], p: &[f64], phi: YoungFunction) -> f64 {
    let mut hi = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    while modular(x, p, phi, hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi / 2.0;
    while modular(x, p, phi, lo) <= 1.0 {
        hi = lo;
        lo /= 2.0;
    }
    // modular(lo) > 1 >= modular(hi)
    while hi - lo > tol::LUXEMBURG_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if modular(x, p, phi, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// A nonnegative state-price density; prices are `sum x_i y_i p_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePriceDensity {
    weights: Vec<f64>,
    strict: bool,
}

impl StatePriceDensity {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { what: "density weights" });
        }
        if let Some(index) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::NegativeDensity { index });
        }
        let strict = weights.iter().all(|&w| w > 0.0);
        Ok(StatePriceDensity { weights, strict })
    }

    pub fn one(n: usize) -> Self {
        StatePriceDensity { weights: vec![1.0; n], strict: n > 0 }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `sum x_i y_i p_i`.
pub fn pair(claim: &Claim, density: &StatePriceDensity, market: &FiniteMarket) -> Result<f64> {
    claim.check_len(market.len())?;
    if density.weights.len() != market.len() {
        return Err(Error::DimensionMismatch { expected: market.len(), got: density.weights.len() });
    }
    Ok(claim.values().iter().zip(&density.weights).zip(market.probs()).map(|((x, y), p)| x * y * p).sum())
}

/// A finite family of densities standing in for the order continuous dual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairingBank {
    densities: Vec<StatePriceDensity>,
}

impl PairingBank {
    pub fn new(densities: Vec<StatePriceDensity>) -> Result<Self> {
        if !densities.iter().any(StatePriceDensity::is_strict) {
            return Err(Error::NoStrictlyPositiveDensity);
        }
        Ok(PairingBank { densities })
    }

    /// The constant density, `strict` random strictly positive densities, and
    /// `sparse` random nonnegative densities with some zero weights.
    pub fn random<R: Rng>(n: usize, strict: usize, sparse: usize, rng: &mut R) -> Self {
        let mut densities = vec![StatePriceDensity::one(n)];
        for _ in 0..strict {
            let w = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            densities.push(StatePriceDensity::new(w).expect("positive weights"));
        }
        for _ in 0..sparse {
            let mut w: Vec<f64> =
                (0..n).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0.1..2.0) } else { 0.0 }).collect();
            if w.iter().all(|&x| x == 0.0) {
                let i = rng.gen_range(0..n);
                w[i] = 1.0;
            }
            densities.push(StatePriceDensity::new(w).expect("nonnegative weights"));
        }
        PairingBank { densities }
    }

    /// 1 constant, 8 strictly positive, 4 sparse densities.
    pub fn default_for<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self::random(n, 8, 4, rng)
    }

    pub fn densities(&self) -> &[StatePriceDensity] {
        &self.densities
    }
}

/// Errors of one sequence element against the target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub sup_err: f64,
    pub norm_errs: Vec<f64>,
    /// `|<g_n - g, y>|` per bank density.
    pub pairing_errs: Vec<f64>,
    /// `<|g_n - g|, y>` per bank density, when enabled.
    pub abs_pairing_errs: Option<Vec<f64>>,
}

impl ReportRow {
    pub fn pairing_max_err(&self) -> f64 {
        self.pairing_errs.iter().copied().fold(0.0, f64::max)
    }

    pub fn abs_pairing_max_err(&self) -> Option<f64> {
        self.abs_pairing_errs.as_ref().map(|v| v.iter().copied().fold(0.0, f64::max))
    }
}

/// Which modes count as converged at the final element.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergedFlags {
    pub sup: bool,
    pub norms: Vec<bool>,
    /// Vanishing error against every strictly positive bank density.
    pub pairing: bool,
}

impl ConvergedFlags {
    pub fn all(&self) -> bool {
        self.sup && self.pairing && self.norms.iter().all(|&b| b)
    }

    /// All modes agree, converged or not.
    pub fn agree(&self) -> bool {
        self.norms.iter().all(|&b| b == self.sup) && self.pairing == self.sup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub norm_names: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub converged: ConvergedFlags,
}

impl ConvergenceReport {
    pub fn last(&self) -> &ReportRow {
        self.rows.last().expect("reports are never empty")
    }

    fn flags_for(&self, row: &ReportRow, bank: &PairingBank) -> ConvergedFlags {
        let small = |e: f64| e < tol::CONVERGED;
        let strict: Vec<usize> =
            bank.densities.iter().enumerate().filter(|(_, d)| d.is_strict()).map(|(i, _)| i).collect();
        let pairing = strict.iter().all(|&k| {
            small(row.pairing_errs[k]) && row.abs_pairing_errs.as_ref().is_none_or(|a| small(a[k]))
        });
        ConvergedFlags { sup: small(row.sup_err), norms: row.norm_errs.iter().map(|&e| small(e)).collect(), pairing }
    }

    /// CSV with one row per sequence element. Floats use the shortest
    /// representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,sup_err");
        for name in &self.norm_names {
            out.push_str(&format!(",{name}_err"));
        }
        out.push_str(",pairing_max_err");
        let with_abs = self.rows.first().is_some_and(|r| r.abs_pairing_errs.is_some());
        if with_abs {
            out.push_str(",abs_pairing_max_err");
        }
        out.push_str(",converged_flags\n");
        for row in &self.rows {
            out.push_str(&format!("{},{:?}", row.n, row.sup_err));
            for e in &row.norm_errs {
                out.push_str(&format!(",{e:?}"));
            }
            out.push_str(&format!(",{:?}", row.pairing_max_err()));
            if let Some(a) = row.abs_pairing_max_err() {
                out.push_str(&format!(",{a:?}"));
            }
            let small = |e: f64| e < tol::CONVERGED;
            let mut flags = vec![format!("sup={}", small(row.sup_err) as u8)];
            for (name, e) in self.norm_names.iter().zip(&row.norm_errs) {
                flags.push(format!("{name}={}", small(*e) as u8));
            }
            let pair_ok = small(row.pairing_max_err()) && row.abs_pairing_max_err().is_none_or(small);
            flags.push(format!("pairing={}", pair_ok as u8));
            out.push_str(&format!(",{}\n", flags.join(";")));
        }
        out
    }
}

/// Options for [`convergence_report`].
#[derive(Debug, Clone, Copy)]
pub struct ReportOptions {
    pub absolute_pairing: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { absolute_pairing: true }
    }
}

/// Error curves of `sequence` against `target` in every requested mode.
pub fn convergence_report(
    sequence: &[Claim],
    target: &Claim,
    market: &FiniteMarket,
    norms: &[NormSpec],
    bank: &PairingBank,
) -> Result<ConvergenceReport> {
    convergence_report_with(sequence, target, market, norms, bank, ReportOptions::default())
}

pub fn convergence_report_with(
    sequence: &[Claim],
    target: &Claim,
    market: &FiniteMarket,
    norms: &[NormSpec],
    bank: &PairingBank,
    opts: ReportOptions,
) -> Result<ConvergenceReport> {
    if sequence.is_empty() {
        return Err(Error::EmptySequence);
    }
    target.check_len(market.len())?;
    for d in &bank.densities {
        if d.weights.len() != market.len() {
            return Err(Error::DimensionMismatch { expected: market.len(), got: d.weights.len() });
        }
    }
    let mut rows = Vec::with_capacity(sequence.len());
    for (k, g) in sequence.iter().enumerate() {
        g.check_len(market.len())?;
        let diff = g - target;
        let abs = diff.abs();
        let norm_errs = norms.iter().map(|&s| norm(&diff, market, s)).collect::<Result<Vec<_>>>()?;
        let pairing_errs =
            bank.densities.iter().map(|d| pair(&diff, d, market).map(f64::abs)).collect::<Result<Vec<_>>>()?;
        let abs_pairing_errs = if opts.absolute_pairing {
            Some(bank.densities.iter().map(|d| pair(&abs, d, market)).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        rows.push(ReportRow { n: k + 1, sup_err: diff.max_abs(), norm_errs, pairing_errs, abs_pairing_errs });
    }
    let mut report = ConvergenceReport {
        norm_names: norms.iter().map(ToString::to_string).collect(),
        rows,
        converged: ConvergedFlags { sup: false, norms: vec![], pairing: false },
    };
    report.converged = report.flags_for(report.last(), bank);
    Ok(report)
}
