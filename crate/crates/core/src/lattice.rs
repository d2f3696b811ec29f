//! Finite-model checks of the order-theoretic facts behind option spanning:
//! the order closure of a sublattice containing the constants is the set of
//! claims measurable with respect to the sublattice's own information, and
//! order closure can be tested along increasing sequences.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{sigma_of, Claim, FiniteMarket, Partition};
use crate::tol;

/// Generators of a sublattice of claims on `market`. The constant claim must
/// be among them.
#[derive(Debug, Clone)]
pub struct SublatticeSpec<'a> {
    generators: Vec<Claim>,
    market: &'a FiniteMarket,
}

impl<'a> SublatticeSpec<'a> {
    pub fn new(generators: Vec<Claim>, market: &'a FiniteMarket) -> Result<Self> {
        for g in &generators {
            g.check_len(market.len())?;
            if !g.all_finite() {
                return Err(Error::NonFinite { what: "generator" });
            }
        }
        if !generators.iter().any(|g| g.values().iter().all(|&v| v == 1.0)) {
            return Err(Error::MissingOne);
        }
        Ok(SublatticeSpec { generators, market })
    }

    /// `{1, f}`.
    pub fn of_underlying(market: &'a FiniteMarket) -> Self {
        SublatticeSpec { generators: vec![Claim::one(market.len()), market.underlying().clone()], market }
    }

    pub fn generators(&self) -> &[Claim] {
        &self.generators
    }

    pub fn market(&self) -> &FiniteMarket {
        self.market
    }
}

/// Cells whose constant claims make up the order closure of the sublattice.
pub fn sublattice_closure_partition(spec: &SublatticeSpec<'_>) -> Partition {
    sigma_of(spec.market, &spec.generators).expect("lengths checked at construction")
}

/// `min(n (g - r)^+, 1)`.
fn threshold(g: &Claim, r: f64, n: f64) -> Claim {
    g.map(|v| (n * (v - r)).clamp(0.0, 1.0))
}

/// Indicator of each closure cell, built from the generators by
/// thresholding and pointwise minima, with the expression used.
#[derive(Debug, Clone)]
pub struct CellIndicators {
    pub partition: Partition,
    pub indicators: Vec<Claim>,
    pub expressions: Vec<String>,
}

/// For every cell `A` and generator `g`, cuts `g` just below and just above
/// its value on `A` with saturated call-spread thresholds
/// `min(n (g - r)^+, 1)`, and takes the pointwise minimum over generators of
/// `[g > r_low] ∧ (1 - [g > r_high])`.
pub fn cell_indicators(spec: &SublatticeSpec<'_>) -> CellIndicators {
    let partition = sublattice_closure_partition(spec);
    let n = spec.market.len();
    let mut indicators = Vec::with_capacity(partition.num_cells());
    let mut expressions = Vec::with_capacity(partition.num_cells());
    for cell in partition.cells() {
        let mut acc = Claim::one(n);
        let mut terms = Vec::new();
        for (j, g) in spec.generators.iter().enumerate() {
            let rep = g[cell[0]];
            let inside = |v: f64| tol::same_level(v, rep);
            let lo = cell.iter().map(|&i| g[i]).fold(f64::INFINITY, f64::min);
            let hi = cell.iter().map(|&i| g[i]).fold(f64::NEG_INFINITY, f64::max);
            let below = g.values().iter().copied().filter(|&v| v < rep && !inside(v)).reduce(f64::max);
            let above = g.values().iter().copied().filter(|&v| v > rep && !inside(v)).reduce(f64::min);
            if let Some(b) = below {
                let r = 0.5 * (b + lo);
                let slope = (2.0 / (lo - r)).floor() + 1.0;
                acc = acc.meet(&threshold(g, r, slope));
                terms.push(format!("({slope}(g{j} - {r:?})^+ ∧ 1)"));
            }
            if let Some(a) = above {
                let r = 0.5 * (hi + a);
                let slope = (2.0 / (a - r)).floor() + 1.0;
                acc = acc.meet(&(&Claim::one(n) - &threshold(g, r, slope)));
                terms.push(format!("(1 - ({slope}(g{j} - {r:?})^+ ∧ 1))"));
            }
        }
        indicators.push(acc);
        expressions.push(if terms.is_empty() { "1".to_string() } else { terms.join(" ∧ ") });
    }
    CellIndicators { partition, indicators, expressions }
}

impl CellIndicators {
    /// `sum_A x(rep_A) 1_A`, the simple combination of cell indicators
    /// matching `x` at each cell's first state.
    pub fn simple_combination(&self, x: &Claim) -> Claim {
        let n = self.partition.num_states();
        let mut out = Claim::zeros(n);
        for (cell, ind) in self.partition.cells().iter().zip(&self.indicators) {
            out = &out + &(x[cell[0]] * ind);
        }
        out
    }

    /// Whether `x` is reached exactly by a simple combination of cell
    /// indicators.
    pub fn closure_membership(&self, x: &Claim) -> bool {
        self.simple_combination(x).sup_distance(x) <= tol::IDENTITY * x.max_abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<usize>>,
    pub expression: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub trial: usize,
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub states: Option<(usize, usize)>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub trials: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    pub witnesses: Vec<Witness>,
    pub seed: u64,
    pub tolerances: BTreeMap<String, f64>,
    pub version: String,
}

impl VerificationReport {
    pub fn new(lemma: &str, trials: usize, seed: u64, tolerances: &[(&str, f64)]) -> Self {
        VerificationReport {
            lemma: lemma.to_string(),
            trials,
            passed: true,
            counterexample: None,
            witnesses: Vec::new(),
            seed,
            tolerances: tolerances.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            version: crate::VERSION.to_string(),
        }
    }

    pub fn fail(&mut self, c: Counterexample) {
        self.passed = false;
        if self.counterexample.is_none() {
            self.counterexample = Some(c);
        }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn random_cell_constant<R: Rng>(part: &Partition, rng: &mut R, lo: f64, hi: f64) -> Claim {
    let values: Vec<f64> = (0..part.num_cells()).map(|_| rng.gen_range(lo..hi)).collect();
    part.claim_from_cell_values(&values)
}

fn first_failure(failures: Vec<Option<Counterexample>>) -> Option<Counterexample> {
    failures.into_iter().flatten().next()
}

/// Checks both inclusions of the closure characterization: each cell
/// indicator is an exact lattice expression in the generators, and each
/// claim constant on cells is a simple combination of those indicators.
/// Random claims then confirm that reachability and measurability agree.
pub fn verify_green_jarrow(spec: &SublatticeSpec<'_>, trials: usize, seed: u64) -> VerificationReport {
    let mut report = VerificationReport::new("green-jarrow", trials, seed, &[("identity", tol::IDENTITY), ("level_rel", tol::LEVEL_REL)]);
    let ci = cell_indicators(spec);
    let n = spec.market.len();
    for (c, (cell, (ind, expr))) in ci.partition.cells().iter().zip(ci.indicators.iter().zip(&ci.expressions)).enumerate() {
        let chi = Claim::indicator(n, cell);
        if *ind != chi {
            report.fail(Counterexample {
                trial: 0,
                check: "cell indicator".into(),
                cell: Some(cell.clone()),
                states: None,
                detail: format!("cell {c}: constructed {:?} differs from the indicator", ind.values()),
            });
        }
        report.witnesses.push(Witness { cell: Some(cell.clone()), expression: expr.clone() });
    }
    for (j, g) in spec.generators.iter().enumerate() {
        if !ci.closure_membership(g) {
            report.fail(Counterexample {
                trial: 0,
                check: "generator reconstruction".into(),
                cell: None,
                states: None,
                detail: format!("generator {j} is not a combination of cell indicators"),
            });
        }
    }

    let failures: Vec<Option<Counterexample>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let x = random_cell_constant(&ci.partition, &mut rng, -2.0, 2.0);
            if !ci.closure_membership(&x) {
                return Some(Counterexample {
                    trial: t,
                    check: "cell-constant reconstruction".into(),
                    cell: None,
                    states: None,
                    detail: format!("{:?}", x.values()),
                });
            }
            let y = Claim::new((0..n).map(|_| rng.gen_range(-1i32..=1) as f64).collect());
            let measurable = ci.partition.measurability_violation(&y).is_none();
            if measurable != ci.closure_membership(&y) {
                return Some(Counterexample {
                    trial: t,
                    check: "membership agreement".into(),
                    cell: None,
                    states: ci.partition.measurability_violation(&y),
                    detail: format!("{:?}: measurable={measurable}", y.values()),
                });
            }
            None
        })
        .collect();
    if let Some(c) = first_failure(failures) {
        report.fail(c);
    }
    report
}

/// Replaces one coordinate of `x` by `x - 1`, inside a cell with at least
/// two states when there is one.
fn inject_fault(x: &mut Claim, part: &Partition) {
    let state = part.cells().iter().find(|c| c.len() >= 2).map(|c| c[1]).unwrap_or(0);
    let mut v = x.values().to_vec();
    v[state] -= 1.0;
    *x = Claim::new(v);
}

fn check_sup(
    trial: usize,
    what: &str,
    seq: &[Claim],
    sup: &Claim,
    part: &Partition,
) -> Option<Counterexample> {
    if let Some(x) = seq.iter().find(|x| x.values().iter().zip(sup.values()).any(|(a, s)| a > s)) {
        let state = x.values().iter().zip(sup.values()).position(|(a, s)| a > s).unwrap();
        return Some(Counterexample {
            trial,
            check: format!("{what}: upper bound"),
            cell: Some(part.cells()[part.cell_of(state)].clone()),
            states: None,
            detail: format!("limit {:?} is below a sequence term at state {state}", sup.values()),
        });
    }
    part.measurability_violation(sup).map(|(a, b)| Counterexample {
        trial,
        check: format!("{what}: constant on cells"),
        cell: Some(part.cells()[part.cell_of(a)].clone()),
        states: Some((a, b)),
        detail: format!("limit {:?} differs at states {a} and {b}", sup.values()),
    })
}

/// Supremum of a finite family by componentwise join.
fn join_all(seq: &[Claim]) -> Claim {
    seq.iter().skip(1).fold(seq[0].clone(), |acc, x| acc.join(x))
}

/// Runs three families of sequences inside the closure and checks that each
/// limit stays constant on cells: increasing bounded sequences of
/// cell-constant claims, indicator ladders `min(n (g - r)^+, 1)` in a
/// generator, and sequences `x + 4^-k z` decreasing to a cell-constant `x`.
/// With `mutate`, every computed supremum is corrupted before checking, so
/// a passing run means the checks are blind.
pub fn verify_order_closed_iff_sequential(
    spec: &SublatticeSpec<'_>,
    trials: usize,
    seed: u64,
    mutate: bool,
) -> VerificationReport {
    let mut report = VerificationReport::new(
        "o-closed",
        trials,
        seed,
        &[("identity", tol::IDENTITY), ("level_rel", tol::LEVEL_REL)],
    );
    let part = sublattice_closure_partition(spec);
    let results: Vec<(Option<Counterexample>, String)> = (0..trials.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);

            let len = rng.gen_range(2..40);
            let mut x = random_cell_constant(&part, &mut rng, -1.0, 1.0);
            let mut seq = vec![x.clone()];
            for k in 1..len {
                let step = random_cell_constant(&part, &mut rng, 0.0, 1.0);
                x = &x + &(0.5f64.powi(k) * &step);
                seq.push(x.clone());
            }
            let mut sup = join_all(&seq);
            if mutate {
                inject_fault(&mut sup, &part);
            }
            if let Some(c) = check_sup(t, "increasing sequence", &seq, &sup, &part) {
                return (Some(c), String::new());
            }

            let g = &spec.generators[rng.gen_range(0..spec.generators.len())];
            let mut levels: Vec<f64> = g.values().to_vec();
            levels.sort_by(f64::total_cmp);
            levels.dedup_by(|a, b| tol::same_level(*a, *b));
            let ladder_note = if levels.len() >= 2 {
                let i = rng.gen_range(0..levels.len() - 1);
                let r = 0.5 * (levels[i] + levels[i + 1]);
                let gap = levels[i + 1] - r;
                let top = ((1.0 / gap).floor() as usize + 2).min(1 << 20);
                let mut ns: Vec<f64> = (1..=top.min(64)).map(|k| k as f64).collect();
                ns.push(top as f64);
                let seq: Vec<Claim> = ns.iter().map(|&s| threshold(g, r, s)).collect();
                let mut sup = join_all(&seq);
                if mutate {
                    inject_fault(&mut sup, &part);
                }
                if let Some(c) = check_sup(t, "indicator ladder", &seq, &sup, &part) {
                    return (Some(c), String::new());
                }
                let chi = g.map(|v| if v > r { 1.0 } else { 0.0 });
                if sup != chi {
                    return (
                        Some(Counterexample {
                            trial: t,
                            check: "indicator ladder: saturation".into(),
                            cell: None,
                            states: None,
                            detail: format!("sup {:?} is not the indicator of g > {r}", sup.values()),
                        }),
                        String::new(),
                    );
                }
                format!("indicator ladder at r = {r:?} saturates at n = {top}")
            } else {
                "constant generator, no ladder".to_string()
            };

            let base = random_cell_constant(&part, &mut rng, -1.0, 1.0);
            let z = random_cell_constant(&part, &mut rng, 0.0, 1.0);
            let seq: Vec<Claim> = (0..60).map(|k| &base + &(0.25f64.powi(k) * &z)).collect();
            let mut inf = seq.iter().skip(1).fold(seq[0].clone(), |acc, x| acc.meet(x));
            if mutate {
                inject_fault(&mut inf, &part);
            }
            let lower_ok = seq.iter().all(|x| x.values().iter().zip(inf.values()).all(|(a, m)| a >= m));
            if let Some((a, b)) = part.measurability_violation(&inf) {
                return (
                    Some(Counterexample {
                        trial: t,
                        check: "decreasing sequence: constant on cells".into(),
                        cell: Some(part.cells()[part.cell_of(a)].clone()),
                        states: Some((a, b)),
                        detail: format!("limit {:?}", inf.values()),
                    }),
                    String::new(),
                );
            }
            if !lower_ok || inf.sup_distance(&base) > tol::IDENTITY * base.max_abs().max(1.0) {
                return (
                    Some(Counterexample {
                        trial: t,
                        check: "decreasing sequence: limit".into(),
                        cell: None,
                        states: None,
                        detail: format!("limit {:?} differs from {:?}", inf.values(), base.values()),
                    }),
                    String::new(),
                );
            }
            (None, format!("trial {t}: increasing sequence of {len} terms; {ladder_note}"))
        })
        .collect();

    for (fail, note) in results {
        match fail {
            Some(c) => report.fail(c),
            None if report.witnesses.len() < 5 => report.witnesses.push(Witness { cell: None, expression: note }),
            None => {}
        }
    }
    report
}
