//! Finite probability spaces, claims, and the level-set partitions that play
//! the role of sub-sigma-algebras on atoms.
//!
//! Every atom carries strictly positive mass, so "equal almost everywhere"
//! is plain vector equality and there is no null-set quotient to manage.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::tol;

/// A state-indexed payoff vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Claim(Vec<f64>);

impl Claim {
    pub fn new(payoffs: Vec<f64>) -> Self {
        Claim(payoffs)
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Claim(vec![value; n])
    }

    /// The riskless claim paying 1 in every state.
    pub fn one(n: usize) -> Self {
        Self::constant(n, 1.0)
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    pub fn indicator(n: usize, states: &[usize]) -> Self {
        let mut v = vec![0.0; n];
        for &i in states {
            v[i] = 1.0;
        }
        Claim(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Claim {
        Claim(self.0.iter().map(|&x| f(x)).collect())
    }

    pub fn zip_with(&self, other: &Claim, f: impl Fn(f64, f64) -> f64) -> Claim {
        assert_eq!(self.len(), other.len(), "claim dimensions differ");
        Claim(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    /// Pointwise minimum (lattice meet).
    pub fn meet(&self, other: &Claim) -> Claim {
        self.zip_with(other, f64::min)
    }

    /// Pointwise maximum (lattice join).
    pub fn join(&self, other: &Claim) -> Claim {
        self.zip_with(other, f64::max)
    }

    pub fn abs(&self) -> Claim {
        self.map(f64::abs)
    }

    pub fn positive_part(&self) -> Claim {
        self.map(|x| x.max(0.0))
    }

    pub fn negative_part(&self) -> Claim {
        self.map(|x| (-x).max(0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest pointwise distance to `other`.
    pub fn sup_distance(&self, other: &Claim) -> f64 {
        self.zip_with(other, |a, b| a - b).max_abs()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.0.iter().all(|&x| x >= 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: self.len() });
        }
        Ok(())
    }
}

impl Index<usize> for Claim {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for Claim {
    fn from(v: Vec<f64>) -> Self {
        Claim(v)
    }
}

impl Add for &Claim {
    type Output = Claim;
    fn add(self, rhs: &Claim) -> Claim {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Claim {
    type Output = Claim;
    fn sub(self, rhs: &Claim) -> Claim {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<&Claim> for f64 {
    type Output = Claim;
    fn mul(self, rhs: &Claim) -> Claim {
        rhs.map(|x| self * x)
    }
}

impl Neg for &Claim {
    type Output = Claim;
    fn neg(self) -> Claim {
        self.map(|x| -x)
    }
}

/// A finite probability space with the payoff of a limited liability
/// underlying on each atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteMarket {
    probs: Vec<f64>,
    underlying: Claim,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// Validates and normalizes a market. Probabilities must be strictly
/// positive and sum to one within [`tol::PROB_SUM`]; they are then rescaled
/// so the stored sum is exactly one up to rounding.
pub fn build_market(probs: Vec<f64>, underlying: Vec<f64>) -> Result<FiniteMarket> {
    if probs.len() != underlying.len() {
        return Err(Error::DimensionMismatch { expected: probs.len(), got: underlying.len() });
    }
    if probs.is_empty() {
        return Err(Error::EmptyMarket);
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite { what: "probabilities" });
    }
    if underlying.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: "underlying" });
    }
    if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &p)| p <= 0.0) {
        return Err(Error::NonPositiveProbability { index, value });
    }
    if let Some((index, &value)) = underlying.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeUnderlying { index, value });
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tol::PROB_SUM {
        return Err(Error::ProbabilitiesDoNotSumToOne { sum });
    }
    let probs = probs.into_iter().map(|p| p / sum).collect();
    Ok(FiniteMarket { probs, underlying: Claim(underlying), labels: None })
}

impl FiniteMarket {
    /// Attaches display labels for the states.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Uniform probabilities over the given underlying values.
    pub fn uniform(underlying: Vec<f64>) -> Result<Self> {
        let n = underlying.len();
        let p = if n == 0 { 0.0 } else { 1.0 / n as f64 };
        let probs = vec![p; n];
        // the sum of n copies of 1/n can drift by a few ulps
        let sum: f64 = probs.iter().sum();
        build_market(probs.into_iter().map(|q| q / sum).collect(), underlying)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn underlying(&self) -> &Claim {
        &self.underlying
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `E[x] = sum p_i x_i`.
    pub fn expectation(&self, claim: &Claim) -> Result<f64> {
        claim.check_len(self.len())?;
        Ok(self.probs.iter().zip(claim.values()).map(|(p, x)| p * x).sum())
    }

    /// The level-set partition of the underlying, i.e. sigma(f).
    pub fn sigma_f(&self) -> Partition {
        Partition::from_generators(self.len(), std::slice::from_ref(&self.underlying))
    }

    /// Distinct levels of the underlying in increasing order together with
    /// the states on each level.
    pub fn levels(&self) -> Vec<Level> {
        let part = self.sigma_f();
        let mut levels: Vec<Level> = part
            .cells()
            .iter()
            .map(|cell| Level { value: self.underlying[cell[0]], states: cell.clone() })
            .collect();
        levels.sort_by(|a, b| a.value.total_cmp(&b.value));
        levels
    }
}

/// One distinct value of the underlying and the atoms where it is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub value: f64,
    pub states: Vec<usize>,
}

/// A partition of the state indices into disjoint nonempty cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    #[serde(skip)]
    cell_of: Vec<usize>,
}

impl Partition {
    /// Builds a partition from explicit cells; they must be disjoint,
    /// nonempty, and cover `0..n`.
    pub fn from_cells(n: usize, cells: Vec<Vec<usize>>) -> Option<Partition> {
        let mut cell_of = vec![usize::MAX; n];
        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return None;
            }
            for &i in cell {
                if i >= n || cell_of[i] != usize::MAX {
                    return None;
                }
                cell_of[i] = c;
            }
        }
        if cell_of.contains(&usize::MAX) {
            return None;
        }
        Some(Partition { cells, cell_of })
    }

    pub fn trivial(n: usize) -> Partition {
        Partition { cells: vec![(0..n).collect()], cell_of: vec![0; n] }
    }

    pub fn discrete(n: usize) -> Partition {
        Partition { cells: (0..n).map(|i| vec![i]).collect(), cell_of: (0..n).collect() }
    }

    /// Joint level sets of the generators. A state joins the first existing
    /// cell whose representative matches it on every generator, so cells are
    /// ordered by first appearance and members are in increasing order.
    fn from_generators(n: usize, generators: &[Claim]) -> Partition {
        let mut cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_of = vec![0; n];
        for i in 0..n {
            let found = cells.iter().position(|cell| {
                let rep = cell[0];
                generators.iter().all(|g| tol::same_level(g[rep], g[i]))
            });
            match found {
                Some(c) => {
                    cells[c].push(i);
                    cell_of[i] = c;
                }
                None => {
                    cell_of[i] = cells.len();
                    cells.push(vec![i]);
                }
            }
        }
        Partition { cells, cell_of }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, state: usize) -> usize {
        self.cell_of[state]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_states(&self) -> usize {
        self.cell_of.len()
    }

    /// Same cells regardless of cell order.
    pub fn same_as(&self, other: &Partition) -> bool {
        if self.num_states() != other.num_states() || self.num_cells() != other.num_cells() {
            return false;
        }
        (0..self.num_states()).all(|i| {
            (0..self.num_states()).all(|j| {
                (self.cell_of[i] == self.cell_of[j]) == (other.cell_of[i] == other.cell_of[j])
            })
        })
    }

    /// A pair of states in one cell on which `claim` differs, if any.
    pub fn measurability_violation(&self, claim: &Claim) -> Option<(usize, usize)> {
        for cell in &self.cells {
            let rep = cell[0];
            if let Some(&j) = cell.iter().find(|&&j| !tol::same_level(claim[rep], claim[j])) {
                return Some((rep, j));
            }
        }
        None
    }

    /// Expands per-cell values into a claim.
    pub fn claim_from_cell_values(&self, values: &[f64]) -> Claim {
        assert_eq!(values.len(), self.num_cells());
        Claim(self.cell_of.iter().map(|&c| values[c]).collect())
    }
}

/// The coarsest partition making every generator measurable.
pub fn sigma_of(market: &FiniteMarket, generators: &[Claim]) -> Result<Partition> {
    for g in generators {
        g.check_len(market.len())?;
    }
    Ok(Partition::from_generators(market.len(), generators))
}

/// Whether `claim` is constant on every cell of `part`.
pub fn is_measurable(claim: &Claim, part: &Partition) -> Result<bool> {
    claim.check_len(part.num_states())?;
    Ok(part.measurability_violation(claim).is_none())
}

/// Probability-weighted cell averages.
pub fn conditional_expectation(claim: &Claim, part: &Partition, market: &FiniteMarket) -> Result<Claim> {
    claim.check_len(market.len())?;
    if part.num_states() != market.len() {
        return Err(Error::DimensionMismatch { expected: market.len(), got: part.num_states() });
    }
    let p = market.probs();
    let averages: Vec<f64> = part
        .cells()
        .iter()
        .map(|cell| {
            let mass: f64 = cell.iter().map(|&i| p[i]).sum();
            let total: f64 = cell.iter().map(|&i| p[i] * claim[i]).sum();
            total / mass
        })
        .collect();
    Ok(part.claim_from_cell_values(&averages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn third() -> Vec<f64> {
        vec![1.0 / 3.0; 3]
    }

    #[test]
    fn builds_uniform_three_state_market() {
        let m = build_market(third(), vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.len(), 3);
        assert!((m.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_negative_underlying() {
        let err = build_market(vec![0.5, 0.5], vec![1.0, -1.0]).unwrap_err();
        assert_eq!(err, Error::NegativeUnderlying { index: 1, value: -1.0 });
    }

    #[test]
    fn constant_underlying_is_legal() {
        let m = build_market(vec![0.2, 0.8], vec![5.0, 5.0]).unwrap();
        assert_eq!(m.sigma_f().num_cells(), 1);
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(matches!(
            build_market(vec![0.0, 1.0], vec![1.0, 1.0]),
            Err(Error::NonPositiveProbability { index: 0, .. })
        ));
        assert!(matches!(
            build_market(vec![0.5, 0.6], vec![1.0, 1.0]),
            Err(Error::ProbabilitiesDoNotSumToOne { .. })
        ));
        assert!(matches!(build_market(vec![1.0], vec![1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(build_market(vec![], vec![]), Err(Error::EmptyMarket));
    }

    #[test]
    fn sigma_of_groups_equal_values() {
        let m = FiniteMarket::uniform(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let part = sigma_of(&m, &[m.underlying().clone()]).unwrap();
        assert_eq!(part.cells(), &[vec![0], vec![1, 2], vec![3]]);
    }

    #[test]
    fn sigma_of_constant_is_trivial() {
        let m = FiniteMarket::uniform(vec![3.0; 5]).unwrap();
        assert!(m.sigma_f().same_as(&Partition::trivial(5)));
    }

    #[test]
    fn sigma_of_two_generators_is_joint() {
        let m = FiniteMarket::uniform(vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let g = Claim::new(vec![0.0, 1.0, 0.0, 1.0]);
        let part = sigma_of(&m, &[m.underlying().clone(), g]).unwrap();
        assert!(part.same_as(&Partition::discrete(4)));
    }

    #[test]
    fn sigma_of_rejects_wrong_length() {
        let m = FiniteMarket::uniform(vec![0.0, 1.0]).unwrap();
        assert!(sigma_of(&m, &[Claim::one(3)]).is_err());
    }

    #[test]
    fn measurability_examples() {
        let part = Partition::from_cells(4, vec![vec![0], vec![1, 2], vec![3]]).unwrap();
        assert!(is_measurable(&Claim::new(vec![3.0, 5.0, 5.0, 7.0]), &part).unwrap());
        assert!(!is_measurable(&Claim::new(vec![3.0, 5.0, 6.0, 7.0]), &part).unwrap());
        assert!(is_measurable(&Claim::one(4), &part).unwrap());
        assert_eq!(part.measurability_violation(&Claim::new(vec![3.0, 5.0, 6.0, 7.0])), Some((1, 2)));
    }

    #[test]
    fn conditional_expectation_examples() {
        let m = FiniteMarket::uniform(vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let part = m.sigma_f();
        let g = Claim::new(vec![0.0, 1.0, 3.0, 2.0]);
        let e = conditional_expectation(&g, &part, &m).unwrap();
        assert!(e.sup_distance(&Claim::new(vec![0.0, 2.0, 2.0, 2.0])) < 1e-15);

        let m = build_market(vec![0.1, 0.2, 0.3, 0.4], vec![1.0; 4]).unwrap();
        let g = Claim::new(vec![1.0, -2.0, 4.0, 0.5]);
        let e = conditional_expectation(&g, &Partition::trivial(4), &m).unwrap();
        let expect = 0.1 - 0.4 + 1.2 + 0.2;
        assert!(e.sup_distance(&Claim::constant(4, expect)) < 1e-15);
    }

    #[test]
    fn partition_from_cells_validates() {
        assert!(Partition::from_cells(3, vec![vec![0, 1], vec![1, 2]]).is_none());
        assert!(Partition::from_cells(3, vec![vec![0, 1]]).is_none());
        assert!(Partition::from_cells(3, vec![vec![0, 1], vec![]]).is_none());
        assert!(Partition::from_cells(3, vec![vec![2], vec![0, 1]]).is_some());
    }

    fn market_and_claim() -> impl Strategy<Value = (FiniteMarket, Claim, Claim)> {
        (1usize..12)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.05f64..1.0, n),
                    prop::collection::vec(0u8..4, n),
                    prop::collection::vec(-5.0f64..5.0, n),
                    prop::collection::vec(-5.0f64..5.0, n),
                )
            })
            .prop_map(|(w, f, g, h)| {
                let s: f64 = w.iter().sum();
                let probs: Vec<f64> = w.iter().map(|x| x / s).collect();
                let s2: f64 = probs.iter().sum();
                let probs = probs.iter().map(|x| x / s2).collect();
                let m = build_market(probs, f.iter().map(|&x| x as f64).collect()).unwrap();
                (m, Claim::new(g), Claim::new(h))
            })
    }

    proptest! {
        #[test]
        fn conditional_expectation_is_a_positive_linear_projection((m, g, h) in market_and_claim(), a in -3.0f64..3.0) {
            let part = m.sigma_f();
            let eg = conditional_expectation(&g, &part, &m).unwrap();
            let eh = conditional_expectation(&h, &part, &m).unwrap();
            prop_assert!(is_measurable(&eg, &part).unwrap());
            let eeg = conditional_expectation(&eg, &part, &m).unwrap();
            prop_assert!(eeg.sup_distance(&eg) < 1e-12);
            let combo = &(a * &g) + &h;
            let ecombo = conditional_expectation(&combo, &part, &m).unwrap();
            prop_assert!(ecombo.sup_distance(&(&(a * &eg) + &eh)) < 1e-12);
            prop_assert!((m.expectation(&eg).unwrap() - m.expectation(&g).unwrap()).abs() < 1e-12);
            let pos = g.abs();
            prop_assert!(conditional_expectation(&pos, &part, &m).unwrap().is_nonnegative());
            let one = Claim::one(m.len());
            prop_assert!(conditional_expectation(&one, &part, &m).unwrap().sup_distance(&one) < 1e-15);
        }

        #[test]
        fn measurable_iff_fixed_point((m, g, _h) in market_and_claim()) {
            let part = m.sigma_f();
            let measurable = is_measurable(&g, &part).unwrap();
            let e = conditional_expectation(&g, &part, &m).unwrap();
            prop_assert_eq!(measurable, e.sup_distance(&g) <= 1e-12);
            let proj = conditional_expectation(&g, &part, &m).unwrap();
            prop_assert!(is_measurable(&proj, &part).unwrap());
        }

        #[test]
        fn sigma_f_has_no_redundant_cells((m, _g, _h) in market_and_claim()) {
            let part = m.sigma_f();
            let f = m.underlying();
            for a in 0..part.num_cells() {
                for b in (a + 1)..part.num_cells() {
                    let (ra, rb) = (part.cells()[a][0], part.cells()[b][0]);
                    prop_assert!(!tol::same_level(f[ra], f[rb]));
                }
            }
        }

        #[test]
        fn lattice_combinations_add_no_information((m, g, _h) in market_and_claim(), r in -1.0f64..4.0) {
            let f = m.underlying().clone();
            let base = sigma_of(&m, &[Claim::one(m.len()), f.clone(), g.clone()]).unwrap();
            let extra = vec![
                f.map(|x| (x - r).max(0.0)),
                f.meet(&g),
                f.join(&g).abs(),
                &(2.0 * &f) - &g,
            ];
            let mut gens = vec![Claim::one(m.len()), f, g];
            gens.extend(extra);
            let bigger = sigma_of(&m, &gens).unwrap();
            prop_assert!(base.same_as(&bigger));
        }
    }
}
