//! Experiment structure and counterbalanced trial tables.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};

/// Prototype scope: at most two within-subject factors.
pub const MAX_IVS: usize = 2;

/// Largest condition count for which `k!` fits in a `u64`.
pub const MAX_COMPLETE_CONDITIONS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependentVariable {
    pub name: String,
    pub levels: Vec<String>,
}

impl IndependentVariable {
    pub fn new<S: Into<String>>(name: S, levels: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            levels: levels.into_iter().map(Into::into).collect(),
        }
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    LowerIsBetter,
    HigherIsBetter,
}

impl Direction {
    /// Sign that moves a response toward "worse".
    pub fn worse_sign(self) -> f64 {
        match self {
            Direction::LowerIsBetter => 1.0,
            Direction::HigherIsBetter => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependentVariableMeta {
    pub name: String,
    pub unit: String,
    pub expected_range: (f64, f64),
    pub direction: Direction,
    /// Rough spread estimate in DV units.
    pub variability: f64,
}

impl DependentVariableMeta {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.expected_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidMetadata(format!(
                "expected range must satisfy min < max, got ({lo}, {hi})"
            )));
        }
        if !(self.variability.is_finite() && self.variability > 0.0) {
            return Err(Error::InvalidMetadata(format!(
                "variability must be positive, got {}",
                self.variability
            )));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.expected_range.0 + self.expected_range.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    CompleteCounterbalance,
    LatinSquare,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub ivs: Vec<IndependentVariable>,
    pub dv: DependentVariableMeta,
    pub strategy: Strategy,
    pub replications: u32,
    pub participants: u32,
}

/// One combination of levels, with its canonical (row-major) index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub index: usize,
    pub levels: Vec<usize>,
}

impl Condition {
    pub fn label(&self, ivs: &[IndependentVariable]) -> String {
        let mut out = String::new();
        for (i, (iv, &l)) in ivs.iter().zip(&self.levels).enumerate() {
            if i > 0 {
                out.push('/');
            }
            out.push_str(&iv.levels[l]);
        }
        out
    }
}

/// Validates the IV list on its own, without a DV or design controls.
pub fn validate_ivs(ivs: &[IndependentVariable]) -> Result<()> {
    if ivs.is_empty() || ivs.len() > MAX_IVS {
        return Err(Error::InvalidDesign(format!(
            "between 1 and {MAX_IVS} independent variables supported, got {}",
            ivs.len()
        )));
    }
    for (i, iv) in ivs.iter().enumerate() {
        if iv.levels.len() < 2 {
            return Err(Error::InvalidMetadata(format!(
                "independent variable {} needs at least 2 levels",
                iv.name
            )));
        }
        for (j, l) in iv.levels.iter().enumerate() {
            if iv.levels[..j].contains(l) {
                return Err(Error::InvalidMetadata(format!(
                    "duplicate level {l} in {}",
                    iv.name
                )));
            }
        }
        if ivs[..i].iter().any(|o| o.name == iv.name) {
            return Err(Error::InvalidMetadata(format!("duplicate variable {}", iv.name)));
        }
    }
    Ok(())
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        validate_ivs(&self.ivs)?;
        self.dv.validate()?;
        if self.replications < 1 {
            return Err(Error::InvalidDesign("replications must be at least 1".into()));
        }
        if self.participants < 2 {
            return Err(Error::InvalidDesign("at least 2 participants required".into()));
        }
        if self.strategy == Strategy::CompleteCounterbalance
            && self.condition_count() > MAX_COMPLETE_CONDITIONS
        {
            return Err(Error::InvalidDesign(format!(
                "complete counterbalancing supports at most {MAX_COMPLETE_CONDITIONS} conditions"
            )));
        }
        Ok(())
    }

    pub fn condition_count(&self) -> usize {
        self.ivs.iter().map(|iv| iv.levels.len()).product()
    }

    pub fn iv_index(&self, name: &str) -> Option<usize> {
        self.ivs.iter().position(|iv| iv.name == name)
    }

    /// Canonical index of a level tuple.
    pub fn condition_index(&self, levels: &[usize]) -> usize {
        self.ivs
            .iter()
            .zip(levels)
            .fold(0, |acc, (iv, &l)| acc * iv.levels.len() + l)
    }

    /// Level tuple for a canonical condition index.
    pub fn condition_levels(&self, mut index: usize) -> Vec<usize> {
        let mut levels = vec![0; self.ivs.len()];
        for (slot, iv) in levels.iter_mut().zip(&self.ivs).rev() {
            let m = iv.levels.len();
            *slot = index % m;
            index /= m;
        }
        levels
    }

    pub fn conditions(&self) -> Vec<Condition> {
        enumerate_conditions(self)
    }
}

/// Row-major cross product of the IV levels, in IV declaration order.
pub fn enumerate_conditions(design: &ExperimentDesign) -> Vec<Condition> {
    (0..design.condition_count())
        .map(|index| Condition {
            index,
            levels: design.condition_levels(index),
        })
        .collect()
}

fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Participant count granularity needed for a fully balanced design.
pub fn required_participant_multiple(design: &ExperimentDesign) -> u64 {
    let k = design.condition_count();
    match design.strategy {
        Strategy::CompleteCounterbalance => factorial(k),
        Strategy::LatinSquare => latin_square_rows(k) as u64,
        Strategy::Random => 1,
    }
}

fn latin_square_rows(k: usize) -> usize {
    if k.is_multiple_of(2) {
        k
    } else {
        2 * k
    }
}

/// Williams-balanced Latin square over `0..k`.
///
/// For even `k` the result has `k` rows and every ordered adjacency `a -> b`
/// (`a != b`) occurs exactly once. For odd `k` the square is followed by its
/// row reversals, giving `2k` rows in which every ordered adjacency occurs
/// exactly twice.
pub fn balanced_latin_square(k: usize) -> Vec<Vec<usize>> {
    assert!(k >= 2, "balanced Latin square needs k >= 2");
    // 0, 1, k-1, 2, k-2, ...
    let mut first = Vec::with_capacity(k);
    let (mut lo, mut hi) = (1, k - 1);
    first.push(0);
    for j in 1..k {
        if j % 2 == 1 {
            first.push(lo);
            lo += 1;
        } else {
            first.push(hi);
            hi -= 1;
        }
    }
    let mut rows: Vec<Vec<usize>> = (0..k)
        .map(|shift| first.iter().map(|&c| (c + shift) % k).collect())
        .collect();
    if k % 2 == 1 {
        let reversed: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        rows.extend(reversed);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Trial {
    pub participant: usize,
    /// 0-based position in the participant's session.
    pub index: usize,
    pub condition: usize,
}

/// Per-participant trial sequences. Each participant runs a base ordering of
/// all `k` conditions, repeated `replications` times back to back.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTable {
    pub conditions: usize,
    pub replications: u32,
    pub base_orderings: Vec<Vec<usize>>,
}

impl TrialTable {
    pub fn participants(&self) -> usize {
        self.base_orderings.len()
    }

    pub fn trials_per_participant(&self) -> usize {
        self.conditions * self.replications as usize
    }

    /// Full trial sequence (condition indices) for one participant.
    pub fn sequence(&self, participant: usize) -> Vec<usize> {
        let base = &self.base_orderings[participant];
        let mut seq = Vec::with_capacity(self.trials_per_participant());
        for _ in 0..self.replications {
            seq.extend_from_slice(base);
        }
        seq
    }

    pub fn trials(&self) -> impl Iterator<Item = Trial> + '_ {
        (0..self.participants()).flat_map(move |p| {
            let base = &self.base_orderings[p];
            let k = base.len();
            (0..self.trials_per_participant()).map(move |t| Trial {
                participant: p,
                index: t,
                condition: base[t % k],
            })
        })
    }

    /// `counts[c][p]`: participants whose base ordering has condition `c` at position `p`.
    pub fn position_counts(&self) -> Vec<Vec<usize>> {
        let k = self.conditions;
        let mut counts = vec![vec![0usize; k]; k];
        for ordering in &self.base_orderings {
            for (p, &c) in ordering.iter().enumerate() {
                counts[c][p] += 1;
            }
        }
        counts
    }
}

/// Permutation with lexicographic rank `rank` (factorial number system).
fn unrank_permutation(k: usize, mut rank: u64) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..k).collect();
    let mut out = Vec::with_capacity(k);
    for i in (0..k).rev() {
        let f = factorial(i);
        let idx = (rank / f) as usize;
        rank %= f;
        out.push(pool.remove(idx));
    }
    out
}

/// First `take` entries of a uniform shuffle of `0..total`, via a sparse
/// Fisher-Yates so `total` may be as large as `20!`.
fn partial_shuffle(total: u64, take: u64, rng: &mut impl Rng) -> Vec<u64> {
    let mut swapped: BTreeMap<u64, u64> = BTreeMap::new();
    let mut out = Vec::with_capacity(take as usize);
    for i in 0..take.min(total) {
        let j = rng.random_range(i..total);
        let vj = *swapped.get(&j).unwrap_or(&j);
        let vi = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, vi);
        out.push(vj);
    }
    out
}

/// Trial table for `design`, a pure function of `(design, seed)`.
///
/// Complete counterbalancing and Latin squares hand out their orderings
/// round-robin, in an order shuffled once per seed. The random strategy
/// draws an independent uniform ordering per participant.
pub fn generate_trial_table(design: &ExperimentDesign, seed: u64) -> TrialTable {
    let k = design.condition_count();
    let n = design.participants as usize;
    let mut rng = rng::rng_from_seed(rng::tagged(seed, domain::TRIAL_TABLE));
    let base_orderings = match design.strategy {
        Strategy::CompleteCounterbalance => {
            let total = factorial(k);
            let order = partial_shuffle(total, n as u64, &mut rng);
            (0..n)
                .map(|i| unrank_permutation(k, order[i % order.len()]))
                .collect()
        }
        Strategy::LatinSquare => {
            let mut rows = balanced_latin_square(k);
            rows.shuffle(&mut rng);
            (0..n).map(|i| rows[i % rows.len()].clone()).collect()
        }
        Strategy::Random => (0..n)
            .map(|_| {
                let mut o: Vec<usize> = (0..k).collect();
                o.shuffle(&mut rng);
                o
            })
            .collect(),
    };
    TrialTable {
        conditions: k,
        replications: design.replications,
        base_orderings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionCount {
    pub condition: usize,
    pub position: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceWarning {
    /// Participant count is not a multiple of what the strategy needs.
    ParticipantMultiple { participants: u32, multiple: u64 },
    /// Some conditions occupy some ordinal positions more often than others.
    PositionImbalance { cells: Vec<PositionCount> },
}

pub fn validate_balance(design: &ExperimentDesign, table: &TrialTable) -> Vec<BalanceWarning> {
    let mut warnings = Vec::new();
    let multiple = required_participant_multiple(design);
    if u64::from(design.participants) % multiple != 0 {
        warnings.push(BalanceWarning::ParticipantMultiple {
            participants: design.participants,
            multiple,
        });
    }
    let n = table.participants();
    let k = table.conditions;
    let counts = table.position_counts();
    let cells: Vec<PositionCount> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, row)| {
            row.iter().enumerate().filter_map(move |(p, &count)| {
                (count * k != n).then_some(PositionCount {
                    condition: c,
                    position: p,
                    count,
                })
            })
        })
        .collect();
    if !cells.is_empty() {
        warnings.push(BalanceWarning::PositionImbalance { cells });
    }
    warnings
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn dv() -> DependentVariableMeta {
        DependentVariableMeta {
            name: "READINGTIME".into(),
            unit: "minutes".into(),
            expected_range: (0.0, 60.0),
            direction: Direction::LowerIsBetter,
            variability: 5.0,
        }
    }

    pub fn two_by_two(strategy: Strategy, participants: u32, replications: u32) -> ExperimentDesign {
        ExperimentDesign {
            ivs: vec![
                IndependentVariable::new("MEDIUM", ["P", "S"]),
                IndependentVariable::new("LAYOUT", ["1", "2"]),
            ],
            dv: dv(),
            strategy,
            replications,
            participants,
        }
    }

    pub fn single(levels: &[&str], strategy: Strategy, participants: u32) -> ExperimentDesign {
        ExperimentDesign {
            ivs: vec![IndependentVariable::new("A", levels.iter().copied())],
            dv: dv(),
            strategy,
            replications: 1,
            participants,
        }
    }
}
