//! Paired analysis of level contrasts.
//!
//! For a balanced within-subject design with a random participant intercept,
//! the contrast between two levels of one IV is estimated from each
//! participant's marginal means: average the replications per cell, then
//! average the cells at each level. The intercept cancels in the difference.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::design::{Direction, ExperimentDesign};
use crate::error::{Error, Result};
use crate::simulate::SimulatedDataset;

/// Contrast `level_a - level_b` of one IV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LevelPair {
    pub iv: usize,
    pub level_a: usize,
    pub level_b: usize,
}

impl LevelPair {
    pub fn new(iv: usize, level_a: usize, level_b: usize) -> Self {
        Self { iv, level_a, level_b }
    }

    pub fn validate(&self, design: &ExperimentDesign) -> Result<()> {
        let iv = design
            .ivs
            .get(self.iv)
            .ok_or_else(|| Error::InvalidArgument(format!("no independent variable {}", self.iv)))?;
        let m = iv.levels.len();
        if self.level_a >= m || self.level_b >= m || self.level_a == self.level_b {
            return Err(Error::InvalidArgument(format!(
                "pair needs two distinct levels of {}",
                iv.name
            )));
        }
        Ok(())
    }

    /// `IV:levelA-levelB`.
    pub fn label(&self, design: &ExperimentDesign) -> String {
        let iv = &design.ivs[self.iv];
        format!("{}:{}-{}", iv.name, iv.levels[self.level_a], iv.levels[self.level_b])
    }

    /// Parses `IV:levelA-levelB` against the design's level names.
    pub fn parse(spec: &str, design: &ExperimentDesign) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("pair must look like IV:levelA-levelB, got {spec}"));
        let (iv_name, levels) = spec.split_once(':').ok_or_else(bad)?;
        let iv = design.iv_index(iv_name).ok_or_else(bad)?;
        let names = &design.ivs[iv];
        // Level names may themselves contain '-', so try every split point.
        for (i, _) in levels.match_indices('-') {
            let (a, b) = (&levels[..i], &levels[i + 1..]);
            if let (Some(a), Some(b)) = (names.level_index(a), names.level_index(b)) {
                let pair = LevelPair::new(iv, a, b);
                pair.validate(design)?;
                return Ok(pair);
            }
        }
        Err(bad())
    }

    /// Level that the DV direction favours for a given signed difference.
    pub fn better_level(&self, mean_diff: f64, direction: Direction) -> Option<usize> {
        if mean_diff == 0.0 || mean_diff.is_nan() {
            return None;
        }
        let a_lower = mean_diff < 0.0;
        Some(match (direction, a_lower) {
            (Direction::LowerIsBetter, true) | (Direction::HigherIsBetter, false) => self.level_a,
            _ => self.level_b,
        })
    }
}

/// Every `(m choose 2)` pair of every IV, in canonical order.
pub fn all_pairs(design: &ExperimentDesign) -> Vec<LevelPair> {
    let mut out = Vec::new();
    for (iv, v) in design.ivs.iter().enumerate() {
        let m = v.levels.len();
        for a in 0..m {
            for b in a + 1..m {
                out.push(LevelPair::new(iv, a, b));
            }
        }
    }
    out
}

/// Mean response per `(participant, condition)`, participant-major:
/// entry `p * k + c`.
pub fn participant_condition_means(dataset: &SimulatedDataset, conditions: usize) -> Vec<f64> {
    let mut sums = alloc::vec![0.0; dataset.participants * conditions];
    let mut counts = alloc::vec![0u32; dataset.participants * conditions];
    for row in dataset.rows() {
        let i = row.participant * conditions + row.condition;
        sums[i] += row.response;
        counts[i] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { f64::NAN } else { s / f64::from(n) })
        .collect()
}

/// Conditions at each side of a pair, for marginal averaging.
#[derive(Debug, Clone)]
pub(crate) struct PairCells {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

impl PairCells {
    pub fn new(design: &ExperimentDesign, pair: &LevelPair) -> Self {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for c in 0..design.condition_count() {
            let level = design.condition_levels(c)[pair.iv];
            if level == pair.level_a {
                a.push(c);
            } else if level == pair.level_b {
                b.push(c);
            }
        }
        Self { a, b }
    }

    pub fn difference(&self, row: &[f64]) -> f64 {
        let mean = |cells: &[usize]| cells.iter().map(|&c| row[c]).sum::<f64>() / cells.len() as f64;
        mean(&self.a) - mean(&self.b)
    }
}

/// Per-participant marginal differences for `pair`.
pub fn paired_differences(dataset: &SimulatedDataset, design: &ExperimentDesign, pair: &LevelPair) -> Vec<f64> {
    let k = design.condition_count();
    let cells = PairCells::new(design, pair);
    participant_condition_means(dataset, k)
        .chunks_exact(k)
        .map(|row| cells.difference(row))
        .collect()
}

/// Mean and sample SD (n - 1 denominator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = if n > 1 { sqrt(ss / (n - 1) as f64) } else { f64::NAN };
        Self { n, mean, sd }
    }

    /// True when the spread is zero up to rounding.
    /// A NaN spread (fewer than two values) counts as degenerate.
    pub fn is_degenerate(&self) -> bool {
        let floor = 1e-13 * self.mean.abs().max(f64::MIN_POSITIVE);
        self.sd.is_nan() || self.sd <= floor
    }

    pub fn t_statistic(&self) -> f64 {
        self.mean / (self.sd / sqrt(self.n as f64))
    }

    /// `mean / sd`, or [`Error::DegenerateSd`].
    pub fn cohens_d(&self) -> Result<f64> {
        if self.is_degenerate() {
            Err(Error::DegenerateSd)
        } else {
            Ok(self.mean / self.sd)
        }
    }

    /// Stand-in effect size for a degenerate spread: signed infinity, or NaN
    /// when the mean is zero as well.
    pub fn degenerate_sentinel(&self) -> f64 {
        if self.mean > 0.0 {
            f64::INFINITY
        } else if self.mean < 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        }
    }
}

/// Cohen's d of the paired differences for `pair`.
pub fn cohens_d_paired(dataset: &SimulatedDataset, design: &ExperimentDesign, pair: &LevelPair) -> Result<f64> {
    pair.validate(design)?;
    Summary::of(&paired_differences(dataset, design, pair)).cohens_d()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::fixtures::two_by_two;
    use crate::design::{IndependentVariable, Strategy};
    use crate::simulate::Provenance;
    use alloc::vec;

    fn dataset(participants: usize, tpp: usize, conditions: Vec<usize>, responses: Vec<f64>) -> SimulatedDataset {
        SimulatedDataset {
            participants,
            trials_per_participant: tpp,
            conditions,
            responses,
            provenance: Provenance { seed: 0, index: 0 },
        }
    }

    #[test]
    fn condition_means_average_replications() {
        let d = dataset(1, 4, vec![0, 1, 0, 1], vec![4.0, 7.0, 6.0, 7.0]);
        assert_eq!(participant_condition_means(&d, 2), [5.0, 7.0]);
        let single = dataset(2, 2, vec![0, 1, 1, 0], vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(participant_condition_means(&single, 2), [1.0, 2.0, 4.0, 3.0]);
    }

    #[test]
    fn cohens_d_two_points() {
        // Differences {1, 3}: mean 2, SD sqrt(2).
        let design = crate::design::fixtures::single(&["A", "B"], Strategy::Random, 2);
        let d = dataset(2, 2, vec![0, 1, 0, 1], vec![1.0, 0.0, 3.0, 0.0]);
        let pair = LevelPair::new(0, 0, 1);
        let got = cohens_d_paired(&d, &design, &pair).unwrap();
        assert!((got - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cohens_d_degenerate() {
        let design = crate::design::fixtures::single(&["A", "B"], Strategy::Random, 2);
        let d = dataset(3, 2, vec![0, 1, 0, 1, 0, 1], vec![1.0, 1.0, 2.0, 2.0, 5.0, 5.0]);
        assert_eq!(cohens_d_paired(&d, &design, &LevelPair::new(0, 0, 1)), Err(Error::DegenerateSd));
        let s = Summary::of(&[2.0, 2.0]);
        assert_eq!(s.degenerate_sentinel(), f64::INFINITY);
    }

    #[test]
    fn pair_cells_average_the_other_iv() {
        let design = two_by_two(Strategy::Random, 2, 1);
        let cells = PairCells::new(&design, &LevelPair::new(1, 0, 1));
        assert_eq!((cells.a.as_slice(), cells.b.as_slice()), ([0, 2].as_slice(), [1, 3].as_slice()));
        assert_eq!(cells.difference(&[1.0, 2.0, 3.0, 4.0]), -1.0);
    }

    #[test]
    fn pairs_enumerate_and_parse() {
        let mut design = two_by_two(Strategy::Random, 2, 1);
        assert_eq!(all_pairs(&design).len(), 2);
        design.ivs[0] = IndependentVariable::new("RAMP", ["LINEAR", "DESIGNER", "K-MEANS"]);
        assert_eq!(all_pairs(&design).len(), 4);
        let p = LevelPair::parse("RAMP:LINEAR-K-MEANS", &design).unwrap();
        assert_eq!(p, LevelPair::new(0, 0, 2));
        assert_eq!(p.label(&design), "RAMP:LINEAR-K-MEANS");
        assert!(LevelPair::parse("RAMP:LINEAR-LINEAR", &design).is_err());
        assert!(LevelPair::parse("NOPE:a-b", &design).is_err());
        assert!(LevelPair::parse("RAMP", &design).is_err());
    }

    #[test]
    fn better_side_follows_direction() {
        let p = LevelPair::new(0, 0, 1);
        assert_eq!(p.better_level(-4.0, Direction::LowerIsBetter), Some(0));
        assert_eq!(p.better_level(-4.0, Direction::HigherIsBetter), Some(1));
        assert_eq!(p.better_level(2.0, Direction::LowerIsBetter), Some(1));
        assert_eq!(p.better_level(0.0, Direction::LowerIsBetter), None);
    }
}
