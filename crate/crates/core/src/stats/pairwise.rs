//! Pairwise differences with family-wise adjusted intervals, one set per
//! simulated dataset ("frame").

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use super::paired::{LevelPair, PairCells};
use super::power::PairedTest;
use super::special::t_quantile;
use crate::confound::expected_contribution_by_condition;
use crate::design::{Direction, ExperimentDesign, TrialTable};
use crate::error::{Error, Result};
use crate::rng;
use crate::simulate::{simulate_dataset, PopulationModel};

pub const DEFAULT_FRAMES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseFrame {
    pub frame: usize,
    pub pair: LevelPair,
    pub mean_diff: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Paired Cohen's d; a signed infinity (or NaN) when `degenerate_sd`.
    pub cohens_d: f64,
    pub degenerate_sd: bool,
    /// Level the DV direction favours, if the difference is nonzero.
    pub better_level: Option<usize>,
}

impl PairwiseFrame {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_lo <= value && value <= self.ci_hi
    }

    /// Plain-language reading, e.g. "SCREEN is lower by 4.00 minutes".
    pub fn describe(&self, design: &ExperimentDesign) -> String {
        let iv = &design.ivs[self.pair.iv];
        let unit = &design.dv.unit;
        match self.better_level {
            None => format!("no difference between {} and {}", iv.levels[self.pair.level_a], iv.levels[self.pair.level_b]),
            Some(better) => {
                let comparative = match design.dv.direction {
                    Direction::LowerIsBetter => "lower",
                    Direction::HigherIsBetter => "higher",
                };
                format!("{} is {comparative} by {:.2} {unit}", iv.levels[better], self.mean_diff.abs())
            }
        }
    }

    /// Signed reading, e.g. "SCREEN-PAPER = -4.00".
    pub fn describe_signed(&self, design: &ExperimentDesign) -> String {
        let iv = &design.ivs[self.pair.iv];
        format!(
            "{}-{} = {:.2}",
            iv.levels[self.pair.level_a], iv.levels[self.pair.level_b], self.mean_diff
        )
    }
}

/// Bonferroni-adjusted two-sided critical value for `m` simultaneous
/// intervals at family-wise level `alpha`.
pub fn adjusted_critical(alpha: f64, m: usize, n: u32) -> f64 {
    t_quantile(1.0 - alpha / (2.0 * m as f64), f64::from(n - 1))
}

pub fn frame_seed(seed: u64, frame: usize) -> u64 {
    rng::split(rng::tagged(seed, rng::domain::FRAME), frame as u64)
}

/// `frames` independent frames, each with one interval per selected pair.
pub fn pairwise_frames(
    model: &PopulationModel,
    pairs: &[LevelPair],
    n: u32,
    frames: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<Vec<PairwiseFrame>>> {
    if frames < 1 {
        return Err(Error::InvalidArgument("need at least one frame".into()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no pairs selected".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("at least 2 participants required".into()));
    }
    for p in pairs {
        p.validate(&model.design)?;
    }
    let crit = adjusted_critical(alpha, pairs.len(), n);
    let tests: Vec<PairedTest> = pairs.iter().map(|p| PairedTest::new(model, p, n, alpha)).collect();
    let direction = model.design.dv.direction;
    (0..frames)
        .map(|f| {
            let ds = simulate_dataset(model, n, frame_seed(seed, f))?;
            Ok(pairs
                .iter()
                .zip(&tests)
                .map(|(pair, test)| {
                    let s = test.summary(&ds);
                    let half = crit * s.sd / sqrt(s.n as f64);
                    let degenerate = s.is_degenerate();
                    PairwiseFrame {
                        frame: f,
                        pair: *pair,
                        mean_diff: s.mean,
                        ci_lo: s.mean - half,
                        ci_hi: s.mean + half,
                        cohens_d: s.cohens_d().unwrap_or_else(|_| s.degenerate_sentinel()),
                        degenerate_sd: degenerate,
                        better_level: pair.better_level(s.mean, direction),
                    }
                })
                .collect())
        })
        .collect()
}

/// Expected shift of `pair`'s mean difference caused by the confounds alone,
/// for a fixed trial table. Zero for position-balanced tables.
pub fn expected_confound_shift(
    design: &ExperimentDesign,
    table: &TrialTable,
    spec: &crate::confound::ConfoundSpec,
    pair: &LevelPair,
) -> Result<f64> {
    pair.validate(design)?;
    let per_condition = expected_contribution_by_condition(table, spec, design.dv.direction);
    Ok(PairCells::new(design, pair).difference(&per_condition))
}
