//! Order-dependent confounds and the slider ranges used to elicit them.
//!
//! All magnitudes are in DV units and oriented by the DV's "better"
//! direction: fatigue and carry-over are non-negative and make responses
//! worse, practice effects are non-positive and make them better.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::design::{generate_trial_table, DependentVariableMeta, Direction, ExperimentDesign, TrialTable};
use crate::error::{Error, Result};

pub const DEFAULT_CARRYOVER_DECAY: f64 = 0.5;

/// Slider bound as a multiple of the DV variability.
pub const SLIDER_BOUND_FACTOR: f64 = 3.0;

/// Slider positions per bound.
pub const SLIDER_STEPS: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfoundSpec {
    pub fatigue_per_trial: f64,
    pub carryover_magnitude: f64,
    pub carryover_decay: f64,
    pub practice_within_condition: f64,
    pub practice_whole_experiment: f64,
    pub participant_sd: f64,
    pub residual_sd: f64,
}

impl ConfoundSpec {
    /// No confounds; residual SD taken from the DV variability.
    pub fn none(dv: &DependentVariableMeta) -> Self {
        Self::with_residual_sd(dv.variability)
    }

    pub fn with_residual_sd(residual_sd: f64) -> Self {
        Self {
            fatigue_per_trial: 0.0,
            carryover_magnitude: 0.0,
            carryover_decay: DEFAULT_CARRYOVER_DECAY,
            practice_within_condition: 0.0,
            practice_whole_experiment: 0.0,
            participant_sd: 0.0,
            residual_sd,
        }
    }

    /// True when no order-dependent effect is active.
    pub fn is_order_free(&self) -> bool {
        self.fatigue_per_trial == 0.0
            && self.carryover_magnitude == 0.0
            && self.practice_within_condition == 0.0
            && self.practice_whole_experiment == 0.0
    }

    pub fn get(&self, id: ConfoundId) -> f64 {
        match id {
            ConfoundId::Fatigue => self.fatigue_per_trial,
            ConfoundId::CarryOver => self.carryover_magnitude,
            ConfoundId::PracticeWithinCondition => self.practice_within_condition,
            ConfoundId::PracticeWholeExperiment => self.practice_whole_experiment,
            ConfoundId::ParticipantVariability => self.participant_sd,
        }
    }

    pub fn set(&mut self, id: ConfoundId, value: f64) {
        match id {
            ConfoundId::Fatigue => self.fatigue_per_trial = value,
            ConfoundId::CarryOver => self.carryover_magnitude = value,
            ConfoundId::PracticeWithinCondition => self.practice_within_condition = value,
            ConfoundId::PracticeWholeExperiment => self.practice_whole_experiment = value,
            ConfoundId::ParticipantVariability => self.participant_sd = value,
        }
    }

    /// Checks every magnitude against its slider range for `dv`.
    pub fn validate(&self, dv: &DependentVariableMeta) -> Result<()> {
        for range in slider_ranges(dv) {
            let v = self.get(range.id);
            if !(v.is_finite() && v >= range.lo - 1e-12 && v <= range.hi + 1e-12) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{:?} = {v} outside [{}, {}]",
                    range.id,
                    range.lo,
                    range.hi
                )));
            }
        }
        if !(self.carryover_decay > 0.0 && self.carryover_decay < 1.0) {
            return Err(Error::InvalidArgument("carry-over decay must lie in (0, 1)".into()));
        }
        if !(self.residual_sd.is_finite() && self.residual_sd > 0.0) {
            return Err(Error::InvalidArgument("residual SD must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConfoundId {
    Fatigue,
    CarryOver,
    PracticeWithinCondition,
    PracticeWholeExperiment,
    ParticipantVariability,
}

impl ConfoundId {
    pub const ALL: [ConfoundId; 5] = [
        ConfoundId::Fatigue,
        ConfoundId::CarryOver,
        ConfoundId::PracticeWithinCondition,
        ConfoundId::PracticeWholeExperiment,
        ConfoundId::ParticipantVariability,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliderRange {
    pub id: ConfoundId,
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// Slider ranges derived from the DV metadata: worsening effects span
/// `[0, 3v]`, improving effects `[-3v, 0]`, where `v` is the variability.
///
/// The ranges are the same for either DV direction; the direction only
/// decides the sign with which effects enter the responses.
pub fn slider_ranges(dv: &DependentVariableMeta) -> Vec<SliderRange> {
    let bound = SLIDER_BOUND_FACTOR * dv.variability;
    let step = bound / SLIDER_STEPS;
    ConfoundId::ALL
        .iter()
        .map(|&id| {
            let (lo, hi) = match id {
                ConfoundId::PracticeWithinCondition | ConfoundId::PracticeWholeExperiment => (-bound, 0.0),
                _ => (0.0, bound),
            };
            SliderRange { id, lo, hi, step }
        })
        .collect()
}

/// Additive, noise-free offset of every trial in one participant's sequence.
///
/// `offset(t) = s * (fatigue*t + carry*decay^t + within*occ(t) + whole*t)`,
/// with `occ(t)` the number of earlier trials of the same condition and
/// `s = +1` when lower is better, `-1` otherwise.
pub fn confound_contribution(sequence: &[usize], spec: &ConfoundSpec, direction: Direction) -> Vec<f64> {
    let mut out = Vec::with_capacity(sequence.len());
    contribution_into(sequence, spec, direction, &mut out);
    out
}

pub(crate) fn contribution_into(
    sequence: &[usize],
    spec: &ConfoundSpec,
    direction: Direction,
    out: &mut Vec<f64>,
) {
    out.clear();
    let sign = direction.worse_sign();
    let k = sequence.iter().copied().max().map_or(0, |m| m + 1);
    let mut seen = vec![0u32; k];
    let mut carry = spec.carryover_magnitude;
    for (t, &c) in sequence.iter().enumerate() {
        let t = t as f64;
        let occ = f64::from(seen[c]);
        seen[c] += 1;
        let v = spec.fatigue_per_trial * t
            + carry
            + spec.practice_within_condition * occ
            + spec.practice_whole_experiment * t;
        out.push(sign * v);
        carry *= spec.carryover_decay;
    }
}

/// Mean confound offset per condition over a whole trial table.
///
/// Each condition's offsets are summed in sorted order, so conditions that
/// receive the same multiset of offsets get bit-identical means.
pub fn expected_contribution_by_condition(
    table: &TrialTable,
    spec: &ConfoundSpec,
    direction: Direction,
) -> Vec<f64> {
    let mut per_condition: Vec<Vec<f64>> = vec![Vec::new(); table.conditions];
    let mut offsets = Vec::new();
    for p in 0..table.participants() {
        let seq = table.sequence(p);
        contribution_into(&seq, spec, direction, &mut offsets);
        for (&c, &o) in seq.iter().zip(&offsets) {
            per_condition[c].push(o);
        }
    }
    per_condition
        .into_iter()
        .map(|mut v| {
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            v.iter().sum::<f64>() / n
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreviewBar {
    pub trial: usize,
    pub condition: usize,
    pub value: f64,
}

/// Expected response per trial for the first participant of the design's
/// trial table: cell mean plus confound offset.
pub fn confound_preview(
    design: &ExperimentDesign,
    spec: &ConfoundSpec,
    cell_means: &[f64],
    seed: u64,
) -> Result<Vec<PreviewBar>> {
    let table = generate_trial_table(design, seed);
    let seq = table.sequence(0);
    let offsets = confound_contribution(&seq, spec, design.dv.direction);
    seq.iter()
        .zip(offsets)
        .enumerate()
        .map(|(trial, (&condition, offset))| {
            let mean = cell_means
                .get(condition)
                .copied()
                .ok_or(Error::MissingCellMean(condition))?;
            Ok(PreviewBar {
                trial,
                condition,
                value: mean + offset,
            })
        })
        .collect()
}
