//! Monte Carlo datasets from a random-intercept population model.
//!
//! `response = cell_mean + b_i + confound_offset(t) + e`, with one
//! `b_i ~ N(0, participant_sd^2)` per participant and `e ~ N(0, residual_sd^2)`
//! per trial. Each dataset is generated from its own derived seed, so a batch
//! can be produced in any order or in parallel with identical results.

use alloc::vec::Vec;
use core::ops::Range;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::confound::{contribution_into, ConfoundSpec};
use crate::design::{generate_trial_table, ExperimentDesign};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub design: ExperimentDesign,
    /// Cell means by canonical condition index.
    pub cell_means: Vec<f64>,
    pub confounds: ConfoundSpec,
}

impl PopulationModel {
    pub fn new(design: ExperimentDesign, cell_means: Vec<f64>, confounds: ConfoundSpec) -> Self {
        Self {
            design,
            cell_means,
            confounds,
        }
    }

    pub fn participant_sd(&self) -> f64 {
        self.confounds.participant_sd
    }

    pub fn residual_sd(&self) -> f64 {
        self.confounds.residual_sd
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.design.condition_count();
        if self.cell_means.len() < k {
            return Err(Error::MissingCellMean(self.cell_means.len()));
        }
        if let Some(c) = self.cell_means.iter().position(|m| !m.is_finite()) {
            return Err(Error::MissingCellMean(c));
        }
        if !(self.residual_sd() > 0.0 && self.residual_sd().is_finite()) {
            return Err(Error::InvalidArgument("residual SD must be positive".into()));
        }
        if !(self.participant_sd() >= 0.0 && self.participant_sd().is_finite()) {
            return Err(Error::InvalidArgument("participant SD must be non-negative".into()));
        }
        Ok(())
    }

    /// Copy with a different participant count.
    pub fn with_participants(&self, n: u32) -> Self {
        let mut m = self.clone();
        m.design.participants = n;
        m
    }

    /// Copy with a different replication count.
    pub fn with_replications(&self, r: u32) -> Self {
        let mut m = self.clone();
        m.design.replications = r;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub index: u64,
}

/// One simulated experiment, stored column-wise in participant-major,
/// trial-minor order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub participants: usize,
    pub trials_per_participant: usize,
    pub conditions: Vec<usize>,
    pub responses: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub participant: usize,
    pub trial_index: usize,
    pub condition: usize,
    pub response: f64,
}

impl SimulatedDataset {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = Row> + '_ {
        let tpp = self.trials_per_participant;
        self.conditions
            .iter()
            .zip(&self.responses)
            .enumerate()
            .map(move |(i, (&condition, &response))| Row {
                participant: i / tpp,
                trial_index: i % tpp,
                condition,
                response,
            })
    }

    /// Rows of one participant as `(condition, response)` pairs.
    pub fn participant_rows(&self, participant: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let tpp = self.trials_per_participant;
        let span = participant * tpp..(participant + 1) * tpp;
        self.conditions[span.clone()]
            .iter()
            .copied()
            .zip(self.responses[span].iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBatch {
    pub master_seed: u64,
    pub datasets: Vec<SimulatedDataset>,
}

impl SimulationBatch {
    pub fn count(&self) -> usize {
        self.datasets.len()
    }
}

/// Seed of dataset `index` in a batch with `master_seed`.
pub fn dataset_seed(master_seed: u64, index: u64) -> u64 {
    rng::split(master_seed, index)
}

/// One dataset with `n` participants.
pub fn simulate_dataset(model: &PopulationModel, n: u32, seed: u64) -> Result<SimulatedDataset> {
    simulate_indexed(model, n, seed, 0)
}

fn simulate_indexed(model: &PopulationModel, n: u32, seed: u64, index: u64) -> Result<SimulatedDataset> {
    if n < 2 {
        return Err(Error::InvalidArgument("at least 2 participants required".into()));
    }
    model.validate()?;
    let mut design = model.design.clone();
    design.participants = n;
    let table = generate_trial_table(&design, seed);
    let mut noise = rng::rng_from_seed(rng::tagged(seed, rng::domain::DATASET));

    let tpp = table.trials_per_participant();
    let total = n as usize * tpp;
    let mut conditions = Vec::with_capacity(total);
    let mut responses = Vec::with_capacity(total);
    let spec = &model.confounds;
    let order_free = spec.is_order_free();
    let mut offsets = Vec::with_capacity(tpp);
    let mut seq = Vec::with_capacity(tpp);
    for p in 0..table.participants() {
        seq.clear();
        for _ in 0..table.replications {
            seq.extend_from_slice(&table.base_orderings[p]);
        }
        let z: f64 = StandardNormal.sample(&mut noise);
        let intercept = spec.participant_sd * z;
        if !order_free {
            contribution_into(&seq, spec, design.dv.direction, &mut offsets);
        }
        for (t, &c) in seq.iter().enumerate() {
            let e: f64 = StandardNormal.sample(&mut noise);
            let offset = if order_free { 0.0 } else { offsets[t] };
            conditions.push(c);
            responses.push(model.cell_means[c] + intercept + offset + spec.residual_sd * e);
        }
    }
    Ok(SimulatedDataset {
        participants: n as usize,
        trials_per_participant: tpp,
        conditions,
        responses,
        provenance: Provenance { seed, index },
    })
}

/// Datasets `range` of the batch rooted at `master_seed`; any split of the
/// index space into ranges yields the same datasets as one full batch.
pub fn simulate_range(
    model: &PopulationModel,
    n: u32,
    master_seed: u64,
    range: Range<u64>,
) -> Result<Vec<SimulatedDataset>> {
    range
        .map(|j| simulate_indexed(model, n, dataset_seed(master_seed, j), j))
        .collect()
}

pub fn simulate_batch(model: &PopulationModel, n: u32, count: usize, master_seed: u64) -> Result<SimulationBatch> {
    if count < 1 {
        return Err(Error::InvalidArgument("batch needs at least one dataset".into()));
    }
    Ok(SimulationBatch {
        master_seed,
        datasets: simulate_range(model, n, master_seed, 0..count as u64)?,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::design::fixtures::two_by_two;
    use crate::design::Strategy;
    use alloc::vec;

    pub fn model(strategy: Strategy, r: u32, means: [f64; 4], participant_sd: f64, residual_sd: f64) -> PopulationModel {
        let design = two_by_two(strategy, 8, r);
        let mut c = ConfoundSpec::with_residual_sd(residual_sd);
        c.participant_sd = participant_sd;
        PopulationModel::new(design, means.to_vec(), c)
    }

    #[test]
    fn near_noise_free_reproduces_cell_means() {
        let m = model(Strategy::LatinSquare, 2, [1.0, 2.0, 3.0, 4.0], 0.0, 1e-12);
        let d = simulate_dataset(&m, 4, 9).unwrap();
        assert_eq!(d.len(), 4 * 4 * 2);
        for row in d.rows() {
            assert!((row.response - m.cell_means[row.condition]).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let m = model(Strategy::Random, 3, [1.0, 2.0, 3.0, 4.0], 1.0, 2.0);
        let a = simulate_dataset(&m, 10, 77).unwrap();
        let b = simulate_dataset(&m, 10, 77).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate_dataset(&m, 10, 78).unwrap());
    }

    #[test]
    fn participant_intercepts_are_recoverable() {
        // With tiny residual noise each participant's deviations from the
        // cell means collapse onto a single constant.
        let m = model(Strategy::Random, 2, [5.0, 6.0, 7.0, 8.0], 3.0, 1e-9);
        let d = simulate_dataset(&m, 12, 5).unwrap();
        let mut intercepts = vec![];
        for p in 0..d.participants {
            let devs: Vec<f64> = d.participant_rows(p).map(|(c, y)| y - m.cell_means[c]).collect();
            let mean = devs.iter().sum::<f64>() / devs.len() as f64;
            assert!(devs.iter().all(|x| (x - mean).abs() < 1e-6));
            intercepts.push(mean);
        }
        let spread = intercepts.iter().cloned().fold(f64::MIN, f64::max)
            - intercepts.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 1.0, "intercepts should vary with sd 3: {intercepts:?}");
    }

    #[test]
    fn missing_cell_mean_is_reported() {
        let mut m = model(Strategy::Random, 1, [1.0; 4], 0.0, 1.0);
        m.cell_means.pop();
        assert_eq!(simulate_dataset(&m, 4, 1), Err(Error::MissingCellMean(3)));
        assert!(simulate_dataset(&model(Strategy::Random, 1, [1.0; 4], 0.0, 1.0), 1, 1).is_err());
    }

    #[test]
    fn batch_is_split_invariant() {
        let m = model(Strategy::LatinSquare, 1, [1.0, 2.0, 3.0, 4.0], 0.5, 1.0);
        let whole = simulate_batch(&m, 6, 10, 3).unwrap();
        let mut parts = simulate_range(&m, 6, 3, 0..4).unwrap();
        parts.extend(simulate_range(&m, 6, 3, 4..10).unwrap());
        assert_eq!(whole.datasets, parts);
        let one = simulate_batch(&m, 6, 1, 3).unwrap();
        assert_eq!(one.datasets[0].responses, simulate_dataset(&m, 6, dataset_seed(3, 0)).unwrap().responses);
    }
}
