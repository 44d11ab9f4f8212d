//! Simulation engine for *a priori* power analysis of within-subject
//! experiments.
//!
//! The crate is `no_std` and only needs an allocator. It covers:
//!
//! - [`design`]: independent variables, counterbalancing strategies and
//!   trial-table generation (complete orderings, Williams squares, random).
//! - [`means`]: the lockable grand/group/condition mean hierarchy with
//!   change propagation.
//! - [`confound`]: fatigue, carry-over and practice effects, slider ranges
//!   and previews.
//! - [`simulate`]: Monte Carlo datasets from a random-intercept population
//!   model with confound injection.
//! - [`stats`]: paired effect sizes, noncentral-t power, simulated power
//!   curves and family-wise adjusted pairwise intervals.
//! - [`history`]: the exploration tree of parameter snapshots.
//!
//! IO, persistence, parallel drivers and the HTTP service live in the
//! `powerforge` crate.
#![no_std]

extern crate alloc;

pub mod confound;
pub mod design;
pub mod error;
pub mod history;
pub mod means;
pub mod rng;
pub mod simulate;
pub mod stats;

pub use design::{
    Condition, DependentVariableMeta, Direction, ExperimentDesign, IndependentVariable, Strategy,
    TrialTable,
};
pub use error::{Error, Result};
pub use history::{HistoryNode, HistoryTree, NodeId, Snapshot};
pub use means::{MeanNode, MeanTree};
pub use confound::{ConfoundSpec, SliderRange};
pub use simulate::{PopulationModel, SimulatedDataset, SimulationBatch};
pub use stats::{LevelPair, PairwiseFrame, PowerCurve, PowerPoint};

