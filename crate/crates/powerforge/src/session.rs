//! Session state and the update dispatcher.
//!
//! A session owns one design and everything the user adjusts around it.
//! Every change arrives as an [`UpdateRequest`]; replaying the same requests
//! against the same starting session always yields the same state.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use powerforge_core::confound::{confound_preview, slider_ranges, ConfoundId, PreviewBar};
use powerforge_core::design::{generate_trial_table, validate_balance, validate_ivs, BalanceWarning};
use powerforge_core::stats::power::{check_curve_range, lower_power_pairs, DEFAULT_ALPHA, DEFAULT_DATASETS};
use powerforge_core::stats::pairwise::DEFAULT_FRAMES;
use powerforge_core::stats::{all_pairs, analytic_power, min_power_pair, pairwise_frames, AxisMode, PairPower};
use powerforge_core::{
    ConfoundSpec, DependentVariableMeta, Error, ExperimentDesign, HistoryTree, IndependentVariable, LevelPair,
    MeanNode, MeanTree, NodeId, PairwiseFrame, PopulationModel, SliderRange, Snapshot, Strategy, TrialTable,
};

use crate::document::{SessionDocument, FORMAT_VERSION};
use crate::error::{AppError, Result};

pub const DEFAULT_PARTICIPANTS: u32 = 12;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_X_RANGE: XRange = XRange { lo: 6, hi: 50 };

/// Inclusive range of curve positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XRange {
    pub lo: u32,
    pub hi: u32,
}

impl XRange {
    pub fn values(&self) -> Vec<u32> {
        (self.lo..=self.hi).collect()
    }
}

impl std::str::FromStr for XRange {
    type Err = AppError;

    /// `LO..HI`, both ends included.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || AppError::Core(Error::InvalidArgument(format!("range must look like LO..HI, got {s}")));
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        Ok(Self { lo, hi })
    }
}

/// Which pair the power trade-off view follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PowerSelection {
    Pair { pair: LevelPair },
    /// Whichever pair has the lowest power at the current design.
    MinimumPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Simulated datasets per curve point (K).
    pub datasets: usize,
    pub alpha: f64,
    pub seed: u64,
    pub x_range: XRange,
    pub axis: AxisMode,
    pub selection: PowerSelection,
    /// Pairs shown in the pairwise view; they also set the family size.
    pub pairwise_pairs: Vec<LevelPair>,
    pub frames: usize,
}

impl Settings {
    fn defaults(design: &ExperimentDesign) -> Self {
        let pairs = all_pairs(design);
        Self {
            datasets: DEFAULT_DATASETS,
            alpha: DEFAULT_ALPHA,
            seed: DEFAULT_SEED,
            x_range: DEFAULT_X_RANGE,
            axis: AxisMode::Participants,
            selection: PowerSelection::Pair { pair: pairs[0] },
            pairwise_pairs: pairs,
            frames: DEFAULT_FRAMES,
        }
    }

    fn validate(&self, design: &ExperimentDesign) -> Result<()> {
        let bad = |msg: &str| Err(AppError::Core(Error::InvalidArgument(msg.into())));
        if self.datasets < 1 {
            return bad("need at least one simulated dataset");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.frames < 1 {
            return bad("need at least one frame");
        }
        if self.x_range.lo > self.x_range.hi {
            return bad("curve range is empty");
        }
        check_curve_range(self.axis, &[self.x_range.lo])?;
        if let PowerSelection::Pair { pair } = &self.selection {
            pair.validate(design)?;
        }
        if self.pairwise_pairs.is_empty() {
            return bad("select at least one pair for the pairwise view");
        }
        for p in &self.pairwise_pairs {
            p.validate(design)?;
        }
        Ok(())
    }
}

/// Strategy, replications and participants: the design controls the user
/// adjusts after the variables are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignControls {
    pub strategy: Strategy,
    pub replications: u32,
    pub participants: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Update {
    MoveMean {
        node: MeanNode,
        value: f64,
    },
    ToggleLock {
        node: MeanNode,
    },
    SwitchAxis {
        iv: usize,
    },
    Confound {
        confound: ConfoundId,
        value: f64,
    },
    /// Replaces the whole confound specification, noise terms included.
    Confounds {
        confounds: ConfoundSpec,
    },
    Design {
        #[serde(default)]
        strategy: Option<Strategy>,
        #[serde(default)]
        replications: Option<u32>,
        #[serde(default)]
        participants: Option<u32>,
    },
    PowerSelection {
        #[serde(default)]
        selection: Option<PowerSelection>,
        #[serde(default)]
        axis: Option<AxisMode>,
    },
    PairwisePairs {
        pairs: Vec<LevelPair>,
    },
    Settings {
        #[serde(default)]
        datasets: Option<usize>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        x_range: Option<XRange>,
        #[serde(default)]
        frames: Option<usize>,
    },
    Restore {
        node: NodeId,
    },
    Mark {
        node: NodeId,
        marked: bool,
    },
}

/// An update plus whether it ends a gesture. Committed updates record a
/// history node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRequest {
    #[serde(flatten)]
    pub update: Update,
    #[serde(default)]
    pub commit: bool,
}

impl UpdateRequest {
    pub fn commit(update: Update) -> Self {
        Self { update, commit: true }
    }

    pub fn transient(update: Update) -> Self {
        Self { update, commit: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub epoch: u64,
    pub recorded: Option<NodeId>,
    /// The power curve inputs changed; in-flight curves are superseded.
    pub curve_stale: bool,
    /// The pairwise frames need recomputing.
    pub pairwise_stale: bool,
}

/// Everything a power curve computation needs, resolved from the session.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRequest {
    pub model: PopulationModel,
    pub pair: LevelPair,
    pub axis: AxisMode,
    pub xs: Vec<u32>,
    pub datasets: usize,
    pub alpha: f64,
    pub seed: u64,
}

/// Inputs that determine the pairwise frames; equal inputs, equal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseInputs {
    pub model: PopulationModel,
    pub pairs: Vec<LevelPair>,
    pub frames: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl PairwiseInputs {
    pub fn compute(&self) -> Result<Vec<Vec<PairwiseFrame>>> {
        let n = self.model.design.participants;
        Ok(pairwise_frames(&self.model, &self.pairs, n, self.frames, self.alpha, self.seed)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    design: ExperimentDesign,
    means: MeanTree,
    confounds: ConfoundSpec,
    history: HistoryTree,
    settings: Settings,
    epoch: u64,
    extra: BTreeMap<String, Value>,
}

impl Session {
    /// New session with every cell at the range midpoint, no confounds and
    /// a history rooted at that state.
    pub fn create(dv: DependentVariableMeta, ivs: Vec<IndependentVariable>) -> Result<Self> {
        dv.validate()?;
        validate_ivs(&ivs)?;
        let design = ExperimentDesign {
            ivs,
            dv,
            strategy: Strategy::LatinSquare,
            replications: 1,
            participants: DEFAULT_PARTICIPANTS,
        };
        design.validate()?;
        let means = MeanTree::midpoint(&design);
        let confounds = ConfoundSpec::none(&design.dv);
        let settings = Settings::defaults(&design);
        let root = snapshot_of(&design, &means, &confounds, &settings)?;
        Ok(Self {
            design,
            means,
            confounds,
            history: HistoryTree::new(root),
            settings,
            epoch: 0,
            extra: BTreeMap::new(),
        })
    }

    pub fn design(&self) -> &ExperimentDesign {
        &self.design
    }

    pub fn means(&self) -> &MeanTree {
        &self.means
    }

    pub fn confounds(&self) -> &ConfoundSpec {
        &self.confounds
    }

    pub fn history(&self) -> &HistoryTree {
        &self.history
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Bumped whenever the power curve inputs change.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub(crate) fn set_epoch(&mut self, epoch: u64) {
        self.epoch = epoch;
    }

    /// Adjusts settings outside the update log, for one-off batch runs.
    pub fn override_settings(&mut self, f: impl FnOnce(&mut Settings)) -> Result<()> {
        let mut s = self.settings.clone();
        f(&mut s);
        s.validate(&self.design)?;
        self.settings = s;
        Ok(())
    }

    pub fn model(&self) -> PopulationModel {
        PopulationModel::new(self.design.clone(), self.means.cell_means(), self.confounds)
    }

    pub fn slider_ranges(&self) -> Vec<SliderRange> {
        slider_ranges(&self.design.dv)
    }

    /// Every pair of levels the pairwise view can show.
    pub fn all_pairs(&self) -> Vec<LevelPair> {
        all_pairs(&self.design)
    }

    pub fn trial_table(&self) -> TrialTable {
        generate_trial_table(&self.design, self.settings.seed)
    }

    pub fn balance_warnings(&self) -> Vec<BalanceWarning> {
        validate_balance(&self.design, &self.trial_table())
    }

    pub fn confound_preview(&self) -> Result<Vec<PreviewBar>> {
        Ok(confound_preview(&self.design, &self.confounds, &self.means.cell_means(), self.settings.seed)?)
    }

    /// The pair the power view displays, with its analytic power at the
    /// current design.
    pub fn displayed_power(&self) -> Result<PairPower> {
        displayed_power(&self.model(), &self.settings)
    }

    /// Pairs whose power falls below the displayed one.
    pub fn lower_power_pairs(&self) -> Result<Vec<PairPower>> {
        let shown = self.displayed_power()?.pair;
        let n = self.design.participants;
        Ok(lower_power_pairs(&self.model(), &self.all_pairs(), &shown, n, self.settings.alpha)?)
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        snapshot_of(&self.design, &self.means, &self.confounds, &self.settings)
    }

    pub fn curve_request(&self) -> Result<CurveRequest> {
        let model = self.model();
        let pair = displayed_power(&model, &self.settings)?.pair;
        let xs = self.settings.x_range.values();
        check_curve_range(self.settings.axis, &xs)?;
        Ok(CurveRequest {
            model,
            pair,
            axis: self.settings.axis,
            xs,
            datasets: self.settings.datasets,
            alpha: self.settings.alpha,
            seed: self.settings.seed,
        })
    }

    pub fn pairwise_inputs(&self) -> PairwiseInputs {
        PairwiseInputs {
            model: self.model(),
            pairs: self.settings.pairwise_pairs.clone(),
            frames: self.settings.frames,
            alpha: self.settings.alpha,
            seed: self.settings.seed,
        }
    }

    /// Applies one update atomically: on error the session is unchanged.
    pub fn apply(&mut self, request: &UpdateRequest) -> Result<UpdateOutcome> {
        let mut next = self.clone();
        next.apply_in_place(&request.update)?;
        next.design.validate()?;
        next.confounds.validate(&next.design.dv)?;
        next.settings.validate(&next.design)?;

        let curve_stale = next.curve_request().ok() != self.curve_request().ok();
        let pairwise_stale = next.pairwise_inputs() != self.pairwise_inputs();
        let recorded = match request.update {
            Update::Restore { .. } | Update::Mark { .. } => None,
            _ if request.commit => {
                let from = next.history.current();
                let snapshot = next.snapshot()?;
                let id = next.history.record(from, snapshot)?;
                (id != from).then_some(id)
            }
            _ => None,
        };
        if curve_stale {
            next.epoch += 1;
        }
        *self = next;
        Ok(UpdateOutcome {
            epoch: self.epoch,
            recorded,
            curve_stale,
            pairwise_stale,
        })
    }

    fn apply_in_place(&mut self, update: &Update) -> Result<()> {
        match update {
            Update::MoveMean { node, value } => self.means = self.means.set_mean(*node, *value)?,
            Update::ToggleLock { node } => self.means = self.means.toggle_lock(*node)?,
            Update::SwitchAxis { iv } => self.means = self.means.switch_axis(*iv)?,
            Update::Confound { confound, value } => self.confounds.set(*confound, *value),
            Update::Confounds { confounds } => self.confounds = *confounds,
            Update::Design {
                strategy,
                replications,
                participants,
            } => {
                if let Some(s) = strategy {
                    self.design.strategy = *s;
                }
                if let Some(r) = replications {
                    self.design.replications = *r;
                }
                if let Some(n) = participants {
                    self.design.participants = *n;
                }
            }
            Update::PowerSelection { selection, axis } => {
                if let Some(s) = selection {
                    self.settings.selection = *s;
                }
                if let Some(a) = axis {
                    self.settings.axis = *a;
                }
            }
            Update::PairwisePairs { pairs } => {
                let mut pairs = pairs.clone();
                pairs.sort();
                pairs.dedup();
                self.settings.pairwise_pairs = pairs;
            }
            Update::Settings {
                datasets,
                alpha,
                seed,
                x_range,
                frames,
            } => {
                let s = &mut self.settings;
                if let Some(v) = datasets {
                    s.datasets = *v;
                }
                if let Some(v) = alpha {
                    s.alpha = *v;
                }
                if let Some(v) = seed {
                    s.seed = *v;
                }
                if let Some(v) = x_range {
                    s.x_range = *v;
                }
                if let Some(v) = frames {
                    s.frames = *v;
                }
            }
            Update::Restore { node } => {
                // The power view keeps its own pair and axis selection.
                let snap = self.history.restore(*node)?;
                self.means = snap.means;
                self.confounds = snap.confounds;
                self.design.strategy = snap.strategy;
                self.design.replications = snap.replications;
                self.design.participants = snap.participants;
                self.settings.pairwise_pairs = snap.selected_pairs;
            }
            Update::Mark { node, marked } => self.history.set_mark(*node, *marked)?,
        }
        Ok(())
    }

    /// Applies a recorded log in order.
    pub fn replay<'a>(mut self, log: impl IntoIterator<Item = &'a UpdateRequest>) -> Result<Self> {
        for request in log {
            self.apply(request)?;
        }
        Ok(self)
    }

    pub fn to_document(&self) -> SessionDocument {
        SessionDocument {
            version: FORMAT_VERSION.to_string(),
            dv_meta: self.design.dv.clone(),
            ivs: self.design.ivs.clone(),
            design: DesignControls {
                strategy: self.design.strategy,
                replications: self.design.replications,
                participants: self.design.participants,
            },
            mean_tree: self.means.clone(),
            confounds: self.confounds,
            history: self.history.clone(),
            settings: self.settings.clone(),
            extra: self.extra.clone(),
        }
    }

    pub fn from_document(doc: SessionDocument) -> Result<Self> {
        if doc.version != FORMAT_VERSION {
            return Err(AppError::Document(format!(
                "unsupported version {:?}, expected {FORMAT_VERSION:?}",
                doc.version
            )));
        }
        let design = ExperimentDesign {
            ivs: doc.ivs,
            dv: doc.dv_meta,
            strategy: doc.design.strategy,
            replications: doc.design.replications,
            participants: doc.design.participants,
        };
        design.validate()?;
        let counts: Vec<usize> = design.ivs.iter().map(|iv| iv.levels.len()).collect();
        let fits = |t: &MeanTree| t.level_counts() == counts.as_slice();
        if !fits(&doc.mean_tree) {
            return Err(AppError::Document("mean tree does not match the variables".into()));
        }
        doc.confounds.validate(&design.dv)?;
        doc.settings.validate(&design)?;
        for node in doc.history.nodes() {
            let s = &node.snapshot;
            let mut d = design.clone();
            d.strategy = s.strategy;
            d.replications = s.replications;
            d.participants = s.participants;
            if !fits(&s.means) || d.validate().is_err() || s.selected_pairs.iter().any(|p| p.validate(&d).is_err()) {
                return Err(AppError::Document(format!("history node {} does not match the design", node.id.0)));
            }
        }
        Ok(Self {
            design,
            means: doc.mean_tree,
            confounds: doc.confounds,
            history: doc.history,
            settings: doc.settings,
            epoch: 0,
            extra: doc.extra,
        })
    }
}

fn displayed_power(model: &PopulationModel, settings: &Settings) -> Result<PairPower> {
    let n = model.design.participants;
    Ok(match settings.selection {
        PowerSelection::Pair { pair } => PairPower {
            pair,
            power: analytic_power(model, &pair, n, settings.alpha)?,
        },
        PowerSelection::MinimumPower => min_power_pair(model, &all_pairs(&model.design), n, settings.alpha)?,
    })
}

fn snapshot_of(
    design: &ExperimentDesign,
    means: &MeanTree,
    confounds: &ConfoundSpec,
    settings: &Settings,
) -> Result<Snapshot> {
    let model = PopulationModel::new(design.clone(), means.cell_means(), *confounds);
    Ok(Snapshot {
        means: means.clone(),
        confounds: *confounds,
        strategy: design.strategy,
        replications: design.replications,
        participants: design.participants,
        selected_pairs: settings.pairwise_pairs.clone(),
        power: displayed_power(&model, settings)?.power,
    })
}
