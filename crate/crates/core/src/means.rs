//! The lockable hierarchy of expected means.
//!
//! The tree is rooted at the grand mean; its children are the group means of
//! the axis IV's levels, and their children are the condition means. Only
//! the condition values are stored; group and grand means are always
//! recomputed from them.
//!
//! Moving a node first pushes its change down, split evenly over the unlocked
//! children. The change then travels up: unlocked parents simply follow,
//! while a locked parent keeps its value by pushing the opposite change onto
//! the unlocked siblings. A move with no feasible redistribution is rejected
//! as a whole.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::design::ExperimentDesign;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MeanNode {
    Grand,
    /// Group mean of one level of the axis IV.
    Group(usize),
    /// Condition mean, by canonical condition index.
    Condition(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub value: f64,
    pub locked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeanTreeParts", into = "MeanTreeParts")]
pub struct MeanTree {
    level_counts: Vec<usize>,
    axis_iv: usize,
    leaves: Vec<Leaf>,
    group_locked: Vec<bool>,
    grand_locked: bool,
}

/// Serialized form of a [`MeanTree`], validated on the way back in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTreeParts {
    pub level_counts: Vec<usize>,
    pub axis_iv: usize,
    pub leaves: Vec<LeafEntry>,
    pub group_locked: Vec<bool>,
    pub grand_locked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafEntry {
    pub condition: usize,
    pub value: f64,
    pub locked: bool,
}

impl TryFrom<MeanTreeParts> for MeanTree {
    type Error = Error;

    fn try_from(p: MeanTreeParts) -> Result<Self> {
        if p.leaves.iter().enumerate().any(|(i, l)| l.condition != i) {
            return Err(Error::InvalidArgument("leaves must be listed in condition order".into()));
        }
        let leaves = p.leaves.iter().map(|l| Leaf { value: l.value, locked: l.locked }).collect();
        MeanTree::from_parts(p.level_counts, p.axis_iv, leaves, p.group_locked, p.grand_locked)
    }
}

impl From<MeanTree> for MeanTreeParts {
    fn from(t: MeanTree) -> Self {
        Self {
            level_counts: t.level_counts,
            axis_iv: t.axis_iv,
            leaves: t
                .leaves
                .iter()
                .enumerate()
                .map(|(condition, l)| LeafEntry { condition, value: l.value, locked: l.locked })
                .collect(),
            group_locked: t.group_locked,
            grand_locked: t.grand_locked,
        }
    }
}

impl MeanTree {
    /// Tree with every condition mean at `value` and nothing locked.
    pub fn uniform(design: &ExperimentDesign, value: f64) -> Self {
        let level_counts: Vec<usize> = design.ivs.iter().map(|iv| iv.levels.len()).collect();
        let k = level_counts.iter().product();
        Self {
            axis_iv: 0,
            group_locked: vec![false; level_counts[0]],
            leaves: vec![Leaf { value, locked: false }; k],
            level_counts,
            grand_locked: false,
        }
    }

    /// Tree initialized at the midpoint of the DV's expected range.
    pub fn midpoint(design: &ExperimentDesign) -> Self {
        Self::uniform(design, design.dv.midpoint())
    }

    pub fn from_parts(
        level_counts: Vec<usize>,
        axis_iv: usize,
        leaves: Vec<Leaf>,
        group_locked: Vec<bool>,
        grand_locked: bool,
    ) -> Result<Self> {
        if level_counts.is_empty() || axis_iv >= level_counts.len() {
            return Err(Error::InvalidArgument("axis IV out of range".into()));
        }
        if leaves.len() != level_counts.iter().product::<usize>() {
            return Err(Error::InvalidArgument("leaf count does not match conditions".into()));
        }
        if group_locked.len() != level_counts[axis_iv] {
            return Err(Error::InvalidArgument("group lock count does not match axis levels".into()));
        }
        if leaves.iter().any(|l| !l.value.is_finite()) {
            return Err(Error::InvalidArgument("condition means must be finite".into()));
        }
        Ok(Self {
            level_counts,
            axis_iv,
            leaves,
            group_locked,
            grand_locked,
        })
    }

    pub fn level_counts(&self) -> &[usize] {
        &self.level_counts
    }

    pub fn axis_iv(&self) -> usize {
        self.axis_iv
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn group_locks(&self) -> &[bool] {
        &self.group_locked
    }

    pub fn grand_locked(&self) -> bool {
        self.grand_locked
    }

    pub fn group_count(&self) -> usize {
        self.level_counts[self.axis_iv]
    }

    /// Level of `iv` in the condition with canonical index `condition`.
    fn level_of(&self, condition: usize, iv: usize) -> usize {
        let stride: usize = self.level_counts[iv + 1..].iter().product();
        (condition / stride) % self.level_counts[iv]
    }

    fn group_of(&self, condition: usize) -> usize {
        self.level_of(condition, self.axis_iv)
    }

    fn members(&self, iv: usize, level: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.leaves.len()).filter(move |&c| self.level_of(c, iv) == level)
    }

    fn group_members(&self, g: usize) -> impl Iterator<Item = usize> + '_ {
        self.members(self.axis_iv, g)
    }

    fn group_size(&self) -> usize {
        self.leaves.len() / self.group_count()
    }

    /// Condition means by canonical condition index.
    pub fn cell_means(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.value).collect()
    }

    pub fn grand_mean(&self) -> f64 {
        self.leaves.iter().map(|l| l.value).sum::<f64>() / self.leaves.len() as f64
    }

    pub fn group_mean(&self, g: usize) -> f64 {
        self.level_mean(self.axis_iv, g)
    }

    /// Mean over all conditions at `level` of `iv`; for non-axis IVs this is
    /// a read-only view.
    pub fn level_mean(&self, iv: usize, level: usize) -> f64 {
        let (sum, count) = self
            .members(iv, level)
            .fold((0.0, 0usize), |(s, n), c| (s + self.leaves[c].value, n + 1));
        sum / count as f64
    }

    pub fn value(&self, node: MeanNode) -> Result<f64> {
        self.check_node(node)?;
        Ok(match node {
            MeanNode::Grand => self.grand_mean(),
            MeanNode::Group(g) => self.group_mean(g),
            MeanNode::Condition(c) => self.leaves[c].value,
        })
    }

    pub fn is_locked(&self, node: MeanNode) -> Result<bool> {
        self.check_node(node)?;
        Ok(match node {
            MeanNode::Grand => self.grand_locked,
            MeanNode::Group(g) => self.group_locked[g],
            MeanNode::Condition(c) => self.leaves[c].locked,
        })
    }

    fn check_node(&self, node: MeanNode) -> Result<()> {
        let ok = match node {
            MeanNode::Grand => true,
            MeanNode::Group(g) => g < self.group_count(),
            MeanNode::Condition(c) => c < self.leaves.len(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("mean node out of range".into()))
        }
    }

    pub fn toggle_lock(&self, node: MeanNode) -> Result<MeanTree> {
        self.check_node(node)?;
        let mut next = self.clone();
        match node {
            MeanNode::Grand => next.grand_locked = !next.grand_locked,
            MeanNode::Group(g) => next.group_locked[g] = !next.group_locked[g],
            MeanNode::Condition(c) => next.leaves[c].locked = !next.leaves[c].locked,
        }
        Ok(next)
    }

    /// Regroups by another IV. Condition means are kept; all locks are cleared.
    pub fn switch_axis(&self, iv: usize) -> Result<MeanTree> {
        if iv >= self.level_counts.len() {
            return Err(Error::InvalidArgument("axis IV out of range".into()));
        }
        Ok(MeanTree {
            level_counts: self.level_counts.clone(),
            axis_iv: iv,
            leaves: self
                .leaves
                .iter()
                .map(|l| Leaf { value: l.value, locked: false })
                .collect(),
            group_locked: vec![false; self.level_counts[iv]],
            grand_locked: false,
        })
    }

    fn movable_members(&self, g: usize) -> Vec<usize> {
        self.group_members(g).filter(|&c| !self.leaves[c].locked).collect()
    }

    fn group_movable(&self, g: usize) -> bool {
        !self.group_locked[g] && self.group_members(g).any(|c| !self.leaves[c].locked)
    }

    /// Moves group `g`'s mean by `delta`, split evenly over its unlocked conditions.
    fn shift_group(&mut self, g: usize, delta: f64) {
        let movable = self.movable_members(g);
        debug_assert!(!movable.is_empty());
        let per_leaf = delta * self.group_size() as f64 / movable.len() as f64;
        for c in movable {
            self.leaves[c].value += per_leaf;
        }
    }

    fn movable_sibling_groups(&self, g: usize) -> Vec<usize> {
        (0..self.group_count())
            .filter(|&s| s != g && self.group_movable(s))
            .collect()
    }

    /// Sets `node` to `new_value`, propagating through the hierarchy.
    pub fn set_mean(&self, node: MeanNode, new_value: f64) -> Result<MeanTree> {
        self.check_node(node)?;
        if !new_value.is_finite() {
            return Err(Error::InvalidArgument("mean must be finite".into()));
        }
        if self.is_locked(node)? {
            return Err(Error::RejectedMove("target mean is locked"));
        }
        let current = self.value(node)?;
        let delta = new_value - current;
        // Derived means carry rounding noise; a move within it is a no-op.
        if delta.abs() <= 1e-12 * current.abs().max(1.0) {
            return Ok(self.clone());
        }
        let mut next = self.clone();
        match node {
            MeanNode::Grand => {
                let groups: Vec<usize> =
                    (0..self.group_count()).filter(|&g| self.group_movable(g)).collect();
                if groups.is_empty() {
                    return Err(Error::RejectedMove("all children of the grand mean are locked"));
                }
                let per_group = delta * self.group_count() as f64 / groups.len() as f64;
                for g in groups {
                    next.shift_group(g, per_group);
                }
            }
            MeanNode::Group(g) => {
                if self.movable_members(g).is_empty() {
                    return Err(Error::RejectedMove("all conditions of the group are locked"));
                }
                if self.grand_locked {
                    let siblings = self.movable_sibling_groups(g);
                    if siblings.is_empty() {
                        return Err(Error::RejectedMove(
                            "grand mean and all sibling groups are locked",
                        ));
                    }
                    let back = -delta / siblings.len() as f64;
                    for s in siblings {
                        next.shift_group(s, back);
                    }
                }
                next.shift_group(g, delta);
            }
            MeanNode::Condition(c) => {
                let g = self.group_of(c);
                if self.group_locked[g] {
                    let siblings: Vec<usize> =
                        self.movable_members(g).into_iter().filter(|&s| s != c).collect();
                    if siblings.is_empty() {
                        return Err(Error::RejectedMove(
                            "group mean and all sibling conditions are locked",
                        ));
                    }
                    let back = -delta / siblings.len() as f64;
                    for s in siblings {
                        next.leaves[s].value += back;
                    }
                } else if self.grand_locked {
                    let siblings = self.movable_sibling_groups(g);
                    if siblings.is_empty() {
                        return Err(Error::RejectedMove(
                            "grand mean and all sibling groups are locked",
                        ));
                    }
                    let back = -(delta / self.group_size() as f64) / siblings.len() as f64;
                    for s in siblings {
                        next.shift_group(s, back);
                    }
                }
                next.leaves[c].value = new_value;
            }
        }
        Ok(next)
    }
}
