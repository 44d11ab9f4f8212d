//! Exploration history: a tree of self-contained parameter snapshots.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::confound::ConfoundSpec;
use crate::design::Strategy;
use crate::error::{Error, Result};
use crate::means::MeanTree;
use crate::stats::LevelPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

/// Everything needed to restore a scenario, plus the power it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub means: MeanTree,
    pub confounds: ConfoundSpec,
    pub strategy: Strategy,
    pub replications: u32,
    pub participants: u32,
    pub selected_pairs: Vec<LevelPair>,
    /// Analytic power of the trade-off pair at the snapshot's participant
    /// count, frozen when recorded.
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub marked: bool,
    pub depth: u32,
    pub snapshot: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HistoryParts", into = "HistoryParts")]
pub struct HistoryTree {
    nodes: Vec<HistoryNode>,
    current: NodeId,
}

#[derive(Serialize, Deserialize)]
struct HistoryParts {
    nodes: Vec<HistoryNode>,
    current: NodeId,
}

impl TryFrom<HistoryParts> for HistoryTree {
    type Error = Error;

    fn try_from(p: HistoryParts) -> Result<Self> {
        HistoryTree::from_parts(p.nodes, p.current)
    }
}

impl From<HistoryTree> for HistoryParts {
    fn from(t: HistoryTree) -> Self {
        Self {
            nodes: t.nodes,
            current: t.current,
        }
    }
}

impl HistoryTree {
    pub fn new(root: Snapshot) -> Self {
        Self {
            nodes: alloc::vec![HistoryNode {
                id: NodeId(0),
                parent: None,
                marked: false,
                depth: 0,
                snapshot: root,
            }],
            current: NodeId(0),
        }
    }

    /// Rebuilds a tree from stored nodes, checking that it is a tree.
    pub fn from_parts(nodes: Vec<HistoryNode>, current: NodeId) -> Result<Self> {
        let tree = Self { nodes, current };
        tree.check_structure()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[HistoryNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &HistoryNode {
        &self.nodes[0]
    }

    pub fn current(&self) -> NodeId {
        self.current
    }

    pub fn node(&self, id: NodeId) -> Result<&HistoryNode> {
        self.nodes.get(id.0 as usize).ok_or(Error::UnknownNode(id.0))
    }

    fn node_mut(&mut self, id: NodeId) -> Result<&mut HistoryNode> {
        self.nodes.get_mut(id.0 as usize).ok_or(Error::UnknownNode(id.0))
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = &HistoryNode> + '_ {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    /// Appends `snapshot` under `from` and makes it current. Recording the
    /// snapshot `from` already holds is a no-op that returns `from`.
    pub fn record(&mut self, from: NodeId, snapshot: Snapshot) -> Result<NodeId> {
        let parent = self.node(from)?;
        if parent.snapshot == snapshot {
            self.current = from;
            return Ok(from);
        }
        let id = NodeId(self.nodes.len() as u64);
        let depth = parent.depth + 1;
        self.nodes.push(HistoryNode {
            id,
            parent: Some(from),
            marked: false,
            depth,
            snapshot,
        });
        self.current = id;
        Ok(id)
    }

    /// Moves the current pointer to `id` and hands back its snapshot.
    pub fn restore(&mut self, id: NodeId) -> Result<Snapshot> {
        let snapshot = self.node(id)?.snapshot.clone();
        self.current = id;
        Ok(snapshot)
    }

    pub fn set_mark(&mut self, id: NodeId, marked: bool) -> Result<()> {
        self.node_mut(id)?.marked = marked;
        Ok(())
    }

    /// Field-by-field comparison of exactly two nodes.
    pub fn preview_diff(&self, current: NodeId, hover: NodeId) -> Result<SnapshotDiff> {
        Ok(SnapshotDiff::between(&self.node(current)?.snapshot, &self.node(hover)?.snapshot))
    }

    /// One root, parents precede children, depths consistent, current valid.
    pub fn check_structure(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(alloc::format!("history: {msg}")));
        let Some(root) = self.nodes.first() else {
            return bad("empty tree");
        };
        if root.parent.is_some() || root.depth != 0 {
            return bad("first node must be the root");
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id.0 != i as u64 {
                return bad("node ids must be dense and ordered");
            }
            if i == 0 {
                continue;
            }
            let Some(p) = n.parent else {
                return bad("more than one root");
            };
            // Parents precede children, which rules out cycles.
            if p.0 >= n.id.0 {
                return bad("parent must precede child");
            }
            if n.depth != self.nodes[p.0 as usize].depth + 1 {
                return bad("depth must be parent depth + 1");
            }
        }
        if self.current.0 as usize >= self.nodes.len() {
            return bad("current node out of range");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDelta {
    pub condition: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldDelta<T> {
    pub field: &'static str,
    pub from: T,
    pub to: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotDiff {
    pub cells: Vec<CellDelta>,
    pub locks: Vec<FieldDelta<bool>>,
    pub axis: Option<FieldDelta<usize>>,
    pub confounds: Vec<FieldDelta<f64>>,
    pub strategy: Option<FieldDelta<Strategy>>,
    pub design: Vec<FieldDelta<u32>>,
    pub selected_pairs: Option<FieldDelta<Vec<LevelPair>>>,
    pub power_current: f64,
    pub power_preview: f64,
}

fn delta<T: PartialEq + Clone>(field: &'static str, from: &T, to: &T) -> Option<FieldDelta<T>> {
    (from != to).then(|| FieldDelta {
        field,
        from: from.clone(),
        to: to.clone(),
    })
}

impl SnapshotDiff {
    pub fn between(a: &Snapshot, b: &Snapshot) -> Self {
        let cells = a
            .means
            .leaves()
            .iter()
            .zip(b.means.leaves())
            .enumerate()
            .filter(|(_, (x, y))| x.value != y.value)
            .map(|(condition, (x, y))| CellDelta {
                condition,
                from: x.value,
                to: y.value,
            })
            .collect();
        let mut locks = Vec::new();
        locks.extend(delta("grand", &a.means.grand_locked(), &b.means.grand_locked()));
        if a.means.axis_iv() == b.means.axis_iv() {
            for (x, y) in a.means.group_locks().iter().zip(b.means.group_locks()) {
                locks.extend(delta("group", x, y));
            }
        }
        for (x, y) in a.means.leaves().iter().zip(b.means.leaves()) {
            locks.extend(delta("condition", &x.locked, &y.locked));
        }
        let (ca, cb) = (&a.confounds, &b.confounds);
        let confounds = [
            delta("fatigue_per_trial", &ca.fatigue_per_trial, &cb.fatigue_per_trial),
            delta("carryover_magnitude", &ca.carryover_magnitude, &cb.carryover_magnitude),
            delta("carryover_decay", &ca.carryover_decay, &cb.carryover_decay),
            delta("practice_within_condition", &ca.practice_within_condition, &cb.practice_within_condition),
            delta("practice_whole_experiment", &ca.practice_whole_experiment, &cb.practice_whole_experiment),
            delta("participant_sd", &ca.participant_sd, &cb.participant_sd),
            delta("residual_sd", &ca.residual_sd, &cb.residual_sd),
        ]
        .into_iter()
        .flatten()
        .collect();
        let design = [
            delta("replications", &a.replications, &b.replications),
            delta("participants", &a.participants, &b.participants),
        ]
        .into_iter()
        .flatten()
        .collect();
        Self {
            cells,
            locks,
            axis: delta("axis_iv", &a.means.axis_iv(), &b.means.axis_iv()),
            confounds,
            strategy: delta("strategy", &a.strategy, &b.strategy),
            design,
            selected_pairs: delta("selected_pairs", &a.selected_pairs, &b.selected_pairs),
            power_current: a.power,
            power_preview: b.power,
        }
    }

    /// No parameter differs (the power summaries are always carried).
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
            && self.locks.is_empty()
            && self.axis.is_none()
            && self.confounds.is_empty()
            && self.strategy.is_none()
            && self.design.is_empty()
            && self.selected_pairs.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::fixtures::two_by_two;
    use crate::means::MeanNode;

    fn root() -> Snapshot {
        let design = two_by_two(Strategy::Random, 12, 1);
        Snapshot {
            means: MeanTree::midpoint(&design),
            confounds: ConfoundSpec::none(&design.dv),
            strategy: Strategy::Random,
            replications: 1,
            participants: 12,
            selected_pairs: alloc::vec![LevelPair::new(0, 0, 1)],
            power: 0.05,
        }
    }

    fn with_fatigue(f: f64) -> Snapshot {
        let mut s = root();
        s.confounds.fatigue_per_trial = f;
        s
    }

    #[test]
    fn record_appends_and_debounces() {
        let mut h = HistoryTree::new(root());
        let s1 = with_fatigue(1.0);
        let a = h.record(h.current(), s1.clone()).unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h.current(), a);
        assert_eq!(h.record(a, s1).unwrap(), a);
        assert_eq!(h.len(), 2);
        assert_eq!(h.node(a).unwrap().depth, 1);
        assert!(h.record(NodeId(9), root()).is_err());
    }

    #[test]
    fn restore_then_record_branches() {
        let mut h = HistoryTree::new(root());
        let a = h.record(NodeId(0), with_fatigue(1.0)).unwrap();
        h.record(a, with_fatigue(2.0)).unwrap();
        let restored = h.restore(a).unwrap();
        assert_eq!(h.record(a, restored).unwrap(), a);
        h.record(a, with_fatigue(3.0)).unwrap();
        assert_eq!(h.children(a).count(), 2);
        assert!(h.check_structure().is_ok());
        assert_eq!(h.restore(NodeId(0)).unwrap(), root());
        assert_eq!(h.restore(NodeId(77)), Err(Error::UnknownNode(77)));
    }

    #[test]
    fn marks() {
        let mut h = HistoryTree::new(root());
        let before = h.clone();
        h.set_mark(NodeId(0), true).unwrap();
        assert!(h.root().marked);
        h.set_mark(NodeId(0), false).unwrap();
        assert_eq!(h, before);
        assert!(h.set_mark(NodeId(3), true).is_err());
    }

    #[test]
    fn diffs() {
        let mut h = HistoryTree::new(root());
        let a = h.record(NodeId(0), with_fatigue(5.0)).unwrap();
        assert!(h.preview_diff(a, a).unwrap().is_empty());
        let d = h.preview_diff(NodeId(0), a).unwrap();
        assert_eq!(d.confounds.len(), 1);
        assert_eq!(d.confounds[0].field, "fatigue_per_trial");
        assert!(d.cells.is_empty() && d.design.is_empty());

        let mut s = with_fatigue(5.0);
        s.replications = 3;
        s.means = s.means.set_mean(MeanNode::Condition(1), 12.0).unwrap();
        let b = h.record(a, s).unwrap();
        let d = h.preview_diff(a, b).unwrap();
        assert_eq!(d.design, [FieldDelta { field: "replications", from: 1, to: 3 }]);
        assert_eq!(d.cells.len(), 1);
        assert!(h.preview_diff(a, NodeId(40)).is_err());
    }

    #[test]
    fn structure_checks() {
        let mut h = HistoryTree::new(root());
        h.record(NodeId(0), with_fatigue(1.0)).unwrap();
        let mut nodes = h.nodes().to_vec();
        nodes[1].depth = 4;
        assert!(HistoryTree::from_parts(nodes.clone(), NodeId(0)).is_err());
        nodes[1].depth = 1;
        nodes[1].parent = None;
        assert!(HistoryTree::from_parts(nodes.clone(), NodeId(0)).is_err());
        nodes[1].parent = Some(NodeId(0));
        assert!(HistoryTree::from_parts(nodes.clone(), NodeId(2)).is_err());
        assert_eq!(HistoryTree::from_parts(nodes, NodeId(1)).unwrap(), h);
    }
}
