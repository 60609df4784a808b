//! Stochastic two-player games abstracting a program's MDP.

mod builder;
pub mod dot;
pub mod validity;

use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::ir::VarId;

pub use builder::{build_game, BuildError};

pub type NodeId = usize;

/// `⊙`: the accepted final proposal.
pub const ACCEPT: NodeId = 0;
/// `⊗`: the rejected proposal.
pub const REJECT: NodeId = 1;

/// What Player 1 proposes at a node: a program command by index, or the
/// implicit self-loop that closes states where nothing is enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Action {
    Cmd(usize),
    Stuck,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Node<E> {
    Accept,
    Reject,
    /// A Player 1 node carrying an abstract element.
    Elem(E),
    /// `⟨s, A⟩`.
    Cmd { owner: NodeId, action: Action },
    /// `⟨s, ⊙⟩`.
    Final { owner: NodeId },
    /// `⟨s, A, s', d⟩`; `d[u]` is the successor chosen for update `u`.
    Prob {
        owner: NodeId,
        action: Action,
        refined: E,
        split: usize,
        d: Vec<NodeId>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Owner {
    Player1,
    Player2,
    Random,
}

/// One spanning-tree step: command, guard-split branch, update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Step {
    pub command: usize,
    pub split: usize,
    pub update: usize,
}

/// Position of a node in the spanning tree, as the steps from the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TreePath(pub Vec<Step>);

impl TreePath {
    pub fn child(&self, step: Step) -> TreePath {
        let mut steps = self.0.clone();
        steps.push(step);
        TreePath(steps)
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for TreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|s| format!("{}.{}.{}", s.command, s.split, s.update))
            .collect();
        f.write_str(&parts.join("/"))
    }
}

/// Spanning-tree bookkeeping for a Player 1 element node.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeInfo {
    /// The `⟨s, A⟩` node through which this node was first created.
    pub parent: Option<NodeId>,
    /// The element node `s` of that parent.
    pub parent_elem: Option<NodeId>,
    /// The command `A` of that parent.
    pub creator: Option<usize>,
    pub path: TreePath,
    pub depth: usize,
    /// Product of update probabilities along the tree path.
    pub mass: f64,
    /// Whether the creating extrapolation changed the raw post-state.
    pub widened: bool,
}

/// How EXTRAPOLATE picks the ancestor it widens against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WidenKey {
    /// Nearest ancestor created by the same command.
    Command,
    /// Nearest ancestor pinning this variable to the same value.
    ControlVar(VarId),
}

/// Where widening is suppressed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DelayConfig {
    /// No widening for nodes at tree depth below this.
    pub depth_threshold: usize,
    pub suppressed: BTreeSet<TreePath>,
    pub widen_key: WidenKey,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            depth_threshold: 0,
            suppressed: BTreeSet::new(),
            widen_key: WidenKey::Command,
        }
    }
}

impl DelayConfig {
    pub fn with_key(widen_key: WidenKey) -> Self {
        DelayConfig {
            widen_key,
            ..DelayConfig::default()
        }
    }
}

/// The arena `((V₁, V₂, V_p), E, δ, s₀)` plus the construction tree.
#[derive(Clone, Debug)]
pub struct Game<E> {
    nodes: Vec<Node<E>>,
    succ: Vec<Vec<NodeId>>,
    dist: Vec<Vec<(NodeId, BigRational)>>,
    start: NodeId,
    tree: Vec<Option<TreeInfo>>,
    command_names: Vec<String>,
}

impl<E> Game<E> {
    pub(crate) fn empty(command_names: Vec<String>) -> Self {
        let mut g = Game {
            nodes: Vec::new(),
            succ: Vec::new(),
            dist: Vec::new(),
            start: 2,
            tree: Vec::new(),
            command_names,
        };
        g.push(Node::Accept);
        g.push(Node::Reject);
        g
    }

    pub(crate) fn push(&mut self, node: Node<E>) -> NodeId {
        self.nodes.push(node);
        self.succ.push(Vec::new());
        self.dist.push(Vec::new());
        self.tree.push(None);
        self.nodes.len() - 1
    }

    pub(crate) fn add_edge(&mut self, from: NodeId, to: NodeId) {
        self.succ[from].push(to);
    }

    pub(crate) fn set_dist(&mut self, node: NodeId, dist: Vec<(NodeId, BigRational)>) {
        self.succ[node] = dist.iter().map(|(t, _)| *t).collect();
        self.dist[node] = dist;
    }

    pub(crate) fn set_tree(&mut self, node: NodeId, info: TreeInfo) {
        self.tree[node] = Some(info);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn node(&self, id: NodeId) -> &Node<E> {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node<E>] {
        &self.nodes
    }

    pub fn succ(&self, id: NodeId) -> &[NodeId] {
        &self.succ[id]
    }

    /// `δ` of a probabilistic node; empty for other nodes.
    pub fn dist(&self, id: NodeId) -> &[(NodeId, BigRational)] {
        &self.dist[id]
    }

    pub fn float_dist(&self, id: NodeId) -> Vec<(NodeId, f64)> {
        self.dist[id]
            .iter()
            .map(|(t, p)| (*t, p.to_f64().unwrap_or(0.0)))
            .collect()
    }

    pub fn tree(&self, id: NodeId) -> Option<&TreeInfo> {
        self.tree[id].as_ref()
    }

    pub fn elem(&self, id: NodeId) -> Option<&E> {
        match &self.nodes[id] {
            Node::Elem(e) => Some(e),
            _ => None,
        }
    }

    pub fn owner(&self, id: NodeId) -> Owner {
        match self.nodes[id] {
            Node::Accept | Node::Reject | Node::Elem(_) => Owner::Player1,
            Node::Cmd { .. } | Node::Final { .. } => Owner::Player2,
            Node::Prob { .. } => Owner::Random,
        }
    }

    /// Player 1 nodes carrying an abstract element (the size statistic).
    pub fn num_elements(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Elem(_)))
            .count()
    }

    pub fn command_names(&self) -> &[String] {
        &self.command_names
    }

    pub fn action_name(&self, a: Action) -> &str {
        match a {
            Action::Cmd(i) => &self.command_names[i],
            Action::Stuck => "stuck",
        }
    }

    /// Element nodes whose creating extrapolation applied a widening.
    pub fn widened_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&i| self.tree[i].as_ref().is_some_and(|t| t.widened))
    }

    /// Removes one edge. Only meant for fault injection in audits.
    pub fn remove_edge(&mut self, from: NodeId, to: NodeId) -> bool {
        match self.succ[from].iter().position(|&t| t == to) {
            Some(i) => {
                self.succ[from].remove(i);
                true
            }
            None => false,
        }
    }

    /// Points update `u` of a probabilistic node at `target`, keeping `δ`
    /// consistent. Only meant for fault injection in audits.
    pub fn redirect_update(&mut self, prob: NodeId, u: usize, target: NodeId, probs: &[BigRational]) {
        if let Node::Prob { d, .. } = &mut self.nodes[prob] {
            d[u] = target;
            let d = d.clone();
            self.set_dist(prob, aggregate(&d, probs));
        }
    }
}

/// `δ(s'') = Σ p` over the updates mapped to `s''`, in first-occurrence
/// order.
pub(crate) fn aggregate(d: &[NodeId], probs: &[BigRational]) -> Vec<(NodeId, BigRational)> {
    let mut out: Vec<(NodeId, BigRational)> = Vec::new();
    for (t, p) in d.iter().zip(probs) {
        match out.iter_mut().find(|(u, _)| u == t) {
            Some((_, q)) => *q += p,
            None => out.push((*t, p.clone())),
        }
    }
    out
}
