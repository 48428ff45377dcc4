//! Model-inheritance DAG: published model nodes, reference edges,
//! affected-descendant computation, path enumeration, and topological order.
//!
//! Node ids are assigned monotonically at publish time and every reference
//! must point at an earlier node, so the id order is itself a topological
//! order; the structure is acyclic by construction.

use crate::model::TrainSettings;
use crate::sig;
use crate::store::ContentUri;
use crate::{encoding, mix_seeds};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Hard cap on enumerated paths; exceeding it is an error because the
/// propagation equations require exact path sums.
pub const DEFAULT_MAX_PATHS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DagError {
    #[error("unknown node id {0}")]
    UnknownNode(u64),
    #[error("node {node} references unknown id {reference}")]
    UnknownReference { node: u64, reference: u64 },
    #[error("duplicate node id {0}")]
    DuplicateId(u64),
    #[error("node ids must increase: {node} is not above the current maximum {max}")]
    NonMonotonicId { node: u64, max: u64 },
    #[error("node {0} references itself")]
    SelfReference(u64),
    #[error("node {node} repeats reference {reference}")]
    DuplicateReference { node: u64, reference: u64 },
    #[error("node {0} carries an invalid signature")]
    BadSignature(u64),
    #[error("non-genesis node {0} must reference at least one parent")]
    MissingReferences(u64),
    #[error("path enumeration exceeded the budget of {0}")]
    PathBudgetExceeded(usize),
    #[error("edge weight list of node {0} does not match its reference list")]
    BadWeights(u64),
}

/// Identifier of a published model node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A published model vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelNode {
    pub id: NodeId,
    pub params_uri: ContentUri,
    pub references: Vec<NodeId>,
    /// Edge weights aligned with `references`. The weights carry no semantics
    /// in any implemented update rule; they are stored as metadata only.
    #[serde(default)]
    pub reference_weights: Vec<f64>,
    pub accuracy: f64,
    pub referenced_accuracies: Vec<f64>,
    pub training_settings: TrainSettings,
    pub ch_digest: Vec<u8>,
    pub timestamp: u64,
    pub signature: Vec<u8>,
}

impl ModelNode {
    /// Canonical bytes covered by the node signature: every field except the
    /// signature itself, in declared order.
    pub fn signed_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        encoding::put_u64(&mut buf, self.id.0);
        encoding::put_str(&mut buf, self.params_uri.as_str());
        encoding::put_u64_list(&mut buf, self.references.iter().map(|r| r.0));
        encoding::put_u64(&mut buf, self.reference_weights.len() as u64);
        for w in &self.reference_weights {
            encoding::put_f64(&mut buf, *w);
        }
        encoding::put_f64(&mut buf, self.accuracy);
        encoding::put_u64(&mut buf, self.referenced_accuracies.len() as u64);
        for a in &self.referenced_accuracies {
            encoding::put_f64(&mut buf, *a);
        }
        encoding::put_f64(&mut buf, self.training_settings.learning_rate);
        encoding::put_u64(&mut buf, self.training_settings.batch_size as u64);
        encoding::put_u64(&mut buf, self.training_settings.epochs as u64);
        encoding::put_u64(&mut buf, self.training_settings.rng_seed);
        encoding::put_bytes(&mut buf, &self.ch_digest);
        encoding::put_u64(&mut buf, self.timestamp);
        buf
    }

    /// Signs the node in place with the given user signing key.
    pub fn sign(&mut self, key: &sig::SigningKey) {
        self.signature = key.sign(&self.signed_bytes());
    }
}

/// Weighted directed acyclic graph of model inheritance.
#[derive(Debug, Clone)]
pub struct InheritanceDag {
    nodes: BTreeMap<NodeId, ModelNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
    genesis: NodeId,
    max_paths: usize,
}

impl InheritanceDag {
    /// Creates the DAG around its creation node, which must be reference-free.
    pub fn new(genesis: ModelNode) -> Result<Self, DagError> {
        if !genesis.references.is_empty() {
            return Err(DagError::SelfReference(genesis.id.0));
        }
        if !sig::verify(&genesis.signed_bytes(), &genesis.signature) {
            return Err(DagError::BadSignature(genesis.id.0));
        }
        let id = genesis.id;
        let mut nodes = BTreeMap::new();
        nodes.insert(id, genesis);
        Ok(Self {
            nodes,
            children: BTreeMap::new(),
            genesis: id,
            max_paths: DEFAULT_MAX_PATHS,
        })
    }

    pub fn with_max_paths(mut self, budget: usize) -> Self {
        self.max_paths = budget;
        self
    }

    pub fn genesis(&self) -> NodeId {
        self.genesis
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node(&self, id: NodeId) -> Result<&ModelNode, DagError> {
        self.nodes.get(&id).ok_or(DagError::UnknownNode(id.0))
    }

    /// Direct children (nodes that reference `id`), ascending.
    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.children.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Inserts a published node. References must exist, the id must exceed
    /// every existing id, and the signature must verify; acyclicity then
    /// holds by construction.
    pub fn add_node(&mut self, node: ModelNode) -> Result<NodeId, DagError> {
        let id = node.id;
        if self.nodes.contains_key(&id) {
            return Err(DagError::DuplicateId(id.0));
        }
        let max = *self.nodes.keys().next_back().expect("dag has genesis");
        if id <= max {
            return Err(if id == max {
                DagError::DuplicateId(id.0)
            } else {
                DagError::NonMonotonicId {
                    node: id.0,
                    max: max.0,
                }
            });
        }
        if node.references.is_empty() {
            return Err(DagError::MissingReferences(id.0));
        }
        if !node.reference_weights.is_empty()
            && node.reference_weights.len() != node.references.len()
        {
            return Err(DagError::BadWeights(id.0));
        }
        let mut seen = BTreeSet::new();
        for reference in &node.references {
            if *reference == id {
                return Err(DagError::SelfReference(id.0));
            }
            if !self.nodes.contains_key(reference) {
                return Err(DagError::UnknownReference {
                    node: id.0,
                    reference: reference.0,
                });
            }
            if !seen.insert(*reference) {
                return Err(DagError::DuplicateReference {
                    node: id.0,
                    reference: reference.0,
                });
            }
        }
        if !sig::verify(&node.signed_bytes(), &node.signature) {
            return Err(DagError::BadSignature(id.0));
        }
        for reference in &node.references {
            let entry = self.children.entry(*reference).or_default();
            // references are checked unique, and ids arrive ascending, so a
            // plain push keeps each child list sorted
            entry.push(id);
        }
        self.nodes.insert(id, node);
        Ok(id)
    }

    /// All nodes reachable from any start by following child edges,
    /// excluding the starts themselves.
    pub fn descendants(&self, starts: &BTreeSet<NodeId>) -> Result<BTreeSet<NodeId>, DagError> {
        for start in starts {
            if !self.nodes.contains_key(start) {
                return Err(DagError::UnknownNode(start.0));
            }
        }
        let mut reached = BTreeSet::new();
        let mut queue: VecDeque<NodeId> = starts.iter().copied().collect();
        while let Some(current) = queue.pop_front() {
            for child in self.children(current) {
                if reached.insert(*child) {
                    queue.push_back(*child);
                }
            }
        }
        for start in starts {
            reached.remove(start);
        }
        Ok(reached)
    }

    /// Reference count of a node: the number of models it inherited.
    /// The genesis node returns 0.
    pub fn reference_count(&self, id: NodeId) -> Result<usize, DagError> {
        Ok(self.node(id)?.references.len())
    }

    /// Every simple path from `s` to `y` along child edges, in lexicographic
    /// order of the node-id sequences. Node ids strictly increase along
    /// edges, so each path is simple automatically; the enumeration fails
    /// once the budget is exceeded.
    pub fn paths(&self, s: NodeId, y: NodeId) -> Result<Vec<Vec<NodeId>>, DagError> {
        self.node(s)?;
        self.node(y)?;
        let mut out = Vec::new();
        let mut trail = vec![s];
        self.walk_paths(s, y, &mut trail, &mut out)?;
        Ok(out)
    }

    fn walk_paths(
        &self,
        current: NodeId,
        target: NodeId,
        trail: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) -> Result<(), DagError> {
        if current == target && trail.len() > 1 {
            out.push(trail.clone());
            if out.len() > self.max_paths {
                return Err(DagError::PathBudgetExceeded(self.max_paths));
            }
            return Ok(());
        }
        if current == target && trail.len() == 1 {
            // A path from s to s is the empty product; the propagation
            // equations never ask for it, so enumerate none.
            return Ok(());
        }
        for child in self.children(current) {
            if *child > target {
                break;
            }
            trail.push(*child);
            self.walk_paths(*child, target, trail, out)?;
            trail.pop();
        }
        Ok(())
    }

    /// Linear order of `subset` where every node follows all of its
    /// in-subset ancestors, ties broken by ascending id.
    ///
    /// Because every edge points from a smaller to a larger id, ascending id
    /// order is simultaneously a topological order and the id-ascending
    /// tie-break; sorting is the whole algorithm.
    pub fn topo_order(&self, subset: &BTreeSet<NodeId>) -> Result<Vec<NodeId>, DagError> {
        for id in subset {
            if !self.nodes.contains_key(id) {
                return Err(DagError::UnknownNode(id.0));
            }
        }
        Ok(subset.iter().copied().collect())
    }

    /// Plain-text edge list (`parent -> child` per line) for inspection.
    pub fn export_edge_list(&self) -> String {
        let mut out = String::new();
        for (parent, children) in &self.children {
            for child in children {
                out.push_str(&format!("{parent} -> {child}\n"));
            }
        }
        out
    }
}

/// Builds an unsigned test/scenario node with sensible defaults and signs it
/// with a key derived from `signer_seed`.
#[allow(clippy::too_many_arguments)]
pub fn build_signed_node(
    id: u64,
    references: &[u64],
    params_uri: ContentUri,
    ch_digest: Vec<u8>,
    accuracy: f64,
    referenced_accuracies: Vec<f64>,
    training_settings: TrainSettings,
    timestamp: u64,
    signer_seed: u64,
) -> ModelNode {
    let mut node = ModelNode {
        id: NodeId(id),
        params_uri,
        references: references.iter().map(|r| NodeId(*r)).collect(),
        reference_weights: Vec::new(),
        accuracy,
        referenced_accuracies,
        training_settings,
        ch_digest,
        timestamp,
        signature: Vec::new(),
    };
    node.sign(&sig::SigningKey::from_seed(mix_seeds(&[signer_seed, id])));
    node
}
