//! The two unlearning paradigms over the inheritance DAG.
//!
//! Parallel propagation pushes each starting model's parameter delta to every
//! affected descendant, attenuated along each path by the product of the
//! reference counts of the nodes on the path (the start excluded, the
//! terminal included). The implementation accumulates the per-node path-sum
//! coefficients with a single topological sweep, which computes the same sum
//! as literal path enumeration without materializing paths.
//!
//! Sequential unlearning walks the affected set in topological order,
//! re-aggregates every non-start node as the mean of its parents' current
//! parameters, and hands the result to a caller-supplied trainer.

use crate::dag::{DagError, InheritanceDag, NodeId};
use crate::model::{ModelError, ParamVector};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnlearnError {
    #[error("request has no starting models")]
    EmptyStarts,
    #[error("alpha must lie in (0, 1]")]
    BadAlpha,
    #[error("epsilon must be positive and finite")]
    BadEpsilon,
    #[error("delta shape does not match parameters of node {0}")]
    ShapeMismatch(u64),
    #[error("depth bound inputs must be positive and finite")]
    NonPositiveDepthInput,
    #[error("parameter fetch failed for node {node}: {detail}")]
    ParamFetch { node: u64, detail: String },
    #[error("trainer failed at node {node}: {detail}")]
    Trainer { node: u64, detail: String },
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An unlearning task: per-start parameter deltas plus the discount factor,
/// stop threshold, and the class labels being forgotten.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlearnRequest {
    pub starts: BTreeMap<NodeId, ParamVector>,
    pub alpha: f64,
    pub epsilon: f64,
    pub forget_labels: BTreeSet<usize>,
}

impl UnlearnRequest {
    pub fn validate(&self) -> Result<(), UnlearnError> {
        if self.starts.is_empty() {
            return Err(UnlearnError::EmptyStarts);
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.alpha > 1.0 {
            return Err(UnlearnError::BadAlpha);
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(UnlearnError::BadEpsilon);
        }
        let mut shapes = self.starts.values().map(|d| d.shape);
        let first = shapes.next().expect("starts checked non-empty");
        if shapes.any(|s| s != first) {
            let id = *self.starts.keys().next().expect("non-empty");
            return Err(UnlearnError::ShapeMismatch(id.0));
        }
        Ok(())
    }

    pub fn start_ids(&self) -> BTreeSet<NodeId> {
        self.starts.keys().copied().collect()
    }
}

/// Outcome of one paradigm pass over the affected sub-DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationResult {
    /// Node id -> updated parameters (starts included).
    pub updates: BTreeMap<NodeId, ParamVector>,
    /// Node id -> raw parameter delta applied (or measured, for skips).
    pub deltas: BTreeMap<NodeId, ParamVector>,
    /// Node id -> l2 norm of the delta.
    pub per_node_magnitude: BTreeMap<NodeId, f64>,
    /// Affected descendants whose delta fell at or below epsilon.
    pub skipped: BTreeSet<NodeId>,
}

impl PropagationResult {
    /// Nodes that were actually rewritten, ascending.
    pub fn updated_ids(&self) -> Vec<NodeId> {
        self.updates.keys().copied().collect()
    }
}

/// Source of current model parameters, normally backed by the content store.
pub trait ParamSource {
    fn params(&self, id: NodeId) -> Result<ParamVector, UnlearnError>;
}

impl ParamSource for BTreeMap<NodeId, ParamVector> {
    fn params(&self, id: NodeId) -> Result<ParamVector, UnlearnError> {
        self.get(&id).cloned().ok_or(UnlearnError::ParamFetch {
            node: id.0,
            detail: "missing from map".into(),
        })
    }
}

/// Per-node local re-training used by the sequential paradigm.
pub trait SequentialTrainer {
    fn retrain(&self, id: NodeId, aggregated: ParamVector) -> Result<ParamVector, UnlearnError>;
}

impl<F> SequentialTrainer for F
where
    F: Fn(NodeId, ParamVector) -> Result<ParamVector, UnlearnError>,
{
    fn retrain(&self, id: NodeId, aggregated: ParamVector) -> Result<ParamVector, UnlearnError> {
        self(id, aggregated)
    }
}

/// Path-sum attenuation coefficients from `start` to every reachable node.
///
/// Entering a node divides by that node's reference count, so the coefficient
/// accumulated at `y` equals the sum over all start->y paths of the
/// reciprocal product of reference counts along the path (start excluded).
fn attenuation_from(
    dag: &InheritanceDag,
    start: NodeId,
) -> Result<BTreeMap<NodeId, f64>, UnlearnError> {
    let mut coeff: BTreeMap<NodeId, f64> = BTreeMap::new();
    coeff.insert(start, 1.0);
    let order: Vec<NodeId> = dag.ids().filter(|id| *id >= start).collect();
    for id in order {
        let Some(c) = coeff.get(&id).copied() else {
            continue;
        };
        for child in dag.children(id) {
            let refs = dag.reference_count(*child)? as f64;
            *coeff.entry(*child).or_insert(0.0) += c / refs;
        }
    }
    coeff.remove(&start);
    Ok(coeff)
}

/// Parallel paradigm: one batch update of every affected descendant.
///
/// Starts receive exactly their own delta (the owner already unlearned them);
/// descendants accumulate `alpha * delta` attenuated along every path from
/// every start. A descendant whose accumulated delta has l2 norm at or below
/// `epsilon` is skipped, but still passes attenuation through to its own
/// children.
pub fn parallel_propagate(
    dag: &InheritanceDag,
    source: &impl ParamSource,
    request: &UnlearnRequest,
) -> Result<PropagationResult, UnlearnError> {
    request.validate()?;
    let start_ids = request.start_ids();
    for id in &start_ids {
        dag.node(*id)?;
    }
    let affected = dag.descendants(&start_ids)?;

    // Per-start delta vectors are computed independently and then summed in
    // ascending start order, so a multi-start run is exactly the sum of its
    // single-start runs.
    let mut accumulated: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    for (start, grad) in &request.starts {
        let coeff = attenuation_from(dag, *start)?;
        for y in &affected {
            if start_ids.contains(y) {
                continue;
            }
            let Some(c) = coeff.get(y).copied() else {
                continue;
            };
            let scale = request.alpha * c;
            let slot = accumulated
                .entry(*y)
                .or_insert_with(|| vec![0.0; grad.values.len()]);
            if slot.len() != grad.values.len() {
                return Err(UnlearnError::ShapeMismatch(y.0));
            }
            for (acc, g) in slot.iter_mut().zip(&grad.values) {
                *acc += scale * g;
            }
        }
    }

    let mut result = PropagationResult {
        updates: BTreeMap::new(),
        deltas: BTreeMap::new(),
        per_node_magnitude: BTreeMap::new(),
        skipped: BTreeSet::new(),
    };

    for (start, grad) in &request.starts {
        let current = source.params(*start)?;
        if current.shape != grad.shape {
            return Err(UnlearnError::ShapeMismatch(start.0));
        }
        let updated = current.add(grad)?;
        result.per_node_magnitude.insert(*start, grad.l2_norm());
        result.deltas.insert(*start, grad.clone());
        result.updates.insert(*start, updated);
    }

    let shape = request
        .starts
        .values()
        .next()
        .expect("starts validated non-empty")
        .shape;
    for y in &affected {
        if start_ids.contains(y) {
            continue;
        }
        let values = accumulated
            .remove(y)
            .unwrap_or_else(|| vec![0.0; shape.param_count()]);
        let current = source.params(*y)?;
        if current.values.len() != values.len() {
            return Err(UnlearnError::ShapeMismatch(y.0));
        }
        let delta = ParamVector {
            values,
            shape: current.shape,
        };
        let magnitude = delta.l2_norm();
        result.per_node_magnitude.insert(*y, magnitude);
        if magnitude > request.epsilon {
            result.updates.insert(*y, current.add(&delta)?);
            result.deltas.insert(*y, delta);
        } else {
            result.deltas.insert(*y, delta);
            result.skipped.insert(*y);
        }
    }
    Ok(result)
}

/// Depth beyond which a propagated update falls under the stop threshold,
/// assuming every traversed node inherits at least two models.
///
/// Returns 1 when `log2(delta_norm / epsilon)` is negative, otherwise the
/// ceiling of that logarithm (never less than 1).
pub fn depth_bound(delta_norm: f64, epsilon: f64) -> Result<u32, UnlearnError> {
    if !delta_norm.is_finite() || !epsilon.is_finite() || delta_norm <= 0.0 || epsilon <= 0.0 {
        return Err(UnlearnError::NonPositiveDepthInput);
    }
    let lg = (delta_norm / epsilon).log2();
    if lg < 0.0 {
        Ok(1)
    } else {
        Ok((lg.ceil() as u32).max(1))
    }
}

/// Sequential paradigm: visit starts and descendants in topological order;
/// every non-start node is re-aggregated as the mean of its parents' current
/// parameters and then re-trained locally. No epsilon skipping.
pub fn sequential_pass(
    dag: &InheritanceDag,
    source: &impl ParamSource,
    request: &UnlearnRequest,
    trainer: &impl SequentialTrainer,
) -> Result<PropagationResult, UnlearnError> {
    request.validate()?;
    let start_ids = request.start_ids();
    for id in &start_ids {
        dag.node(*id)?;
    }
    let mut scope = dag.descendants(&start_ids)?;
    scope.extend(start_ids.iter().copied());
    let visit = dag.topo_order(&scope)?;

    let mut current: BTreeMap<NodeId, ParamVector> = BTreeMap::new();
    let mut result = PropagationResult {
        updates: BTreeMap::new(),
        deltas: BTreeMap::new(),
        per_node_magnitude: BTreeMap::new(),
        skipped: BTreeSet::new(),
    };

    for y in visit {
        let original = source.params(y)?;
        let updated = if let Some(delta) = request.starts.get(&y) {
            if delta.shape != original.shape {
                return Err(UnlearnError::ShapeMismatch(y.0));
            }
            original.add(delta)?
        } else {
            let node = dag.node(y)?;
            let refs = &node.references;
            let mut sum = ParamVector::zeros(original.shape);
            for parent in refs {
                let p = match current.get(parent) {
                    Some(updated) => updated.clone(),
                    None => source.params(*parent)?,
                };
                if p.shape != original.shape {
                    return Err(UnlearnError::ShapeMismatch(parent.0));
                }
                sum = sum.add(&p)?;
            }
            let aggregated = sum.scale(1.0 / refs.len() as f64);
            trainer.retrain(y, aggregated)?
        };
        let delta = updated.sub(&original)?;
        result.per_node_magnitude.insert(y, delta.l2_norm());
        result.deltas.insert(y, delta);
        result.updates.insert(y, updated.clone());
        current.insert(y, updated);
    }
    Ok(result)
}
