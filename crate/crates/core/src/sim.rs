//! End-to-end orchestration: run the training stage to build the DAG, the
//! store, and the dual chain, then execute an unlearning task in either
//! paradigm, drive committee consensus and ledger redaction, and reconcile
//! counters against the closed-form cost predictions.
//!
//! Everything is seeded; running the same scenario twice produces
//! byte-identical chain exports, metrics, and reports. An unlearning task is
//! atomic: all updates are staged in memory and nothing touches the chain,
//! the store, or the parameter state unless every consensus round approves.

use crate::chash::{self, ChameleonKeyPair};
use crate::consensus::{self, Candidate, Committee};
use crate::cost::{
    self, overhead_from_counters, reconcile, CostReport, CounterSet, Measurement, Paradigm,
    Prediction, UnitCosts,
};
use crate::dag::{InheritanceDag, ModelNode, NodeId};
use crate::ledger::{ArchiveRecord, DualChain, RecordReason, RedactableTx, RedactionTarget};
use crate::model::{
    self, blob_centers, sample_blobs, Dataset, ParamVector, TrainSettings,
};
use crate::scenario::Scenario;
use crate::sig::SigningKey;
use crate::store::{ModelStore, Namespace};
use crate::unlearn::{
    parallel_propagate, sequential_pass, PropagationResult, UnlearnError, UnlearnRequest,
};
use crate::{encoding, mix_seeds};
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error(transparent)]
    Chash(#[from] crate::chash::ChashError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Dag(#[from] crate::dag::DagError),
    #[error(transparent)]
    Ledger(#[from] crate::ledger::LedgerError),
    #[error(transparent)]
    Consensus(#[from] crate::consensus::ConsensusError),
    #[error(transparent)]
    Cost(#[from] crate::cost::CostError),
    #[error(transparent)]
    Unlearn(#[from] UnlearnError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
    #[error("consensus rejected the update at round {round}: honest votes below threshold")]
    ConsensusRejected { round: u64 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

// Sub-seed tags so every RNG stream in a run is distinct.
const TAG_GENESIS: u64 = 1;
const TAG_TRAIN_DATA: u64 = 2;
const TAG_TEST_DATA: u64 = 3;
const TAG_TRAIN_RNG: u64 = 4;
const TAG_CHAIN_RNG: u64 = 5;
const TAG_ASCENT_RNG: u64 = 6;
const TAG_RETRAIN_INIT: u64 = 7;
const TAG_RETRAIN_RNG: u64 = 8;
const TAG_SELECTION_RNG: u64 = 9;

/// Per-user local data and training settings.
#[derive(Debug, Clone)]
pub struct NodeContext {
    pub train: Dataset,
    pub test: Dataset,
    pub settings: TrainSettings,
}

/// Everything the training stage produces.
pub struct SimState {
    pub scenario: Scenario,
    pub keys: ChameleonKeyPair,
    pub dag: InheritanceDag,
    pub chain: DualChain,
    pub store: ModelStore,
    /// Current parameters per node (genesis included), mirroring the live
    /// chain contents.
    pub params: BTreeMap<NodeId, ParamVector>,
    /// Live-chain coordinates of each model's transaction.
    pub tx_coords: BTreeMap<NodeId, (usize, usize)>,
    pub node_data: BTreeMap<NodeId, NodeContext>,
    pub unit_costs: UnitCosts,
}

/// Forget/retain accuracies for one affected model, train and test split,
/// next to its pre-unlearning baseline. Skipped models (delta at or below
/// epsilon in the parallel paradigm) are reported with their unchanged
/// accuracies and flagged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMetrics {
    pub node: NodeId,
    pub forget_train: f64,
    pub retain_train: f64,
    pub forget_test: f64,
    pub retain_test: f64,
    pub baseline_forget_train: f64,
    pub baseline_retain_train: f64,
    pub baseline_forget_test: f64,
    pub baseline_retain_test: f64,
    pub delta_magnitude: f64,
    pub skipped: bool,
}

/// Result of a committed unlearning task.
#[derive(Debug, Clone)]
pub struct UnlearnOutcome {
    pub paradigm: Paradigm,
    pub metrics: Vec<NodeMetrics>,
    pub report: CostReport,
    pub consensus_rounds: u64,
    pub consensus_messages: u64,
    pub committee: Committee,
    pub propagation: PropagationResult,
}

/// Chameleon digest of raw model bytes with zero randomness: verifiable from
/// content alone, no trapdoor term. Node records are immutable, so they never
/// need forging.
pub fn model_digest(keys: &ChameleonKeyPair, bytes: &[u8]) -> Vec<u8> {
    chash::hash(&keys.pk, bytes, &num_bigint::BigUint::zero())
        .expect("zero randomness is always in range")
        .to_bytes_be()
}

fn ch_seed_bytes(seed: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"fedforget-ch-keys");
    hasher.update(seed.to_le_bytes());
    hasher.finalize().into()
}

/// Runs the training stage: every user evaluates its referenced models,
/// pre-aggregates them, trains locally, stores the result, and publishes a
/// signed node plus a live-chain transaction and an archive record.
pub fn run_training_stage(scenario: &Scenario) -> Result<SimState, SimError> {
    scenario.validate()?;
    let shape = scenario.shape();
    let blob_cfg = scenario.dataset.blob_config();
    let centers = blob_centers(&blob_cfg, scenario.dataset.seed);
    let group = scenario.ledger.group.resolve()?;
    let keys = chash::keygen(&group, ch_seed_bytes(scenario.ledger.ch_seed));
    let mut chain = DualChain::new(keys.pk.clone());
    let store = ModelStore::new();
    let mut chain_rng =
        ChaCha20Rng::seed_from_u64(mix_seeds(&[scenario.ledger.ch_seed, TAG_CHAIN_RNG]));

    // Genesis: the task-creation model, stored but never on the live chain.
    let genesis_params = ParamVector::seeded_init(
        shape,
        mix_seeds(&[scenario.dataset.seed, TAG_GENESIS]),
        0.1,
    );
    let genesis_bytes = genesis_params.to_bytes();
    let genesis_uri = store.put(Namespace::Live, &genesis_bytes);
    store.put(Namespace::Archive, &genesis_bytes);
    let mut genesis_node = ModelNode {
        id: NodeId(0),
        params_uri: genesis_uri,
        references: Vec::new(),
        reference_weights: Vec::new(),
        accuracy: 0.0,
        referenced_accuracies: Vec::new(),
        training_settings: TrainSettings {
            learning_rate: 1.0,
            batch_size: 1,
            epochs: 0,
            rng_seed: 0,
        },
        ch_digest: model_digest(&keys, &genesis_bytes),
        timestamp: 0,
        signature: Vec::new(),
    };
    genesis_node.sign(&SigningKey::from_seed(mix_seeds(&[
        scenario.dataset.seed,
        TAG_GENESIS,
    ])));
    let mut dag = InheritanceDag::new(genesis_node)?;

    let mut params: BTreeMap<NodeId, ParamVector> = BTreeMap::new();
    params.insert(NodeId(0), genesis_params);
    let mut node_data: BTreeMap<NodeId, NodeContext> = BTreeMap::new();
    let mut tx_coords: BTreeMap<NodeId, (usize, usize)> = BTreeMap::new();
    let mut pending_txs: Vec<(NodeId, RedactableTx, ArchiveRecord)> = Vec::new();
    let mut selection_rng = ChaCha20Rng::seed_from_u64(mix_seeds(&[
        scenario.dataset.seed,
        TAG_SELECTION_RNG,
    ]));

    let flush =
        |chain: &mut DualChain,
         pending: &mut Vec<(NodeId, RedactableTx, ArchiveRecord)>,
         coords: &mut BTreeMap<NodeId, (usize, usize)>,
         rng: &mut ChaCha20Rng|
         -> Result<(), SimError> {
            if pending.is_empty() {
                return Ok(());
            }
            let batch: Vec<(NodeId, RedactableTx, ArchiveRecord)> = std::mem::take(pending);
            let mut txs = Vec::with_capacity(batch.len());
            let mut records = Vec::with_capacity(batch.len());
            let mut ids = Vec::with_capacity(batch.len());
            for (id, tx, record) in batch {
                ids.push(id);
                txs.push(tx);
                records.push(record);
            }
            let block_idx = chain.build_and_append(txs, rng)?;
            for (tx_idx, id) in ids.into_iter().enumerate() {
                coords.insert(id, (block_idx, tx_idx));
            }
            chain.archive_append_batch(records);
            Ok(())
        };

    for user in &scenario.users {
        let id = NodeId(user.id);
        let train_data = sample_blobs(
            &blob_cfg,
            &centers,
            scenario.dataset.train_per_class,
            mix_seeds(&[scenario.dataset.seed, user.seed, TAG_TRAIN_DATA]),
        )?;
        let test_data = sample_blobs(
            &blob_cfg,
            &centers,
            scenario.dataset.test_per_class,
            mix_seeds(&[scenario.dataset.seed, user.seed, TAG_TEST_DATA]),
        )?;
        let settings = TrainSettings {
            learning_rate: user.learning_rate,
            batch_size: user.batch_size,
            epochs: user.epochs,
            rng_seed: mix_seeds(&[scenario.dataset.seed, user.seed, TAG_TRAIN_RNG]),
        };

        // Reference wiring: explicit lists, or generative candidate selection.
        let (references, referenced_accuracies) = match &scenario.selection {
            None => {
                let refs: Vec<NodeId> = user.references.iter().map(|r| NodeId(*r)).collect();
                let accs = refs
                    .iter()
                    .map(|r| model::evaluate(&params[r], &test_data))
                    .collect::<Result<Vec<f64>, _>>()?;
                (refs, accs)
            }
            Some(sel) => {
                let population: Vec<(NodeId, ParamVector)> =
                    params.iter().map(|(id, p)| (*id, p.clone())).collect();
                let k = sel.candidates_k.min(population.len());
                let n = sel.referenced_n.min(k);
                let picked =
                    model::select_candidates(&population, &test_data, k, n, &mut selection_rng)?;
                let refs: Vec<NodeId> = picked.iter().map(|(id, _)| *id).collect();
                let accs: Vec<f64> = picked.iter().map(|(_, acc)| *acc).collect();
                (refs, accs)
            }
        };

        let referenced: Vec<(ParamVector, usize)> = references
            .iter()
            .map(|r| {
                // genesis contributes with weight 1 so the sum stays total
                let count = dag.reference_count(*r)?.max(1);
                Ok((params[r].clone(), count))
            })
            .collect::<Result<_, SimError>>()?;
        let pre = model::pre_aggregate(&referenced)?;
        let trained = model::train(&pre, &settings, &train_data)?;
        let accuracy = model::evaluate(&trained, &test_data)?;

        let bytes = trained.to_bytes();
        let uri = store.put(Namespace::Live, &bytes);
        store.put(Namespace::Archive, &bytes);

        let mut node = ModelNode {
            id,
            params_uri: uri.clone(),
            references: references.clone(),
            reference_weights: Vec::new(),
            accuracy,
            referenced_accuracies,
            training_settings: settings.clone(),
            ch_digest: model_digest(&keys, &bytes),
            timestamp: dag.len() as u64,
            signature: Vec::new(),
        };
        node.sign(&SigningKey::from_seed(mix_seeds(&[user.seed, user.id])));
        dag.add_node(node)?;

        let tx = RedactableTx::create(&keys.pk, uri.clone(), references, &mut chain_rng)?;
        let record = ArchiveRecord {
            model_uri: uri,
            predecessor_uri: None,
            reason: RecordReason::Publish,
            timestamp: user.id,
        };
        pending_txs.push((id, tx, record));
        if pending_txs.len() == scenario.ledger.block_size {
            flush(&mut chain, &mut pending_txs, &mut tx_coords, &mut chain_rng)?;
        }

        params.insert(id, trained);
        node_data.insert(
            id,
            NodeContext {
                train: train_data,
                test: test_data,
                settings,
            },
        );
    }
    flush(&mut chain, &mut pending_txs, &mut tx_coords, &mut chain_rng)?;

    if !chain.verify() {
        return Err(SimError::InvariantViolation(
            "freshly built chain failed verification".into(),
        ));
    }

    let unit_costs = scenario.costs.resolve(
        scenario.committee.committee_size,
        shape.param_count() as u64,
        (scenario.dataset.train_per_class * scenario.dataset.classes) as u64,
    );

    Ok(SimState {
        scenario: scenario.clone(),
        keys,
        dag,
        chain,
        store,
        params,
        tx_coords,
        node_data,
        unit_costs,
    })
}

/// Synthetic committee candidates: `pool_size` entries that all pass the
/// thresholds, `malicious` of them flagged via a seeded draw.
pub fn synth_candidates(scenario: &Scenario) -> Vec<Candidate> {
    let c = &scenario.committee;
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seeds(&[c.seed, 0xCA_9D]));
    let mut ids: Vec<u64> = (0..c.pool_size).collect();
    let mut malicious = BTreeSet::new();
    for _ in 0..c.malicious {
        let j = rng.gen_range(0..ids.len());
        malicious.insert(ids.swap_remove(j));
    }
    (0..c.pool_size)
        .map(|id| Candidate {
            id,
            stake: c.min_stake + rng.gen_range(0.0..10.0),
            trust_score: (c.min_trust + rng.gen_range(0.0..0.4)).min(1.0),
            malicious: malicious.contains(&id),
        })
        .collect()
}

fn proposal_digest(entries: &[(NodeId, Vec<u8>)]) -> [u8; 32] {
    let mut buf = Vec::new();
    for (id, bytes) in entries {
        encoding::put_u64(&mut buf, id.0);
        encoding::put_bytes(&mut buf, bytes);
    }
    Sha256::digest(&buf).into()
}

/// Draws this round's attacker set: each malicious committee member attacks
/// independently with probability rho.
fn draw_attackers(
    committee: &Committee,
    candidates: &[Candidate],
    rho: f64,
    seed: u64,
    round: u64,
) -> BTreeSet<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(mix_seeds(&[seed, 0xA77, round]));
    let malicious: BTreeSet<u64> = candidates
        .iter()
        .filter(|c| c.malicious)
        .map(|c| c.id)
        .collect();
    committee
        .members
        .iter()
        .filter(|m| malicious.contains(m) && rho > 0.0 && rng.gen_bool(rho))
        .copied()
        .collect()
}

struct SplitAccuracy {
    forget: f64,
    retain: f64,
}

fn split_accuracy(
    params: &ParamVector,
    data: &Dataset,
    forget: &BTreeSet<usize>,
) -> Result<SplitAccuracy, SimError> {
    let forget_split = data.filter_labels(|l| forget.contains(&l));
    let retain_split = data.filter_labels(|l| !forget.contains(&l));
    Ok(SplitAccuracy {
        forget: model::evaluate(params, &forget_split)?,
        retain: model::evaluate(params, &retain_split)?,
    })
}

/// Executes the scenario's unlearning task against trained state.
///
/// Parallel: gradient ascent at each start, one propagation, one consensus
/// round, one batched redaction. Sequential: re-trained starts, topological
/// re-aggregation plus re-training, one consensus round and one redaction
/// per updated model. Rejection at any round aborts with the state, chain,
/// and store untouched.
pub fn run_unlearning(state: &mut SimState) -> Result<UnlearnOutcome, SimError> {
    let scenario = state.scenario.clone();
    let cfg = &scenario.unlearning;
    let forget_labels: BTreeSet<usize> = cfg.forget_labels.iter().copied().collect();

    // Starting deltas per paradigm.
    let mut starts: BTreeMap<NodeId, ParamVector> = BTreeMap::new();
    for start in &cfg.starts {
        let id = NodeId(*start);
        let data = state
            .node_data
            .get(&id)
            .ok_or_else(|| SimError::InvariantViolation(format!("no data for start {start}")))?;
        let original = &state.params[&id];
        let delta = match cfg.paradigm {
            Paradigm::Parallel => {
                let forget_set = data.train.filter_labels(|l| forget_labels.contains(&l));
                let settings = TrainSettings {
                    learning_rate: cfg.ascent_learning_rate,
                    batch_size: data.settings.batch_size,
                    epochs: cfg.ascent_epochs,
                    rng_seed: mix_seeds(&[scenario.dataset.seed, *start, TAG_ASCENT_RNG]),
                };
                let (_, delta) = model::sga_unlearn(original, &forget_set, &settings)?;
                delta
            }
            Paradigm::Sequential => {
                // owner re-trains from a fresh seeded init on the retained data
                let retained = data.train.filter_labels(|l| !forget_labels.contains(&l));
                let init = ParamVector::seeded_init(
                    original.shape,
                    mix_seeds(&[scenario.dataset.seed, *start, TAG_RETRAIN_INIT]),
                    0.1,
                );
                let settings = TrainSettings {
                    rng_seed: mix_seeds(&[scenario.dataset.seed, *start, TAG_RETRAIN_RNG]),
                    ..data.settings.clone()
                };
                let retrained = model::train(&init, &settings, &retained)?;
                retrained.sub(original)?
            }
        };
        starts.insert(id, delta);
    }
    let request = UnlearnRequest {
        starts,
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        forget_labels: forget_labels.clone(),
    };

    // Stage the model updates entirely in memory.
    let propagation = match cfg.paradigm {
        Paradigm::Parallel => parallel_propagate(&state.dag, &state.params, &request)?,
        Paradigm::Sequential => {
            let node_data = &state.node_data;
            let dataset_seed = scenario.dataset.seed;
            let trainer = |id: NodeId, aggregated: ParamVector| {
                let data = node_data.get(&id).ok_or(UnlearnError::Trainer {
                    node: id.0,
                    detail: "missing local training data".into(),
                })?;
                let retained = data.train.filter_labels(|l| !forget_labels.contains(&l));
                let settings = TrainSettings {
                    rng_seed: mix_seeds(&[dataset_seed, id.0, TAG_RETRAIN_RNG]),
                    ..data.settings.clone()
                };
                model::train(&aggregated, &settings, &retained).map_err(|e| {
                    UnlearnError::Trainer {
                        node: id.0,
                        detail: e.to_string(),
                    }
                })
            };
            sequential_pass(&state.dag, &state.params, &request, &trainer)?
        }
    };

    // Committee and consensus. Parallel gates the whole batch behind one
    // round; sequential runs one round per updated model.
    let candidates = synth_candidates(&scenario);
    let pool = consensus::form_pool(
        &candidates,
        scenario.committee.min_stake,
        scenario.committee.min_trust,
    );
    let committee = consensus::select_committee(
        &pool,
        scenario.committee.committee_size as usize,
        &scenario.committee.seed.to_le_bytes(),
    )?;

    let updated_entries: Vec<(NodeId, Vec<u8>)> = propagation
        .updates
        .iter()
        .map(|(id, p)| (*id, p.to_bytes()))
        .collect();

    let mut consensus_rounds = 0u64;
    let mut consensus_messages = 0u64;
    match cfg.paradigm {
        Paradigm::Parallel => {
            let digest = proposal_digest(&updated_entries);
            let attacking = draw_attackers(
                &committee,
                &candidates,
                scenario.committee.rho,
                scenario.committee.seed,
                0,
            );
            let (decision, messages) = consensus::run_round(&committee, &digest, &attacking)?;
            consensus_rounds += 1;
            consensus_messages += messages;
            if !decision {
                return Err(SimError::ConsensusRejected { round: 0 });
            }
        }
        Paradigm::Sequential => {
            for (round, entry) in updated_entries.iter().enumerate() {
                let digest = proposal_digest(std::slice::from_ref(entry));
                let attacking = draw_attackers(
                    &committee,
                    &candidates,
                    scenario.committee.rho,
                    scenario.committee.seed,
                    round as u64,
                );
                let (decision, messages) = consensus::run_round(&committee, &digest, &attacking)?;
                consensus_rounds += 1;
                consensus_messages += messages;
                if !decision {
                    return Err(SimError::ConsensusRejected {
                        round: round as u64,
                    });
                }
            }
        }
    }

    // Approved: compute pre-update baselines over the whole affected set
    // (updated and skipped), then commit store writes, archive records,
    // and redactions.
    let affected: Vec<NodeId> = propagation
        .updates
        .keys()
        .chain(propagation.skipped.iter())
        .copied()
        .collect::<BTreeSet<NodeId>>()
        .into_iter()
        .collect();
    let mut baselines: BTreeMap<NodeId, (SplitAccuracy, SplitAccuracy)> = BTreeMap::new();
    for id in &affected {
        let data = &state.node_data[id];
        let original = &state.params[id];
        baselines.insert(
            *id,
            (
                split_accuracy(original, &data.train, &forget_labels)?,
                split_accuracy(original, &data.test, &forget_labels)?,
            ),
        );
    }

    let mut counters = CounterSet {
        consensus_rounds,
        ..CounterSet::default()
    };

    let mut targets: Vec<RedactionTarget> = Vec::new();
    for (id, bytes) in &updated_entries {
        let uri = state.store.put(Namespace::Live, bytes);
        state.store.put(Namespace::Archive, bytes);
        counters.transmissions += 2; // client upload + committee download
        let (block, tx) = state.tx_coords[id];
        targets.push(RedactionTarget {
            block,
            tx,
            new_uri: uri,
        });
    }

    let touched_blocks: BTreeSet<usize> = targets.iter().map(|t| t.block).collect();
    match cfg.paradigm {
        Paradigm::Parallel => {
            let receipt = state.chain.redact_batch(&targets, &state.keys.sk)?;
            counters.ch_ops += receipt.tx_forges + receipt.block_forges;
        }
        Paradigm::Sequential => {
            for target in &targets {
                let receipt = state
                    .chain
                    .redact_batch(std::slice::from_ref(target), &state.keys.sk)?;
                counters.ch_ops += receipt.tx_forges + receipt.block_forges;
            }
        }
    }

    // Downstream parent downloads: each re-aggregated (non-start) model
    // fetched every parent once.
    let start_ids = request.start_ids();
    let mut parent_downloads = 0u64;
    if let Paradigm::Sequential = cfg.paradigm {
        for (id, _) in &updated_entries {
            if !start_ids.contains(id) {
                parent_downloads += state.dag.reference_count(*id)? as u64;
            }
        }
        counters.transmissions += parent_downloads;
    }

    if !state.chain.verify() {
        return Err(SimError::InvariantViolation(
            "chain failed verification after redaction".into(),
        ));
    }

    // Commit the in-memory parameter state and collect metrics over every
    // affected model; skipped models keep their original parameters.
    let mut metrics = Vec::new();
    for id in &affected {
        let skipped = propagation.skipped.contains(id);
        let current = match propagation.updates.get(id) {
            Some(updated) => {
                state.params.insert(*id, updated.clone());
                updated.clone()
            }
            None => state.params[id].clone(),
        };
        let data = &state.node_data[id];
        let train_acc = split_accuracy(&current, &data.train, &forget_labels)?;
        let test_acc = split_accuracy(&current, &data.test, &forget_labels)?;
        let (baseline_train, baseline_test) = &baselines[id];
        metrics.push(NodeMetrics {
            node: *id,
            forget_train: train_acc.forget,
            retain_train: train_acc.retain,
            forget_test: test_acc.forget,
            retain_test: test_acc.retain,
            baseline_forget_train: baseline_train.forget,
            baseline_retain_train: baseline_train.retain,
            baseline_forget_test: baseline_test.forget,
            baseline_retain_test: baseline_test.retain,
            delta_magnitude: propagation.per_node_magnitude[id],
            skipped,
        });
    }

    // Reconcile measured counters against the closed-form predictions.
    let k = propagation.updates.len() as u64;
    let convention = scenario.costs.ch_energy;
    let prediction = match cfg.paradigm {
        Paradigm::Parallel => {
            let l = touched_blocks.len() as u64;
            Prediction {
                paradigm: Paradigm::Parallel,
                counts: cost::parallel_counts(k, l),
                overhead: cost::parallel_cost_with(k, l, &state.unit_costs, convention)?,
            }
        }
        Paradigm::Sequential => {
            let avg_refs = if k > 1 {
                parent_downloads as f64 / (k - 1) as f64
            } else {
                0.0
            };
            Prediction {
                paradigm: Paradigm::Sequential,
                counts: cost::sequential_counts(k, parent_downloads),
                overhead: cost::sequential_cost_with(k, avg_refs, &state.unit_costs, convention)?,
            }
        }
    };
    let measurement = Measurement {
        paradigm: cfg.paradigm,
        counts: counters,
        overhead: overhead_from_counters(&counters, &state.unit_costs, convention),
    };
    let report = reconcile(&prediction, &measurement)?;

    Ok(UnlearnOutcome {
        paradigm: cfg.paradigm,
        metrics,
        report,
        consensus_rounds,
        consensus_messages,
        committee,
        propagation,
    })
}

/// Renders the per-model metrics as CSV.
pub fn metrics_csv(metrics: &[NodeMetrics]) -> String {
    let mut out = String::from(
        "node,forget_train,retain_train,forget_test,retain_test,\
         baseline_forget_train,baseline_retain_train,baseline_forget_test,\
         baseline_retain_test,delta_magnitude,skipped\n",
    );
    for m in metrics {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            m.node,
            m.forget_train,
            m.retain_train,
            m.forget_test,
            m.retain_test,
            m.baseline_forget_train,
            m.baseline_retain_train,
            m.baseline_forget_test,
            m.baseline_retain_test,
            m.delta_magnitude,
            m.skipped
        ));
    }
    out
}

/// Writes metrics CSV, cost CSV/JSON, the chain NDJSON export, and the DAG
/// edge list under `dir`.
pub fn write_outputs(
    state: &SimState,
    outcome: &UnlearnOutcome,
    dir: &Path,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, contents: &str| -> std::io::Result<()> {
        let mut file = std::fs::File::create(dir.join(name))?;
        file.write_all(contents.as_bytes())
    };
    write("metrics.csv", &metrics_csv(&outcome.metrics))?;
    write("cost.csv", &outcome.report.to_csv())?;
    write("cost.json", &outcome.report.to_json())?;
    write("chain.ndjson", &state.chain.export_ndjson())?;
    write("dag_edges.txt", &state.dag.export_edge_list())?;
    Ok(())
}
