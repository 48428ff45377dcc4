//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Tolerances are pinned in the assertions.

use fedforget_core::chash::{self, GroupParams};
use fedforget_core::consensus;
use fedforget_core::cost::Paradigm;
use fedforget_core::dag::{build_signed_node, InheritanceDag, NodeId};
use fedforget_core::ledger::RecordReason;
use fedforget_core::model::{self, ModelShape, ParamVector, TrainSettings};
use fedforget_core::scenario::Scenario;
use fedforget_core::sim;
use fedforget_core::store::{ModelStore, Namespace};
use fedforget_core::unlearn::{self, UnlearnRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

/// Criterion 1: the closed-form attack rate reproduces the reference value
/// within 1e-6, cross-checked by Monte-Carlo at 3 sigma, in under a second.
#[test]
fn acceptance_1_attack_rate() {
    let started = Instant::now();
    let analytic = consensus::attack_rate(30, 10, 21, 0.2, 6).unwrap();
    assert!(
        (analytic - 0.0000625).abs() < 1e-6,
        "attack rate {analytic} deviates from 6.25e-5"
    );

    let trials = 100_000u64;
    let mut rng = ChaCha20Rng::seed_from_u64(2024);
    let mut successes = 0u64;
    for _ in 0..trials {
        let mut pool: Vec<u64> = (0..30).collect();
        let mut malicious_selected = 0u64;
        for _ in 0..21 {
            let j = rng.gen_range(0..pool.len());
            if pool.swap_remove(j) < 10 {
                malicious_selected += 1;
            }
        }
        let attackers = (0..malicious_selected).filter(|_| rng.gen_bool(0.2)).count();
        if attackers > 6 {
            successes += 1;
        }
    }
    let estimate = successes as f64 / trials as f64;
    let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
    assert!(
        (estimate - analytic).abs() <= 3.0 * sigma,
        "monte-carlo {estimate} vs analytic {analytic} beyond 3 sigma {sigma}"
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "PASS criterion 1: attack_rate(30,10,21,0.2,6) = {analytic:.7e} (|delta| < 1e-6), \
         monte-carlo {estimate:.3e} within 3 sigma, runtime {elapsed:?}"
    );
}

/// Criterion 2: on the 14-user scenario with starts {5, 7}, parallel runs
/// exactly one consensus round and sequential exactly K = |descendants + starts|.
#[test]
fn acceptance_2_consensus_counts() {
    let mut state = sim::run_training_stage(&Scenario::demo_inheritance14(Paradigm::Parallel))
        .unwrap();
    let starts = BTreeSet::from([NodeId(5), NodeId(7)]);
    let mut affected = state.dag.descendants(&starts).unwrap();
    affected.extend(starts.iter().copied());
    let k = affected.len() as u64;

    let parallel = sim::run_unlearning(&mut state).unwrap();
    assert_eq!(parallel.consensus_rounds, 1);

    let mut state = sim::run_training_stage(&Scenario::demo_inheritance14(Paradigm::Sequential))
        .unwrap();
    let sequential = sim::run_unlearning(&mut state).unwrap();
    assert_eq!(sequential.consensus_rounds, k);
    assert_eq!(sequential.propagation.updates.len() as u64, k);
    println!(
        "PASS criterion 2: parallel rounds = 1, sequential rounds = K = {k} \
         (exact integer equality)"
    );
}

/// Criterion 3: measured CH / consensus / transmission counters equal the
/// closed-form formulas with zero delta on 26 randomized topologies.
#[test]
fn acceptance_3_cost_reconciliation() {
    let mut runs = 0usize;
    for seed in 0..13u64 {
        for paradigm in [Paradigm::Parallel, Paradigm::Sequential] {
            let users = 5 + seed % 7;
            let scenario = Scenario::synthetic(seed, users, paradigm);
            let mut state = sim::run_training_stage(&scenario).unwrap();
            let outcome = sim::run_unlearning(&mut state).unwrap();
            assert!(
                outcome.report.counts_match(),
                "seed {seed} {paradigm:?}: deltas {:?}",
                outcome.report.count_deltas
            );
            assert!(
                outcome.report.cost_delta.abs() < 1e-9,
                "seed {seed} {paradigm:?}: cost delta {}",
                outcome.report.cost_delta
            );
            assert!(
                outcome.report.energy_delta.abs() < 1e-9,
                "seed {seed} {paradigm:?}: energy delta {}",
                outcome.report.energy_delta
            );
            runs += 1;
        }
    }
    assert!(runs >= 20);
    println!(
        "PASS criterion 3: counter deltas all zero across {runs} randomized scenario runs"
    );
}

/// Criterion 4: redaction leaves every header hash, Merkle root, and parent
/// link byte-identical, the chain verifying, and every replaced model
/// archived. Zero tolerance.
#[test]
fn acceptance_4_redaction_invisibility() {
    for paradigm in [Paradigm::Parallel, Paradigm::Sequential] {
        let scenario = Scenario::demo_inheritance14(paradigm);
        let mut state = sim::run_training_stage(&scenario).unwrap();
        let fingerprint = state.chain.stable_fingerprint();
        let replaced: Vec<_> = [5u64, 7, 9, 10, 11, 12, 13]
            .iter()
            .map(|id| state.dag.node(NodeId(*id)).unwrap().params_uri.clone())
            .collect();
        let outcome = sim::run_unlearning(&mut state).unwrap();
        assert_eq!(state.chain.stable_fingerprint(), fingerprint, "{paradigm:?}");
        assert!(state.chain.verify(), "{paradigm:?}");
        assert_eq!(outcome.propagation.updates.len(), replaced.len());
        for old in &replaced {
            let hits = state
                .chain
                .archive_records()
                .filter(|r| {
                    r.reason == RecordReason::UnlearnReplace
                        && r.predecessor_uri.as_ref() == Some(old)
                })
                .count();
            assert_eq!(hits, 1, "{paradigm:?}: {old} archived exactly once");
        }
    }
    println!(
        "PASS criterion 4: live-chain fingerprints byte-identical pre/post redaction, \
         chains verify, all 7 replaced models archived (both paradigms)"
    );
}

/// Criterion 5: 1000 random forgeries all collide with the original digest;
/// 1000 single-byte tampers all fail verification.
#[test]
fn acceptance_5_chameleon_collisions() {
    let params = GroupParams::test_default();
    let keys = chash::keygen(&params, [42; 32]);
    let mut rng = ChaCha20Rng::seed_from_u64(5);

    for i in 0..1000 {
        let old: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
        let new: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
        let r = params.random_scalar(&mut rng);
        let digest = chash::hash(&keys.pk, &old, &r).unwrap();
        let forged = chash::forge(&keys.sk, &old, &r, &new).unwrap();
        assert!(
            chash::verify(&keys.pk, &new, &forged, &digest),
            "forgery {i} failed to collide"
        );
    }

    for i in 0..1000 {
        let mut payload: Vec<u8> = (0..rng.gen_range(1..64)).map(|_| rng.gen()).collect();
        let r = params.random_scalar(&mut rng);
        let digest = chash::hash(&keys.pk, &payload, &r).unwrap();
        let idx = rng.gen_range(0..payload.len());
        let bit = 1u8 << rng.gen_range(0..8);
        payload[idx] ^= bit;
        assert!(
            !chash::verify(&keys.pk, &payload, &r, &digest),
            "tamper {i} passed verification"
        );
    }
    println!(
        "PASS criterion 5: 1000/1000 forgeries verify against the original digest, \
         1000/1000 byte-flip tampers rejected"
    );
}

fn test_settings() -> TrainSettings {
    TrainSettings {
        learning_rate: 0.1,
        batch_size: 8,
        epochs: 1,
        rng_seed: 0,
    }
}

fn scalar_shape() -> ModelShape {
    ModelShape::Linear {
        features: 1,
        classes: 1,
    }
}

fn make_param(values: Vec<f64>) -> ParamVector {
    ParamVector {
        values,
        shape: scalar_shape(),
    }
}

fn random_dag(nodes: u64, seed: u64) -> InheritanceDag {
    let store = ModelStore::new();
    let uri = store.put(Namespace::Live, b"acceptance");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let genesis = build_signed_node(0, &[], uri.clone(), vec![0], 0.0, vec![], test_settings(), 0, 3);
    let mut dag = InheritanceDag::new(genesis).unwrap();
    for id in 1..=nodes {
        let mut parents: Vec<u64> = (0..id).filter(|_| rng.gen_bool(0.45)).collect();
        if parents.is_empty() {
            parents.push(rng.gen_range(0..id));
        }
        dag.add_node(build_signed_node(
            id,
            &parents,
            uri.clone(),
            vec![id as u8],
            0.0,
            vec![],
            test_settings(),
            id,
            3,
        ))
        .unwrap();
    }
    dag
}

/// Literal path-enumeration oracle (own DFS over child edges).
fn oracle_delta(dag: &InheritanceDag, request: &UnlearnRequest, y: NodeId) -> Vec<f64> {
    fn walk(
        dag: &InheritanceDag,
        at: NodeId,
        target: NodeId,
        trail: &mut Vec<NodeId>,
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if at == target {
            out.push(trail.clone());
            return;
        }
        for child in dag.children(at) {
            trail.push(*child);
            walk(dag, *child, target, trail, out);
            trail.pop();
        }
    }
    let dim = request.starts.values().next().unwrap().values.len();
    let mut total = vec![0.0; dim];
    for (start, grad) in &request.starts {
        if *start == y {
            continue;
        }
        let mut paths = Vec::new();
        walk(dag, *start, y, &mut vec![*start], &mut paths);
        for path in &paths {
            let mut product = 1.0;
            for node in &path[1..] {
                product *= dag.reference_count(*node).unwrap() as f64;
            }
            for (t, g) in total.iter_mut().zip(&grad.values) {
                *t += request.alpha * g / product;
            }
        }
    }
    total
}

/// Criterion 6: the propagation sweep equals the literal path-enumeration
/// oracle within 1e-9 per parameter on 100 random DAGs, and multi-start
/// deltas superpose exactly.
#[test]
fn acceptance_6_propagation_oracle_equivalence() {
    let mut checked_nodes = 0usize;
    for case in 0..100u64 {
        let nodes = 6 + case % 7; // 7 to 13 nodes including genesis
        let dag = random_dag(nodes, 1000 + case);
        let params: BTreeMap<NodeId, ParamVector> =
            dag.ids().map(|id| (id, make_param(vec![0.25, -0.5]))).collect();
        let start_count = 1 + (case % 3) as usize;
        let mut rng = ChaCha20Rng::seed_from_u64(case);
        let mut starts = BTreeMap::new();
        while starts.len() < start_count {
            let id = NodeId(rng.gen_range(1..=nodes));
            let magnitude = rng.gen_range(0.2..1.5);
            starts.entry(id).or_insert_with(|| make_param(vec![magnitude, -magnitude / 3.0]));
        }
        let request = UnlearnRequest {
            starts,
            alpha: 0.8,
            epsilon: 1e-15,
            forget_labels: BTreeSet::new(),
        };
        let result = unlearn::parallel_propagate(&dag, &params, &request).unwrap();
        for y in dag.descendants(&request.start_ids()).unwrap() {
            if request.starts.contains_key(&y) {
                continue;
            }
            let expected = oracle_delta(&dag, &request, y);
            let got = &result.deltas[&y].values;
            for (g, e) in got.iter().zip(&expected) {
                assert!(
                    (g - e).abs() < 1e-9,
                    "case {case} node {y}: {g} vs oracle {e}"
                );
            }
            checked_nodes += 1;
        }

        // superposition: the multi-start delta is exactly the sum of the
        // single-start deltas
        if request.starts.len() >= 2 {
            let singles: Vec<_> = request
                .starts
                .iter()
                .map(|(s, grad)| {
                    let single = UnlearnRequest {
                        starts: BTreeMap::from([(*s, grad.clone())]),
                        alpha: request.alpha,
                        epsilon: request.epsilon,
                        forget_labels: BTreeSet::new(),
                    };
                    unlearn::parallel_propagate(&dag, &params, &single).unwrap()
                })
                .collect();
            for y in dag.descendants(&request.start_ids()).unwrap() {
                if request.starts.contains_key(&y) {
                    continue;
                }
                let combined = &result.deltas[&y].values;
                for (slot, combined_v) in combined.iter().enumerate() {
                    let sum: f64 = singles
                        .iter()
                        .map(|r| r.deltas.get(&y).map(|d| d.values[slot]).unwrap_or(0.0))
                        .fold(0.0, |acc, v| acc + v);
                    assert_eq!(*combined_v, sum, "superposition at node {y} slot {slot}");
                }
            }
        }
    }
    println!(
        "PASS criterion 6: propagation matched the path-enumeration oracle within 1e-9 \
         on 100 random DAGs ({checked_nodes} node checks); multi-start superposition exact"
    );
}

/// Criterion 7: on uniform reference-count-2 chains, the first skipped depth
/// equals ceil(log2(norm/epsilon)) for 60 sampled non-integer ratios.
#[test]
fn acceptance_7_depth_bound() {
    // chain of depth 14 under genesis; every chain node has a dummy second
    // parent so its reference count is exactly 2
    let store = ModelStore::new();
    let uri = store.put(Namespace::Live, b"depth");
    let depth = 14u64;
    let genesis =
        build_signed_node(0, &[], uri.clone(), vec![0], 0.0, vec![], test_settings(), 0, 4);
    let mut dag = InheritanceDag::new(genesis).unwrap();
    for d in 1..=depth {
        dag.add_node(build_signed_node(
            d,
            &[0],
            uri.clone(),
            vec![d as u8],
            0.0,
            vec![],
            test_settings(),
            d,
            4,
        ))
        .unwrap();
    }
    let start = depth + 1;
    dag.add_node(build_signed_node(
        start,
        &[0],
        uri.clone(),
        vec![start as u8],
        0.0,
        vec![],
        test_settings(),
        start,
        4,
    ))
    .unwrap();
    let mut prev = start;
    for d in 1..=depth {
        let id = start + d;
        dag.add_node(build_signed_node(
            id,
            &[prev, d], // chain parent + dummy parent d
            uri.clone(),
            vec![id as u8],
            0.0,
            vec![],
            test_settings(),
            id,
            4,
        ))
        .unwrap();
        prev = id;
    }
    let params: BTreeMap<NodeId, ParamVector> =
        dag.ids().map(|id| (id, make_param(vec![0.0, 0.0]))).collect();

    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut checked = 0;
    while checked < 60 {
        let norm = rng.gen_range(0.2..4.0);
        let mut exponent: f64 = rng.gen_range(0.2..10.0);
        if (exponent - exponent.round()).abs() < 0.05 {
            exponent += 0.1;
        }
        let epsilon = norm / 2f64.powf(exponent);
        let ratio_log = (norm / epsilon).log2();
        if (ratio_log - ratio_log.round()).abs() < 1e-9 || ratio_log <= 0.0 {
            continue;
        }
        let request = UnlearnRequest {
            starts: BTreeMap::from([(NodeId(start), make_param(vec![norm, 0.0]))]),
            alpha: 1.0,
            epsilon,
            forget_labels: BTreeSet::new(),
        };
        let result = unlearn::parallel_propagate(&dag, &params, &request).unwrap();
        let first_skip = (1..=depth)
            .find(|d| result.skipped.contains(&NodeId(start + d)))
            .expect("skip depth within the chain");
        let bound = unlearn::depth_bound(norm, epsilon).unwrap() as u64;
        assert_eq!(
            first_skip, bound,
            "norm {norm} epsilon {epsilon}: first skip {first_skip} vs bound {bound}"
        );
        checked += 1;
    }
    println!(
        "PASS criterion 7: first skipped depth equals ceil(log2(norm/eps)) on {checked} \
         sampled pairs over reference-count-2 chains"
    );
}

/// Criterion 8: desk-scale unlearning effectiveness on a 5-user chain of
/// seeded blobs with the linear family, within 60 seconds.
#[test]
fn acceptance_8_unlearning_effectiveness() {
    let started = Instant::now();

    // sequential re-training: forget-class accuracy <= 0.05 at every updated
    // node, retained accuracy within 0.10 of baseline
    let scenario = Scenario::demo_chain(5, Paradigm::Sequential);
    let mut state = sim::run_training_stage(&scenario).unwrap();
    let outcome = sim::run_unlearning(&mut state).unwrap();
    assert_eq!(outcome.metrics.len(), 5);
    for m in &outcome.metrics {
        assert!(
            m.forget_train <= 0.05,
            "node {}: forget accuracy {} above 0.05",
            m.node,
            m.forget_train
        );
        assert!(
            m.retain_train >= m.baseline_retain_train - 0.10,
            "node {}: retain accuracy {} fell more than 0.10 below baseline {}",
            m.node,
            m.retain_train,
            m.baseline_retain_train
        );
    }

    // parallel gradient ascent: strictly below the original at the start,
    // non-increasing over the first two depths
    let scenario = Scenario::demo_chain(5, Paradigm::Parallel);
    let mut state = sim::run_training_stage(&scenario).unwrap();
    let outcome = sim::run_unlearning(&mut state).unwrap();
    let by_node: BTreeMap<NodeId, &sim::NodeMetrics> =
        outcome.metrics.iter().map(|m| (m.node, m)).collect();
    let start = &by_node[&NodeId(1)];
    assert!(
        start.forget_train < start.baseline_forget_train,
        "start forget accuracy {} not strictly below original {}",
        start.forget_train,
        start.baseline_forget_train
    );
    let depth1 = &by_node[&NodeId(2)];
    let depth2 = &by_node[&NodeId(3)];
    assert!(depth1.forget_train <= start.forget_train);
    assert!(depth2.forget_train <= depth1.forget_train);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "PASS criterion 8: sequential forget <= 0.05 with retention within 0.10 at all 5 \
         nodes; parallel ascent strictly reduces start forget accuracy ({} -> {}) and is \
         non-increasing over depths 1-2; runtime {elapsed:?}",
        start.baseline_forget_train, start.forget_train
    );
}

/// Criterion 9: analytic gradients match central finite differences within
/// 1e-5 relative error at 20 random points per family.
#[test]
fn acceptance_9_gradient_correctness() {
    let shapes = [
        ModelShape::Linear {
            features: 3,
            classes: 3,
        },
        ModelShape::Mlp {
            features: 3,
            hidden: 4,
            classes: 3,
        },
    ];
    let mut points = 0usize;
    for shape in shapes {
        let cfg = model::BlobConfig {
            classes: shape.classes(),
            features: shape.features(),
            ..model::BlobConfig::default()
        };
        for point in 0..20u64 {
            let data = model::gaussian_blobs(&cfg, 6, 900 + point, 1900 + point).unwrap();
            let params = ParamVector::seeded_init(shape, 300 + point, 0.5);
            let grad = model::loss_gradient(&params, &data).unwrap();
            let h = 1e-5;
            // the central difference itself carries ~eps*|loss|/(2h) of
            // cancellation noise; allow it as an absolute floor
            let fd_noise = 1e-9;
            for (i, g) in grad.iter().enumerate() {
                let mut plus = params.clone();
                plus.values[i] += h;
                let mut minus = params.clone();
                minus.values[i] -= h;
                let fd = (model::loss(&plus, &data).unwrap()
                    - model::loss(&minus, &data).unwrap())
                    / (2.0 * h);
                let tolerance = 1e-5 * g.abs().max(fd.abs()) + fd_noise;
                assert!(
                    (g - fd).abs() < tolerance,
                    "{shape:?} point {point} param {i}: analytic {g} vs fd {fd}"
                );
            }
            points += 1;
        }
    }
    println!(
        "PASS criterion 9: analytic gradients within 1e-5 relative of central finite \
         differences at {points} random points across both model families"
    );
}
