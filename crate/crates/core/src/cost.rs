//! Closed-form blockchain overhead predictions and their reconciliation
//! against counters measured from an actual simulation run.
//!
//! Cost formulas, per updated-model count K, touched-block count L, and
//! average reference count N^R:
//!
//! ```text
//! parallel:    (K+L)*C_ch + C_con + 2K*C_tran
//! sequential:  2K*C_ch + K*C_con + 2K*C_tran + N^R*(K-1)*C_tran
//! ```
//!
//! with energy analogues that scale chameleon and consensus work by the
//! committee size M and transmission by the parameter count |S|. Counter
//! reconciliation works on exact integers; the monetized totals are f64.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("updated-model count K must be at least 1")]
    ZeroModels,
    #[error("touched-block count L must be at least 1")]
    ZeroBlocks,
    #[error("negative unit cost: {0}")]
    NegativeUnit(&'static str),
    #[error("prediction is for {predicted:?} but measurement came from {measured:?}")]
    ParadigmMismatch {
        predicted: Paradigm,
        measured: Paradigm,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    Parallel,
    Sequential,
}

/// Unit costs and energies plus the scenario constants they multiply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitCosts {
    pub c_ch: f64,
    pub c_con: f64,
    pub c_tran: f64,
    pub e_ch: f64,
    pub e_con: f64,
    pub e_tran: f64,
    /// Consensus participant count M.
    pub m_nodes: u64,
    /// Model parameter count |S|.
    pub param_count: u64,
    /// Local dataset size |D| (only the FL-side estimators use it).
    pub dataset_size: u64,
    /// Computational power factors for the FL-side estimators.
    #[serde(default = "one")]
    pub p_seq: f64,
    #[serde(default = "one")]
    pub p_para: f64,
}

fn one() -> f64 {
    1.0
}

impl UnitCosts {
    /// Illustrative committee-consensus defaults (not measured data).
    pub fn pbft_preset(m_nodes: u64, param_count: u64, dataset_size: u64) -> Self {
        Self {
            c_ch: 1.0,
            c_con: 3.0,
            c_tran: 0.2,
            e_ch: 1.0,
            e_con: 2.0,
            e_tran: 0.001,
            m_nodes,
            param_count,
            dataset_size,
            p_seq: 1.0,
            p_para: 1.0,
        }
    }

    /// Same shape with consensus two orders of magnitude dearer; mining is
    /// modeled only through this price, never as real hashing.
    pub fn pow_preset(m_nodes: u64, param_count: u64, dataset_size: u64) -> Self {
        Self {
            c_con: 300.0,
            e_con: 200.0,
            ..Self::pbft_preset(m_nodes, param_count, dataset_size)
        }
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (name, v) in [
            ("c_ch", self.c_ch),
            ("c_con", self.c_con),
            ("c_tran", self.c_tran),
            ("e_ch", self.e_ch),
            ("e_con", self.e_con),
            ("e_tran", self.e_tran),
            ("p_seq", self.p_seq),
            ("p_para", self.p_para),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(CostError::NegativeUnit(name));
            }
        }
        Ok(())
    }
}

/// Whether chameleon energy scales with the committee size.
///
/// The closed-form energy expressions multiply CH work by M (every member
/// forges) while the cost expressions count each CH once; both conventions
/// are available, defaulting to the formulas as stated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChEnergyConvention {
    #[default]
    PerCommitteeMember,
    SingleForger,
}

impl ChEnergyConvention {
    fn ch_factor(self, m_nodes: u64) -> f64 {
        match self {
            ChEnergyConvention::PerCommitteeMember => m_nodes as f64,
            ChEnergyConvention::SingleForger => 1.0,
        }
    }
}

/// Per-category totals (chameleon, consensus, transmission).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostTotals {
    pub ch: f64,
    pub consensus: f64,
    pub transmission: f64,
}

impl CostTotals {
    pub fn total(&self) -> f64 {
        self.ch + self.consensus + self.transmission
    }
}

/// Cost and energy totals for one paradigm run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OverheadTotals {
    pub cost: CostTotals,
    pub energy: CostTotals,
}

/// Parallel-paradigm overhead with the default energy convention.
pub fn parallel_cost(k: u64, l: u64, u: &UnitCosts) -> Result<OverheadTotals, CostError> {
    parallel_cost_with(k, l, u, ChEnergyConvention::default())
}

pub fn parallel_cost_with(
    k: u64,
    l: u64,
    u: &UnitCosts,
    convention: ChEnergyConvention,
) -> Result<OverheadTotals, CostError> {
    if k == 0 {
        return Err(CostError::ZeroModels);
    }
    if l == 0 {
        return Err(CostError::ZeroBlocks);
    }
    u.validate()?;
    let (k_f, l_f) = (k as f64, l as f64);
    Ok(OverheadTotals {
        cost: CostTotals {
            ch: (k_f + l_f) * u.c_ch,
            consensus: u.c_con,
            transmission: 2.0 * k_f * u.c_tran,
        },
        energy: CostTotals {
            ch: (k_f + l_f) * convention.ch_factor(u.m_nodes) * u.e_ch,
            consensus: u.m_nodes as f64 * u.e_con,
            transmission: 2.0 * k_f * u.param_count as f64 * u.e_tran,
        },
    })
}

/// Sequential-paradigm overhead with the default energy convention.
pub fn sequential_cost(k: u64, avg_refs: f64, u: &UnitCosts) -> Result<OverheadTotals, CostError> {
    sequential_cost_with(k, avg_refs, u, ChEnergyConvention::default())
}

pub fn sequential_cost_with(
    k: u64,
    avg_refs: f64,
    u: &UnitCosts,
    convention: ChEnergyConvention,
) -> Result<OverheadTotals, CostError> {
    if k == 0 {
        return Err(CostError::ZeroModels);
    }
    if !avg_refs.is_finite() || avg_refs < 0.0 {
        return Err(CostError::NegativeUnit("avg_refs"));
    }
    u.validate()?;
    let k_f = k as f64;
    let downstream = avg_refs * (k_f - 1.0);
    Ok(OverheadTotals {
        cost: CostTotals {
            ch: 2.0 * k_f * u.c_ch,
            consensus: k_f * u.c_con,
            transmission: (2.0 * k_f + downstream) * u.c_tran,
        },
        energy: CostTotals {
            ch: 2.0 * k_f * convention.ch_factor(u.m_nodes) * u.e_ch,
            consensus: k_f * u.m_nodes as f64 * u.e_con,
            transmission: (2.0 * k_f + downstream) * u.param_count as f64 * u.e_tran,
        },
    })
}

/// Block packing mode for the block-update cost comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockPacking {
    /// Every transaction forms its own block: 2K chameleon updates.
    OneTxPerBlock,
    /// All K transactions share one block: K+1 chameleon updates.
    ManyTxPerBlock,
}

/// Chameleon cost of updating K models under the given block packing.
pub fn block_update_cost(k: u64, mode: BlockPacking, u: &UnitCosts) -> Result<f64, CostError> {
    if k == 0 {
        return Err(CostError::ZeroModels);
    }
    u.validate()?;
    Ok(match mode {
        BlockPacking::OneTxPerBlock => 2.0 * k as f64 * u.c_ch,
        BlockPacking::ManyTxPerBlock => (k as f64 + 1.0) * u.c_ch,
    })
}

/// Order-of-magnitude FL-side compute estimators (multiplicative constant 1).
/// These realize asymptotic expressions and are excluded from exact
/// reconciliation.
pub mod fl_estimates {
    use super::UnitCosts;

    /// Sequential updates: Q * d * N^R * |D| * |S|.
    pub fn sequential_compute(q: u64, depth: u64, avg_refs: f64, u: &UnitCosts) -> f64 {
        q as f64 * depth as f64 * avg_refs * u.dataset_size as f64 * u.param_count as f64
    }

    /// Parallel updates: d * N^R * |S| (independent of the request count).
    pub fn parallel_compute(depth: u64, avg_refs: f64, u: &UnitCosts) -> f64 {
        depth as f64 * avg_refs * u.param_count as f64
    }

    /// Sequential energy: Q * P_seq * (d * N^R * |D| * |S|).
    pub fn sequential_energy(q: u64, depth: u64, avg_refs: f64, u: &UnitCosts) -> f64 {
        q as f64 * u.p_seq * depth as f64 * avg_refs * u.dataset_size as f64 * u.param_count as f64
    }

    /// Parallel energy: Q * P_seq * (|D| * |S|) + (K - Q) * M * P_para * (d * N^R * |S|).
    pub fn parallel_energy(q: u64, k: u64, depth: u64, avg_refs: f64, u: &UnitCosts) -> f64 {
        let start_term = q as f64 * u.p_seq * u.dataset_size as f64 * u.param_count as f64;
        let inherited = k.saturating_sub(q) as f64
            * u.m_nodes as f64
            * u.p_para
            * depth as f64
            * avg_refs
            * u.param_count as f64;
        start_term + inherited
    }
}

/// Integer operation counters, predicted or measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CounterSet {
    pub ch_ops: u64,
    pub consensus_rounds: u64,
    pub transmissions: u64,
}

/// Predicted counters for a parallel run touching K models across L blocks.
pub fn parallel_counts(k: u64, l: u64) -> CounterSet {
    CounterSet {
        ch_ops: k + l,
        consensus_rounds: 1,
        transmissions: 2 * k,
    }
}

/// Predicted counters for a sequential run over K models whose non-start
/// re-aggregations download `parent_downloads` parents in total (the exact
/// integer behind the N^R*(K-1) term).
pub fn sequential_counts(k: u64, parent_downloads: u64) -> CounterSet {
    CounterSet {
        ch_ops: 2 * k,
        consensus_rounds: k,
        transmissions: 2 * k + parent_downloads,
    }
}

/// Prices a counter set with the unit costs, mirroring the formula structure.
pub fn overhead_from_counters(
    counters: &CounterSet,
    u: &UnitCosts,
    convention: ChEnergyConvention,
) -> OverheadTotals {
    OverheadTotals {
        cost: CostTotals {
            ch: counters.ch_ops as f64 * u.c_ch,
            consensus: counters.consensus_rounds as f64 * u.c_con,
            transmission: counters.transmissions as f64 * u.c_tran,
        },
        energy: CostTotals {
            ch: counters.ch_ops as f64 * convention.ch_factor(u.m_nodes) * u.e_ch,
            consensus: counters.consensus_rounds as f64 * u.m_nodes as f64 * u.e_con,
            transmission: counters.transmissions as f64 * u.param_count as f64 * u.e_tran,
        },
    }
}

/// A paradigm's predicted counters and totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub paradigm: Paradigm,
    pub counts: CounterSet,
    pub overhead: OverheadTotals,
}

/// Counters and totals measured from a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub paradigm: Paradigm,
    pub counts: CounterSet,
    pub overhead: OverheadTotals,
}

/// Signed per-counter deltas (predicted - measured).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterDeltas {
    pub ch_ops: i64,
    pub consensus_rounds: i64,
    pub transmissions: i64,
}

impl CounterDeltas {
    pub fn all_zero(&self) -> bool {
        self.ch_ops == 0 && self.consensus_rounds == 0 && self.transmissions == 0
    }
}

/// Reconciliation of predictions against a measured run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub paradigm: Paradigm,
    pub predicted_counts: CounterSet,
    pub measured_counts: CounterSet,
    pub count_deltas: CounterDeltas,
    pub predicted: OverheadTotals,
    pub measured: OverheadTotals,
    pub cost_delta: f64,
    pub energy_delta: f64,
}

impl CostReport {
    pub fn counts_match(&self) -> bool {
        self.count_deltas.all_zero()
    }

    /// Flat CSV: one category per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,predicted,measured,delta\n");
        let mut push = |name: &str, p: f64, m: f64| {
            out.push_str(&format!("{name},{p},{m},{}\n", p - m));
        };
        push(
            "ch_ops",
            self.predicted_counts.ch_ops as f64,
            self.measured_counts.ch_ops as f64,
        );
        push(
            "consensus_rounds",
            self.predicted_counts.consensus_rounds as f64,
            self.measured_counts.consensus_rounds as f64,
        );
        push(
            "transmissions",
            self.predicted_counts.transmissions as f64,
            self.measured_counts.transmissions as f64,
        );
        push("cost_ch", self.predicted.cost.ch, self.measured.cost.ch);
        push(
            "cost_consensus",
            self.predicted.cost.consensus,
            self.measured.cost.consensus,
        );
        push(
            "cost_transmission",
            self.predicted.cost.transmission,
            self.measured.cost.transmission,
        );
        push(
            "cost_total",
            self.predicted.cost.total(),
            self.measured.cost.total(),
        );
        push("energy_ch", self.predicted.energy.ch, self.measured.energy.ch);
        push(
            "energy_consensus",
            self.predicted.energy.consensus,
            self.measured.energy.consensus,
        );
        push(
            "energy_transmission",
            self.predicted.energy.transmission,
            self.measured.energy.transmission,
        );
        push(
            "energy_total",
            self.predicted.energy.total(),
            self.measured.energy.total(),
        );
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Pairs a prediction with a measurement. The paradigms must agree; counter
/// deltas are exact integers and are expected to be zero.
pub fn reconcile(predicted: &Prediction, measured: &Measurement) -> Result<CostReport, CostError> {
    if predicted.paradigm != measured.paradigm {
        return Err(CostError::ParadigmMismatch {
            predicted: predicted.paradigm,
            measured: measured.paradigm,
        });
    }
    let deltas = CounterDeltas {
        ch_ops: predicted.counts.ch_ops as i64 - measured.counts.ch_ops as i64,
        consensus_rounds: predicted.counts.consensus_rounds as i64
            - measured.counts.consensus_rounds as i64,
        transmissions: predicted.counts.transmissions as i64
            - measured.counts.transmissions as i64,
    };
    Ok(CostReport {
        paradigm: predicted.paradigm,
        predicted_counts: predicted.counts,
        measured_counts: measured.counts,
        count_deltas: deltas,
        predicted: predicted.overhead,
        measured: measured.overhead,
        cost_delta: predicted.overhead.cost.total() - measured.overhead.cost.total(),
        energy_delta: predicted.overhead.energy.total() - measured.overhead.energy.total(),
    })
}
