//! Scenario configuration: one file describes the dataset, the model family,
//! the inheritance topology, the unlearning request, the committee, and the
//! unit costs. TOML and JSON are both accepted.

use crate::chash::{ChashError, GroupParams};
use crate::cost::{ChEnergyConvention, Paradigm, UnitCosts};
use crate::model::{BlobConfig, ModelShape};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("could not read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Group(#[from] ChashError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub classes: usize,
    pub features: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub center_offset: f64,
    pub center_spread: f64,
    pub center_jitter: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            features: 4,
            train_per_class: 40,
            test_per_class: 20,
            center_offset: 3.0,
            center_spread: 3.0,
            center_jitter: 0.3,
            noise_std: 0.5,
            seed: 7,
        }
    }
}

impl DatasetConfig {
    pub fn blob_config(&self) -> BlobConfig {
        BlobConfig {
            classes: self.classes,
            features: self.features,
            center_offset: self.center_offset,
            center_spread: self.center_spread,
            center_jitter: self.center_jitter,
            noise_std: self.noise_std,
        }
    }
}

/// Which built-in model family the scenario trains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    #[default]
    Linear,
    Mlp { hidden: usize },
}

impl ModelConfig {
    pub fn shape(&self, dataset: &DatasetConfig) -> ModelShape {
        match *self {
            ModelConfig::Linear => ModelShape::Linear {
                features: dataset.features,
                classes: dataset.classes,
            },
            ModelConfig::Mlp { hidden } => ModelShape::Mlp {
                features: dataset.features,
                hidden,
                classes: dataset.classes,
            },
        }
    }
}

fn default_learning_rate() -> f64 {
    0.25
}
fn default_batch_size() -> usize {
    16
}
fn default_epochs() -> usize {
    50
}

/// One participating user/model node. The genesis node is implicit (id 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserConfig {
    pub id: u64,
    pub references: Vec<u64>,
    pub seed: u64,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
}

fn default_alpha() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_ascent_lr() -> f64 {
    0.3
}
fn default_ascent_epochs() -> usize {
    40
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlearnConfig {
    pub starts: Vec<u64>,
    pub forget_labels: Vec<usize>,
    pub paradigm: Paradigm,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Gradient-ascent settings used by the parallel paradigm to produce the
    /// starting deltas.
    #[serde(default = "default_ascent_lr")]
    pub ascent_learning_rate: f64,
    #[serde(default = "default_ascent_epochs")]
    pub ascent_epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CommitteeConfig {
    /// Pool size P (all synthetic candidates pass the thresholds).
    pub pool_size: u64,
    /// Number of malicious candidates M in the pool.
    pub malicious: u64,
    /// Elected committee size N.
    pub committee_size: u64,
    /// Per-round attack probability of a malicious member.
    pub rho: f64,
    pub min_stake: f64,
    pub min_trust: f64,
    pub seed: u64,
}

impl Default for CommitteeConfig {
    fn default() -> Self {
        Self {
            pool_size: 30,
            malicious: 10,
            committee_size: 21,
            rho: 0.0,
            min_stake: 1.0,
            min_trust: 0.5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostPreset {
    #[default]
    Pbft,
    Pow,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CostConfig {
    pub preset: CostPreset,
    pub ch_energy: ChEnergyConvention,
    pub c_ch: Option<f64>,
    pub c_con: Option<f64>,
    pub c_tran: Option<f64>,
    pub e_ch: Option<f64>,
    pub e_con: Option<f64>,
    pub e_tran: Option<f64>,
}

impl CostConfig {
    /// Materializes unit costs: preset values, then any explicit overrides.
    pub fn resolve(&self, m_nodes: u64, param_count: u64, dataset_size: u64) -> UnitCosts {
        let mut costs = match self.preset {
            CostPreset::Pbft => UnitCosts::pbft_preset(m_nodes, param_count, dataset_size),
            CostPreset::Pow => UnitCosts::pow_preset(m_nodes, param_count, dataset_size),
        };
        if let Some(v) = self.c_ch {
            costs.c_ch = v;
        }
        if let Some(v) = self.c_con {
            costs.c_con = v;
        }
        if let Some(v) = self.c_tran {
            costs.c_tran = v;
        }
        if let Some(v) = self.e_ch {
            costs.e_ch = v;
        }
        if let Some(v) = self.e_con {
            costs.e_con = v;
        }
        if let Some(v) = self.e_tran {
            costs.e_tran = v;
        }
        costs
    }
}

/// Chameleon-hash group selection.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum GroupPreset {
    /// 256-bit safe prime; fast, the test default.
    #[default]
    Small,
    /// 512-bit safe prime.
    Large,
    /// Explicit decimal parameters.
    Custom { p: String, q: String, g: String },
}

impl GroupPreset {
    pub fn resolve(&self) -> Result<GroupParams, ChashError> {
        match self {
            GroupPreset::Small => Ok(GroupParams::test_default()),
            GroupPreset::Large => Ok(GroupParams::preset_512()),
            GroupPreset::Custom { p, q, g } => GroupParams::from_decimal_strings(p, q, g),
        }
    }
}

fn default_block_size() -> usize {
    4
}
fn default_ch_seed() -> u64 {
    11
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LedgerSettings {
    /// Transactions per live block during the training stage.
    pub block_size: usize,
    pub group: GroupPreset,
    /// Seed for the committee chameleon keys and all chain randomness.
    pub ch_seed: u64,
}

impl Default for LedgerSettings {
    fn default() -> Self {
        Self {
            block_size: default_block_size(),
            group: GroupPreset::default(),
            ch_seed: default_ch_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

/// Optional generative wiring mode: ignore the explicit reference lists and
/// let each user sample `candidates_k` earlier models, evaluate them on its
/// own test data, and reference the best `referenced_n`. Both bounds are
/// clamped to the published population at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub candidates_k: usize,
    pub referenced_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub model: ModelConfig,
    pub users: Vec<UserConfig>,
    pub unlearning: UnlearnConfig,
    #[serde(default)]
    pub committee: CommitteeConfig,
    #[serde(default)]
    pub costs: CostConfig,
    #[serde(default)]
    pub ledger: LedgerSettings,
    #[serde(default)]
    pub output: OutputConfig,
    /// When present, reference lists are generated via candidate selection
    /// instead of taken from the user entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionConfig>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    /// Loads from a path, dispatching on the extension (`.json` is JSON,
    /// anything else is tried as TOML).
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn user_ids(&self) -> Vec<u64> {
        self.users.iter().map(|u| u.id).collect()
    }

    pub fn shape(&self) -> ModelShape {
        self.model.shape(&self.dataset)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let d = &self.dataset;
        if d.classes < 2 {
            return Err(invalid("dataset.classes must be at least 2"));
        }
        if d.features == 0 || d.train_per_class == 0 || d.test_per_class == 0 {
            return Err(invalid("dataset dimensions must be positive"));
        }
        if let ModelConfig::Mlp { hidden } = self.model {
            if hidden == 0 {
                return Err(invalid("model.hidden must be positive"));
            }
        }
        if self.users.is_empty() {
            return Err(invalid("at least one user is required"));
        }
        let mut known: BTreeSet<u64> = BTreeSet::from([0]);
        let mut prev = 0u64;
        for user in &self.users {
            if user.id <= prev {
                return Err(invalid(format!(
                    "user ids must be strictly increasing and positive; saw {} after {}",
                    user.id, prev
                )));
            }
            if user.references.is_empty() {
                return Err(invalid(format!("user {} must reference a parent", user.id)));
            }
            let mut seen = BTreeSet::new();
            for reference in &user.references {
                if !known.contains(reference) {
                    return Err(invalid(format!(
                        "user {} references unknown id {}",
                        user.id, reference
                    )));
                }
                if !seen.insert(*reference) {
                    return Err(invalid(format!(
                        "user {} repeats reference {}",
                        user.id, reference
                    )));
                }
            }
            if !user.learning_rate.is_finite() || user.learning_rate <= 0.0 || user.batch_size == 0 {
                return Err(invalid(format!("user {} has invalid training settings", user.id)));
            }
            known.insert(user.id);
            prev = user.id;
        }
        let u = &self.unlearning;
        if u.starts.is_empty() {
            return Err(invalid("unlearning.starts must be non-empty"));
        }
        for start in &u.starts {
            if *start == 0 || !known.contains(start) {
                return Err(invalid(format!("unlearning start {start} is not a user node")));
            }
        }
        if u.forget_labels.is_empty() {
            return Err(invalid("unlearning.forget_labels must be non-empty"));
        }
        let distinct: BTreeSet<usize> = u.forget_labels.iter().copied().collect();
        if distinct.len() >= d.classes {
            return Err(invalid("cannot forget every class"));
        }
        for label in &u.forget_labels {
            if *label >= d.classes {
                return Err(invalid(format!("forget label {label} out of range")));
            }
        }
        if u.alpha.is_nan() || u.alpha <= 0.0 || u.alpha > 1.0 {
            return Err(invalid("unlearning.alpha must lie in (0, 1]"));
        }
        if u.epsilon.is_nan() || u.epsilon <= 0.0 {
            return Err(invalid("unlearning.epsilon must be positive"));
        }
        if u.ascent_learning_rate.is_nan() || u.ascent_learning_rate <= 0.0 {
            return Err(invalid("unlearning.ascent_learning_rate must be positive"));
        }
        let c = &self.committee;
        if c.committee_size == 0 || c.committee_size > c.pool_size {
            return Err(invalid("committee_size must lie in [1, pool_size]"));
        }
        if c.malicious > c.pool_size {
            return Err(invalid("malicious count exceeds pool size"));
        }
        if !(0.0..=1.0).contains(&c.rho) {
            return Err(invalid("committee.rho must lie in [0, 1]"));
        }
        if self.ledger.block_size == 0 {
            return Err(invalid("ledger.block_size must be positive"));
        }
        if let Some(sel) = &self.selection {
            if sel.referenced_n == 0 || sel.referenced_n > sel.candidates_k {
                return Err(invalid("selection needs 1 <= referenced_n <= candidates_k"));
            }
        }
        self.ledger.group.resolve()?;
        Ok(())
    }

    /// Smallest useful scenario: genesis plus one user, parallel paradigm.
    pub fn demo_two_node() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::Linear,
            users: vec![UserConfig {
                id: 1,
                references: vec![0],
                seed: 101,
                learning_rate: default_learning_rate(),
                batch_size: default_batch_size(),
                epochs: default_epochs(),
            }],
            unlearning: UnlearnConfig {
                starts: vec![1],
                forget_labels: vec![2],
                paradigm: Paradigm::Parallel,
                alpha: default_alpha(),
                epsilon: default_epsilon(),
                ascent_learning_rate: default_ascent_lr(),
                ascent_epochs: default_ascent_epochs(),
            },
            committee: CommitteeConfig::default(),
            costs: CostConfig::default(),
            ledger: LedgerSettings::default(),
            output: OutputConfig::default(),
            selection: None,
        }
    }

    /// The 14-user inheritance experiment shape: two starting models (users
    /// 5 and 7) whose influence reaches seven of the fourteen models.
    pub fn demo_inheritance14(paradigm: Paradigm) -> Self {
        let wiring: [(u64, &[u64]); 14] = [
            (1, &[0]),
            (2, &[0]),
            (3, &[1]),
            (4, &[1, 2]),
            (5, &[2]),
            (6, &[3]),
            (7, &[4]),
            (8, &[3, 6]),
            (9, &[5, 7]),
            (10, &[5]),
            (11, &[9, 10]),
            (12, &[7, 9]),
            (13, &[11]),
            (14, &[6, 8]),
        ];
        let users = wiring
            .iter()
            .map(|(id, refs)| UserConfig {
                id: *id,
                references: refs.to_vec(),
                seed: 100 + id,
                learning_rate: default_learning_rate(),
                batch_size: default_batch_size(),
                epochs: default_epochs(),
            })
            .collect();
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::Linear,
            users,
            unlearning: UnlearnConfig {
                starts: vec![5, 7],
                forget_labels: vec![2],
                paradigm,
                alpha: default_alpha(),
                epsilon: 1e-9,
                ascent_learning_rate: default_ascent_lr(),
                ascent_epochs: default_ascent_epochs(),
            },
            committee: CommitteeConfig::default(),
            costs: CostConfig::default(),
            ledger: LedgerSettings::default(),
            output: OutputConfig::default(),
            selection: None,
        }
    }

    /// A genesis-rooted chain of `depth` users, one child each; start at the
    /// head. Used by the desk-scale unlearning effectiveness checks.
    pub fn demo_chain(depth: u64, paradigm: Paradigm) -> Self {
        let users = (1..=depth)
            .map(|id| UserConfig {
                id,
                references: vec![id - 1],
                seed: 200 + id,
                learning_rate: 0.3,
                batch_size: default_batch_size(),
                epochs: 60,
            })
            .collect();
        Self {
            dataset: DatasetConfig::default(),
            model: ModelConfig::Linear,
            users,
            unlearning: UnlearnConfig {
                starts: vec![1],
                forget_labels: vec![2],
                paradigm,
                alpha: default_alpha(),
                epsilon: default_epsilon(),
                ascent_learning_rate: default_ascent_lr(),
                ascent_epochs: default_ascent_epochs(),
            },
            committee: CommitteeConfig::default(),
            costs: CostConfig::default(),
            ledger: LedgerSettings::default(),
            output: OutputConfig::default(),
            selection: None,
        }
    }

    /// Randomized topology for the reconciliation test matrix: `user_count`
    /// users, each referencing a random nonempty subset of its predecessors,
    /// with one or two starting models. Training is kept tiny; these
    /// scenarios exist to exercise counters, not accuracy.
    pub fn synthetic(seed: u64, user_count: u64, paradigm: Paradigm) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(crate::mix_seeds(&[seed, 0x7059]));
        let mut users = Vec::new();
        for id in 1..=user_count {
            let mut references: Vec<u64> = (0..id).filter(|_| rng.gen_bool(0.4)).collect();
            if references.is_empty() {
                references.push(rng.gen_range(0..id));
            }
            users.push(UserConfig {
                id,
                references,
                seed: 1000 + id,
                learning_rate: 0.25,
                batch_size: 16,
                epochs: 2,
            });
        }
        let mut starts = vec![1 + rng.gen_range(0..user_count.min(3))];
        if user_count > 4 && rng.gen_bool(0.5) {
            let second = 1 + rng.gen_range(0..user_count / 2);
            if !starts.contains(&second) {
                starts.push(second);
            }
        }
        starts.sort_unstable();
        Self {
            dataset: DatasetConfig {
                train_per_class: 6,
                test_per_class: 4,
                ..DatasetConfig::default()
            },
            model: ModelConfig::Linear,
            users,
            unlearning: UnlearnConfig {
                starts,
                forget_labels: vec![2],
                paradigm,
                alpha: 1.0,
                epsilon: 1e-12,
                ascent_learning_rate: 0.3,
                ascent_epochs: 2,
            },
            committee: CommitteeConfig {
                seed: seed.wrapping_mul(31).wrapping_add(5),
                ..CommitteeConfig::default()
            },
            costs: CostConfig::default(),
            ledger: LedgerSettings {
                block_size: 1 + (seed % 5) as usize,
                ..LedgerSettings::default()
            },
            output: OutputConfig::default(),
            selection: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_scenarios_validate() {
        Scenario::demo_two_node().validate().unwrap();
        Scenario::demo_inheritance14(Paradigm::Parallel).validate().unwrap();
        Scenario::demo_chain(5, Paradigm::Sequential).validate().unwrap();
        for seed in 0..10 {
            Scenario::synthetic(seed, 8, Paradigm::Parallel).validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip() {
        let scenario = Scenario::demo_inheritance14(Paradigm::Sequential);
        let text = scenario.to_toml_string();
        let back = Scenario::from_toml_str(&text).unwrap();
        assert_eq!(scenario, back);
    }

    #[test]
    fn json_is_accepted() {
        let scenario = Scenario::demo_two_node();
        let text = serde_json::to_string(&scenario).unwrap();
        let back = Scenario::from_json_str(&text).unwrap();
        assert_eq!(scenario, back);
    }

    #[test]
    fn validation_catches_broken_topologies() {
        let mut s = Scenario::demo_two_node();
        s.users[0].references = vec![9];
        assert!(s.validate().is_err());

        let mut s = Scenario::demo_two_node();
        s.unlearning.starts = vec![3];
        assert!(s.validate().is_err());

        let mut s = Scenario::demo_two_node();
        s.unlearning.forget_labels = vec![0, 1, 2];
        assert!(s.validate().is_err());

        let mut s = Scenario::demo_two_node();
        s.committee.committee_size = 99;
        assert!(s.validate().is_err());

        let mut s = Scenario::demo_two_node();
        s.unlearning.alpha = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn inheritance14_reaches_seven_models_from_the_two_starts() {
        // spot-check of the wiring: descendants({5,7}) + starts has size 7
        let scenario = Scenario::demo_inheritance14(Paradigm::Parallel);
        let mut affected: BTreeSet<u64> = BTreeSet::from([5, 7]);
        loop {
            let mut grew = false;
            for user in &scenario.users {
                if affected.contains(&user.id) {
                    continue;
                }
                if user.references.iter().any(|r| affected.contains(r)) {
                    affected.insert(user.id);
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        assert_eq!(affected, BTreeSet::from([5, 7, 9, 10, 11, 12, 13]));
    }

    #[test]
    fn custom_group_parameters_are_validated() {
        let mut s = Scenario::demo_two_node();
        s.ledger.group = GroupPreset::Custom {
            p: "13".into(),
            q: "4".into(),
            g: "3".into(),
        };
        assert!(s.validate().is_err());
    }
}
