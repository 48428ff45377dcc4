//! Command-line driver: train the inheritance DAG from a scenario file, run
//! an unlearning task in either paradigm, query the attack-rate and cost
//! formulas, and verify chain integrity. Exits nonzero on any invariant
//! violation or consensus rejection.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fedforget_core::consensus;
use fedforget_core::cost::{self, BlockPacking, Paradigm, UnitCosts};
use fedforget_core::scenario::Scenario;
use fedforget_core::sim::{self, SimState, UnlearnOutcome};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "fedforget",
    about = "Deterministic simulator of federated unlearning over a redactable dual-chain ledger",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParadigmArg {
    Parallel,
    Sequential,
}

impl From<ParadigmArg> for Paradigm {
    fn from(value: ParadigmArg) -> Self {
        match value {
            ParadigmArg::Parallel => Paradigm::Parallel,
            ParadigmArg::Sequential => Paradigm::Sequential,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Pbft,
    Pow,
}

#[derive(Subcommand)]
enum Command {
    /// Run the training stage only and report the resulting DAG and chain.
    Train(ScenarioArgs),
    /// Run training plus the scenario's unlearning task, writing metrics and
    /// cost reports.
    Unlearn(UnlearnArgs),
    /// Evaluate the closed-form committee attack success rate.
    AttackRate(AttackRateArgs),
    /// Cost-formula queries.
    Cost(CostCmd),
    /// Run the full pipeline and check every chain and counter invariant.
    Verify(ScenarioArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (.toml or .json).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (defaults to the scenario's output.dir, then "out").
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UnlearnArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Override the scenario's paradigm.
    #[arg(long, value_enum)]
    paradigm: Option<ParadigmArg>,
}

#[derive(Args)]
struct AttackRateArgs {
    /// Committee pool size P.
    #[arg(long)]
    pool: u64,
    /// Malicious candidates M in the pool.
    #[arg(long)]
    malicious: u64,
    /// Elected committee size N.
    #[arg(long)]
    committee: u64,
    /// Per-member attack probability.
    #[arg(long)]
    rho: f64,
    /// Fault tolerance f; defaults to floor((N-1)/3).
    #[arg(long)]
    fault_tolerance: Option<u64>,
}

#[derive(Args)]
struct CostCmd {
    #[command(subcommand)]
    command: CostSubcommand,
}

#[derive(Subcommand)]
enum CostSubcommand {
    /// Predict paradigm overhead from the closed-form formulas.
    Predict(CostPredictArgs),
}

#[derive(Args)]
struct CostPredictArgs {
    #[arg(long, value_enum)]
    paradigm: ParadigmArg,
    /// Updated-model count K.
    #[arg(long)]
    updated_models: u64,
    /// Touched-block count L (parallel only).
    #[arg(long, default_value_t = 1)]
    touched_blocks: u64,
    /// Average reference count (sequential only).
    #[arg(long, default_value_t = 0.0)]
    avg_refs: f64,
    #[arg(long, value_enum, default_value = "pbft")]
    preset: PresetArg,
    /// Consensus participant count M.
    #[arg(long, default_value_t = 21)]
    committee: u64,
    /// Model parameter count |S|.
    #[arg(long, default_value_t = 15)]
    param_count: u64,
    /// Local dataset size |D|.
    #[arg(long, default_value_t = 120)]
    dataset_size: u64,
    /// Also print the single-block vs per-tx-block packing comparison.
    #[arg(long)]
    packing: bool,
}

fn load_scenario(args: &ScenarioArgs) -> Result<Scenario> {
    Scenario::load(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))
}

fn out_dir(args: &ScenarioArgs, scenario: &Scenario) -> PathBuf {
    args.out
        .clone()
        .or_else(|| scenario.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_pipeline(scenario: &Scenario) -> Result<(SimState, UnlearnOutcome)> {
    let mut state = sim::run_training_stage(scenario)?;
    let outcome = sim::run_unlearning(&mut state)?;
    Ok((state, outcome))
}

fn print_outcome(state: &SimState, outcome: &UnlearnOutcome) {
    println!(
        "paradigm: {}",
        match outcome.paradigm {
            Paradigm::Parallel => "parallel",
            Paradigm::Sequential => "sequential",
        }
    );
    println!(
        "updated models: {} (skipped: {})",
        outcome.propagation.updates.len(),
        outcome.propagation.skipped.len()
    );
    println!(
        "consensus rounds: {} ({} messages, committee of {})",
        outcome.consensus_rounds,
        outcome.consensus_messages,
        outcome.committee.size()
    );
    println!(
        "counters predicted/measured: ch {} / {}, consensus {} / {}, transmissions {} / {}",
        outcome.report.predicted_counts.ch_ops,
        outcome.report.measured_counts.ch_ops,
        outcome.report.predicted_counts.consensus_rounds,
        outcome.report.measured_counts.consensus_rounds,
        outcome.report.predicted_counts.transmissions,
        outcome.report.measured_counts.transmissions,
    );
    println!(
        "chain: {} live blocks, {} archive records, verify: {}",
        state.chain.live().len(),
        state.chain.archive_records().count(),
        state.chain.verify()
    );
    for m in &outcome.metrics {
        println!(
            "model {:>3}: forget {:.3} -> {:.3}, retain {:.3} -> {:.3} (train split){}",
            m.node.0,
            m.baseline_forget_train,
            m.forget_train,
            m.baseline_retain_train,
            m.retain_train,
            if m.skipped { " [skipped]" } else { "" }
        );
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => {
            let scenario = load_scenario(&args)?;
            let state = sim::run_training_stage(&scenario)?;
            let txs: usize = state.chain.live().iter().map(|b| b.txs.len()).sum();
            println!(
                "trained {} models over genesis; {} live blocks / {} txs; chain verify: {}",
                scenario.users.len(),
                state.chain.live().len(),
                txs,
                state.chain.verify()
            );
            let dir = out_dir(&args, &scenario);
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("chain.ndjson"), state.chain.export_ndjson())?;
            std::fs::write(dir.join("dag_edges.txt"), state.dag.export_edge_list())?;
            println!("wrote {}", dir.display());
            if !state.chain.verify() {
                bail!("chain verification failed");
            }
            Ok(())
        }
        Command::Unlearn(args) => {
            let mut scenario = load_scenario(&args.scenario)?;
            if let Some(paradigm) = args.paradigm {
                scenario.unlearning.paradigm = paradigm.into();
            }
            let (state, outcome) = run_pipeline(&scenario)?;
            print_outcome(&state, &outcome);
            let dir = out_dir(&args.scenario, &scenario);
            sim::write_outputs(&state, &outcome, &dir)?;
            println!("wrote {}", dir.display());
            if !outcome.report.counts_match() {
                bail!("measured counters deviate from the cost formulas");
            }
            Ok(())
        }
        Command::AttackRate(args) => {
            let f = args
                .fault_tolerance
                .unwrap_or_else(|| (args.committee.saturating_sub(1)) / 3);
            let rate =
                consensus::attack_rate(args.pool, args.malicious, args.committee, args.rho, f)?;
            println!(
                "P={} M={} N={} rho={} f={}",
                args.pool, args.malicious, args.committee, args.rho, f
            );
            println!("attack success rate: {rate:e}");
            Ok(())
        }
        Command::Cost(cmd) => match cmd.command {
            CostSubcommand::Predict(args) => {
                let costs: UnitCosts = match args.preset {
                    PresetArg::Pbft => {
                        UnitCosts::pbft_preset(args.committee, args.param_count, args.dataset_size)
                    }
                    PresetArg::Pow => {
                        UnitCosts::pow_preset(args.committee, args.param_count, args.dataset_size)
                    }
                };
                let totals = match Paradigm::from(args.paradigm) {
                    Paradigm::Parallel => {
                        cost::parallel_cost(args.updated_models, args.touched_blocks, &costs)?
                    }
                    Paradigm::Sequential => {
                        cost::sequential_cost(args.updated_models, args.avg_refs, &costs)?
                    }
                };
                println!(
                    "cost: ch {} + consensus {} + transmission {} = {}",
                    totals.cost.ch,
                    totals.cost.consensus,
                    totals.cost.transmission,
                    totals.cost.total()
                );
                println!(
                    "energy: ch {} + consensus {} + transmission {} = {}",
                    totals.energy.ch,
                    totals.energy.consensus,
                    totals.energy.transmission,
                    totals.energy.total()
                );
                if args.packing {
                    let single = cost::block_update_cost(
                        args.updated_models,
                        BlockPacking::OneTxPerBlock,
                        &costs,
                    )?;
                    let many = cost::block_update_cost(
                        args.updated_models,
                        BlockPacking::ManyTxPerBlock,
                        &costs,
                    )?;
                    println!("block packing: one-tx-per-block {single}, many-tx-per-block {many}");
                }
                Ok(())
            }
        },
        Command::Verify(args) => {
            let scenario = load_scenario(&args)?;
            let (state, outcome) = run_pipeline(&scenario)?;
            let mut failures = Vec::new();
            if !state.chain.verify() {
                failures.push("chain verification".to_string());
            }
            if !outcome.report.counts_match() {
                failures.push(format!(
                    "counter reconciliation (deltas {:?})",
                    outcome.report.count_deltas
                ));
            }
            for record in state.chain.archive_records() {
                if !state.store.contains(&record.model_uri) {
                    failures.push(format!("archive record {} unresolvable", record.model_uri));
                }
            }
            for m in &outcome.metrics {
                for (name, v) in [
                    ("forget_train", m.forget_train),
                    ("retain_train", m.retain_train),
                    ("forget_test", m.forget_test),
                    ("retain_test", m.retain_test),
                ] {
                    if !(0.0..=1.0).contains(&v) {
                        failures.push(format!("model {} metric {name} out of range", m.node));
                    }
                }
            }
            if failures.is_empty() {
                println!(
                    "ok: chain, archive, counters, and metrics all verify ({} models updated)",
                    outcome.propagation.updates.len()
                );
                Ok(())
            } else {
                for f in &failures {
                    eprintln!("FAIL: {f}");
                }
                bail!("{} invariant check(s) failed", failures.len());
            }
        }
    }
}
