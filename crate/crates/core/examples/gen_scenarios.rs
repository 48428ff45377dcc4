//! Regenerates the checked-in scenario files from the built-in builders.
//!
//! Run from anywhere in the workspace:
//! `cargo run -p fedforget-core --example gen_scenarios`

use fedforget_core::cost::Paradigm;
use fedforget_core::scenario::Scenario;
use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(&dir)?;
    let entries = [
        ("two_node.toml", Scenario::demo_two_node()),
        (
            "inheritance14_parallel.toml",
            Scenario::demo_inheritance14(Paradigm::Parallel),
        ),
        (
            "inheritance14_sequential.toml",
            Scenario::demo_inheritance14(Paradigm::Sequential),
        ),
        (
            "chain5_sequential.toml",
            Scenario::demo_chain(5, Paradigm::Sequential),
        ),
        (
            "chain5_parallel.toml",
            Scenario::demo_chain(5, Paradigm::Parallel),
        ),
    ];
    for (name, scenario) in entries {
        let path = dir.join(name);
        std::fs::write(&path, scenario.to_toml_string())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
