// The file-driven workflow behind the `sublevel` binary: a TOML config, then
// train, connect and certify, each writing JSON and CSV into a directory.
//
//     cargo run --example run_experiment [out_dir]

use std::path::PathBuf;

use sublevel::config::ExperimentConfig;
use sublevel::experiment::{cmd_certify, cmd_connect, cmd_train};

const CONFIG: &str = r#"
widths = [2, 5, 3, 1]
samples = 4
steps = 800
learning_rate = 0.05
seed = 3
"#;

pub fn run_example(out: PathBuf) -> sublevel::Result<bool> {
    let cfg = ExperimentConfig { out_dir: out.join("connect"), ..ExperimentConfig::from_toml(CONFIG)? };
    let mut passed = true;
    for outcome in [cmd_train(&cfg)?, cmd_connect(&cfg, None, None)?] {
        println!("{}", outcome.summary);
        passed &= outcome.passed;
    }
    let cert = ExperimentConfig { widths: vec![2, 4, 4], out_dir: out.join("certify"), ..cfg };
    let outcome = cmd_certify(&cert)?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(passed && outcome.passed)
}

fn main() -> sublevel::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("experiment_out"));
    run_example(out).map(|_| ())
}
