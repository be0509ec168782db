// Trains two networks from different seeds and joins them with a path that
// never leaves the sublevel set {loss <= alpha}, alpha being the larger of
// the two final losses. The verifier re-samples the path and the trace is
// written as CSV.
//
//     cargo run --example connect_trained [out.csv]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::config::generate_data;
use sublevel::net::{loss, Activation, LossKind, NetworkSpec, Theta};
use sublevel::path::{connect_sublevel, trace_csv, verify_path_with_trace, PathConfig, PathReport};
use sublevel::train::train;

pub fn run_example() -> sublevel::Result<PathReport> {
    let spec = NetworkSpec::new(vec![2, 6, 3, 2], Activation::leaky_relu(0.5)?, LossKind::CrossEntropy)?;
    let data = generate_data(&spec, 5, 21)?;
    let fit = |seed: u64| -> sublevel::Result<Theta> {
        let init = Theta::random(&spec, &mut ChaCha8Rng::seed_from_u64(seed));
        let run = train(&spec, &data, &init, 1500, 0.05)?;
        println!("seed {seed}: loss {:.4e} -> {:.4e}", run.initial_loss, run.final_loss);
        Ok(run.theta)
    };
    let a = fit(1)?;
    let b = fit(2)?;
    let alpha = loss(&spec, &a, &data)?.max(loss(&spec, &b, &data)?);

    let cfg = PathConfig::default();
    let (path, regime) = connect_sublevel(&spec, &data, &a, &b, alpha, &cfg)?;
    let (report, trace) = verify_path_with_trace(&spec, &data, &path, (&a, &b), alpha, 100, &cfg.tol);
    println!("{} segments, last part via {regime:?}", path.len());
    println!("max sampled loss {:.6e} vs alpha {alpha:.6e}: {:?}", report.max_loss, report.verdict);
    if let Some(file) = std::env::args().nth(1) {
        std::fs::write(&file, trace_csv(&trace))?;
        println!("trace written to {file}");
    }
    Ok(report)
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
