// A network whose first-layer neurons all point the same way has
// rank-deficient features. restore_full_rank moves it, without changing the
// network output, to a point where the features have rank N.
//
//     cargo run --example restore_rank

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::config::generate_data;
use sublevel::linalg::numeric_rank;
use sublevel::net::{hidden_layer, output, Activation, LossKind, NetworkSpec, Theta};
use sublevel::path::{restore_full_rank, PathConfig};

pub fn run_example() -> sublevel::Result<(usize, usize, f64)> {
    let n = 6;
    let spec = NetworkSpec::new(vec![2, n + 1, 1], Activation::leaky_relu(0.5)?, LossKind::Square)?;
    let data = generate_data(&spec, n, 4)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut theta = Theta::random(&spec, &mut rng);
    let col = theta.first_layer_column(0);
    for j in 1..=n {
        theta.set_first_layer_column(j, &(&col * (1.0 + j as f64)));
    }
    let cfg = PathConfig::default();
    let features = |t: &Theta| hidden_layer(&spec.activation, data.x(), &t.weights[0], &t.biases[0]);
    let before = numeric_rank(&features(&theta), cfg.tol.rank_tol_rel).rank;

    let (path, after) = restore_full_rank(&spec, &data, &theta, &cfg, &mut rng)?;
    let base = output(&spec, &theta, data.x())?;
    let mut drift: f64 = 0.0;
    for seg in path.segments() {
        for i in 0..=50 {
            let out = output(&spec, &seg.eval(i as f64 / 50.0), data.x())?;
            drift = drift.max((out - &base).norm());
        }
    }
    println!("feature rank {before} -> {after} (N = {n}) over {} segments", path.len());
    for seg in path.segments() {
        println!("  {:<20} touches {:?}", seg.kind().name(), seg.touched_blocks());
    }
    println!("largest output change along the path: {drift:.2e}");
    Ok((before, after, drift))
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
