// Moves the first layer of one network onto the first layer of another,
// one neuron at a time, keeping the loss constant the whole way.
//
//     cargo run --example align_layers

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::config::generate_data;
use sublevel::net::{loss, Activation, LossKind, NetworkSpec, Theta};
use sublevel::path::{align_first_layer, independent_first_columns, restore_full_rank, PathConfig};

pub fn run_example() -> sublevel::Result<f64> {
    let spec = NetworkSpec::new(vec![3, 5, 2, 1], Activation::leaky_relu(0.5)?, LossKind::Square)?;
    let data = generate_data(&spec, 4, 11)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = PathConfig::default();
    let a = Theta::random(&spec, &mut rng);
    let b = Theta::random(&spec, &mut rng);

    // both ends need full-rank first-layer features
    let (pa, _) = restore_full_rank(&spec, &data, &a, &cfg, &mut rng)?;
    let (pb, _) = restore_full_rank(&spec, &data, &b, &cfg, &mut rng)?;
    let target = pb.end().clone();
    let order = independent_first_columns(&spec, &data, &target, cfg.tol.rank_tol_rel);
    let path = align_first_layer(&spec, &data, pa.end(), &target, &order, &cfg)?;

    let start = loss(&spec, path.start(), &data)?;
    let mut spread: f64 = 0.0;
    for seg in path.segments() {
        for i in 0..=20 {
            spread = spread.max((loss(&spec, &seg.eval(i as f64 / 20.0), &data)? - start).abs());
        }
    }
    let kinds: Vec<&str> = path.segments().iter().map(|s| s.kind().name()).collect();
    println!("processing order {order:?}");
    println!("{} segments: {}", kinds.len(), kinds.join(" "));
    println!("first layer matches the target: {}", path.end().same_first_layer(&target));
    println!("loss {start:.6e}, largest deviation {spread:.2e}");
    Ok(spread)
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
