// The same pair of global minima that is certified disconnected at width N
// becomes connected once one silent neuron is added to the first layer.
//
//     cargo run --example width_contrast

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::cert::{build_width_n_instance, certify_disconnection, pad_first_layer, permute_neurons};
use sublevel::net::loss;
use sublevel::path::{connect_sublevel, verify_path, PathConfig, Verdict};

pub fn run_example() -> sublevel::Result<(bool, Verdict)> {
    let n = 3;
    let inst = build_width_n_instance(n, 2, 5)?;
    let swapped = permute_neurons(&inst.theta, 1, 3)?;
    let cfg = PathConfig::default();
    let index: Vec<usize> = (0..n).collect();
    let cert = certify_disconnection(&inst.spec, &inst.data, &inst.theta, &swapped, &index, &cfg.tol)?;
    println!("width {n}: certificate valid = {}", cert.valid);

    let (wide, pts) = pad_first_layer(&inst.spec, &[&inst.theta, &swapped], 1, &mut ChaCha8Rng::seed_from_u64(5))?;
    let alpha = 1e-10_f64.max(loss(&wide, &pts[0], &inst.data)?).max(loss(&wide, &pts[1], &inst.data)?);
    let (path, regime) = connect_sublevel(&wide, &inst.data, &pts[0], &pts[1], alpha, &cfg)?;
    let report = verify_path(&wide, &inst.data, &path, (&pts[0], &pts[1]), alpha, 200, &cfg.tol);
    println!(
        "width {}: {} segments ({regime:?}), max loss {:.3e} <= {alpha:.1e}: {:?}",
        wide.widths[1],
        path.len(),
        report.max_loss,
        report.verdict
    );
    Ok((cert.valid, report.verdict))
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
