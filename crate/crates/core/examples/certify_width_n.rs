// With exactly N first-layer neurons the global minima can be disconnected.
// Builds a zero-loss instance, swaps two neurons, checks the determinant
// sign flip and measures the barrier along a few candidate paths.
//
//     cargo run --example certify_width_n

use sublevel::cert::{barrier_scan, build_width_n_instance, certify_disconnection, permute_neurons, Strategy};
use sublevel::path::PathConfig;

pub fn run_example() -> sublevel::Result<(bool, f64)> {
    let inst = build_width_n_instance(4, 2, 7)?;
    let swapped = permute_neurons(&inst.theta, 1, 2)?;
    let index: Vec<usize> = (0..4).collect();
    let cfg = PathConfig::default();
    let cert = certify_disconnection(&inst.spec, &inst.data, &inst.theta, &swapped, &index, &cfg.tol)?;
    println!("instance {}", &inst.hash()[..16]);
    println!(
        "losses {:.1e} / {:.1e}, det signs {:+} / {:+}, rank Y = {}: {}",
        cert.loss_theta,
        cert.loss_theta_prime,
        cert.det_sign_theta,
        cert.det_sign_theta_prime,
        cert.y_rank,
        if cert.valid { "disconnected" } else { "no certificate" }
    );
    let scan = barrier_scan(&inst.spec, &inst.data, &inst.theta, &swapped, &Strategy::ALL, 201, &cfg)?;
    for s in &scan.strategies {
        match s.barrier {
            Some(b) => println!("  {:?}: barrier {b:.4e}", s.strategy),
            None => println!("  {:?}: {}", s.strategy, s.note.as_deref().unwrap_or("no candidate")),
        }
    }
    Ok((cert.valid, scan.barrier))
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
