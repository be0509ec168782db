// The construction needs an activation that is not a combination of its own
// shifted copies. This searches for such a combination numerically: leaky
// ReLU and a three-piece activation come out clean, and as a sanity check
// the search does recover a combination that was planted on purpose.
//
//     cargo run --example activation_probe

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sublevel::net::assumption::{a2_falsify, fit_shifted_combination, ShiftSearch, ShiftVerdict};
use sublevel::net::Activation;

pub fn run_example() -> sublevel::Result<(ShiftVerdict, ShiftVerdict, f64)> {
    let leaky = Activation::leaky_relu(0.5)?;
    let report = a2_falsify(&leaky, 3, 4, 1);
    println!("leaky relu(0.5): best residual {:.3e} -> {:?}", report.min_residual, report.verdict);

    let three = Activation::piecewise_linear(vec![-1.0, 1.0], vec![0.3, 1.0, 0.5])?;
    let other = a2_falsify(&three, 2, 3, 5);
    println!("three pieces: best residual {:.3e} -> {:?}", other.min_residual, other.verdict);

    let planted = |x: f64| leaky.apply(x - 1.0) - 2.0 * leaky.apply(x + 1.5);
    let fit = fit_shifted_combination(&leaky, planted, 2, 8, ShiftSearch::default(), &mut ChaCha8Rng::seed_from_u64(2));
    println!(
        "planted combination: shifts {:?}, coefficients {:?}, residual {:.1e}",
        fit.shifts, fit.coefficients, fit.residual
    );
    Ok((report.verdict, other.verdict, fit.residual))
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
