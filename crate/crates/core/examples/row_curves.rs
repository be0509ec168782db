// Two output-preserving moves on a weight matrix W feeding features F:
// folding dependent rows into a basis, and handing one neuron's outgoing
// row to an identical neuron. F c(t) stays equal to F W along both.
//
//     cargo run --example row_curves

use nalgebra::DMatrix;
use sublevel::linalg::{span_coefficients, Tolerances};
use sublevel::path::{transfer_neuron, zero_dependent_rows};

pub fn run_example() -> sublevel::Result<f64> {
    let tol = Tolerances::default();
    // column 2 = column 0 + 2 * column 1
    let f = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.5, 1.0, 2.5]);
    let w = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 0.7, 0.2, -0.4, 0.9]);
    let target = &f * &w;

    let e = span_coefficients(&f, &[0, 1], &[2], &tol)?;
    let fold = zero_dependent_rows(&f, &w, &[0, 1], &[2], &e, &tol)?;
    let mut worst: f64 = 0.0;
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        worst = worst.max((&f * fold.eval(t) - &target).norm());
    }
    let folded = fold.eval(1.0);
    println!("coefficients {:?}; row 2 after folding {:?}", e.as_slice(), folded.row(2).iter().collect::<Vec<_>>());

    // neurons 0 and 2 now see the same feature, so row 0 can move to row 2
    let mut g = f.clone();
    g.set_column(2, &f.column(0).into_owned());
    let moved_w = {
        let mut m = w.clone();
        m.row_mut(2).fill(0.0);
        m
    };
    let target = &g * &moved_w;
    let hand_over = transfer_neuron(&g, &moved_w, 2, 0)?;
    for i in 0..=10 {
        let t = i as f64 / 10.0;
        worst = worst.max((&g * hand_over.eval(t) - &target).norm());
    }
    let moved = hand_over.eval(1.0);
    println!(
        "after transfer, rows {:?}",
        moved.row_iter().map(|r| r.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>()
    );
    println!("largest change of F W along both curves: {worst:.2e}");
    Ok(worst)
}

fn main() -> sublevel::Result<()> {
    run_example().map(|_| ())
}
