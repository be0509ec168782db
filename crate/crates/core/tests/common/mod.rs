//! Independent oracles shared by the integration tests: plain loops, no
//! library calls beyond matrix storage.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sublevel::net::{DataSet, LossKind, NetworkSpec, Theta};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = DMatrix::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a[(i, k)] * b[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

pub fn frob(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Leaky ReLU with the given negative slope.
pub fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

/// Loop evaluation of the network output for a leaky-ReLU spec.
pub fn forward(slope: f64, theta: &Theta, x: &DMatrix<f64>) -> DMatrix<f64> {
    let depth = theta.weights.len();
    let mut f = x.clone();
    for l in 0..depth - 1 {
        let mut z = matmul(&f, &theta.weights[l]);
        for i in 0..z.nrows() {
            for j in 0..z.ncols() {
                z[(i, j)] = leaky(z[(i, j)] + theta.biases[l][j], slope);
            }
        }
        f = z;
    }
    matmul(&f, &theta.weights[depth - 1])
}

pub fn loss(kind: LossKind, out: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = out.nrows() as f64;
    match kind {
        LossKind::Square => out.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n,
        LossKind::CrossEntropy => {
            let mut total = 0.0;
            for i in 0..out.nrows() {
                let m = (0..out.ncols()).map(|j| out[(i, j)]).fold(f64::NEG_INFINITY, f64::max);
                let lse = m + (0..out.ncols()).map(|j| (out[(i, j)] - m).exp()).sum::<f64>().ln();
                for j in 0..out.ncols() {
                    total -= y[(i, j)] * (out[(i, j)] - lse);
                }
            }
            total / n
        }
    }
}

pub fn oracle_loss(spec: &NetworkSpec, theta: &Theta, data: &DataSet) -> f64 {
    loss(spec.loss, &forward(0.5, theta, data.x()), data.y())
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn elimination_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let (p, v) =
            (rank..rows).map(|r| (r, a[(r, c)].abs())).fold((rank, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if v <= tol * scale {
            continue;
        }
        a.swap_rows(rank, p);
        for r in rank + 1..rows {
            let factor = a[(r, c)] / a[(rank, c)];
            for k in c..cols {
                a[(r, k)] -= factor * a[(rank, k)];
            }
        }
        rank += 1;
    }
    rank
}
