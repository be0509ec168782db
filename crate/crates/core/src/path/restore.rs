use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::row_curves::zero_dependent_rows;
use super::{ParamPath, PathConfig, Segment};
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, span_coefficients};
use crate::net::{check_distinct_rows, hidden_layer, DataSet, NetworkSpec, Theta};

/// Greedy maximal set of independent columns, scanning left to right.
pub(crate) fn greedy_independent(f: &DMatrix<f64>, order: &[usize], tol_rel: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for &j in order {
        let mut trial = chosen.clone();
        trial.push(j);
        if numeric_rank(&f.select_columns(&trial), tol_rel).rank == trial.len() {
            chosen = trial;
        }
    }
    chosen
}

/// Output-preserving path after which the first-layer features have rank `N`.
///
/// Dependent neurons first hand their outgoing weights to an independent
/// set of neurons; with their outgoing rows at zero their incoming weights
/// and biases are then redrawn freely, placing each new kink between two
/// projected samples, until the rank is full.
pub fn restore_full_rank<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    data: &DataSet,
    theta: &Theta,
    cfg: &PathConfig,
    rng: &mut R,
) -> Result<(ParamPath, usize)> {
    spec.check_theta(theta)?;
    spec.check_data(data)?;
    let n = data.len();
    let width = spec.widths[1];
    if spec.depth() < 2 {
        return Err(Error::Precondition("rank restoration needs at least one hidden layer".into()));
    }
    if width < n {
        return Err(Error::Precondition(format!("first hidden width {width} is below the sample count {n}")));
    }
    if !check_distinct_rows(data.x(), 0.0) {
        return Err(Error::Precondition("input rows must be distinct".into()));
    }
    let tol = &cfg.tol;
    let act = &spec.activation;
    let x = data.x();
    let f1 = hidden_layer(act, x, &theta.weights[0], &theta.biases[0]);
    let rank = numeric_rank(&f1, tol.rank_tol_rel).rank;
    if rank == n {
        return Ok((ParamPath::constant(spec.clone(), theta.clone()), rank));
    }

    let all: Vec<usize> = (0..width).collect();
    let basis = greedy_independent(&f1, &all, tol.rank_tol_rel);
    let dependent: Vec<usize> = all.iter().copied().filter(|j| !basis.contains(j)).collect();
    let coeffs = span_coefficients(&f1, &basis, &dependent, tol)?;
    let curve = zero_dependent_rows(&f1, &theta.weights[1], &basis, &dependent, &coeffs, tol)?;
    let zeroed = Segment::from_row_curve(theta.clone(), 2, &curve);
    let freed = zeroed.end().clone();

    // Neurons are redrawn one at a time and a draw is kept only when it
    // raises the rank; once the rank is full the rest are unconstrained.
    // Collisions with kinks of the kept neurons are what this avoids.
    let mut best_rank = rank;
    for _ in 0..=cfg.max_retries {
        let mut redrawn = freed.clone();
        let mut gaps: Vec<usize> = Vec::new();
        let mut cols: Vec<DVector<f64>> = basis.iter().map(|&j| f1.column(j).into_owned()).collect();
        for &j in &dependent {
            let mut tries = 0;
            let (w, b) = loop {
                let (w, b) = draw_neuron(x, &mut gaps, rng);
                if cols.len() >= n || tries >= 4 * n {
                    break (w, b);
                }
                tries += 1;
                let col = hidden_layer(
                    act,
                    x,
                    &DMatrix::from_column_slice(w.len(), 1, w.as_slice()),
                    &DVector::from_element(1, b),
                );
                cols.push(col.column(0).into_owned());
                if numeric_rank(&DMatrix::from_columns(&cols), tol.rank_tol_rel).rank == cols.len() {
                    break (w, b);
                }
                cols.pop();
            };
            redrawn.weights[0].set_column(j, &w);
            redrawn.biases[0][j] = b;
        }
        let f1 = hidden_layer(act, x, &redrawn.weights[0], &redrawn.biases[0]);
        let achieved = numeric_rank(&f1, tol.rank_tol_rel).rank;
        best_rank = best_rank.max(achieved);
        if achieved == n {
            let move_in = Segment::linear(freed.clone(), redrawn, true);
            let path = ParamPath::from_nontrivial(spec, vec![zeroed, move_in], theta)?;
            return Ok((path, achieved));
        }
    }
    Err(Error::RankNotRestored { achieved: best_rank, required: n, retries: cfg.max_retries })
}

/// Gaussian incoming weights; the bias puts the kink at a random point of a
/// gap between consecutive projected samples, cycling through the gaps in
/// shuffled order so that neurons drawn together use different gaps.
pub(crate) fn draw_neuron<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    gaps: &mut Vec<usize>,
    rng: &mut R,
) -> (DVector<f64>, f64) {
    let scale = x.column_iter().map(|c| c.norm() / (c.len() as f64).sqrt()).fold(0.0, f64::max).max(1e-12);
    let w = DVector::from_fn(x.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal) / scale);
    let mut proj: Vec<f64> = (x * &w).iter().copied().collect();
    proj.sort_by(f64::total_cmp);
    proj.dedup();
    if proj.len() < 2 {
        return (w, -proj[0] + rng.sample::<f64, _>(StandardNormal));
    }
    if gaps.is_empty() {
        *gaps = (0..proj.len() - 1).collect();
        gaps.shuffle(rng);
    }
    let g = gaps.pop().expect("refilled above").min(proj.len() - 2);
    let kink = proj[g] + rng.random_range(0.2..0.8) * (proj[g + 1] - proj[g]);
    (w, -kink)
}
