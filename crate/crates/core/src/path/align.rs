use nalgebra::DMatrix;

use super::restore::greedy_independent;
use super::row_curves::{transfer_neuron, zero_dependent_rows};
use super::{ParamPath, PathConfig, Segment};
use crate::error::{Error, Result};
use crate::linalg::{numeric_rank, span_coefficients, svd};
use crate::net::{hidden_layer, DataSet, NetworkSpec, Theta};

/// Neuron order with a maximal independent set of first-layer feature
/// columns of `theta` first (in index order), then the remaining neurons.
pub fn independent_first_columns(spec: &NetworkSpec, data: &DataSet, theta: &Theta, tol_rel: f64) -> Vec<usize> {
    let f1 = hidden_layer(&spec.activation, data.x(), &theta.weights[0], &theta.biases[0]);
    let all: Vec<usize> = (0..f1.ncols()).collect();
    let mut order = greedy_independent(&f1, &all, tol_rel);
    let rest: Vec<usize> = all.into_iter().filter(|j| !order.contains(j)).collect();
    order.extend(rest);
    order
}

/// Position `p >= k` whose neuron carries the most weight in the null space
/// of `f1`, i.e. the neuron that is most cleanly a combination of all the
/// others. Taking the first dependent one in order instead can produce
/// huge, badly conditioned coefficients.
fn best_dependent_position(f1: &DMatrix<f64>, order: &[usize], k: usize, tol_rel: f64) -> Option<usize> {
    let (rows, width) = f1.shape();
    let rank = numeric_rank(f1, tol_rel).rank;
    if rank == width {
        return None;
    }
    // pad to square so that the SVD returns a full right basis
    let mut square = DMatrix::zeros(width.max(rows), width);
    square.rows_mut(0, rows).copy_from(f1);
    let svd = svd(&square);
    let v_t = svd.v_t.expect("requested");
    let mut idx: Vec<usize> = (0..width).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let null = &idx[..width - rank];
    let weight = |j: usize| null.iter().map(|&r| v_t[(r, j)].powi(2)).sum::<f64>();
    let mut best: Option<(usize, f64)> = None;
    for (p, &j) in order.iter().enumerate().skip(k) {
        let w = weight(j);
        if w > best.map_or(1e-12, |b| b.1) {
            best = Some((p, w));
        }
    }
    best.map(|b| b.0)
}

fn first_features(spec: &NetworkSpec, data: &DataSet, theta: &Theta) -> DMatrix<f64> {
    hidden_layer(&spec.activation, data.x(), &theta.weights[0], &theta.biases[0])
}

/// Output-preserving path from `theta` to a point whose first layer
/// `(W_1, b_1)` equals that of `target` exactly.
///
/// Neurons are processed in `order`; the first `N` entries of `order` must
/// index linearly independent first-layer features of `target`. For each
/// position `k`, the position `p >= k` whose feature is most cleanly a
/// combination of the other features is freed (outgoing row zeroed), copied
/// onto neuron `order[k]`, handed its outgoing weights, and then neuron
/// `order[k]`, now silent, is moved onto its target. Width must exceed `N`.
pub fn align_first_layer(
    spec: &NetworkSpec,
    data: &DataSet,
    theta: &Theta,
    target: &Theta,
    order: &[usize],
    cfg: &PathConfig,
) -> Result<ParamPath> {
    spec.check_theta(theta)?;
    spec.check_theta(target)?;
    spec.check_data(data)?;
    let n = data.len();
    let width = spec.widths[1];
    if spec.depth() < 2 {
        return Err(Error::Precondition("alignment needs at least one hidden layer".into()));
    }
    if width < n + 1 {
        return Err(Error::Precondition(format!("n_1 must be >= N+1 (n_1 = {width}, N = {n})")));
    }
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..width).collect::<Vec<_>>() {
        return Err(Error::Precondition("order must be a permutation of the first-layer neurons".into()));
    }
    let tol = &cfg.tol;
    let target_f1 = first_features(spec, data, target);
    if numeric_rank(&target_f1.select_columns(&order[..n]), tol.rank_tol_rel).rank != n {
        return Err(Error::Precondition("the first N ordered target features must be independent".into()));
    }

    let mut current = theta.clone();
    let mut segments = Vec::new();
    for k in 0..width {
        let ck = order[k];
        let goal = target.first_layer_column(ck);
        if current.first_layer_column(ck) == goal {
            continue;
        }
        let f1 = first_features(spec, data, &current);
        let position =
            best_dependent_position(&f1, order, k, tol.rank_tol_rel).ok_or(Error::NoDependentColumn { position: k })?;
        let cj = order[position];

        let basis: Vec<usize> = order.iter().copied().filter(|&i| i != cj).collect();
        let coeffs =
            span_coefficients(&f1, &basis, &[cj], tol).map_err(|_| Error::NoDependentColumn { position: k })?;
        let curve = zero_dependent_rows(&f1, &current.weights[1], &basis, &[cj], &coeffs, tol)?;
        let seg = Segment::from_row_curve(current.clone(), 2, &curve);
        current = seg.end().clone();
        segments.push(seg);

        if cj != ck {
            // copy neuron ck onto the silent neuron cj
            let mut dup = current.clone();
            dup.set_first_layer_column(cj, &current.first_layer_column(ck));
            let seg = Segment::linear(current.clone(), dup, true);
            current = seg.end().clone();
            segments.push(seg);

            let f1 = first_features(spec, data, &current);
            let curve = transfer_neuron(&f1, &current.weights[1], cj, ck)?;
            let seg = Segment::from_row_curve(current.clone(), 2, &curve);
            current = seg.end().clone();
            segments.push(seg);
        }

        let mut moved = current.clone();
        moved.set_first_layer_column(ck, &goal);
        let seg = Segment::linear(current.clone(), moved, true);
        current = seg.end().clone();
        segments.push(seg);
    }
    debug_assert!(current.same_first_layer(target));
    ParamPath::from_nontrivial(spec, segments, theta)
}
