//! Piecewise-linear paths with movable knots, pushed down the loss surface by
//! descent on a soft maximum of the sampled losses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ParamPath, Segment};
use crate::error::Result;
use crate::net::{gradient, loss_unchecked, DataSet, NetworkSpec, Theta};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomotopyConfig {
    /// Interior knots of the polyline.
    pub knots: usize,
    pub iterations: usize,
    /// Loss samples per piece used by the optimiser (endpoints included).
    pub samples_per_piece: usize,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        HomotopyConfig { knots: 8, iterations: 300, samples_per_piece: 5 }
    }
}

/// Straight segments through `points` in order.
pub fn polyline_path(spec: &NetworkSpec, points: &[Theta]) -> Result<ParamPath> {
    let segs = points.windows(2).map(|w| Segment::linear(w[0].clone(), w[1].clone(), false)).collect();
    ParamPath::from_nontrivial(spec, segs, &points[0])
}

fn axpy(acc: &mut Theta, a: f64, x: &Theta) {
    for (w, v) in acc.weights.iter_mut().zip(&x.weights) {
        *w += v * a;
    }
    for (b, v) in acc.biases.iter_mut().zip(&x.biases) {
        *b += v * a;
    }
}

fn samples(pieces: usize, per_piece: usize) -> Vec<(usize, f64)> {
    let m = per_piece.max(2);
    (0..pieces).flat_map(|p| (0..m).map(move |i| (p, i as f64 / (m - 1) as f64))).collect()
}

fn sampled_max(spec: &NetworkSpec, data: &DataSet, points: &[Theta], per_piece: usize) -> f64 {
    samples(points.len() - 1, per_piece)
        .par_iter()
        .map(|&(p, t)| loss_unchecked(spec, &Theta::lerp(&points[p], &points[p + 1], t), data))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Move the interior knots to lower the maximum sampled loss of the polyline
/// `start -> knots -> end`. Stops early once the maximum is at or below
/// `stop_below`. Returns the knots and the final sampled maximum.
#[allow(clippy::too_many_arguments)]
pub fn optimize_polyline(
    spec: &NetworkSpec,
    data: &DataSet,
    start: &Theta,
    end: &Theta,
    knots: Vec<Theta>,
    cfg: &HomotopyConfig,
    freeze_first_layer: bool,
    stop_below: Option<f64>,
) -> Result<(Vec<Theta>, f64)> {
    spec.check_data(data)?;
    let mut points = Vec::with_capacity(knots.len() + 2);
    points.push(start.clone());
    points.extend(knots);
    points.push(end.clone());
    let pieces = points.len() - 1;
    let per_piece = cfg.samples_per_piece;
    let mut current = sampled_max(spec, data, &points, per_piece);
    let mut step = 0.25 * start.distance(end).max(1e-3) / pieces as f64;

    for _ in 0..cfg.iterations {
        if stop_below.is_some_and(|a| current <= a) || points.len() <= 2 || step < 1e-12 {
            break;
        }
        let evals: Vec<(usize, f64, f64, Theta)> = samples(pieces, per_piece)
            .par_iter()
            .map(|&(p, t)| {
                let theta = Theta::lerp(&points[p], &points[p + 1], t);
                let (value, grad) = gradient(spec, &theta, data).expect("shapes checked");
                (p, t, value, grad)
            })
            .collect();
        let hi = evals.iter().map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        let lo = evals.iter().map(|e| e.2).fold(f64::INFINITY, f64::min);
        let temp = (0.05 * (hi - lo)).max(1e-14);
        let weights: Vec<f64> = evals.iter().map(|e| ((e.2 - hi) / temp).exp()).collect();
        let total: f64 = weights.iter().sum();

        let mut dirs: Vec<Theta> = points.iter().map(zeros_like).collect();
        for ((p, t, _, g), w) in evals.iter().zip(&weights) {
            let w = w / total;
            axpy(&mut dirs[*p], w * (1.0 - t), g);
            axpy(&mut dirs[*p + 1], w * t, g);
        }
        let interior = 1..points.len() - 1;
        if freeze_first_layer {
            for d in &mut dirs[interior.clone()] {
                d.weights[0].fill(0.0);
                d.biases[0].fill(0.0);
            }
        }
        let norm = dirs[interior.clone()].iter().map(|d| d.norm().powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        let mut trial = points.clone();
        for i in interior {
            axpy(&mut trial[i], -step / norm, &dirs[i]);
        }
        let candidate = sampled_max(spec, data, &trial, per_piece);
        if candidate < current {
            points = trial;
            current = candidate;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    let knots = points[1..points.len() - 1].to_vec();
    Ok((knots, current))
}

fn zeros_like(t: &Theta) -> Theta {
    Theta { weights: t.weights.iter().map(|w| w * 0.0).collect(), biases: t.biases.iter().map(|b| b * 0.0).collect() }
}

/// Evenly spaced knots on the straight line between `start` and `end`.
pub(crate) fn straight_knots(start: &Theta, end: &Theta, count: usize) -> Vec<Theta> {
    (1..=count).map(|i| Theta::lerp(start, end, i as f64 / (count + 1) as f64)).collect()
}
