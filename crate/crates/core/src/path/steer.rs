//! Output steering through a pyramidal tail.
//!
//! With the first layer fixed and its features `D = F_1` of full row rank,
//! the pre-activation `D W_2 + 1 b_2^T` can be set to anything. If every
//! upper weight `W_3..W_L` has full column rank, every feature matrix above
//! layer 2 is reachable as well: going down from the output, the missing
//! component of a target is added through the pseudo-inverse of the next
//! weight, and the activation is inverted in closed form. The curve below
//! interpolates the upper weights and the output linearly and solves for
//! `W_2`, so the loss along it is bounded by the endpoint maximum (the loss
//! is convex in the output).

use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{pinv, singular_values};
use crate::matrix_serde::rows;
use crate::net::{forward_unchecked, lerp_mat, Activation, Theta};

const PINV_TOL: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteerCurve {
    activation: Activation,
    /// Shared first-layer features `F_1`, `N x n_1`, full row rank.
    #[serde(with = "rows")]
    features: DMatrix<f64>,
    #[serde(skip)]
    cache: OnceLock<Cache>,
}

#[derive(Clone, Debug)]
struct Cache {
    features_pinv: DMatrix<f64>,
    out_start: DMatrix<f64>,
    out_end: DMatrix<f64>,
    /// Hidden features `F_2..F_{L-1}` at both ends.
    hidden_start: Vec<DMatrix<f64>>,
    hidden_end: Vec<DMatrix<f64>>,
    res_start: DMatrix<f64>,
    res_end: DMatrix<f64>,
}

impl SteerCurve {
    pub fn new(activation: Activation, features: DMatrix<f64>) -> Self {
        SteerCurve { activation, features, cache: OnceLock::new() }
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    fn cache(&self, start: &Theta, end: &Theta) -> &Cache {
        self.cache.get_or_init(|| {
            let x_free = |theta: &Theta| {
                // forward from F_1 onwards: treat F_1 as the input of the tail
                let tail = Theta { weights: theta.weights[1..].to_vec(), biases: theta.biases[1..].to_vec() };
                forward_unchecked(&self.activation, &tail, &self.features)
            };
            let fs = x_free(start);
            let fe = x_free(end);
            let depth = start.depth();
            let mut cache = Cache {
                features_pinv: pinv(&self.features, PINV_TOL),
                out_start: fs[depth - 1].clone(),
                out_end: fe[depth - 1].clone(),
                hidden_start: fs[1..depth - 1].to_vec(),
                hidden_end: fe[1..depth - 1].to_vec(),
                res_start: DMatrix::zeros(0, 0),
                res_end: DMatrix::zeros(0, 0),
            };
            cache.res_start = self.raw(start, end, 0.0, &cache).1;
            cache.res_end = self.raw(start, end, 1.0, &cache).1;
            cache
        })
    }

    /// Parameters with interpolated upper blocks, plus the residual
    /// `R_2 - D base(s)` that `W_2` still has to absorb.
    fn raw(&self, start: &Theta, end: &Theta, s: f64, cache: &Cache) -> (Theta, DMatrix<f64>) {
        let depth = start.depth();
        let act = &self.activation;
        let mut theta = start.clone();
        for l in 2..depth {
            theta.weights[l] = lerp_mat(&start.weights[l], &end.weights[l], s);
        }
        for l in 1..depth - 1 {
            theta.biases[l] = start.biases[l].zip_map(&end.biases[l], |x, y| (1.0 - s) * x + s * y);
        }
        // hidden feature F_l (1-based l in 2..L-1) lives at index l - 2
        let reference: Vec<DMatrix<f64>> =
            (0..depth - 2).map(|i| lerp_mat(&cache.hidden_start[i], &cache.hidden_end[i], s)).collect();
        let out = lerp_mat(&cache.out_start, &cache.out_end, s);
        let pre2 = pull_down(act, &theta, &reference, out);
        let base = lerp_mat(&start.weights[1], &end.weights[1], s);
        let residual = pre2 - &self.features * &base;
        theta.weights[1] = base;
        (theta, residual)
    }

    /// `template` with `W_2` replaced so that its output on the stored
    /// features is `out`, using the template's own hidden features as the
    /// reference for the downward pass.
    pub(crate) fn realize(&self, template: &Theta, out: DMatrix<f64>) -> Theta {
        let depth = template.depth();
        let tail = Theta { weights: template.weights[1..].to_vec(), biases: template.biases[1..].to_vec() };
        let fs = forward_unchecked(&self.activation, &tail, &self.features);
        let pre2 = pull_down(&self.activation, template, &fs[1..depth - 1], out);
        let mut theta = template.clone();
        theta.weights[1] = pinv(&self.features, PINV_TOL) * pre2;
        theta
    }

    pub(crate) fn eval(&self, start: &Theta, end: &Theta, s: f64) -> Theta {
        let cache = self.cache(start, end);
        let (mut theta, residual) = self.raw(start, end, s, cache);
        let corrected = residual - &cache.res_start * (1.0 - s) - &cache.res_end * s;
        theta.weights[1] += &cache.features_pinv * corrected;
        theta
    }

    /// Smallest `s_min / s_max` over the upper weights `W_3..W_L` along the
    /// straight line between `start` and `end`.
    pub fn min_upper_conditioning(start: &Theta, end: &Theta, samples: usize) -> f64 {
        let depth = start.depth();
        let mut worst = f64::INFINITY;
        for i in 0..=samples.max(1) {
            let s = i as f64 / samples.max(1) as f64;
            for l in 2..depth {
                let w = lerp_mat(&start.weights[l], &end.weights[l], s);
                let sv = singular_values(&w);
                let ratio = match (sv.first(), sv.last()) {
                    (Some(hi), Some(lo)) if *hi > 0.0 => lo / hi,
                    _ => 0.0,
                };
                worst = worst.min(ratio);
            }
        }
        worst
    }
}

/// Second-layer pre-activation target whose forward pass through the upper
/// blocks of `theta` gives `out`; each feature target stays as close to its
/// reference (`F_2..F_{L-1}`) as the next weight allows.
fn pull_down(act: &Activation, theta: &Theta, reference: &[DMatrix<f64>], out: DMatrix<f64>) -> DMatrix<f64> {
    let depth = theta.depth();
    let top = &reference[depth - 3];
    let w_top = &theta.weights[depth - 1];
    let mut target = top + (out - top * w_top) * pinv(w_top, PINV_TOL);
    for l in (3..depth).rev() {
        let mut pre = target.map(|v| act.inverse(v));
        subtract_bias(&mut pre, &theta.biases[l - 1]);
        let below = &reference[l - 3];
        let w = &theta.weights[l - 1];
        target = below + (pre - below * w) * pinv(w, PINV_TOL);
    }
    let mut pre2 = target.map(|v| act.inverse(v));
    subtract_bias(&mut pre2, &theta.biases[1]);
    pre2
}

fn subtract_bias(pre: &mut DMatrix<f64>, bias: &nalgebra::DVector<f64>) {
    for (j, mut col) in pre.column_iter_mut().enumerate() {
        col.add_scalar_mut(-bias[j]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{hidden_layer, output, LossKind, NetworkSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn setup(widths: Vec<usize>, n: usize, seed: u64) -> (NetworkSpec, DMatrix<f64>, Theta, Theta) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = NetworkSpec::new(widths, Activation::default(), LossKind::Square).unwrap();
        let x = DMatrix::from_fn(n, spec.input_dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = Theta::random(&spec, &mut rng);
        let mut b = Theta::random(&spec, &mut rng);
        b.weights[0] = a.weights[0].clone();
        b.biases[0] = a.biases[0].clone();
        (spec, x, a, b)
    }

    #[test]
    fn output_moves_on_a_straight_line() {
        for (widths, seed) in [(vec![2, 6, 3, 1], 1), (vec![3, 6, 4, 3, 2], 2), (vec![2, 6, 2, 1], 3)] {
            let (spec, x, a, b) = setup(widths, 4, seed);
            let d = hidden_layer(&spec.activation, &x, &a.weights[0], &a.biases[0]);
            assert_eq!(crate::linalg::numeric_rank(&d, 1e-10).rank, 4);
            let curve = SteerCurve::new(spec.activation.clone(), d);
            let out_a = output(&spec, &a, &x).unwrap();
            let out_b = output(&spec, &b, &x).unwrap();
            assert!(SteerCurve::min_upper_conditioning(&a, &b, 32) > 1e-6);
            for i in 0..=20 {
                let s = i as f64 / 20.0;
                let theta = curve.eval(&a, &b, s);
                assert!(theta.same_first_layer(&a));
                let expected = &out_a * (1.0 - s) + &out_b * s;
                let got = output(&spec, &theta, &x).unwrap();
                assert!(
                    (&got - &expected).amax() < 1e-9,
                    "s = {s} err {} got {got} exp {expected}",
                    (&got - &expected).amax()
                );
            }
            assert_eq!(curve.eval(&a, &b, 0.0), a);
            assert_eq!(curve.eval(&a, &b, 1.0), b);
        }
    }
}
