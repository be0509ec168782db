//! Sampling verifier for parameter paths.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ParamPath, Segment};
use crate::linalg::Tolerances;
use crate::net::{output_unchecked, ConvexLoss, DataSet, NetworkSpec, Theta};

/// Endpoint mismatches above this are failures, whatever the tolerances.
pub const ENDPOINT_TOL: f64 = 1e-9;
/// Halvings applied to the largest sample step when looking for jumps.
const REFINEMENTS: usize = 40;
/// Share of the largest step that may survive the halvings. A continuous
/// curve leaves about `2^-REFINEMENTS` times its local speed-up, a jump
/// leaves the jump. Steering curves can move a thousand times faster than
/// average in short stretches, hence the many halvings.
const JUMP_SHARE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub index: usize,
    pub kind: String,
    pub max_loss: f64,
    /// Largest relative output drift, only for output-preserving segments.
    pub invariance: Option<f64>,
    /// Share of the largest sample step left after repeated halving.
    pub continuity_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub max_loss: f64,
    pub bound: f64,
    pub verify_tol: f64,
    pub n_samples: usize,
    /// Distances of the path's start and end from the requested endpoints.
    pub endpoint_residuals: [f64; 2],
    /// Largest distance between a segment end and the next segment start.
    pub chain_gap: f64,
    /// Max output drift per output-preserving segment, in path order.
    pub per_segment_invariance: Vec<f64>,
    pub segments: Vec<SegmentReport>,
    pub verdict: Verdict,
    pub failures: Vec<String>,
}

/// One sampled point of a path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub segment_index: usize,
    pub lambda: f64,
    pub loss: f64,
    pub param_l2_norm: f64,
    /// `||F_L(lambda) - F_L(0)||_F / max(1, ||F_L(0)||_F)` within the segment.
    pub output_drift: f64,
}

fn relative_drift(out: &DMatrix<f64>, base: &DMatrix<f64>) -> f64 {
    (out - base).norm() / base.norm().max(1.0)
}

fn lambdas(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 }).collect()
}

/// Bisect the largest sample step, always keeping the longer half, and
/// return what is left of it relative to the original step.
fn continuity_ratio(seg: &Segment, grid: &[f64], points: &[Theta]) -> f64 {
    let (i, step) = points.windows(2).map(|w| w[0].distance(&w[1])).enumerate().fold((0, 0.0), |acc, (i, d)| {
        if d > acc.1 {
            (i, d)
        } else {
            acc
        }
    });
    if step <= 1e-12 * points[i].norm().max(1.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (grid[i], grid[i + 1]);
    let (mut a, mut b) = (points[i].clone(), points[i + 1].clone());
    let mut left = step;
    for _ in 0..REFINEMENTS {
        let m = 0.5 * (lo + hi);
        if !(lo < m && m < hi) {
            break;
        }
        let mid = seg.eval(m);
        let (da, db) = (a.distance(&mid), mid.distance(&b));
        if da >= db {
            (hi, b, left) = (m, mid, da);
        } else {
            (lo, a, left) = (m, mid, db);
        }
    }
    left / step
}

struct Sampled {
    rows: Vec<TraceRow>,
    report: SegmentReport,
}

fn sample_segment(spec: &NetworkSpec, data: &DataSet, index: usize, seg: &Segment, n: usize) -> Sampled {
    let grid = lambdas(n);
    let points: Vec<Theta> = grid.par_iter().map(|&t| seg.eval(t)).collect();
    let outputs: Vec<DMatrix<f64>> =
        points.par_iter().map(|theta| output_unchecked(&spec.activation, theta, data.x())).collect();
    let base = &outputs[0];
    let rows: Vec<TraceRow> = grid
        .iter()
        .zip(&points)
        .zip(&outputs)
        .map(|((&lambda, theta), out)| TraceRow {
            segment_index: index,
            lambda,
            loss: spec.loss.value(out, data.y()),
            param_l2_norm: theta.norm(),
            output_drift: relative_drift(out, base),
        })
        .collect();
    let max_loss = rows.iter().map(|r| r.loss).fold(f64::NEG_INFINITY, f64::max);
    let drift = rows.iter().map(|r| r.output_drift).fold(0.0, f64::max);
    let report = SegmentReport {
        index,
        kind: seg.kind().name().to_string(),
        max_loss,
        invariance: seg.is_output_preserving().then_some(drift),
        continuity_ratio: continuity_ratio(seg, &grid, &points),
    };
    Sampled { rows, report }
}

/// Sample every segment at `n_samples` uniform points (endpoints included)
/// and check the sublevel bound, the requested endpoints, chaining, output
/// invariance of the output-preserving segments and continuity.
pub fn verify_path(
    spec: &NetworkSpec,
    data: &DataSet,
    path: &ParamPath,
    endpoints: (&Theta, &Theta),
    alpha: f64,
    n_samples: usize,
    tol: &Tolerances,
) -> PathReport {
    verify_path_with_trace(spec, data, path, endpoints, alpha, n_samples, tol).0
}

/// [`verify_path`] that also returns every sampled point.
pub fn verify_path_with_trace(
    spec: &NetworkSpec,
    data: &DataSet,
    path: &ParamPath,
    endpoints: (&Theta, &Theta),
    alpha: f64,
    n_samples: usize,
    tol: &Tolerances,
) -> (PathReport, Vec<TraceRow>) {
    let n = n_samples.max(2);
    let mut failures = Vec::new();
    for (i, seg) in path.segments().iter().enumerate() {
        if spec.check_theta(seg.start()).is_err() || spec.check_theta(seg.end()).is_err() {
            failures.push(format!("segment {i} has parameters of the wrong shape"));
        }
    }
    if !failures.is_empty() || spec.check_data(data).is_err() {
        failures.push("data does not match the network".into());
        let report = PathReport {
            max_loss: f64::NAN,
            bound: alpha,
            verify_tol: tol.verify_tol,
            n_samples: n,
            endpoint_residuals: [f64::NAN; 2],
            chain_gap: f64::NAN,
            per_segment_invariance: Vec::new(),
            segments: Vec::new(),
            verdict: Verdict::Fail,
            failures,
        };
        return (report, Vec::new());
    }

    let sampled: Vec<Sampled> =
        path.segments().iter().enumerate().map(|(i, seg)| sample_segment(spec, data, i, seg, n)).collect();
    let endpoint_residuals = [path.start().distance(endpoints.0), path.end().distance(endpoints.1)];
    let chain_gap = path.segments().windows(2).map(|w| w[0].end().distance(w[1].start())).fold(0.0, f64::max);
    let max_loss = sampled.iter().map(|s| s.report.max_loss).fold(f64::NEG_INFINITY, f64::max);

    if !(max_loss <= alpha + tol.verify_tol) {
        failures.push(format!("max sampled loss {max_loss:.6e} exceeds alpha {alpha:.6e} + {:.1e}", tol.verify_tol));
    }
    for (name, r) in ["start", "end"].iter().zip(endpoint_residuals) {
        if !(r <= ENDPOINT_TOL) {
            failures.push(format!("path {name} is {r:.3e} away from the requested endpoint"));
        }
    }
    if !(chain_gap <= ENDPOINT_TOL) {
        failures.push(format!("segments are {chain_gap:.3e} apart"));
    }
    let mut per_segment_invariance = Vec::new();
    for s in &sampled {
        if let Some(d) = s.report.invariance {
            per_segment_invariance.push(d);
            if !(d <= tol.inv_tol) {
                failures.push(format!("segment {} drifts the output by {d:.3e}", s.report.index));
            }
        }
        if !(s.report.continuity_ratio <= JUMP_SHARE) {
            failures.push(format!("segment {} looks discontinuous", s.report.index));
        }
    }

    let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
    let mut segments = Vec::with_capacity(sampled.len());
    let mut trace = Vec::with_capacity(sampled.len() * n);
    for s in sampled {
        segments.push(s.report);
        trace.extend(s.rows);
    }
    let report = PathReport {
        max_loss,
        bound: alpha,
        verify_tol: tol.verify_tol,
        n_samples: n,
        endpoint_residuals,
        chain_gap,
        per_segment_invariance,
        segments,
        verdict,
        failures,
    };
    (report, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::span_coefficients;
    use crate::net::hidden_layer;
    use crate::net::{loss, Activation, LossKind};
    use crate::path::row_curves::zero_dependent_rows;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (NetworkSpec, DataSet, Theta) {
        let spec = NetworkSpec::new(vec![2, 4, 1], Activation::default(), LossKind::Square).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = Theta::random(&spec, &mut rng);
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.5, -1.0, 2.0]);
        let y = output_unchecked(&spec.activation, &theta, &x);
        (spec, DataSet::new(x, y).unwrap(), theta)
    }

    #[test]
    fn constant_path_at_zero_loss_passes() {
        let (spec, data, theta) = setup(1);
        let path = ParamPath::constant(spec.clone(), theta.clone());
        let report = verify_path(&spec, &data, &path, (&theta, &theta), 0.0, 10, &Tolerances::default());
        assert_eq!(report.max_loss, 0.0);
        assert_eq!(report.verdict, Verdict::Pass);
        assert_eq!(report.per_segment_invariance, vec![0.0]);
    }

    #[test]
    fn wrong_endpoint_fails() {
        let (spec, data, theta) = setup(2);
        let mut other = theta.clone();
        other.weights[1][(0, 0)] += 1e-6;
        let path = ParamPath::constant(spec.clone(), theta.clone());
        let report = verify_path(&spec, &data, &path, (&theta, &other), 1.0, 10, &Tolerances::default());
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.endpoint_residuals[1] > 1e-9);
    }

    #[test]
    fn loss_above_bound_fails() {
        let (spec, data, theta) = setup(3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let other = Theta::random(&spec, &mut rng);
        let path = ParamPath::new(spec.clone(), vec![Segment::linear(theta.clone(), other.clone(), false)]).unwrap();
        let bound = loss(&spec, &other, &data).unwrap() * 0.5;
        let report = verify_path(&spec, &data, &path, (&theta, &other), bound, 20, &Tolerances::default());
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.failures.iter().any(|f| f.contains("exceeds alpha")));
    }

    #[test]
    fn mislabelled_segment_fails_invariance() {
        let (spec, data, theta) = setup(4);
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let other = Theta::random(&spec, &mut rng);
        let path = ParamPath::new(spec.clone(), vec![Segment::linear(theta.clone(), other.clone(), true)]).unwrap();
        let report = verify_path(&spec, &data, &path, (&theta, &other), 1e6, 20, &Tolerances::default());
        assert_eq!(report.verdict, Verdict::Fail);
        assert!(report.per_segment_invariance[0] > 1e-8);
    }

    #[test]
    fn row_curve_segment_is_invariant() {
        let (spec, data, mut theta) = setup(5);
        // make neuron 3 a copy of neuron 0 so that it is dependent
        let col = theta.first_layer_column(0);
        theta.set_first_layer_column(3, &col);
        let f1 = hidden_layer(&spec.activation, data.x(), &theta.weights[0], &theta.biases[0]);
        let tol = Tolerances::default();
        let coeffs = span_coefficients(&f1, &[0, 1, 2], &[3], &tol).unwrap();
        let curve = zero_dependent_rows(&f1, &theta.weights[1], &[0, 1, 2], &[3], &coeffs, &tol).unwrap();
        let seg = Segment::from_row_curve(theta.clone(), 2, &curve);
        let end = seg.end().clone();
        let path = ParamPath::new(spec.clone(), vec![seg]).unwrap();
        let alpha = loss(&spec, &theta, &data).unwrap();
        let (report, trace) = verify_path_with_trace(&spec, &data, &path, (&theta, &end), alpha, 200, &tol);
        assert_eq!(report.verdict, Verdict::Pass, "{:?}", report.failures);
        assert!(report.per_segment_invariance[0] <= 1e-10);
        assert_eq!(trace.len(), 200);
        assert_eq!(trace[0].lambda, 0.0);
        assert_eq!(trace[199].lambda, 1.0);
    }

    #[test]
    fn stored_end_off_the_curve_is_a_jump() {
        let (spec, data, mut theta) = setup(6);
        let col = theta.first_layer_column(0);
        theta.set_first_layer_column(3, &col);
        let f1 = hidden_layer(&spec.activation, data.x(), &theta.weights[0], &theta.biases[0]);
        let tol = Tolerances::default();
        let coeffs = span_coefficients(&f1, &[0, 1, 2], &[3], &tol).unwrap();
        let curve = zero_dependent_rows(&f1, &theta.weights[1], &[0, 1, 2], &[3], &coeffs, &tol).unwrap();
        let mut seg = Segment::from_row_curve(theta.clone(), 2, &curve);
        // the evaluator returns the stored end at 1 but follows the curve up to it
        seg.end.weights[1][(0, 0)] += 0.5;
        let end = seg.end().clone();
        let path = ParamPath::new(spec.clone(), vec![seg]).unwrap();
        let report = verify_path(&spec, &data, &path, (&theta, &end), 1e6, 50, &tol);
        assert!(report.segments[0].continuity_ratio > 0.5, "{}", report.segments[0].continuity_ratio);
        assert!(report.failures.iter().any(|f| f.contains("discontinuous")));
    }

    #[test]
    fn smooth_segments_leave_a_small_share() {
        let (spec, data, theta) = setup(7);
        let other = Theta::random(&spec, &mut ChaCha8Rng::seed_from_u64(70));
        let path = ParamPath::new(spec.clone(), vec![Segment::linear(theta.clone(), other.clone(), false)]).unwrap();
        let report = verify_path(&spec, &data, &path, (&theta, &other), 1e6, 3, &Tolerances::default());
        let share = report.segments[0].continuity_ratio;
        assert!(share < 1e-9, "{share}");
    }
}
