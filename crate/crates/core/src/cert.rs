//! Two-layer networks of width `N` whose global minima are disconnected.
//!
//! At a global minimum of the square loss with targets of full row rank the
//! first-layer feature matrix must be invertible, so its determinant sign
//! cannot change along a path of global minima. Swapping two neurons flips
//! that sign, which certifies the two points lie in different components.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{det_sign, least_squares, numeric_rank, Tolerances};
use crate::net::{check_distinct_rows, hidden_layer, loss, Activation, DataSet, LossKind, NetworkSpec, Theta};
use crate::path::{
    connect_sublevel, draw_neuron, optimize_polyline, polyline_path, verify_path, HomotopyConfig, ParamPath,
    PathConfig, Verdict,
};

/// Losses at or below this count as the global minimum (zero).
pub const GLOBAL_MIN_TOL: f64 = 1e-10;
const MAX_DRAWS: usize = 64;

/// A generated width-`N` instance together with the seed that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Instance {
    pub spec: NetworkSpec,
    pub data: DataSet,
    pub theta: Theta,
    pub seed: u64,
}

impl Instance {
    /// SHA-256 of the canonical JSON encoding of spec, data and parameters.
    pub fn hash(&self) -> String {
        #[derive(Serialize)]
        struct View<'a> {
            spec: &'a NetworkSpec,
            data: &'a DataSet,
            theta: &'a Theta,
        }
        let text = crate::json::to_string(&View { spec: &self.spec, data: &self.data, theta: &self.theta })
            .expect("instance serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Two-layer square-loss network with `n_1 = n_2 = N` fitting `N` samples
/// exactly: `Y = F_1 W_2` with `F_1` and `W_2` invertible.
pub fn build_width_n_instance(n: usize, n0: usize, seed: u64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::Precondition("N must be at least 2".into()));
    }
    if n0 < 1 {
        return Err(Error::Precondition("input dimension must be at least 1".into()));
    }
    let spec = NetworkSpec::new(vec![n0, n, n], Activation::default(), LossKind::Square)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = Tolerances::default();
    let mut best = 0;

    for _ in 0..MAX_DRAWS {
        // inputs are redrawn too: two samples close together make every
        // feature matrix nearly singular
        let x = DMatrix::from_fn(n, n0, |_, _| rng.sample::<f64, _>(StandardNormal));
        if !check_distinct_rows(&x, 0.0) {
            continue;
        }
        let mut theta = Theta::random(&spec, &mut rng);
        // kinks must fall between samples for the features to reach rank N,
        // which Gaussian biases rarely manage for one-dimensional inputs
        let mut gaps = Vec::new();
        for j in 0..n {
            let (w, b) = draw_neuron(&x, &mut gaps, &mut rng);
            theta.weights[0].set_column(j, &w);
            theta.biases[0][j] = b;
        }
        let f1 = hidden_layer(&spec.activation, &x, &theta.weights[0], &theta.biases[0]);
        if det_sign(&f1, tol.det_tol)? == 0 {
            best = best.max(numeric_rank(&f1, tol.rank_tol_rel).rank);
            continue;
        }
        if det_sign(&theta.weights[1], tol.det_tol)? == 0 {
            continue;
        }
        let y = &f1 * &theta.weights[1];
        // the certificate needs full numeric rank of the targets as well,
        // which two well-signed but poorly conditioned factors can miss
        if numeric_rank(&y, tol.rank_tol_rel).rank < n {
            continue;
        }
        let data = DataSet::new(x, y)?;
        return Ok(Instance { spec, data, theta, seed });
    }
    Err(Error::RankNotRestored { achieved: best, required: n, retries: MAX_DRAWS })
}

/// Exchange first-layer neurons `j < k` (1-based): columns of `W_1`,
/// entries of `b_1` and rows of `W_2`.
pub fn permute_neurons(theta: &Theta, j: usize, k: usize) -> Result<Theta> {
    let width = theta.weights.first().map_or(0, |w| w.ncols());
    if theta.weights.len() < 2 {
        return Err(Error::Precondition("need a hidden layer to permute".into()));
    }
    if !(1 <= j && j < k && k <= width) {
        return Err(Error::Precondition(format!("need 1 <= j < k <= {width}, got j = {j}, k = {k}")));
    }
    let mut out = theta.clone();
    out.swap_neurons(1, j - 1, k - 1);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisconnectionCertificate {
    /// Sample indices (0-based) whose feature rows are compared.
    pub index_set: Vec<usize>,
    pub det_sign_theta: i8,
    pub det_sign_theta_prime: i8,
    pub loss_theta: f64,
    pub loss_theta_prime: f64,
    pub y_rank: usize,
    pub valid: bool,
}

/// Compare determinant signs of the first-layer features restricted to the
/// samples in `index_set` at two global minima.
pub fn certify_disconnection(
    spec: &NetworkSpec,
    data: &DataSet,
    theta: &Theta,
    theta_prime: &Theta,
    index_set: &[usize],
    tol: &Tolerances,
) -> Result<DisconnectionCertificate> {
    spec.check_theta(theta)?;
    spec.check_theta(theta_prime)?;
    spec.check_data(data)?;
    if spec.depth() != 2 || spec.loss != LossKind::Square {
        return Err(Error::Precondition("certificates are defined for two-layer square-loss networks".into()));
    }
    let width = spec.widths[1];
    if index_set.len() != width {
        return Err(Error::Precondition(format!("index set has {} samples, need n_1 = {width}", index_set.len())));
    }
    if index_set.iter().any(|&i| i >= data.len()) {
        return Err(Error::Precondition("index set refers to a missing sample".into()));
    }
    let mut sorted = index_set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != index_set.len() {
        return Err(Error::Precondition("index set has repeated samples".into()));
    }
    let loss_theta = loss(spec, theta, data)?;
    let loss_theta_prime = loss(spec, theta_prime, data)?;
    for (name, value) in [("theta", loss_theta), ("theta_prime", loss_theta_prime)] {
        if !(value <= GLOBAL_MIN_TOL) {
            return Err(Error::Precondition(format!("{name} is not a global minimum (loss {value:.3e})")));
        }
    }
    let sign = |t: &Theta| -> Result<i8> {
        let f1 = hidden_layer(&spec.activation, data.x(), &t.weights[0], &t.biases[0]);
        match det_sign(&f1.select_rows(index_set), tol.det_tol)? {
            0 => Err(Error::DegenerateDeterminant),
            s => Ok(s),
        }
    };
    let det_sign_theta = sign(theta)?;
    let det_sign_theta_prime = sign(theta_prime)?;
    let y_rank = numeric_rank(&data.y().select_rows(index_set), tol.rank_tol_rel).rank;
    let valid = det_sign_theta * det_sign_theta_prime == -1 && y_rank == width;
    Ok(DisconnectionCertificate {
        index_set: index_set.to_vec(),
        det_sign_theta,
        det_sign_theta_prime,
        loss_theta,
        loss_theta_prime,
        y_rank,
        valid,
    })
}

/// Candidate paths tried by [`barrier_scan`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The straight segment.
    Straight,
    /// Two segments through the midpoint with `W_L` refit by least squares.
    MidpointRefit,
    /// Polyline with knots moved by descent on the sampled maximum.
    OptimizedKnots,
    /// The constructive sublevel-set path (needs `n_1 >= N + 1`).
    Constructive,
}

impl Strategy {
    pub const ALL: [Strategy; 4] =
        [Strategy::Straight, Strategy::MidpointRefit, Strategy::OptimizedKnots, Strategy::Constructive];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub strategy: Strategy,
    /// Max sampled loss along the candidate, `None` if no candidate exists.
    pub max_loss: Option<f64>,
    pub barrier: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierScan {
    pub endpoint_loss: f64,
    /// Minimum barrier over the strategies that produced a candidate.
    pub barrier: f64,
    pub strategies: Vec<StrategyResult>,
}

fn sampled_max(spec: &NetworkSpec, data: &DataSet, path: &ParamPath, n_samples: usize) -> f64 {
    let n = n_samples.max(2);
    path.segments()
        .iter()
        .flat_map(|seg| (0..n).map(move |i| seg.eval(i as f64 / (n - 1) as f64)))
        .map(|theta| loss(spec, &theta, data).unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Empirical barrier between two points of equal loss: the smallest excess
/// of the max sampled loss over the endpoint loss among the candidate
/// paths. A positive value is consistent with disconnection, never a proof.
pub fn barrier_scan(
    spec: &NetworkSpec,
    data: &DataSet,
    theta: &Theta,
    theta_prime: &Theta,
    strategies: &[Strategy],
    n_samples: usize,
    cfg: &PathConfig,
) -> Result<BarrierScan> {
    spec.check_theta(theta)?;
    spec.check_theta(theta_prime)?;
    spec.check_data(data)?;
    let endpoint_loss = loss(spec, theta, data)?.max(loss(spec, theta_prime, data)?);
    let results: Vec<StrategyResult> = strategies
        .par_iter()
        .map(|&strategy| {
            let candidate = candidate_path(spec, data, theta, theta_prime, strategy, endpoint_loss, cfg);
            match candidate {
                Ok(path) => {
                    let max_loss = sampled_max(spec, data, &path, n_samples);
                    StrategyResult {
                        strategy,
                        max_loss: Some(max_loss),
                        barrier: Some((max_loss - endpoint_loss).max(0.0)),
                        note: None,
                    }
                }
                Err(e) => StrategyResult { strategy, max_loss: None, barrier: None, note: Some(e.to_string()) },
            }
        })
        .collect();
    let barrier = results.iter().filter_map(|r| r.barrier).fold(f64::INFINITY, f64::min);
    Ok(BarrierScan { endpoint_loss, barrier, strategies: results })
}

fn candidate_path(
    spec: &NetworkSpec,
    data: &DataSet,
    a: &Theta,
    b: &Theta,
    strategy: Strategy,
    endpoint_loss: f64,
    cfg: &PathConfig,
) -> Result<ParamPath> {
    if a == b {
        return Ok(ParamPath::constant(spec.clone(), a.clone()));
    }
    match strategy {
        Strategy::Straight => polyline_path(spec, &[a.clone(), b.clone()]),
        Strategy::MidpointRefit => {
            let mut mid = Theta::lerp(a, b, 0.5);
            let depth = spec.depth();
            let feats = crate::net::forward(spec, &mid, data.x())?;
            mid.weights[depth - 1] = least_squares(&feats[depth - 1], data.y(), cfg.tol.rank_tol_rel);
            polyline_path(spec, &[a.clone(), mid, b.clone()])
        }
        Strategy::OptimizedKnots => {
            let h = HomotopyConfig { knots: cfg.homotopy.knots, ..cfg.homotopy.clone() };
            let knots = (1..=h.knots).map(|i| Theta::lerp(a, b, i as f64 / (h.knots + 1) as f64)).collect();
            let (knots, _) = optimize_polyline(spec, data, a, b, knots, &h, false, Some(endpoint_loss))?;
            let mut points = vec![a.clone()];
            points.extend(knots);
            points.push(b.clone());
            polyline_path(spec, &points)
        }
        Strategy::Constructive => {
            let alpha = endpoint_loss;
            let (path, _) = connect_sublevel(spec, data, a, b, alpha, cfg)?;
            let report = verify_path(spec, data, &path, (a, b), alpha, cfg.n_samples, &cfg.tol);
            if report.verdict != Verdict::Pass {
                return Err(Error::Precondition(format!("constructive path failed: {}", report.failures.join("; "))));
            }
            Ok(path)
        }
    }
}

/// Add `extra` first-layer neurons with incoming weights drawn from `rng`
/// and zero outgoing weights, applied identically to every point so the
/// outputs (hence losses) are unchanged.
pub fn pad_first_layer<R: Rng + ?Sized>(
    spec: &NetworkSpec,
    points: &[&Theta],
    extra: usize,
    rng: &mut R,
) -> Result<(NetworkSpec, Vec<Theta>)> {
    if spec.depth() < 2 {
        return Err(Error::Precondition("need a hidden layer to pad".into()));
    }
    let mut widths = spec.widths.clone();
    let old = widths[1];
    widths[1] += extra;
    let padded = NetworkSpec::new(widths, spec.activation.clone(), spec.loss)?;
    let n0 = spec.input_dim();
    let scale = (2.0 / n0 as f64).sqrt();
    let w_new = DMatrix::from_fn(n0, extra, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
    let b_new = DVector::from_fn(extra, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut out = Vec::with_capacity(points.len());
    for theta in points {
        spec.check_theta(theta)?;
        let mut t = (*theta).clone();
        let mut w1 = t.weights[0].clone().resize_horizontally(old + extra, 0.0);
        w1.columns_mut(old, extra).copy_from(&w_new);
        let mut b1 = t.biases[0].clone().resize_vertically(old + extra, 0.0);
        b1.rows_mut(old, extra).copy_from(&b_new);
        t.weights[0] = w1;
        t.biases[0] = b1;
        t.weights[1] = t.weights[1].clone().resize_vertically(old + extra, 0.0);
        out.push(t);
    }
    Ok((padded, out))
}
