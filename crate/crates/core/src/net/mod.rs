//! Networks, parameters, activations and losses.
//!
//! Features follow the row-sample convention: `F_0 = X` is `N x n_0`,
//! `F_l = sigma(F_{l-1} W_l + 1 b_l^T)` for hidden layers and the output
//! layer is linear without bias, `F_L = F_{L-1} W_L`.

mod activation;
pub mod assumption;
mod grad;
mod loss;

pub use activation::{Activation, ActivationKind};
pub use grad::gradient;
pub use loss::{ConvexLoss, LossKind};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix_serde::{matrix_from_rows, matrix_to_rows};

/// Static architecture: layer widths `(n_0, ..., n_L)`, activation and loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub loss: LossKind,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, loss: LossKind) -> Result<Self> {
        let spec = NetworkSpec { widths, activation, loss };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config("a network needs at least an input and an output width".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config(format!("all widths must be positive, got {:?}", self.widths)));
        }
        Ok(())
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        self.widths[self.depth()]
    }

    /// True when `n_2 > n_3 > ... > n_L`.
    pub fn has_pyramidal_tail(&self) -> bool {
        self.widths.len() < 3 || self.widths[2..].windows(2).all(|w| w[0] > w[1])
    }

    pub fn check_theta(&self, theta: &Theta) -> Result<()> {
        let depth = self.depth();
        if theta.weights.len() != depth || theta.biases.len() + 1 != depth {
            return Err(Error::DimensionMismatch {
                layer: 0,
                detail: format!(
                    "expected {} weight matrices and {} bias vectors, got {} and {}",
                    depth,
                    depth - 1,
                    theta.weights.len(),
                    theta.biases.len()
                ),
            });
        }
        for (l, w) in theta.weights.iter().enumerate() {
            let shape = (self.widths[l], self.widths[l + 1]);
            if w.shape() != shape {
                return Err(Error::DimensionMismatch {
                    layer: l + 1,
                    detail: format!("weight is {:?}, expected {:?}", w.shape(), shape),
                });
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::DimensionMismatch { layer: l + 1, detail: "weight has non-finite entries".into() });
            }
        }
        for (l, b) in theta.biases.iter().enumerate() {
            if b.len() != self.widths[l + 1] {
                return Err(Error::DimensionMismatch {
                    layer: l + 1,
                    detail: format!("bias has length {}, expected {}", b.len(), self.widths[l + 1]),
                });
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::DimensionMismatch { layer: l + 1, detail: "bias has non-finite entries".into() });
            }
        }
        Ok(())
    }

    pub fn check_data(&self, data: &DataSet) -> Result<()> {
        if data.x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                layer: 0,
                detail: format!("inputs have {} columns, network expects {}", data.x.ncols(), self.input_dim()),
            });
        }
        if data.y.ncols() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                layer: self.depth(),
                detail: format!("targets have {} columns, network outputs {}", data.y.ncols(), self.output_dim()),
            });
        }
        self.loss.check_targets(&data.y)
    }
}

/// A point in parameter space: `W_1..W_L` and `b_1..b_{L-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThetaRepr", into = "ThetaRepr")]
pub struct Theta {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ThetaRepr {
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl From<Theta> for ThetaRepr {
    fn from(t: Theta) -> Self {
        ThetaRepr {
            weights: t.weights.iter().map(matrix_to_rows).collect(),
            biases: t.biases.iter().map(|b| b.iter().copied().collect()).collect(),
        }
    }
}

impl TryFrom<ThetaRepr> for Theta {
    type Error = Error;

    fn try_from(r: ThetaRepr) -> Result<Self> {
        let weights = r.weights.iter().map(|w| matrix_from_rows(w)).collect::<Result<Vec<_>>>()?;
        let biases = r.biases.into_iter().map(DVector::from_vec).collect();
        Ok(Theta { weights, biases })
    }
}

impl Theta {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let depth = spec.depth();
        Theta {
            weights: (0..depth).map(|l| DMatrix::zeros(spec.widths[l], spec.widths[l + 1])).collect(),
            biases: (0..depth - 1).map(|l| DVector::zeros(spec.widths[l + 1])).collect(),
        }
    }

    /// Gaussian initialisation with variance `2 / fan_in`, biases at `N(0, 0.1^2)`.
    pub fn random<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut theta = Theta::zeros(spec);
        for (l, w) in theta.weights.iter_mut().enumerate() {
            let scale = (2.0 / spec.widths[l] as f64).sqrt();
            w.iter_mut().for_each(|v| *v = scale * rng.sample::<f64, _>(StandardNormal));
        }
        for b in theta.biases.iter_mut() {
            b.iter_mut().for_each(|v| *v = 0.1 * rng.sample::<f64, _>(StandardNormal));
        }
        theta
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// `(1 - t) a + t b`, reproducing `a` at `t = 0` and `b` at `t = 1` bit for bit.
    pub fn lerp(a: &Theta, b: &Theta, t: f64) -> Theta {
        Theta {
            weights: a.weights.iter().zip(&b.weights).map(|(x, y)| lerp_mat(x, y, t)).collect(),
            biases: a.biases.iter().zip(&b.biases).map(|(x, y)| x * (1.0 - t) + y * t).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = self.weights.iter().map(|w| w.norm_squared()).sum::<f64>()
            + self.biases.iter().map(|b| b.norm_squared()).sum::<f64>();
        sq.sqrt()
    }

    /// Euclidean distance in the flattened parameter space.
    pub fn distance(&self, other: &Theta) -> f64 {
        let sq: f64 = self.weights.iter().zip(&other.weights).map(|(a, b)| (a - b).norm_squared()).sum::<f64>()
            + self.biases.iter().zip(&other.biases).map(|(a, b)| (a - b).norm_squared()).sum::<f64>();
        sq.sqrt()
    }

    pub fn max_abs_diff(&self, other: &Theta) -> f64 {
        let w = self
            .weights
            .iter()
            .zip(&other.weights)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        let b =
            self.biases.iter().zip(&other.biases).flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()));
        w.chain(b).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// Incoming weights of first-layer neuron `j` stacked with its bias:
    /// column `j` of `[W_1; b_1^T]`.
    pub fn first_layer_column(&self, j: usize) -> DVector<f64> {
        let w = &self.weights[0];
        let mut col = DVector::zeros(w.nrows() + 1);
        col.rows_mut(0, w.nrows()).copy_from(&w.column(j));
        col[w.nrows()] = self.biases[0][j];
        col
    }

    pub fn set_first_layer_column(&mut self, j: usize, col: &DVector<f64>) {
        let rows = self.weights[0].nrows();
        self.weights[0].column_mut(j).copy_from(&col.rows(0, rows));
        self.biases[0][j] = col[rows];
    }

    pub fn same_first_layer(&self, other: &Theta) -> bool {
        self.weights[0] == other.weights[0] && self.biases[0] == other.biases[0]
    }

    /// Exchange hidden neurons `j` and `k` of hidden layer `layer` (1-based):
    /// columns of `W_layer`, entries of `b_layer`, rows of `W_{layer+1}`.
    pub fn swap_neurons(&mut self, layer: usize, j: usize, k: usize) {
        self.weights[layer - 1].swap_columns(j, k);
        self.biases[layer - 1].swap_rows(j, k);
        self.weights[layer].swap_rows(j, k);
    }
}

pub(crate) fn lerp_mat(a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    a.zip_map(b, |x, y| (1.0 - t) * x + t * y)
}

/// Training inputs `X` (`N x n_0`, pairwise distinct rows) and targets `Y` (`N x n_L`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DataRepr", into = "DataRepr")]
pub struct DataSet {
    x: DMatrix<f64>,
    y: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct DataRepr {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl From<DataSet> for DataRepr {
    fn from(d: DataSet) -> Self {
        DataRepr { x: matrix_to_rows(&d.x), y: matrix_to_rows(&d.y) }
    }
}

impl TryFrom<DataRepr> for DataSet {
    type Error = Error;

    fn try_from(r: DataRepr) -> Result<Self> {
        DataSet::new(matrix_from_rows(&r.x)?, matrix_from_rows(&r.y)?)
    }
}

impl DataSet {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::InvalidData("at least one sample is required".into()));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::InvalidData(format!("{} inputs but {} targets", x.nrows(), y.nrows())));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entries".into()));
        }
        if !check_distinct_rows(&x, 0.0) {
            return Err(Error::InvalidData("input rows must be pairwise distinct".into()));
        }
        Ok(DataSet { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }
}

/// True iff every pair of rows differs by more than `tol` in the sup norm.
pub fn check_distinct_rows(x: &DMatrix<f64>, tol: f64) -> bool {
    let n = x.nrows();
    for i in 0..n {
        for k in i + 1..n {
            let gap = x.row(i).iter().zip(x.row(k).iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if gap <= tol {
                return false;
            }
        }
    }
    true
}

/// `sigma(F W + 1 b^T)`.
pub fn hidden_layer(act: &Activation, input: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut h = preactivation(input, w, b);
    h.apply(|v| *v = act.apply(*v));
    h
}

/// `F W + 1 b^T`.
pub fn preactivation(input: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut h = input * w;
    for (j, mut col) in h.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[j]);
    }
    h
}

/// All feature matrices `F_0, ..., F_L`.
pub fn forward(spec: &NetworkSpec, theta: &Theta, x: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
    spec.check_theta(theta)?;
    if x.ncols() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            layer: 0,
            detail: format!("inputs have {} columns, network expects {}", x.ncols(), spec.input_dim()),
        });
    }
    Ok(forward_unchecked(&spec.activation, theta, x))
}

pub(crate) fn forward_unchecked(act: &Activation, theta: &Theta, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let depth = theta.depth();
    let mut feats = Vec::with_capacity(depth + 1);
    feats.push(x.clone());
    for l in 0..depth - 1 {
        let next = hidden_layer(act, &feats[l], &theta.weights[l], &theta.biases[l]);
        feats.push(next);
    }
    let out = &feats[depth - 1] * &theta.weights[depth - 1];
    feats.push(out);
    feats
}

/// Network output `F_L` without keeping intermediate features.
pub(crate) fn output_unchecked(act: &Activation, theta: &Theta, x: &DMatrix<f64>) -> DMatrix<f64> {
    let depth = theta.depth();
    let mut f = x.clone();
    for l in 0..depth - 1 {
        f = hidden_layer(act, &f, &theta.weights[l], &theta.biases[l]);
    }
    f * &theta.weights[depth - 1]
}

pub fn output(spec: &NetworkSpec, theta: &Theta, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spec.check_theta(theta)?;
    if x.ncols() != spec.input_dim() {
        return Err(Error::DimensionMismatch {
            layer: 0,
            detail: format!("inputs have {} columns, network expects {}", x.ncols(), spec.input_dim()),
        });
    }
    Ok(output_unchecked(&spec.activation, theta, x))
}

/// Training objective `Psi(F_L(theta), Y)`.
pub fn loss(spec: &NetworkSpec, theta: &Theta, data: &DataSet) -> Result<f64> {
    spec.check_data(data)?;
    let out = output(spec, theta, data.x())?;
    Ok(spec.loss.value(&out, data.y()))
}

pub(crate) fn loss_unchecked(spec: &NetworkSpec, theta: &Theta, data: &DataSet) -> f64 {
    spec.loss.value(&output_unchecked(&spec.activation, theta, data.x()), data.y())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn leaky_spec(widths: Vec<usize>) -> NetworkSpec {
        NetworkSpec::new(widths, Activation::default(), LossKind::Square).unwrap()
    }

    /// Straightforward triple-loop evaluator, independent of the matrix code.
    fn loop_forward(spec: &NetworkSpec, theta: &Theta, x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let depth = spec.depth();
        let mut rows: Vec<Vec<f64>> = (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect();
        for l in 0..depth {
            let w = &theta.weights[l];
            rows = rows
                .iter()
                .map(|r| {
                    (0..w.ncols())
                        .map(|j| {
                            let mut s = 0.0;
                            for (i, ri) in r.iter().enumerate() {
                                s += ri * w[(i, j)];
                            }
                            if l + 1 < depth {
                                s += theta.biases[l][j];
                                if s < 0.0 {
                                    s *= 0.5;
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect();
        }
        rows
    }

    #[test]
    fn identity_network() {
        let spec = leaky_spec(vec![1, 1, 1]);
        let theta =
            Theta { weights: vec![DMatrix::identity(1, 1), DMatrix::identity(1, 1)], biases: vec![DVector::zeros(1)] };
        let f = forward(&spec, &theta, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(f[2][(0, 0)], 1.0);
        let f = forward(&spec, &theta, &DMatrix::from_element(1, 1, -2.0)).unwrap();
        assert_eq!(f[2][(0, 0)], -1.0);
    }

    #[test]
    fn matches_loop_evaluator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = leaky_spec(vec![2, 4, 3, 1]);
        for _ in 0..20 {
            let theta = Theta::random(&spec, &mut rng);
            let x = DMatrix::from_fn(3, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let feats = forward(&spec, &theta, &x).unwrap();
            assert_eq!(feats.len(), 4);
            for (l, f) in feats.iter().enumerate() {
                assert_eq!(f.shape(), (3, spec.widths[l]));
            }
            let oracle = loop_forward(&spec, &theta, &x);
            for i in 0..3 {
                assert!((feats[3][(i, 0)] - oracle[i][0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = leaky_spec(vec![3, 6, 4, 2]);
        let theta = Theta::random(&spec, &mut rng);
        let x = DMatrix::from_fn(5, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = forward(&spec, &theta, &x).unwrap();
        let b = forward(&spec, &theta, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_errors_name_the_layer() {
        let spec = leaky_spec(vec![2, 3, 1]);
        let mut theta = Theta::zeros(&spec);
        theta.weights[1] = DMatrix::zeros(2, 1);
        match forward(&spec, &theta, &DMatrix::zeros(1, 2)) {
            Err(Error::DimensionMismatch { layer, .. }) => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
        let theta = Theta::zeros(&spec);
        assert!(matches!(
            forward(&spec, &theta, &DMatrix::zeros(1, 3)),
            Err(Error::DimensionMismatch { layer: 0, .. })
        ));
    }

    #[test]
    fn loss_matches_hand_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = leaky_spec(vec![2, 4, 2]);
        let theta = Theta::random(&spec, &mut rng);
        let x = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let data = DataSet::new(x.clone(), y.clone()).unwrap();
        let out = loop_forward(&spec, &theta, &x);
        let mut total = 0.0;
        for i in 0..4 {
            for j in 0..2 {
                total += (out[i][j] - y[(i, j)]).powi(2);
            }
        }
        assert!((loss(&spec, &theta, &data).unwrap() - total / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_rejects_soft_targets() {
        let spec = NetworkSpec::new(vec![1, 2, 2], Activation::default(), LossKind::CrossEntropy).unwrap();
        let data = DataSet::new(
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[0.3, 0.7, 1.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(loss(&spec, &Theta::zeros(&spec), &data), Err(Error::NotOneHot { row: 0 })));
    }

    #[test]
    fn distinct_rows() {
        assert!(check_distinct_rows(&DMatrix::from_row_slice(2, 1, &[0.0, 1.0]), 1e-9));
        assert!(!check_distinct_rows(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]), 1e-9));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(16, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut min_gap = f64::INFINITY;
        for i in 0..16 {
            for k in i + 1..16 {
                min_gap = min_gap.min((x.row(i) - x.row(k)).amax());
            }
        }
        assert!(min_gap > 1e-9);
        assert!(check_distinct_rows(&x, 1e-9));
        assert!(DataSet::new(DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn theta_json_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = leaky_spec(vec![2, 3, 2, 1]);
        let theta = Theta::random(&spec, &mut rng);
        let text = serde_json::to_string(&theta).unwrap();
        let back: Theta = serde_json::from_str(&text).unwrap();
        assert_eq!(theta, back);
    }

    #[test]
    fn pyramidal_tail() {
        assert!(leaky_spec(vec![2, 5, 3, 2]).has_pyramidal_tail());
        assert!(leaky_spec(vec![2, 5, 1]).has_pyramidal_tail());
        assert!(!leaky_spec(vec![2, 5, 2, 2]).has_pyramidal_tail());
    }
}
