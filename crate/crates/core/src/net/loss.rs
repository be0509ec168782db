use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A loss `Psi(output, targets)` that is convex in `output`.
///
/// Everything in the path engine relies only on this convexity, so any
/// implementor can be plugged in next to the two built-in losses.
pub trait ConvexLoss {
    fn check_targets(&self, targets: &DMatrix<f64>) -> Result<()>;

    fn value(&self, output: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64;

    /// Gradient of [`ConvexLoss::value`] with respect to `output`.
    fn gradient(&self, output: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean over samples of the squared Euclidean row error.
    #[default]
    Square,
    /// Mean over samples of softmax cross-entropy against one-hot rows.
    CrossEntropy,
}

fn log_sum_exp(row: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = row.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + row.map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl ConvexLoss for LossKind {
    fn check_targets(&self, targets: &DMatrix<f64>) -> Result<()> {
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("targets contain non-finite entries".into()));
        }
        if let LossKind::CrossEntropy = self {
            for (i, row) in targets.row_iter().enumerate() {
                let ones = row.iter().filter(|v| **v == 1.0).count();
                let zeros = row.iter().filter(|v| **v == 0.0).count();
                if ones != 1 || ones + zeros != row.len() {
                    return Err(Error::NotOneHot { row: i });
                }
            }
        }
        Ok(())
    }

    fn value(&self, output: &DMatrix<f64>, targets: &DMatrix<f64>) -> f64 {
        let n = output.nrows() as f64;
        match self {
            LossKind::Square => (output - targets).norm_squared() / n,
            LossKind::CrossEntropy => {
                let mut total = 0.0;
                for (o, y) in output.row_iter().zip(targets.row_iter()) {
                    total += log_sum_exp(o.iter().copied()) - o.dot(&y);
                }
                total / n
            }
        }
    }

    fn gradient(&self, output: &DMatrix<f64>, targets: &DMatrix<f64>) -> DMatrix<f64> {
        let n = output.nrows() as f64;
        match self {
            LossKind::Square => (output - targets) * (2.0 / n),
            LossKind::CrossEntropy => {
                let mut grad = output.clone();
                for (mut g, y) in grad.row_iter_mut().zip(targets.row_iter()) {
                    let lse = log_sum_exp(g.iter().copied().collect::<Vec<_>>().into_iter());
                    for (gj, yj) in g.iter_mut().zip(y.iter()) {
                        *gj = ((*gj - lse).exp() - yj) / n;
                    }
                }
                grad
            }
        }
    }
}
