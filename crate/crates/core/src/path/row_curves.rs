//! Output-preserving row curves on a weight matrix `W` fed by fixed features `F`.
//!
//! Both curves are affine in `t` and keep `F c(t) = F W` for all `t`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Tolerances;

#[derive(Clone, Debug, PartialEq)]
pub enum RowCurve {
    /// Rows `basis` become `W(basis,:) + t E W(dependent,:)`, rows
    /// `dependent` become `(1 - t) W(dependent,:)`.
    ZeroDependentRows { base: DMatrix<f64>, basis: Vec<usize>, dependent: Vec<usize>, coeffs: DMatrix<f64> },
    /// Row `from` becomes `(1 - t) W(from,:)`, row `to` becomes
    /// `(1 - t) W(to,:) + t W(from,:)`.
    TransferNeuron { base: DMatrix<f64>, from: usize, to: usize },
}

impl RowCurve {
    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        match self {
            RowCurve::ZeroDependentRows { base, basis, dependent, coeffs } => {
                zero_rows_at(base, basis, dependent, coeffs, t)
            }
            RowCurve::TransferNeuron { base, from, to } => transfer_at(base, *from, *to, t),
        }
    }

    pub fn start(&self) -> &DMatrix<f64> {
        match self {
            RowCurve::ZeroDependentRows { base, .. } | RowCurve::TransferNeuron { base, .. } => base,
        }
    }
}

pub(crate) fn zero_rows_at(
    base: &DMatrix<f64>,
    basis: &[usize],
    dependent: &[usize],
    coeffs: &DMatrix<f64>,
    t: f64,
) -> DMatrix<f64> {
    let mut w = base.clone();
    if dependent.is_empty() {
        return w;
    }
    let moved = coeffs * base.select_rows(dependent);
    for (r, &i) in basis.iter().enumerate() {
        for c in 0..w.ncols() {
            w[(i, c)] = base[(i, c)] + t * moved[(r, c)];
        }
    }
    for &i in dependent {
        for c in 0..w.ncols() {
            w[(i, c)] = (1.0 - t) * base[(i, c)];
        }
    }
    w
}

pub(crate) fn transfer_at(base: &DMatrix<f64>, from: usize, to: usize, t: f64) -> DMatrix<f64> {
    let mut w = base.clone();
    for c in 0..w.ncols() {
        w[(from, c)] = (1.0 - t) * base[(from, c)];
        w[(to, c)] = (1.0 - t) * base[(to, c)] + t * base[(from, c)];
    }
    w
}

/// Curve that zeroes the rows of `W` indexed by `dependent`, given
/// `F(:, dependent) = F(:, basis) E` up to `tol.feas_tol * |F|_F`.
///
/// `basis` and `dependent` must be disjoint; rows in neither set stay fixed.
pub fn zero_dependent_rows(
    f: &DMatrix<f64>,
    w: &DMatrix<f64>,
    basis: &[usize],
    dependent: &[usize],
    coeffs: &DMatrix<f64>,
    tol: &Tolerances,
) -> Result<RowCurve> {
    if f.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch {
            layer: 0,
            detail: format!("F has {} columns but W has {} rows", f.ncols(), w.nrows()),
        });
    }
    if coeffs.shape() != (basis.len(), dependent.len()) {
        return Err(Error::DimensionMismatch {
            layer: 0,
            detail: format!("E is {:?}, expected {:?}", coeffs.shape(), (basis.len(), dependent.len())),
        });
    }
    let mut seen = vec![false; f.ncols()];
    for &i in basis.iter().chain(dependent) {
        if i >= f.ncols() || seen[i] {
            return Err(Error::Precondition(format!("bad or repeated column index {i}")));
        }
        seen[i] = true;
    }
    let residual = if dependent.is_empty() {
        0.0
    } else {
        (f.select_columns(dependent) - f.select_columns(basis) * coeffs).norm()
    };
    let allowed = tol.feas_tol * f.norm();
    if residual > allowed {
        return Err(Error::Infeasible { residual, allowed });
    }
    Ok(RowCurve::ZeroDependentRows {
        base: w.clone(),
        basis: basis.to_vec(),
        dependent: dependent.to_vec(),
        coeffs: coeffs.clone(),
    })
}

/// Curve that moves row `k` of `W` onto row `j`, given `W(j,:) = 0` and
/// `F(:, j) = F(:, k)` (both to `1e-12`, relative for the column test).
pub fn transfer_neuron(f: &DMatrix<f64>, w: &DMatrix<f64>, j: usize, k: usize) -> Result<RowCurve> {
    if f.ncols() != w.nrows() {
        return Err(Error::DimensionMismatch {
            layer: 0,
            detail: format!("F has {} columns but W has {} rows", f.ncols(), w.nrows()),
        });
    }
    if j == k || j >= w.nrows() || k >= w.nrows() {
        return Err(Error::Precondition(format!("need distinct neuron indices in range, got {j} and {k}")));
    }
    let row_j = w.row(j).amax();
    if row_j > 1e-12 {
        return Err(Error::Precondition(format!("row {j} of W must be zero, has max entry {row_j:.3e}")));
    }
    let gap = (f.column(j) - f.column(k)).amax();
    if gap > 1e-12 * f.column(k).amax().max(1.0) {
        return Err(Error::Precondition(format!("columns {j} and {k} of F differ by {gap:.3e}")));
    }
    Ok(RowCurve::TransferNeuron { base: w.clone(), from: k, to: j })
}
