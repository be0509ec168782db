use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Rows must be rectangular. An empty list gives a `0 x 0` matrix.
pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidData("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// `#[serde(with = "rows")]` for a `DMatrix<f64>` stored as a list of rows.
pub(crate) mod rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        // keep the column count for matrices without rows
        (m.ncols(), super::matrix_to_rows(m)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let (ncols, rows): (usize, Vec<Vec<f64>>) = Deserialize::deserialize(d)?;
        if rows.is_empty() {
            return Ok(DMatrix::zeros(0, ncols));
        }
        let m = super::matrix_from_rows(&rows).map_err(serde::de::Error::custom)?;
        if m.ncols() != ncols {
            return Err(serde::de::Error::custom("column count does not match rows"));
        }
        Ok(m)
    }
}
