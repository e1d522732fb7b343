//! Small dense helpers shared by the function catalogue and the operators.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Row-major literal used by the scenario file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixLiteral {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for MatrixLiteral {
    fn from(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixLiteral {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixLiteral {
    pub fn into_matrix(self) -> Result<DMatrix<f64>, String> {
        if self.rows * self.cols != self.data.len() {
            return Err(format!(
                "matrix literal declares {}x{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

/// `#[serde(with = "row_major")]` for a single matrix field.
pub mod row_major {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        MatrixLiteral::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        MatrixLiteral::deserialize(d)?
            .into_matrix()
            .map_err(serde::de::Error::custom)
    }
}

/// `#[serde(with = "row_major_grid")]` for a grid of blocks.
pub mod row_major_grid {
    use super::*;

    pub fn serialize<S: Serializer>(g: &[Vec<DMatrix<f64>>], s: S) -> Result<S::Ok, S::Error> {
        let lit: Vec<Vec<MatrixLiteral>> = g
            .iter()
            .map(|row| row.iter().map(MatrixLiteral::from).collect())
            .collect();
        lit.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<DMatrix<f64>>>, D::Error> {
        let lit = Vec::<Vec<MatrixLiteral>>::deserialize(d)?;
        lit.into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|m| m.into_matrix().map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

/// `#[serde(with = "row_major_list")]` for a list of matrices.
pub mod row_major_list {
    use super::*;

    pub fn serialize<S: Serializer>(g: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
        let lit: Vec<MatrixLiteral> = g.iter().map(MatrixLiteral::from).collect();
        lit.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
        Vec::<MatrixLiteral>::deserialize(d)?
            .into_iter()
            .map(|m| m.into_matrix().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Pairwise summation; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Numerically stable `ln(sum(exp(terms)))`; `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = terms.map(|t| (t - max).exp()).sum();
    max + s.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_is_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let lit = MatrixLiteral::from(&m);
        assert_eq!(lit.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(lit.into_matrix().unwrap(), m);
    }

    #[test]
    fn literal_shape_mismatch_rejected() {
        let lit = MatrixLiteral {
            rows: 2,
            cols: 2,
            data: vec![1.0],
        };
        assert!(lit.into_matrix().is_err());
    }

    #[test]
    fn lse_handles_extremes() {
        let v = [-1000.0, -1000.0];
        let l = log_sum_exp(v.iter().copied());
        assert!((l - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY].iter().copied()), f64::NEG_INFINITY);
    }
}
