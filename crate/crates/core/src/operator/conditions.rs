//! The constant-functions condition, its projection variants, and
//! decompositions of the identity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::BlockOperator;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, row_major_list};

/// Tolerance of the constant-functions condition.
pub const CONSTANT_TOL: f64 = 1e-12;
/// Tolerance of exact linear identities (projections, decompositions).
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub pass: bool,
    pub deviation: f64,
    pub threshold: f64,
}

/// `max_j ‖Σ_i a_{j,i} − I‖_∞ < 1e−12`.
pub fn constant_condition_check(a: &BlockOperator) -> Result<ConditionCheck> {
    if !a.is_square_blocked() {
        return Err(Error::usage(
            "constant condition needs square blocks of one size; use the projection check",
        ));
    }
    let n = a.source.dims[0];
    let mut dev: f64 = 0.0;
    for row in &a.blocks {
        let mut sum = DMatrix::<f64>::zeros(n, n);
        for b in row {
            sum += b;
        }
        dev = dev.max(max_abs(&(sum - DMatrix::identity(n, n))));
    }
    Ok(ConditionCheck {
        pass: dev < CONSTANT_TOL,
        deviation: dev,
        threshold: CONSTANT_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionSide {
    /// `P_i : Rⁿ → R^{m_i}` on source indices; `A(i ↦ P_i v) = v`.
    Source,
    /// `Q_j : R^m → R^{n_j}` on target indices; `A(i ↦ v) = (j ↦ Q_j v)`.
    Target,
}

/// One coisometry per index of the chosen side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionFamily {
    pub side: ProjectionSide,
    #[serde(with = "row_major_list")]
    pub matrices: Vec<DMatrix<f64>>,
}

impl ProjectionFamily {
    pub fn new(side: ProjectionSide, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let p = ProjectionFamily { side, matrices };
        p.validate()?;
        Ok(p)
    }

    /// Each matrix has orthonormal rows: `M Mᵀ = I`.
    pub fn validate(&self) -> Result<()> {
        if self.matrices.is_empty() {
            return Err(Error::usage("projection family is empty"));
        }
        let cols = self.matrices[0].ncols();
        for (k, m) in self.matrices.iter().enumerate() {
            if m.ncols() != cols {
                return Err(Error::usage("projections must share their domain dimension"));
            }
            if m.nrows() > m.ncols() {
                return Err(Error::usage(format!("projection {k} maps into a larger space")));
            }
            let defect = max_abs(&(m * m.transpose() - DMatrix::identity(m.nrows(), m.nrows())));
            if defect > 1e-12 {
                return Err(Error::usage(format!(
                    "projection {k} does not have orthonormal rows (defect {defect:e})"
                )));
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> usize {
        self.matrices[0].ncols()
    }
}

/// Checks the projection form of the constant-functions condition on the
/// basis of `R^{ambient}`.
pub fn projection_condition_check(a: &BlockOperator, proj: &ProjectionFamily) -> Result<ConditionCheck> {
    proj.validate()?;
    let d = proj.ambient_dim();
    let mut dev: f64 = 0.0;
    match proj.side {
        ProjectionSide::Target => {
            if proj.matrices.len() != a.target.size() {
                return Err(Error::usage("target projections must match the target indices"));
            }
            if a.source.dims.iter().any(|&m| m != d) {
                return Err(Error::usage("source dimensions must equal the projection domain"));
            }
            for (j, q) in proj.matrices.iter().enumerate() {
                if q.nrows() != a.target.dims[j] {
                    return Err(Error::usage(format!("projection {j} has the wrong range dimension")));
                }
            }
            for k in 0..d {
                let mut v = vec![0.0; d];
                v[k] = 1.0;
                let x: Vec<f64> = (0..a.source.size()).flat_map(|_| v.clone()).collect();
                let y = a.split_target(&a.apply_flat(&x));
                for (j, q) in proj.matrices.iter().enumerate() {
                    for r in 0..q.nrows() {
                        dev = dev.max((y[j][r] - q[(r, k)]).abs());
                    }
                }
            }
        }
        ProjectionSide::Source => {
            if proj.matrices.len() != a.source.size() {
                return Err(Error::usage("source projections must match the source indices"));
            }
            if a.target.dims.iter().any(|&n| n != d) {
                return Err(Error::usage("target dimensions must equal the projection domain"));
            }
            for (i, p) in proj.matrices.iter().enumerate() {
                if p.nrows() != a.source.dims[i] {
                    return Err(Error::usage(format!("projection {i} has the wrong range dimension")));
                }
            }
            for k in 0..d {
                let x: Vec<f64> = proj
                    .matrices
                    .iter()
                    .flat_map(|p| p.column(k).iter().copied().collect::<Vec<_>>())
                    .collect();
                let y = a.split_target(&a.apply_flat(&x));
                for yj in &y {
                    for (r, v) in yj.iter().enumerate() {
                        let e = if r == k { 1.0 } else { 0.0 };
                        dev = dev.max((v - e).abs());
                    }
                }
            }
        }
    }
    Ok(ConditionCheck {
        pass: dev < IDENTITY_TOL,
        deviation: dev,
        threshold: IDENTITY_TOL,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub pass: bool,
    /// `‖Σ c_i u_i u_iᵀ − I‖_∞`.
    pub deviation: f64,
    /// `Σ c_i`, which must equal the dimension.
    pub trace: f64,
    pub trace_pass: bool,
}

/// `Σ c_i u_i ⊗ u_i = Id` together with the trace identity `Σ c_i = d`.
pub fn identity_decomposition_check(u: &[Vec<f64>], c: &[f64]) -> Result<DecompositionCheck> {
    if u.is_empty() || u.len() != c.len() {
        return Err(Error::usage("need as many weights as vectors, at least one"));
    }
    let d = u[0].len();
    if d == 0 || u.iter().any(|v| v.len() != d) {
        return Err(Error::usage("frame vectors must share a positive dimension"));
    }
    for (k, v) in u.iter().enumerate() {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::usage(format!("frame vector {k} has length {norm}, expected 1")));
        }
    }
    if c.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::usage("frame weights must be positive"));
    }
    let mut sum = DMatrix::<f64>::zeros(d, d);
    for (v, w) in u.iter().zip(c) {
        for r in 0..d {
            for s in 0..d {
                sum[(r, s)] += w * v[r] * v[s];
            }
        }
    }
    let deviation = max_abs(&(sum - DMatrix::identity(d, d)));
    let trace: f64 = c.iter().sum();
    let trace_pass = (trace - d as f64).abs() < IDENTITY_TOL;
    Ok(DecompositionCheck {
        pass: deviation < IDENTITY_TOL && trace_pass,
        deviation,
        trace,
        trace_pass,
    })
}
