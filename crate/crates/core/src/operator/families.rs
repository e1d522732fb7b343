//! The named operators: Prékopa–Leindler, Hölder, the two-point mixing
//! operators, the exotic rotation example, and (reverse) Brascamp–Lieb maps
//! built from a decomposition of the identity.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::conditions::{identity_decomposition_check, ProjectionFamily, ProjectionSide};
use super::{BlockOperator, WeightedIndexSet};
use crate::error::{Error, Result};

/// Slack of the norm condition `‖A‖ ≤ 1`.
pub const NORM_TOL: f64 = 1e-10;

fn unit_interval(name: &str, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::usage(format!("{name} must lie in [0, 1], got {t}")));
    }
    Ok(())
}

fn open_unit_interval(name: &str, t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::usage(format!("{name} must lie in (0, 1), got {t}")));
    }
    Ok(())
}

fn eye(n: usize, s: f64) -> DMatrix<f64> {
    DMatrix::identity(n, n) * s
}

/// `(x₀, x₁) ↦ (1−t)x₀ + tx₁`, source weights `(1−t, t)`, target weight 1.
pub fn pl_operator(t: f64, n: usize) -> Result<BlockOperator> {
    open_unit_interval("t", t)?;
    BlockOperator::new(
        WeightedIndexSet::uniform(vec![1.0 - t, t], n)?,
        WeightedIndexSet::uniform(vec![1.0], n)?,
        vec![vec![eye(n, 1.0 - t), eye(n, t)]],
    )
}

/// `x ↦ (x, x)`, source weight 1, target weights `(1−t, t)`.
pub fn holder_operator(t: f64, n: usize) -> Result<BlockOperator> {
    open_unit_interval("t", t)?;
    BlockOperator::new(
        WeightedIndexSet::uniform(vec![1.0], n)?,
        WeightedIndexSet::uniform(vec![1.0 - t, t], n)?,
        vec![vec![eye(n, 1.0)], vec![eye(n, 1.0)]],
    )
}

/// Blocks `[[2/3, 1/3], [1/3, 2/3]]` with weights ½ on both sides.
pub fn propm_operator(n: usize) -> Result<BlockOperator> {
    BlockOperator::new(
        WeightedIndexSet::uniform(vec![0.5, 0.5], n)?,
        WeightedIndexSet::uniform(vec![0.5, 0.5], n)?,
        vec![
            vec![eye(n, 2.0 / 3.0), eye(n, 1.0 / 3.0)],
            vec![eye(n, 1.0 / 3.0), eye(n, 2.0 / 3.0)],
        ],
    )
}

/// Blocks `[[(1−s), s], [(1−t), t]]`, target weights `(1−r, r)`, source
/// weights `(1−m, m)` with `m = (1−r)s + rt`.
pub fn propm_gen_operator(s: f64, t: f64, r: f64, n: usize) -> Result<BlockOperator> {
    unit_interval("s", s)?;
    unit_interval("t", t)?;
    open_unit_interval("r", r)?;
    let m = (1.0 - r) * s + r * t;
    open_unit_interval("m = (1−r)s + rt", m)?;
    BlockOperator::new(
        WeightedIndexSet::uniform(vec![1.0 - m, m], n)?,
        WeightedIndexSet::uniform(vec![1.0 - r, r], n)?,
        vec![
            vec![eye(n, 1.0 - s), eye(n, s)],
            vec![eye(n, 1.0 - t), eye(n, t)],
        ],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExoticOperator {
    pub operator: BlockOperator,
    /// `B = bI − εR`, `R` the rotation by a quarter turn.
    pub b_matrix: DMatrix<f64>,
    /// `2BᵀB ⪯ B + Bᵀ`.
    pub valid: bool,
    /// Smallest eigenvalue of `B + Bᵀ − 2BᵀB`.
    pub min_eigenvalue: f64,
}

/// Blocks `[[I−B, B], [B, I−B]]` on `R²` with weights ½ on both sides.
pub fn exotic_operator(b: f64, eps: f64) -> ExoticOperator {
    let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    let bm = eye(2, b) - rot * eps;
    let id = eye(2, 1.0);
    let gap = &bm + bm.transpose() - bm.transpose() * &bm * 2.0;
    let min_eigenvalue = SymmetricEigen::new(gap)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let operator = BlockOperator {
        source: WeightedIndexSet::uniform(vec![0.5, 0.5], 2).expect("valid weights"),
        target: WeightedIndexSet::uniform(vec![0.5, 0.5], 2).expect("valid weights"),
        blocks: vec![
            vec![&id - &bm, bm.clone()],
            vec![bm.clone(), &id - &bm],
        ],
    };
    ExoticOperator {
        operator,
        b_matrix: bm,
        valid: min_eigenvalue >= -NORM_TOL,
        min_eigenvalue,
    }
}

/// Frame vectors at 0°, 120°, 240° with weights ⅔.
pub fn mercedes_frame() -> (Vec<Vec<f64>>, Vec<f64>) {
    let u = (0..3)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
            vec![a.cos(), a.sin()]
        })
        .collect();
    (u, vec![2.0 / 3.0; 3])
}

fn require_decomposition(u: &[Vec<f64>], c: &[f64]) -> Result<()> {
    let chk = identity_decomposition_check(u, c)?;
    if !chk.pass {
        return Err(Error::domain(format!(
            "vectors and weights do not decompose the identity (deviation {:e}, trace {})",
            chk.deviation, chk.trace
        )));
    }
    Ok(())
}

/// `U x = (x·u_1, …, x·u_N)` from one point of dimension `d` to `N` points
/// of dimension 1 with weights `c_j`.
pub fn bl_operator(u: &[Vec<f64>], c: &[f64]) -> Result<BlockOperator> {
    require_decomposition(u, c)?;
    let d = u[0].len();
    BlockOperator::new(
        WeightedIndexSet::uniform(vec![1.0], d)?,
        WeightedIndexSet::uniform(c.to_vec(), 1)?,
        u.iter().map(|v| vec![DMatrix::from_row_slice(1, d, v)]).collect(),
    )
}

/// The weighted adjoint of [`bl_operator`]: `(t_i) ↦ Σ c_i t_i u_i`.
pub fn reverse_bl_operator(u: &[Vec<f64>], c: &[f64]) -> Result<BlockOperator> {
    require_decomposition(u, c)?;
    let d = u[0].len();
    BlockOperator::new(
        WeightedIndexSet::uniform(c.to_vec(), 1)?,
        WeightedIndexSet::uniform(vec![1.0], d)?,
        vec![u
            .iter()
            .zip(c)
            .map(|(v, w)| DMatrix::from_column_slice(d, 1, v) * *w)
            .collect()],
    )
}

/// Target-side projections `Q_j x = x·u_j`.
pub fn bl_projections(u: &[Vec<f64>]) -> Result<ProjectionFamily> {
    ProjectionFamily::new(
        ProjectionSide::Target,
        u.iter().map(|v| DMatrix::from_row_slice(1, v.len(), v)).collect(),
    )
}

/// Source-side projections `P_i v = v·u_i`.
pub fn reverse_bl_projections(u: &[Vec<f64>]) -> Result<ProjectionFamily> {
    ProjectionFamily::new(
        ProjectionSide::Source,
        u.iter().map(|v| DMatrix::from_row_slice(1, v.len(), v)).collect(),
    )
}

/// `|(1−α)x₀+αx₁|² + α(1−α)|x₀−x₁|² − (1−α)|x₀|² − α|x₁|²`.
pub fn adding_squares_defect(alpha: f64, x0: &[f64], x1: &[f64]) -> f64 {
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (a, b) in x0.iter().zip(x1) {
        let mid = (1.0 - alpha) * a + alpha * b;
        lhs += mid * mid + alpha * (1.0 - alpha) * (a - b) * (a - b);
        rhs += (1.0 - alpha) * a * a + alpha * b * b;
    }
    lhs - rhs
}

/// Defect of
/// `(1−r)|(1−s)x₀+sx₁|² + r|(1−t)x₀+tx₁|² + ((1−r)s(1−s)+rt(1−t))|x₀−x₁|²
///  = (1−m)|x₀|² + m|x₁|²`, `m = (1−r)s + rt`.
pub fn more_more_squares_defect(s: f64, t: f64, r: f64, x0: &[f64], x1: &[f64]) -> f64 {
    let m = (1.0 - r) * s + r * t;
    let k = (1.0 - r) * s * (1.0 - s) + r * t * (1.0 - t);
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (a, b) in x0.iter().zip(x1) {
        let p = (1.0 - s) * a + s * b;
        let q = (1.0 - t) * a + t * b;
        lhs += (1.0 - r) * p * p + r * q * q + k * (a - b) * (a - b);
        rhs += (1.0 - m) * a * a + m * b * b;
    }
    lhs - rhs
}

/// Largest excess of `|(I−B)x + By|²` over `(1−α)|x|² + α|y|²` found along
/// `x = u + tαv`, `y = u − t(1−α)v`. With `D = αI − B` the excess is
/// `2t u·Dv + t²(|Dv|² − α(1−α)|v|²)`, so `u = Dv/|Dv|` and small `t > 0`
/// expose any `B ≠ αI`. Never negative.
pub fn pl_rigidity_excess(alpha: f64, b: &DMatrix<f64>, probes: usize, seed: u64) -> f64 {
    let n = b.nrows();
    let d = eye(n, alpha) - b;
    let mut rng = crate::rng::stream(seed, 0);
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            e
        })
        .collect();
    for _ in 0..probes {
        dirs.push((0..n).map(|_| rng.sample(StandardNormal)).collect());
    }
    let mut best: f64 = 0.0;
    for v in &dirs {
        let dv: Vec<f64> = (0..n).map(|r| (0..n).map(|c| d[(r, c)] * v[c]).sum()).collect();
        let ndv = dv.iter().map(|a| a * a).sum::<f64>().sqrt();
        if ndv == 0.0 {
            continue;
        }
        let u: Vec<f64> = dv.iter().map(|a| a / ndv).collect();
        for t in [1e-1, -1e-1, 1e-2, -1e-2, 1e-3, -1e-3] {
            let x: Vec<f64> = (0..n).map(|k| u[k] + t * alpha * v[k]).collect();
            let y: Vec<f64> = (0..n).map(|k| u[k] - t * (1.0 - alpha) * v[k]).collect();
            let mut lhs = 0.0;
            for r in 0..n {
                let mut z = 0.0;
                for c in 0..n {
                    let id = if r == c { 1.0 } else { 0.0 };
                    z += (id - b[(r, c)]) * x[c] + b[(r, c)] * y[c];
                }
                lhs += z * z;
            }
            let rhs: f64 = (0..n)
                .map(|k| (1.0 - alpha) * x[k] * x[k] + alpha * y[k] * y[k])
                .sum();
            best = best.max(lhs - rhs);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub trials: usize,
    /// Smallest per-trial excess; positive means every sample was caught.
    pub min_excess: f64,
    pub max_excess: f64,
    pub all_positive: bool,
    /// Excess for the control `B = αI`.
    pub control_excess: f64,
}

/// Falsification search: random `B` with `‖B − αI‖_F ∈ [0.01, 1]` must all
/// violate the norm condition of the operator `(x, y) ↦ (I−B)x + By`.
pub fn pl_rigidity_search(alpha: f64, n: usize, n_trials: usize, seed: u64) -> Result<RigidityReport> {
    open_unit_interval("alpha", alpha)?;
    if n == 0 {
        return Err(Error::usage("dimension must be positive"));
    }
    let mut rng = crate::rng::stream(seed, 1);
    let mut min_excess = f64::INFINITY;
    let mut max_excess: f64 = 0.0;
    for trial in 0..n_trials {
        let dir = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let size = 0.01 + 0.99 * rng.random::<f64>();
        let b = eye(n, alpha) + dir.scale(size / dir.norm());
        let e = pl_rigidity_excess(alpha, &b, 8, seed.wrapping_add(trial as u64));
        min_excess = min_excess.min(e);
        max_excess = max_excess.max(e);
    }
    if n_trials == 0 {
        min_excess = 0.0;
    }
    Ok(RigidityReport {
        trials: n_trials,
        min_excess,
        max_excess,
        all_positive: n_trials > 0 && min_excess > 0.0,
        control_excess: pl_rigidity_excess(alpha, &eye(n, alpha), 8, seed),
    })
}

#[cfg(test)]
mod tests {
    use super::super::constant_condition_check;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exotic_examples() {
        let e = exotic_operator(1.0 / 3.0, 2f64.sqrt() / 3.0);
        assert!(e.valid);
        let bb = e.b_matrix.transpose() * &e.b_matrix * 2.0;
        let sym = &e.b_matrix + e.b_matrix.transpose();
        assert!(crate::linalg::max_abs(&(bb - &sym)) < 1e-15);
        assert!(crate::linalg::max_abs(&(sym - eye(2, 2.0 / 3.0))) < 1e-15);
        assert!((e.operator.weighted_norm() - 1.0).abs() < 1e-12);
        assert!(constant_condition_check(&e.operator).unwrap().pass);

        let avg = exotic_operator(0.5, 0.0);
        assert!(avg.valid && avg.operator.weighted_norm() <= 1.0 + 1e-12);
        let bad = exotic_operator(0.9, 0.5);
        assert!(!bad.valid && bad.operator.weighted_norm() > 1.0);
    }

    #[test]
    fn exotic_norm_formula() {
        // Along (v, −v) the squared ratio is (1−2b)² + 4ε².
        for &(b, e) in &[(0.2f64, 0.1f64), (0.7, 0.4), (0.5, 0.5)] {
            let want = ((1.0 - 2.0 * b) * (1.0 - 2.0 * b) + 4.0 * e * e).sqrt().max(1.0);
            assert!((exotic_operator(b, e).operator.weighted_norm() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rigidity_examples() {
        let ctrl = pl_rigidity_excess(0.5, &eye(2, 0.5), 8, 1);
        assert_eq!(ctrl, 0.0);
        let mut b = eye(2, 0.5);
        b[(0, 1)] = 0.05;
        b[(1, 0)] = 0.05;
        assert!(pl_rigidity_excess(0.5, &b, 8, 1) > 0.0);
        assert!(pl_rigidity_excess(0.3, &DMatrix::from_element(1, 1, 0.4), 8, 1) > 0.0);
        let r = pl_rigidity_search(0.4, 3, 50, 9).unwrap();
        assert!(r.all_positive);
        assert_eq!(r.control_excess, 0.0);
    }

    #[test]
    fn bl_examples() {
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let bl = bl_operator(&basis, &[1.0, 1.0]).unwrap();
        assert_eq!(bl.apply(&[vec![3.0, -2.0]]).unwrap(), vec![vec![3.0], vec![-2.0]]);
        assert!((bl.weighted_norm() - 1.0).abs() < 1e-12);
        let (u, c) = mercedes_frame();
        let rev = reverse_bl_operator(&u, &c).unwrap();
        let y = rev.apply(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert!(y[0][0].abs() < 1e-15 && y[0][1].abs() < 1e-15);
        assert!((rev.weighted_norm() - 1.0).abs() < 1e-12);
        let bl = bl_operator(&u, &c).unwrap();
        assert!((bl.source.dimension_mass() - 2.0).abs() < 1e-15);
        assert!((bl.target.dimension_mass() - 2.0).abs() < 1e-15);
        assert!(matches!(bl_operator(&u, &[1.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn propm_gen_grid_has_unit_norm() {
        for s in [0.2, 0.5, 0.8] {
            for t in [0.2, 0.5, 0.8] {
                for r in [0.2, 0.5, 0.8] {
                    let a = propm_gen_operator(s, t, r, 1).unwrap();
                    assert!((a.weighted_norm() - 1.0).abs() < 1e-8);
                    assert!(constant_condition_check(&a).unwrap().pass);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn square_identities(
            s in 0.0f64..1.0, t in 0.0f64..1.0, r in 0.0f64..1.0,
            a in prop::collection::vec(-10.0f64..10.0, 2),
            b in prop::collection::vec(-10.0f64..10.0, 2),
        ) {
            let scale = 1.0 + a.iter().chain(&b).map(|v| v * v).sum::<f64>();
            prop_assert!(adding_squares_defect(s, &a, &b).abs() < 1e-12 * scale);
            prop_assert!(more_more_squares_defect(s, t, r, &a, &b).abs() < 1e-12 * scale);
            prop_assert!(more_more_squares_defect(s, t, r, &a[..1], &b[..1]).abs() < 1e-12 * scale);
        }
    }
}
