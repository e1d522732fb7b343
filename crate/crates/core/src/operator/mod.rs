//! Finite block operators `A = (a_{j,i})` between weighted index sets, their
//! weighted norm, and the structural conditions they must satisfy.

mod conditions;
mod families;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::row_major_grid;

pub use conditions::{
    constant_condition_check, identity_decomposition_check, projection_condition_check, ConditionCheck,
    DecompositionCheck, ProjectionFamily, ProjectionSide,
};
pub use families::{
    adding_squares_defect, bl_operator, bl_projections, exotic_operator, holder_operator, mercedes_frame,
    more_more_squares_defect, pl_operator, pl_rigidity_excess, pl_rigidity_search, propm_gen_operator,
    propm_operator, reverse_bl_operator, reverse_bl_projections, ExoticOperator, RigidityReport,
    NORM_TOL,
};

/// Finitely many points with positive weights and a vector dimension each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedIndexSet {
    pub weights: Vec<f64>,
    pub dims: Vec<usize>,
}

impl WeightedIndexSet {
    pub fn new(weights: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let s = WeightedIndexSet { weights, dims };
        s.validate()?;
        Ok(s)
    }

    /// Every index carries the same dimension.
    pub fn uniform(weights: Vec<f64>, dim: usize) -> Result<Self> {
        let dims = vec![dim; weights.len()];
        Self::new(weights, dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::usage("an index set needs at least one point"));
        }
        if self.weights.len() != self.dims.len() {
            return Err(Error::usage("index set weights and dims differ in length"));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::usage("index weights must be positive and finite"));
        }
        if self.dims.contains(&0) {
            return Err(Error::usage("index dimensions must be positive"));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i · dim_i`.
    pub fn dimension_mass(&self) -> f64 {
        self.weights.iter().zip(&self.dims).map(|(w, d)| w * *d as f64).sum()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.dims.len());
        let mut acc = 0;
        for d in &self.dims {
            off.push(acc);
            acc += d;
        }
        off
    }

    /// Weighted inner product `Σ w_i ⟨x_i, y_i⟩` of flattened families.
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, off) in self.offsets().into_iter().enumerate() {
            for k in 0..self.dims[i] {
                s += self.weights[i] * x[off + k] * y[off + k];
            }
        }
        s
    }
}

/// `(Ax)_j = Σ_i a_{j,i} x_i` with `a_{j,i}` of shape `dim_j × dim_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockOperator {
    pub source: WeightedIndexSet,
    pub target: WeightedIndexSet,
    /// `blocks[j][i]`, target index first.
    #[serde(with = "row_major_grid")]
    pub blocks: Vec<Vec<DMatrix<f64>>>,
}

impl BlockOperator {
    pub fn new(source: WeightedIndexSet, target: WeightedIndexSet, blocks: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        let a = BlockOperator { source, target, blocks };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.target.validate()?;
        if self.blocks.len() != self.target.size() {
            return Err(Error::usage(format!(
                "operator has {} block rows but {} target indices",
                self.blocks.len(),
                self.target.size()
            )));
        }
        for (j, row) in self.blocks.iter().enumerate() {
            if row.len() != self.source.size() {
                return Err(Error::usage(format!(
                    "block row {j} has {} blocks but there are {} source indices",
                    row.len(),
                    self.source.size()
                )));
            }
            for (i, b) in row.iter().enumerate() {
                if b.nrows() != self.target.dims[j] || b.ncols() != self.source.dims[i] {
                    return Err(Error::usage(format!(
                        "block ({j},{i}) is {}x{}, expected {}x{}",
                        b.nrows(),
                        b.ncols(),
                        self.target.dims[j],
                        self.source.dims[i]
                    )));
                }
                if b.iter().any(|v| !v.is_finite()) {
                    return Err(Error::usage(format!("block ({j},{i}) has non-finite entries")));
                }
            }
        }
        Ok(())
    }

    /// Apply to a family of vectors, one per source index.
    pub fn apply(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.source.size() {
            return Err(Error::usage(format!(
                "input family has {} members, operator expects {}",
                x.len(),
                self.source.size()
            )));
        }
        for (i, xi) in x.iter().enumerate() {
            if xi.len() != self.source.dims[i] {
                return Err(Error::usage(format!(
                    "input {i} has dimension {}, expected {}",
                    xi.len(),
                    self.source.dims[i]
                )));
            }
        }
        let flat: Vec<f64> = x.iter().flatten().copied().collect();
        let y = self.apply_flat(&flat);
        Ok(self.split_target(&y))
    }

    /// Apply to a concatenated source vector.
    pub fn apply_flat(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.target.total_dim()];
        self.apply_flat_into(x, &mut y);
        y
    }

    pub(crate) fn apply_flat_into(&self, x: &[f64], y: &mut [f64]) {
        let so = self.source.offsets();
        let to = self.target.offsets();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (j, row) in self.blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                for r in 0..b.nrows() {
                    let mut acc = 0.0;
                    for c in 0..b.ncols() {
                        acc += b[(r, c)] * x[so[i] + c];
                    }
                    y[to[j] + r] += acc;
                }
            }
        }
    }

    pub(crate) fn split_source(&self, x: &[f64]) -> Vec<Vec<f64>> {
        split(&self.source, x)
    }

    pub(crate) fn split_target(&self, y: &[f64]) -> Vec<Vec<f64>> {
        split(&self.target, y)
    }

    /// The full `Σdim_j × Σdim_i` matrix.
    pub fn assembled(&self) -> DMatrix<f64> {
        let so = self.source.offsets();
        let to = self.target.offsets();
        let mut m = DMatrix::zeros(self.target.total_dim(), self.source.total_dim());
        for (j, row) in self.blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                m.view_mut((to[j], so[i]), (b.nrows(), b.ncols())).copy_from(b);
            }
        }
        m
    }

    /// `D₂^{1/2} Ā D₁^{-1/2}`, whose spectral norm is the weighted norm.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        let mut m = self.assembled();
        let so = self.source.offsets();
        let to = self.target.offsets();
        for (j, &w) in self.target.weights.iter().enumerate() {
            for r in 0..self.target.dims[j] {
                m.row_mut(to[j] + r).scale_mut(w.sqrt());
            }
        }
        for (i, &w) in self.source.weights.iter().enumerate() {
            for c in 0..self.source.dims[i] {
                m.column_mut(so[i] + c).scale_mut(1.0 / w.sqrt());
            }
        }
        m
    }

    /// Singular values of the weighted matrix, largest first.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.weighted_matrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// `sup_x ‖Ax‖_ν / ‖x‖_μ` by dense SVD.
    pub fn weighted_norm(&self) -> f64 {
        self.singular_values().first().copied().unwrap_or(0.0)
    }

    /// Adjoint for the weighted inner products: `⟨Ax, y⟩_ν = ⟨x, A*y⟩_μ`.
    pub fn adjoint(&self) -> BlockOperator {
        let blocks = (0..self.source.size())
            .map(|i| {
                (0..self.target.size())
                    .map(|j| self.blocks[j][i].transpose() * (self.target.weights[j] / self.source.weights[i]))
                    .collect()
            })
            .collect();
        BlockOperator {
            source: self.target.clone(),
            target: self.source.clone(),
            blocks,
        }
    }

    /// Independent norm estimate: power iteration on `A*A` through `apply`
    /// and `adjoint`, from `starts` random inputs; returns the best ratio.
    pub fn power_norm(&self, starts: usize, iterations: usize, seed: u64) -> f64 {
        let adj = self.adjoint();
        let n = self.source.total_dim();
        let mut best: f64 = 0.0;
        for s in 0..starts {
            let mut rng = crate::rng::stream(seed, s as u64);
            let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            for _ in 0..iterations {
                let y = self.apply_flat(&x);
                let z = adj.apply_flat(&y);
                let nz = self.source.inner(&z, &z).sqrt();
                if nz == 0.0 {
                    break;
                }
                x = z.iter().map(|v| v / nz).collect();
            }
            let nx = self.source.inner(&x, &x).sqrt();
            if nx > 0.0 {
                let y = self.apply_flat(&x);
                best = best.max(self.target.inner(&y, &y).sqrt() / nx);
            }
        }
        best
    }

    /// Sampled `sup ‖Ax‖_ν` over random unit inputs (a lower bound).
    pub fn sampled_norm(&self, samples: usize, seed: u64) -> f64 {
        let n = self.source.total_dim();
        let mut rng = crate::rng::stream(seed, u64::MAX);
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let nx = self.source.inner(&x, &x).sqrt();
            let y = self.apply_flat(&x);
            best = best.max(self.target.inner(&y, &y).sqrt() / nx);
        }
        best
    }

    pub fn is_square_blocked(&self) -> bool {
        let d = self.source.dims[0];
        self.source.dims.iter().chain(&self.target.dims).all(|&k| k == d)
    }
}

fn split(set: &WeightedIndexSet, v: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(set.size());
    let mut off = 0;
    for &d in &set.dims {
        out.push(v[off..off + d].to_vec());
        off += d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn apply_examples() {
        let pl = pl_operator(0.5, 1).unwrap();
        assert_eq!(pl.apply(&[vec![2.0], vec![4.0]]).unwrap(), vec![vec![3.0]]);
        let pm = propm_operator(1).unwrap();
        let y = pm.apply(&[vec![3.0], vec![0.0]]).unwrap();
        assert!((y[0][0] - 2.0).abs() < 1e-15 && (y[1][0] - 1.0).abs() < 1e-15);
        let (u, c) = mercedes_frame();
        let bl = bl_operator(&u, &c).unwrap();
        let y = bl.apply(&[vec![1.0, 0.0]]).unwrap();
        for (a, b) in y.iter().zip([1.0, -0.5, -0.5]) {
            assert!((a[0] - b).abs() < 1e-15);
        }
        assert!(matches!(pl.apply(&[vec![1.0]]), Err(Error::Usage(_))));
    }

    #[test]
    fn norm_examples() {
        let pl = pl_operator(0.3, 1).unwrap();
        assert!((pl.weighted_norm() - 1.0).abs() < 1e-12);
        let pm = propm_operator(1).unwrap();
        let s = pm.singular_values();
        assert!((s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0 / 3.0).abs() < 1e-12);
        let zero = BlockOperator::new(
            WeightedIndexSet::uniform(vec![1.0, 2.0], 2).unwrap(),
            WeightedIndexSet::uniform(vec![1.0], 2).unwrap(),
            vec![vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 2)]],
        )
        .unwrap();
        assert_eq!(zero.weighted_norm(), 0.0);
    }

    #[test]
    fn bad_block_shape_rejected() {
        let r = BlockOperator::new(
            WeightedIndexSet::uniform(vec![1.0], 2).unwrap(),
            WeightedIndexSet::uniform(vec![1.0], 2).unwrap(),
            vec![vec![DMatrix::zeros(2, 3)]],
        );
        assert!(matches!(r, Err(Error::Usage(_))));
    }

    #[test]
    fn power_route_agrees_with_svd() {
        let ops = vec![
            pl_operator(0.3, 2).unwrap(),
            propm_operator(2).unwrap(),
            propm_gen_operator(0.2, 0.8, 0.5, 1).unwrap(),
            exotic_operator(0.9, 0.5).operator,
            bl_operator(&mercedes_frame().0, &mercedes_frame().1).unwrap(),
        ];
        for a in ops {
            let svd = a.weighted_norm();
            let pw = a.power_norm(1000, 30, 5);
            assert!((svd - pw).abs() < 1e-6, "{svd} vs {pw}");
            assert!(a.sampled_norm(1000, 5) <= svd + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn apply_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let op = propm_gen_operator(0.3, 0.6, 0.4, 2).unwrap();
            let mut rng = crate::rng::stream(seed, 0);
            let x: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = op.apply_flat(&comb);
            let ax = op.apply_flat(&x);
            let ay = op.apply_flat(&y);
            for k in 0..lhs.len() {
                prop_assert!((lhs[k] - (a * ax[k] + b * ay[k])).abs() < 1e-12);
            }
        }

        #[test]
        fn bl_pair_is_adjoint(seed in 0u64..1000) {
            let (u, c) = mercedes_frame();
            let bl = bl_operator(&u, &c).unwrap();
            let rev = reverse_bl_operator(&u, &c).unwrap();
            let mut rng = crate::rng::stream(seed, 1);
            let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            let t: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let lhs = bl.target.inner(&bl.apply_flat(&x), &t);
            let rhs = bl.source.inner(&x, &rev.apply_flat(&t));
            prop_assert!((lhs - rhs).abs() < 1e-10);
            let adj = bl.adjoint();
            let d = adj.apply_flat(&t);
            let r = rev.apply_flat(&t);
            prop_assert!((d[0] - r[0]).abs() < 1e-12 && (d[1] - r[1]).abs() < 1e-12);
        }
    }
}
