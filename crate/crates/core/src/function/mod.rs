//! Test functions `f: Rⁿ → R ∪ {+∞}` drawn from a closed catalogue, the
//! reference measures they are integrated against, and inf-convolution.
//!
//! Every catalogue member is L-proper (integral of `e^{-f}` is positive) and
//! has an analytic gradient almost everywhere, which the heat-semigroup and
//! drift code rely on.

pub mod measure;
pub mod moreau;
pub(crate) mod piecewise;
pub mod quadrature;
pub(crate) mod rules;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, row_major};

pub use measure::{GaussianMeasure, ReferenceMeasure};
pub use moreau::moreau_envelope;
pub use quadrature::{integrate_exp_neg, ExpIntegral, QuadratureScheme, QuadratureSpec};

/// `½ xᵀQx + bᵀx + c` with `Q` symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Quadratic {
    #[serde(with = "row_major")]
    pub q: DMatrix<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        let qd = Quadratic { q, b, c };
        qd.validate()?;
        Ok(qd)
    }

    /// `½·coef·|x − center|² + offset`.
    pub fn isotropic(coef: f64, center: &[f64], offset: f64) -> Self {
        let n = center.len();
        Quadratic {
            q: DMatrix::identity(n, n) * coef,
            b: center.iter().map(|c| -coef * c).collect(),
            c: 0.5 * coef * center.iter().map(|c| c * c).sum::<f64>() + offset,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.q.nrows();
        if n == 0 || self.q.ncols() != n {
            return Err(Error::usage(format!(
                "quadratic matrix must be square and non-empty, got {}x{}",
                self.q.nrows(),
                self.q.ncols()
            )));
        }
        if self.b.len() != n {
            return Err(Error::usage(format!(
                "quadratic linear term has length {}, expected {n}",
                self.b.len()
            )));
        }
        if self.q.iter().chain(&self.b).any(|v| !v.is_finite()) || !self.c.is_finite() {
            return Err(Error::usage("quadratic coefficients must be finite"));
        }
        let asym = max_abs(&(&self.q - self.q.transpose()));
        if asym > 1e-12 * (1.0 + max_abs(&self.q)) {
            return Err(Error::usage(format!("quadratic matrix is not symmetric (defect {asym:e})")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n = self.b.len();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.q[(i, j)] * x[j];
            }
            quad += x[i] * row;
            lin += self.b[i] * x[i];
        }
        0.5 * quad + lin + self.c
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.b.len();
        for i in 0..n {
            let mut row = self.b[i];
            for j in 0..n {
                row += self.q[(i, j)] * x[j];
            }
            out[i] = row;
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.q.clone()).eigenvalues.iter().copied().collect()
    }

    pub fn is_positive_definite(&self) -> bool {
        let scale = 1.0 + max_abs(&self.q);
        self.eigenvalues().iter().all(|&l| l > 1e-12 * scale)
    }

    /// Unique minimiser when `Q` is positive definite.
    pub fn minimizer(&self) -> Option<Vec<f64>> {
        if !self.is_positive_definite() {
            return None;
        }
        let chol = self.q.clone().cholesky()?;
        let b = nalgebra::DVector::from_column_slice(&self.b);
        Some((-chol.solve(&b)).iter().copied().collect())
    }

    pub fn lower_bound(&self) -> f64 {
        let eig = SymmetricEigen::new(self.q.clone());
        let scale = 1.0 + max_abs(&self.q);
        let b = nalgebra::DVector::from_column_slice(&self.b);
        let mut lb = self.c;
        for (k, &lam) in eig.eigenvalues.iter().enumerate() {
            let proj = eig.eigenvectors.column(k).dot(&b);
            if lam > 1e-12 * scale {
                lb -= 0.5 * proj * proj / lam;
            } else if lam < -1e-12 * scale || proj.abs() > 1e-12 * (1.0 + b.amax()) {
                return f64::NEG_INFINITY;
            }
        }
        lb
    }
}

/// Smooth barrier approximating the indicator of an axis-aligned box:
/// per axis `softplus(β(d − h)) + softplus(β(−d − h))` with `d = x − center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothedBox {
    pub center: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub sharpness: f64,
}

pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl SmoothedBox {
    fn validate(&self) -> Result<()> {
        if self.center.is_empty() || self.center.len() != self.half_widths.len() {
            return Err(Error::usage("smoothed box needs matching non-empty center and half_widths"));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return Err(Error::usage("smoothed box sharpness must be positive"));
        }
        if self.half_widths.iter().any(|h| !(*h >= 0.0 && h.is_finite()))
            || self.center.iter().any(|c| !c.is_finite())
        {
            return Err(Error::usage("smoothed box geometry must be finite with half_widths ≥ 0"));
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let beta = self.sharpness;
        let mut v = 0.0;
        for k in 0..self.center.len() {
            let d = x[k] - self.center[k];
            let h = self.half_widths[k];
            v += softplus(beta * (d - h)) + softplus(beta * (-d - h));
        }
        v
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let beta = self.sharpness;
        for k in 0..self.center.len() {
            let d = x[k] - self.center[k];
            let h = self.half_widths[k];
            out[k] = beta * (logistic(beta * (d - h)) - logistic(beta * (-d - h)));
        }
    }

    pub fn lower_bound(&self) -> f64 {
        self.half_widths
            .iter()
            .map(|h| 2.0 * softplus(-self.sharpness * h))
            .sum()
    }
}

/// Pointwise minimum of finitely many quadratics of the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinQuadratics {
    pub pieces: Vec<Quadratic>,
}

impl MinQuadratics {
    fn active(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (k, p) in self.pieces.iter().enumerate() {
            let v = p.value(x);
            if v < best.1 {
                best = (k, v);
            }
        }
        best
    }
}

/// `scale · inner(x + shift) + offset + tilt·|x|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transformed {
    pub inner: TestFunction,
    pub shift: Vec<f64>,
    pub scale: f64,
    pub offset: f64,
    pub tilt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionKind {
    Quadratic(Quadratic),
    SmoothedBox(SmoothedBox),
    MinQuadratics(MinQuadratics),
    Transformed(Box<Transformed>),
}

/// Certificate `f(x) ≤ a·e^{b|x|}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpBound {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestFunctionRepr {
    kind: FunctionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exp_bound: Option<ExpBound>,
}

/// A catalogue function on `Rⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TestFunctionRepr", into = "TestFunctionRepr")]
pub struct TestFunction {
    kind: FunctionKind,
    exp_bound: Option<ExpBound>,
    dim: usize,
}

impl TryFrom<TestFunctionRepr> for TestFunction {
    type Error = Error;

    fn try_from(r: TestFunctionRepr) -> Result<Self> {
        let mut f = TestFunction::from_kind(r.kind)?;
        if let Some(eb) = r.exp_bound {
            f = f.with_exp_bound(eb.a, eb.b)?;
        }
        Ok(f)
    }
}

impl From<TestFunction> for TestFunctionRepr {
    fn from(f: TestFunction) -> Self {
        TestFunctionRepr {
            kind: f.kind,
            exp_bound: f.exp_bound,
        }
    }
}

impl TestFunction {
    pub fn from_kind(kind: FunctionKind) -> Result<Self> {
        let dim = match &kind {
            FunctionKind::Quadratic(q) => {
                q.validate()?;
                q.dim()
            }
            FunctionKind::SmoothedBox(b) => {
                b.validate()?;
                b.center.len()
            }
            FunctionKind::MinQuadratics(m) => {
                let first = m
                    .pieces
                    .first()
                    .ok_or_else(|| Error::usage("min_quadratics needs at least one piece"))?;
                for p in &m.pieces {
                    p.validate()?;
                    if p.dim() != first.dim() {
                        return Err(Error::usage("min_quadratics pieces must share one dimension"));
                    }
                }
                first.dim()
            }
            FunctionKind::Transformed(t) => {
                let n = t.inner.dim();
                if t.shift.len() != n {
                    return Err(Error::usage("transformed shift has the wrong dimension"));
                }
                if !(t.scale > 0.0 && t.scale.is_finite()) {
                    return Err(Error::usage("transformed scale must be positive"));
                }
                if !(t.tilt >= 0.0 && t.tilt.is_finite()) || !t.offset.is_finite() {
                    return Err(Error::usage("transformed tilt must be ≥ 0 and offset finite"));
                }
                if t.shift.iter().any(|v| !v.is_finite()) {
                    return Err(Error::usage("transformed shift must be finite"));
                }
                n
            }
        };
        Ok(TestFunction {
            kind,
            exp_bound: None,
            dim,
        })
    }

    pub fn quadratic(q: DMatrix<f64>, b: Vec<f64>, c: f64) -> Result<Self> {
        Self::from_kind(FunctionKind::Quadratic(Quadratic::new(q, b, c)?))
    }

    /// `½|x|²`.
    pub fn half_square(dim: usize) -> Self {
        Self::isotropic(dim, 1.0, &vec![0.0; dim], 0.0)
    }

    /// `½·coef·|x − center|² + offset`.
    pub fn isotropic(dim: usize, coef: f64, center: &[f64], offset: f64) -> Self {
        assert_eq!(center.len(), dim);
        Self::from_kind(FunctionKind::Quadratic(Quadratic::isotropic(coef, center, offset)))
            .expect("isotropic quadratic is valid")
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::isotropic(dim, 0.0, &vec![0.0; dim], c)
    }

    pub fn smoothed_box(center: Vec<f64>, half_widths: Vec<f64>, sharpness: f64) -> Result<Self> {
        Self::from_kind(FunctionKind::SmoothedBox(SmoothedBox {
            center,
            half_widths,
            sharpness,
        }))
    }

    pub fn min_of(pieces: Vec<Quadratic>) -> Result<Self> {
        Self::from_kind(FunctionKind::MinQuadratics(MinQuadratics { pieces }))
    }

    pub fn transformed(&self, shift: Vec<f64>, scale: f64, offset: f64, tilt: f64) -> Result<Self> {
        Self::from_kind(FunctionKind::Transformed(Box::new(Transformed {
            inner: self.clone(),
            shift,
            scale,
            offset,
            tilt,
        })))
    }

    /// `x ↦ f(x + v)`.
    pub fn shifted(&self, v: &[f64]) -> Result<Self> {
        self.transformed(v.to_vec(), 1.0, 0.0, 0.0)
    }

    /// `f + c`, kept in closed form where the kind allows it.
    pub fn plus_constant(&self, c: f64) -> Self {
        let kind = match &self.kind {
            FunctionKind::Quadratic(q) => {
                let mut q = q.clone();
                q.c += c;
                FunctionKind::Quadratic(q)
            }
            FunctionKind::MinQuadratics(m) => FunctionKind::MinQuadratics(MinQuadratics {
                pieces: m
                    .pieces
                    .iter()
                    .map(|p| {
                        let mut p = p.clone();
                        p.c += c;
                        p
                    })
                    .collect(),
            }),
            FunctionKind::Transformed(t) => {
                let mut t = t.clone();
                t.offset += c;
                FunctionKind::Transformed(t)
            }
            FunctionKind::SmoothedBox(_) => FunctionKind::Transformed(Box::new(Transformed {
                inner: self.clone(),
                shift: vec![0.0; self.dim],
                scale: 1.0,
                offset: c,
                tilt: 0.0,
            })),
        };
        TestFunction {
            kind,
            exp_bound: None,
            dim: self.dim,
        }
    }

    /// `f + κ|x|²` with `κ ≥ 0`.
    pub fn plus_isotropic(&self, kappa: f64) -> Self {
        assert!(kappa >= 0.0);
        let bump = |q: &Quadratic| {
            let mut q = q.clone();
            for i in 0..q.dim() {
                q.q[(i, i)] += 2.0 * kappa;
            }
            q
        };
        let kind = match &self.kind {
            FunctionKind::Quadratic(q) => FunctionKind::Quadratic(bump(q)),
            FunctionKind::MinQuadratics(m) => FunctionKind::MinQuadratics(MinQuadratics {
                pieces: m.pieces.iter().map(bump).collect(),
            }),
            _ => FunctionKind::Transformed(Box::new(Transformed {
                inner: self.clone(),
                shift: vec![0.0; self.dim],
                scale: 1.0,
                offset: 0.0,
                tilt: kappa,
            })),
        };
        TestFunction {
            kind,
            exp_bound: None,
            dim: self.dim,
        }
    }

    pub fn with_exp_bound(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::usage("exponential bound needs finite a, b ≥ 0"));
        }
        self.exp_bound = Some(ExpBound { a, b });
        Ok(self)
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn exp_bound(&self) -> Option<ExpBound> {
        self.exp_bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::usage(format!(
                "point has dimension {}, function expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Value at `x`; `+∞` only on overflow, never NaN.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.value(x))
    }

    /// Gradient at `x` (of the active piece on kinks).
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let v = match &self.kind {
            FunctionKind::Quadratic(q) => q.value(x),
            FunctionKind::SmoothedBox(b) => b.value(x),
            FunctionKind::MinQuadratics(m) => m.active(x).1,
            FunctionKind::Transformed(t) => {
                let y: Vec<f64> = x.iter().zip(&t.shift).map(|(a, s)| a + s).collect();
                let mut v = t.scale * t.inner.value(&y) + t.offset;
                if t.tilt != 0.0 {
                    v += t.tilt * x.iter().map(|a| a * a).sum::<f64>();
                }
                v
            }
        };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FunctionKind::Quadratic(q) => q.gradient_into(x, out),
            FunctionKind::SmoothedBox(b) => b.gradient_into(x, out),
            FunctionKind::MinQuadratics(m) => {
                let (k, _) = m.active(x);
                m.pieces[k].gradient_into(x, out);
            }
            FunctionKind::Transformed(t) => {
                let y: Vec<f64> = x.iter().zip(&t.shift).map(|(a, s)| a + s).collect();
                t.inner.gradient_into(&y, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = t.scale * *o + 2.0 * t.tilt * xi;
                }
            }
        }
    }

    /// Value and gradient in one call.
    pub(crate) fn value_gradient(&self, x: &[f64], out: &mut [f64]) -> f64 {
        self.gradient_into(x, out);
        self.value(x)
    }

    /// The value of `f` when it is constant.
    pub fn as_constant(&self) -> Option<f64> {
        let flat = |q: &Quadratic| q.q.iter().chain(&q.b).all(|v| *v == 0.0);
        match &self.kind {
            FunctionKind::Quadratic(q) if flat(q) => Some(q.c),
            FunctionKind::MinQuadratics(m) if m.pieces.iter().all(flat) => {
                Some(m.pieces.iter().map(|q| q.c).fold(f64::INFINITY, f64::min))
            }
            FunctionKind::Transformed(t) if t.tilt == 0.0 => {
                t.inner.as_constant().map(|c| t.scale * c + t.offset)
            }
            _ => None,
        }
    }

    /// A valid lower bound (the infimum for every kind except tilted wrappers).
    pub fn lower_bound(&self) -> f64 {
        match &self.kind {
            FunctionKind::Quadratic(q) => q.lower_bound(),
            FunctionKind::SmoothedBox(b) => b.lower_bound(),
            FunctionKind::MinQuadratics(m) => m
                .pieces
                .iter()
                .map(Quadratic::lower_bound)
                .fold(f64::INFINITY, f64::min),
            FunctionKind::Transformed(t) => {
                let lb = t.inner.lower_bound();
                if lb == f64::NEG_INFINITY && t.tilt > 0.0 {
                    // Growth from the tilt may still dominate; fall back to
                    // the infimum of the exact transformed function when quadratic.
                    match self.piecewise_1d() {
                        Some(p) => piecewise::pieces_lower_bound(&p),
                        None => f64::NEG_INFINITY,
                    }
                } else {
                    t.scale * lb + t.offset
                }
            }
        }
    }

    /// `e^{-f}` decays fast enough to be Lebesgue integrable.
    pub fn grows_at_infinity(&self) -> bool {
        match &self.kind {
            FunctionKind::Quadratic(q) => q.is_positive_definite(),
            FunctionKind::SmoothedBox(_) => true,
            FunctionKind::MinQuadratics(m) => m.pieces.iter().all(Quadratic::is_positive_definite),
            FunctionKind::Transformed(t) => t.tilt > 0.0 || t.inner.grows_at_infinity(),
        }
    }

    /// For one-dimensional functions that are a minimum of quadratics, the
    /// pieces as `[a, b, c]` meaning `a y² + b y + c`.
    pub(crate) fn piecewise_1d(&self) -> Option<Vec<[f64; 3]>> {
        if self.dim != 1 {
            return None;
        }
        match &self.kind {
            FunctionKind::Quadratic(q) => Some(vec![[0.5 * q.q[(0, 0)], q.b[0], q.c]]),
            FunctionKind::MinQuadratics(m) => Some(
                m.pieces
                    .iter()
                    .map(|q| [0.5 * q.q[(0, 0)], q.b[0], q.c])
                    .collect(),
            ),
            FunctionKind::SmoothedBox(_) => None,
            FunctionKind::Transformed(t) => {
                let inner = t.inner.piecewise_1d()?;
                let s = t.shift[0];
                Some(
                    inner
                        .iter()
                        .map(|[a, b, c]| {
                            [
                                t.scale * a + t.tilt,
                                t.scale * (2.0 * a * s + b),
                                t.scale * (a * s * s + b * s + c) + t.offset,
                            ]
                        })
                        .collect(),
                )
            }
        }
    }

    /// Starting points near the minimisers, used to seed local searches.
    pub(crate) fn mode_hints(&self) -> Vec<Vec<f64>> {
        let zero = vec![0.0; self.dim];
        let mut hints = match &self.kind {
            FunctionKind::Quadratic(q) => q.minimizer().into_iter().collect(),
            FunctionKind::SmoothedBox(b) => vec![b.center.clone()],
            FunctionKind::MinQuadratics(m) => m.pieces.iter().filter_map(Quadratic::minimizer).collect(),
            FunctionKind::Transformed(t) => t
                .inner
                .mode_hints()
                .into_iter()
                .map(|h| h.iter().zip(&t.shift).map(|(a, s)| a - s).collect())
                .collect(),
        };
        hints.push(zero);
        hints
    }
}

/// Outcome of a sampled exponential-bound check.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpBoundReport {
    pub pass: bool,
    /// `max f(x) − a·e^{b|x|}` over the samples.
    pub worst_violation: f64,
    pub witness: Vec<f64>,
}

/// Sample `n_samples` points uniformly in the ball of the given radius and
/// test `f(x) ≤ a·e^{b|x|} + 1e−12`.
pub fn exp_bound_check(
    f: &TestFunction,
    a: f64,
    b: f64,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<ExpBoundReport> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::usage("exp_bound_check needs a, b ≥ 0"));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::usage("radius must be finite and ≥ 0"));
    }
    let n = f.dim();
    let mut rng = crate::rng::stream(seed, 0);
    let mut worst = f64::NEG_INFINITY;
    let mut witness = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..n_samples {
        let mut norm = 0.0;
        for xi in x.iter_mut() {
            *xi = rng.sample::<f64, _>(StandardNormal);
            norm += *xi * *xi;
        }
        let norm = norm.sqrt().max(f64::MIN_POSITIVE);
        let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
        for xi in x.iter_mut() {
            *xi *= r / norm;
        }
        let v = f.value(&x) - a * (b * r).exp();
        if v > worst {
            worst = v;
            witness.copy_from_slice(&x);
        }
    }
    Ok(ExpBoundReport {
        pass: worst <= 1e-12,
        worst_violation: worst,
        witness,
    })
}
