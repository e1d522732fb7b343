//! Numerical integration of `e^{-f}` against a reference measure.
//!
//! Gaussian-type integrands use Gauss–Hermite rules recentred at the mode
//! and rescaled by the local Hessian, so quadratic `f` are integrated exactly.
//! Plateau-shaped integrands (smoothed boxes) go to a composite
//! Gauss–Legendre tensor grid. One-dimensional minima of quadratics are
//! integrated in closed form.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::measure::{GaussianMeasure, ReferenceMeasure};
use super::piecewise;
use super::rules::{HermiteRule, LegendreRule};
use super::{FunctionKind, TestFunction};
use crate::error::{Error, Result};
use crate::optimize::{minimize, MinimizeOptions};

/// Integrals below this are reported as underflow.
pub const UNDERFLOW_LEVEL: f64 = 1e-300;

/// Upper limit on the number of integrand evaluations per integral.
pub const MAX_NODES: u64 = 1 << 24;

/// Highest dimension accepted by the tensor grid.
pub const TENSOR_MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    GaussHermite,
    TensorGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    pub nodes_per_axis: usize,
    /// Half-width of the integration box around the mode (tensor grid only).
    pub truncation_radius: f64,
}

impl QuadratureSpec {
    pub fn gauss_hermite(nodes_per_axis: usize) -> Self {
        QuadratureSpec {
            scheme: QuadratureScheme::GaussHermite,
            nodes_per_axis,
            truncation_radius: 12.0,
        }
    }

    pub fn tensor_grid(nodes_per_axis: usize, truncation_radius: f64) -> Self {
        QuadratureSpec {
            scheme: QuadratureScheme::TensorGrid,
            nodes_per_axis,
            truncation_radius,
        }
    }

    /// Gauss–Hermite with a per-axis node count that keeps the tensor
    /// product affordable: 64, 32, 16, 10, then 6 nodes.
    pub fn default_for_dim(dim: usize) -> Self {
        let nodes = match dim {
            0 | 1 => 64,
            2 => 32,
            3 => 16,
            4 => 10,
            _ => 6,
        };
        Self::gauss_hermite(nodes)
    }

    /// Default scheme for a given integrand: tensor grid when `f` contains a
    /// smoothed box, Gauss–Hermite otherwise.
    pub fn for_function(f: &TestFunction) -> Self {
        if contains_box(f) && f.dim() <= TENSOR_MAX_DIM {
            let nodes = match f.dim() {
                1 => 1024,
                2 => 256,
                3 => 64,
                _ => 32,
            };
            Self::tensor_grid(nodes, 12.0)
        } else {
            Self::default_for_dim(f.dim())
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.nodes_per_axis < 2 {
            return Err(Error::usage("quadrature needs at least 2 nodes per axis"));
        }
        let total = u64::try_from(self.nodes_per_axis)
            .ok()
            .and_then(|n| u32::try_from(dim).ok().and_then(|d| n.checked_pow(d)))
            .ok_or_else(|| {
                Error::Resource(format!(
                    "{}^{dim} quadrature nodes overflow a 64-bit count",
                    self.nodes_per_axis
                ))
            })?;
        if total > MAX_NODES {
            return Err(Error::Resource(format!(
                "{total} quadrature nodes exceed the limit of {MAX_NODES}"
            )));
        }
        if self.scheme == QuadratureScheme::TensorGrid {
            if dim > TENSOR_MAX_DIM {
                return Err(Error::Resource(format!(
                    "tensor-grid quadrature is limited to dimension {TENSOR_MAX_DIM}, got {dim}"
                )));
            }
            if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
                return Err(Error::usage("truncation radius must be positive and finite"));
            }
        }
        Ok(())
    }
}

fn contains_box(f: &TestFunction) -> bool {
    match f.kind() {
        FunctionKind::SmoothedBox(_) => true,
        FunctionKind::Transformed(t) => contains_box(&t.inner),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureMethod {
    ExactPiecewise,
    GaussHermite,
    TensorGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpIntegral {
    pub integral: f64,
    /// `−log(integral)`, `+∞` on underflow.
    pub neg_log: f64,
    pub underflow: bool,
    pub method: QuadratureMethod,
}

impl ExpIntegral {
    fn from_log(log_i: f64, method: QuadratureMethod) -> Self {
        let underflow = !(log_i >= UNDERFLOW_LEVEL.ln());
        ExpIntegral {
            integral: if underflow { 0.0 } else { log_i.exp() },
            neg_log: if underflow { f64::INFINITY } else { -log_i },
            underflow,
            method,
        }
    }
}

/// `∫ e^{-f} dν` together with its negative logarithm.
pub fn integrate_exp_neg(f: &TestFunction, nu: &GaussianMeasure, q: &QuadratureSpec) -> Result<ExpIntegral> {
    let n = f.dim();
    if nu.dim() != n {
        return Err(Error::usage(format!(
            "function has dimension {n}, measure has dimension {}",
            nu.dim()
        )));
    }
    q.validate(n)?;
    let (h, shift) = match nu.reference() {
        ReferenceMeasure::Flat => {
            if !f.grows_at_infinity() {
                return Err(Error::domain(
                    "e^{-f} is not Lebesgue integrable: f does not grow at infinity",
                ));
            }
            (f.clone(), 0.0)
        }
        ReferenceMeasure::Gaussian { .. } if f.as_constant().is_some() => {
            let c = f.as_constant().unwrap_or_default();
            return Ok(ExpIntegral::from_log(-c, QuadratureMethod::GaussHermite));
        }
        ReferenceMeasure::Gaussian { tau } => (
            f.plus_isotropic(0.5 / tau),
            -0.5 * n as f64 * (2.0 * std::f64::consts::PI * tau).ln(),
        ),
    };
    let (log_i, method) = log_integral_lebesgue(&h, q)?;
    Ok(ExpIntegral::from_log(log_i + shift, method))
}

/// `ln ∫ e^{-h} dx` for an `h` that grows at infinity.
pub(crate) fn log_integral_lebesgue(h: &TestFunction, q: &QuadratureSpec) -> Result<(f64, QuadratureMethod)> {
    if let Some(pieces) = h.piecewise_1d() {
        if pieces.len() >= 2 {
            let (l, _) = piecewise::log_integral(&pieces)?;
            return Ok((l, QuadratureMethod::ExactPiecewise));
        }
    }
    let mode = find_mode(h);
    match q.scheme {
        QuadratureScheme::GaussHermite => Ok((hermite(h, &mode, q.nodes_per_axis)?, QuadratureMethod::GaussHermite)),
        QuadratureScheme::TensorGrid => Ok((
            legendre_box(h, &mode, q.nodes_per_axis, q.truncation_radius),
            QuadratureMethod::TensorGrid,
        )),
    }
}

/// Global minimiser estimate of `h`, started from its mode hints.
pub(crate) fn find_mode(h: &TestFunction) -> Vec<f64> {
    let opts = MinimizeOptions::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in h.mode_hints() {
        let m = minimize(|x, g| h.value_gradient(x, g), &start, opts);
        if m.value.is_finite() && best.as_ref().is_none_or(|(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    best.map(|(_, x)| x).unwrap_or_else(|| vec![0.0; h.dim()])
}

/// Symmetrised finite-difference Hessian of `h` from its analytic gradient.
fn hessian(h: &TestFunction, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut hm = DMatrix::zeros(n, n);
    let mut gp = vec![0.0; n];
    let mut gm = vec![0.0; n];
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = 1e-5 * (1.0 + x[j].abs());
        xp[j] = x[j] + step;
        h.gradient_into(&xp, &mut gp);
        xp[j] = x[j] - step;
        h.gradient_into(&xp, &mut gm);
        xp[j] = x[j];
        for i in 0..n {
            hm[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    0.5 * (&hm + hm.transpose())
}

/// Streaming log-sum-exp accumulator.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSum {
    max: f64,
    sum: f64,
}

impl LogSum {
    pub(crate) fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY || t.is_nan() {
            return;
        }
        if t > self.max {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.sum += (t - self.max).exp();
        }
    }

    pub(crate) fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Iterates all multi-indices of a tensor grid with `k` points per axis.
pub(crate) fn for_each_index(dim: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; dim];
    loop {
        visit(&idx);
        let mut axis = 0;
        loop {
            if axis == dim {
                return;
            }
            idx[axis] += 1;
            if idx[axis] < k {
                break;
            }
            idx[axis] = 0;
            axis += 1;
        }
    }
}

fn hermite(h: &TestFunction, mode: &[f64], nodes: usize) -> Result<f64> {
    let n = mode.len();
    let eig = SymmetricEigen::new(hessian(h, mode));
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs())).max(1e-300);
    let mut widths = Vec::with_capacity(n);
    for &lam in eig.eigenvalues.iter() {
        let lam = lam.max(1e-8 * scale).max(1e-12);
        widths.push((2.0 / lam).sqrt());
    }
    let rule = HermiteRule::new(nodes);
    let log_jac: f64 = widths.iter().map(|w| w.ln()).sum();
    let mut acc = LogSum::new();
    let mut x = vec![0.0; n];
    let mut xi = vec![0.0; n];
    for_each_index(n, nodes, |idx| {
        let mut t = 0.0;
        for (k, &i) in idx.iter().enumerate() {
            xi[k] = rule.nodes[i] * widths[k];
            t += rule.log_weights[i] + rule.nodes[i] * rule.nodes[i];
        }
        for (r, xr) in x.iter_mut().enumerate() {
            let mut v = mode[r];
            for k in 0..n {
                v += eig.eigenvectors[(r, k)] * xi[k];
            }
            *xr = v;
        }
        acc.add(t - h.value(&x));
    });
    Ok(acc.value() + log_jac)
}

fn legendre_box(h: &TestFunction, mode: &[f64], nodes: usize, radius: f64) -> f64 {
    let n = mode.len();
    // Panels of at most 16 points keep the rule well conditioned.
    let panels = nodes.div_ceil(16).max(1);
    let per = nodes.div_ceil(panels).max(2);
    let rule = LegendreRule::new(per);
    let width = 2.0 * radius / panels as f64;
    let mut pts = Vec::with_capacity(panels * per);
    let mut lw = Vec::with_capacity(panels * per);
    for p in 0..panels {
        let a = -radius + p as f64 * width;
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            pts.push(a + 0.5 * width * (z + 1.0));
            lw.push((0.5 * width * w).ln());
        }
    }
    let k = pts.len();
    let mut acc = LogSum::new();
    let mut x = vec![0.0; n];
    for_each_index(n, k, |idx| {
        let mut t = 0.0;
        for (r, &i) in idx.iter().enumerate() {
            x[r] = mode[r] + pts[i];
            t += lw[i];
        }
        acc.add(t - h.value(&x));
    });
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use std::f64::consts::PI;

    fn flat(n: usize) -> GaussianMeasure {
        GaussianMeasure::flat(n).unwrap()
    }

    fn gauss(n: usize, tau: f64) -> GaussianMeasure {
        GaussianMeasure::standard(n, tau).unwrap()
    }

    #[test]
    fn half_square_flat() {
        let f = TestFunction::half_square(1);
        let r = integrate_exp_neg(&f, &flat(1), &QuadratureSpec::default_for_dim(1)).unwrap();
        assert!((r.integral - (2.0 * PI).sqrt()).abs() < 1e-13);
        assert!((r.neg_log + 0.5 * (2.0 * PI).ln()).abs() < 1e-13);
    }

    #[test]
    fn constant_under_gaussian() {
        let f = TestFunction::constant(2, 1.7);
        let r = integrate_exp_neg(&f, &gauss(2, 3.0), &QuadratureSpec::default_for_dim(2)).unwrap();
        assert!((r.neg_log - 1.7).abs() < 1e-13);
    }

    #[test]
    fn half_square_standard_gaussian() {
        let f = TestFunction::half_square(1);
        let r = integrate_exp_neg(&f, &gauss(1, 1.0), &QuadratureSpec::default_for_dim(1)).unwrap();
        assert!((r.integral - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((r.neg_log - 0.5 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn flat_rejects_non_growing() {
        let f = TestFunction::constant(1, 0.0);
        let e = integrate_exp_neg(&f, &flat(1), &QuadratureSpec::default_for_dim(1)).unwrap_err();
        assert!(matches!(e, Error::Domain(_)));
    }

    #[test]
    fn node_overflow_is_resource_error() {
        let f = TestFunction::half_square(4);
        let q = QuadratureSpec::gauss_hermite(usize::MAX / 2);
        assert!(matches!(q.validate(4), Err(Error::Resource(_))));
        let e = integrate_exp_neg(&f, &flat(4), &QuadratureSpec::gauss_hermite(200)).unwrap_err();
        assert!(matches!(e, Error::Resource(_)));
        let t = QuadratureSpec::tensor_grid(4, 5.0);
        assert!(matches!(t.validate(5), Err(Error::Resource(_))));
        assert!(QuadratureSpec::gauss_hermite(1).validate(1).is_err());
    }

    #[test]
    fn underflow_reports_infinite_neg_log() {
        let f = TestFunction::isotropic(1, 1.0, &[0.0], 800.0);
        let r = integrate_exp_neg(&f, &gauss(1, 1.0), &QuadratureSpec::default_for_dim(1)).unwrap();
        assert!(r.underflow);
        assert_eq!(r.neg_log, f64::INFINITY);
        assert_eq!(r.integral, 0.0);
    }

    #[test]
    fn anisotropic_quadratic_log_det() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let f = TestFunction::quadratic(q.clone(), vec![0.3, -0.2], 0.1).unwrap();
        let r = integrate_exp_neg(&f, &flat(2), &QuadratureSpec::default_for_dim(2)).unwrap();
        let quad = Quadratic::new(q.clone(), vec![0.3, -0.2], 0.1).unwrap();
        let oracle = quad.lower_bound() + 0.5 * q.determinant().ln() - (2.0 * PI).ln();
        assert!((r.neg_log - oracle).abs() < 1e-12, "{} vs {oracle}", r.neg_log);
    }

    #[test]
    fn smoothed_box_tensor_grid_matches_1d_exact() {
        // 1-D box of half-width 1, β = 10: ∫ e^{-f} ≈ 2 for a sharp box.
        let f = TestFunction::smoothed_box(vec![0.5], vec![1.0], 10.0).unwrap();
        let q = QuadratureSpec::for_function(&f);
        assert_eq!(q.scheme, QuadratureScheme::TensorGrid);
        let r = integrate_exp_neg(&f, &flat(1), &q).unwrap();
        assert!((r.integral - 2.0).abs() < 2e-2, "{}", r.integral);
        let finer = integrate_exp_neg(&f, &flat(1), &QuadratureSpec::tensor_grid(4096, 12.0)).unwrap();
        assert!((r.integral - finer.integral).abs() < 1e-10);
    }

    #[test]
    fn double_well_takes_exact_route() {
        let f = TestFunction::min_of(vec![
            Quadratic::isotropic(1.0, &[1.0], 0.0),
            Quadratic::isotropic(1.0, &[-1.0], 0.0),
        ])
        .unwrap();
        let r = integrate_exp_neg(&f, &flat(1), &QuadratureSpec::default_for_dim(1)).unwrap();
        assert_eq!(r.method, QuadratureMethod::ExactPiecewise);
        let phi1 = 1.0 - 0.5 * libm::erfc(1.0 / 2f64.sqrt());
        assert!((r.integral - 2.0 * (2.0 * PI).sqrt() * phi1).abs() < 1e-13);
    }

    #[test]
    fn doubling_nodes_is_stable_for_quadratics() {
        for n in 1..=3 {
            let f = TestFunction::isotropic(n, 0.8, &vec![0.4; n], 0.2);
            let m = gauss(n, 2.0);
            let a = integrate_exp_neg(&f, &m, &QuadratureSpec::gauss_hermite(8)).unwrap();
            let b = integrate_exp_neg(&f, &m, &QuadratureSpec::gauss_hermite(16)).unwrap();
            assert!((a.integral - b.integral).abs() < 1e-10);
        }
    }

    #[test]
    fn logsum_accumulator() {
        let mut acc = LogSum::new();
        for t in [-1000.0, -1001.0, f64::NEG_INFINITY] {
            acc.add(t);
        }
        let expect = -1000.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((acc.value() - expect).abs() < 1e-12);
        assert_eq!(LogSum::new().value(), f64::NEG_INFINITY);
    }
}
