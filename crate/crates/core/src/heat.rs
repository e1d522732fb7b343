//! The heat semigroup `P_s e^{-f}(x) = E e^{-f(x + B_s)}`, the potential
//! `f_r = −log P_{T−r} e^{-f}` and its gradient.
//!
//! Expectations use a Gauss–Hermite tensor rule about `x` with nodes
//! `x + √(2s)·ξ`. One-dimensional minima of quadratics are integrated in
//! closed form instead.

use crate::error::{Error, Result};
use crate::function::piecewise::{self, Piece};
use crate::function::quadrature::{for_each_index, LogSum, QuadratureScheme};
use crate::function::rules::HermiteRule;
use crate::function::{QuadratureSpec, TestFunction};

/// Default finite-difference step for the PDE residual.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SemigroupEvaluator {
    f: TestFunction,
    horizon: f64,
    q: QuadratureSpec,
    rule: HermiteRule,
    pieces: Option<Vec<Piece>>,
    constant: Option<f64>,
}

/// Scratch buffers for allocation-free gradient evaluation.
#[derive(Debug, Clone)]
pub struct Workspace {
    y: Vec<f64>,
    g: Vec<f64>,
    acc: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Workspace {
            y: vec![0.0; dim],
            g: vec![0.0; dim],
            acc: vec![0.0; dim],
        }
    }
}

impl SemigroupEvaluator {
    pub fn new(f: TestFunction, horizon: f64, q: QuadratureSpec) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::usage(format!("horizon must be positive and finite, got {horizon}")));
        }
        if f.lower_bound() == f64::NEG_INFINITY {
            return Err(Error::domain("heat semigroup needs f bounded below"));
        }
        if q.scheme != QuadratureScheme::GaussHermite {
            return Err(Error::usage("the heat semigroup uses a gauss-hermite rule"));
        }
        q.validate(f.dim())?;
        let pieces = f.piecewise_1d().filter(|p| p.len() >= 2);
        Ok(SemigroupEvaluator {
            rule: HermiteRule::new(q.nodes_per_axis),
            constant: f.as_constant(),
            f,
            horizon,
            q,
            pieces,
        })
    }

    /// Evaluator with 64 Gauss–Hermite nodes per axis (24 from dimension 4 on).
    pub fn with_defaults(f: TestFunction, horizon: f64) -> Result<Self> {
        let nodes = if f.dim() <= 3 { 64 } else { 24 };
        Self::new(f, horizon, QuadratureSpec::gauss_hermite(nodes))
    }

    pub fn function(&self) -> &TestFunction {
        &self.f
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.q
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::usage(format!(
                "point has dimension {}, function expects {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `ln P_s e^{-f}(x)` for any `s > 0`.
    pub fn log_heat(&self, s: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::usage(format!("heat time must be positive, got {s}")));
        }
        Ok(self.log_heat_unchecked(s, x))
    }

    pub(crate) fn log_heat_unchecked(&self, s: f64, x: &[f64]) -> f64 {
        if let Some(c) = self.constant {
            return -c;
        }
        if let Some(p) = &self.pieces {
            return match piecewise::log_integral(&piecewise::with_kernel(p, x[0], s)) {
                Ok((l, _)) => l - 0.5 * (2.0 * std::f64::consts::PI * s).ln(),
                Err(_) => f64::NAN,
            };
        }
        let n = self.dim();
        let width = (2.0 * s).sqrt();
        let nodes = self.q.nodes_per_axis;
        let mut acc = LogSum::new();
        let mut y = vec![0.0; n];
        for_each_index(n, nodes, |idx| {
            let mut t = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                y[k] = x[k] + width * self.rule.nodes[i];
                t += self.rule.log_weights[i];
            }
            acc.add(t - self.f.value(&y));
        });
        acc.value() - 0.5 * n as f64 * std::f64::consts::PI.ln()
    }

    /// `P_r e^{-f}(x)` for `0 < r ≤ T`.
    pub fn heat_apply(&self, r: f64, x: &[f64]) -> Result<f64> {
        if !(r > 0.0 && r <= self.horizon) {
            return Err(Error::usage(format!(
                "heat time must lie in (0, {}], got {r}",
                self.horizon
            )));
        }
        Ok(self.log_heat(r, x)?.exp())
    }

    fn check_time(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r < self.horizon) {
            return Err(Error::usage(format!(
                "potential time must lie in [0, {}), got {r}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `f_r(x) = −ln P_{T−r} e^{-f}(x)`; `+∞` where the integral underflows.
    pub fn potential(&self, r: f64, x: &[f64]) -> Result<f64> {
        self.check_time(r)?;
        self.check_point(x)?;
        Ok(self.potential_unchecked(r, x))
    }

    pub(crate) fn potential_unchecked(&self, r: f64, x: &[f64]) -> f64 {
        let v = -self.log_heat_unchecked(self.horizon - r, x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    /// `∇f_r(x) = E[e^{-f(x+B)}∇f(x+B)] / E[e^{-f(x+B)}]`.
    pub fn grad_potential(&self, r: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_time(r)?;
        self.check_point(x)?;
        let mut ws = Workspace::new(self.dim());
        let mut out = vec![0.0; self.dim()];
        self.grad_potential_into(r, x, &mut ws, &mut out);
        Ok(out)
    }

    /// Allocation-free gradient. Returns `false` (and fills NaN) when the
    /// kernel mass underflows.
    pub fn grad_potential_into(&self, r: f64, x: &[f64], ws: &mut Workspace, out: &mut [f64]) -> bool {
        let s = self.horizon - r;
        if self.constant.is_some() {
            out.iter_mut().for_each(|o| *o = 0.0);
            return true;
        }
        if let Some(p) = &self.pieces {
            return match piecewise::log_integral(&piecewise::with_kernel(p, x[0], s)) {
                Ok((l, mean)) if l.is_finite() => {
                    out[0] = (x[0] - mean) / s;
                    true
                }
                _ => {
                    out[0] = f64::NAN;
                    false
                }
            };
        }
        let n = self.dim();
        let width = (2.0 * s).sqrt();
        let nodes = self.q.nodes_per_axis;
        let mut max = f64::NEG_INFINITY;
        let mut mass = 0.0;
        ws.acc.iter_mut().for_each(|a| *a = 0.0);
        let Workspace { y, g, acc } = ws;
        for_each_index(n, nodes, |idx| {
            let mut t = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                y[k] = x[k] + width * self.rule.nodes[i];
                t += self.rule.log_weights[i];
            }
            let fv = self.f.value_gradient(y, g);
            let t = t - fv;
            if t == f64::NEG_INFINITY || t.is_nan() {
                return;
            }
            if t > max {
                let scale = (max - t).exp();
                mass *= scale;
                acc.iter_mut().for_each(|a| *a *= scale);
                max = t;
            }
            let w = (t - max).exp();
            mass += w;
            for (a, gi) in acc.iter_mut().zip(g.iter()) {
                *a += w * gi;
            }
        });
        if mass > 0.0 {
            for (o, a) in out.iter_mut().zip(acc.iter()) {
                *o = a / mass;
            }
            true
        } else {
            out.iter_mut().for_each(|o| *o = f64::NAN);
            false
        }
    }

    /// Largest `|∂_r f_r + ½Δf_r − ½|∇f_r|²|` over the grid, all derivatives
    /// by central differences with step `h`.
    pub fn hjb_residual(&self, grid: &[(f64, Vec<f64>)], h: f64) -> Result<f64> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::usage("finite-difference step must be positive"));
        }
        let mut worst: f64 = 0.0;
        for (r, x) in grid {
            let r = *r;
            self.check_point(x)?;
            if !(r - 2.0 * h > 0.0 && r + 2.0 * h < self.horizon) {
                return Err(Error::usage(format!(
                    "grid time {r} must keep a margin of 2h from 0 and {}",
                    self.horizon
                )));
            }
            let f = |t: f64, p: &[f64]| self.potential_unchecked(t, p);
            let centre = f(r, x);
            let dr = (f(r + h, x) - f(r - h, x)) / (2.0 * h);
            let mut lap = 0.0;
            let mut grad2 = 0.0;
            let mut p = x.clone();
            for k in 0..x.len() {
                p[k] = x[k] + h;
                let fp = f(r, &p);
                p[k] = x[k] - h;
                let fm = f(r, &p);
                p[k] = x[k];
                lap += (fp - 2.0 * centre + fm) / (h * h);
                let d = (fp - fm) / (2.0 * h);
                grad2 += d * d;
            }
            let res = (dr + 0.5 * lap - 0.5 * grad2).abs();
            if !res.is_finite() {
                return Err(Error::domain(format!("potential is not finite near r={r}, x={x:?}")));
            }
            worst = worst.max(res);
        }
        Ok(worst)
    }
}

/// The residual grid `r ∈ {¼, ½, ¾}·T`, `x` on 17 points of `[−2, 2]` (1-D).
pub fn standard_residual_grid(horizon: f64) -> Vec<(f64, Vec<f64>)> {
    let mut grid = Vec::new();
    for r in [0.25, 0.5, 0.75] {
        for k in 0..=16 {
            grid.push((r * horizon, vec![-2.0 + 0.25 * k as f64]));
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn half_square(t: f64) -> SemigroupEvaluator {
        SemigroupEvaluator::with_defaults(TestFunction::half_square(1), t).unwrap()
    }

    fn double_well() -> TestFunction {
        TestFunction::min_of(vec![
            Quadratic::isotropic(1.0, &[1.0], 0.0),
            Quadratic::isotropic(1.0, &[-1.0], 0.0),
        ])
        .unwrap()
    }

    /// `f_r(x)` for `f = ½x²`: `x²/(2(1+T−r)) + ½ln(1+T−r)`.
    fn closed_form(t: f64, r: f64, x: f64) -> f64 {
        let s = 1.0 + t - r;
        x * x / (2.0 * s) + 0.5 * s.ln()
    }

    /// `P_s e^{-f}(x)` for the double well. On each half-line the integrand
    /// is a product of two Gaussians in `y`, so each half is an erf term.
    fn double_well_heat(s: f64, x: f64) -> f64 {
        let phi = |z: f64| 0.5 * libm::erfc(-z / 2f64.sqrt());
        let v = 1.0 + s;
        let sd = (s / v).sqrt();
        let half = |c: f64, side: f64| {
            let m = (c * s + x) / v;
            (-(x - c).powi(2) / (2.0 * v)).exp() / v.sqrt() * phi(side * m / sd)
        };
        half(1.0, 1.0) + half(-1.0, -1.0)
    }

    #[test]
    fn heat_examples() {
        let ev = half_square(1.0);
        assert!((ev.heat_apply(1.0, &[0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-14);
        let v = ev.heat_apply(1.0, &[1.0]).unwrap();
        assert!((v - (-0.25f64).exp() / 2f64.sqrt()).abs() < 1e-14);
        let c = SemigroupEvaluator::with_defaults(TestFunction::constant(1, 2.0), 1.0).unwrap();
        assert!((c.heat_apply(0.3, &[5.0]).unwrap() - (-2f64).exp()).abs() < 1e-15);
        assert!(matches!(ev.heat_apply(0.0, &[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn potential_examples() {
        let ev = half_square(1.0);
        assert!((ev.potential(0.0, &[0.0]).unwrap() - 0.5 * LN_2).abs() < 1e-14);
        for &(r, x) in &[(0.0, 1.0), (0.5, 1.0), (0.9, -2.0)] {
            assert!((ev.potential(r, &[x]).unwrap() - closed_form(1.0, r, x)).abs() < 1e-13);
        }
        // c|x|² in n dims: (n/2)·ln(1 + 2cT).
        let (c, n, t) = (0.7, 3, 1.5);
        let f = TestFunction::isotropic(n, 2.0 * c, &[0.0; 3], 0.0);
        let ev = SemigroupEvaluator::with_defaults(f, t).unwrap();
        let v = ev.potential(0.0, &[0.0; 3]).unwrap();
        assert!((v - 0.5 * n as f64 * (1.0 + 2.0 * c * t).ln()).abs() < 1e-12);
        assert!(ev.potential(t, &[0.0; 3]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let ev = half_square(1.0);
        assert!((ev.grad_potential(0.0, &[1.0]).unwrap()[0] - 0.5).abs() < 1e-14);
        assert!((ev.grad_potential(0.5, &[1.0]).unwrap()[0] - 2.0 / 3.0).abs() < 1e-14);
        let c = SemigroupEvaluator::with_defaults(TestFunction::constant(2, 2.0), 1.0).unwrap();
        assert_eq!(c.grad_potential(0.2, &[1.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn log_det_oracle() {
        let q = DMatrix::from_row_slice(2, 2, &[1.5, 0.4, 0.4, 0.8]);
        let f = TestFunction::quadratic(q.clone(), vec![0.0, 0.0], 0.0).unwrap();
        let t = 0.7;
        let ev = SemigroupEvaluator::with_defaults(f, t).unwrap();
        let oracle = 0.5 * (DMatrix::identity(2, 2) + q * t).determinant().ln();
        assert!((ev.potential(0.0, &[0.0, 0.0]).unwrap() - oracle).abs() < 1e-8);
    }

    #[test]
    fn semigroup_property() {
        // P_{r1+r2} e^{-f} = P_{r2}(e^{-(−ln P_{r1} e^{-f})}); for ½x² the inner
        // function is x²/(2(1+r1)) + ½ln(1+r1), again a quadratic.
        let (r1, r2) = (0.3, 0.45);
        let ev = SemigroupEvaluator::with_defaults(TestFunction::half_square(1), 2.0).unwrap();
        let inner = TestFunction::isotropic(1, 1.0 / (1.0 + r1), &[0.0], 0.5 * (1.0 + r1).ln());
        let ev2 = SemigroupEvaluator::with_defaults(inner, 2.0).unwrap();
        for x in [-1.3, 0.0, 0.8] {
            let direct = ev.heat_apply(r1 + r2, &[x]).unwrap();
            let composed = ev2.heat_apply(r2, &[x]).unwrap();
            assert!((direct - composed).abs() < 1e-8);
        }
    }

    #[test]
    fn double_well_matches_erf_oracle() {
        let ev = SemigroupEvaluator::with_defaults(double_well(), 1.0).unwrap();
        for &(r, x) in &[(0.0, 0.0), (0.3, 0.7), (0.8, -1.9)] {
            let s = 1.0 - r;
            let oracle = -double_well_heat(s, x).ln();
            let v = ev.potential(r, &[x]).unwrap();
            assert!((v - oracle).abs() < 1e-12, "r={r} x={x}: {v} vs {oracle}");
        }
    }

    #[test]
    fn hjb_residuals() {
        let grid = standard_residual_grid(1.0);
        let ev = half_square(1.0);
        let r = ev.hjb_residual(&grid, DEFAULT_FD_STEP).unwrap();
        assert!(r < 1e-6, "{r}");
        let c = SemigroupEvaluator::with_defaults(TestFunction::constant(1, 3.0), 1.0).unwrap();
        assert!(c.hjb_residual(&grid, DEFAULT_FD_STEP).unwrap() < 1e-9);
        let w = SemigroupEvaluator::with_defaults(double_well(), 1.0).unwrap();
        assert!(w.hjb_residual(&grid, DEFAULT_FD_STEP).unwrap() < 1e-4);
        let bad = vec![(0.001, vec![0.0])];
        assert!(matches!(ev.hjb_residual(&bad, DEFAULT_FD_STEP), Err(Error::Usage(_))));
    }

    #[test]
    fn nonnegative_potential_for_nonnegative_f() {
        let f = TestFunction::smoothed_box(vec![0.0], vec![1.0], 5.0).unwrap();
        let ev = SemigroupEvaluator::with_defaults(f, 1.0).unwrap();
        for x in [-3.0, 0.0, 0.5, 2.0] {
            assert!(ev.potential(0.3, &[x]).unwrap() >= 0.0);
        }
    }

    #[test]
    fn rejects_unbounded_below() {
        let f = TestFunction::quadratic(DMatrix::from_element(1, 1, -1.0), vec![0.0], 0.0).unwrap();
        assert!(matches!(SemigroupEvaluator::with_defaults(f, 1.0), Err(Error::Domain(_))));
    }

    fn catalogue() -> Vec<TestFunction> {
        vec![
            TestFunction::isotropic(1, 1.3, &[0.4], 0.1),
            TestFunction::smoothed_box(vec![0.2], vec![1.0], 4.0).unwrap(),
            double_well(),
            TestFunction::smoothed_box(vec![0.0, 0.5], vec![1.0, 0.5], 3.0).unwrap(),
            TestFunction::isotropic(2, 0.6, &[1.0, -1.0], 0.0).plus_isotropic(0.2),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn gradient_matches_finite_differences(r in 0.0f64..0.8, x in -2.0f64..2.0) {
            for f in catalogue() {
                let n = f.dim();
                let ev = SemigroupEvaluator::with_defaults(f, 1.0).unwrap();
                let p: Vec<f64> = (0..n).map(|k| x - 0.3 * k as f64).collect();
                let g = ev.grad_potential(r, &p).unwrap();
                for k in 0..n {
                    let h = 1e-5;
                    let mut a = p.clone();
                    let mut b = p.clone();
                    a[k] += h;
                    b[k] -= h;
                    let fd = (ev.potential(r, &a).unwrap() - ev.potential(r, &b).unwrap()) / (2.0 * h);
                    let rel = (fd - g[k]).abs() / g[k].abs().max(1e-2);
                    prop_assert!(rel < 1e-5, "fd {} vs {} ({})", fd, g[k], rel);
                }
            }
        }

        #[test]
        fn potential_is_monotone_in_f(r in 0.0f64..0.9, x in -3.0f64..3.0, c in 0.0f64..1.0) {
            let f = double_well();
            let g = f.plus_isotropic(c);
            let ef = SemigroupEvaluator::with_defaults(f, 1.0).unwrap();
            let eg = SemigroupEvaluator::with_defaults(g, 1.0).unwrap();
            prop_assert!(ef.potential(r, &[x]).unwrap() <= eg.potential(r, &[x]).unwrap() + 1e-12);
        }
    }
}
