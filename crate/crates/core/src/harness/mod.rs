//! Inequality scenarios: a block operator, input functions `f_i`, output
//! functions `g_j` and a reference measure. A scenario is checked in two
//! steps. First the basic assumption
//! `Σ ν_j g_j((Ax)_j) ≤ Σ μ_i f_i(x_i)` is searched for violations. Then
//! the integral conclusion `Σ ν_j·(−log ∫e^{-g_j}) ≤ Σ μ_i·(−log ∫e^{-f_i})`
//! is evaluated by quadrature.

mod builtins;
mod tight;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{integrate_exp_neg, GaussianMeasure, QuadratureSpec, ReferenceMeasure, TestFunction};
use crate::operator::{
    constant_condition_check, identity_decomposition_check, projection_condition_check, BlockOperator,
    ProjectionFamily, NORM_TOL,
};
use crate::optimize::{minimize, MinimizeOptions};

pub use builtins::{builtin, builtin_names, BUILTIN_HELP};
pub use tight::{tau_g, tau_property_scenario, tight_g_family};

/// A sampled maximum of the assumption defect at most this is "holds".
pub const ASSUMPTION_TOL: f64 = 1e-8;

/// Default relative tolerance of the conclusion check.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Mass balance tolerance.
pub const MASS_TOL: f64 = 1e-12;

/// How the basic assumption is searched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    /// Uniform samples in the box `[−radius, radius]^N`.
    pub random_samples: usize,
    pub radius: f64,
    /// Grid points per axis, reduced so the grid stays below `max_grid_points`.
    pub grid_per_axis: usize,
    pub max_grid_points: usize,
    /// Number of best samples refined by local ascent.
    pub polish_starts: usize,
    pub seed: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            random_samples: 100_000,
            radius: 8.0,
            grid_per_axis: 17,
            max_grid_points: 100_000,
            polish_starts: 5,
            seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::usage("sampler radius must be positive and finite"));
        }
        if self.random_samples == 0 && self.grid_per_axis < 2 {
            return Err(Error::usage("sampler needs random samples or a grid"));
        }
        Ok(())
    }
}

/// Unit vectors and weights with `Σ c_i u_i u_iᵀ = Id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decomposition {
    pub vectors: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub operator: BlockOperator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projections: Option<ProjectionFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Decomposition>,
    pub f_family: Vec<TestFunction>,
    pub g_family: Vec<TestFunction>,
    pub measure: ReferenceMeasure,
    /// Check the assumption on `f + |x|²/(2τ)` and `g + |x|²/(2τ)`, the form
    /// in which Gaussian statements reduce to flat ones.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub gaussian_tilt: bool,
    #[serde(default)]
    pub sampler: SamplerSettings,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.operator.validate()?;
        self.measure.validate()?;
        self.sampler.validate()?;
        let a = &self.operator;
        if self.f_family.len() != a.source.size() {
            return Err(Error::usage(format!(
                "scenario has {} input functions for {} source indices",
                self.f_family.len(),
                a.source.size()
            )));
        }
        if self.g_family.len() != a.target.size() {
            return Err(Error::usage(format!(
                "scenario has {} output functions for {} target indices",
                self.g_family.len(),
                a.target.size()
            )));
        }
        for (i, f) in self.f_family.iter().enumerate() {
            if f.dim() != a.source.dims[i] {
                return Err(Error::usage(format!(
                    "f_{i} has dimension {}, source index {i} has {}",
                    f.dim(),
                    a.source.dims[i]
                )));
            }
        }
        for (j, g) in self.g_family.iter().enumerate() {
            if g.dim() != a.target.dims[j] {
                return Err(Error::usage(format!(
                    "g_{j} has dimension {}, target index {j} has {}",
                    g.dim(),
                    a.target.dims[j]
                )));
            }
        }
        if self.gaussian_tilt && self.measure.is_flat() {
            return Err(Error::usage("a Gaussian tilt needs a Gaussian measure"));
        }
        if let Some(p) = &self.projections {
            p.validate()?;
        }
        Ok(())
    }

    /// `Σ μ_i m_i − Σ ν_j n_j`.
    pub fn mass_defect(&self) -> f64 {
        self.operator.source.dimension_mass() - self.operator.target.dimension_mass()
    }

    pub fn masses_balance(&self) -> bool {
        self.mass_defect().abs() <= MASS_TOL * (1.0 + self.operator.source.dimension_mass())
    }

    /// The same scenario with `c` added to every `g_j`.
    pub fn with_g_offset(&self, c: f64) -> Scenario {
        let mut s = self.clone();
        s.g_family = s.g_family.iter().map(|g| g.plus_constant(c)).collect();
        s
    }

    /// The same scenario with `ε|x|²` added to every `f_i` and `g_j`.
    pub fn with_added_square(&self, eps: f64) -> Scenario {
        let mut s = self.clone();
        s.f_family = s.f_family.iter().map(|f| f.plus_isotropic(eps)).collect();
        s.g_family = s.g_family.iter().map(|g| g.plus_isotropic(eps)).collect();
        s
    }

    /// Functions entering the assumption (tilted when requested).
    fn assumption_families(&self) -> (Vec<TestFunction>, Vec<TestFunction>) {
        match (self.gaussian_tilt, self.measure.tau()) {
            (true, Some(tau)) => (
                self.f_family.iter().map(|f| f.plus_isotropic(0.5 / tau)).collect(),
                self.g_family.iter().map(|g| g.plus_isotropic(0.5 / tau)).collect(),
            ),
            _ => (self.f_family.clone(), self.g_family.clone()),
        }
    }
}

/// The assumption defect `D(x) = Σ ν_j g_j((Ax)_j) − Σ μ_i f_i(x_i)`.
pub(crate) struct Defect<'a> {
    a: DMatrix<f64>,
    src: Vec<usize>,
    tgt: Vec<usize>,
    mu: &'a [f64],
    nu: &'a [f64],
    fs: &'a [TestFunction],
    gs: &'a [TestFunction],
}

impl<'a> Defect<'a> {
    pub(crate) fn new(op: &'a BlockOperator, fs: &'a [TestFunction], gs: &'a [TestFunction]) -> Self {
        let offsets = |dims: &[usize]| {
            let mut v = vec![0];
            for d in dims {
                v.push(v.last().unwrap() + d);
            }
            v
        };
        Defect {
            a: op.assembled(),
            src: offsets(&op.source.dims),
            tgt: offsets(&op.target.dims),
            mu: &op.source.weights,
            nu: &op.target.weights,
            fs,
            gs,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        *self.src.last().unwrap()
    }

    fn image(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.a.nrows()];
        for r in 0..self.a.nrows() {
            let mut s = 0.0;
            for c in 0..self.a.ncols() {
                s += self.a[(r, c)] * x[c];
            }
            y[r] = s;
        }
        y
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let mut rhs = 0.0;
        for (i, f) in self.fs.iter().enumerate() {
            rhs += self.mu[i] * f.value(&x[self.src[i]..self.src[i + 1]]);
        }
        if rhs == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        let y = self.image(x);
        let mut lhs = 0.0;
        for (j, g) in self.gs.iter().enumerate() {
            lhs += self.nu[j] * g.value(&y[self.tgt[j]..self.tgt[j + 1]]);
        }
        if lhs == f64::INFINITY {
            return f64::INFINITY;
        }
        lhs - rhs
    }

    pub(crate) fn value_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let y = self.image(x);
        let mut gy = vec![0.0; y.len()];
        let mut lhs = 0.0;
        for (j, g) in self.gs.iter().enumerate() {
            let (a, b) = (self.tgt[j], self.tgt[j + 1]);
            lhs += self.nu[j] * g.value_gradient(&y[a..b], &mut gy[a..b]);
            gy[a..b].iter_mut().for_each(|v| *v *= self.nu[j]);
        }
        for c in 0..self.a.ncols() {
            let mut s = 0.0;
            for r in 0..self.a.nrows() {
                s += self.a[(r, c)] * gy[r];
            }
            grad[c] = s;
        }
        let mut rhs = 0.0;
        let mut gf = vec![0.0; x.len()];
        for (i, f) in self.fs.iter().enumerate() {
            let (a, b) = (self.src[i], self.src[i + 1]);
            rhs += self.mu[i] * f.value_gradient(&x[a..b], &mut gf[a..b]);
            for k in a..b {
                grad[k] -= self.mu[i] * gf[k];
            }
        }
        lhs - rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionResult {
    /// Largest defect found; `≤ 0` means the inequality held on every sample.
    pub worst_violation: f64,
    /// Input family attaining it, one vector per source index.
    pub witness: Vec<Vec<f64>>,
    pub evaluations: usize,
    pub holds: bool,
}

const BATCH: usize = 4096;

/// Maximise the defect over random samples, a grid, and local ascent from
/// the best points.
pub(crate) fn search_defect(
    op: &BlockOperator,
    fs: &[TestFunction],
    gs: &[TestFunction],
    sampler: &SamplerSettings,
) -> Result<AssumptionResult> {
    sampler.validate()?;
    let d = Defect::new(op, fs, gs);
    let n = d.dim();
    let radius = sampler.radius;
    let keep = sampler.polish_starts.max(1);

    let merge = |mut a: Vec<(f64, usize, Vec<f64>)>, b: Vec<(f64, usize, Vec<f64>)>| {
        a.extend(b);
        a.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.cmp(&q.1)));
        a.truncate(keep);
        a
    };

    let batches = sampler.random_samples.div_ceil(BATCH);
    let random_best = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = crate::rng::stream(sampler.seed, b as u64);
            let count = BATCH.min(sampler.random_samples - b * BATCH);
            let mut top: Vec<(f64, usize, Vec<f64>)> = Vec::new();
            let mut x = vec![0.0; n];
            for k in 0..count {
                for v in x.iter_mut() {
                    *v = radius * (2.0 * rng.random::<f64>() - 1.0);
                }
                let val = d.value(&x);
                if top.len() < keep || val > top[top.len() - 1].0 {
                    top = merge(top, vec![(val, b * BATCH + k, x.clone())]);
                }
            }
            top
        })
        .reduce(Vec::new, merge);

    let mut per_axis = sampler.grid_per_axis;
    while per_axis >= 2 && (per_axis as f64).powi(n as i32) > sampler.max_grid_points as f64 {
        per_axis -= 1;
    }
    let mut grid_best = Vec::new();
    let mut grid_count = 0;
    if per_axis >= 2 {
        let mut x = vec![0.0; n];
        let base = sampler.random_samples;
        crate::function::quadrature::for_each_index(n, per_axis, |idx| {
            for (v, &i) in x.iter_mut().zip(idx) {
                *v = radius * (2.0 * i as f64 / (per_axis - 1) as f64 - 1.0);
            }
            let val = d.value(&x);
            if grid_best.len() < keep || val > grid_best_min(&grid_best) {
                grid_best = merge(std::mem::take(&mut grid_best), vec![(val, base + grid_count, x.clone())]);
            }
            grid_count += 1;
        });
    }
    let mut best = merge(random_best, grid_best);
    let mut evaluations = sampler.random_samples + grid_count;

    let opts = MinimizeOptions {
        max_iter: 200,
        ..MinimizeOptions::default()
    };
    let mut polished = Vec::new();
    for (val, idx, x0) in best.iter().take(sampler.polish_starts) {
        if !val.is_finite() {
            continue;
        }
        let m = minimize(
            |x, g| {
                let v = d.value_gradient(x, g);
                g.iter_mut().for_each(|t| *t = -*t);
                -v
            },
            x0,
            opts,
        );
        evaluations += m.iterations;
        // The search domain is the sampling box.
        let x: Vec<f64> = m.x.iter().map(|v| v.clamp(-radius, radius)).collect();
        let v = d.value(&x);
        if v.is_finite() && v > *val {
            polished.push((v, *idx, x));
        }
    }
    best = merge(best, polished);
    let (worst, _, x) = best
        .into_iter()
        .next()
        .ok_or_else(|| Error::internal("assumption search evaluated no points"))?;
    Ok(AssumptionResult {
        worst_violation: worst,
        witness: op.split_source(&x),
        evaluations,
        holds: worst <= ASSUMPTION_TOL,
    })
}

fn grid_best_min(v: &[(f64, usize, Vec<f64>)]) -> f64 {
    v.last().map(|t| t.0).unwrap_or(f64::NEG_INFINITY)
}

/// Sampled check of `Σ ν_j g_j((Ax)_j) ≤ Σ μ_i f_i(x_i)`.
pub fn check_basic_assumption(sc: &Scenario) -> Result<AssumptionResult> {
    sc.validate()?;
    let (fs, gs) = sc.assumption_families();
    search_defect(&sc.operator, &fs, &gs, &sc.sampler)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConclusionResult {
    pub measure: ReferenceMeasure,
    pub f_neg_log: Vec<f64>,
    pub g_neg_log: Vec<f64>,
    /// `Σ ν_j·neg_log(g_j)`.
    pub lhs: f64,
    /// `Σ μ_i·neg_log(f_i)`.
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// `tol·(1 + |rhs|)`.
    pub threshold: f64,
    pub pass: bool,
}

fn neg_logs(fs: &[TestFunction], measure: ReferenceMeasure, q: Option<&QuadratureSpec>, label: &str) -> Result<Vec<f64>> {
    fs.iter()
        .enumerate()
        .map(|(k, f)| {
            let nu = GaussianMeasure::new(f.dim(), measure)?;
            let spec = q.copied().unwrap_or_else(|| QuadratureSpec::for_function(f));
            integrate_exp_neg(f, &nu, &spec)
                .map(|r| r.neg_log)
                .map_err(|e| match e {
                    Error::Domain(m) => Error::Domain(format!("{label}_{k}: {m}")),
                    other => other,
                })
        })
        .collect()
}

/// The integral conclusion against `measure`.
pub fn conclusion_at(
    sc: &Scenario,
    measure: ReferenceMeasure,
    q: Option<&QuadratureSpec>,
    tol: f64,
) -> Result<ConclusionResult> {
    let f = neg_logs(&sc.f_family, measure, q, "f")?;
    let g = neg_logs(&sc.g_family, measure, q, "g")?;
    let lhs: f64 = g.iter().zip(&sc.operator.target.weights).map(|(v, w)| w * v).sum();
    let rhs: f64 = f.iter().zip(&sc.operator.source.weights).map(|(v, w)| w * v).sum();
    let margin = rhs - lhs;
    let threshold = tol * (1.0 + rhs.abs());
    Ok(ConclusionResult {
        measure,
        f_neg_log: f,
        g_neg_log: g,
        lhs,
        rhs,
        margin,
        threshold,
        pass: margin >= -threshold,
    })
}

/// The integral conclusion against the scenario's own measure.
pub fn check_conclusion(sc: &Scenario, q: Option<&QuadratureSpec>, tol: f64) -> Result<ConclusionResult> {
    sc.validate()?;
    conclusion_at(sc, sc.measure, q, tol)
}

/// One row of a scenario report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(name: impl Into<String>, value: f64, threshold: f64, pass: bool) -> Self {
        CheckRow {
            name: name.into(),
            value,
            threshold,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub rows: Vec<CheckRow>,
    pub assumption: AssumptionResult,
    pub conclusion: Option<ConclusionResult>,
    pub sweep: Vec<ConclusionResult>,
    pub pass: bool,
}

impl ScenarioReport {
    pub fn assumption_worst_violation(&self) -> f64 {
        self.assumption.worst_violation
    }

    pub fn margin(&self) -> Option<f64> {
        self.conclusion.as_ref().map(|c| c.margin)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Measures for the sweep; `None` uses the default sweep.
    pub sweep: Option<Vec<ReferenceMeasure>>,
    pub tol: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub quadrature: Option<QuadratureSpec>,
}

/// `τ ∈ {1, 4, 16}` and the flat measure.
pub fn default_sweep() -> Vec<ReferenceMeasure> {
    vec![
        ReferenceMeasure::Gaussian { tau: 1.0 },
        ReferenceMeasure::Gaussian { tau: 4.0 },
        ReferenceMeasure::Gaussian { tau: 16.0 },
        ReferenceMeasure::Flat,
    ]
}

fn sweep_label(m: &ReferenceMeasure) -> String {
    format!("conclusion[tau={m}]")
}

/// Structural checks, the assumption, the conclusion and the sweep.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<ScenarioReport> {
    let mut sc = sc.clone();
    if let Some(n) = opts.samples {
        sc.sampler.random_samples = n;
    }
    if let Some(seed) = opts.seed {
        sc.sampler.seed = seed;
    }
    sc.validate()?;
    let tol = opts.tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(Error::usage("tolerance must be finite and ≥ 0"));
    }
    let q = opts.quadrature.as_ref();
    let a = &sc.operator;
    let mut rows = Vec::new();

    let norm = a.weighted_norm();
    rows.push(CheckRow::new("norm_condition", norm, 1.0 + NORM_TOL, norm <= 1.0 + NORM_TOL));
    match &sc.projections {
        Some(p) => {
            let c = projection_condition_check(a, p)?;
            rows.push(CheckRow::new("projection_condition", c.deviation, c.threshold, c.pass));
        }
        None if a.is_square_blocked() => {
            let c = constant_condition_check(a)?;
            rows.push(CheckRow::new("constant_condition", c.deviation, c.threshold, c.pass));
        }
        None => {
            return Err(Error::usage(
                "rectangular blocks need a projection family for the constant condition",
            ))
        }
    }
    if let Some(dec) = &sc.decomposition {
        let c = identity_decomposition_check(&dec.vectors, &dec.weights)?;
        rows.push(CheckRow::new("decomposition", c.deviation, 1e-10, c.pass));
        rows.push(CheckRow::new("decomposition_trace", c.trace, dec.vectors[0].len() as f64, c.trace_pass));
    }
    let mass_required = sc.measure.is_flat() || sc.gaussian_tilt;
    let balanced = sc.masses_balance();
    rows.push(CheckRow::new(
        "mass_balance",
        sc.mass_defect().abs(),
        MASS_TOL,
        balanced || !mass_required,
    ));

    let assumption = check_basic_assumption(&sc)?;
    rows.push(CheckRow::new(
        "assumption",
        assumption.worst_violation,
        ASSUMPTION_TOL,
        assumption.holds,
    ));

    let conclusion = if !mass_required || balanced {
        let c = conclusion_at(&sc, sc.measure, q, tol)?;
        rows.push(CheckRow::new("conclusion", c.margin, -c.threshold, c.pass));
        Some(c)
    } else {
        None
    };

    let sweep_measures = match (&opts.sweep, sc.gaussian_tilt) {
        (Some(list), false) => list.clone(),
        (None, false) => default_sweep(),
        (_, true) => Vec::new(),
    };
    let mut sweep = Vec::new();
    for m in sweep_measures {
        m.validate()?;
        if m == sc.measure || (m.is_flat() && !balanced) {
            continue;
        }
        let c = conclusion_at(&sc, m, q, tol)?;
        rows.push(CheckRow::new(sweep_label(&m), c.margin, -c.threshold, c.pass));
        sweep.push(c);
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(ScenarioReport {
        name: sc.name.clone(),
        rows,
        assumption,
        conclusion,
        sweep,
        pass,
    })
}

/// Margin of the conclusion for a sweep grid, one row per measure.
pub fn tau_sweep(sc: &Scenario, measures: &[ReferenceMeasure], tol: f64) -> Result<Vec<ConclusionResult>> {
    sc.validate()?;
    measures
        .iter()
        .map(|m| {
            if m.is_flat() && !sc.masses_balance() {
                return Err(Error::domain("the flat conclusion needs balanced masses"));
            }
            conclusion_at(sc, *m, None, tol)
        })
        .collect()
}

#[cfg(test)]
mod tests;
