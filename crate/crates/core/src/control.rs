//! Controlled diffusions `dX = u dr + dB` started at the origin, their cost
//! `f(X_T) + ½∫|u|²dr`, and the martingale diagnostic
//! `M_r = f_r(X_r) + ½∫_0^r |u|²`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{integrate_exp_neg, GaussianMeasure, QuadratureSpec, TestFunction};
use crate::heat::{SemigroupEvaluator, Workspace};
use crate::linalg::pairwise_sum;
use crate::rng::stream;

/// Discretisation allowance per unit step: the identity check tolerates a
/// bias of `DISCRETIZATION_CONSTANT · Δr` (0.01 at 256 steps on `[0, 1]`).
pub const DISCRETIZATION_CONSTANT: f64 = 2.56;

/// Largest fraction of paths that may be dropped for a non-finite drift.
pub const MAX_FLAGGED_FRACTION: f64 = 0.01;

/// Number of martingale checkpoints, evenly spaced on `[0, T]`.
pub const CHECKPOINTS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftPolicy {
    /// `u_r = −∇f_r(X_r)`.
    OptimalFeedback,
    Zero,
    Constant(Vec<f64>),
    /// `u_r = −λ∇f_r(X_r)` with `λ ≠ 1`.
    PerturbedOptimal { scale: f64 },
}

impl DriftPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            DriftPolicy::OptimalFeedback => "optimal",
            DriftPolicy::Zero => "zero",
            DriftPolicy::Constant(_) => "constant",
            DriftPolicy::PerturbedOptimal { .. } => "perturbed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn new(horizon: f64, n_steps: usize, n_paths: usize, seed: u64) -> Result<Self> {
        let c = SimulationConfig {
            horizon,
            n_steps,
            n_paths,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::usage("horizon must be positive and finite"));
        }
        if self.n_steps < 8 {
            return Err(Error::usage(format!("need at least 8 steps, got {}", self.n_steps)));
        }
        if self.n_paths < 100 {
            return Err(Error::usage(format!("need at least 100 paths, got {}", self.n_paths)));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    fn checkpoint_steps(&self) -> Vec<usize> {
        (0..CHECKPOINTS)
            .map(|k| (k * self.n_steps) / (CHECKPOINTS - 1))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    /// `mean_terminal_f + mean_energy`.
    pub mean_cost: f64,
    pub std_error: f64,
    pub mean_terminal_f: f64,
    pub mean_energy: f64,
    pub n_paths: usize,
    pub n_flagged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub r: f64,
    pub mean: f64,
    pub variance: f64,
}

impl Checkpoint {
    pub fn std_error(&self, n_paths: usize) -> f64 {
        (self.variance / n_paths as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleDiag {
    pub checkpoints: Vec<Checkpoint>,
    /// Least-squares slope of the checkpoint means against `r`.
    pub drift_of_mean: f64,
    pub n_paths: usize,
}

impl MartingaleDiag {
    /// Largest `|mean M_r − M_0|` in units of the standard error at `r`.
    pub fn max_deviation_sigmas(&self) -> f64 {
        let m0 = self.checkpoints[0].mean;
        self.checkpoints[1..]
            .iter()
            .map(|c| sigmas(c.mean - m0, c.std_error(self.n_paths)).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_flat(&self, k_sigma: f64) -> bool {
        self.max_deviation_sigmas() <= k_sigma
    }

    /// Means never drop by more than `k_sigma` standard errors between
    /// consecutive checkpoints.
    pub fn is_nondecreasing(&self, k_sigma: f64) -> bool {
        self.checkpoints.windows(2).all(|w| {
            let se = (w[0].variance + w[1].variance).sqrt() / (self.n_paths as f64).sqrt();
            w[1].mean - w[0].mean >= -k_sigma * se
        })
    }

    /// Increase from `M_0` to the final checkpoint in standard errors.
    pub fn final_rise_sigmas(&self) -> f64 {
        let last = self.checkpoints.last().expect("checkpoints");
        sigmas(last.mean - self.checkpoints[0].mean, last.std_error(self.n_paths))
    }
}

fn sigmas(delta: f64, se: f64) -> f64 {
    if se > 0.0 {
        delta / se
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(delta)
    }
}

struct PathResult {
    terminal: f64,
    energy: f64,
    m: [f64; CHECKPOINTS],
    flagged: bool,
}

fn run_path(ev: &SemigroupEvaluator, policy: &DriftPolicy, cfg: &SimulationConfig, index: usize) -> PathResult {
    let n = ev.dim();
    let dt = cfg.step();
    let sq = dt.sqrt();
    let mut rng = stream(cfg.seed, index as u64);
    let mut ws = Workspace::new(n);
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut energy = 0.0;
    let mut m = [0.0; CHECKPOINTS];
    let marks = cfg.checkpoint_steps();
    let mut next_mark = 0;
    let mut flagged = false;
    let f = ev.function();
    for k in 0..=cfg.n_steps {
        let r = k as f64 * dt;
        if next_mark < CHECKPOINTS && marks[next_mark] == k {
            let fr = if k == cfg.n_steps {
                f.value(&x)
            } else {
                ev.potential_unchecked(r, &x)
            };
            m[next_mark] = fr + energy;
            next_mark += 1;
        }
        if k == cfg.n_steps {
            break;
        }
        match policy {
            DriftPolicy::Zero => u.iter_mut().for_each(|v| *v = 0.0),
            DriftPolicy::Constant(v) => u.copy_from_slice(v),
            DriftPolicy::OptimalFeedback | DriftPolicy::PerturbedOptimal { .. } => {
                let lambda = match policy {
                    DriftPolicy::PerturbedOptimal { scale } => *scale,
                    _ => 1.0,
                };
                // r_k ≤ T − Δr, so the drift is never evaluated at the horizon.
                let ok = ev.grad_potential_into(r.min(cfg.horizon - dt), &x, &mut ws, &mut u);
                if !ok {
                    flagged = true;
                    break;
                }
                u.iter_mut().for_each(|v| *v *= -lambda);
            }
        }
        let mut u2 = 0.0;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            x[i] += u[i] * dt + sq * z;
            u2 += u[i] * u[i];
        }
        energy += 0.5 * u2 * dt;
        if !(energy.is_finite() && x.iter().all(|v| v.is_finite())) {
            flagged = true;
            break;
        }
    }
    let terminal = if flagged { f64::NAN } else { f.value(&x) };
    if !flagged && !(terminal.is_finite() && m.iter().all(|v| v.is_finite())) {
        flagged = true;
    }
    PathResult {
        terminal,
        energy,
        m,
        flagged,
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = if values.len() > 1 { pairwise_sum(&dev) / (n - 1.0) } else { 0.0 };
    (mean, var)
}

/// Simulate `cfg.n_paths` Euler–Maruyama paths under `policy` and estimate
/// the cost together with the martingale diagnostic.
///
/// Each path draws from its own stream `(seed, path index)`, and means are
/// reduced by pairwise summation in path order, so the result does not
/// depend on the thread count.
pub fn simulate(
    f: &TestFunction,
    policy: &DriftPolicy,
    cfg: &SimulationConfig,
    ev: &SemigroupEvaluator,
) -> Result<(DriftEstimate, MartingaleDiag)> {
    cfg.validate()?;
    if ev.function() != f {
        return Err(Error::usage("evaluator was built for a different function"));
    }
    if (ev.horizon() - cfg.horizon).abs() > 0.0 {
        return Err(Error::usage("evaluator horizon differs from the simulation horizon"));
    }
    if f.lower_bound() == f64::NEG_INFINITY {
        return Err(Error::domain("cost needs f bounded below"));
    }
    match policy {
        DriftPolicy::Constant(v) if v.len() != f.dim() => {
            return Err(Error::usage("constant drift has the wrong dimension"));
        }
        DriftPolicy::PerturbedOptimal { scale } if !scale.is_finite() || *scale == 1.0 => {
            return Err(Error::usage("perturbed drift needs a finite scale different from 1"));
        }
        _ => {}
    }
    let paths: Vec<PathResult> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| run_path(ev, policy, cfg, i))
        .collect();
    let flagged = paths.iter().filter(|p| p.flagged).count();
    if flagged as f64 > MAX_FLAGGED_FRACTION * cfg.n_paths as f64 {
        return Err(Error::domain(format!(
            "{flagged} of {} paths hit a non-finite drift",
            cfg.n_paths
        )));
    }
    let good: Vec<&PathResult> = paths.iter().filter(|p| !p.flagged).collect();
    let terminal: Vec<f64> = good.iter().map(|p| p.terminal).collect();
    let energy: Vec<f64> = good.iter().map(|p| p.energy).collect();
    let cost: Vec<f64> = good.iter().map(|p| p.terminal + p.energy).collect();
    let n = good.len();
    let (mt, _) = mean_var(&terminal);
    let (me, _) = mean_var(&energy);
    let (_, vc) = mean_var(&cost);
    let estimate = DriftEstimate {
        mean_cost: mt + me,
        std_error: (vc / n as f64).sqrt(),
        mean_terminal_f: mt,
        mean_energy: me,
        n_paths: n,
        n_flagged: flagged,
    };
    let marks = cfg.checkpoint_steps();
    let checkpoints: Vec<Checkpoint> = (0..CHECKPOINTS)
        .map(|k| {
            let vals: Vec<f64> = good.iter().map(|p| p.m[k]).collect();
            let (mean, variance) = mean_var(&vals);
            Checkpoint {
                r: marks[k] as f64 * cfg.step(),
                mean,
                variance,
            }
        })
        .collect();
    let drift_of_mean = slope(&checkpoints);
    Ok((
        estimate,
        MartingaleDiag {
            checkpoints,
            drift_of_mean,
            n_paths: n,
        },
    ))
}

fn slope(cps: &[Checkpoint]) -> f64 {
    let n = cps.len() as f64;
    let rm = cps.iter().map(|c| c.r).sum::<f64>() / n;
    let mm = cps.iter().map(|c| c.mean).sum::<f64>() / n;
    let num: f64 = cps.iter().map(|c| (c.r - rm) * (c.mean - mm)).sum();
    let den: f64 = cps.iter().map(|c| (c.r - rm) * (c.r - rm)).sum();
    num / den
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorellReport {
    /// `−log P_T e^{-f}(0)` by quadrature.
    pub quadrature_value: f64,
    pub optimal: DriftEstimate,
    pub zero: DriftEstimate,
    pub optimal_diag: MartingaleDiag,
    pub zero_diag: MartingaleDiag,
    /// `optimal.mean_cost − quadrature_value`.
    pub gap: f64,
    /// `zero.mean_cost − quadrature_value`.
    pub zero_gap: f64,
    pub tol_sigmas: f64,
    pub discretization_constant: f64,
    /// `tol_sigmas·std_error + C·Δr`.
    pub allowance: f64,
    pub optimal_pass: bool,
    pub zero_pass: bool,
    pub pass: bool,
}

/// Compare the Monte Carlo cost of the optimal drift with the quadrature
/// value of `−log P_T e^{-f}(0)`, and check that the zero drift is not
/// cheaper.
pub fn verify_borell_identity(
    f: &TestFunction,
    horizon: f64,
    cfg: &SimulationConfig,
    q: &QuadratureSpec,
    tol_sigmas: f64,
) -> Result<BorellReport> {
    if !(tol_sigmas >= 0.0) {
        return Err(Error::usage("tolerance in standard errors must be ≥ 0"));
    }
    if (cfg.horizon - horizon).abs() > 0.0 {
        return Err(Error::usage("configuration horizon differs from T"));
    }
    let nu = GaussianMeasure::standard(f.dim(), horizon)?;
    let quad = integrate_exp_neg(f, &nu, q)?;
    if quad.underflow {
        return Err(Error::domain("P_T e^{-f}(0) underflows"));
    }
    let ev = SemigroupEvaluator::with_defaults(f.clone(), horizon)?;
    let (opt, opt_diag) = simulate(f, &DriftPolicy::OptimalFeedback, cfg, &ev)?;
    let (zero, zero_diag) = simulate(f, &DriftPolicy::Zero, cfg, &ev)?;
    let gap = opt.mean_cost - quad.neg_log;
    let zero_gap = zero.mean_cost - quad.neg_log;
    let allowance = tol_sigmas * opt.std_error + DISCRETIZATION_CONSTANT * cfg.step();
    let optimal_pass = gap.abs() <= allowance;
    let zero_pass = zero_gap >= -tol_sigmas * zero.std_error;
    Ok(BorellReport {
        quadrature_value: quad.neg_log,
        optimal: opt,
        zero,
        optimal_diag: opt_diag,
        zero_diag,
        gap,
        zero_gap,
        tol_sigmas,
        discretization_constant: DISCRETIZATION_CONSTANT,
        allowance,
        optimal_pass,
        zero_pass,
        pass: optimal_pass && zero_pass,
    })
}

/// Smallest `N` with `a·√(F0/N)·e^{12b²T + (F0+n)/8} < δ`.
pub fn truncation_level(a: f64, b: f64, horizon: f64, f0: f64, n: u32, delta: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::usage("truncation needs a, b ≥ 0"));
    }
    if !(f0 > 0.0 && delta > 0.0 && horizon >= 0.0) {
        return Err(Error::usage("truncation needs F0 > 0, δ > 0 and T ≥ 0"));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    let x = (a / delta).powi(2) * f0 * (24.0 * b * b * horizon + (f0 + n as f64) / 4.0).exp();
    if !x.is_finite() {
        return Err(Error::Resource("truncation level overflows".into()));
    }
    // The inequality is strict, so an exact integer bound moves up by one.
    Ok(x.floor() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use std::f64::consts::LN_2;

    fn cfg(steps: usize, paths: usize) -> SimulationConfig {
        SimulationConfig::new(1.0, steps, paths, 17).unwrap()
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncation_level(0.0, 3.0, 2.0, 1.0, 4, 0.5).unwrap(), 0.0);
        assert_eq!(truncation_level(1.0, 0.0, 1.0, 1.0, 1, 0.1).unwrap(), 165.0);
        assert_eq!(truncation_level(1.0, 0.1, 1.0, 1.0, 1, 0.1).unwrap(), 210.0);
    }

    #[test]
    fn truncation_is_the_smallest_admissible_level() {
        for &(a, b, t, f0, n, d) in &[(1.0, 0.0, 1.0, 1.0, 1, 0.1), (2.0, 0.3, 0.5, 2.0, 3, 0.05)] {
            let big_n = truncation_level(a, b, t, f0, n, d).unwrap();
            let bound = |m: f64| a * (f0 / m).sqrt() * (12.0 * b * b * t + (f0 + n as f64) / 8.0).exp();
            assert!(bound(big_n) < d);
            assert!(bound(big_n - 1.0) >= d);
        }
    }

    #[test]
    fn constant_zero_policy_is_exact() {
        let f = TestFunction::constant(1, 3.0);
        let ev = SemigroupEvaluator::with_defaults(f.clone(), 1.0).unwrap();
        let (e, d) = simulate(&f, &DriftPolicy::Zero, &cfg(16, 200), &ev).unwrap();
        assert_eq!(e.mean_cost, 3.0);
        assert_eq!(e.std_error, 0.0);
        assert!(d.checkpoints.iter().all(|c| c.mean == 3.0));
    }

    #[test]
    fn seed_determinism_and_decomposition() {
        let f = TestFunction::half_square(1);
        let ev = SemigroupEvaluator::with_defaults(f.clone(), 1.0).unwrap();
        let c = cfg(32, 500);
        let (a, _) = simulate(&f, &DriftPolicy::OptimalFeedback, &c, &ev).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (b, _) = pool.install(|| simulate(&f, &DriftPolicy::OptimalFeedback, &c, &ev).unwrap());
        assert_eq!(a.mean_cost.to_bits(), b.mean_cost.to_bits());
        assert_eq!(a.mean_cost, a.mean_terminal_f + a.mean_energy);
    }

    #[test]
    fn half_square_energy_split() {
        // Under the optimal drift X_r ~ N(0, r(2−r)/2), so E f(X_1) = ¼ and
        // E ½∫X_r²/(2−r)² dr = (2ln2 − 1)/4.
        let f = TestFunction::half_square(1);
        let ev = SemigroupEvaluator::with_defaults(f.clone(), 1.0).unwrap();
        let (e, _) = simulate(&f, &DriftPolicy::OptimalFeedback, &cfg(128, 20_000), &ev).unwrap();
        let energy = (2.0 * LN_2 - 1.0) / 4.0;
        assert!((e.mean_terminal_f - 0.25).abs() < 0.01, "{}", e.mean_terminal_f);
        assert!((e.mean_energy - energy).abs() < 0.005, "{}", e.mean_energy);
    }

    #[test]
    fn non_optimal_policies_cost_more() {
        let f = TestFunction::min_of(vec![
            Quadratic::isotropic(1.0, &[1.0], 0.0),
            Quadratic::isotropic(1.0, &[-1.0], 0.0),
        ])
        .unwrap();
        let ev = SemigroupEvaluator::with_defaults(f.clone(), 1.0).unwrap();
        let c = cfg(64, 4000);
        let (opt, od) = simulate(&f, &DriftPolicy::OptimalFeedback, &c, &ev).unwrap();
        assert!(od.is_flat(4.0), "{:?}", od);
        for p in [
            DriftPolicy::Zero,
            DriftPolicy::Constant(vec![0.5]),
            DriftPolicy::PerturbedOptimal { scale: 0.5 },
            DriftPolicy::PerturbedOptimal { scale: 1.6 },
        ] {
            let (e, d) = simulate(&f, &p, &c, &ev).unwrap();
            let se = (e.std_error.powi(2) + opt.std_error.powi(2)).sqrt();
            assert!(e.mean_cost >= opt.mean_cost - 4.0 * se, "{p:?}");
            assert!(d.is_nondecreasing(4.0), "{p:?}: {d:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::new(1.0, 4, 1000, 0).is_err());
        assert!(SimulationConfig::new(1.0, 16, 10, 0).is_err());
        assert!(SimulationConfig::new(0.0, 16, 1000, 0).is_err());
        let f = TestFunction::half_square(1);
        let ev = SemigroupEvaluator::with_defaults(f.clone(), 2.0).unwrap();
        assert!(simulate(&f, &DriftPolicy::Zero, &cfg(16, 100), &ev).is_err());
    }

    #[test]
    fn borell_constant_function() {
        let f = TestFunction::constant(1, 3.0);
        let r = verify_borell_identity(&f, 1.0, &cfg(16, 200), &QuadratureSpec::default_for_dim(1), 3.0).unwrap();
        assert_eq!(r.quadrature_value, 3.0);
        assert_eq!(r.optimal.mean_cost, 3.0);
        assert_eq!(r.zero.mean_cost, 3.0);
        assert!(r.pass);
    }
}
