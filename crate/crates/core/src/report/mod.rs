//! Scenario files, run records and the command implementations behind the
//! `borell-lab` binary.
//!
//! Reports are line-oriented `key=value` blocks (one `[check]` block per
//! check) or CSV tables. Everything except the trailing `wall_time_s` line
//! is a deterministic function of the inputs and the seed.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{simulate, DriftPolicy, SimulationConfig, DISCRETIZATION_CONSTANT};
use crate::error::{Error, Result};
use crate::function::{integrate_exp_neg, GaussianMeasure, Quadratic, QuadratureSpec, ReferenceMeasure, TestFunction};
use crate::harness::{builtin, run_scenario, tau_sweep, CheckRow, RunOptions, Scenario, DEFAULT_TOL};
use crate::heat::SemigroupEvaluator;
use crate::operator::{exotic_operator, NORM_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Martingale diagnostics are judged at this many standard errors.
pub const MARTINGALE_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: Scenario,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parse a scenario file and validate the scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(parse_error)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Usage(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    file.scenario.validate()?;
    Ok(file.scenario)
}

/// The scenario as a self-contained file.
pub fn dump_scenario(sc: &Scenario) -> String {
    let file = ScenarioFile {
        schema_version: SCHEMA_VERSION,
        scenario: sc.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("scenarios serialize");
    s.push('\n');
    s
}

/// A path to a scenario file, or a builtin name.
pub fn load_scenario(spec: &str) -> Result<Scenario> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        parse_scenario(&std::fs::read_to_string(path)?)
    } else {
        builtin(spec)
    }
}

/// `half-square[:n]`, `const:C[:n]`, `double-well`, or a path to a JSON
/// function description.
pub fn parse_function(spec: &str) -> Result<TestFunction> {
    let parts: Vec<&str> = spec.split(':').collect();
    let dim = |s: Option<&&str>| -> Result<usize> {
        match s {
            None => Ok(1),
            Some(t) => t
                .parse::<usize>()
                .ok()
                .filter(|d| *d >= 1)
                .ok_or_else(|| Error::Usage(format!("bad dimension `{t}` in `{spec}`"))),
        }
    };
    match parts[0] {
        "half-square" if parts.len() <= 2 => Ok(TestFunction::half_square(dim(parts.get(1))?)),
        "const" if (2..=3).contains(&parts.len()) => {
            let c: f64 = parts[1]
                .parse()
                .ok()
                .filter(|c: &f64| c.is_finite())
                .ok_or_else(|| Error::Usage(format!("bad constant `{}`", parts[1])))?;
            Ok(TestFunction::constant(dim(parts.get(2))?, c))
        }
        "double-well" if parts.len() == 1 => TestFunction::min_of(vec![
            Quadratic::isotropic(1.0, &[1.0], 0.0),
            Quadratic::isotropic(1.0, &[-1.0], 0.0),
        ]),
        _ => {
            let path = std::path::Path::new(spec);
            if !path.is_file() {
                return Err(Error::Usage(format!(
                    "unknown function `{spec}`; use half-square[:n], const:C[:n], double-well or a JSON file"
                )));
            }
            serde_json::from_str(&std::fs::read_to_string(path)?).map_err(parse_error)
        }
    }
}

/// Comma-separated τ values; `flat` names the flat measure. Empty input
/// gives an empty list.
pub fn parse_tau_list(s: &str) -> Result<Vec<ReferenceMeasure>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            if t.eq_ignore_ascii_case("flat") {
                Ok(ReferenceMeasure::Flat)
            } else {
                let tau: f64 = t.parse().map_err(|_| Error::Usage(format!("bad τ value `{t}`")))?;
                ReferenceMeasure::gaussian(tau)
            }
        })
        .collect()
}

/// `start:end:count`, evenly spaced and inclusive; count 0 is empty.
pub fn parse_range(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Usage(format!("bad range `{s}`; expected start:end:count"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

/// Exit code for an error: 2 for usage and parse errors, 3 for numerical ones.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Parse { .. } | Error::Io(_) => 2,
        Error::Domain(_) | Error::Resource(_) | Error::Internal(_) => 3,
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// SHA-256 of the canonical command inputs.
pub fn inputs_digest(command: &str, inputs: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    h.update(serde_json::to_string(inputs).expect("json").as_bytes());
    hex(&h.finalize())
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// The record of one command run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub command: String,
    pub input: String,
    pub digest: String,
    pub seed: u64,
    /// Free-form measurements (margins, estimates, standard errors).
    pub fields: Vec<(String, String)>,
    pub checks: Vec<CheckRow>,
    /// An optional data table, e.g. of a sweep.
    pub table: Option<Table>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl RunRecord {
    /// Everything except the wall time.
    pub fn body(&self, format: Format) -> String {
        let mut s = String::new();
        match format {
            Format::Text => {
                let _ = writeln!(s, "command={}", self.command);
                let _ = writeln!(s, "input={}", self.input);
                let _ = writeln!(s, "digest={}", self.digest);
                let _ = writeln!(s, "seed={}", self.seed);
                for (k, v) in &self.fields {
                    let _ = writeln!(s, "{k}={v}");
                }
                for c in &self.checks {
                    let _ = writeln!(s, "\n[check]");
                    let _ = writeln!(s, "name={}", c.name);
                    let _ = writeln!(s, "value={}", num(c.value));
                    let _ = writeln!(s, "threshold={}", num(c.threshold));
                    let _ = writeln!(s, "pass={}", c.pass);
                }
                if let Some(t) = &self.table {
                    for row in &t.rows {
                        let _ = writeln!(s, "\n[row]");
                        for (h, v) in t.header.iter().zip(row) {
                            let _ = writeln!(s, "{h}={v}");
                        }
                    }
                }
                let _ = writeln!(s, "\nresult={}", if self.pass { "pass" } else { "fail" });
            }
            Format::Csv => match &self.table {
                Some(t) => s.push_str(&t.to_csv()),
                None => {
                    s.push_str("name,value,threshold,pass\n");
                    for c in &self.checks {
                        let _ = writeln!(s, "{},{},{},{}", csv_escape(&c.name), num(c.value), num(c.threshold), c.pass);
                    }
                }
            },
        }
        s
    }

    /// The body followed by the wall time (text format only).
    pub fn render(&self, format: Format) -> String {
        let mut s = self.body(format);
        if format == Format::Text {
            let _ = writeln!(s, "wall_time_s={:.3}", self.wall_time_s);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(|v| csv_escape(v)).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Header of the exotic parameter sweep.
pub const EXOTIC_SWEEP_HEADER: [&str; 9] = [
    "b",
    "eps",
    "min_eigenvalue",
    "weighted_norm",
    "valid",
    "predicted_valid",
    "assumption_worst_violation",
    "margin",
    "pass",
];

/// Header of the τ sweep.
pub const TAU_SWEEP_HEADER: [&str; 6] = ["tau", "lhs", "rhs", "margin", "threshold", "pass"];

fn field(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
pub fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn fieldf(k: &str, v: f64) -> (String, String) {
    (k.to_string(), num(v))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyArgs {
    pub target: String,
    /// `Some(empty)` disables the sweep.
    pub tau: Option<Vec<ReferenceMeasure>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

fn tau_json(tau: &Option<Vec<ReferenceMeasure>>) -> serde_json::Value {
    serde_json::to_value(tau).expect("json")
}

/// Run every check of a scenario.
pub fn cmd_verify(args: &VerifyArgs) -> Result<RunRecord> {
    let start = Instant::now();
    let sc = load_scenario(&args.target)?;
    let opts = RunOptions {
        sweep: args.tau.clone(),
        tol: args.tol,
        samples: args.samples,
        seed: args.seed,
        quadrature: None,
    };
    let seed = args.seed.unwrap_or(sc.sampler.seed);
    let inputs = serde_json::json!({
        "scenario": sc,
        "tau": tau_json(&args.tau),
        "samples": args.samples,
        "seed": seed,
        "tol": args.tol,
    });
    let r = run_scenario(&sc, &opts)?;
    let mut fields = vec![field("scenario", &r.name), field("measure", sc.measure)];
    fields.push(fieldf("assumption_worst_violation", r.assumption.worst_violation));
    fields.push(field(
        "assumption_witness",
        serde_json::to_string(&r.assumption.witness).expect("json"),
    ));
    fields.push(field("assumption_evaluations", r.assumption.evaluations));
    if let Some(c) = &r.conclusion {
        fields.push(fieldf("lhs", c.lhs));
        fields.push(fieldf("rhs", c.rhs));
        fields.push(fieldf("margin", c.margin));
    }
    Ok(RunRecord {
        command: "verify".into(),
        input: args.target.clone(),
        digest: inputs_digest("verify", &inputs),
        seed,
        fields,
        checks: r.rows,
        table: None,
        pass: r.pass,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyChoice {
    Optimal,
    Zero,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BorellArgs {
    pub function: String,
    pub horizon: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub policy: PolicyChoice,
    /// Tolerance in standard errors.
    pub tol: f64,
}

impl Default for BorellArgs {
    fn default() -> Self {
        BorellArgs {
            function: "half-square".into(),
            horizon: 1.0,
            steps: 256,
            paths: 20_000,
            seed: crate::rng::DEFAULT_SEED,
            policy: PolicyChoice::Both,
            tol: 3.0,
        }
    }
}

/// Quadrature against Monte Carlo for the stochastic-control formula.
pub fn cmd_borell(args: &BorellArgs) -> Result<RunRecord> {
    let start = Instant::now();
    if !(args.tol >= 0.0 && args.tol.is_finite()) {
        return Err(Error::Usage("--tol must be finite and ≥ 0".into()));
    }
    let f = parse_function(&args.function)?;
    let cfg = SimulationConfig::new(args.horizon, args.steps, args.paths, args.seed)?;
    let inputs = serde_json::json!({
        "function": f,
        "horizon": args.horizon,
        "steps": args.steps,
        "paths": args.paths,
        "seed": args.seed,
        "policy": format!("{:?}", args.policy),
        "tol": args.tol,
    });
    let nu = GaussianMeasure::standard(f.dim(), args.horizon)?;
    let quad = integrate_exp_neg(&f, &nu, &QuadratureSpec::for_function(&f))?;
    if quad.underflow {
        return Err(Error::Domain("P_T e^{-f}(0) underflows".into()));
    }
    let ev = SemigroupEvaluator::with_defaults(f.clone(), args.horizon)?;
    let mut fields = vec![
        field("function", &args.function),
        fieldf("horizon", args.horizon),
        field("steps", args.steps),
        field("paths", args.paths),
        fieldf("quadrature_value", quad.neg_log),
    ];
    let mut checks = Vec::new();
    if matches!(args.policy, PolicyChoice::Optimal | PolicyChoice::Both) {
        let (est, diag) = simulate(&f, &DriftPolicy::OptimalFeedback, &cfg, &ev)?;
        let gap = est.mean_cost - quad.neg_log;
        let allowance = args.tol * est.std_error + DISCRETIZATION_CONSTANT * cfg.step();
        fields.push(fieldf("optimal_cost", est.mean_cost));
        fields.push(fieldf("optimal_std_error", est.std_error));
        fields.push(fieldf("optimal_gap", gap));
        fields.push(field("optimal_flagged", est.n_flagged));
        fields.push(fieldf("optimal_martingale_drift", diag.drift_of_mean));
        checks.push(CheckRow {
            name: "borell_identity".into(),
            value: gap.abs(),
            threshold: allowance,
            pass: gap.abs() <= allowance,
        });
        let dev = diag.max_deviation_sigmas();
        checks.push(CheckRow {
            name: "optimal_martingale".into(),
            value: dev,
            threshold: MARTINGALE_SIGMAS,
            pass: dev <= MARTINGALE_SIGMAS,
        });
    }
    if matches!(args.policy, PolicyChoice::Zero | PolicyChoice::Both) {
        let (est, diag) = simulate(&f, &DriftPolicy::Zero, &cfg, &ev)?;
        let gap = est.mean_cost - quad.neg_log;
        fields.push(fieldf("zero_cost", est.mean_cost));
        fields.push(fieldf("zero_std_error", est.std_error));
        fields.push(fieldf("zero_gap", gap));
        fields.push(fieldf("zero_final_rise_sigmas", diag.final_rise_sigmas()));
        checks.push(CheckRow {
            name: "zero_not_cheaper".into(),
            value: gap,
            threshold: -args.tol * est.std_error,
            pass: gap >= -args.tol * est.std_error,
        });
        checks.push(CheckRow {
            name: "zero_submartingale".into(),
            value: diag.final_rise_sigmas(),
            threshold: -MARTINGALE_SIGMAS,
            pass: diag.is_nondecreasing(MARTINGALE_SIGMAS),
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(RunRecord {
        command: "borell".into(),
        input: args.function.clone(),
        digest: inputs_digest("borell", &inputs),
        seed: args.seed,
        fields,
        checks,
        table: None,
        pass,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepArgs {
    /// Scenario for a τ sweep; ignored by the exotic grid.
    pub target: Option<String>,
    pub b: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub tau: Option<Vec<ReferenceMeasure>>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

/// Validity of the exotic operator predicted by `b² + ε² ≤ b`, with the
/// same slack as the eigenvalue test.
pub fn exotic_predicted_valid(b: f64, eps: f64) -> bool {
    2.0 * (b - b * b - eps * eps) >= -NORM_TOL
}

/// A table of margins over a parameter grid.
pub fn cmd_sweep(args: &SweepArgs) -> Result<RunRecord> {
    let start = Instant::now();
    let tol = args.tol.unwrap_or(DEFAULT_TOL);
    match (&args.b, &args.eps) {
        (Some(bs), Some(es)) => {
            let seed = args.seed.unwrap_or(crate::rng::DEFAULT_SEED);
            let inputs = serde_json::json!({"b": bs, "eps": es, "samples": args.samples, "seed": seed, "tol": tol});
            let mut rows = Vec::new();
            let mut pass = true;
            for &b in bs {
                for &e in es {
                    let ex = exotic_operator(b, e);
                    let predicted = exotic_predicted_valid(b, e);
                    let sc = builtin(&format!("exotic({b},{e})"))?;
                    let opts = RunOptions {
                        sweep: Some(Vec::new()),
                        tol: Some(tol),
                        samples: args.samples,
                        seed: Some(seed),
                        quadrature: None,
                    };
                    let r = run_scenario(&sc, &opts)?;
                    let ok = ex.valid == predicted && (!ex.valid || r.pass);
                    pass &= ok;
                    rows.push(vec![
                        num(b),
                        num(e),
                        num(ex.min_eigenvalue),
                        num(ex.operator.weighted_norm()),
                        ex.valid.to_string(),
                        predicted.to_string(),
                        num(r.assumption.worst_violation),
                        r.margin().map(num).unwrap_or_default(),
                        ok.to_string(),
                    ]);
                }
            }
            Ok(RunRecord {
                command: "sweep".into(),
                input: "exotic".into(),
                digest: inputs_digest("sweep", &inputs),
                seed,
                fields: vec![field("grid_points", rows.len())],
                checks: Vec::new(),
                table: Some(Table {
                    header: EXOTIC_SWEEP_HEADER.to_vec(),
                    rows,
                }),
                pass,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        }
        (None, None) => {
            let target = args
                .target
                .as_deref()
                .ok_or_else(|| Error::Usage("sweep needs a scenario, or --b and --eps".into()))?;
            let sc = load_scenario(target)?;
            let measures = args.tau.clone().unwrap_or_else(crate::harness::default_sweep);
            let inputs = serde_json::json!({"scenario": sc, "tau": measures, "tol": tol});
            let results = tau_sweep(&sc, &measures, tol)?;
            let pass = results.iter().all(|c| c.pass);
            let rows = results
                .iter()
                .map(|c| {
                    vec![
                        c.measure.to_string(),
                        num(c.lhs),
                        num(c.rhs),
                        num(c.margin),
                        num(c.threshold),
                        c.pass.to_string(),
                    ]
                })
                .collect();
            Ok(RunRecord {
                command: "sweep".into(),
                input: target.to_string(),
                digest: inputs_digest("sweep", &inputs),
                seed: sc.sampler.seed,
                fields: vec![field("scenario", &sc.name)],
                checks: Vec::new(),
                table: Some(Table {
                    header: TAU_SWEEP_HEADER.to_vec(),
                    rows,
                }),
                pass,
                wall_time_s: start.elapsed().as_secs_f64(),
            })
        }
        _ => Err(Error::Usage("--b and --eps must be given together".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::builtin_names;

    #[test]
    fn every_builtin_round_trips() {
        for name in builtin_names() {
            let sc = builtin(name).unwrap();
            let back = parse_scenario(&dump_scenario(&sc)).unwrap();
            assert_eq!(sc, back, "{name}");
        }
    }

    #[test]
    fn unknown_field_reports_position() {
        let text = dump_scenario(&builtin("holder").unwrap()).replacen("\"name\"", "\"nmae\"", 1);
        match parse_scenario(&text) {
            Err(Error::Parse { line, column, message }) => {
                assert_eq!(line, 4, "{message}");
                assert!(column > 0);
                assert!(message.contains("nmae"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_version_is_checked() {
        let text = dump_scenario(&builtin("holder").unwrap()).replacen("\"schema_version\": 1", "\"schema_version\": 7", 1);
        assert!(matches!(parse_scenario(&text), Err(Error::Usage(_))));
    }

    #[test]
    fn ranges_and_tau_lists() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_range("0:1:0").unwrap().is_empty());
        assert_eq!(parse_range("0.2:9:1").unwrap(), vec![0.2]);
        assert!(parse_range("0:1").is_err());
        let t = parse_tau_list("1, 4,flat").unwrap();
        assert_eq!(t, vec![ReferenceMeasure::Gaussian { tau: 1.0 }, ReferenceMeasure::Gaussian { tau: 4.0 }, ReferenceMeasure::Flat]);
        assert!(parse_tau_list("").unwrap().is_empty());
        assert!(parse_tau_list("-1").is_err());
    }

    #[test]
    fn function_specs() {
        assert_eq!(parse_function("half-square").unwrap(), TestFunction::half_square(1));
        assert_eq!(parse_function("half-square:3").unwrap().dim(), 3);
        assert_eq!(parse_function("const:3").unwrap().as_constant(), Some(3.0));
        assert_eq!(parse_function("double-well").unwrap().eval(&[1.0]).unwrap(), 0.0);
        assert!(matches!(parse_function("cubic"), Err(Error::Usage(_))));
        assert!(matches!(parse_function("const:x"), Err(Error::Usage(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Usage("x".into())), 2);
        assert_eq!(exit_code(&Error::Parse { line: 1, column: 1, message: "x".into() }), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 3);
        assert_eq!(exit_code(&Error::Resource("x".into())), 3);
    }

    #[test]
    fn verify_record_is_deterministic() {
        let args = VerifyArgs {
            target: "propM-quadratic".into(),
            samples: Some(5_000),
            ..VerifyArgs::default()
        };
        let a = cmd_verify(&args).unwrap();
        let b = cmd_verify(&args).unwrap();
        assert!(a.pass);
        assert_eq!(a.body(Format::Text), b.body(Format::Text));
        assert_eq!(a.body(Format::Csv), b.body(Format::Csv));
        assert!(a.render(Format::Text).lines().last().unwrap().starts_with("wall_time_s="));
    }

    #[test]
    fn empty_sweeps_are_header_only() {
        let r = cmd_sweep(&SweepArgs {
            b: Some(Vec::new()),
            eps: Some(vec![0.1]),
            ..SweepArgs::default()
        })
        .unwrap();
        assert!(r.pass);
        assert_eq!(r.body(Format::Csv), format!("{}\n", EXOTIC_SWEEP_HEADER.join(",")));
        let r = cmd_sweep(&SweepArgs {
            target: Some("holder".into()),
            tau: Some(Vec::new()),
            ..SweepArgs::default()
        })
        .unwrap();
        assert_eq!(r.body(Format::Csv), format!("{}\n", TAU_SWEEP_HEADER.join(",")));
    }

    #[test]
    fn exotic_prediction_matches_eigenvalue_test() {
        for i in 0..20 {
            for j in 0..20 {
                let b = 0.05 * i as f64;
                let e = 0.05 * j as f64;
                assert_eq!(exotic_operator(b, e).valid, exotic_predicted_valid(b, e), "b={b} eps={e}");
            }
        }
    }
}
