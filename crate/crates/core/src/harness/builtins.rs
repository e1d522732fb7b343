//! Named scenarios, addressable as `name` or `name(p1,p2,...)`.

use super::{tau_property_scenario, Decomposition, SamplerSettings, Scenario};
use crate::error::{Error, Result};
use crate::function::{ReferenceMeasure, TestFunction};
use crate::operator::{
    bl_operator, bl_projections, exotic_operator, holder_operator, mercedes_frame, pl_operator, propm_gen_operator,
    propm_operator, reverse_bl_operator, reverse_bl_projections,
};

/// One line per builtin: syntax, defaults, content.
pub const BUILTIN_HELP: &[(&str, &str)] = &[
    ("holder", "x ↦ (x, x) with t = ½; f = g₀ = g₁ = ½x²"),
    (
        "prekopa-leindler-quadratic",
        "t = ½; f₀ = (x−1)², f₁ = (x+1)², g = x² (flat measure)",
    ),
    ("propM-quadratic", "blocks [[2/3,1/3],[1/3,2/3]]; all functions ½x² (flat measure)"),
    (
        "propM-gen(s,t,r)",
        "general two-point mixing operator, default (0.25,0.75,0.5); all functions ½x²",
    ),
    (
        "exotic(b,eps)",
        "blocks [[I−B,B],[B,I−B]] on R² with B = bI − εR, default (0.25,0.1); all functions ½|x|²",
    ),
    (
        "tau-property(alpha,beta,lambda)",
        "mixed infimal convolutions against γ₁, default (0.5,0.5,0.5); f₀ = ½(x−1)², f₁ = ½(x+1)²",
    ),
    ("bl-mercedes", "three unit vectors at 120° with weights ⅔; f = ½|x|², g_j = ½t²"),
    ("reverse-bl-mercedes", "adjoint of bl-mercedes; f_j = ½t², g = ½|x|²"),
    ("bl-basis(d)", "standard basis of R^d with weights 1, default d = 2; f = ½|x|², g_j = ½t²"),
];

/// Canonical names, without parameters.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN_HELP
        .iter()
        .map(|(s, _)| s.split('(').next().unwrap_or(s))
        .collect()
}

fn parse_call(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec, Vec::new())),
        Some(open) => {
            let inner = spec[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::usage(format!("unbalanced parentheses in builtin `{spec}`")))?;
            let args = inner
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::usage(format!("bad builtin parameter `{}` in `{spec}`", a.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((spec[..open].trim(), args))
        }
    }
}

fn params<const N: usize>(name: &str, args: &[f64], defaults: [f64; N]) -> Result<[f64; N]> {
    match args.len() {
        0 => Ok(defaults),
        n if n == N => {
            let mut out = defaults;
            out.copy_from_slice(args);
            Ok(out)
        }
        n => Err(Error::usage(format!("builtin `{name}` takes {N} parameters, got {n}"))),
    }
}

fn scenario(name: String, operator: crate::operator::BlockOperator, f: Vec<TestFunction>, g: Vec<TestFunction>) -> Scenario {
    Scenario {
        name,
        operator,
        projections: None,
        decomposition: None,
        f_family: f,
        g_family: g,
        measure: ReferenceMeasure::Flat,
        gaussian_tilt: false,
        sampler: SamplerSettings::default(),
    }
}

fn fmt_args(args: &[f64]) -> String {
    args.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

/// The scenario called `spec`, e.g. `exotic(0.3,0.1)`.
pub fn builtin(spec: &str) -> Result<Scenario> {
    let (name, args) = parse_call(spec)?;
    let half = |n| TestFunction::half_square(n);
    match name {
        "holder" => {
            params(name, &args, [])?;
            Ok(scenario(name.into(), holder_operator(0.5, 1)?, vec![half(1)], vec![half(1), half(1)]))
        }
        "prekopa-leindler-quadratic" => {
            params(name, &args, [])?;
            let f0 = TestFunction::isotropic(1, 2.0, &[1.0], 0.0);
            let f1 = TestFunction::isotropic(1, 2.0, &[-1.0], 0.0);
            let g = TestFunction::isotropic(1, 2.0, &[0.0], 0.0);
            Ok(scenario(name.into(), pl_operator(0.5, 1)?, vec![f0, f1], vec![g]))
        }
        "propM-quadratic" => {
            params(name, &args, [])?;
            Ok(scenario(name.into(), propm_operator(1)?, vec![half(1), half(1)], vec![half(1), half(1)]))
        }
        "propM-gen" => {
            let [s, t, r] = params(name, &args, [0.25, 0.75, 0.5])?;
            Ok(scenario(
                format!("propM-gen({})", fmt_args(&[s, t, r])),
                propm_gen_operator(s, t, r, 1)?,
                vec![half(1), half(1)],
                vec![half(1), half(1)],
            ))
        }
        "exotic" => {
            let [b, eps] = params(name, &args, [0.25, 0.1])?;
            if !(b.is_finite() && eps.is_finite()) {
                return Err(Error::usage("exotic parameters must be finite"));
            }
            Ok(scenario(
                format!("exotic({})", fmt_args(&[b, eps])),
                exotic_operator(b, eps).operator,
                vec![half(2), half(2)],
                vec![half(2), half(2)],
            ))
        }
        "tau-property" => {
            let [a, b, l] = params(name, &args, [0.5, 0.5, 0.5])?;
            let f0 = TestFunction::isotropic(1, 1.0, &[1.0], 0.0);
            let f1 = TestFunction::isotropic(1, 1.0, &[-1.0], 0.0);
            Ok(tau_property_scenario(a, b, l, &f0, &f1, &SamplerSettings::default())?.0)
        }
        "bl-mercedes" => {
            params(name, &args, [])?;
            let (u, c) = mercedes_frame();
            let mut sc = scenario(name.into(), bl_operator(&u, &c)?, vec![half(2)], vec![half(1); 3]);
            sc.projections = Some(bl_projections(&u)?);
            sc.decomposition = Some(Decomposition { vectors: u, weights: c });
            Ok(sc)
        }
        "reverse-bl-mercedes" => {
            params(name, &args, [])?;
            let (u, c) = mercedes_frame();
            let mut sc = scenario(name.into(), reverse_bl_operator(&u, &c)?, vec![half(1); 3], vec![half(2)]);
            sc.projections = Some(reverse_bl_projections(&u)?);
            sc.decomposition = Some(Decomposition { vectors: u, weights: c });
            Ok(sc)
        }
        "bl-basis" => {
            let [d] = params(name, &args, [2.0])?;
            if !(d >= 1.0 && d.fract() == 0.0 && d <= 8.0) {
                return Err(Error::usage(format!("bl-basis dimension must be an integer in 1..=8, got {d}")));
            }
            let d = d as usize;
            let u: Vec<Vec<f64>> = (0..d)
                .map(|k| (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
                .collect();
            let c = vec![1.0; d];
            let mut sc = scenario(format!("bl-basis({d})"), bl_operator(&u, &c)?, vec![half(d)], vec![half(1); d]);
            sc.projections = Some(bl_projections(&u)?);
            sc.decomposition = Some(Decomposition { vectors: u, weights: c });
            Ok(sc)
        }
        other => Err(Error::usage(format!(
            "unknown builtin `{other}`; known: {}",
            builtin_names().join(", ")
        ))),
    }
}
