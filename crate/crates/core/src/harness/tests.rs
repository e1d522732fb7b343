use std::f64::consts::PI;

use proptest::prelude::{prop_assert, proptest, ProptestConfig};

use super::*;
use crate::operator::{pl_operator, WeightedIndexSet};

fn quick(mut sc: Scenario) -> Scenario {
    sc.sampler.random_samples = 20_000;
    sc
}

fn run(sc: &Scenario) -> ScenarioReport {
    run_scenario(sc, &RunOptions::default()).unwrap()
}

fn tight_builtins() -> Vec<&'static str> {
    vec!["holder", "prekopa-leindler-quadratic", "propM-quadratic", "bl-mercedes", "reverse-bl-mercedes"]
}

#[test]
fn tight_builtins_pass_with_zero_margin() {
    for name in tight_builtins() {
        let r = run(&quick(builtin(name).unwrap()));
        assert!(r.pass, "{name}: {:?}", r.rows);
        assert!(r.margin().unwrap().abs() < 1e-6, "{name}: margin {:?}", r.margin());
        assert!(r.assumption_worst_violation() <= ASSUMPTION_TOL);
    }
}

#[test]
fn prekopa_leindler_integrals() {
    let sc = builtin("prekopa-leindler-quadratic").unwrap();
    let c = check_conclusion(&sc, None, DEFAULT_TOL).unwrap();
    let oracle = -(PI.sqrt()).ln();
    assert!((c.lhs - oracle).abs() < 1e-12);
    assert!((c.rhs - oracle).abs() < 1e-12);
}

#[test]
fn mercedes_integrals() {
    let sc = builtin("bl-mercedes").unwrap();
    let c = check_conclusion(&sc, None, DEFAULT_TOL).unwrap();
    let oracle = -(2.0 * PI).ln();
    assert!((c.lhs - oracle).abs() < 1e-12);
    assert!((c.rhs - oracle).abs() < 1e-12);
}

#[test]
fn remaining_builtins_pass() {
    for name in ["propM-gen(0.2,0.9,0.4)", "exotic(0.25,0.1)", "bl-basis(3)", "tau-property"] {
        let r = run(&quick(builtin(name).unwrap()));
        assert!(r.pass, "{name}: {:?}", r.rows);
    }
}

#[test]
fn sweep_rows_cover_every_measure() {
    let r = run(&quick(builtin("prekopa-leindler-quadratic").unwrap()));
    for tau in ["1", "4", "16"] {
        let row = r.row(&format!("conclusion[tau={tau}]")).expect("sweep row");
        assert!(row.pass && row.value >= -1e-12);
    }
    assert_eq!(r.sweep.len(), 3);
}

#[test]
fn invalid_exotic_fails_norm_and_assumption() {
    let r = run(&quick(builtin("exotic(1.2,0.2)").unwrap()));
    assert!(!r.pass);
    assert!(!r.row("norm_condition").unwrap().pass);
    assert!(r.assumption_worst_violation() > 1e-3);
}

#[test]
fn lowering_g_raises_margin_and_raising_g_breaks_assumption() {
    for name in tight_builtins() {
        let sc = quick(builtin(name).unwrap());
        let base = check_conclusion(&sc, None, DEFAULT_TOL).unwrap().margin;
        let min_nu = sc.operator.target.min_weight();
        let lowered = check_conclusion(&sc.with_g_offset(-0.1), None, DEFAULT_TOL).unwrap().margin;
        assert!(lowered - base >= 0.1 * min_nu - 1e-8, "{name}");
        let raised = check_basic_assumption(&sc.with_g_offset(0.1)).unwrap();
        assert!(raised.worst_violation > 0.0 && !raised.holds, "{name}");
    }
}

#[test]
fn added_square_keeps_assumption() {
    for name in tight_builtins().into_iter().chain(["propM-gen", "exotic", "bl-basis(2)"]) {
        let sc = quick(builtin(name).unwrap());
        let a = check_basic_assumption(&sc).unwrap().worst_violation;
        let b = check_basic_assumption(&sc.with_added_square(0.1)).unwrap().worst_violation;
        assert!(b <= a.max(0.0) + 1e-8, "{name}: {a} -> {b}");
    }
}

#[test]
fn mass_imbalance_is_reported_for_flat() {
    let mut sc = quick(builtin("holder").unwrap());
    sc.operator.source.weights = vec![0.5];
    let r = run(&sc);
    assert!(!r.row("mass_balance").unwrap().pass);
    assert!(r.conclusion.is_none());
    sc.measure = ReferenceMeasure::Gaussian { tau: 1.0 };
    let r = run(&sc);
    assert!(r.row("mass_balance").unwrap().pass);
}

#[test]
fn dimension_mismatch_is_usage_error() {
    let mut sc = builtin("holder").unwrap();
    sc.g_family[0] = TestFunction::half_square(2);
    assert!(matches!(sc.validate(), Err(Error::Usage(_))));
}

#[test]
fn tight_pl_transfer_is_x_squared() {
    let sc = builtin("prekopa-leindler-quadratic").unwrap();
    let g = tight_g_family(&sc.f_family, &sc.operator, &SamplerSettings::default()).unwrap();
    for y in [-3.0, -0.5, 0.0, 1.7] {
        assert!((g[0].eval(&[y]).unwrap() - y * y).abs() < 1e-12);
    }
}

#[test]
fn identity_transfer_is_the_input() {
    let op = BlockOperator::new(
        WeightedIndexSet::uniform(vec![1.0], 1).unwrap(),
        WeightedIndexSet::uniform(vec![1.0], 1).unwrap(),
        vec![vec![DMatrix::identity(1, 1)]],
    )
    .unwrap();
    let f = TestFunction::isotropic(1, 3.0, &[0.4], 1.0);
    let g = tight_g_family(std::slice::from_ref(&f), &op, &SamplerSettings::default()).unwrap();
    for y in [-2.0, 0.0, 0.4, 5.0] {
        assert!((g[0].eval(&[y]).unwrap() - f.eval(&[y]).unwrap()).abs() < 1e-12);
    }
    let bx = TestFunction::smoothed_box(vec![0.0], vec![1.0], 4.0).unwrap();
    let settings = SamplerSettings {
        random_samples: 20_000,
        ..SamplerSettings::default()
    };
    let g = tight_g_family(std::slice::from_ref(&bx), &op, &settings).unwrap();
    for y in [-3.0, -1.0, 0.0, 0.5, 2.0] {
        let gap = bx.eval(&[y]).unwrap() - g[0].eval(&[y]).unwrap();
        assert!((-1e-9..5e-3).contains(&gap), "y = {y}: gap {gap}");
    }
}

#[test]
fn tau_g_closed_form_oracle() {
    let f0 = TestFunction::isotropic(1, 1.0, &[1.0], 0.0);
    let f1 = TestFunction::isotropic(1, 1.0, &[-1.0], 0.0);
    let g = tau_g(&f0, &f1, 0.5, 0.5, 0.5, 8.0).unwrap();
    for x in [-2.0, 0.0, 0.3, 4.0] {
        assert!((g.eval(&[x]).unwrap() - (0.5 * x * x + 0.25)).abs() < 1e-13);
    }
    let zero = TestFunction::constant(1, 0.0);
    let g = tau_g(&zero, &zero, 0.3, 0.6, 0.2, 8.0).unwrap();
    assert!(g.eval(&[1.3]).unwrap().abs() < 1e-14);
}

/// Brute force over pairs `x₀ = x − αw`, `x₁ = x + (1−α)w` on a fine grid of `w`.
fn brute_tau(f0: &TestFunction, f1: &TestFunction, a: f64, b: f64, l: f64, x: f64) -> f64 {
    (0..=40_000)
        .map(|k| -10.0 + 20.0 * k as f64 / 40_000.0)
        .map(|w| {
            (1.0 - b) * f0.eval(&[x - a * w]).unwrap()
                + b * f1.eval(&[x + (1.0 - a) * w]).unwrap()
                + l * a * (1.0 - a) * w * w
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn tau_g_numeric_box_matches_brute_force() {
    let bx = TestFunction::smoothed_box(vec![0.0], vec![1.0], 4.0).unwrap();
    let g = tau_g(&bx, &bx, 0.5, 0.5, 0.5, 8.0).unwrap();
    for x in [-4.0, -1.2, 0.0, 0.7, 2.5] {
        let brute = brute_tau(&bx, &bx, 0.5, 0.5, 0.5, x);
        let v = g.eval(&[x]).unwrap();
        assert!(v <= brute + 1e-8 && brute - v < 5e-3, "x = {x}: fit {v}, brute {brute}");
    }
}

#[test]
fn tau_property_pair_agrees() {
    let f0 = TestFunction::isotropic(1, 1.0, &[1.0], 0.0);
    let f1 = TestFunction::isotropic(1, 1.0, &[-1.0], 0.0);
    let s = SamplerSettings {
        random_samples: 20_000,
        ..SamplerSettings::default()
    };
    for (a, b, l) in [(0.5, 0.5, 0.5), (0.3, 0.3, 0.5)] {
        let (tilted, flat) = tau_property_scenario(a, b, l, &f0, &f1, &s).unwrap();
        let rt = run(&tilted);
        let rf = run(&flat);
        assert!(rt.pass && rf.pass, "{:?} {:?}", rt.rows, rf.rows);
        let (mt, mf) = (rt.margin().unwrap(), rf.margin().unwrap());
        assert!(mt >= -1e-10 && (mt - mf).abs() < 1e-9, "{mt} vs {mf}");
    }
    // The symmetric case is an equality.
    let (tilted, _) = tau_property_scenario(0.5, 0.5, 0.5, &f0, &f1, &s).unwrap();
    assert!(run(&tilted).margin().unwrap().abs() < 1e-12);
}

#[test]
fn scenario_round_trips_through_json() {
    for name in builtin_names() {
        let sc = builtin(name).unwrap();
        let text = serde_json::to_string(&sc).unwrap();
        let back: Scenario = serde_json::from_str(&text).unwrap();
        assert_eq!(sc, back, "{name}");
    }
}

#[test]
fn unknown_builtin_is_usage_error() {
    assert!(matches!(builtin("nope"), Err(Error::Usage(_))));
    assert!(matches!(builtin("exotic(1)"), Err(Error::Usage(_))));
    assert!(matches!(builtin("bl-basis(1.5)"), Err(Error::Usage(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sound_wiring_on_random_pl(t in 0.1f64..0.9, c0 in -2.0f64..2.0, c1 in -2.0f64..2.0,
                                 k0 in 0.5f64..3.0, k1 in 0.5f64..3.0) {
        let op = pl_operator(t, 1).unwrap();
        let fs = vec![
            TestFunction::isotropic(1, k0, &[c0], 0.0),
            TestFunction::isotropic(1, k1, &[c1], 0.3),
        ];
        let s = SamplerSettings { random_samples: 4_000, ..SamplerSettings::default() };
        let gs = tight_g_family(&fs, &op, &s).unwrap();
        let sc = Scenario {
            name: "random-pl".into(),
            operator: op,
            projections: None,
            decomposition: None,
            f_family: fs,
            g_family: gs,
            measure: ReferenceMeasure::Flat,
            gaussian_tilt: false,
            sampler: s,
        };
        let r = run_scenario(&sc, &RunOptions::default()).unwrap();
        prop_assert!(r.assumption.holds);
        prop_assert!(r.pass, "{:?}", r.rows);
    }
}
