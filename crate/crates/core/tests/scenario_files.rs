use borell_lab::error::Error;
use borell_lab::function::{Quadratic, ReferenceMeasure};
use borell_lab::harness::{SamplerSettings, Scenario};
use borell_lab::operator::{BlockOperator, WeightedIndexSet};
use borell_lab::report::{dump_scenario, parse_scenario};
use borell_lab::TestFunction;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn function(dim: usize) -> impl Strategy<Value = TestFunction> {
    let coefs = (0.1f64..4.0, prop::collection::vec(-3.0f64..3.0, dim), -2.0f64..2.0);
    prop_oneof![
        coefs.clone().prop_map(move |(k, c, o)| TestFunction::isotropic(dim, k, &c, o)),
        (prop::collection::vec(-1.0f64..1.0, dim), prop::collection::vec(0.0f64..2.0, dim), 0.5f64..8.0)
            .prop_map(|(c, h, b)| TestFunction::smoothed_box(c, h, b).unwrap()),
        (coefs.clone(), coefs.clone()).prop_map(move |((k0, c0, o0), (k1, c1, o1))| {
            TestFunction::min_of(vec![Quadratic::isotropic(k0, &c0, o0), Quadratic::isotropic(k1, &c1, o1)]).unwrap()
        }),
        (coefs.clone(), 0.0f64..1.0, -1.0f64..1.0).prop_map(move |((k, c, o), tilt, s)| {
            TestFunction::isotropic(dim, k, &c, o)
                .transformed(vec![s; dim], 2.0, 0.5, tilt)
                .unwrap()
        }),
    ]
}

fn scenario() -> impl Strategy<Value = Scenario> {
    (1usize..=2, 1usize..=3, 1usize..=3).prop_flat_map(|(dim, p, q)| {
        (
            prop::collection::vec(0.05f64..2.0, p),
            prop::collection::vec(0.05f64..2.0, q),
            prop::collection::vec(-1.0f64..1.0, p * q * dim * dim),
            prop::collection::vec(function(dim), p),
            prop::collection::vec(function(dim), q),
            prop_oneof![Just(ReferenceMeasure::Flat), (0.1f64..20.0).prop_map(|tau| ReferenceMeasure::Gaussian { tau })],
            any::<u64>(),
        )
            .prop_map(move |(mu, nu, entries, fs, gs, measure, seed)| {
                let blocks = (0..q)
                    .map(|j| {
                        (0..p)
                            .map(|i| {
                                let start = (j * p + i) * dim * dim;
                                DMatrix::from_row_slice(dim, dim, &entries[start..start + dim * dim])
                            })
                            .collect()
                    })
                    .collect();
                Scenario {
                    name: format!("random-{p}x{q}"),
                    operator: BlockOperator::new(
                        WeightedIndexSet::uniform(mu, dim).unwrap(),
                        WeightedIndexSet::uniform(nu, dim).unwrap(),
                        blocks,
                    )
                    .unwrap(),
                    projections: None,
                    decomposition: None,
                    f_family: fs,
                    g_family: gs,
                    measure,
                    gaussian_tilt: false,
                    sampler: SamplerSettings { seed, ..SamplerSettings::default() },
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dump_then_parse_is_identity(sc in scenario()) {
        let back = parse_scenario(&dump_scenario(&sc)).unwrap();
        prop_assert_eq!(back, sc);
    }

    #[test]
    fn unknown_fields_are_rejected_with_position(sc in scenario(), key in "[a-z]{3,8}") {
        prop_assume!(!["name", "operator", "projections", "decomposition", "f_family", "g_family",
            "measure", "gaussian_tilt", "sampler"].contains(&key.as_str()));
        let text = dump_scenario(&sc).replacen("\"name\":", &format!("\"{key}\": 0,\n    \"name\":"), 1);
        match parse_scenario(&text) {
            Err(Error::Parse { line, column, message }) => {
                prop_assert_eq!(line, 4);
                prop_assert!(column > 0);
                prop_assert!(message.contains(&key));
            }
            other => prop_assert!(false, "expected parse error, got {:?}", other),
        }
    }
}

#[test]
fn nested_unknown_field_is_rejected() {
    let sc = borell_lab::harness::builtin("holder").unwrap();
    let text = dump_scenario(&sc).replacen("\"random_samples\"", "\"random_sample\"", 1);
    assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
}

#[test]
fn invalid_function_parameters_are_parse_errors() {
    let sc = borell_lab::harness::builtin("holder").unwrap();
    let text = dump_scenario(&sc);
    let bad = text.replacen("\"c\": 0.0", "\"c\": \"zero\"", 1);
    assert_ne!(bad, text);
    assert!(matches!(parse_scenario(&bad), Err(Error::Parse { .. })));
}
