//! Inf-convolution `f_k(x) = inf_u f(x + u) + k|u|²`.

use super::TestFunction;
use crate::error::{Error, Result};
use crate::optimize::{minimize, MinimizeOptions};

/// Minimal value of `u ↦ f(x + u) + k|u|²`.
///
/// Any minimiser satisfies `k|u|² ≤ f(x) − inf f`, which bounds the grid used
/// to seed the local searches.
pub fn moreau_envelope(f: &TestFunction, k: f64, x: &[f64]) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::usage(format!("envelope parameter must be positive, got {k}")));
    }
    let fx = f.eval(x)?;
    let lb = f.lower_bound();
    if lb == f64::NEG_INFINITY {
        return Err(Error::domain("inf-convolution needs f bounded below"));
    }
    let n = f.dim();
    let radius = ((fx - lb).max(0.0) / k).sqrt();
    let mut best = fx;
    if radius == 0.0 || !radius.is_finite() {
        return Ok(best);
    }
    let objective = |u: &[f64], g: &mut [f64]| {
        let y: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + b).collect();
        let v = f.value_gradient(&y, g);
        for (gi, ui) in g.iter_mut().zip(u) {
            *gi += 2.0 * k * ui;
        }
        v + k * u.iter().map(|t| t * t).sum::<f64>()
    };
    let per_axis: usize = match n {
        1 => 41,
        2 => 11,
        3 => 5,
        _ => 3,
    };
    let mut seeds: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut g = vec![0.0; n];
    super::quadrature::for_each_index(n, per_axis, |idx| {
        let u: Vec<f64> = idx
            .iter()
            .map(|&i| radius * (2.0 * i as f64 / (per_axis - 1) as f64 - 1.0))
            .collect();
        let v = objective(&u, &mut g);
        seeds.push((v, u));
    });
    for hint in f.mode_hints() {
        let u: Vec<f64> = hint.iter().zip(x).map(|(h, a)| h - a).collect();
        let v = objective(&u, &mut g);
        seeds.push((v, u));
    }
    seeds.push((fx, vec![0.0; n]));
    seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let opts = MinimizeOptions {
        xtol: 1e-12,
        ..MinimizeOptions::default()
    };
    for (_, u0) in seeds.iter().take(6) {
        let m = minimize(objective, u0, opts);
        if m.value < best {
            best = m.value;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::Quadratic;
    use proptest::prelude::*;

    #[test]
    fn half_square_closed_form() {
        let f = TestFunction::half_square(1);
        for k in [1.0, 100.0] {
            let v = moreau_envelope(&f, k, &[1.0]).unwrap();
            // u* = −x/(1+2k)
            assert!((v - k / (1.0 + 2.0 * k)).abs() < 1e-12, "k={k}: {v}");
        }
    }

    #[test]
    fn constants_are_fixed() {
        let f = TestFunction::constant(2, 3.5);
        assert_eq!(moreau_envelope(&f, 0.7, &[1.0, -4.0]).unwrap(), 3.5);
    }

    #[test]
    fn unbounded_below_is_domain_error() {
        let f = TestFunction::quadratic(nalgebra::DMatrix::zeros(1, 1), vec![1.0], 0.0).unwrap();
        assert!(matches!(moreau_envelope(&f, 1.0, &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(moreau_envelope(&f, 0.0, &[0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn double_well_reaches_far_well() {
        // Minimiser lies in the well at −1.
        let f = TestFunction::min_of(vec![
            Quadratic::isotropic(1.0, &[1.0], 0.0),
            Quadratic::isotropic(1.0, &[-1.0], 0.0),
        ])
        .unwrap();
        let v = moreau_envelope(&f, 1.0, &[-0.2]).unwrap();
        let oracle = 0.64 / 3.0;
        assert!((v - oracle).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn below_f_and_monotone_in_k(x in -4.0f64..4.0, y in -4.0f64..4.0) {
            let fs = [
                TestFunction::isotropic(2, 1.3, &[0.5, -0.5], 0.0),
                TestFunction::smoothed_box(vec![0.0, 0.0], vec![1.0, 0.5], 3.0).unwrap(),
                TestFunction::min_of(vec![
                    Quadratic::isotropic(1.0, &[1.0, 1.0], 0.0),
                    Quadratic::isotropic(2.0, &[-1.0, 0.0], 0.2),
                ]).unwrap(),
            ];
            for f in &fs {
                let p = [x, y];
                let fx = f.eval(&p).unwrap();
                let mut prev = f64::NEG_INFINITY;
                for k in [0.5, 2.0, 8.0] {
                    let v = moreau_envelope(f, k, &p).unwrap();
                    prop_assert!(v <= fx + 1e-12);
                    prop_assert!(v >= prev - 1e-9);
                    prev = v;
                }
            }
        }
    }
}
