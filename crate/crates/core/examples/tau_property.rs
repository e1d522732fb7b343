//! Mixed infimal convolutions g_{α,β,λ} and the two-point inequality they
//! satisfy against the standard Gaussian.

use borell_lab::harness::{run_scenario, tau_g, tau_property_scenario, RunOptions, SamplerSettings};
use borell_lab::TestFunction;

fn main() -> borell_lab::Result<()> {
    let f0 = TestFunction::isotropic(1, 1.0, &[1.0], 0.0);
    let f1 = TestFunction::isotropic(1, 1.0, &[-1.0], 0.0);
    let g = tau_g(&f0, &f1, 0.5, 0.5, 0.5, 8.0)?;
    println!("g_(½,½,½)(x) = x²/2 + ¼ ? at x = 1: {:.12}", g.eval(&[1.0])?);

    let sampler = SamplerSettings::default();
    for (a, b, l) in [(0.5, 0.5, 0.5), (0.3, 0.3, 0.5), (0.2, 0.7, 0.4)] {
        let (tilted, flat) = tau_property_scenario(a, b, l, &f0, &f1, &sampler)?;
        let rt = run_scenario(&tilted, &RunOptions::default())?;
        let rf = run_scenario(&flat, &RunOptions::default())?;
        println!(
            "α={a} β={b} λ={l}: gaussian margin {:.9}, flat margin {:.9}, pass {}",
            rt.margin().unwrap_or(f64::NAN),
            rf.margin().unwrap_or(f64::NAN),
            rt.pass && rf.pass
        );
    }

    // A non-quadratic input goes through the grid fit.
    let bx = TestFunction::smoothed_box(vec![0.0], vec![1.0], 4.0)?;
    let (tilted, _) = tau_property_scenario(0.5, 0.5, 0.5, &bx, &bx, &sampler)?;
    let r = run_scenario(&tilted, &RunOptions::default())?;
    println!("smoothed box: margin {:.6}, pass {}", r.margin().unwrap_or(f64::NAN), r.pass);
    Ok(())
}
