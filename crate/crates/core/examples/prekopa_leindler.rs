//! The quadratic Prékopa–Leindler scenario, its tight output function, and
//! the effect of moving g up or down.

use borell_lab::harness::{builtin, check_basic_assumption, check_conclusion, run_scenario, tight_g_family, RunOptions};
use borell_lab::report::num;

fn main() -> borell_lab::Result<()> {
    let sc = builtin("prekopa-leindler-quadratic")?;
    let report = run_scenario(&sc, &RunOptions::default())?;
    for row in &report.rows {
        println!("{:<20} {:>24} {:>24}  {}", row.name, num(row.value), num(row.threshold), row.pass);
    }

    let g = tight_g_family(&sc.f_family, &sc.operator, &sc.sampler)?;
    println!("tight g at y = 0.5, 2: {:.12}, {:.12}", g[0].eval(&[0.5])?, g[0].eval(&[2.0])?);

    let lowered = check_conclusion(&sc.with_g_offset(-0.1), None, 1e-8)?;
    println!("g − 0.1: margin {:.6}", lowered.margin);
    let raised = check_basic_assumption(&sc.with_g_offset(0.1))?;
    println!(
        "g + 0.1: worst violation {:.6} at {:?}",
        raised.worst_violation, raised.witness
    );
    Ok(())
}
