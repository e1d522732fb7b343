//! Brascamp–Lieb and its reverse form on the Mercedes frame, plus the
//! decomposition-of-identity checks.

use borell_lab::harness::{builtin, run_scenario, RunOptions};
use borell_lab::operator::{identity_decomposition_check, mercedes_frame};

fn main() -> borell_lab::Result<()> {
    let (u, c) = mercedes_frame();
    let chk = identity_decomposition_check(&u, &c)?;
    println!("mercedes: deviation {:.2e}, trace {}", chk.deviation, chk.trace);
    let short = identity_decomposition_check(&u, &[0.5; 3])?;
    println!("weights ½: pass {}, trace {}", short.pass, short.trace);

    for name in ["bl-mercedes", "reverse-bl-mercedes", "bl-basis(3)"] {
        let r = run_scenario(&builtin(name)?, &RunOptions::default())?;
        let c = r.conclusion.as_ref().expect("balanced masses");
        println!(
            "{name:<20} lhs {:.12}  rhs {:.12}  margin {:+.2e}  pass {}",
            c.lhs, c.rhs, c.margin, r.pass
        );
    }
    Ok(())
}
