//! Dump a builtin scenario to JSON, edit it, and verify the edited copy.

use borell_lab::report::{cmd_verify, dump_scenario, parse_scenario, Format, VerifyArgs};
use borell_lab::harness::builtin;

fn main() -> borell_lab::Result<()> {
    let text = dump_scenario(&builtin("propM-quadratic")?);
    println!("{} lines of scenario JSON", text.lines().count());

    let mut sc = parse_scenario(&text)?;
    sc.name = "propM-shrunk".into();
    for row in sc.operator.blocks.iter_mut() {
        for b in row.iter_mut() {
            *b *= 0.9;
        }
    }
    let path = std::env::temp_dir().join("borell-lab-shrunk.json");
    std::fs::write(&path, dump_scenario(&sc))?;
    let record = cmd_verify(&VerifyArgs {
        target: path.display().to_string(),
        samples: Some(20_000),
        ..VerifyArgs::default()
    })?;
    print!("{}", record.body(Format::Csv));
    println!("pass = {}", record.pass);
    Ok(())
}
