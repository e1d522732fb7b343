//! Weighted norms and the constant-function condition for the named
//! operators.

use borell_lab::operator::{
    constant_condition_check, exotic_operator, holder_operator, pl_operator, propm_gen_operator, propm_operator,
    BlockOperator,
};

fn show(name: &str, a: &BlockOperator) -> borell_lab::Result<()> {
    let c = constant_condition_check(a)?;
    let sv: Vec<String> = a.singular_values().iter().map(|s| format!("{s:.6}")).collect();
    println!(
        "{name:<26} norm {:.12}  power {:.12}  constants {}  σ = [{}]",
        a.weighted_norm(),
        a.power_norm(4, 200, 7),
        if c.pass { "ok" } else { "FAIL" },
        sv.join(", ")
    );
    Ok(())
}

fn main() -> borell_lab::Result<()> {
    show("pl(t=0.3)", &pl_operator(0.3, 2)?)?;
    show("holder(t=0.3)", &holder_operator(0.3, 2)?)?;
    show("propM", &propm_operator(1)?)?;
    for (s, t, r) in [(0.2, 0.8, 0.5), (0.5, 0.2, 0.8), (0.8, 0.8, 0.2)] {
        show(&format!("propM-gen({s},{t},{r})"), &propm_gen_operator(s, t, r, 1)?)?;
    }
    let third = 1.0 / 3.0;
    let ex = exotic_operator(third, 2f64.sqrt() / 3.0);
    show("exotic(1/3, √2/3)", &ex.operator)?;
    let bad = exotic_operator(0.5, 0.6);
    println!(
        "exotic(0.5, 0.6) valid = {} (min eigenvalue {:.3}), norm {:.6}",
        bad.valid,
        bad.min_eigenvalue,
        bad.operator.weighted_norm()
    );
    Ok(())
}
