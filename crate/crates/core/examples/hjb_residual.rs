//! The potential f_r = −log P_{T−r} e^{-f} solves ∂_r f_r + ½Δf_r − ½|∇f_r|² = 0.
//! Prints the finite-difference residual and compares f_r with its closed
//! form for f = ½x².

use borell_lab::heat::{standard_residual_grid, SemigroupEvaluator};
use borell_lab::TestFunction;

fn main() -> borell_lab::Result<()> {
    let horizon = 1.0;
    let ev = SemigroupEvaluator::with_defaults(TestFunction::half_square(1), horizon)?;
    let grid = standard_residual_grid(horizon);
    let residual = ev.hjb_residual(&grid, 1e-3)?;
    println!("max HJB residual on {} points: {residual:.3e}", grid.len());

    println!("{:>5} {:>6} {:>14} {:>14}", "r", "x", "f_r(x)", "closed form");
    for r in [0.0, 0.5, 0.9] {
        for x in [-1.5, 0.0, 1.0] {
            let s = 1.0 + horizon - r;
            let exact = x * x / (2.0 * s) + 0.5 * s.ln();
            println!("{r:>5.2} {x:>6.2} {:>14.10} {exact:>14.10}", ev.potential(r, &[x])?);
        }
    }
    Ok(())
}
