//! Random perturbations B of αI all break the norm condition of
//! (x, y) ↦ (I−B)x + By.

use borell_lab::operator::{pl_rigidity_excess, pl_rigidity_search};
use nalgebra::DMatrix;

fn main() -> borell_lab::Result<()> {
    let r = pl_rigidity_search(0.5, 2, 500, 11)?;
    println!(
        "{} trials: excess in [{:.3e}, {:.3e}], all positive {}, control {:.1e}",
        r.trials, r.min_excess, r.max_excess, r.all_positive, r.control_excess
    );
    let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.05, 0.0, 0.5]);
    println!("small shear: excess {:.3e}", pl_rigidity_excess(0.5, &b, 8, 3));
    Ok(())
}
