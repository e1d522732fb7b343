//! Inf-convolution with k|·|²: exact for quadratics, numerical for boxes.

use borell_lab::function::moreau_envelope;
use borell_lab::TestFunction;

fn main() -> borell_lab::Result<()> {
    let f = TestFunction::half_square(1);
    for x in [-2.0, 0.5, 3.0] {
        // inf_y ½y² + |x − y|² = x²/3.
        println!("½x² ⊡ |·|² at {x:>4}: {:.12} (exact {:.12})", moreau_envelope(&f, 1.0, &[x])?, x * x / 3.0);
    }
    let bx = TestFunction::smoothed_box(vec![0.0, 0.0], vec![1.0, 0.5], 6.0)?;
    for x in [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]] {
        println!("box ⊡ 4|·|² at {x:?}: {:.6}", moreau_envelope(&bx, 4.0, &x)?);
    }
    Ok(())
}
