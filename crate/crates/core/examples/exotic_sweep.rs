//! Validity of the exotic operator over a (b, ε) grid against b² + ε² ≤ b.

use borell_lab::operator::exotic_operator;
use borell_lab::report::exotic_predicted_valid;

fn main() {
    let n = 20;
    let mut disagreements = 0;
    println!("rows b = 0.05..1.0, columns ε = 0.05..1.0 (# valid, . invalid)");
    for i in 1..=n {
        let b = i as f64 / n as f64;
        let line: String = (1..=n)
            .map(|j| {
                let eps = j as f64 / n as f64;
                let ex = exotic_operator(b, eps);
                if ex.valid != exotic_predicted_valid(b, eps) {
                    disagreements += 1;
                }
                if ex.valid {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{b:>5.2} {line}");
    }
    println!("disagreements with the circle criterion: {disagreements}");
}
