//! Quasi-Newton local minimisation for the small problems that appear in
//! the laboratory (dimension ≤ a few dozen).

use crate::linalg::dot;

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop once the sup-norm of the gradient falls below this.
    pub gtol: f64,
    /// Stop once a step moves the iterate less than this (sup-norm).
    pub xtol: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 500,
            gtol: 1e-10,
            xtol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// BFGS with Armijo backtracking. `objective` returns the value and writes
/// the gradient into its second argument.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: MinimizeOptions) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut fx = objective(&x, &mut g);
    if !fx.is_finite() || n == 0 {
        return Minimum {
            x,
            value: fx,
            iterations: 0,
            converged: n == 0,
        };
    }
    let mut h = identity(n);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..opts.max_iter {
        iterations = it + 1;
        if sup(&g) < opts.gtol {
            converged = true;
            break;
        }
        // d = -H g
        for i in 0..n {
            d[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&d, &g);
        if slope >= 0.0 {
            h = identity(n);
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_new = objective(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                let moved = step * sup(&d);
                let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
                bfgs_update(&mut h, &s, &y);
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                if moved < opts.xtol {
                    converged = sup(&g) < opts.gtol.sqrt();
                    return Minimum {
                        x,
                        value: fx,
                        iterations,
                        converged,
                    };
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            converged = sup(&g) < opts.gtol.sqrt();
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64]) {
    let n = s.len();
    let sy = dot(s, y);
    if sy <= 1e-300 {
        return;
    }
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
        .collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
