//! Exact integrals of `e^{-min_k p_k(y)}` on the real line, where every
//! `p_k(y) = a y² + b y + c`. Used for one-dimensional minima of quadratics,
//! whose kinks defeat polynomial quadrature.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::linalg::log_sum_exp;

pub(crate) type Piece = [f64; 3];

fn value(p: &Piece, y: f64) -> f64 {
    p[0] * y * y + p[1] * y + p[2]
}

/// `ln Q(z)` with `Q(z) = P(N(0,1) > z)`, accurate far into the tail.
pub(crate) fn ln_upper_tail(z: f64) -> f64 {
    if z == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if z < 35.0 {
        (0.5 * libm::erfc(z / SQRT_2)).ln()
    } else {
        let z2 = z * z;
        let series = 1.0 - 1.0 / z2 + 3.0 / z2.powi(2) - 15.0 / z2.powi(3) + 105.0 / z2.powi(4);
        -0.5 * z2 - (z * (2.0 * PI).sqrt()).ln() + series.ln()
    }
}

fn ln_phi(z: f64) -> f64 {
    if z.is_infinite() {
        f64::NEG_INFINITY
    } else {
        -0.5 * z * z - 0.5 * (2.0 * PI).ln()
    }
}

/// `ln(Φ(hi) − Φ(lo))` for `lo < hi`.
fn ln_normal_mass(lo: f64, hi: f64) -> f64 {
    if lo >= 0.0 {
        let a = ln_upper_tail(lo);
        let b = ln_upper_tail(hi);
        a + (-(b - a).exp()).ln_1p()
    } else if hi <= 0.0 {
        let a = ln_upper_tail(-hi);
        let b = ln_upper_tail(-lo);
        a + (-(b - a).exp()).ln_1p()
    } else {
        let left = ln_upper_tail(-lo).exp();
        let right = ln_upper_tail(hi).exp();
        (-(left + right)).ln_1p()
    }
}

/// Log-integral and first moment of `e^{-p}` over `[lo, hi]`.
fn segment(p: &Piece, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let [a, b, c] = *p;
    if a > 0.0 {
        let m = -b / (2.0 * a);
        let s = (0.5 / a).sqrt();
        let zl = (lo - m) / s;
        let zu = (hi - m) / s;
        let mass = ln_normal_mass(zl, zu);
        let log_i = -c + b * b / (4.0 * a) + (s * (2.0 * PI).sqrt()).ln() + mass;
        let ratio = (ln_phi(zl) - mass).exp() - (ln_phi(zu) - mass).exp();
        let mut mean = m + s * ratio;
        if mean.is_nan() {
            mean = m;
        }
        Ok((log_i, mean.clamp(lo, hi)))
    } else if a == 0.0 {
        if b == 0.0 {
            if lo.is_infinite() || hi.is_infinite() {
                return Err(Error::domain("e^{-f} is not integrable: constant piece on an unbounded interval"));
            }
            return Ok((-c + (hi - lo).ln(), 0.5 * (lo + hi)));
        }
        if (b > 0.0 && lo.is_infinite()) || (b < 0.0 && hi.is_infinite()) {
            return Err(Error::domain("e^{-f} is not integrable: linear piece on an unbounded side"));
        }
        let k = b.abs();
        let width = hi - lo;
        let tail = (-k * width).exp();
        let corr = if width.is_infinite() { 0.0 } else { width * tail / (1.0 - tail) };
        if b > 0.0 {
            let log_i = -c - b * lo + (-tail).ln_1p() - k.ln();
            Ok((log_i, lo + 1.0 / k - corr))
        } else {
            let log_i = -c - b * hi + (-tail).ln_1p() - k.ln();
            Ok((log_i, hi - 1.0 / k + corr))
        }
    } else {
        if lo.is_infinite() || hi.is_infinite() {
            return Err(Error::domain("e^{-f} is not integrable: concave piece on an unbounded interval"));
        }
        // Bounded concave segment: composite Gauss–Legendre.
        let rule = super::rules::LegendreRule::new(32);
        let panels = 16;
        let w = (hi - lo) / panels as f64;
        let mut terms = Vec::with_capacity(panels * 32);
        let mut moments = Vec::with_capacity(panels * 32);
        for k in 0..panels {
            let a0 = lo + k as f64 * w;
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                let y = a0 + 0.5 * w * (x + 1.0);
                terms.push((0.5 * w * wt).ln() - value(p, y));
                moments.push(y);
            }
        }
        let log_i = log_sum_exp(terms.iter().copied());
        let mean = terms
            .iter()
            .zip(&moments)
            .map(|(t, y)| (t - log_i).exp() * y)
            .sum();
        Ok((log_i, mean))
    }
}

/// `ln ∫ e^{-min_k p_k(y)} dy` and the mean of the normalised density.
pub(crate) fn log_integral(pieces: &[Piece]) -> Result<(f64, f64)> {
    if pieces.is_empty() {
        return Err(Error::internal("no pieces"));
    }
    let mut cuts: Vec<f64> = Vec::new();
    for i in 0..pieces.len() {
        for j in (i + 1)..pieces.len() {
            let da = pieces[i][0] - pieces[j][0];
            let db = pieces[i][1] - pieces[j][1];
            let dc = pieces[i][2] - pieces[j][2];
            if da == 0.0 {
                if db != 0.0 {
                    cuts.push(-dc / db);
                }
            } else {
                let disc = db * db - 4.0 * da * dc;
                if disc >= 0.0 {
                    let sgn = if db >= 0.0 { 1.0 } else { -1.0 };
                    let qv = -0.5 * (db + sgn * disc.sqrt());
                    if qv != 0.0 {
                        cuts.push(qv / da);
                        cuts.push(dc / qv);
                    } else {
                        cuts.push(0.0);
                    }
                }
            }
        }
    }
    cuts.retain(|c| c.is_finite());
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(f64::NEG_INFINITY);
    edges.extend(cuts);
    edges.push(f64::INFINITY);

    let mut logs = Vec::with_capacity(edges.len());
    let mut means = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let probe = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (true, false) => lo + 1.0 + lo.abs(),
            (false, true) => hi - 1.0 - hi.abs(),
            (false, false) => 0.0,
        };
        let active = pieces
            .iter()
            .min_by(|p, q| value(p, probe).total_cmp(&value(q, probe)))
            .expect("non-empty");
        let (l, m) = segment(active, lo, hi)?;
        logs.push(l);
        means.push(m);
    }
    let total = log_sum_exp(logs.iter().copied());
    let mean = logs
        .iter()
        .zip(&means)
        .map(|(l, m)| if *l == f64::NEG_INFINITY { 0.0 } else { (l - total).exp() * m })
        .sum();
    Ok((total, mean))
}

/// Infimum of `min_k p_k` over the line.
pub(crate) fn pieces_lower_bound(pieces: &[Piece]) -> f64 {
    pieces
        .iter()
        .map(|&[a, b, c]| {
            if a > 0.0 {
                c - b * b / (4.0 * a)
            } else if a == 0.0 && b == 0.0 {
                c
            } else {
                f64::NEG_INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Pieces of `y ↦ p(y) + (y − x)²/(2s)`, i.e. the integrand of the heat
/// kernel at `x` with variance `s` (without its normalising constant).
pub(crate) fn with_kernel(pieces: &[Piece], x: f64, s: f64) -> Vec<Piece> {
    pieces
        .iter()
        .map(|&[a, b, c]| [a + 0.5 / s, b - x / s, c + 0.5 * x * x / s])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gaussian() {
        let (l, m) = log_integral(&[[0.5, 0.0, 0.0]]).unwrap();
        assert!((l - 0.5 * (2.0 * PI).ln()).abs() < 1e-14);
        assert!(m.abs() < 1e-14);
        let (l, m) = log_integral(&[[0.5, -3.0, 4.5]]).unwrap();
        assert!((l - 0.5 * (2.0 * PI).ln()).abs() < 1e-13);
        assert!((m - 3.0).abs() < 1e-12);
    }

    #[test]
    fn double_well_against_erf() {
        // min(½(y−1)², ½(y+1)²): two half-line pieces, each √(2π)·Φ(1).
        let p = [[0.5, -1.0, 0.5], [0.5, 1.0, 0.5]];
        let (l, m) = log_integral(&p).unwrap();
        let phi1 = 1.0 - 0.5 * libm::erfc(1.0 / SQRT_2);
        let oracle = (2.0 * (2.0 * PI).sqrt() * phi1).ln();
        assert!((l - oracle).abs() < 1e-14);
        assert!(m.abs() < 1e-14);
    }

    #[test]
    fn unbounded_growth_is_rejected() {
        // min(y, −y, 5) = min(−|y|, 5) does not decay.
        let p = [[0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 5.0]];
        assert!(log_integral(&p).is_err());
    }

    #[test]
    fn far_tail_is_finite() {
        let (l, _) = log_integral(&[[0.5, -80.0, 3200.0 - 1.0]]).unwrap();
        assert!((l - (1.0 + 0.5 * (2.0 * PI).ln())).abs() < 1e-9);
        let q = ln_upper_tail(40.0);
        assert!(q.is_finite() && q < -800.0);
        assert!(ln_upper_tail(34.9) > ln_upper_tail(35.1));
    }

    #[test]
    fn tail_series_matches_erfc_at_switch() {
        let below = ln_upper_tail(35.0 - 1e-13);
        let above = ln_upper_tail(35.0);
        assert!((below - above).abs() < 1e-10);
    }
}
