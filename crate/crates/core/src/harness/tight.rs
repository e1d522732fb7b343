//! Constructions of output families `g_j` that satisfy the basic
//! assumption: the optimal transfer for quadratic inputs, its finite
//! min-of-quadratics fit otherwise, and the mixed infimal convolution
//! `g_{α,β,λ}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{search_defect, SamplerSettings, Scenario, ASSUMPTION_TOL};
use crate::error::{Error, Result};
use crate::function::{FunctionKind, Quadratic, ReferenceMeasure, TestFunction};
use crate::operator::{propm_gen_operator, BlockOperator, NORM_TOL};
use crate::optimize::{minimize, MinimizeOptions};

/// Largest number of piece combinations expanded in closed form.
const MAX_COMBINATIONS: usize = 256;

/// Grid points of a numeric one-dimensional fit.
const FIT_POINTS: usize = 257;

/// Tolerated gap between a fit and the sampled infimum at the fit nodes.
const FIT_RESIDUAL: f64 = 1e-6;

/// The pieces of `f` when it is a minimum of quadratics (possibly wrapped).
pub(crate) fn quadratic_pieces(f: &TestFunction) -> Option<Vec<Quadratic>> {
    match f.kind() {
        FunctionKind::Quadratic(q) => Some(vec![q.clone()]),
        FunctionKind::MinQuadratics(m) => Some(m.pieces.clone()),
        FunctionKind::SmoothedBox(_) => None,
        FunctionKind::Transformed(t) => {
            if t.scale < 0.0 {
                return None;
            }
            let s = DVector::from_column_slice(&t.shift);
            let pieces = quadratic_pieces(&t.inner)?
                .into_iter()
                .map(|p| {
                    let n = p.dim();
                    let bv = DVector::from_column_slice(&p.b);
                    let qs = &p.q * &s;
                    let q = &p.q * t.scale + DMatrix::identity(n, n) * (2.0 * t.tilt);
                    let b = (qs.clone() + &bv) * t.scale;
                    let c = t.scale * (0.5 * s.dot(&qs) + bv.dot(&s) + p.c) + t.offset;
                    Quadratic {
                        q,
                        b: b.iter().copied().collect(),
                        c,
                    }
                })
                .collect();
            Some(pieces)
        }
    }
}

fn from_pieces(mut pieces: Vec<Quadratic>) -> Result<TestFunction> {
    for p in pieces.iter_mut() {
        p.q = (&p.q + p.q.transpose()) * 0.5;
    }
    if pieces.len() == 1 {
        let p = pieces.pop().expect("one piece");
        TestFunction::quadratic(p.q, p.b, p.c)
    } else {
        TestFunction::min_of(pieces)
    }
}

/// Every choice of one piece per input function, in lexicographic order.
fn combinations(counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &c in counts {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..c).map(move |k| {
                    let mut v = prefix.clone();
                    v.push(k);
                    v
                })
            })
            .collect();
    }
    out
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `y ↦ inf { ½xᵀHx + bᵀx + c : Px = y }` as a quadratic in `y`.
fn constrained_transfer(h: &DMatrix<f64>, b: &DVector<f64>, c: f64, p: &DMatrix<f64>) -> Result<Quadratic> {
    let n = h.nrows();
    let m = p.nrows();
    // Bounded below iff H is positive semidefinite on ker P.
    let pinv = p
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::internal(format!("pseudo-inverse failed: {e}")))?;
    let proj = DMatrix::identity(n, n) - &pinv * p;
    let reduced = &proj * h * &proj;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    if min_eigenvalue(&reduced) < -1e-10 * (1.0 + h.amax()) {
        return Err(Error::domain("the transfer is unbounded below on a constraint fibre"));
    }
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    kkt.view_mut((0, n), (n, m)).copy_from(&p.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(p);
    let lu = kkt.lu();
    let mut rhs = DMatrix::zeros(n + m, 1 + m);
    for i in 0..n {
        rhs[(i, 0)] = -b[i];
    }
    for k in 0..m {
        rhs[(n + k, 1 + k)] = 1.0;
    }
    let sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::domain("the transfer has no unique minimiser on a constraint fibre"))?;
    let xp = sol.view((0, 0), (n, 1)).clone_owned();
    let k = sol.view((0, 1), (n, m)).clone_owned();
    let hk = h * &k;
    let q = k.transpose() * &hk;
    let lin = k.transpose() * (h * &xp + b);
    let c0 = 0.5 * (xp.transpose() * h * &xp)[(0, 0)] + (b.transpose() * &xp)[(0, 0)] + c;
    Ok(Quadratic {
        q: (&q + q.transpose()) * 0.5,
        b: lin.iter().copied().collect(),
        c: c0,
    })
}

/// Rows of the assembled operator belonging to target `j`.
fn target_rows(a: &BlockOperator, j: usize) -> DMatrix<f64> {
    let full = a.assembled();
    let off = a.target.offsets();
    full.rows(off[j], a.target.dims[j]).clone_owned()
}

fn quadratic_transfer(
    pieces: &[Vec<Quadratic>],
    a: &BlockOperator,
    j: usize,
    factor: f64,
) -> Result<TestFunction> {
    let n = a.source.total_dim();
    let off = a.source.offsets();
    let rows = target_rows(a, j);
    let counts: Vec<usize> = pieces.iter().map(Vec::len).collect();
    let mut out = Vec::new();
    for combo in combinations(&counts) {
        let mut h = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = 0.0;
        for (i, &k) in combo.iter().enumerate() {
            let mu = a.source.weights[i];
            let p = &pieces[i][k];
            h.view_mut((off[i], off[i]), (p.dim(), p.dim())).copy_from(&(&p.q * mu));
            for r in 0..p.dim() {
                b[off[i] + r] = mu * p.b[r];
            }
            c += mu * p.c;
        }
        let mut g = constrained_transfer(&h, &b, c, &rows)?;
        g.q *= factor;
        g.b.iter_mut().for_each(|v| *v *= factor);
        g.c *= factor;
        out.push(g);
    }
    from_pieces(out)
}

/// `Σ μ_i f_i(x_i)` and its gradient.
fn source_sum(a: &BlockOperator, fs: &[TestFunction], x: &[f64], grad: &mut [f64]) -> f64 {
    let off = a.source.offsets();
    let mut v = 0.0;
    for (i, f) in fs.iter().enumerate() {
        let (lo, hi) = (off[i], off[i] + a.source.dims[i]);
        let mu = a.source.weights[i];
        v += mu * f.value_gradient(&x[lo..hi], &mut grad[lo..hi]);
        grad[lo..hi].iter_mut().for_each(|g| *g *= mu);
    }
    v
}

/// Orthonormal basis of the kernel of a single row `p`.
fn kernel_basis(p: &[f64]) -> Vec<Vec<f64>> {
    let n = p.len();
    let pv = DVector::from_column_slice(p);
    let proj = DMatrix::identity(n, n) - &pv * pv.transpose() / pv.norm_squared();
    let eig = SymmetricEigen::new(proj);
    (0..n)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect()
}

/// Minimum of a one-dimensional-parameter family `w ↦ φ(y, w)` at each
/// grid value `y`, warm-started along the grid.
fn grid_infima<F>(ys: &[f64], dim: usize, starts: &[Vec<f64>], phi: &mut F) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> f64,
{
    let opts = MinimizeOptions::default();
    let mut warm: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(ys.len());
    for &y in ys {
        let mut best = (f64::INFINITY, vec![0.0; dim]);
        let mut seeds: Vec<Vec<f64>> = starts.to_vec();
        if let Some(w) = &warm {
            seeds.push(w.clone());
        }
        for s in &seeds {
            let m = minimize(|w, g| phi(y, w, g), s, opts);
            let mut scratch = vec![0.0; dim];
            let v = phi(y, &m.x, &mut scratch);
            if v < best.0 {
                best = (v, m.x);
            }
        }
        if !best.0.is_finite() {
            return Err(Error::domain(format!("the infimum at y = {y} is not finite")));
        }
        out.push(best.0);
        warm = Some(best.1);
    }
    Ok(out)
}

/// Three interior points per grid cell.
fn probe_grid(ys: &[f64]) -> Vec<f64> {
    ys.windows(2)
        .flat_map(|w| (1..4).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / 4.0))
        .collect()
}

/// `min_k [g_k + s_k(y − y_k) + K(y − y_k)²]` through the sampled values,
/// with slopes from central differences and a curvature above the sampled
/// one, lowered by its largest excess over the infima at the probes.
fn fit_min_quadratics_1d(ys: &[f64], gs: &[f64], probes: &[f64], truth: &[f64]) -> Result<TestFunction> {
    let n = ys.len();
    let h = ys[1] - ys[0];
    let mut curv: f64 = 0.0;
    for k in 1..n - 1 {
        curv = curv.max((gs[k + 1] - 2.0 * gs[k] + gs[k - 1]) / (h * h));
    }
    let kappa = curv + 1e-3;
    let slope = |k: usize| {
        if k == 0 {
            (gs[1] - gs[0]) / h
        } else if k == n - 1 {
            (gs[n - 1] - gs[n - 2]) / h
        } else {
            (gs[k + 1] - gs[k - 1]) / (2.0 * h)
        }
    };
    let pieces: Vec<Quadratic> = (0..n)
        .map(|k| {
            let (y, g, s) = (ys[k], gs[k], slope(k));
            Quadratic {
                q: DMatrix::from_element(1, 1, 2.0 * kappa),
                b: vec![s - 2.0 * kappa * y],
                c: g - s * y + kappa * y * y,
            }
        })
        .collect();
    let fit = from_pieces(pieces)?;
    let residual = ys
        .iter()
        .zip(gs)
        .map(|(y, g)| g - fit.value(&[*y]))
        .fold(0.0, f64::max);
    if residual > FIT_RESIDUAL {
        return Err(Error::internal(format!(
            "min-of-quadratics fit misses the sampled infimum by {residual:e}"
        )));
    }
    let excess = probes
        .iter()
        .zip(truth)
        .map(|(y, g)| fit.value(&[*y]) - g)
        .fold(0.0, f64::max);
    Ok(if excess > 0.0 { fit.plus_constant(-excess) } else { fit })
}

fn fit_grid(half_width: f64) -> Vec<f64> {
    (0..FIT_POINTS)
        .map(|k| half_width * (2.0 * k as f64 / (FIT_POINTS - 1) as f64 - 1.0))
        .collect()
}

fn numeric_transfer(
    fs: &[TestFunction],
    a: &BlockOperator,
    j: usize,
    factor: f64,
    sampler: &SamplerSettings,
) -> Result<TestFunction> {
    if a.target.dims[j] != 1 {
        return Err(Error::usage(
            "numeric transfers are limited to one-dimensional targets; use quadratic inputs",
        ));
    }
    let row: Vec<f64> = target_rows(a, j).row(0).iter().copied().collect();
    let norm_sq: f64 = row.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return Err(Error::domain(format!("target {j} receives nothing from the sources")));
    }
    let reach = sampler.radius * row.iter().map(|v| v.abs()).sum::<f64>();
    let ys = fit_grid(reach);
    let z = kernel_basis(&row);
    let n = row.len();
    let starts = vec![vec![0.0; z.len()]];
    let mut x = vec![0.0; n];
    let mut gx = vec![0.0; n];
    let probes = probe_grid(&ys);
    let mut phi = |y: f64, w: &[f64], gw: &mut [f64]| {
        for k in 0..n {
            x[k] = row[k] * y / norm_sq + z.iter().zip(w).map(|(zc, wc)| zc[k] * wc).sum::<f64>();
        }
        let v = source_sum(a, fs, &x, &mut gx);
        for (c, zc) in z.iter().enumerate() {
            gw[c] = zc.iter().zip(&gx).map(|(p, q)| p * q).sum();
        }
        v
    };
    let values = grid_infima(&ys, z.len(), &starts, &mut phi)?;
    let truth = grid_infima(&probes, z.len(), &starts, &mut phi)?;
    let scale = |v: Vec<f64>| v.into_iter().map(|t| t * factor).collect::<Vec<_>>();
    fit_min_quadratics_1d(&ys, &scale(values), &probes, &scale(truth))
}

/// Output functions satisfying the basic assumption for the given inputs.
///
/// Each `g_j(y)` is the infimum of `Σ μ_i f_i(x_i)` over `(Ax)_j = y`,
/// divided by `Σ ν_j`. For minima of quadratics this is computed in closed
/// form; otherwise it is sampled on a grid (one-dimensional targets only),
/// fitted by a minimum of quadratics and shifted down by any violation the
/// assumption search finds.
pub fn tight_g_family(
    f_family: &[TestFunction],
    a: &BlockOperator,
    sampler: &SamplerSettings,
) -> Result<Vec<TestFunction>> {
    a.validate()?;
    if f_family.len() != a.source.size() {
        return Err(Error::usage("one input function per source index is required"));
    }
    for (i, f) in f_family.iter().enumerate() {
        if f.dim() != a.source.dims[i] {
            return Err(Error::usage(format!("f_{i} does not match the source dimension")));
        }
    }
    let norm = a.weighted_norm();
    if norm > 1.0 + NORM_TOL {
        return Err(Error::usage(format!("operator norm {norm} exceeds 1")));
    }
    let factor = 1.0 / a.target.mass();
    let pieces: Option<Vec<Vec<Quadratic>>> = f_family.iter().map(quadratic_pieces).collect();
    let exact = pieces
        .as_ref()
        .map(|p| p.iter().map(Vec::len).product::<usize>() <= MAX_COMBINATIONS)
        .unwrap_or(false);
    let mut gs = Vec::with_capacity(a.target.size());
    for j in 0..a.target.size() {
        gs.push(match (&pieces, exact) {
            (Some(p), true) => quadratic_transfer(p, a, j, factor)?,
            _ => numeric_transfer(f_family, a, j, factor, sampler)?,
        });
    }
    let check = search_defect(a, f_family, &gs, sampler)?;
    if !exact && check.worst_violation > 0.0 {
        let drop = (check.worst_violation + 1e-12) * factor;
        gs = gs.iter().map(|g| g.plus_constant(-drop)).collect();
    } else if check.worst_violation > ASSUMPTION_TOL {
        return Err(Error::internal(format!(
            "closed-form transfer violates the assumption by {:e}",
            check.worst_violation
        )));
    }
    if !exact {
        let recheck = search_defect(a, f_family, &gs, sampler)?;
        if recheck.worst_violation > ASSUMPTION_TOL {
            return Err(Error::internal(format!(
                "fitted transfer still violates the assumption by {:e}",
                recheck.worst_violation
            )));
        }
    }
    Ok(gs)
}

fn check_mix(alpha: f64, beta: f64, lambda: f64) -> Result<()> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("lambda", lambda)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::usage(format!("{name} must lie in (0, 1), got {v}")));
        }
    }
    Ok(())
}

/// The closed form of `g_{α,β,λ}` for a pair of quadratic pieces.
fn tau_pair(p0: &Quadratic, p1: &Quadratic, alpha: f64, beta: f64, lambda: f64) -> Result<Quadratic> {
    let n = p0.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let (a, b1) = (alpha, beta);
    let h = &p0.q * ((1.0 - b1) * a * a) + &p1.q * (b1 * (1.0 - a) * (1.0 - a)) + &id * (2.0 * lambda * a * (1.0 - a));
    let h = (&h + h.transpose()) * 0.5;
    let chol = h
        .clone()
        .cholesky()
        .ok_or_else(|| Error::domain("the mixed infimal convolution is −∞ (indefinite inner problem)"))?;
    let m = &p0.q * ((1.0 - b1) * a) - &p1.q * (b1 * (1.0 - a));
    let bv0 = DVector::from_column_slice(&p0.b);
    let bv1 = DVector::from_column_slice(&p1.b);
    let e = &bv0 * ((1.0 - b1) * a) - &bv1 * (b1 * (1.0 - a));
    let hm = chol.solve(&m);
    let he = chol.solve(&e);
    let q = &p0.q * (1.0 - b1) + &p1.q * b1 - m.transpose() * &hm;
    let b = &bv0 * (1.0 - b1) + &bv1 * b1 - m.transpose() * &he;
    let c = (1.0 - b1) * p0.c + b1 * p1.c - 0.5 * e.dot(&he);
    Ok(Quadratic {
        q: (&q + q.transpose()) * 0.5,
        b: b.iter().copied().collect(),
        c,
    })
}

/// `g_{α,β,λ}(x) = inf { (1−β)f₀(x₀) + βf₁(x₁) + λα(1−α)|x₀−x₁|² : x = (1−α)x₀ + αx₁ }`.
///
/// Closed form when both inputs are minima of quadratics; otherwise a
/// grid fit on `[−radius, radius]` (one dimension only).
pub fn tau_g(
    f0: &TestFunction,
    f1: &TestFunction,
    alpha: f64,
    beta: f64,
    lambda: f64,
    radius: f64,
) -> Result<TestFunction> {
    check_mix(alpha, beta, lambda)?;
    if f0.dim() != f1.dim() {
        return Err(Error::usage("f₀ and f₁ must share a dimension"));
    }
    if let (Some(p0), Some(p1)) = (quadratic_pieces(f0), quadratic_pieces(f1)) {
        if p0.len() * p1.len() <= MAX_COMBINATIONS {
            let mut out = Vec::new();
            for a in &p0 {
                for b in &p1 {
                    out.push(tau_pair(a, b, alpha, beta, lambda)?);
                }
            }
            return from_pieces(out);
        }
    }
    if f0.dim() != 1 {
        return Err(Error::usage("numeric infimal convolutions are limited to one dimension"));
    }
    let ys = fit_grid(radius);
    let kappa = lambda * alpha * (1.0 - alpha);
    let starts: Vec<Vec<f64>> = [-2.0, 0.0, 2.0].iter().map(|w| vec![*w]).collect();
    let mut g0 = [0.0];
    let mut g1 = [0.0];
    let probes = probe_grid(&ys);
    let mut phi = |x: f64, w: &[f64], gw: &mut [f64]| {
        let x0 = [x - alpha * w[0]];
        let x1 = [x + (1.0 - alpha) * w[0]];
        let v = (1.0 - beta) * f0.value_gradient(&x0, &mut g0)
            + beta * f1.value_gradient(&x1, &mut g1)
            + kappa * w[0] * w[0];
        gw[0] = -(1.0 - beta) * alpha * g0[0] + beta * (1.0 - alpha) * g1[0] + 2.0 * kappa * w[0];
        v
    };
    let values = grid_infima(&ys, 1, &starts, &mut phi)?;
    let truth = grid_infima(&probes, 1, &starts, &mut phi)?;
    fit_min_quadratics_1d(&ys, &values, &probes, &truth)
}

/// The two-point statement for `g_{α,β,λ}` and `g_{1−α,1−β,1−λ}` under the
/// mixing operator with `s = α`, `t = 1 − α`, `r = ½`.
///
/// The first scenario is against the standard Gaussian with the assumption
/// checked on the tilted functions; the second states the same inequality
/// for the flat measure with the tilt written into the functions. Both have
/// the same margin.
pub fn tau_property_scenario(
    alpha: f64,
    beta: f64,
    lambda: f64,
    f0: &TestFunction,
    f1: &TestFunction,
    sampler: &SamplerSettings,
) -> Result<(Scenario, Scenario)> {
    check_mix(alpha, beta, lambda)?;
    let n = f0.dim();
    let op = propm_gen_operator(alpha, 1.0 - alpha, 0.5, n)?;
    let exact = quadratic_pieces(f0).is_some() && quadratic_pieces(f1).is_some();
    let mut g0 = tau_g(f0, f1, alpha, beta, lambda, sampler.radius)?;
    let mut g1 = tau_g(f0, f1, 1.0 - alpha, 1.0 - beta, 1.0 - lambda, sampler.radius)?;
    let name = format!("tau-property({alpha},{beta},{lambda})");
    let tilted = |g0: &TestFunction, g1: &TestFunction| Scenario {
        name: name.clone(),
        operator: op.clone(),
        projections: None,
        decomposition: None,
        f_family: vec![f0.clone(), f1.clone()],
        g_family: vec![g0.clone(), g1.clone()],
        measure: ReferenceMeasure::Gaussian { tau: 1.0 },
        gaussian_tilt: true,
        sampler: *sampler,
    };
    let mut sc = tilted(&g0, &g1);
    let (fs, gs) = sc.assumption_families();
    let check = search_defect(&sc.operator, &fs, &gs, sampler)?;
    if !exact && check.worst_violation > 0.0 {
        // Weights ½ + ½: lowering both by d lowers the left side by d.
        let drop = check.worst_violation + 1e-12;
        g0 = g0.plus_constant(-drop);
        g1 = g1.plus_constant(-drop);
        sc = tilted(&g0, &g1);
    } else if check.worst_violation > ASSUMPTION_TOL {
        return Err(Error::internal(format!(
            "closed-form g violates the tilted assumption by {:e}",
            check.worst_violation
        )));
    }
    let flat = Scenario {
        name: format!("{name}-flat"),
        f_family: sc.f_family.iter().map(|f| f.plus_isotropic(0.5)).collect(),
        g_family: sc.g_family.iter().map(|g| g.plus_isotropic(0.5)).collect(),
        measure: ReferenceMeasure::Flat,
        gaussian_tilt: false,
        ..sc.clone()
    };
    Ok((sc, flat))
}
