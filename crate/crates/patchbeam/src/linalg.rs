//! Static equilibrium and eigenvalues of the assembled beam Jacobian.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat};

use patchbeam_core::{Jacobian, ModeShape, SparseMatrix};

use crate::error::{Error, Result};

/// Sparse LU factors of a square matrix.
pub struct Factor {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl Factor {
    pub fn new(m: &SparseMatrix) -> Result<Self> {
        let triplets: Vec<_> = m.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(m.n_rows, m.n_cols, &triplets)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|_| Error::RankDeficient { residual: f64::INFINITY })?;
        Ok(Self { lu, n: m.n_rows })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let mut col = Mat::from_fn(self.n, 1, |i, _| x[i]);
        self.lu.solve_in_place(col.as_mut());
        for (i, v) in x.iter_mut().enumerate() {
            *v = col[(i, 0)];
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Displacements `d` with `K d + base = 0`, refined until the acceleration
/// residual max-norm drops below `tol` or `max_iter` refinements are spent.
/// Returns the solution and its final residual.
pub fn solve_static(stiffness: &SparseMatrix, base: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let n = base.len();
    if max_abs(base) == 0.0 {
        return Ok((vec![0.0; n], 0.0));
    }
    let factor = Factor::new(stiffness)?;
    let mut d = vec![0.0; n];
    let mut r: Vec<f64> = base.iter().map(|b| -b).collect();
    let mut residual = f64::INFINITY;
    for _ in 0..=max_iter {
        factor.solve_in_place(&mut r);
        d.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
        stiffness.matvec(&d, &mut r);
        r.iter_mut().zip(base).for_each(|(a, b)| *a += b);
        residual = max_abs(&r);
        if !residual.is_finite() || d.iter().any(|x| !x.is_finite()) {
            return Err(Error::RankDeficient { residual });
        }
        if residual < tol {
            return Ok((d, residual));
        }
        r.iter_mut().for_each(|x| *x = -*x);
    }
    Err(Error::RankDeficient { residual })
}

/// One eigenvalue of the first-order system with the displacement part of
/// its eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: c64,
    pub shape: ModeShape,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative Ritz residual accepted as converged.
    pub tol: f64,
    pub max_restarts: usize,
    /// Systems with at most this many first-order unknowns use a dense
    /// solver; larger ones use shift-invert Arnoldi.
    pub dense_limit: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_restarts: 8, dense_limit: 1200 }
    }
}

/// The `count` eigenvalues of smallest magnitude, one per conjugate pair
/// (the `Im >= 0` member), sorted by ascending `|Im|`.
pub fn eigenmodes(jac: &Jacobian, count: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let pairs = if 2 * jac.n_dof() <= opts.dense_limit { dense_eigen(jac)? } else { arnoldi(jac, count, opts)? };
    Ok(select(pairs, count))
}

fn select(mut pairs: Vec<EigenPair>, count: usize) -> Vec<EigenPair> {
    pairs.retain(|p| p.value.im >= -1e-12 * p.value.norm().max(1e-300));
    pairs.sort_by(|a, b| {
        a.value.im.abs().total_cmp(&b.value.im.abs()).then(a.value.re.total_cmp(&b.value.re))
    });
    // Near-real members of a pair can both survive the filter.
    let mut out: Vec<EigenPair> = Vec::with_capacity(count);
    for p in pairs {
        let dup = out.last().is_some_and(|q| {
            (q.value.re - p.value.re).abs() <= 1e-10 * p.value.norm()
                && (q.value.im + p.value.im).abs() <= 1e-10 * p.value.norm()
                && p.value.im.abs() <= 1e-8 * p.value.norm()
        });
        if !dup {
            out.push(p);
        }
        if out.len() == count {
            break;
        }
    }
    out
}

fn dense_eigen(jac: &Jacobian) -> Result<Vec<EigenPair>> {
    let n = jac.n_dof();
    let mut j = Mat::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
    }
    for (r, c, v) in jac.stiffness.iter() {
        j[(n + r, c)] = v;
    }
    for (r, c, v) in jac.damping.iter() {
        j[(n + r, n + c)] = v;
    }
    let evd = j.eigen().map_err(|e| Error::Backend(format!("{e:?}")))?;
    let u = evd.U();
    let s = evd.S().column_vector();
    Ok((0..2 * n)
        .map(|m| EigenPair {
            value: s[m],
            shape: ModeShape { re: (0..n).map(|i| u[(i, m)].re).collect(), im: (0..n).map(|i| u[(i, m)].im).collect() },
        })
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shift-invert Arnoldi about zero: the operator is
/// `J^-1 [a; b] = [K^-1 (b - C a); a]`, whose dominant eigenvalues are the
/// reciprocals of the smallest eigenvalues of `J`.
fn arnoldi(jac: &Jacobian, count: usize, opts: &EigenOptions) -> Result<Vec<EigenPair>> {
    let n = jac.n_dof();
    let dim = 2 * n;
    let factor = Factor::new(&jac.stiffness)?;
    let apply = |x: &[f64], y: &mut [f64]| {
        let (a, b) = x.split_at(n);
        let (top, bottom) = y.split_at_mut(n);
        jac.damping.matvec(a, top);
        top.iter_mut().zip(b).for_each(|(t, bv)| *t = bv - *t);
        factor.solve_in_place(top);
        bottom.copy_from_slice(a);
    };
    // Both members of each conjugate pair plus a guard band.
    let wanted = 2 * count + 4;
    let m = (3 * wanted).max(wanted + 60).min(dim);
    let mut start: Vec<f64> = (0..dim).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7).fract()).collect();
    let mut last_residuals = Vec::new();
    for _ in 0..=opts.max_restarts {
        let (v, h, beta, steps) = arnoldi_basis(&apply, &start, m, dim);
        let hm = Mat::from_fn(steps, steps, |i, j| h[i][j]);
        let evd = hm.eigen().map_err(|e| Error::Backend(format!("{e:?}")))?;
        let s = evd.U();
        let theta = evd.S().column_vector();
        let mut order: Vec<usize> = (0..steps).collect();
        order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()));
        order.truncate(wanted.min(steps));
        let mut converged = Vec::new();
        last_residuals.clear();
        for &q in &order {
            let res = beta * s[(steps - 1, q)].norm() / theta[q].norm().max(1e-300);
            last_residuals.push(res);
            if res <= opts.tol || steps == dim {
                converged.push(q);
            }
        }
        // The tail of the wanted band may split a conjugate pair; only the
        // requested count has to converge.
        let needed = (2 * count).min(order.len());
        if order[..needed].iter().all(|q| converged.contains(q)) {
            return Ok(order[..needed]
                .iter()
                .map(|&q| {
                    let mut re = vec![0.0; n];
                    let mut im = vec![0.0; n];
                    for (k, vk) in v.iter().enumerate().take(steps) {
                        let c = s[(k, q)];
                        for i in 0..n {
                            re[i] += c.re * vk[i];
                            im[i] += c.im * vk[i];
                        }
                    }
                    let t = theta[q];
                    let value = c64::new(1.0, 0.0) / t;
                    EigenPair { value, shape: ModeShape { re, im } }
                })
                .collect());
        }
        // Explicit restart from the wanted Ritz vectors.
        start = vec![0.0; dim];
        for &q in &order[..needed] {
            for (k, vk) in v.iter().enumerate().take(steps) {
                let c = s[(k, q)];
                let w = c.re + c.im;
                for i in 0..dim {
                    start[i] += w * vk[i];
                }
            }
        }
    }
    let converged = last_residuals.iter().filter(|&&r| r <= opts.tol).count();
    let mut worst = last_residuals.clone();
    worst.sort_by(|a, b| b.total_cmp(a));
    worst.truncate(5);
    Err(Error::EigenNotConverged { converged, requested: 2 * count, residuals: worst })
}

type Basis = (Vec<Vec<f64>>, Vec<Vec<f64>>, f64, usize);

/// Arnoldi with two-pass Gram-Schmidt. Returns the basis, the square
/// Hessenberg block, the trailing subdiagonal entry and the step count.
fn arnoldi_basis(apply: &impl Fn(&[f64], &mut [f64]), start: &[f64], m: usize, dim: usize) -> Basis {
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let norm = dot(start, start).sqrt();
    v.push(start.iter().map(|x| x / norm).collect());
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut w = vec![0.0; dim];
    let mut beta = 0.0;
    for j in 0..m {
        apply(&v[j], &mut w);
        for _ in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                h[i][j] += c;
                w.iter_mut().zip(vi).for_each(|(a, b)| *a -= c * b);
            }
        }
        beta = dot(&w, &w).sqrt();
        if j + 1 == m {
            break;
        }
        h[j + 1][j] = beta;
        if beta <= 1e-14 * h[j][j].abs().max(1.0) {
            return (v, h, 0.0, j + 1);
        }
        v.push(w.iter().map(|x| x / beta).collect());
    }
    (v, h, beta, m)
}
