//! Dense brute-force references used by tests and the acceptance suite.
//!
//! Nothing here shares code with the sparse pipeline it checks.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use super::EvalError;
use crate::graph::{Graph, VertexId};
use crate::propagation::{modified_bessel_i, PropagationParams};
use crate::sparsifier::SparseMatrix;

pub const NETMF_ORACLE_MAX_N: usize = 2000;
pub const RESISTANCE_ORACLE_MAX_N: usize = 500;

pub fn dense_adjacency(g: &Graph) -> Array2<f64> {
    let n = g.num_vertices();
    let mut a = Array2::zeros((n, n));
    for (u, v) in g.edges() {
        a[(u as usize, v as usize)] = 1.0;
        a[(v as usize, u as usize)] = 1.0;
    }
    a
}

pub fn sparse_to_dense(m: &SparseMatrix) -> Array2<f64> {
    let n = m.dim();
    let mut out = Array2::zeros((n, n));
    for r in 0..n {
        let (cols, vals) = m.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            out[(r, c as usize)] = f64::from(v);
        }
    }
    out
}

/// `vol(G)/b · Σ_r s_r (D⁻¹A)^r D⁻¹`, before the truncated logarithm.
/// Isolated vertices get zero rows and columns.
pub fn dense_netmf_raw(g: &Graph, s_coeffs: &[f64], b: f64) -> Result<Array2<f64>, EvalError> {
    let n = g.num_vertices();
    if n > NETMF_ORACLE_MAX_N {
        return Err(EvalError::TooLarge { n, max: NETMF_ORACLE_MAX_N });
    }
    let a = dense_adjacency(g);
    let inv_deg: Vec<f64> = (0..n)
        .map(|u| match g.degree(u as VertexId) {
            0 => 0.0,
            d => 1.0 / f64::from(d),
        })
        .collect();
    let mut walk = a.clone();
    for (mut row, &w) in walk.rows_mut().into_iter().zip(&inv_deg) {
        row *= w;
    }
    let mut power = Array2::from_diag(&ndarray::Array1::from(inv_deg));
    let mut acc = Array2::<f64>::zeros((n, n));
    for &s in s_coeffs {
        power = walk.dot(&power);
        acc.scaled_add(s, &power);
    }
    Ok(acc * (g.volume() as f64 / b))
}

/// The NetMF matrix: `max(0, ln x)` of [`dense_netmf_raw`].
pub fn dense_netmf_oracle(g: &Graph, s_coeffs: &[f64], b: f64) -> Result<Array2<f64>, EvalError> {
    Ok(dense_netmf_raw(g, s_coeffs, b)?.mapv(|x| if x > 1.0 { x.ln() } else { 0.0 }))
}

pub fn is_connected(g: &Graph) -> bool {
    let n = g.num_vertices();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0 as VertexId]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u).iter() {
            if !seen[v as usize] {
                seen[v as usize] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

/// Effective resistance `(e_u - e_v)ᵀ L⁺ (e_u - e_v)` of every edge, via
/// `L⁺ = (L + J/n)⁻¹ - J/n`.
pub fn effective_resistance_oracle(g: &Graph) -> Result<Vec<(VertexId, VertexId, f64)>, EvalError> {
    let n = g.num_vertices();
    if n > RESISTANCE_ORACLE_MAX_N {
        return Err(EvalError::TooLarge { n, max: RESISTANCE_ORACLE_MAX_N });
    }
    if !is_connected(g) {
        return Err(EvalError::Disconnected);
    }
    let j = 1.0 / n as f64;
    let mut l = DMatrix::<f64>::from_element(n, n, j);
    for u in 0..n {
        l[(u, u)] += f64::from(g.degree(u as VertexId));
    }
    for (u, v) in g.edges() {
        l[(u as usize, v as usize)] -= 1.0;
        l[(v as usize, u as usize)] -= 1.0;
    }
    let inv = l.cholesky().ok_or(EvalError::Disconnected)?.inverse();
    // the J/n correction cancels in (e_u - e_v)ᵀ · (e_u - e_v)
    Ok(g.edges()
        .into_iter()
        .map(|(u, v)| {
            let (a, b) = (u as usize, v as usize);
            (u, v, inv[(a, a)] + inv[(b, b)] - 2.0 * inv[(a, b)])
        })
        .collect())
}

/// Singular values, descending, by one-sided Jacobi rotations in `f64`.
pub fn jacobi_singular_values(x: ArrayView2<'_, f32>) -> Vec<f64> {
    let (n, k) = x.dim();
    let mut cols: Vec<Vec<f64>> = (0..k).map(|j| x.column(j).iter().map(|&v| f64::from(v)).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (alpha, beta, gamma) = (0..n).fold((0.0, 0.0, 0.0), |(a, b, c), i| {
                    let (xp, xq) = (cols[p][i], cols[q][i]);
                    (a + xp * xp, b + xq * xq, c + xp * xq)
                });
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                for (a, b) in left[p].iter_mut().zip(right[0].iter_mut()) {
                    let (xp, xq) = (*a, *b);
                    *a = c * xp - s * xq;
                    *b = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

fn sparse_matvec(m: &SparseMatrix, x: &[f64]) -> Vec<f64> {
    (0..m.dim())
        .map(|r| {
            let (cols, vals) = m.row(r);
            cols.iter().zip(vals).map(|(&c, &v)| f64::from(v) * x[c as usize]).sum()
        })
        .collect()
}

/// `‖M - Q Qᵀ M‖₂` for symmetric `M` and orthonormal `Q`: the square root
/// of the top eigenvalue of `M (I - QQᵀ) M`, found by Lanczos with full
/// reorthogonalization in `f64`.
pub fn projection_residual_norm(m: &SparseMatrix, q: ArrayView2<'_, f32>) -> f64 {
    let n = m.dim();
    let qd: Array2<f64> = q.mapv(f64::from);
    let apply = |v: &[f64]| -> Vec<f64> {
        let mv = ndarray::Array1::from(sparse_matvec(m, v));
        let coeffs = qd.t().dot(&mv);
        sparse_matvec(m, (&mv - &qd.dot(&coeffs)).as_slice().expect("contiguous"))
    };
    let steps = n.min(200);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let start: Vec<f64> = (0..n).map(|i| 1.0 + (crate::rng::mix64(i as u64) % 1000) as f64 / 1000.0).collect();
    let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
    basis.push(start.iter().map(|x| x / norm).collect());
    let mut top = 0.0;
    let mut calm = 0;
    for j in 0..steps {
        let mut w = apply(&basis[j]);
        let a: f64 = w.iter().zip(&basis[j]).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let t = DMatrix::from_fn(j + 1, j + 1, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let ritz = t.symmetric_eigenvalues().max();
        let b = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        calm = if j > 0 && (ritz - top).abs() <= 1e-13 * ritz.abs() { calm + 1 } else { 0 };
        top = ritz;
        if calm >= 5 || b <= 1e-14 * ritz.abs().max(f64::MIN_POSITIVE) || j + 1 == steps {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    top.max(0.0).sqrt()
}

/// `X - D⁻¹AX` with dense matrices.
pub fn dense_laplacian_apply(g: &Graph, x: &Array2<f32>) -> Array2<f64> {
    let n = g.num_vertices();
    let mut walk = dense_adjacency(g);
    for u in 0..n {
        let d = f64::from(g.degree(u as VertexId));
        if d > 0.0 {
            walk.row_mut(u).mapv_inplace(|v| v / d);
        }
    }
    let xd = x.mapv(f64::from);
    &xd - &walk.dot(&xd)
}

/// The Chebyshev propagation recurrence with explicit dense operators.
pub fn dense_chebyshev_propagate(g: &Graph, x: &Array2<f32>, p: &PropagationParams) -> Array2<f64> {
    let n = g.num_vertices();
    let xd = x.mapv(f64::from);
    if p.steps == 1 {
        return xd;
    }
    let eye = Array2::<f64>::eye(n);
    let mut a_hat = dense_adjacency(g) + &eye;
    for u in 0..n {
        let s = a_hat.row(u).sum();
        a_hat.row_mut(u).mapv_inplace(|v| v / s);
    }
    let laplacian = &eye - &a_hat;
    let m = &laplacian - &(&eye * p.mu);

    let mut l0 = xd.clone();
    let mut l1 = m.dot(&xd);
    l1 = m.dot(&l1) * 0.5 - &xd;
    let mut conv = &l0 * modified_bessel_i(0, p.theta) - &l1 * (2.0 * modified_bessel_i(1, p.theta));
    for i in 2..p.steps {
        let l2 = m.dot(&m.dot(&l1)) - &l1 * 2.0 - &l0;
        let c = 2.0 * modified_bessel_i(i as u32, p.theta);
        if i % 2 == 0 {
            conv = conv + &l2 * c;
        } else {
            conv = conv - &l2 * c;
        }
        l0 = l1;
        l1 = l2;
    }
    a_hat.dot(&(xd - conv))
}
