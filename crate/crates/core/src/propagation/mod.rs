//! Chebyshev spectral propagation of an embedding over the graph.
//!
//! With the self-looped graph `Ã = A + I`, `D̃ = D + I`, the propagation
//! operator is `M̂ = (I - D̃⁻¹Ã) - μI`. The filter expands a Gaussian
//! band-pass around `μ` in Chebyshev polynomials of `½M̂² - I` whose
//! coefficients are modified Bessel values `I_r(θ)`:
//!
//! ```text
//! L₀ = X
//! L₁ = ½ M̂(M̂ X) - X
//! Lᵢ = M̂(M̂ Lᵢ₋₁) - 2Lᵢ₋₁ - Lᵢ₋₂              i = 2..k-1
//! conv = I₀(θ)L₀ - 2I₁(θ)L₁ + Σᵢ (-1)ⁱ 2Iᵢ(θ)Lᵢ
//! out  = D̃⁻¹Ã (X - conv)
//! ```
//!
//! `k = 1` returns `X` unchanged. Arithmetic is done in `f64`.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::randsvd::Embedding;

#[derive(Debug, Error)]
pub enum PropagationError {
    #[error("embedding has {got} rows but the graph has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid propagation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Number of Chebyshev terms `k`.
    pub steps: usize,
    /// Band center.
    pub mu: f64,
    /// Bessel argument.
    pub theta: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self { steps: 10, mu: 0.2, theta: 0.5 }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if self.steps < 1 {
            return Err(PropagationError::InvalidParams("k must be at least 1".into()));
        }
        if !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(PropagationError::InvalidParams(format!("theta = {} must be positive", self.theta)));
        }
        if !self.mu.is_finite() {
            return Err(PropagationError::InvalidParams("mu must be finite".into()));
        }
        Ok(())
    }
}

/// Modified Bessel function of the first kind `I_r(θ)` by its power series
/// `Σ_m (θ/2)^{2m+r} / (m! (m+r)!)`.
pub fn modified_bessel_i(r: u32, theta: f64) -> f64 {
    let half = theta / 2.0;
    let mut term = (1..=r).fold(1.0, |acc, j| acc * half / f64::from(j));
    let mut sum = term;
    let sq = half * half;
    let mut m = 0.0;
    while term != 0.0 && term > 1e-16 * sum {
        m += 1.0;
        term *= sq / (m * (m + f64::from(r)));
        sum += term;
    }
    sum
}

/// Plain CSR view of the adjacency, decoded once.
struct Adjacency {
    indptr: Vec<usize>,
    indices: Vec<VertexId>,
}

impl Adjacency {
    fn new(g: &Graph) -> Self {
        let mut indptr = Vec::with_capacity(g.num_vertices() + 1);
        let mut indices = Vec::with_capacity(g.volume() as usize);
        indptr.push(0);
        for u in 0..g.num_vertices() as VertexId {
            indices.extend_from_slice(&g.neighbors(u));
            indptr.push(indices.len());
        }
        Self { indptr, indices }
    }

    fn neighbors(&self, u: usize) -> &[VertexId] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    /// `out_u = a·x_u + b · (s x_u + Σ_{v~u} x_v) / (deg_u + s)`, with `s`
    /// the self-loop weight. A row with no neighbors and `s = 0` gets
    /// `b · 0`.
    fn combine(&self, x: &[f64], d: usize, self_loop: f64, a: f64, b: f64) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        out.par_chunks_mut(d).enumerate().for_each(|(u, row)| {
            let nbrs = self.neighbors(u);
            let own = &x[u * d..(u + 1) * d];
            let mut acc: Vec<f64> = own.iter().map(|v| self_loop * v).collect();
            for &v in nbrs {
                for (s, xv) in acc.iter_mut().zip(&x[v as usize * d..(v as usize + 1) * d]) {
                    *s += xv;
                }
            }
            let denom = nbrs.len() as f64 + self_loop;
            let scale = if denom > 0.0 { b / denom } else { 0.0 };
            for ((o, own), s) in row.iter_mut().zip(own).zip(acc) {
                *o = a * own + scale * s;
            }
        });
        out
    }
}

fn to_f64(x: ArrayView2<'_, f32>) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

fn check_rows(g: &Graph, x: ArrayView2<'_, f32>) -> Result<(), PropagationError> {
    if x.nrows() != g.num_vertices() {
        return Err(PropagationError::DimensionMismatch { expected: g.num_vertices(), got: x.nrows() });
    }
    Ok(())
}

/// `X - D⁻¹AX`. Isolated vertices pass through unchanged.
pub fn normalized_laplacian_apply(g: &Graph, x: ArrayView2<'_, f32>) -> Result<Array2<f32>, PropagationError> {
    check_rows(g, x)?;
    let d = x.ncols();
    let out = Adjacency::new(g).combine(&to_f64(x), d, 0.0, 1.0, -1.0);
    Ok(Array2::from_shape_vec(x.dim(), out.into_iter().map(|v| v as f32).collect()).expect("shape"))
}

/// Enhances `x` with the Chebyshev band-pass filter described in the module
/// docs.
pub fn chebyshev_propagate(g: &Graph, x: &Embedding, p: &PropagationParams) -> Result<Embedding, PropagationError> {
    p.validate()?;
    check_rows(g, x.0.view())?;
    if p.steps == 1 {
        return Ok(x.clone());
    }
    let d = x.dim();
    let adj = Adjacency::new(g);
    // M̂ y = (1 - μ) y - D̃⁻¹Ã y
    let shifted = |y: &[f64]| adj.combine(y, d, 1.0, 1.0 - p.mu, -1.0);

    let x0 = to_f64(x.0.view());
    let mut prev = x0.clone();
    let mx = shifted(&x0);
    let mut cur: Vec<f64> = shifted(&mx).iter().zip(&x0).map(|(a, b)| 0.5 * a - b).collect();

    let i0 = modified_bessel_i(0, p.theta);
    let i1 = modified_bessel_i(1, p.theta);
    let mut conv: Vec<f64> = x0.iter().zip(&cur).map(|(a, b)| i0 * a - 2.0 * i1 * b).collect();

    for i in 2..p.steps {
        let mm = shifted(&shifted(&cur));
        let next: Vec<f64> = mm.iter().zip(&cur).zip(&prev).map(|((m, c), p0)| m - 2.0 * c - p0).collect();
        let coef = 2.0 * modified_bessel_i(i as u32, p.theta);
        let coef = if i % 2 == 0 { coef } else { -coef };
        conv.par_iter_mut().zip(&next).for_each(|(c, n)| *c += coef * n);
        prev = std::mem::replace(&mut cur, next);
    }

    let diff: Vec<f64> = x0.iter().zip(&conv).map(|(a, c)| a - c).collect();
    let out = adj.combine(&diff, d, 1.0, 0.0, 1.0);
    Ok(Embedding(
        Array2::from_shape_vec((g.num_vertices(), d), out.into_iter().map(|v| v as f32).collect()).expect("shape"),
    ))
}
