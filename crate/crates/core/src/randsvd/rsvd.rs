use ndarray::{s, Array2};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{eig_svd, SvdError, SvdFactors, SvdParams};
use crate::rng::{stream, Domain};
use crate::sparsifier::SparseMatrix;

/// `n × cols` standard Gaussian matrix; row `i` comes from stream
/// `(seed, i)`.
pub fn gaussian_projection(n: usize, cols: usize, seed: u64) -> Array2<f32> {
    let mut omega = Array2::<f32>::zeros((n, cols));
    if cols == 0 {
        return omega;
    }
    omega.as_slice_mut().expect("fresh array").par_chunks_mut(cols).enumerate().for_each(|(row, out)| {
        let mut rng = stream(seed, Domain::Projection, row as u64);
        for o in out {
            let z: f64 = StandardNormal.sample(&mut rng);
            *o = z as f32;
        }
    });
    omega
}

/// Fast randomized SVD of a symmetric matrix.
///
/// ```text
/// Ω = randn(n, d + s);  Q = eigSVD(M Ω).U
/// repeat q times:  T = Q;  (Q, Σ, V) = eigSVD(M Q)
/// U = Q[:, :d],  Σ = Σ[:d],  V = (T V)[:, :d]
/// ```
pub fn fast_randomized_svd(m: &SparseMatrix, p: &SvdParams) -> Result<SvdFactors, SvdError> {
    fast_randomized_svd_with_basis(m, p).map(|(f, _)| f)
}

/// Like [`fast_randomized_svd`], also returning the full `n × (d + s)`
/// orthonormal basis `Q` of the last power iteration.
pub fn fast_randomized_svd_with_basis(m: &SparseMatrix, p: &SvdParams) -> Result<(SvdFactors, Array2<f32>), SvdError> {
    let n = m.dim();
    p.validate(n)?;
    let cols = p.dim + p.oversampling;

    let omega = gaussian_projection(n, cols, p.seed);
    let mut q = eig_svd(m.spmm(omega.view()).view())?.u;
    let mut last = None;
    for _ in 0..p.power_iters {
        let y = m.spmm(q.view());
        let step = eig_svd(y.view())?;
        let prev = std::mem::replace(&mut q, step.u);
        last = Some((prev, step.s, step.v));
    }
    let (t, sigma, v_small) = last.expect("power_iters >= 1");

    let d = p.dim;
    let factors = SvdFactors {
        u: q.slice(s![.., ..d]).to_owned(),
        sigma: sigma[..d].to_vec(),
        v: t.dot(&v_small.slice(s![.., ..d])),
    };
    Ok((factors, q))
}
