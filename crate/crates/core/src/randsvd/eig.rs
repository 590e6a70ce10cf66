use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use super::SvdError;

/// Rows per partial Gram block. Fixed so the summation order is independent
/// of the thread count.
const GRAM_CHUNK: usize = 512;
/// Eigenvalues below this fraction of the largest are clamped before the
/// square root.
const EIG_FLOOR: f64 = 1e-12;

/// Economy SVD `X = U diag(s) Vᵀ` of a tall `n × k` matrix.
#[derive(Clone, Debug)]
pub struct EigSvd {
    /// `n × k`, orthonormal columns.
    pub u: Array2<f32>,
    /// Descending.
    pub s: Vec<f32>,
    /// `k × k` orthogonal.
    pub v: Array2<f32>,
}

/// `XᵀX` accumulated in double precision.
fn gram(x: &[f32], k: usize) -> DMatrix<f64> {
    let partials: Vec<Vec<f64>> = x
        .par_chunks(GRAM_CHUNK * k)
        .map(|block| {
            let mut acc = vec![0.0f64; k * k];
            for row in block.chunks_exact(k) {
                for i in 0..k {
                    let ri = f64::from(row[i]);
                    if ri == 0.0 {
                        continue;
                    }
                    let line = &mut acc[i * k..(i + 1) * k];
                    for j in i..k {
                        line[j] += ri * f64::from(row[j]);
                    }
                }
            }
            acc
        })
        .collect();
    let mut c = DMatrix::<f64>::zeros(k, k);
    for part in &partials {
        for i in 0..k {
            for j in i..k {
                c[(i, j)] += part[i * k + j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }
    c
}

/// eigSVD: eigendecompose `C = XᵀX = V D Vᵀ`, set `S = sqrt(D)` and
/// `U = X V S⁻¹`. Pairs are ordered by descending singular value.
pub fn eig_svd(x: ArrayView2<'_, f32>) -> Result<EigSvd, SvdError> {
    let (n, k) = x.dim();
    if k > n {
        return Err(SvdError::InvalidParams(format!("eigSVD needs a tall matrix, got {n}x{k}")));
    }
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    if k == 0 {
        return Ok(EigSvd { u: Array2::zeros((n, 0)), s: vec![], v: Array2::zeros((0, 0)) });
    }

    let eig = SymmetricEigen::new(gram(xs, k));
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = if top > 0.0 { EIG_FLOOR * top } else { f64::MIN_POSITIVE };
    let s: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(floor).sqrt()).collect();

    // W = V S⁻¹, k × k, row-major
    let mut w = vec![0.0f64; k * k];
    let mut v = Array2::<f32>::zeros((k, k));
    for (col, &src) in order.iter().enumerate() {
        for row in 0..k {
            let val = eig.eigenvectors[(row, src)];
            v[(row, col)] = val as f32;
            w[row * k + col] = val / s[col];
        }
    }

    let mut u = Array2::<f32>::zeros((n, k));
    u.as_slice_mut().expect("fresh array").par_chunks_mut(k).zip(xs.par_chunks(k)).for_each(|(out, row)| {
        let mut acc = vec![0.0f64; k];
        for (l, &xl) in row.iter().enumerate() {
            let xl = f64::from(xl);
            if xl == 0.0 {
                continue;
            }
            for (a, wl) in acc.iter_mut().zip(&w[l * k..(l + 1) * k]) {
                *a += xl * wl;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o = a as f32;
        }
    });

    Ok(EigSvd { u, s: s.into_iter().map(|x| x as f32).collect(), v })
}
