use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::graph::VertexId;

/// Square CSR matrix with single-precision values. Column indices are sorted
/// and unique within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<VertexId>,
    values: Vec<f32>,
}

impl SparseMatrix {
    /// Builds an `n × n` matrix from `(row, col, value)` triplets. Duplicate
    /// positions are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(VertexId, VertexId, f32)>) -> Self {
        triplets.par_sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f32> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!((r as usize) < n && (c as usize) < n, "entry ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            indptr[r as usize + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self { n, indptr, indices, values }
    }

    /// Mirrors each upper-triangular `(u, v, x)` with `u <= v` to both
    /// `(u, v)` and `(v, u)`; diagonal entries appear once.
    pub fn from_upper_entries(n: usize, entries: &[(VertexId, VertexId, f32)]) -> Self {
        let mut triplets = Vec::with_capacity(entries.len() * 2);
        for &(u, v, x) in entries {
            triplets.push((u, v, x));
            if u != v {
                triplets.push((v, u, x));
            }
        }
        Self::from_triplets(n, triplets)
    }

    pub fn from_diagonal(diag: &[f32]) -> Self {
        let entries: Vec<_> = diag
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, &x)| (i as VertexId, i as VertexId, x))
            .collect();
        Self::from_triplets(diag.len(), entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[VertexId], &[f32]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: VertexId, c: VertexId) -> f32 {
        let (cols, vals) = self.row(r as usize);
        cols.binary_search(&c).map_or(0.0, |i| vals[i])
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[VertexId] {
        &self.indices
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| self.get(c, r as VertexId) == v)
        })
    }

    /// `self · x` for a dense `n × k` operand. Rows are computed in parallel;
    /// each row sums its terms in column order, so the result does not depend
    /// on the thread count.
    pub fn spmm(&self, x: ArrayView2<'_, f32>) -> Array2<f32> {
        assert_eq!(x.nrows(), self.n, "operand has {} rows, matrix is {}x{}", x.nrows(), self.n, self.n);
        let k = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = Array2::<f32>::zeros((self.n, k));
        if k == 0 {
            return out;
        }
        out.as_slice_mut().expect("fresh array").par_chunks_mut(k).enumerate().for_each(|(r, row)| {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let src = &xs[c as usize * k..(c as usize + 1) * k];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += v * s;
                }
            }
        });
        out
    }
}
