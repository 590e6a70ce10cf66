use super::table::{from_fixed, unpack_pair, SparsifierTable};
use super::{SamplingParams, SparseMatrix};
use crate::graph::{Graph, VertexId};

/// Pre-log estimates `(u, v, raw)` with `u <= v`, sorted.
///
/// `raw = vol(G) m / (b M) · W / (d_u d_v)`, doubled on the diagonal: an
/// off-diagonal pair is reached from either orientation of the path while a
/// diagonal pair is reached from one.
pub fn assembled_raw_entries(table: &SparsifierTable, g: &Graph, p: &SamplingParams) -> Vec<(VertexId, VertexId, f64)> {
    let scale = g.volume() as f64 * g.num_edges() as f64 / (p.negative * p.samples as f64);
    table
        .entries()
        .into_iter()
        .map(|(key, w)| {
            let (u, v) = unpack_pair(key);
            let dd = f64::from(g.degree(u)) * f64::from(g.degree(v));
            let mult = if u == v { 2.0 } else { 1.0 };
            (u, v, mult * scale * from_fixed(w) / dd)
        })
        .collect()
}

/// Trunc-log NetMF sparsifier as a symmetric CSR matrix. Entries with
/// `raw <= 1` are dropped.
pub fn assemble_netmf(table: &SparsifierTable, g: &Graph, p: &SamplingParams) -> SparseMatrix {
    let entries: Vec<(VertexId, VertexId, f32)> = assembled_raw_entries(table, g, p)
        .into_iter()
        .filter(|&(_, _, raw)| raw > 1.0)
        .map(|(u, v, raw)| (u, v, raw.ln() as f32))
        .collect();
    SparseMatrix::from_upper_entries(g.num_vertices(), &entries)
}
