//! Seeded random graph generators for tests and desk-scale experiments.

use rand::Rng;

use crate::graph::{EdgeList, VertexId};
use crate::rng::{stream, Domain};

/// `G(n, p)`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> EdgeList {
    let mut rng = stream(seed, Domain::Synthetic, 0);
    let mut edges = Vec::new();
    for u in 0..n as VertexId {
        for v in u + 1..n as VertexId {
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    EdgeList::with_vertices(edges, n)
}

/// `G(n, p)` plus a random recursive tree, so the result is connected.
pub fn random_connected(n: usize, p: f64, seed: u64) -> EdgeList {
    let mut rng = stream(seed, Domain::Synthetic, 1);
    let mut edges = erdos_renyi(n, p, seed).edges;
    for v in 1..n as VertexId {
        let u = rng.random_range(0..v);
        edges.push((u, v));
    }
    edges.sort_unstable();
    edges.dedup();
    EdgeList::with_vertices(edges, n)
}

/// Stochastic block model with consecutive blocks of the given sizes.
/// Returns the edges and each vertex's block.
pub fn stochastic_block_model(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> (EdgeList, Vec<u32>) {
    let blocks: Vec<u32> = sizes.iter().enumerate().flat_map(|(b, &s)| std::iter::repeat_n(b as u32, s)).collect();
    let n = blocks.len();
    let mut rng = stream(seed, Domain::Synthetic, 2);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if blocks[u] == blocks[v] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((u as VertexId, v as VertexId));
            }
        }
    }
    (EdgeList::with_vertices(edges, n), blocks)
}
