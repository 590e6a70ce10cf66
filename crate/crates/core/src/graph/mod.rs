//! Immutable undirected graphs in CSR form, optionally block-compressed.

use std::borrow::Cow;

use rayon::prelude::*;
use thiserror::Error;

pub mod codec;
pub mod io;
mod walk;

pub use codec::{decode_block, encode_block, BLOCK_SIZE};
pub use walk::random_walk;

pub type VertexId = u32;

/// Reserved id; never a valid vertex.
pub const SENTINEL_ID: VertexId = VertexId::MAX;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex id {id} exceeds the largest supported id {}", SENTINEL_ID - 1)]
    IdTooLarge { id: u64 },
    #[error("neighbors of {vertex} are not strictly ascending ({prev} then {next})")]
    NotAscending { vertex: VertexId, prev: VertexId, next: VertexId },
    #[error("edge list is not normalized: {0}")]
    NotNormalized(String),
    #[error("corrupt adjacency data: {0}")]
    Corrupt(&'static str),
    #[error("cannot allocate graph storage ({required_bytes} bytes required)")]
    OutOfMemory { required_bytes: u64 },
    #[error("vertex {vertex} out of range (n = {n})")]
    VertexOutOfRange { vertex: VertexId, n: usize },
    #[error("neighbor index {index} out of range for vertex {vertex} with degree {degree}")]
    NeighborIndex { vertex: VertexId, index: usize, degree: u32 },
    #[error("random walk reached isolated vertex {0}")]
    IsolatedVertex(VertexId),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Undirected edges as `(u, v)` pairs plus an optional vertex count.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeList {
    pub edges: Vec<(VertexId, VertexId)>,
    pub n_hint: Option<usize>,
}

impl EdgeList {
    pub fn new(edges: Vec<(VertexId, VertexId)>) -> Self {
        Self { edges, n_hint: None }
    }

    pub fn with_vertices(edges: Vec<(VertexId, VertexId)>, n: usize) -> Self {
        Self { edges, n_hint: Some(n) }
    }

    /// `max(n_hint, max id + 1)`.
    pub fn num_vertices(&self) -> usize {
        let from_edges = self.edges.iter().map(|&(u, v)| u.max(v) as usize + 1).max().unwrap_or(0);
        from_edges.max(self.n_hint.unwrap_or(0))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NormalizeOptions {
    /// Relabel the vertices that appear in some edge as `0..k`, in order of
    /// their original ids.
    pub remap: bool,
}

/// Drops self-loops and keeps each unordered pair once, as `(min, max)`,
/// sorted.
pub fn normalize_edges(raw: EdgeList) -> Result<EdgeList, GraphError> {
    normalize_edges_with(raw, NormalizeOptions::default()).map(|(edges, _)| edges)
}

/// Like [`normalize_edges`]. With `remap` set, also returns the original id of
/// every new id.
pub fn normalize_edges_with(
    raw: EdgeList,
    opts: NormalizeOptions,
) -> Result<(EdgeList, Option<Vec<VertexId>>), GraphError> {
    if let Some(&(u, v)) = raw.edges.iter().find(|&&(u, v)| u == SENTINEL_ID || v == SENTINEL_ID) {
        return Err(GraphError::IdTooLarge { id: u64::from(u.max(v)) });
    }
    let mut edges: Vec<(VertexId, VertexId)> =
        raw.edges.into_par_iter().filter(|&(u, v)| u != v).map(|(u, v)| (u.min(v), u.max(v))).collect();
    edges.par_sort_unstable();
    edges.dedup();

    if !opts.remap {
        return Ok((EdgeList { edges, n_hint: raw.n_hint }, None));
    }
    let mut ids: Vec<VertexId> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.par_sort_unstable();
    ids.dedup();
    let lookup = |x: VertexId| ids.binary_search(&x).expect("id collected above") as VertexId;
    let mut remapped: Vec<_> = edges.iter().map(|&(u, v)| (lookup(u), lookup(v))).collect();
    remapped.par_sort_unstable();
    Ok((EdgeList::with_vertices(remapped, ids.len()), Some(ids)))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Adjacency {
    /// Neighbors as plain `u32`s; offsets are byte offsets (4 per neighbor).
    Raw(Vec<VertexId>),
    /// Per vertex: `varint(degree)`, a directory of `u32` offsets (relative
    /// to the vertex start) for blocks `1..`, then the blocks.
    Compressed(Vec<u8>),
}

/// An immutable simple undirected graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: u64,
    degrees: Vec<u32>,
    offsets: Vec<u64>,
    adjacency: Adjacency,
    block_size: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct GraphBuilder {
    compress: bool,
    block_size: usize,
}

impl Default for GraphBuilder {
    fn default() -> Self {
        Self { compress: false, block_size: BLOCK_SIZE }
    }
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn compress(mut self, yes: bool) -> Self {
        self.compress = yes;
        self
    }

    pub fn block_size(mut self, size: usize) -> Self {
        assert!(size >= 1, "block size must be positive");
        self.block_size = size;
        self
    }

    pub fn build(&self, edges: &EdgeList) -> Result<Graph, GraphError> {
        let n = edges.num_vertices();
        if n as u64 > u64::from(SENTINEL_ID) {
            return Err(GraphError::IdTooLarge { id: n as u64 - 1 });
        }
        let m = edges.edges.len() as u64;
        let required_bytes = (n as u64 + 1) * 8 + n as u64 * 4 + 2 * m * 4;

        let mut degrees = alloc_zeroed::<u32>(n, required_bytes)?;
        for &(u, v) in &edges.edges {
            if u == v {
                return Err(GraphError::NotNormalized(format!("self-loop at {u}")));
            }
            degrees[u as usize] += 1;
            degrees[v as usize] += 1;
        }
        let mut starts = alloc_zeroed::<u64>(n + 1, required_bytes)?;
        for u in 0..n {
            starts[u + 1] = starts[u] + u64::from(degrees[u]);
        }
        let mut adjacency = alloc_zeroed::<VertexId>((2 * m) as usize, required_bytes)?;
        let mut cursor = starts.clone();
        for &(u, v) in &edges.edges {
            adjacency[cursor[u as usize] as usize] = v;
            cursor[u as usize] += 1;
            adjacency[cursor[v as usize] as usize] = u;
            cursor[v as usize] += 1;
        }
        drop(cursor);

        let mut lists = Vec::with_capacity(n);
        let mut rest = adjacency.as_mut_slice();
        for &d in &degrees {
            let (head, tail) = rest.split_at_mut(d as usize);
            lists.push(head);
            rest = tail;
        }
        lists.par_iter_mut().enumerate().try_for_each(|(u, list)| {
            list.sort_unstable();
            match list.windows(2).find(|w| w[0] == w[1]) {
                Some(w) => Err(GraphError::NotNormalized(format!("duplicate edge ({u}, {})", w[0]))),
                None => Ok(()),
            }
        })?;
        drop(lists);

        if !self.compress {
            let offsets = starts.iter().map(|&s| s * 4).collect();
            return Ok(Graph {
                n,
                m,
                degrees,
                offsets,
                adjacency: Adjacency::Raw(adjacency),
                block_size: self.block_size,
            });
        }

        let block_size = self.block_size;
        let encoded: Vec<Vec<u8>> = (0..n)
            .into_par_iter()
            .map(|u| {
                let list = &adjacency[starts[u] as usize..starts[u + 1] as usize];
                encode_vertex(u as VertexId, list, block_size)
            })
            .collect::<Result<_, _>>()?;
        let total: usize = encoded.iter().map(Vec::len).sum();
        let mut bytes = Vec::new();
        bytes.try_reserve_exact(total).map_err(|_| GraphError::OutOfMemory { required_bytes: total as u64 })?;
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for chunk in encoded {
            bytes.extend_from_slice(&chunk);
            offsets.push(bytes.len() as u64);
        }
        Ok(Graph { n, m, degrees, offsets, adjacency: Adjacency::Compressed(bytes), block_size })
    }
}

fn alloc_zeroed<T: Clone + Default>(len: usize, required_bytes: u64) -> Result<Vec<T>, GraphError> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| GraphError::OutOfMemory { required_bytes })?;
    v.resize(len, T::default());
    Ok(v)
}

fn encode_vertex(source: VertexId, list: &[VertexId], block_size: usize) -> Result<Vec<u8>, GraphError> {
    let mut out = Vec::with_capacity(list.len() * 2 + 8);
    codec::write_varint(list.len() as u64, &mut out);
    let blocks = list.len().div_ceil(block_size);
    let dir_start = out.len();
    out.resize(dir_start + 4 * blocks.saturating_sub(1), 0);
    for (b, chunk) in list.chunks(block_size).enumerate() {
        if b > 0 {
            let rel = u32::try_from(out.len()).map_err(|_| GraphError::Corrupt("vertex too large"))?;
            out[dir_start + 4 * (b - 1)..dir_start + 4 * b].copy_from_slice(&rel.to_le_bytes());
        }
        codec::encode_block_into(source, chunk, &mut out)?;
    }
    Ok(out)
}

/// Builds a graph from normalized edges.
pub fn build_graph(edges: &EdgeList, compress: bool) -> Result<Graph, GraphError> {
    GraphBuilder::new().compress(compress).build(edges)
}

impl Graph {
    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> u64 {
        self.m
    }

    /// `vol(G) = 2m`.
    pub fn volume(&self) -> u64 {
        2 * self.m
    }

    #[inline]
    pub fn degree(&self, u: VertexId) -> u32 {
        self.degrees[u as usize]
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Byte offset of each vertex's adjacency data; `n + 1` entries.
    pub fn offsets(&self) -> &[u64] {
        &self.offsets
    }

    pub fn is_compressed(&self) -> bool {
        matches!(self.adjacency, Adjacency::Compressed(_))
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Size of the adjacency payload in bytes.
    pub fn adjacency_bytes(&self) -> usize {
        match &self.adjacency {
            Adjacency::Raw(ids) => ids.len() * 4,
            Adjacency::Compressed(bytes) => bytes.len(),
        }
    }

    pub(crate) fn adjacency(&self) -> &Adjacency {
        &self.adjacency
    }

    pub(crate) fn from_parts(n: usize, m: u64, degrees: Vec<u32>, offsets: Vec<u64>, adjacency: Adjacency) -> Self {
        Self { n, m, degrees, offsets, adjacency, block_size: BLOCK_SIZE }
    }

    fn check_vertex(&self, u: VertexId) -> Result<(), GraphError> {
        if (u as usize) < self.n {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange { vertex: u, n: self.n })
        }
    }

    /// Sorted neighbors of `u`. Borrowed for raw storage, decoded otherwise.
    pub fn neighbors(&self, u: VertexId) -> Cow<'_, [VertexId]> {
        let start = self.offsets[u as usize] as usize;
        let end = self.offsets[u as usize + 1] as usize;
        match &self.adjacency {
            Adjacency::Raw(ids) => Cow::Borrowed(&ids[start / 4..end / 4]),
            Adjacency::Compressed(bytes) => {
                let vertex = &bytes[start..end];
                let degree = self.degrees[u as usize] as usize;
                let mut pos = 0;
                codec::read_varint(vertex, &mut pos).expect("vertex header");
                pos += 4 * degree.div_ceil(self.block_size).saturating_sub(1);
                let mut out = Vec::with_capacity(degree);
                for b in 0..degree.div_ceil(self.block_size) {
                    let count = self.block_size.min(degree - b * self.block_size);
                    codec::decode_block_into(u, vertex, &mut pos, count, &mut out).expect("block produced by builder");
                }
                Cow::Owned(out)
            }
        }
    }

    /// The `i`-th smallest neighbor of `u`.
    pub fn kth_neighbor(&self, u: VertexId, i: usize) -> Result<VertexId, GraphError> {
        self.check_vertex(u)?;
        let degree = self.degree(u);
        if i >= degree as usize {
            return Err(GraphError::NeighborIndex { vertex: u, index: i, degree });
        }
        Ok(self.kth_neighbor_unchecked(u, i))
    }

    /// Compressed storage decodes only the block holding entry `i`.
    #[inline]
    pub(crate) fn kth_neighbor_unchecked(&self, u: VertexId, i: usize) -> VertexId {
        let start = self.offsets[u as usize] as usize;
        match &self.adjacency {
            Adjacency::Raw(ids) => ids[start / 4 + i],
            Adjacency::Compressed(bytes) => {
                let vertex = &bytes[start..self.offsets[u as usize + 1] as usize];
                let mut pos = 0;
                let degree = codec::read_varint(vertex, &mut pos).expect("vertex header") as usize;
                let blocks = degree.div_ceil(self.block_size);
                let block = i / self.block_size;
                let block_start = if block == 0 {
                    pos + 4 * (blocks - 1)
                } else {
                    let at = pos + 4 * (block - 1);
                    u32::from_le_bytes(vertex[at..at + 4].try_into().expect("4 bytes")) as usize
                };
                codec::decode_nth(u, &vertex[block_start..], i % self.block_size)
            }
        }
    }

    /// Calls `f(u, v)` once per undirected edge with `u < v`, in parallel.
    pub fn map_edges_parallel<F>(&self, f: F)
    where
        F: Fn(VertexId, VertexId) + Sync + Send,
    {
        self.map_edges_indexed(|_, u, v| f(u, v));
    }

    /// Like [`Graph::map_edges_parallel`], also passing the edge's rank in the
    /// canonical `(u, v)` lexicographic order.
    pub fn map_edges_indexed<F>(&self, f: F)
    where
        F: Fn(u64, VertexId, VertexId) + Sync + Send,
    {
        let upper: Vec<u64> = (0..self.n)
            .into_par_iter()
            .map(|u| {
                let nbrs = self.neighbors(u as VertexId);
                (nbrs.len() - nbrs.partition_point(|&v| v <= u as VertexId)) as u64
            })
            .collect();
        let mut first = Vec::with_capacity(self.n);
        let mut acc = 0u64;
        for c in &upper {
            first.push(acc);
            acc += c;
        }
        (0..self.n).into_par_iter().for_each(|u| {
            let u = u as VertexId;
            let nbrs = self.neighbors(u);
            let lo = nbrs.partition_point(|&v| v <= u);
            for (j, &v) in nbrs[lo..].iter().enumerate() {
                f(first[u as usize] + j as u64, u, v);
            }
        });
    }

    /// Canonical `(u, v)` pairs with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::with_capacity(self.m as usize);
        for u in 0..self.n as VertexId {
            out.extend(self.neighbors(u).iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    pub fn to_edge_list(&self) -> EdgeList {
        EdgeList::with_vertices(self.edges(), self.n)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        (u as usize) < self.n && self.neighbors(u).binary_search(&v).is_ok()
    }
}
