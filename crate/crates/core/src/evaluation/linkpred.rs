//! Link prediction by ranking held-out edges against corrupted tails.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::{build_graph, EdgeList, Graph, VertexId};
use crate::randsvd::Embedding;
use crate::rng::{stream, Domain};
use crate::sparsifier::pack_pair;

// keeps the edge-split stream apart from the classification splits
const SPLIT_STREAM: u64 = 1 << 40;

/// Held-out positive edges and the residual training graph.
#[derive(Clone, Debug)]
pub struct LinkPredSplit {
    pub train: Graph,
    pub positives: Vec<(VertexId, VertexId)>,
    /// Corrupted tails ranked against each positive.
    pub negatives: usize,
    pub seed: u64,
    full_edges: HashSet<u64>,
    full_degrees: Vec<u32>,
}

impl LinkPredSplit {
    /// Holds out `round(fraction · m)` edges chosen uniformly, skipping any
    /// edge whose removal would leave an endpoint without neighbors.
    pub fn new(g: &Graph, fraction: f64, negatives: usize, seed: u64, compress: bool) -> Result<Self, EvalError> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(EvalError::InvalidInput(format!("held-out fraction {fraction} outside [0, 1)")));
        }
        let mut edges = g.edges();
        let target = (fraction * edges.len() as f64).round() as usize;
        edges.shuffle(&mut stream(seed, Domain::Split, SPLIT_STREAM));
        let mut deg = g.degrees().to_vec();
        let mut keep = Vec::with_capacity(edges.len());
        let mut positives = Vec::with_capacity(target);
        for (u, v) in edges.iter().copied() {
            if positives.len() < target && deg[u as usize] > 1 && deg[v as usize] > 1 {
                deg[u as usize] -= 1;
                deg[v as usize] -= 1;
                positives.push((u, v));
            } else {
                keep.push((u, v));
            }
        }
        keep.sort_unstable();
        positives.sort_unstable();
        let train = build_graph(&EdgeList::with_vertices(keep, g.num_vertices()), compress)?;
        Ok(Self {
            train,
            positives,
            negatives,
            seed,
            full_edges: edges.iter().map(|&(u, v)| pack_pair(u, v)).collect(),
            full_degrees: g.degrees().to_vec(),
        })
    }

    /// A split with explicitly chosen positives; `full` is the graph before
    /// removal.
    pub fn from_parts(
        full: &Graph,
        train: Graph,
        positives: Vec<(VertexId, VertexId)>,
        negatives: usize,
        seed: u64,
    ) -> Self {
        Self {
            train,
            positives,
            negatives,
            seed,
            full_edges: full.edges().iter().map(|&(u, v)| pack_pair(u, v)).collect(),
            full_degrees: full.degrees().to_vec(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.full_degrees.len()
    }

    pub fn is_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.full_edges.contains(&pack_pair(u, v))
    }
}

/// Where one positive landed among its corruptions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankOutcome {
    /// Corruptions scoring strictly higher.
    pub greater: usize,
    /// Corruptions scoring exactly the same.
    pub equal: usize,
    pub negatives: usize,
}

impl RankOutcome {
    /// `1 + greater + equal / 2`: ties are split evenly.
    pub fn rank(&self) -> f64 {
        1.0 + self.greater as f64 + 0.5 * self.equal as f64
    }

    pub fn auc(&self) -> f64 {
        let below = self.negatives - self.greater - self.equal;
        (below as f64 + 0.5 * self.equal as f64) / self.negatives as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub auc: f64,
    pub mr: f64,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
    pub hits_at_50: f64,
    pub positives: usize,
}

pub fn rank_metrics(outcomes: &[RankOutcome]) -> RankMetrics {
    let n = outcomes.len() as f64;
    let mean = |f: &dyn Fn(&RankOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / n;
    RankMetrics {
        auc: mean(&|o| o.auc()),
        mr: mean(&|o| o.rank()),
        mrr: mean(&|o| 1.0 / o.rank()),
        hits_at_1: mean(&|o| f64::from(u8::from(o.rank() <= 1.0))),
        hits_at_10: mean(&|o| f64::from(u8::from(o.rank() <= 10.0))),
        hits_at_50: mean(&|o| f64::from(u8::from(o.rank() <= 50.0))),
        positives: outcomes.len(),
    }
}

fn dot(e: &Embedding, u: VertexId, v: VertexId) -> f32 {
    e.row(u as usize).dot(&e.row(v as usize))
}

/// Ranks each held-out `(u, v)` by `x_u · x_v` against `(u, t)` for uniformly
/// drawn tails `t` that are neither `u` nor a neighbor of `u` in the full
/// graph. Each positive draws from its own stream, so the result does not
/// depend on the order of `split.positives`.
pub fn link_pred_score(emb: &Embedding, split: &LinkPredSplit) -> Result<RankMetrics, EvalError> {
    let n = split.num_vertices();
    if emb.num_nodes() != n {
        return Err(EvalError::InvalidInput(format!(
            "embedding has {} rows but the graph has {n} vertices",
            emb.num_nodes()
        )));
    }
    if split.positives.is_empty() {
        return Err(EvalError::InvalidInput("no held-out edges to rank".into()));
    }
    if split.negatives == 0 {
        return Err(EvalError::InvalidInput("at least one corruption per positive is required".into()));
    }
    let outcomes: Vec<RankOutcome> = split
        .positives
        .par_iter()
        .map(|&(u, v)| {
            if split.full_degrees[u as usize] as usize + 1 >= n {
                return Err(EvalError::InvalidInput(format!(
                    "vertex {u} is adjacent to every vertex; no corruption exists"
                )));
            }
            let mut rng = stream(split.seed, Domain::Corruption, pack_pair(u, v));
            let pos = dot(emb, u, v);
            let (mut greater, mut equal) = (0, 0);
            for _ in 0..split.negatives {
                let t = loop {
                    let t = rng.random_range(0..n as VertexId);
                    if t != u && !split.is_edge(u, t) {
                        break t;
                    }
                };
                let s = dot(emb, u, t);
                if s > pos {
                    greater += 1;
                } else if s == pos {
                    equal += 1;
                }
            }
            Ok(RankOutcome { greater, equal, negatives: split.negatives })
        })
        .collect::<Result<_, _>>()?;
    Ok(rank_metrics(&outcomes))
}
