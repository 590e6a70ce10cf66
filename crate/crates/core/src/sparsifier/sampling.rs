use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;

use rand::{Rng, RngCore};

use super::table::{pack_pair, to_fixed, SparsifierTable};
use super::{SamplingParams, SparsifierError};
use crate::graph::{random_walk, Graph, GraphError, VertexId};
use crate::rng::{stream, Domain};

/// Draws one PathSampling endpoint pair for the edge `(u, v)` and walk
/// length `r`: split `r - 1` steps uniformly at random between a walk from
/// `u` and a walk from `v`.
pub fn path_sample<R: RngCore + ?Sized>(
    g: &Graph,
    u: VertexId,
    v: VertexId,
    r: usize,
    rng: &mut R,
) -> Result<(VertexId, VertexId), GraphError> {
    debug_assert!(r >= 1);
    let s = rng.random_range(0..r);
    let a = random_walk(g, u, s, rng)?;
    let b = random_walk(g, v, r - 1 - s, rng)?;
    Ok((a, b))
}

/// Keep probability of edge `(u, v)`: `min(1, C (1/d_u + 1/d_v))`.
#[inline]
pub fn downsample_prob(g: &Graph, u: VertexId, v: VertexId, c: f64) -> f64 {
    let s = 1.0 / f64::from(g.degree(u)) + 1.0 / f64::from(g.degree(v));
    (c * s).min(1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleStats {
    /// `Σ_e n_e`: draws before downsampling.
    pub draws: u64,
    /// Draws that passed the downsampling coin and were added.
    pub kept: u64,
}

#[derive(Debug)]
pub struct SampledSparsifier {
    pub table: SparsifierTable,
    pub stats: SampleStats,
}

fn table_slots(g: &Graph, p: &SamplingParams) -> usize {
    let n = g.num_vertices() as f64;
    let max_draws = p.samples as f64 + g.num_edges() as f64;
    let max_pairs = n * (n + 1.0) / 2.0;
    (p.capacity_factor * max_draws.min(max_pairs)).ceil() as usize
}

/// Index of the bucket of `x ∈ [0, 1)` under the cumulative weights `cdf`.
#[inline]
fn pick_length(cdf: &[f64], x: f64) -> usize {
    cdf.iter().position(|&c| x < c).unwrap_or(cdf.len() - 1)
}

/// Runs downsampled per-edge path sampling over every edge in parallel.
///
/// Edge `e` (ranked in canonical order) draws from its own stream
/// `(seed, e)`, and weights are summed as integers, so the table contents do
/// not depend on the thread count.
pub fn sample_sparsifier(g: &Graph, p: &SamplingParams) -> Result<SampledSparsifier, SparsifierError> {
    p.validate()?;
    let m = g.num_edges();
    if m == 0 {
        return Err(SparsifierError::InvalidParams("graph has no edges".into()));
    }
    let table = SparsifierTable::with_capacity(table_slots(g, p));

    let base = p.samples / m;
    let frac = (p.samples % m) as f64 / m as f64;
    let mut acc = 0.0;
    let cdf: Vec<f64> = p
        .s_coeffs
        .iter()
        .map(|s| {
            acc += s;
            acc
        })
        .collect();

    let draws = AtomicU64::new(0);
    let kept = AtomicU64::new(0);
    let failed = AtomicBool::new(false);
    let error: Mutex<Option<SparsifierError>> = Mutex::new(None);

    g.map_edges_indexed(|idx, u, v| {
        if failed.load(Ordering::Relaxed) {
            return;
        }
        let mut rng = stream(p.seed, Domain::Sampling, idx);
        let p_e = downsample_prob(g, u, v, p.c);
        let weight = to_fixed(1.0 / p_e);
        let n_e = base + u64::from(rng.random::<f64>() < frac);
        let mut local_kept = 0;
        let result = (0..n_e).try_for_each(|_| {
            let coin: f64 = rng.random();
            let r = pick_length(&cdf, rng.random()) + 1;
            if coin < p_e {
                let (a, b) = path_sample(g, u, v, r, &mut rng)?;
                table.upsert_add(pack_pair(a, b), weight)?;
                local_kept += 1;
            }
            Ok::<_, SparsifierError>(())
        });
        draws.fetch_add(n_e, Ordering::Relaxed);
        kept.fetch_add(local_kept, Ordering::Relaxed);
        if let Err(e) = result {
            failed.store(true, Ordering::Relaxed);
            error.lock().expect("error slot").get_or_insert(e);
        }
    });

    if let Some(e) = error.into_inner().expect("error slot") {
        return Err(e);
    }
    Ok(SampledSparsifier { table, stats: SampleStats { draws: draws.into_inner(), kept: kept.into_inner() } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, EdgeList};
    use crate::sparsifier::table::from_fixed;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> Graph {
        build_graph(&EdgeList::new(vec![(0, 1), (1, 2)]), true).unwrap()
    }

    fn single_edge() -> Graph {
        build_graph(&EdgeList::new(vec![(0, 1)]), false).unwrap()
    }

    #[test]
    fn length_one_returns_the_edge() {
        let g = path3();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(path_sample(&g, 1, 2, 1, &mut rng).unwrap(), (1, 2));
        }
    }

    #[test]
    fn single_edge_parity() {
        // r = 3 splits 2 steps; the endpoints swap sides once per step
        let g = single_edge();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b) = path_sample(&g, 0, 1, 3, &mut rng).unwrap();
            assert_ne!(a, b);
            let (a, b) = path_sample(&g, 0, 1, 2, &mut rng).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn path_graph_far_pair_probability() {
        // Hand enumeration: from either edge, r = 2 yields {0, 2} with
        // probability 1/2 (split) * 1/2 (walk direction) = 1/4.
        let g = path3();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        for (u, v) in [(0, 1), (1, 2)] {
            let hits = (0..trials)
                .filter(|_| {
                    let (a, b) = path_sample(&g, u, v, 2, &mut rng).unwrap();
                    a.min(b) == 0 && a.max(b) == 2
                })
                .count() as f64;
            let sd = (trials as f64 * 0.25 * 0.75).sqrt();
            assert!((hits - trials as f64 / 4.0).abs() < 3.0 * sd, "{hits}");
        }
    }

    #[test]
    fn downsample_formula() {
        assert_eq!(downsample_prob(&single_edge(), 0, 1, 2f64.ln()), 1.0);
        // two vertices of degree 50 (complete bipartite K_{50,50})
        let el = EdgeList::new((0..50).flat_map(|u| (50..100).map(move |v| (u, v))).collect());
        let g = build_graph(&el, true).unwrap();
        let p = downsample_prob(&g, 0, 50, 100f64.ln());
        assert!((p - 0.18421).abs() < 1e-5, "{p}");
        assert_eq!(downsample_prob(&g, 0, 50, f64::INFINITY), 1.0);
    }

    #[test]
    fn single_edge_weight_equals_draws() {
        let g = single_edge();
        for seed in 0..20 {
            let p = SamplingParams::new(1, 1000, 2).with_c(f64::INFINITY).with_seed(seed);
            let out = sample_sparsifier(&g, &p).unwrap();
            assert_eq!(out.stats.draws, 1000);
            assert_eq!(out.table.entries(), vec![(pack_pair(0, 1), to_fixed(1000.0))]);
        }
    }

    #[test]
    fn one_draw_per_edge_on_average() {
        let el = EdgeList::new(vec![(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]);
        let g = build_graph(&el, false).unwrap();
        let p = SamplingParams::new(1, 5, 4).with_c(f64::INFINITY).with_seed(3);
        let out = sample_sparsifier(&g, &p).unwrap();
        assert_eq!(out.stats.draws, 5);
        for (u, v) in el.edges {
            assert_eq!(out.table.get(pack_pair(u, v)), Some(to_fixed(1.0)));
        }
        assert!(sample_sparsifier(&g, &SamplingParams { samples: 0, ..p }).is_err());
    }

    #[test]
    fn path_graph_far_pair_weight() {
        // E[W_{0,2}] / M = P(r = 2) * 1/4 = 1/8
        let g = path3();
        let samples = 1_000_000u64;
        let p = SamplingParams::new(2, samples, 3).with_c(f64::INFINITY).with_seed(5);
        let out = sample_sparsifier(&g, &p).unwrap();
        let w = from_fixed(out.table.get(pack_pair(0, 2)).unwrap());
        let sd = (samples as f64 * 0.125 * 0.875).sqrt();
        assert!((w - samples as f64 / 8.0).abs() < 3.0 * sd, "{w}");
    }

    #[test]
    fn downsampled_weights_are_reciprocal_probabilities() {
        let el = EdgeList::new((0..20).flat_map(|u| (u + 1..20).map(move |v| (u, v))).collect());
        let g = build_graph(&el, false).unwrap();
        let p = SamplingParams::new(1, 20_000, 20).with_seed(8);
        let out = sample_sparsifier(&g, &p).unwrap();
        // K_20: p_e = ln 20 * 2/19 ~ 0.315
        let p_e = downsample_prob(&g, 0, 1, p.c);
        assert!(p_e < 0.5);
        let w = to_fixed(1.0 / p_e);
        for (_, total) in out.table.entries() {
            assert_eq!(total % w, 0);
        }
        let kept_rate = out.stats.kept as f64 / out.stats.draws as f64;
        assert!((kept_rate - p_e).abs() < 0.02, "{kept_rate} vs {p_e}");
    }

    #[test]
    fn same_seed_same_table_any_thread_count() {
        let el = EdgeList::new((0..60u32).flat_map(|u| [(u, (u + 1) % 60), (u, (u * 7 + 3) % 60)]).collect());
        let g = build_graph(&crate::graph::normalize_edges(el).unwrap(), true).unwrap();
        let p = SamplingParams::new(4, 50_000, 60).with_seed(11);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_sparsifier(&g, &p).unwrap())
        };
        let one = run(1);
        for threads in [3, 8] {
            let other = run(threads);
            assert_eq!(one.stats, other.stats);
            assert_eq!(one.table.entries(), other.table.entries());
        }
    }

    #[test]
    fn pick_length_inverse_cdf() {
        let cdf = [0.25, 0.5, 1.0];
        assert_eq!(pick_length(&cdf, 0.0), 0);
        assert_eq!(pick_length(&cdf, 0.3), 1);
        assert_eq!(pick_length(&cdf, 0.99), 2);
        assert_eq!(pick_length(&[0.5, 0.999_999_999_9], 0.999_999_999_99), 1);
    }
}
