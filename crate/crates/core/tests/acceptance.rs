//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero on failure only when `ACCEPTANCE_STRICT=1`, so
//! a failing criterion is reported without hiding the remaining test
//! targets of `cargo test`.

use std::collections::HashMap;
use std::f64::consts::E;
use std::time::Instant;

use ndarray::Array2;
use rand::Rng;

use netembed::evaluation::oracle::{
    dense_chebyshev_propagate, dense_netmf_raw, effective_resistance_oracle, jacobi_singular_values,
    projection_residual_norm,
};
use netembed::evaluation::synth::{erdos_renyi, random_connected, stochastic_block_model};
use netembed::evaluation::{link_pred_score, node_classification, ClassifyOptions, LabeledNodes, LinkPredSplit};
use netembed::graph::io::{read_graph, write_graph};
use netembed::graph::{build_graph, normalize_edges, EdgeList, Graph, GraphBuilder, VertexId};
use netembed::pipeline::{embed_graph, run_trial, with_threads, HyperParams, PreparedTask};
use netembed::propagation::{chebyshev_propagate, PropagationParams};
use netembed::randsvd::{eig_svd, fast_randomized_svd_with_basis, gaussian_projection, write_embedding, SvdParams};
use netembed::rng::{stream, Domain};
use netembed::sparsifier::{
    assembled_raw_entries, downsample_prob, from_fixed, pack_pair, sample_sparsifier, SamplingParams, SparseMatrix,
};
use netembed::tuner::{tune, BoxSpace, Dim};
use netembed::Embedding;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// standard normal upper tail
fn normal_sf(z: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 on erfc(z / √2)
    let x = z / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    0.5 * poly * (-x * x).exp()
}

fn sparsifier_fidelity() -> Outcome {
    let start = Instant::now();
    let g = build_graph(&erdos_renyi(64, 0.15, 1), false).unwrap();
    let samples = 10_000_000;
    let p = SamplingParams::new(3, samples, 64).with_c(f64::INFINITY).with_seed(1);
    let sampled = sample_sparsifier(&g, &p).unwrap();
    let estimate: HashMap<(VertexId, VertexId), f64> =
        assembled_raw_entries(&sampled.table, &g, &p).into_iter().map(|(u, v, raw)| ((u, v), raw)).collect();
    let oracle = dense_netmf_raw(&g, &p.s_coeffs, 1.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let scale = g.volume() as f64 * g.num_edges() as f64 / samples as f64;
    let (mut checked, mut bad, mut worst, mut predicted) = (0, 0, 0.0f64, 0.0);
    let (mut z_sum, mut z2_sum) = (0.0, 0.0);
    for u in 0..64u32 {
        for v in u..64u32 {
            let o = oracle[(u as usize, v as usize)];
            if o <= 0.1 {
                continue;
            }
            checked += 1;
            let est = estimate.get(&(u, v)).copied().unwrap_or(0.0);
            let rel = (est - o).abs() / o;
            worst = worst.max(rel);
            bad += usize::from(rel >= 0.05);
            // expected sample count behind this entry; counts are ~Poisson
            let dd = f64::from(g.degree(u)) * f64::from(g.degree(v));
            let hits = o * dd / scale / if u == v { 2.0 } else { 1.0 };
            predicted += 2.0 * normal_sf(0.05 * hits.sqrt());
            let z = (est - o) / (o / hits.sqrt());
            z_sum += z;
            z2_sum += z * z;
        }
    }
    outcome(
        bad == 0 && elapsed < 60.0,
        format!(
            "{bad}/{checked} entries outside 5% (worst {:.1}%), sampling noise alone predicts ~{predicted:.0}; \
             standardized errors mean {:+.3}, mean square {:.3} (unbiased: 0, 1); {elapsed:.1} s",
            100.0 * worst,
            z_sum / checked as f64,
            z2_sum / checked as f64
        ),
    )
}

fn laplacian_unbiasedness() -> Outcome {
    let g = build_graph(&random_connected(50, 0.3, 2), false).unwrap();
    let trials = 100_000u64;
    let p = SamplingParams::new(1, g.num_edges() * trials, 50).with_seed(2);
    let sampled = sample_sparsifier(&g, &p).unwrap();
    let n = g.num_vertices();
    let mut exact = Array2::<f64>::zeros((n, n));
    let mut mean = Array2::<f64>::zeros((n, n));
    let mut downsampled = 0;
    for (u, v) in g.edges() {
        let w = sampled.table.get(pack_pair(u, v)).map_or(0.0, from_fixed) / trials as f64;
        downsampled += usize::from(downsample_prob(&g, u, v, p.c) < 1.0);
        for (l, weight) in [(&mut exact, 1.0), (&mut mean, w)] {
            let (a, b) = (u as usize, v as usize);
            l[(a, a)] += weight;
            l[(b, b)] += weight;
            l[(a, b)] -= weight;
            l[(b, a)] -= weight;
        }
    }
    let frob = |x: &Array2<f64>| x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rel = frob(&(&mean - &exact)) / frob(&exact);
    outcome(
        rel < 0.02,
        format!(
            "Frobenius relative error {:.3}% over {trials} trials; {downsampled}/{} edges have p_e < 1, kept {:.1}% of draws",
            100.0 * rel,
            g.num_edges(),
            100.0 * sampled.stats.kept as f64 / sampled.stats.draws as f64
        ),
    )
}

fn resistance_lower_bound() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut edges = 0;
    for seed in 0..50u64 {
        let mut rng = stream(seed, Domain::Synthetic, 99);
        let n = rng.random_range(5..=40);
        let p = rng.random_range(0.05..0.4);
        let g = build_graph(&random_connected(n, p, seed), false).unwrap();
        for (u, v, r) in effective_resistance_oracle(&g).unwrap() {
            let lower = 0.5 * (1.0 / f64::from(g.degree(u)) + 1.0 / f64::from(g.degree(v)));
            worst = worst.min(r - lower);
            edges += 1;
        }
    }
    outcome(worst >= -1e-9, format!("{edges} edges over 50 graphs, smallest R - bound = {worst:.3e}"))
}

fn sample_count_law() -> Outcome {
    let g = build_graph(&random_connected(50, 0.1, 3), false).unwrap();
    let m = g.num_edges();
    let samples = 10 * m + m / 3;
    let runs = 1000;
    let total: u64 = (0..runs)
        .map(|seed| {
            let p = SamplingParams::new(2, samples, 50).with_seed(seed);
            sample_sparsifier(&g, &p).unwrap().stats.draws
        })
        .sum();
    let mean = total as f64 / runs as f64;
    let rel = (mean / samples as f64 - 1.0).abs();
    outcome(rel < 0.01, format!("mean Σ n_e = {mean:.2} for M = {samples} (relative deviation {:.4}%)", 100.0 * rel))
}

fn eig_svd_correctness() -> Outcome {
    let (mut worst_orth, mut worst_rel) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let x = gaussian_projection(1000, 64, 1000 + seed);
        let f = eig_svd(x.view()).unwrap();
        let gram = f.u.t().mapv(f64::from).dot(&f.u.mapv(f64::from)) - Array2::<f64>::eye(64);
        worst_orth = worst_orth.max(gram.iter().map(|v| v * v).sum::<f64>().sqrt());
        let oracle = jacobi_singular_values(x.view());
        for (s, o) in f.s.iter().zip(&oracle) {
            worst_rel = worst_rel.max((f64::from(*s) - o).abs() / o);
        }
    }
    outcome(
        worst_orth < 1e-4 * 64.0 && worst_rel < 1e-4,
        format!("worst ‖UᵀU - I‖_F = {worst_orth:.2e}, worst singular value error {worst_rel:.2e}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn power_iteration_bound() -> Outcome {
    let start = Instant::now();
    let (n, d, s) = (2000usize, 32usize, 16usize);
    let diag: Vec<f32> = (1..=n).map(|i| 1.0 / i as f32).collect();
    let m = SparseMatrix::from_diagonal(&diag);
    let sigma_next = 1.0 / (d + 1) as f64;
    let mut within = Vec::new();
    let mut medians = Vec::new();
    for q in [1usize, 2, 5] {
        let factor = 1.0
            + (d as f64 / (s as f64 - 1.0)).sqrt()
            + E * ((d + s) as f64).sqrt() / s as f64 * ((n - d) as f64).sqrt();
        let bound = factor.powf(1.0 / (q as f64 + 1.0)) * sigma_next;
        let residuals: Vec<f64> = (0..100)
            .map(|seed| {
                let p = SvdParams::new(d).with_oversampling(s).with_power_iters(q).with_seed(seed);
                let (_, basis) = fast_randomized_svd_with_basis(&m, &p).unwrap();
                projection_residual_norm(&m, basis.view())
            })
            .collect();
        within.push(residuals.iter().filter(|&&r| r <= bound).count());
        medians.push(median(residuals));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    outcome(
        within.iter().all(|&c| c >= 95) && monotone && elapsed < 120.0,
        format!(
            "bound held in {:?}/100 seeds for q = 1, 2, 5; median residual / σ_{{d+1}} = [{}]; {elapsed:.1} s",
            within,
            medians.iter().map(|r| format!("{:.3}", r / sigma_next)).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn propagation_oracle() -> Outcome {
    let g = build_graph(&random_connected(200, 0.04, 7), false).unwrap();
    let x = Embedding(gaussian_projection(200, 16, 7));
    let mut worst = 0.0f64;
    let mut points = 0;
    for steps in [3, 10, 16] {
        for (mu, theta) in [(0.2, 0.5), (0.0, 1.0), (0.5, 0.25)] {
            let p = PropagationParams { steps, mu, theta };
            let sparse = chebyshev_propagate(&g, &x, &p).unwrap();
            let dense = dense_chebyshev_propagate(&g, x.matrix(), &p);
            for (a, b) in sparse.matrix().iter().zip(dense.iter()) {
                worst = worst.max((f64::from(*a) - b).abs());
            }
            points += 1;
        }
    }
    outcome(worst < 1e-5, format!("{points} (k, μ, θ) points, max |sparse - dense| = {worst:.2e}"))
}

fn random_test_graph(i: u64) -> Graph {
    let mut rng = stream(i, Domain::Synthetic, 1000);
    let n = rng.random_range(2..=10_000usize);
    let avg_degree = rng.random_range(1.0..40.0);
    let pairs = (n as f64 * avg_degree / 2.0) as usize;
    let mut edges = Vec::with_capacity(pairs + 2000);
    for _ in 0..pairs {
        edges.push((rng.random_range(0..n as VertexId), rng.random_range(0..n as VertexId)));
    }
    // a hub whose list spans many blocks
    if n > 100 {
        let hub = rng.random_range(0..n as VertexId);
        for _ in 0..rng.random_range(64..2000usize.min(n)) {
            edges.push((hub, rng.random_range(0..n as VertexId)));
        }
    }
    let el = normalize_edges(EdgeList::with_vertices(edges, n)).unwrap();
    GraphBuilder::new().compress(true).build(&el).unwrap()
}

fn compression_round_trip() -> Outcome {
    let (mut queries, mut mismatches, mut max_degree) = (0u64, 0u64, 0u32);
    for i in 0..100 {
        let g = random_test_graph(i);
        let raw = build_graph(&g.to_edge_list(), false).unwrap();
        let mut file = Vec::new();
        write_graph(&g, &mut file).unwrap();
        let reloaded = read_graph(file.as_slice()).unwrap();
        for u in 0..g.num_vertices() as VertexId {
            let expected = raw.neighbors(u);
            max_degree = max_degree.max(raw.degree(u));
            if g.neighbors(u) != expected || reloaded.neighbors(u) != expected || g.degree(u) != raw.degree(u) {
                mismatches += 1;
            }
            for (i, &v) in expected.iter().enumerate() {
                queries += 1;
                if g.kth_neighbor(u, i).unwrap() != v {
                    mismatches += 1;
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{queries} kth_neighbor queries, {mismatches} mismatches, max degree {max_degree}"),
    )
}

fn determinism() -> Outcome {
    let (el, _) = stochastic_block_model(&[100; 4], 0.1, 0.01, 9);
    let g = build_graph(&el, true).unwrap();
    let params = HyperParams { window: 5, dim: 16, samples_per_tm: Some(2.0), seed: 9, ..Default::default() };
    let runs: Vec<(Vec<u8>, Vec<u8>)> = [1, 4, 8]
        .iter()
        .map(|&t| {
            let out = with_threads(t, || embed_graph(&g, &params, true)).unwrap().unwrap();
            let mut emb = Vec::new();
            write_embedding(&out.embedding, &mut emb).unwrap();
            (out.table_dump.unwrap(), emb)
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same,
        format!(
            "threads 1, 4, 8: sparsifier dump {} bytes, embedding {} bytes, {}",
            runs[0].0.len(),
            runs[0].1.len(),
            if same { "byte-identical" } else { "DIFFERENT" }
        ),
    )
}

fn sbm_params() -> HyperParams {
    HyperParams { window: 5, dim: 32, power_iters: 2, samples_per_tm: Some(5.0), seed: 10, ..Default::default() }
}

// Best AUC reachable by any score that only sees block membership: held-out
// edges of an SBM are independent of the rest of the graph given the blocks.
fn block_only_auc(full: &Graph, split: &LinkPredSplit, blocks: &[u32]) -> f64 {
    let n = full.num_vertices();
    let total: f64 = split
        .positives
        .iter()
        .map(|&(u, v)| {
            let nb = full.neighbors(u);
            let candidates = (n - 1 - nb.len()) as f64;
            let same_block_nb = nb.iter().filter(|&&w| blocks[w as usize] == blocks[u as usize]).count();
            let block_size = blocks.iter().filter(|&&b| b == blocks[u as usize]).count();
            let rho = (block_size - 1 - same_block_nb) as f64 / candidates;
            if blocks[v as usize] == blocks[u as usize] {
                (1.0 - rho) + 0.5 * rho
            } else {
                0.5 * (1.0 - rho)
            }
        })
        .sum();
    total / split.positives.len() as f64
}

fn end_to_end_quality() -> Outcome {
    let start = Instant::now();
    let (el, blocks) = stochastic_block_model(&[500; 4], 0.05, 0.005, 10);
    let g = build_graph(&el, false).unwrap();
    let params = sbm_params();
    let emb = embed_graph(&g, &params, false).unwrap().embedding;
    let opts = ClassifyOptions { train_ratio: 0.1, repeats: 10, seed: 10, ..Default::default() };
    let report = node_classification(&emb, &LabeledNodes::single(&blocks), &opts).unwrap();

    let split = LinkPredSplit::new(&g, 0.01, 1000, 10, false).unwrap();
    let train_emb = embed_graph(&split.train, &params, false).unwrap().embedding;
    let lp = link_pred_score(&train_emb, &split).unwrap();
    let ceiling = block_only_auc(&g, &split, &blocks);
    let elapsed = start.elapsed().as_secs_f64();
    outcome(
        report.micro_f1 >= 0.95 && lp.auc >= 0.9 && elapsed < 120.0,
        format!(
            "micro-F1 {:.4} (macro {:.4}) over 10 splits; AUC {:.4} on {} held-out edges (HITS@10 {:.3}), block-membership ceiling {:.4}; {elapsed:.1} s",
            report.micro_f1,
            report.macro_f1,
            lp.auc,
            lp.positives,
            lp.hits_at_10,
            ceiling
        ),
    )
}

fn tuner_checks() -> Outcome {
    let (el, blocks) = stochastic_block_model(&[500; 4], 0.05, 0.005, 10);
    let g = build_graph(&el, false).unwrap();
    let task = PreparedTask::Classify {
        labels: LabeledNodes::single(&blocks),
        options: ClassifyOptions { train_ratio: 0.1, repeats: 10, seed: 10, ..Default::default() },
    };
    let base = sbm_params();
    let space = netembed::tuner::SearchSpace::around(base.clone());
    let result = tune(&space, &base, |p| run_trial(&g, &task, p), 20, 11).unwrap();
    let initial = result.trials[0].objective.unwrap_or(f64::NEG_INFINITY);
    let failed = result.trials.iter().filter(|t| t.objective.is_none()).count();

    let box_space = BoxSpace(vec![Dim::Uniform { lo: -5.0, hi: 5.0 }; 3]);
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = stream(seed, Domain::Synthetic, 77);
        let target: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let r = tune(
            &box_space,
            &vec![0.0; 3],
            |x: &Vec<f64>| Ok::<_, String>(-x.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()),
            200,
            seed,
        )
        .unwrap();
        // within 10% of each coordinate's range
        hits += usize::from(r.best.iter().zip(&target).all(|(b, t)| (b - t).abs() <= 1.0));
    }
    outcome(
        result.best_objective >= initial && hits >= 95,
        format!(
            "SBM macro-F1 {initial:.4} -> {:.4} (best trial {}, {failed} failed); quadratic within 10% in {hits}/100 seeds",
            result.best_objective, result.best_trial
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("sparsifier fidelity", sparsifier_fidelity),
        ("Laplacian unbiasedness", laplacian_unbiasedness),
        ("effective resistance lower bound", resistance_lower_bound),
        ("sample-count law", sample_count_law),
        ("eigSVD correctness", eig_svd_correctness),
        ("power-iteration error bound", power_iteration_bound),
        ("propagation oracle equivalence", propagation_oracle),
        ("compression round trip", compression_round_trip),
        ("determinism across thread counts", determinism),
        ("end-to-end quality", end_to_end_quality),
        ("tuner", tuner_checks),
    ];
    let filter: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != i + 1) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} {:>2} {name}: {} [{:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {failed} criteria failed");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
