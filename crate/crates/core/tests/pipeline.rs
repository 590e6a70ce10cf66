use std::io::Write;

use ndarray::Array2;
use netembed::evaluation::oracle::{
    dense_chebyshev_propagate, dense_netmf_raw, jacobi_singular_values, sparse_to_dense,
};
use netembed::evaluation::synth::{random_connected, stochastic_block_model};
use netembed::evaluation::{node_classification, ClassifyOptions, LabeledNodes};
use netembed::graph::build_graph;
use netembed::graph::io::{load_graph, read_graph_file, write_graph_file};
use netembed::pipeline::{embed_graph, HyperParams};
use netembed::propagation::PropagationParams;
use netembed::randsvd::{fast_randomized_svd, read_embedding_file, write_embedding_file};
use netembed::sparsifier::{assemble_netmf, assembled_raw_entries, sample_sparsifier, SamplingParams};

fn small_params() -> HyperParams {
    HyperParams {
        window: 3,
        dim: 6,
        oversampling: 8,
        samples_per_tm: Some(4.0),
        prop_steps: 5,
        seed: 2,
        ..HyperParams::default()
    }
}

#[test]
fn sampled_estimate_approaches_the_dense_matrix() {
    let g = build_graph(&random_connected(20, 0.3, 1), false).unwrap();
    let s = vec![0.5, 0.5];
    let p = SamplingParams::new(2, 2_000_000, 20).with_s_coeffs(s.clone()).with_c(f64::INFINITY).with_seed(4);
    let sampled = sample_sparsifier(&g, &p).unwrap();
    let dense = dense_netmf_raw(&g, &s, 1.0).unwrap();

    let mut est = Array2::<f64>::zeros((20, 20));
    for (u, v, raw) in assembled_raw_entries(&sampled.table, &g, &p) {
        assert!(dense[[u as usize, v as usize]] > 0.0, "sampled a pair the dense matrix lacks");
        est[[u as usize, v as usize]] = raw;
        est[[v as usize, u as usize]] = raw;
    }
    let diff = (&est - &dense).mapv(|x| x * x).sum().sqrt();
    let norm = dense.mapv(|x| x * x).sum().sqrt();
    assert!(diff / norm < 0.02, "relative Frobenius error {}", diff / norm);
}

#[test]
fn randomized_svd_matches_exact_singular_values() {
    let g = build_graph(&random_connected(60, 0.15, 3), false).unwrap();
    let p = SamplingParams::new(3, 200_000, 60).with_seed(1);
    let m = assemble_netmf(&sample_sparsifier(&g, &p).unwrap().table, &g, &p);
    let exact = jacobi_singular_values(sparse_to_dense(&m).mapv(|x| x as f32).view());

    let params = HyperParams { dim: 4, oversampling: 16, power_iters: 4, ..small_params() };
    let f = fast_randomized_svd(&m, &params.svd_params()).unwrap();
    for (approx, truth) in f.sigma.iter().zip(&exact) {
        assert!((f64::from(*approx) - truth).abs() / truth < 1e-2, "{approx} vs {truth}");
    }
}

#[test]
fn embedding_does_not_depend_on_thread_count() {
    let g = build_graph(&random_connected(80, 0.08, 5), true).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| embed_graph(&g, &small_params(), false).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.embedding, b.embedding);
    assert_eq!(a.stats.nnz, b.stats.nnz);
}

#[test]
fn propagated_embedding_matches_the_dense_filter() {
    let g = build_graph(&random_connected(50, 0.1, 8), false).unwrap();
    let out = embed_graph(&g, &small_params(), false).unwrap();
    let p = PropagationParams { steps: 5, mu: 0.2, theta: 0.5 };
    let dense = dense_chebyshev_propagate(&g, out.initial.matrix(), &p);
    let scale = dense.iter().fold(0f64, |a, v| a.max(v.abs()));
    for (got, want) in out.embedding.matrix().iter().zip(dense.iter()) {
        assert!((f64::from(*got) - want).abs() <= 1e-5 * scale.max(1.0));
    }
}

#[test]
fn embedding_separates_planted_blocks() {
    let (edges, labels) = stochastic_block_model(&[40, 40, 40], 0.3, 0.01, 6);
    let g = build_graph(&edges, false).unwrap();
    let params = HyperParams { window: 5, dim: 16, ..small_params() };
    let emb = embed_graph(&g, &params, false).unwrap().embedding;
    let opts = ClassifyOptions { train_ratio: 0.5, repeats: 3, ..ClassifyOptions::default() };
    let report = node_classification(&emb, &LabeledNodes::single(&labels), &opts).unwrap();
    assert!(report.micro_f1 > 0.9, "micro-F1 {}", report.micro_f1);
}

#[test]
fn files_round_trip_through_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("edges.txt");
    let mut f = std::fs::File::create(&text).unwrap();
    writeln!(f, "# ring with chords").unwrap();
    for u in 0..30u32 {
        writeln!(f, "{} {}", u, (u + 1) % 30).unwrap();
        writeln!(f, "{} {}", u, (u + 7) % 30).unwrap();
    }
    drop(f);

    for compress in [false, true] {
        let g = load_graph(&text, compress).unwrap();
        let bin = dir.path().join("graph.bin");
        write_graph_file(&g, &bin).unwrap();
        let back = read_graph_file(&bin).unwrap();
        assert_eq!(back, g);

        let emb = embed_graph(&back, &small_params(), false).unwrap().embedding;
        let path = dir.path().join("emb.bin");
        write_embedding_file(&emb, &path).unwrap();
        assert_eq!(read_embedding_file(&path).unwrap(), emb);
        assert_eq!(emb, embed_graph(&g, &small_params(), false).unwrap().embedding);
    }
}
