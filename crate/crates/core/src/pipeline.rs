//! Config-driven pipeline runs: ingestion, sparsifier, SVD, propagation,
//! evaluation and tuning.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{
    link_pred_score, node_classification, read_labels_file, ClassifyOptions, EvalError, LabeledNodes, LinkPredSplit,
    Metrics,
};
use crate::graph::{io as graph_io, Graph, GraphError};
use crate::propagation::{chebyshev_propagate, PropagationError, PropagationParams};
use crate::randsvd::{
    embedding_from_factors, fast_randomized_svd, read_embedding_file, write_embedding_file, Embedding, SvdError,
    SvdParams,
};
use crate::sparsifier::{assemble_netmf, sample_sparsifier, SamplingParams, SparsifierError};
use crate::tuner::{tune, write_trial_log_file, SearchSpace, TrialRecord, TunerError};

/// Environment variable consulted for the thread count when no flag is given.
pub const THREADS_ENV: &str = "LIGHTNE_THREADS";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{0}; raise the capacity factor or lower the sample count")]
    Sparsifier(#[from] SparsifierError),
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Tuner(#[from] TunerError),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

impl PipelineError {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Graph(GraphError::OutOfMemory { .. }) => "out_of_memory",
            PipelineError::Graph(_) => "graph",
            PipelineError::Sparsifier(SparsifierError::TableFull(_)) => "table_full",
            PipelineError::Sparsifier(_) => "sparsifier",
            PipelineError::Svd(_) => "svd",
            PipelineError::Propagation(_) => "propagation",
            PipelineError::Eval(_) => "eval",
            PipelineError::Tuner(_) => "tuner",
            PipelineError::Json { .. } => "json",
            PipelineError::Io(_) => "io",
            PipelineError::ThreadPool(_) => "threads",
        }
    }
}

/// Every tunable of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    /// Window size `T`.
    pub window: usize,
    /// `s_1..s_T`; uniform when absent.
    pub s_coeffs: Option<Vec<f64>>,
    /// Absolute sample count `M`.
    pub samples: Option<u64>,
    /// `M` as a multiple of `T·m`, used when `samples` is absent.
    pub samples_per_tm: Option<f64>,
    /// `C = c_multiplier · ln n`.
    pub c_multiplier: f64,
    /// Negative-sampling constant `b`.
    pub negative: f64,
    pub capacity_factor: f64,
    pub dim: usize,
    pub oversampling: usize,
    pub power_iters: usize,
    /// Chebyshev terms `k`; values below 2 skip propagation.
    pub prop_steps: usize,
    pub theta: f64,
    pub mu: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            window: 10,
            s_coeffs: None,
            samples: None,
            samples_per_tm: Some(1.0),
            c_multiplier: 1.0,
            negative: 1.0,
            capacity_factor: 2.0,
            dim: 128,
            oversampling: 16,
            power_iters: 1,
            prop_steps: 10,
            theta: 0.5,
            mu: 0.2,
            seed: 0,
        }
    }
}

impl HyperParams {
    pub fn s_coeffs_or_uniform(&self) -> Vec<f64> {
        self.s_coeffs.clone().unwrap_or_else(|| vec![1.0 / self.window.max(1) as f64; self.window])
    }

    /// Resolves `M` for a graph with `m` edges.
    pub fn sample_count(&self, m: u64) -> Result<u64, PipelineError> {
        match (self.samples, self.samples_per_tm) {
            (Some(s), _) => Ok(s),
            (None, Some(k)) if k > 0.0 && k.is_finite() => {
                Ok(((k * self.window as f64 * m as f64).round() as u64).max(1))
            }
            (None, Some(k)) => Err(PipelineError::Config(format!("samples_per_tm = {k} must be positive"))),
            (None, None) => Err(PipelineError::Config("one of samples or samples_per_tm is required".into())),
        }
    }

    pub fn sampling_params(&self, g: &Graph) -> Result<SamplingParams, PipelineError> {
        if !(self.c_multiplier > 0.0) {
            return Err(PipelineError::Config(format!("c_multiplier = {} must be positive", self.c_multiplier)));
        }
        let mut p = SamplingParams::new(self.window, self.sample_count(g.num_edges())?, g.num_vertices())
            .with_s_coeffs(self.s_coeffs_or_uniform())
            .with_negative(self.negative)
            .with_seed(self.seed);
        p.c *= self.c_multiplier;
        p.capacity_factor = self.capacity_factor;
        if p.window != self.window {
            return Err(PipelineError::Config(format!("{} s_coeffs for window {}", p.window, self.window)));
        }
        p.validate()?;
        Ok(p)
    }

    pub fn svd_params(&self) -> SvdParams {
        SvdParams::new(self.dim)
            .with_oversampling(self.oversampling)
            .with_power_iters(self.power_iters)
            .with_seed(self.seed)
    }

    pub fn propagation_params(&self) -> PropagationParams {
        PropagationParams { steps: self.prop_steps, mu: self.mu, theta: self.theta }
    }
}

/// Downstream task used by `eval` and `tune`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TaskSpec {
    #[default]
    None,
    /// Node classification against a `node label` file.
    Classify {
        labels: PathBuf,
        #[serde(default = "default_train_ratio")]
        train_ratio: f64,
        #[serde(default = "default_repeats")]
        repeats: usize,
        #[serde(default = "default_reg")]
        reg: f64,
    },
    /// Link prediction. The embedding is computed on the graph with the
    /// held-out edges removed.
    Linkpred {
        #[serde(default = "default_holdout")]
        holdout: f64,
        #[serde(default = "default_negatives")]
        negatives: usize,
    },
}

fn default_train_ratio() -> f64 {
    0.1
}
fn default_repeats() -> usize {
    10
}
fn default_reg() -> f64 {
    ClassifyOptions::default().reg
}
fn default_holdout() -> f64 {
    0.01
}
fn default_negatives() -> usize {
    1000
}

/// One JSON object describing a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Text edge list or binary graph file.
    pub graph: PathBuf,
    /// Embedding output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Stats JSON output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<PathBuf>,
    /// Optional text dump of the sparsifier table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparsifier_dump: Option<PathBuf>,
    /// Trial log written by `tune`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_log: Option<PathBuf>,
    /// Best config written by `tune`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_config: Option<PathBuf>,
    #[serde(default)]
    pub params: HyperParams,
    #[serde(default)]
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub compress: bool,
    #[serde(default)]
    pub search: SearchSpace,
}

impl RunConfig {
    pub fn new(graph: impl Into<PathBuf>) -> Self {
        Self {
            graph: graph.into(),
            output: None,
            stats: None,
            sparsifier_dump: None,
            trial_log: None,
            best_config: None,
            params: HyperParams::default(),
            task: TaskSpec::None,
            threads: None,
            compress: false,
            search: SearchSpace::default(),
        }
    }

    /// Relative paths are resolved against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.graph);
        for p in
            [&mut self.output, &mut self.stats, &mut self.sparsifier_dump, &mut self.trial_log, &mut self.best_config]
                .into_iter()
                .flatten()
        {
            fix(p);
        }
        if let TaskSpec::Classify { labels, .. } = &mut self.task {
            fix(labels);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !self.graph.exists() {
            return Err(PipelineError::Config(format!("graph file {} does not exist", self.graph.display())));
        }
        if let TaskSpec::Classify { labels, .. } = &self.task {
            if !labels.exists() {
                return Err(PipelineError::Config(format!("label file {} does not exist", labels.display())));
            }
        }
        if self.threads == Some(0) {
            return Err(PipelineError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Reads a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let file = File::open(path)?;
        let mut cfg: RunConfig = serde_json::from_reader(BufReader::new(file))
            .map_err(|source| PipelineError::Json { path: path.to_owned(), source })?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        write_json(self, path)
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| PipelineError::Json { path: path.to_owned(), source })?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Thread count: the flag, then `LIGHTNE_THREADS`, then the config, then
/// the hardware parallelism.
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>) -> Result<usize, PipelineError> {
    if let Some(t) = flag {
        return if t == 0 { Err(PipelineError::Config("--threads must be at least 1".into())) } else { Ok(t) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(PipelineError::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(config.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(threads).build()?.install(f))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub sparsify_secs: f64,
    pub svd_secs: f64,
    pub propagate_secs: f64,
    pub total_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedStats {
    pub num_vertices: usize,
    pub num_edges: u64,
    pub samples_target: u64,
    /// Draws made before downsampling.
    pub samples_drawn: u64,
    /// Draws that survived downsampling.
    pub samples_kept: u64,
    pub distinct_entries: usize,
    /// Stored values of the trunc-log matrix.
    pub nnz: usize,
    pub sigma: Vec<f32>,
    pub times: StageTimes,
}

pub struct EmbedOutput {
    pub embedding: Embedding,
    /// The factorization output before propagation.
    pub initial: Embedding,
    pub stats: EmbedStats,
    /// Sorted `u v weight` dump of the sparsifier table.
    pub table_dump: Option<Vec<u8>>,
}

/// Sparsifier, randomized SVD, then propagation when `k >= 2`.
pub fn embed_graph(g: &Graph, params: &HyperParams, dump_table: bool) -> Result<EmbedOutput, PipelineError> {
    let start = Instant::now();
    let sp = params.sampling_params(g)?;
    let svd = params.svd_params();
    svd.validate(g.num_vertices())?;
    let prop = params.propagation_params();
    prop.validate()?;

    let t = Instant::now();
    let sampled = sample_sparsifier(g, &sp)?;
    let table_dump = if dump_table {
        let mut buf = Vec::new();
        sampled.table.dump_text(&mut buf)?;
        Some(buf)
    } else {
        None
    };
    let matrix = assemble_netmf(&sampled.table, g, &sp);
    let sparsify_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let factors = fast_randomized_svd(&matrix, &svd)?;
    let initial = embedding_from_factors(&factors);
    let svd_secs = t.elapsed().as_secs_f64();

    let (embedding, propagate_secs) = if prop.steps >= 2 {
        let t = Instant::now();
        let e = chebyshev_propagate(g, &initial, &prop)?;
        (e, t.elapsed().as_secs_f64())
    } else {
        (initial.clone(), 0.0)
    };

    let stats = EmbedStats {
        num_vertices: g.num_vertices(),
        num_edges: g.num_edges(),
        samples_target: sp.samples,
        samples_drawn: sampled.stats.draws,
        samples_kept: sampled.stats.kept,
        distinct_entries: sampled.table.len(),
        nnz: matrix.nnz(),
        sigma: factors.sigma,
        times: StageTimes { sparsify_secs, svd_secs, propagate_secs, total_secs: start.elapsed().as_secs_f64() },
    };
    Ok(EmbedOutput { embedding, initial, stats, table_dump })
}

/// A loaded task with everything needed to score an embedding.
pub enum PreparedTask {
    Classify { labels: LabeledNodes, options: ClassifyOptions },
    Linkpred(Box<LinkPredSplit>),
}

impl PreparedTask {
    /// The graph the embedding must be computed on.
    pub fn embedding_graph<'a>(&'a self, full: &'a Graph) -> &'a Graph {
        match self {
            PreparedTask::Linkpred(split) => &split.train,
            PreparedTask::Classify { .. } => full,
        }
    }

    pub fn evaluate(&self, emb: &Embedding) -> Result<Metrics, PipelineError> {
        Ok(match self {
            PreparedTask::Classify { labels, options } => Metrics::from(&node_classification(emb, labels, options)?),
            PreparedTask::Linkpred(split) => Metrics::from(&link_pred_score(emb, split)?),
        })
    }

    /// Macro-F1 for classification, HITS@10 for link prediction.
    pub fn objective(metrics: &Metrics) -> Option<f64> {
        metrics.macro_f1.or(metrics.hits_at_10)
    }
}

pub fn prepare_task(
    task: &TaskSpec,
    g: &Graph,
    seed: u64,
    compress: bool,
) -> Result<Option<PreparedTask>, PipelineError> {
    Ok(match task {
        TaskSpec::None => None,
        TaskSpec::Classify { labels, train_ratio, repeats, reg } => Some(PreparedTask::Classify {
            labels: read_labels_file(labels, g.num_vertices())?,
            options: ClassifyOptions {
                train_ratio: *train_ratio,
                repeats: *repeats,
                reg: *reg,
                seed,
                normalize_rows: true,
            },
        }),
        TaskSpec::Linkpred { holdout, negatives } => {
            Some(PreparedTask::Linkpred(Box::new(LinkPredSplit::new(g, *holdout, *negatives, seed, compress)?)))
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvertReport {
    pub num_vertices: usize,
    pub num_edges: u64,
    pub bytes: u64,
    /// Adjacency bytes relative to plain 4-byte neighbor ids.
    pub compression_ratio: f64,
}

/// Text edge list to binary graph file.
pub fn cmd_convert(input: &Path, output: &Path, compress: bool) -> Result<ConvertReport, PipelineError> {
    let g = graph_io::load_graph(input, compress)?;
    graph_io::write_graph_file(&g, output)?;
    let raw_bytes = 4.0 * g.volume() as f64;
    Ok(ConvertReport {
        num_vertices: g.num_vertices(),
        num_edges: g.num_edges(),
        bytes: std::fs::metadata(output)?.len(),
        compression_ratio: if raw_bytes > 0.0 { g.adjacency_bytes() as f64 / raw_bytes } else { 1.0 },
    })
}

fn load_run_graph(cfg: &RunConfig) -> Result<Graph, PipelineError> {
    cfg.validate()?;
    Ok(graph_io::load_graph(&cfg.graph, cfg.compress)?)
}

/// Runs the embedding stages and writes the configured outputs. With a
/// link-prediction task the held-out edges are removed first.
pub fn cmd_embed(cfg: &RunConfig) -> Result<EmbedStats, PipelineError> {
    let g = load_run_graph(cfg)?;
    let task = match cfg.task {
        TaskSpec::Linkpred { .. } => prepare_task(&cfg.task, &g, cfg.params.seed, cfg.compress)?,
        _ => None,
    };
    let graph = task.as_ref().map_or(&g, |t| t.embedding_graph(&g));
    let out = embed_graph(graph, &cfg.params, cfg.sparsifier_dump.is_some())?;
    if let Some(path) = &cfg.output {
        write_embedding_file(&out.embedding, path)?;
    }
    if let (Some(path), Some(dump)) = (&cfg.sparsifier_dump, &out.table_dump) {
        std::fs::write(path, dump)?;
    }
    if let Some(path) = &cfg.stats {
        write_json(&out.stats, path)?;
    }
    Ok(out.stats)
}

/// Scores a saved embedding on the config's task.
pub fn cmd_eval(embedding: &Path, cfg: &RunConfig) -> Result<Metrics, PipelineError> {
    let g = load_run_graph(cfg)?;
    let emb = read_embedding_file(embedding)?;
    if emb.num_nodes() != g.num_vertices() {
        return Err(PipelineError::Eval(EvalError::InvalidInput(format!(
            "embedding has {} rows but the graph has {} vertices",
            emb.num_nodes(),
            g.num_vertices()
        ))));
    }
    let task = prepare_task(&cfg.task, &g, cfg.params.seed, cfg.compress)?
        .ok_or_else(|| PipelineError::Config("eval needs a task".into()))?;
    task.evaluate(&emb)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TuneSummary {
    pub best_trial: usize,
    pub best_objective: f64,
    pub initial_objective: Option<f64>,
    pub best: HyperParams,
    pub trials: Vec<TrialRecord<HyperParams>>,
}

/// Embeds and scores one configuration.
pub fn run_trial(g: &Graph, task: &PreparedTask, params: &HyperParams) -> Result<f64, PipelineError> {
    let out = embed_graph(task.embedding_graph(g), params, false)?;
    let metrics = task.evaluate(&out.embedding)?;
    PreparedTask::objective(&metrics).ok_or_else(|| PipelineError::Config("task produced no objective".into()))
}

/// Searches around `cfg.params` and writes the best config and trial log.
pub fn cmd_tune(cfg: &RunConfig, budget: usize) -> Result<TuneSummary, PipelineError> {
    if budget < 1 {
        return Err(PipelineError::Tuner(TunerError::ZeroBudget));
    }
    let g = load_run_graph(cfg)?;
    let task = prepare_task(&cfg.task, &g, cfg.params.seed, cfg.compress)?
        .ok_or_else(|| PipelineError::Config("tune needs a task to score".into()))?;
    let space = SearchSpace { base: cfg.params.clone(), ..cfg.search.clone() };
    let result = tune(&space, &cfg.params, |p| run_trial(&g, &task, p), budget, cfg.params.seed)?;

    if let Some(path) = &cfg.trial_log {
        write_trial_log_file(&result.trials, path)?;
    }
    if let Some(path) = &cfg.best_config {
        RunConfig { params: result.best.clone(), ..cfg.clone() }.save(path)?;
    }
    Ok(TuneSummary {
        best_trial: result.best_trial,
        best_objective: result.best_objective,
        initial_objective: result.trials[0].objective,
        best: result.best,
        trials: result.trials,
    })
}
