//! Node classification with one-vs-rest logistic regression.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::randsvd::Embedding;
use crate::rng::{stream, Domain};

const MAX_NEWTON_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-6;
const MAX_LOGIT: f64 = 30.0;

/// Per-vertex label sets with dense label ids `0..num_labels`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledNodes {
    labels: Vec<Vec<u32>>,
    num_labels: usize,
}

impl LabeledNodes {
    /// Label sets are sorted and deduplicated. Vertices with an empty set are
    /// unlabeled and never sampled.
    pub fn new(mut labels: Vec<Vec<u32>>, num_labels: usize) -> Result<Self, EvalError> {
        for set in &mut labels {
            set.sort_unstable();
            set.dedup();
            if let Some(&l) = set.last() {
                if l as usize >= num_labels {
                    return Err(EvalError::InvalidInput(format!("label {l} out of range 0..{num_labels}")));
                }
            }
        }
        Ok(Self { labels, num_labels })
    }

    /// One label per vertex.
    pub fn single(labels: &[u32]) -> Self {
        let num_labels = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Self { labels: labels.iter().map(|&l| vec![l]).collect(), num_labels }
    }

    pub fn num_vertices(&self) -> usize {
        self.labels.len()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn labels_of(&self, u: usize) -> &[u32] {
        &self.labels[u]
    }

    pub fn labeled_vertices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&u| !self.labels[u].is_empty()).collect()
    }
}

/// Reads `node_id label` lines; repeating a node gives it several labels.
/// Labels are renumbered densely in ascending order of their original value.
pub fn read_labels<R: BufRead>(reader: R, num_vertices: usize) -> Result<LabeledNodes, EvalError> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64, EvalError> {
            let tok = tok.ok_or_else(|| EvalError::Parse { line: i + 1, msg: "expected `node label`".into() })?;
            tok.parse().map_err(|_| EvalError::Parse { line: i + 1, msg: format!("not an integer: {tok:?}") })
        };
        let (node, label) = (parse(it.next())?, parse(it.next())?);
        if node >= num_vertices as u64 {
            return Err(EvalError::Parse { line: i + 1, msg: format!("node {node} outside 0..{num_vertices}") });
        }
        pairs.push((node as usize, label));
    }
    let ids: BTreeMap<u64, u32> = {
        let mut raw: Vec<u64> = pairs.iter().map(|&(_, l)| l).collect();
        raw.sort_unstable();
        raw.dedup();
        raw.into_iter().enumerate().map(|(i, l)| (l, i as u32)).collect()
    };
    let mut labels = vec![Vec::new(); num_vertices];
    for (node, label) in pairs {
        labels[node].push(ids[&label]);
    }
    LabeledNodes::new(labels, ids.len())
}

pub fn read_labels_file(path: &Path, num_vertices: usize) -> Result<LabeledNodes, EvalError> {
    read_labels(std::io::BufReader::new(std::fs::File::open(path)?), num_vertices)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Fraction of labeled vertices used for training.
    pub train_ratio: f64,
    /// Number of random splits averaged.
    pub repeats: usize,
    /// L2 penalty on the weights (the bias is not penalized).
    pub reg: f64,
    /// Scale embedding rows to unit length before training.
    pub normalize_rows: bool,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { train_ratio: 0.1, repeats: 10, reg: 1e-3, normalize_rows: true, seed: 0 }
    }
}

/// One logistic classifier per label. `weights` is `labels × dim`.
#[derive(Clone, Debug)]
pub struct OvrModel {
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    /// Labels whose training targets were all equal; their classifier is the
    /// prior.
    pub degenerate: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl OvrModel {
    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn num_labels(&self) -> usize {
        self.weights.nrows()
    }

    pub fn decision_function(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t());
        for mut row in z.rows_mut() {
            row += &ndarray::ArrayView1::from(&self.bias);
        }
        z
    }

    /// For each row, the `counts[i]` highest-scoring labels (ties go to the
    /// lower id), sorted ascending.
    pub fn predict_top(&self, x: ArrayView2<'_, f64>, counts: &[usize]) -> Vec<Vec<u32>> {
        let z = self.decision_function(x);
        z.axis_iter(Axis(0))
            .zip(counts)
            .map(|(row, &k)| {
                let mut order: Vec<u32> = (0..row.len() as u32).collect();
                order.sort_by(|&a, &b| row[b as usize].total_cmp(&row[a as usize]).then(a.cmp(&b)));
                order.truncate(k);
                order.sort_unstable();
                order
            })
            .collect()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// log(1 + exp(-y z)) for y ∈ {-1, 1}
fn log_loss(y: f64, z: f64) -> f64 {
    let t = -y * z;
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Minimizes `mean log(1 + exp(-y (w·x + b))) + reg/2 ‖w‖²` by Newton's
/// method with backtracking. Returns `(w, b, iterations)`.
fn fit_binary(x: ArrayView2<'_, f64>, y: &[f64], reg: f64) -> (Vec<f64>, f64, usize) {
    let (n, d) = x.dim();
    let inv_n = 1.0 / n as f64;
    let mut w = vec![0.0; d + 1];
    let score = |w: &[f64], i: usize| -> f64 { x.row(i).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d] };
    let objective = |w: &[f64]| -> f64 {
        let loss: f64 = (0..n).map(|i| log_loss(y[i], score(w, i))).sum::<f64>() * inv_n;
        loss + 0.5 * reg * w[..d].iter().map(|v| v * v).sum::<f64>()
    };
    let mut f = objective(&w);
    for iter in 0..MAX_NEWTON_ITERS {
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        for (i, &yi) in y.iter().enumerate() {
            let z = score(&w, i);
            let p = sigmoid(yi * z);
            let g = -(1.0 - p) * yi * inv_n;
            let h = p * (1.0 - p) * inv_n;
            let row = x.row(i);
            for a in 0..=d {
                let xa = if a < d { row[a] } else { 1.0 };
                grad[a] += g * xa;
                for b in 0..=a {
                    let xb = if b < d { row[b] } else { 1.0 };
                    hess[(a, b)] += h * xa * xb;
                }
            }
        }
        for a in 0..d {
            grad[a] += reg * w[a];
            hess[(a, a)] += reg;
        }
        if grad.amax() < GRAD_TOL {
            return (w[..d].to_vec(), w[d], iter);
        }
        for a in 0..=d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        let step = match hess.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => {
                // saturated bias direction; a tiny ridge restores definiteness
                hess[(d, d)] += 1e-10;
                match hess.cholesky() {
                    Some(c) => c.solve(&grad),
                    None => grad.clone(),
                }
            }
        };
        let slope = -grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            let fc = objective(&cand);
            if fc <= f + 1e-4 * t * slope || t < 1e-12 {
                w = cand;
                f = fc;
                break;
            }
            t *= 0.5;
        }
    }
    (w[..d].to_vec(), w[d], MAX_NEWTON_ITERS)
}

/// Trains one classifier per label on the rows of `x`. `targets[i]` lists
/// the labels of row `i`.
pub fn train_ovr_logreg(
    x: ArrayView2<'_, f64>,
    targets: &[Vec<u32>],
    num_labels: usize,
    reg: f64,
) -> Result<OvrModel, EvalError> {
    let (n, d) = x.dim();
    if targets.len() != n {
        return Err(EvalError::InvalidInput(format!("{} target sets for {n} rows", targets.len())));
    }
    if n == 0 {
        return Err(EvalError::InvalidInput("no training rows".into()));
    }
    if !(reg > 0.0) {
        return Err(EvalError::InvalidInput(format!("regularization {reg} must be positive")));
    }
    let fits: Vec<(Vec<f64>, f64, bool, usize)> = (0..num_labels as u32)
        .into_par_iter()
        .map(|label| {
            let y: Vec<f64> = targets.iter().map(|t| if t.contains(&label) { 1.0 } else { -1.0 }).collect();
            let pos = y.iter().filter(|&&v| v > 0.0).count();
            if pos == 0 || pos == n {
                let prior = (pos as f64 + 0.5) / (n as f64 + 1.0);
                let logit = (prior / (1.0 - prior)).ln().clamp(-MAX_LOGIT, MAX_LOGIT);
                return (vec![0.0; d], logit, true, 0);
            }
            let (w, b, it) = fit_binary(x, &y, reg);
            (w, b, false, it)
        })
        .collect();
    let mut weights = Array2::zeros((num_labels, d));
    let mut bias = Vec::with_capacity(num_labels);
    let mut degenerate = Vec::with_capacity(num_labels);
    let mut iterations = Vec::with_capacity(num_labels);
    for (l, (w, b, deg, it)) in fits.into_iter().enumerate() {
        weights.row_mut(l).assign(&ndarray::ArrayView1::from(&w));
        bias.push(b);
        degenerate.push(deg);
        iterations.push(it);
    }
    Ok(OvrModel { weights, bias, degenerate, iterations })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_: f64,
}

/// Micro F1 from pooled counts, macro F1 as the plain mean over all
/// `num_labels` labels. An F1 with an empty denominator counts as 0.
pub fn f1_scores(truth: &[Vec<u32>], pred: &[Vec<u32>], num_labels: usize) -> F1Scores {
    let mut tp = vec![0u64; num_labels];
    let mut fp = vec![0u64; num_labels];
    let mut fn_ = vec![0u64; num_labels];
    for (t, p) in truth.iter().zip(pred) {
        for &l in p {
            if t.contains(&l) {
                tp[l as usize] += 1;
            } else {
                fp[l as usize] += 1;
            }
        }
        for &l in t {
            if !p.contains(&l) {
                fn_[l as usize] += 1;
            }
        }
    }
    let f1 = |tp: u64, fp: u64, fn_: u64| {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fn_.iter().sum());
    let macro_ = if num_labels == 0 {
        0.0
    } else {
        (0..num_labels).map(|l| f1(tp[l], fp[l], fn_[l])).sum::<f64>() / num_labels as f64
    };
    F1Scores { micro, macro_ }
}

/// Predicts the true number of labels for each test row and scores them.
pub fn classify_and_score(model: &OvrModel, x_test: ArrayView2<'_, f64>, truth: &[Vec<u32>]) -> F1Scores {
    let counts: Vec<usize> = truth.iter().map(Vec::len).collect();
    let pred = model.predict_top(x_test, &counts);
    f1_scores(truth, &pred, model.num_labels())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub micro_f1_std: f64,
    pub macro_f1_std: f64,
    pub splits: Vec<F1Scores>,
    pub degenerate_labels: usize,
}

fn features(emb: &Embedding, normalize: bool) -> Array2<f64> {
    let mut x = emb.matrix().mapv(f64::from);
    if normalize {
        for mut row in x.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row /= norm;
            }
        }
    }
    x
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Repeated random train/test splits of the labeled vertices; F1 averaged
/// over the repeats.
pub fn node_classification(
    emb: &Embedding,
    labels: &LabeledNodes,
    opts: &ClassifyOptions,
) -> Result<ClassificationReport, EvalError> {
    if emb.num_nodes() != labels.num_vertices() {
        return Err(EvalError::InvalidInput(format!(
            "embedding has {} rows but labels cover {} vertices",
            emb.num_nodes(),
            labels.num_vertices()
        )));
    }
    if !(opts.train_ratio > 0.0 && opts.train_ratio < 1.0) {
        return Err(EvalError::InvalidInput(format!("train ratio {} outside (0, 1)", opts.train_ratio)));
    }
    if opts.repeats == 0 {
        return Err(EvalError::InvalidInput("at least one repeat is required".into()));
    }
    let labeled = labels.labeled_vertices();
    if labeled.len() < 2 {
        return Err(EvalError::InvalidInput("need at least two labeled vertices".into()));
    }
    let x = features(emb, opts.normalize_rows);
    let n_train = ((labeled.len() as f64 * opts.train_ratio).round() as usize).clamp(1, labeled.len() - 1);

    let mut splits = Vec::with_capacity(opts.repeats);
    let mut degenerate_labels = 0;
    for rep in 0..opts.repeats {
        let mut order = labeled.clone();
        order.shuffle(&mut stream(opts.seed, Domain::Split, rep as u64));
        let (train, test) = order.split_at(n_train);
        let targets: Vec<Vec<u32>> = train.iter().map(|&u| labels.labels_of(u).to_vec()).collect();
        let truth: Vec<Vec<u32>> = test.iter().map(|&u| labels.labels_of(u).to_vec()).collect();
        let model = train_ovr_logreg(x.select(Axis(0), train).view(), &targets, labels.num_labels(), opts.reg)?;
        degenerate_labels = degenerate_labels.max(model.degenerate.iter().filter(|&&d| d).count());
        splits.push(classify_and_score(&model, x.select(Axis(0), test).view(), &truth));
    }
    let (micro_f1, micro_f1_std) = mean_std(splits.iter().map(|s| s.micro));
    let (macro_f1, macro_f1_std) = mean_std(splits.iter().map(|s| s.macro_));
    Ok(ClassificationReport { micro_f1, macro_f1, micro_f1_std, macro_f1_std, splits, degenerate_labels })
}
