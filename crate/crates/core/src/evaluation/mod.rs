//! Downstream evaluation and brute-force oracles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;

mod classify;
mod linkpred;
pub mod oracle;
pub mod synth;

pub use classify::{
    classify_and_score, f1_scores, node_classification, read_labels, read_labels_file, train_ovr_logreg,
    ClassificationReport, ClassifyOptions, F1Scores, LabeledNodes, OvrModel,
};
pub use linkpred::{link_pred_score, rank_metrics, LinkPredSplit, RankMetrics, RankOutcome};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("graph with {n} vertices exceeds the oracle limit of {max}")]
    TooLarge { n: usize, max: usize },
    #[error("graph is disconnected")]
    Disconnected,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Scores reported by `eval`. Fields not computed by a task are omitted from
/// the JSON.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub micro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub macro_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_10: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits_at_50: Option<f64>,
}

impl From<&ClassificationReport> for Metrics {
    fn from(r: &ClassificationReport) -> Self {
        Self { micro_f1: Some(r.micro_f1), macro_f1: Some(r.macro_f1), ..Default::default() }
    }
}

impl From<&RankMetrics> for Metrics {
    fn from(r: &RankMetrics) -> Self {
        Self {
            auc: Some(r.auc),
            mr: Some(r.mr),
            mrr: Some(r.mrr),
            hits_at_1: Some(r.hits_at_1),
            hits_at_10: Some(r.hits_at_10),
            hits_at_50: Some(r.hits_at_50),
            ..Default::default()
        }
    }
}
