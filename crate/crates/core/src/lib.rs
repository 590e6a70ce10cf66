//! Network embedding through a sparsified NetMF matrix.
//!
//! The pipeline has three stages:
//!
//! 1. [`sparsifier`]: downsampled per-edge path sampling aggregated in a
//!    concurrent hash table, assembled into a symmetric trunc-log CSR matrix.
//! 2. [`randsvd`]: power-iteration randomized SVD orthonormalized with
//!    eigSVD, giving the initial embedding `X = U Σ^{1/2}`.
//! 3. [`propagation`]: Chebyshev band-pass filtering of `X` over the graph.
//!
//! [`evaluation`] and [`tuner`] score and search over the pipeline, and
//! [`pipeline`] wires everything to config files for the CLI.
//!
//! The guide under `book/` walks through each stage with runnable snippets.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evaluation;
pub mod graph;
pub mod pipeline;
pub mod propagation;
pub mod randsvd;
pub mod rng;
pub mod sparsifier;
pub mod tuner;

pub use graph::{EdgeList, Graph, VertexId};
pub use randsvd::{Embedding, SvdFactors, SvdParams};
pub use sparsifier::{SamplingParams, SparseMatrix, SparsifierTable};

// Compile and run every code block in the guide as a doc-test.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graph.md")]
    mod graph {}
    #[doc = include_str!("../../../book/src/sparsifier.md")]
    mod sparsifier {}
    #[doc = include_str!("../../../book/src/randsvd.md")]
    mod randsvd {}
    #[doc = include_str!("../../../book/src/propagation.md")]
    mod propagation {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
