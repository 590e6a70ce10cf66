//! Truncated SVD of the symmetric sparsifier by power iteration with eigSVD
//! orthonormalization, and the embedding `X = U Σ^{1/2}`.

use ndarray::Array2;
use thiserror::Error;

mod eig;
mod embedding;
mod rsvd;

pub use eig::{eig_svd, EigSvd};
pub use embedding::{
    embedding_from_factors, read_embedding, read_embedding_file, write_embedding, write_embedding_file,
    write_embedding_text, Embedding, EMBEDDING_MAGIC,
};
pub use rsvd::{fast_randomized_svd, fast_randomized_svd_with_basis, gaussian_projection};

#[derive(Debug, Error)]
pub enum SvdError {
    #[error("invalid SVD parameters: {0}")]
    InvalidParams(String),
    #[error("bad embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SvdParams {
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Extra projection columns beyond `d`.
    pub oversampling: usize,
    /// Power iterations `q`.
    pub power_iters: usize,
    pub seed: u64,
}

impl SvdParams {
    pub fn new(dim: usize) -> Self {
        Self { dim, oversampling: 16, power_iters: 1, seed: 0 }
    }

    pub fn with_power_iters(mut self, q: usize) -> Self {
        self.power_iters = q;
        self
    }

    pub fn with_oversampling(mut self, s: usize) -> Self {
        self.oversampling = s;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n: usize) -> Result<(), SvdError> {
        if self.dim < 1 {
            return Err(SvdError::InvalidParams("dimension must be at least 1".into()));
        }
        if self.power_iters < 1 {
            return Err(SvdError::InvalidParams("at least one power iteration is required".into()));
        }
        if self.dim + self.oversampling > n {
            return Err(SvdError::InvalidParams(format!(
                "d + oversampling = {} exceeds matrix size {n}",
                self.dim + self.oversampling
            )));
        }
        Ok(())
    }
}

/// `M ≈ U diag(sigma) Vᵀ` with `d` columns, `sigma` descending.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdFactors {
    pub u: Array2<f32>,
    pub sigma: Vec<f32>,
    pub v: Array2<f32>,
}
