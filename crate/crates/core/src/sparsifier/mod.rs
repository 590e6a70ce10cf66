//! Sparse approximation of the NetMF matrix.
//!
//! The target is
//!
//! ```text
//! trunc_log( vol(G)/b * Σ_{r=1..T} s_r (D⁻¹A)^r D⁻¹ )
//! ```
//!
//! Every edge is visited `⌊M/m⌋` or `⌈M/m⌉` times. Each visit draws a walk
//! length `r` from `s`, keeps the draw with probability
//! `p_e = min(1, C (1/d_u + 1/d_v))`, and on success adds a path sample with
//! weight `1/p_e` to a [`SparsifierTable`]. [`assemble_netmf`] rescales the
//! aggregated weights into an unbiased estimate of the matrix above and
//! applies the truncated logarithm.

use thiserror::Error;

use crate::graph::GraphError;

mod assemble;
mod matrix;
mod sampling;
mod table;

pub use assemble::{assemble_netmf, assembled_raw_entries};
pub use matrix::SparseMatrix;
pub use sampling::{downsample_prob, path_sample, sample_sparsifier, SampleStats, SampledSparsifier};
pub use table::{from_fixed, pack_pair, to_fixed, unpack_pair, SparsifierTable, TableFull, FIXED_POINT_BITS};

#[derive(Debug, Error)]
pub enum SparsifierError {
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    TableFull(#[from] TableFull),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parameters of downsampled per-edge path sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingParams {
    /// Window size `T`.
    pub window: usize,
    /// Walk-length weights `s_1..s_T`; non-negative, summing to 1.
    pub s_coeffs: Vec<f64>,
    /// Target number of draws `M`.
    pub samples: u64,
    /// Downsampling constant `C`. `f64::INFINITY` keeps every draw.
    pub c: f64,
    /// Negative-sampling constant `b`.
    pub negative: f64,
    pub seed: u64,
    /// Table slots per expected distinct entry (before rounding up to a
    /// power of two).
    pub capacity_factor: f64,
}

impl SamplingParams {
    /// Uniform `s`, `C = ln n`, `b = 1`.
    pub fn new(window: usize, samples: u64, num_vertices: usize) -> Self {
        Self {
            window,
            s_coeffs: vec![1.0 / window.max(1) as f64; window],
            samples,
            c: (num_vertices.max(2) as f64).ln(),
            negative: 1.0,
            seed: 0,
            capacity_factor: 2.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_s_coeffs(mut self, s: Vec<f64>) -> Self {
        self.window = s.len();
        self.s_coeffs = s;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_negative(mut self, b: f64) -> Self {
        self.negative = b;
        self
    }

    pub fn validate(&self) -> Result<(), SparsifierError> {
        let bad = |msg: String| Err(SparsifierError::InvalidParams(msg));
        if self.window < 1 {
            return bad("window T must be at least 1".into());
        }
        if self.s_coeffs.len() != self.window {
            return bad(format!("{} coefficients for window {}", self.s_coeffs.len(), self.window));
        }
        if self.s_coeffs.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return bad("coefficients must be finite and non-negative".into());
        }
        let sum: f64 = self.s_coeffs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("coefficients sum to {sum}, expected 1"));
        }
        if self.samples < 1 {
            return bad("sample count M must be at least 1".into());
        }
        if !(self.c > 0.0) {
            return bad(format!("downsampling constant C = {} must be positive", self.c));
        }
        if !(self.negative > 0.0) || !self.negative.is_finite() {
            return bad(format!("negative constant b = {} must be positive", self.negative));
        }
        if !(self.capacity_factor >= 1.0) {
            return bad("capacity factor must be at least 1".into());
        }
        Ok(())
    }
}
