//! Budgeted hyperparameter search.
//!
//! The search runs in the unit cube `[0, 1]^k` of a [`Space`], which maps
//! cube points to configurations. Trial 0 evaluates the caller's initial
//! configuration. Later trials alternate between a Gaussian perturbation of
//! the incumbent and a uniform draw over the whole cube. A perturbation that
//! does not improve the incumbent is retried once with the opposite sign.
//! The perturbation width doubles after a local step that improves the
//! incumbent and halves when both signs fail. Failed evaluations are logged
//! and still use up budget.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::HyperParams;
use crate::rng::{stream, Domain};

const INITIAL_STEP: f64 = 0.2;
const MAX_STEP: f64 = 0.5;
const MIN_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum TunerError {
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One searchable coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dim {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
}

impl Dim {
    pub fn validate(&self) -> Result<(), TunerError> {
        let ok = match *self {
            Dim::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo <= hi,
            Dim::LogUniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi,
            Dim::Integer { lo, hi } => lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(TunerError::InvalidSpace(format!("{self:?}")))
        }
    }

    /// Maps `u ∈ [0, 1]` to a value of this dimension.
    pub fn decode(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match *self {
            Dim::Uniform { lo, hi } => lo + u * (hi - lo),
            Dim::LogUniform { lo, hi } => (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi),
            Dim::Integer { lo, hi } => {
                let width = (hi - lo + 1) as f64;
                (lo + ((u * width).floor() as i64).min(hi - lo)) as f64
            }
        }
    }

    /// Inverse of [`Dim::decode`], clamped to the cube. Integers map to the
    /// middle of their cell.
    pub fn encode(&self, x: f64) -> f64 {
        let u = match *self {
            Dim::Uniform { lo, hi } if hi > lo => (x - lo) / (hi - lo),
            Dim::LogUniform { lo, hi } if hi > lo => (x.ln() - lo.ln()) / (hi.ln() - lo.ln()),
            Dim::Integer { lo, hi } => ((x.round() - lo as f64) + 0.5) / (hi - lo + 1) as f64,
            _ => 0.5,
        };
        u.clamp(0.0, 1.0)
    }
}

/// Maps between configurations and points of the unit cube.
pub trait Space {
    type Config: Clone;

    fn num_dims(&self) -> usize;
    fn decode(&self, u: &[f64]) -> Self::Config;
    fn encode(&self, config: &Self::Config) -> Vec<f64>;

    fn validate(&self) -> Result<(), TunerError> {
        Ok(())
    }
}

/// A product of independent [`Dim`]s; configurations are the decoded values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpace(pub Vec<Dim>);

impl Space for BoxSpace {
    type Config = Vec<f64>;

    fn num_dims(&self) -> usize {
        self.0.len()
    }

    fn decode(&self, u: &[f64]) -> Vec<f64> {
        self.0.iter().zip(u).map(|(d, &u)| d.decode(u)).collect()
    }

    fn encode(&self, config: &Vec<f64>) -> Vec<f64> {
        self.0.iter().zip(config).map(|(d, &x)| d.encode(x)).collect()
    }

    fn validate(&self) -> Result<(), TunerError> {
        self.0.iter().try_for_each(Dim::validate)
    }
}

/// Bounds of the pipeline search. Fields left out of the search keep the
/// values of the base configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    /// Raw weight of each `s_r` before normalization to sum 1.
    pub s_coeff: (f64, f64),
    pub search_s_coeffs: bool,
    /// Sample count as a multiple of `T·m`, searched log-uniformly.
    pub samples_per_tm: (f64, f64),
    pub power_iters: (i64, i64),
    pub prop_steps: (i64, i64),
    pub theta: (f64, f64),
    pub mu: (f64, f64),
    #[serde(skip)]
    pub base: HyperParams,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            s_coeff: (0.01, 1.0),
            search_s_coeffs: true,
            samples_per_tm: (0.1, 20.0),
            power_iters: (1, 5),
            prop_steps: (1, 16),
            theta: (0.01, 2.0),
            mu: (0.0, 1.0),
            base: HyperParams::default(),
        }
    }
}

impl SearchSpace {
    pub fn around(base: HyperParams) -> Self {
        Self { base, ..Self::default() }
    }

    fn window(&self) -> usize {
        self.base.window
    }

    fn dims(&self) -> Vec<Dim> {
        let mut dims = Vec::new();
        if self.search_s_coeffs {
            dims.extend(std::iter::repeat_n(Dim::Uniform { lo: self.s_coeff.0, hi: self.s_coeff.1 }, self.window()));
        }
        dims.push(Dim::LogUniform { lo: self.samples_per_tm.0, hi: self.samples_per_tm.1 });
        dims.push(Dim::Integer { lo: self.power_iters.0, hi: self.power_iters.1 });
        dims.push(Dim::Integer { lo: self.prop_steps.0, hi: self.prop_steps.1 });
        dims.push(Dim::Uniform { lo: self.theta.0, hi: self.theta.1 });
        dims.push(Dim::Uniform { lo: self.mu.0, hi: self.mu.1 });
        dims
    }
}

impl Space for SearchSpace {
    type Config = HyperParams;

    fn num_dims(&self) -> usize {
        self.dims().len()
    }

    fn decode(&self, u: &[f64]) -> HyperParams {
        let dims = self.dims();
        let x: Vec<f64> = dims.iter().zip(u).map(|(d, &u)| d.decode(u)).collect();
        let mut p = self.base.clone();
        let mut rest = &x[..];
        if self.search_s_coeffs {
            let (s, tail) = rest.split_at(self.window());
            let total: f64 = s.iter().sum();
            p.s_coeffs = Some(s.iter().map(|v| v / total).collect());
            rest = tail;
        }
        p.samples = None;
        p.samples_per_tm = Some(rest[0]);
        p.power_iters = rest[1] as usize;
        p.prop_steps = rest[2] as usize;
        p.theta = rest[3];
        p.mu = rest[4];
        p
    }

    fn encode(&self, c: &HyperParams) -> Vec<f64> {
        let dims = self.dims();
        let mut x = Vec::with_capacity(dims.len());
        if self.search_s_coeffs {
            let s = c.s_coeffs_or_uniform();
            let top = s.iter().copied().fold(0.0, f64::max);
            x.extend(s.iter().map(|v| if top > 0.0 { self.s_coeff.1 * v / top } else { self.s_coeff.0 }));
        }
        x.push(c.samples_per_tm.unwrap_or(1.0));
        x.push(c.power_iters as f64);
        x.push(c.prop_steps as f64);
        x.push(c.theta);
        x.push(c.mu);
        dims.iter().zip(&x).map(|(d, &v)| d.encode(v)).collect()
    }

    fn validate(&self) -> Result<(), TunerError> {
        if self.search_s_coeffs && !(self.s_coeff.0 > 0.0) {
            return Err(TunerError::InvalidSpace("s_r lower bound must be positive".into()));
        }
        if self.power_iters.0 < 1 || self.prop_steps.0 < 1 || !(self.theta.0 > 0.0) {
            return Err(TunerError::InvalidSpace("q, k and theta must be positive".into()));
        }
        self.dims().iter().try_for_each(Dim::validate)
    }
}

/// Draws a configuration uniformly from `space` (log-uniformly along
/// log-scaled dimensions).
pub fn sample_config<S: Space, R: Rng + ?Sized>(space: &S, rng: &mut R) -> S::Config {
    let u: Vec<f64> = (0..space.num_dims()).map(|_| rng.random::<f64>()).collect();
    space.decode(&u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Initial,
    Local,
    Global,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<C> {
    pub trial: usize,
    pub kind: TrialKind,
    pub config: C,
    /// `None` when the evaluation failed.
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug)]
pub struct TuneResult<C> {
    pub best: C,
    pub best_objective: f64,
    pub best_trial: usize,
    pub trials: Vec<TrialRecord<C>>,
}

/// Maximizes `objective` over `space` with `budget` evaluations, starting
/// from `initial`. The result is a pure function of the inputs and `seed`.
pub fn tune<S, F, E>(
    space: &S,
    initial: &S::Config,
    mut objective: F,
    budget: usize,
    seed: u64,
) -> Result<TuneResult<S::Config>, TunerError>
where
    S: Space,
    F: FnMut(&S::Config) -> Result<f64, E>,
    E: std::fmt::Display,
{
    if budget == 0 {
        return Err(TunerError::ZeroBudget);
    }
    space.validate()?;
    let k = space.num_dims();
    let mut rng = stream(seed, Domain::Tuner, 0);
    let mut trials = Vec::with_capacity(budget);
    // (point, objective, trial)
    let mut incumbent: Option<(Vec<f64>, f64, usize)> = None;
    let mut step = INITIAL_STEP;
    // a failed perturbation is retried once in the opposite direction
    let mut mirror: Option<Vec<f64>> = None;
    let mut last_delta = Vec::new();
    let mut retrying = false;

    for t in 0..budget {
        let (kind, point, config) = if t == 0 {
            (TrialKind::Initial, space.encode(initial), initial.clone())
        } else if t % 2 == 1 && incumbent.is_some() {
            let center = &incumbent.as_ref().expect("incumbent").0;
            let delta: Vec<f64> = match mirror.take() {
                Some(d) => {
                    retrying = true;
                    d.iter().map(|v| -v).collect()
                }
                None => {
                    retrying = false;
                    (0..k).map(|_| step * rng.sample::<f64, _>(StandardNormal)).collect()
                }
            };
            let point: Vec<f64> = center.iter().zip(&delta).map(|(c, d)| (c + d).clamp(0.0, 1.0)).collect();
            last_delta = delta;
            let config = space.decode(&point);
            (TrialKind::Local, point, config)
        } else {
            let point: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let config = space.decode(&point);
            (TrialKind::Global, point, config)
        };

        let start = Instant::now();
        let outcome = match objective(&config) {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(v) => Err(format!("objective is not finite: {v}")),
            Err(e) => Err(e.to_string()),
        };
        let wall_time_secs = start.elapsed().as_secs_f64();

        let improved = match (&outcome, &incumbent) {
            (Ok(v), Some((_, best, _))) => v > best,
            (Ok(_), None) => true,
            (Err(_), _) => false,
        };
        if kind == TrialKind::Local {
            if improved {
                step = (2.0 * step).min(MAX_STEP);
            } else if retrying {
                step = (0.5 * step).max(MIN_STEP);
            } else {
                mirror = Some(std::mem::take(&mut last_delta));
            }
        }
        if improved {
            incumbent = Some((point, *outcome.as_ref().expect("improved"), t));
            mirror = None;
            if kind == TrialKind::Global {
                step = INITIAL_STEP;
            }
        }
        let (objective, error) = match outcome {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e)),
        };
        trials.push(TrialRecord { trial: t, kind, config, objective, error, wall_time_secs });
    }

    let (_, best_objective, best_trial) = incumbent.ok_or(TunerError::AllTrialsFailed(budget))?;
    Ok(TuneResult { best: trials[best_trial].config.clone(), best_objective, best_trial, trials })
}

/// Writes one JSON object per trial.
pub fn write_trial_log<C: Serialize, W: Write>(trials: &[TrialRecord<C>], mut w: W) -> Result<(), TunerError> {
    for t in trials {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trial_log_file<C: Serialize>(trials: &[TrialRecord<C>], path: &Path) -> Result<(), TunerError> {
    write_trial_log(trials, std::io::BufWriter::new(std::fs::File::create(path)?))
}
