//! Low-rank factorization `R ≈ PᵀQ` of the preference matrix by stochastic
//! gradient descent over the known cells only.
//!
//! The objective is
//!
//! ```text
//! Σ_{(u,t) known} (r_ut − p_u·q_t)² + λ_P‖p_u‖² + λ_Q‖q_t‖²
//! ```
//!
//! with no bias terms. Each visit to a known cell applies
//!
//! ```text
//! e   = r_ut − p_u·q_t
//! p_u ← p_u + η (e q_t − λ_P p_u)
//! q_t ← q_t + η (e p_u − λ_Q q_t)
//! ```
//!
//! using the pre-update `p_u` on the right-hand side of both lines.

use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::{IndexMap, SparseMatrix};

mod parallel;
mod persist;

pub use persist::{decode, encode, load, save, FormatError, MAGIC, VERSION};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("matrix has no known cells")]
    EmptyMatrix,
    #[error("training diverged at epoch {epoch}: rmse = {rmse}")]
    Diverged { epoch: usize, rmse: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LookupError {
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("rmse undefined on a matrix with no known cells")]
    NoCells,
    #[error(transparent)]
    Lookup(#[from] LookupError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Latent dimension.
    pub k: usize,
    pub lambda_p: f64,
    pub lambda_q: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Threads used per epoch. With more than one, users and topics are cut
    /// into blocks and independent blocks are updated concurrently.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 100,
            lambda_p: 0.1,
            lambda_q: 0.1,
            learning_rate: 0.05,
            epochs: 50,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.k == 0 {
            return bad("k must be positive");
        }
        if !(self.lambda_p >= 0.0 && self.lambda_p.is_finite())
            || !(self.lambda_q >= 0.0 && self.lambda_q.is_finite())
        {
            return bad("regularization coefficients must be finite and non-negative");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be positive");
        }
        Ok(())
    }
}

/// User and topic vectors. `p` holds `k × |U|` and `q` holds `k × |T|`, both
/// column-major, so each user or topic vector is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    k: usize,
    users: IndexMap,
    topics: IndexMap,
    p: Vec<f64>,
    q: Vec<f64>,
}

impl FactorModel {
    pub fn from_parts(
        k: usize,
        users: IndexMap,
        topics: IndexMap,
        p: Vec<f64>,
        q: Vec<f64>,
    ) -> Result<Self, FormatError> {
        if k == 0 {
            return Err(FormatError::Invalid("k must be positive".into()));
        }
        if p.len() != k * users.len() {
            return Err(FormatError::ShapeMismatch {
                what: "P",
                expected: k * users.len(),
                found: p.len(),
            });
        }
        if q.len() != k * topics.len() {
            return Err(FormatError::ShapeMismatch {
                what: "Q",
                expected: k * topics.len(),
                found: q.len(),
            });
        }
        if p.iter().chain(&q).any(|x| !x.is_finite()) {
            return Err(FormatError::Invalid("non-finite factor entry".into()));
        }
        Ok(FactorModel {
            k,
            users,
            topics,
            p,
            q,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn users(&self) -> &IndexMap {
        &self.users
    }

    pub fn topics(&self) -> &IndexMap {
        &self.topics
    }

    pub fn user_vector(&self, row: usize) -> &[f64] {
        &self.p[row * self.k..(row + 1) * self.k]
    }

    pub fn topic_vector(&self, col: usize) -> &[f64] {
        &self.q[col * self.k..(col + 1) * self.k]
    }

    /// Column-major `P`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Column-major `Q`.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn user_row(&self, user: &str) -> Result<usize, LookupError> {
        self.users
            .get(user)
            .ok_or_else(|| LookupError::UnknownUser(user.to_string()))
    }

    pub fn topic_col(&self, topic: &str) -> Result<usize, LookupError> {
        self.topics
            .get(topic)
            .ok_or_else(|| LookupError::UnknownTopic(topic.to_string()))
    }

    /// `p_u · q_t` by ordinal.
    pub fn predict_index(&self, row: usize, col: usize) -> f64 {
        dot(self.user_vector(row), self.topic_vector(col))
    }

    /// Unclamped prediction `p_u · q_t`.
    pub fn predict(&self, user: &str, topic: &str) -> Result<f64, LookupError> {
        let row = self.user_row(user)?;
        let col = self.topic_col(topic)?;
        Ok(self.predict_index(row, col))
    }

    /// Training-style RMSE over the known cells of `r`, matched by id.
    pub fn rmse(&self, r: &SparseMatrix) -> Result<f64, MetricError> {
        rmse(self, r)
    }
}

pub fn predict(model: &FactorModel, user: &str, topic: &str) -> Result<f64, LookupError> {
    model.predict(user, topic)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(Σ (p_u·q_t − r_ut)² / N)` over the known cells of `r`. Users and
/// topics are matched to the model by id.
pub fn rmse(model: &FactorModel, r: &SparseMatrix) -> Result<f64, MetricError> {
    if r.nnz() == 0 {
        return Err(MetricError::NoCells);
    }
    let rows = map_ids(r.users(), model.users(), LookupError::UnknownUser)?;
    let cols = map_ids(r.topics(), model.topics(), LookupError::UnknownTopic)?;
    let sse: f64 = r
        .iter()
        .map(|(u, t, v)| {
            let e = model.predict_index(rows[u], cols[t]) - v;
            e * e
        })
        .sum();
    Ok((sse / r.nnz() as f64).sqrt())
}

fn map_ids(
    from: &IndexMap,
    to: &IndexMap,
    missing: fn(String) -> LookupError,
) -> Result<Vec<usize>, LookupError> {
    if from == to {
        return Ok((0..from.len()).collect());
    }
    from.ids()
        .iter()
        .map(|id| to.get(id).ok_or_else(|| missing(id.clone())))
        .collect()
}

/// One SGD update on a single known cell. Returns the pre-update residual.
#[inline]
pub fn sgd_step(
    p: &mut [f64],
    q: &mut [f64],
    r: f64,
    lr: f64,
    lambda_p: f64,
    lambda_q: f64,
) -> f64 {
    let e = r - dot(p, q);
    for (pi, qi) in p.iter_mut().zip(q.iter_mut()) {
        let (p0, q0) = (*pi, *qi);
        *pi += lr * (e * q0 - lambda_p * p0);
        *qi += lr * (e * p0 - lambda_q * q0);
    }
    e
}

#[derive(Debug, Clone)]
pub struct Factorization {
    pub model: FactorModel,
    /// Training RMSE after each epoch.
    pub rmse_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Trains `P` and `Q` on the known cells of `r`.
///
/// Factors start uniform on `[−0.1/√k, 0.1/√k]`. Each epoch visits every
/// known cell once in a freshly shuffled order. Everything is drawn from a
/// ChaCha8 stream seeded with `cfg.seed`, so a fixed seed reproduces the
/// model bit for bit.
pub fn factorize(r: &SparseMatrix, cfg: &TrainConfig) -> Result<Factorization, TrainError> {
    cfg.validate()?;
    if r.nnz() == 0 {
        return Err(TrainError::EmptyMatrix);
    }
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scale = 0.1 / (k as f64).sqrt();
    let init = Uniform::new_inclusive(-scale, scale).expect("finite bounds");
    let mut p: Vec<f64> = (0..k * r.n_users())
        .map(|_| init.sample(&mut rng))
        .collect();
    let mut q: Vec<f64> = (0..k * r.n_topics())
        .map(|_| init.sample(&mut rng))
        .collect();

    let known: Vec<Cell> = r
        .iter()
        .map(|(row, col, value)| Cell { row, col, value })
        .collect();
    let mut visit = known.clone();
    let mut grid = (cfg.workers > 1)
        .then(|| parallel::BlockGrid::new(&known, r.n_users(), r.n_topics(), cfg.workers));

    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        match grid.as_mut() {
            None => {
                visit.shuffle(&mut rng);
                for c in &visit {
                    let pu = &mut p[c.row * k..(c.row + 1) * k];
                    let qt = &mut q[c.col * k..(c.col + 1) * k];
                    sgd_step(
                        pu,
                        qt,
                        c.value,
                        cfg.learning_rate,
                        cfg.lambda_p,
                        cfg.lambda_q,
                    );
                }
            }
            Some(grid) => {
                grid.shuffle(&mut rng);
                grid.run_epoch(&mut p, &mut q, k, cfg);
            }
        }
        // same summation order as `rmse`, so the last entry equals it exactly
        let sse: f64 = known
            .iter()
            .map(|c| {
                let e = dot(
                    &p[c.row * k..(c.row + 1) * k],
                    &q[c.col * k..(c.col + 1) * k],
                ) - c.value;
                e * e
            })
            .sum();
        let rmse = (sse / known.len() as f64).sqrt();
        log::debug!("epoch {epoch}: rmse {rmse:.6}");
        if !rmse.is_finite() {
            return Err(TrainError::Diverged { epoch, rmse });
        }
        trace.push(rmse);
    }

    let model = FactorModel {
        k,
        users: r.users().clone(),
        topics: r.topics().clone(),
        p,
        q,
    };
    Ok(Factorization {
        model,
        rmse_trace: trace,
    })
}
