//! Mining user-topic stances from short social-media messages and modelling
//! them as a low-rank user × topic preference matrix.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`corpus`]: line-delimited tweet records and a synthetic generator with
//!   planted preference structure.
//! - [`patterns`]: pro/con hashtag discovery, candidate pattern harvesting and
//!   curated pattern files.
//! - [`extraction`]: applying curated patterns to obtain `(user, topic, ±1)`
//!   instances, frequency filtering and building the sparse matrix.
//! - [`factorization`]: regularized SGD matrix factorization, prediction,
//!   RMSE and model persistence.
//! - [`evaluation`]: hold-out sign accuracy, majority baseline, threshold
//!   sweeps, mean variance and Spearman correlation.
//! - [`topic_space`]: cosine queries over topic vectors and per-user reports.

use std::fmt;
use std::str::FromStr;

pub mod corpus;
pub mod evaluation;
pub mod extraction;
pub mod factorization;
pub mod matrix;
pub mod patterns;
pub mod text;
pub mod topic_space;

pub use corpus::{CorpusStats, SyntheticSpec, Tweet};
pub use extraction::{FilterConfig, InstanceCounts, PreferenceInstance};
pub use factorization::{FactorModel, TrainConfig};
pub use matrix::SparseMatrix;
pub use patterns::{HashtagRule, StancePattern, TopicVocabulary};

/// Agreement (`Pro`, +1) or disagreement (`Con`, −1) with a topic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Pro,
    Con,
}

impl Polarity {
    pub fn value(self) -> i8 {
        match self {
            Polarity::Pro => 1,
            Polarity::Con => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Pro => Polarity::Con,
            Polarity::Con => Polarity::Pro,
        }
    }

    /// Sign convention used throughout: zero counts as pro.
    pub fn of(x: f64) -> Self {
        if x >= 0.0 {
            Polarity::Pro
        } else {
            Polarity::Con
        }
    }

    /// Signed form used in instance and truth dumps (`+1` / `-1`).
    pub fn signed_str(self) -> &'static str {
        match self {
            Polarity::Pro => "+1",
            Polarity::Con => "-1",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Pro => "pro",
            Polarity::Con => "con",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid polarity {0:?} (expected pro, con, +1 or -1)")]
pub struct ParsePolarityError(pub String);

impl FromStr for Polarity {
    type Err = ParsePolarityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pro" | "+1" | "1" => Ok(Polarity::Pro),
            "con" | "-1" => Ok(Polarity::Con),
            other => Err(ParsePolarityError(other.to_string())),
        }
    }
}
