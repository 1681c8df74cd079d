//! Topic similarity and per-user preference reports over a trained model.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::factorization::{dot, FactorModel, LookupError};
use crate::matrix::SparseMatrix;
use crate::Polarity;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopicSpaceError {
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error("topic {0:?} has a zero vector; cosine undefined")]
    ZeroVector(String),
    #[error("invalid band specification {spec:?}: {reason}")]
    InvalidBand { spec: String, reason: String },
    #[error("band {band} has {available} topic pairs, {requested} requested")]
    InsufficientPairs {
        band: Band,
        available: usize,
        requested: usize,
    },
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn cosine_of(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

/// Cosine similarity between two topic vectors, clamped to `[−1, 1]`.
pub fn cosine(model: &FactorModel, a: &str, b: &str) -> Result<f64, TopicSpaceError> {
    let (ca, cb) = (model.topic_col(a)?, model.topic_col(b)?);
    let (va, vb) = (model.topic_vector(ca), model.topic_vector(cb));
    let (na, nb) = (norm(va), norm(vb));
    if na == 0.0 {
        return Err(TopicSpaceError::ZeroVector(a.to_string()));
    }
    if nb == 0.0 {
        return Err(TopicSpaceError::ZeroVector(b.to_string()));
    }
    // the product is commutative but the summation order is not
    Ok(if a <= b {
        cosine_of(va, vb, na, nb)
    } else {
        cosine_of(vb, va, nb, na)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub topic: String,
    pub cosine: f64,
}

fn by_score_then_name(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// The `n` topics most similar to `topic`, excluding itself and topics with
/// zero vectors. Equal cosines are ordered by name.
pub fn nearest_topics(
    model: &FactorModel,
    topic: &str,
    n: usize,
) -> Result<Vec<Neighbour>, TopicSpaceError> {
    let col = model.topic_col(topic)?;
    if norm(model.topic_vector(col)) == 0.0 {
        return Err(TopicSpaceError::ZeroVector(topic.to_string()));
    }
    let mut out = Vec::new();
    for (other_col, other) in model.topics().ids().iter().enumerate() {
        if other_col == col || norm(model.topic_vector(other_col)) == 0.0 {
            continue;
        }
        out.push(Neighbour {
            cosine: cosine(model, topic, other)?,
            topic: other.clone(),
        });
    }
    out.sort_by(|a, b| by_score_then_name((&a.topic, a.cosine), (&b.topic, b.cosine)));
    out.truncate(n);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTopic {
    pub topic: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserReport {
    pub user: String,
    /// Known cells with non-negative value, strongest first.
    pub declared_pro: Vec<ScoredTopic>,
    pub declared_con: Vec<ScoredTopic>,
    /// Predictions for topics without a known cell, by sign.
    pub predicted_pro: Vec<ScoredTopic>,
    pub predicted_con: Vec<ScoredTopic>,
}

impl UserReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("section\ttopic\tscore\n");
        for (name, list) in [
            ("declared_pro", &self.declared_pro),
            ("declared_con", &self.declared_con),
            ("predicted_pro", &self.predicted_pro),
            ("predicted_con", &self.predicted_con),
        ] {
            for t in list {
                s.push_str(&format!("{name}\t{}\t{:.6}\n", t.topic, t.score));
            }
        }
        s
    }
}

fn rank_by_magnitude(list: &mut Vec<ScoredTopic>, top_n: usize) {
    list.sort_by(|a, b| by_score_then_name((&a.topic, a.score.abs()), (&b.topic, b.score.abs())));
    list.truncate(top_n);
}

/// Declared and predicted preferences of `user`. `r` supplies the known cells;
/// its topics must be known to the model. Each list keeps at most `top_n`
/// entries ranked by magnitude.
pub fn user_report(
    model: &FactorModel,
    r: &SparseMatrix,
    user: &str,
    top_n: usize,
) -> Result<UserReport, TopicSpaceError> {
    let row = model.user_row(user)?;
    let declared: Vec<(String, f64)> = match r.users().get(user) {
        Some(r_row) => r
            .row(r_row)
            .map(|(c, v)| (r.topics().id(c).to_string(), v))
            .collect(),
        None => Vec::new(),
    };
    let mut report = UserReport {
        user: user.to_string(),
        declared_pro: Vec::new(),
        declared_con: Vec::new(),
        predicted_pro: Vec::new(),
        predicted_con: Vec::new(),
    };
    for (topic, score) in &declared {
        model.topic_col(topic)?;
        let entry = ScoredTopic {
            topic: topic.clone(),
            score: *score,
        };
        match Polarity::of(*score) {
            Polarity::Pro => report.declared_pro.push(entry),
            Polarity::Con => report.declared_con.push(entry),
        }
    }
    for (col, topic) in model.topics().ids().iter().enumerate() {
        if declared.iter().any(|(t, _)| t == topic) {
            continue;
        }
        let score = model.predict_index(row, col);
        let entry = ScoredTopic {
            topic: topic.clone(),
            score,
        };
        match Polarity::of(score) {
            Polarity::Pro => report.predicted_pro.push(entry),
            Polarity::Con => report.predicted_con.push(entry),
        }
    }
    for list in [
        &mut report.declared_pro,
        &mut report.declared_con,
        &mut report.predicted_pro,
        &mut report.predicted_con,
    ] {
        rank_by_magnitude(list, top_n);
    }
    Ok(report)
}

/// A cosine interval `[low, high)`; a band reaching 1 also includes 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub low: f64,
    pub high: f64,
}

impl Band {
    pub fn new(low: f64, high: f64) -> Result<Self, TopicSpaceError> {
        let ok = low.is_finite() && high.is_finite() && low < high && low >= -1.0 && high <= 1.0;
        if !ok {
            return Err(TopicSpaceError::InvalidBand {
                spec: format!("{low}:{high}"),
                reason: "need -1 <= low < high <= 1".into(),
            });
        }
        Ok(Band { low, high })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && (x < self.high || (self.high >= 1.0 && x <= self.high))
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.high >= 1.0 {
            write!(f, "[{}, {}]", self.low, self.high)
        } else {
            write!(f, "[{}, {})", self.low, self.high)
        }
    }
}

/// Non-overlapping bands, sorted by lower bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Bands(Vec<Band>);

impl Bands {
    pub fn new(mut bands: Vec<Band>) -> Result<Self, TopicSpaceError> {
        if bands.is_empty() {
            return Err(TopicSpaceError::InvalidBand {
                spec: String::new(),
                reason: "no bands".into(),
            });
        }
        bands.sort_by(|a, b| a.low.total_cmp(&b.low));
        for w in bands.windows(2) {
            if w[1].low < w[0].high {
                return Err(TopicSpaceError::InvalidBand {
                    spec: format!("{} and {}", w[0], w[1]),
                    reason: "bands overlap".into(),
                });
            }
        }
        Ok(Bands(bands))
    }

    pub fn as_slice(&self) -> &[Band] {
        &self.0
    }

    pub fn locate(&self, x: f64) -> Option<usize> {
        self.0.iter().position(|b| b.contains(x))
    }
}

impl FromStr for Bands {
    type Err = TopicSpaceError;

    /// `low:high` pairs separated by commas, e.g. `-1:-0.6,-0.6:0.6,0.6:1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = |reason: &str| TopicSpaceError::InvalidBand {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let mut bands = Vec::new();
        for part in s.split(',') {
            let (lo, hi) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| invalid("expected low:high"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| invalid("bad lower bound"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| invalid("bad upper bound"))?;
            bands.push(Band::new(lo, hi)?);
        }
        Bands::new(bands)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPair {
    pub band: usize,
    pub topic_a: String,
    pub topic_b: String,
    pub cosine: f64,
}

/// Draws `per_band` distinct unordered topic pairs from each band, uniformly
/// without replacement. Topics with zero vectors never appear. Output is
/// grouped by band, in draw order within a band.
pub fn stratified_pair_sample(
    model: &FactorModel,
    bands: &Bands,
    per_band: usize,
    seed: u64,
) -> Result<Vec<SampledPair>, TopicSpaceError> {
    let ids = model.topics().ids();
    let norms: Vec<f64> = (0..ids.len())
        .map(|c| norm(model.topic_vector(c)))
        .collect();
    let mut buckets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); bands.as_slice().len()];
    for a in 0..ids.len() {
        if norms[a] == 0.0 {
            continue;
        }
        for b in a + 1..ids.len() {
            if norms[b] == 0.0 {
                continue;
            }
            let c = cosine(model, &ids[a], &ids[b])?;
            if let Some(i) = bands.locate(c) {
                buckets[i].push((a, b, c));
            }
        }
    }
    for (band, bucket) in bands.as_slice().iter().zip(&buckets) {
        if bucket.len() < per_band {
            return Err(TopicSpaceError::InsufficientPairs {
                band: *band,
                available: bucket.len(),
                requested: per_band,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_band * buckets.len());
    for (i, bucket) in buckets.iter().enumerate() {
        for j in rand::seq::index::sample(&mut rng, bucket.len(), per_band) {
            let (a, b, c) = bucket[j];
            out.push(SampledPair {
                band: i,
                topic_a: ids[a].clone(),
                topic_b: ids[b].clone(),
                cosine: c,
            });
        }
    }
    Ok(out)
}
