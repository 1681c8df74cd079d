//! Hold-out evaluation and rank statistics.
//!
//! Signs follow the crate-wide convention `sign(0) = +1`. The θ filter keeps
//! users with *more than* θ known cells in the training matrix.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::factorization::{FactorModel, LookupError};
use crate::matrix::{MatrixError, SparseMatrix};
use crate::topic_space::{self, TopicSpaceError};
use crate::Polarity;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid hold-out fraction {fraction} for {nnz} known cells: {reason}")]
    InvalidSplit {
        fraction: f64,
        nnz: usize,
        reason: &'static str,
    },
    #[error("no test cells left for theta = {theta}")]
    NoCells { theta: usize },
    #[error("no user with more than {theta} known cells")]
    NoUsers { theta: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("{0} input is constant; rank correlation undefined")]
    Constant(&'static str),
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error(transparent)]
    TopicSpace(#[from] TopicSpaceError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// A held-out known cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TestCell {
    pub user: String,
    pub topic: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    /// Remaining cells over the full original index maps.
    pub train: SparseMatrix,
    pub test: Vec<TestCell>,
    pub fraction: f64,
    pub seed: u64,
}

/// Holds out `round(fraction × nnz)` known cells chosen uniformly without
/// replacement. Test cells are listed in (row, col) order.
pub fn split(r: &SparseMatrix, fraction: f64, seed: u64) -> Result<HoldoutSplit, EvalError> {
    let nnz = r.nnz();
    let invalid = |reason| EvalError::InvalidSplit {
        fraction,
        nnz,
        reason,
    };
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(invalid("fraction must lie strictly between 0 and 1"));
    }
    let n_test = (fraction * nnz as f64).round() as usize;
    if n_test == 0 {
        return Err(invalid("test set would be empty"));
    }
    if n_test >= nnz {
        return Err(invalid("training set would be empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = rand::seq::index::sample(&mut rng, nnz, n_test)
        .into_iter()
        .collect();
    let mut train = Vec::with_capacity(nnz - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (i, (row, col, value)) in r.iter().enumerate() {
        if chosen.contains(&i) {
            test.push(TestCell {
                user: r.users().id(row).to_string(),
                topic: r.topics().id(col).to_string(),
                value,
            });
        } else {
            train.push((row, col, value));
        }
    }
    Ok(HoldoutSplit {
        train: r.with_cells(train)?,
        test,
        fraction,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub correct: usize,
    pub evaluated: usize,
    /// Distinct users among the evaluated cells.
    pub users: usize,
}

impl Accuracy {
    pub fn ratio(&self) -> f64 {
        self.correct as f64 / self.evaluated as f64
    }
}

/// Test cells whose user has more than `theta` known cells in `train`.
fn kept<'a>(test: &'a [TestCell], theta: usize, train: &SparseMatrix) -> Vec<&'a TestCell> {
    let counts = train.row_counts();
    test.iter()
        .filter(|c| {
            train
                .users()
                .get(&c.user)
                .is_some_and(|row| counts[row] > theta)
        })
        .collect()
}

fn score<'a>(
    cells: Vec<&'a TestCell>,
    theta: usize,
    mut predict: impl FnMut(&'a TestCell) -> Result<Polarity, EvalError>,
) -> Result<Accuracy, EvalError> {
    if cells.is_empty() {
        return Err(EvalError::NoCells { theta });
    }
    let mut correct = 0;
    let mut users = BTreeSet::new();
    for c in &cells {
        if predict(c)? == Polarity::of(c.value) {
            correct += 1;
        }
        users.insert(c.user.as_str());
    }
    Ok(Accuracy {
        correct,
        evaluated: cells.len(),
        users: users.len(),
    })
}

/// Fraction of kept test cells whose predicted sign matches the reference.
pub fn sign_accuracy(
    model: &FactorModel,
    test: &[TestCell],
    theta: usize,
    train: &SparseMatrix,
) -> Result<Accuracy, EvalError> {
    score(kept(test, theta, train), theta, |c| {
        Ok(Polarity::of(model.predict(&c.user, &c.topic)?))
    })
}

/// Per-topic majority sign over the training cells; zero-valued cells count
/// as positive, ties and unseen topics predict pro.
pub fn majority_signs(train: &SparseMatrix) -> Vec<Polarity> {
    let mut balance = vec![(0usize, 0usize); train.n_topics()];
    for (_, col, v) in train.iter() {
        match Polarity::of(v) {
            Polarity::Pro => balance[col].0 += 1,
            Polarity::Con => balance[col].1 += 1,
        }
    }
    balance
        .into_iter()
        .map(|(pos, neg)| {
            if pos >= neg {
                Polarity::Pro
            } else {
                Polarity::Con
            }
        })
        .collect()
}

pub fn majority_baseline(
    train: &SparseMatrix,
    test: &[TestCell],
    theta: usize,
) -> Result<Accuracy, EvalError> {
    let signs = majority_signs(train);
    score(kept(test, theta, train), theta, |c| {
        Ok(train
            .topics()
            .get(&c.topic)
            .map_or(Polarity::Pro, |col| signs[col]))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub theta: usize,
    /// `None` when no test cell survives the filter.
    pub result: Option<ThresholdResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub model_accuracy: f64,
    pub baseline_accuracy: f64,
    pub users_evaluated: usize,
    pub cells_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdReport {
    /// Tab-separated rows; absent rows carry `NA`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(
            "theta\tmodel_accuracy\tbaseline_accuracy\tusers_evaluated\tcells_evaluated\n",
        );
        for row in &self.rows {
            match row.result {
                Some(r) => writeln!(
                    s,
                    "{}\t{:.6}\t{:.6}\t{}\t{}",
                    row.theta,
                    r.model_accuracy,
                    r.baseline_accuracy,
                    r.users_evaluated,
                    r.cells_evaluated
                ),
                None => writeln!(s, "{}\tNA\tNA\t0\t0", row.theta),
            }
            .expect("writing to a String");
        }
        s
    }
}

/// One row per θ (sorted ascending, deduplicated).
pub fn threshold_sweep(
    model: &FactorModel,
    split: &HoldoutSplit,
    thetas: &[usize],
) -> Result<ThresholdReport, EvalError> {
    let mut thetas = thetas.to_vec();
    thetas.sort_unstable();
    thetas.dedup();
    let mut rows = Vec::with_capacity(thetas.len());
    for theta in thetas {
        let result = match sign_accuracy(model, &split.test, theta, &split.train) {
            Ok(m) => {
                let b = majority_baseline(&split.train, &split.test, theta)?;
                Some(ThresholdResult {
                    model_accuracy: m.ratio(),
                    baseline_accuracy: b.ratio(),
                    users_evaluated: m.users,
                    cells_evaluated: m.evaluated,
                })
            }
            Err(EvalError::NoCells { .. }) => None,
            Err(e) => return Err(e),
        };
        rows.push(ThresholdRow { theta, result });
    }
    Ok(ThresholdReport { rows })
}

/// Mean over users with more than θ known cells of the population variance
/// of their cell values.
pub fn mean_variance(r: &SparseMatrix, theta: usize) -> Result<f64, EvalError> {
    let mut total = 0.0;
    let mut users = 0usize;
    for row in 0..r.n_users() {
        let values: Vec<f64> = r.row(row).map(|(_, v)| v).collect();
        if values.len() <= theta {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        total += values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        users += 1;
    }
    if users == 0 {
        return Err(EvalError::NoUsers { theta });
    }
    Ok(total / users as f64)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && xs[order[j]] == xs[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean(i+1 ..= j)
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooShort(xs.len()));
    }
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) {
        return Err(EvalError::Constant("first"));
    }
    if constant(ys) {
        return Err(EvalError::Constant("second"));
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// A mean human judgement for a topic pair, in `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Judgement {
    pub topic_a: String,
    pub topic_b: String,
    pub score: f64,
}

/// Reads `topic_a<TAB>topic_b<TAB>mean_score` rows.
pub fn read_judgements(path: impl AsRef<Path>) -> Result<Vec<Judgement>, EvalError> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| EvalError::Io {
        path: display.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: display.clone(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let parse = || -> Option<Judgement> {
            let mut f = line.split('\t');
            let (a, b, s) = (f.next()?, f.next()?, f.next()?);
            let score: f64 = s.trim().parse().ok()?;
            ((-1.0..=1.0).contains(&score) && f.next().is_none()).then(|| Judgement {
                topic_a: a.to_string(),
                topic_b: b.to_string(),
                score,
            })
        };
        out.push(parse().ok_or_else(|| EvalError::Parse {
            path: display.clone(),
            line: i + 1,
            message: format!("expected topic_a<TAB>topic_b<TAB>score in [-1, 1], got {line:?}"),
        })?);
    }
    Ok(out)
}

/// Spearman's ρ between topic-vector cosines and mean judgements.
pub fn judgement_correlation(
    model: &FactorModel,
    judgements: &[Judgement],
) -> Result<f64, EvalError> {
    let mut cosines = Vec::with_capacity(judgements.len());
    for j in judgements {
        cosines.push(topic_space::cosine(model, &j.topic_a, &j.topic_b)?);
    }
    let scores: Vec<f64> = judgements.iter().map(|j| j.score).collect();
    spearman(&cosines, &scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::IndexMap;
    use proptest::prelude::*;

    fn ids(prefix: &str, n: usize) -> IndexMap {
        IndexMap::from_ids((0..n).map(|i| format!("{prefix}{i}")).collect()).unwrap()
    }

    fn dense(n_users: usize, n_topics: usize) -> SparseMatrix {
        let cells = (0..n_users).flat_map(|u| {
            (0..n_topics).map(move |t| (u, t, if (u + t) % 3 == 0 { -1.0 } else { 0.5 }))
        });
        SparseMatrix::from_cells(ids("u", n_users), ids("t", n_topics), cells).unwrap()
    }

    fn cell(u: &str, t: &str, v: f64) -> TestCell {
        TestCell {
            user: u.into(),
            topic: t.into(),
            value: v,
        }
    }

    #[test]
    fn five_percent_of_hundred() {
        let r = dense(10, 10);
        let s = split(&r, 0.05, 1).unwrap();
        assert_eq!(s.test.len(), 5);
        assert_eq!(s.train.nnz(), 95);
        assert_eq!(s.train.users(), r.users());
    }

    #[test]
    fn split_is_seeded() {
        let r = dense(10, 10);
        assert_eq!(split(&r, 0.2, 4).unwrap(), split(&r, 0.2, 4).unwrap());
        assert_ne!(
            split(&r, 0.2, 4).unwrap().test,
            split(&r, 0.2, 5).unwrap().test
        );
    }

    #[test]
    fn smallest_legal_split() {
        let r = dense(1, 2);
        let s = split(&r, 0.5, 0).unwrap();
        assert_eq!((s.train.nnz(), s.test.len()), (1, 1));
    }

    #[test]
    fn degenerate_fractions_rejected() {
        let r = dense(2, 2);
        for f in [0.0, 1.0, 0.01, 0.99, f64::NAN] {
            assert!(
                matches!(split(&r, f, 0), Err(EvalError::InvalidSplit { .. })),
                "{f}"
            );
        }
    }

    proptest! {
        #[test]
        fn split_partitions_cells(fraction in 0.05f64..0.95, seed in any::<u64>()) {
            let r = dense(6, 7);
            let s = split(&r, fraction, seed).unwrap();
            let mut all: Vec<(String, String, u64)> = s
                .train
                .iter()
                .map(|(u, t, v)| (r.users().id(u).to_string(), r.topics().id(t).to_string(), v.to_bits()))
                .chain(s.test.iter().map(|c| (c.user.clone(), c.topic.clone(), c.value.to_bits())))
                .collect();
            all.sort();
            let mut orig: Vec<_> = r
                .iter()
                .map(|(u, t, v)| (r.users().id(u).to_string(), r.topics().id(t).to_string(), v.to_bits()))
                .collect();
            orig.sort();
            prop_assert_eq!(all, orig);
            prop_assert_eq!(s.test.len(), (fraction * 42.0).round() as usize);
        }

        #[test]
        fn spearman_invariant_under_monotone_maps(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..30),
            seed in any::<u64>(),
        ) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| (x * 0.3 + ((i as u64 ^ seed) % 7) as f64).sin()).collect();
            prop_assume!(spearman(&xs, &ys).is_ok());
            let base = spearman(&xs, &ys).unwrap();
            let fx: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0).collect();
            let gy: Vec<f64> = ys.iter().map(|y| y.exp()).collect();
            prop_assert!((spearman(&fx, &gy).unwrap() - base).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn sweep_shrinks_with_theta(
            mask in proptest::collection::vec(any::<bool>(), 48),
            factors in proptest::collection::vec(-1.0f64..1.0, 28),
            seed in any::<u64>(),
        ) {
            // 8 users x 6 topics with a random sparsity pattern, k = 2
            let cells = (0..48).filter(|i| mask[*i]).map(|i| (i / 6, i % 6, factors[i % 28]));
            let r = SparseMatrix::from_cells(ids("u", 8), ids("t", 6), cells).unwrap();
            prop_assume!(r.nnz() >= 4);
            let model = FactorModel::from_parts(2, ids("u", 8), ids("t", 6), factors[..16].to_vec(), factors[16..].to_vec()).unwrap();
            let s = split(&r, 0.3, seed).unwrap();
            let report = threshold_sweep(&model, &s, &[0, 1, 2, 3, 4, 6]).unwrap();
            let counts: Vec<(usize, usize)> = report
                .rows
                .iter()
                .map(|row| row.result.map_or((0, 0), |x| (x.users_evaluated, x.cells_evaluated)))
                .collect();
            for w in counts.windows(2) {
                prop_assert!(w[1].0 <= w[0].0 && w[1].1 <= w[0].1, "{:?}", counts);
            }
            for x in report.rows.iter().filter_map(|row| row.result) {
                prop_assert!((0.0..=1.0).contains(&x.model_accuracy));
                prop_assert!((0.0..=1.0).contains(&x.baseline_accuracy));
            }
        }
    }

    fn toy_model() -> FactorModel {
        // users u0..u2, topics t0..t1, k = 1
        FactorModel::from_parts(
            1,
            ids("u", 3),
            ids("t", 2),
            vec![1.0, -1.0, 0.0],
            vec![0.5, -2.0],
        )
        .unwrap()
    }

    fn toy_train() -> SparseMatrix {
        // u0: 2 cells, u1: 1 cell, u2: none
        SparseMatrix::from_cells(
            ids("u", 3),
            ids("t", 2),
            [(0, 0, 1.0), (0, 1, -1.0), (1, 0, -0.5)],
        )
        .unwrap()
    }

    #[test]
    fn accuracy_counts_and_threshold() {
        let test = vec![
            cell("u0", "t0", 1.0),  // pred 0.5  ok
            cell("u0", "t1", 1.0),  // pred -2   wrong
            cell("u1", "t1", 1.0),  // pred 2    ok
            cell("u2", "t0", -1.0), // no train cells: never kept
        ];
        let a = sign_accuracy(&toy_model(), &test, 0, &toy_train()).unwrap();
        assert_eq!((a.correct, a.evaluated, a.users), (2, 3, 2));
        let a = sign_accuracy(&toy_model(), &test, 1, &toy_train()).unwrap();
        assert_eq!((a.correct, a.evaluated), (1, 2));
        match sign_accuracy(&toy_model(), &test, 2, &toy_train()) {
            Err(EvalError::NoCells { theta }) => assert_eq!(theta, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_predictions_count_as_positive() {
        let m = FactorModel::from_parts(1, ids("u", 1), ids("t", 2), vec![0.0], vec![1.0, 1.0])
            .unwrap();
        let train = SparseMatrix::from_cells(ids("u", 1), ids("t", 2), [(0, 0, 1.0)]).unwrap();
        let test = vec![cell("u0", "t1", 0.5), cell("u0", "t0", 0.0)];
        let a = sign_accuracy(&m, &test, 0, &train).unwrap();
        assert_eq!(a.ratio(), 1.0);
    }

    #[test]
    fn majority_baseline_examples() {
        // t0 train values (1, 1, −1) -> pro; t1 (−1, −1, 0) -> con; t2 unseen -> pro
        let train = SparseMatrix::from_cells(
            ids("u", 4),
            ids("t", 3),
            [
                (0, 0, 1.0),
                (1, 0, 1.0),
                (2, 0, -1.0),
                (0, 1, -1.0),
                (1, 1, -1.0),
                (2, 1, 0.0),
                (3, 0, 0.2),
            ],
        )
        .unwrap();
        assert_eq!(
            majority_signs(&train),
            vec![Polarity::Pro, Polarity::Con, Polarity::Pro]
        );
        let test = vec![
            cell("u3", "t1", -0.5), // con: ok
            cell("u3", "t2", -1.0), // pro: wrong
            cell("u2", "t2", 1.0),  // pro: ok
            cell("u0", "t1", 0.4),  // con: wrong
        ];
        let b = majority_baseline(&train, &test, 0).unwrap();
        assert_eq!((b.correct, b.evaluated), (2, 4));
        let b = majority_baseline(&train, &test, 1).unwrap();
        // u3 has a single train cell and drops out
        assert_eq!((b.correct, b.evaluated), (1, 2));
    }

    #[test]
    fn sweep_marks_empty_rows_absent() {
        let s = HoldoutSplit {
            train: toy_train(),
            test: vec![cell("u0", "t0", 1.0), cell("u1", "t1", 1.0)],
            fraction: 0.5,
            seed: 0,
        };
        let report = threshold_sweep(&toy_model(), &s, &[5, 0, 1]).unwrap();
        let thetas: Vec<_> = report.rows.iter().map(|r| r.theta).collect();
        assert_eq!(thetas, [0, 1, 5]);
        let r0 = report.rows[0].result.unwrap();
        assert_eq!((r0.cells_evaluated, r0.users_evaluated), (2, 2));
        assert_eq!(report.rows[1].result.unwrap().users_evaluated, 1);
        assert!(report.rows[2].result.is_none());
        assert!(report.to_tsv().contains("5\tNA\tNA\t0\t0\n"));
    }

    #[test]
    fn mean_variance_examples() {
        let same = SparseMatrix::from_cells(
            ids("u", 2),
            ids("t", 2),
            [(0, 0, 0.5), (0, 1, 0.5), (1, 0, -1.0)],
        )
        .unwrap();
        assert_eq!(mean_variance(&same, 0).unwrap(), 0.0);
        let two = SparseMatrix::from_cells(ids("u", 1), ids("t", 2), [(0, 0, 1.0), (0, 1, -1.0)])
            .unwrap();
        assert_eq!(mean_variance(&two, 1).unwrap(), 1.0);
        assert!(matches!(
            mean_variance(&two, 2),
            Err(EvalError::NoUsers { theta: 2 })
        ));

        // u0 (1, 0, −1): var 2/3; u1 (0.5, 0.5): 0; u2 (1): 0
        // θ = 0 -> (2/3 + 0 + 0) / 3 = 2/9; θ = 1 -> (2/3 + 0) / 2 = 1/3
        let three = SparseMatrix::from_cells(
            ids("u", 3),
            ids("t", 3),
            [
                (0, 0, 1.0),
                (0, 1, 0.0),
                (0, 2, -1.0),
                (1, 0, 0.5),
                (1, 2, 0.5),
                (2, 1, 1.0),
            ],
        )
        .unwrap();
        assert!((mean_variance(&three, 0).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!((mean_variance(&three, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((mean_variance(&three, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&xs, &[2.0, 4.0, 6.0, 8.0, 10.0]).unwrap(), 1.0);
        assert_eq!(spearman(&xs, &[5.0, 4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // d = (1, −1, 1, −1, 0), Σd² = 4: 1 − 6·4 / (5·24) = 0.8
        let rho = spearman(&xs, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((rho - 0.8).abs() < 1e-12, "{rho}");
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(EvalError::LengthMismatch(2, 1))
        ));
        assert!(matches!(
            spearman(&[1.0], &[1.0]),
            Err(EvalError::TooShort(1))
        ));
        assert!(matches!(
            spearman(&[1.0, 1.0], &[1.0, 2.0]),
            Err(EvalError::Constant("first"))
        ));
        assert!(matches!(
            spearman(&[1.0, 2.0], &[3.0, 3.0]),
            Err(EvalError::Constant("second"))
        ));
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 30.0, 20.0]),
            vec![1.5, 3.5, 1.5, 5.0, 3.5]
        );
    }

    #[test]
    fn judgement_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.tsv");
        std::fs::write(&path, "a\tb\t0.5\nc\td\t-1\n").unwrap();
        let js = read_judgements(&path).unwrap();
        assert_eq!(js.len(), 2);
        assert_eq!(js[1].score, -1.0);
        std::fs::write(&path, "a\tb\t1.5\n").unwrap();
        assert!(matches!(
            read_judgements(&path),
            Err(EvalError::Parse { line: 1, .. })
        ));
    }
}
