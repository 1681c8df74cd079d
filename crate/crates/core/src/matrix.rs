//! Sparse user × topic preference matrix with an explicit known-cell set.
//!
//! On disk a matrix is a directory of three UTF-8 files:
//!
//! - `matrix.tsv`: header `users <n> topics <m> nnz <k>`, then one
//!   `row<TAB>col<TAB>value` line per known cell
//! - `users.tsv`, `topics.tsv`: `ordinal<TAB>id` per line, ordinals `0..n`

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const MATRIX_FILE: &str = "matrix.tsv";
pub const USERS_FILE: &str = "users.tsv";
pub const TOPICS_FILE: &str = "topics.tsv";

#[derive(Debug, thiserror::Error)]
pub enum MatrixError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate id {0:?} in index map")]
    DuplicateId(String),
    #[error("cell ({row}, {col}) outside {rows}×{cols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("cell ({row}, {col}) value {value} outside [-1, 1]")]
    ValueOutOfRange { row: usize, col: usize, value: f64 },
    #[error("duplicate cell ({row}, {col})")]
    DuplicateCell { row: usize, col: usize },
    #[error("no preference counts to build a matrix from")]
    Empty,
}

/// Bijective id ↔ ordinal map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IndexMap {
    pub fn from_ids(ids: Vec<String>) -> Result<Self, MatrixError> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(MatrixError::DuplicateId(id.clone()));
            }
        }
        Ok(IndexMap { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, ordinal: usize) -> &str {
        &self.ids[ordinal]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    users: IndexMap,
    topics: IndexMap,
    cells: BTreeMap<(usize, usize), f64>,
}

impl SparseMatrix {
    /// An empty matrix over the given index maps.
    pub fn new(users: IndexMap, topics: IndexMap) -> Self {
        SparseMatrix {
            users,
            topics,
            cells: BTreeMap::new(),
        }
    }

    pub fn from_cells(
        users: IndexMap,
        topics: IndexMap,
        cells: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        let mut m = SparseMatrix::new(users, topics);
        for (row, col, value) in cells {
            m.insert(row, col, value)?;
        }
        Ok(m)
    }

    /// Same index maps, different cells.
    pub fn with_cells(
        &self,
        cells: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, MatrixError> {
        SparseMatrix::from_cells(self.users.clone(), self.topics.clone(), cells)
    }

    pub fn insert(&mut self, row: usize, col: usize, value: f64) -> Result<(), MatrixError> {
        if row >= self.users.len() || col >= self.topics.len() {
            return Err(MatrixError::OutOfBounds {
                row,
                col,
                rows: self.users.len(),
                cols: self.topics.len(),
            });
        }
        if !(-1.0..=1.0).contains(&value) {
            return Err(MatrixError::ValueOutOfRange { row, col, value });
        }
        if self.cells.insert((row, col), value).is_some() {
            return Err(MatrixError::DuplicateCell { row, col });
        }
        Ok(())
    }

    pub fn users(&self) -> &IndexMap {
        &self.users
    }

    pub fn topics(&self) -> &IndexMap {
        &self.topics
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_topics(&self) -> usize {
        self.topics.len()
    }

    /// Number of known cells.
    pub fn nnz(&self) -> usize {
        self.cells.len()
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells.get(&(row, col)).copied()
    }

    pub fn get_by_id(&self, user: &str, topic: &str) -> Option<f64> {
        self.get(self.users.get(user)?, self.topics.get(topic)?)
    }

    /// Known cells in (row, col) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.cells.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    /// Known cells of one row, in column order.
    pub fn row(&self, row: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.cells
            .range((row, 0)..(row + 1, 0))
            .map(|(&(_, c), &v)| (c, v))
    }

    /// Number of known cells per row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users()];
        for &(r, _) in self.cells.keys() {
            counts[r] += 1;
        }
        counts
    }

    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), MatrixError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| MatrixError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        write_with(&dir.join(MATRIX_FILE), |out| {
            writeln!(
                out,
                "users {} topics {} nnz {}",
                self.n_users(),
                self.n_topics(),
                self.nnz()
            )?;
            for (r, c, v) in self.iter() {
                writeln!(out, "{r}\t{c}\t{v}")?;
            }
            Ok(())
        })?;
        write_index(&dir.join(USERS_FILE), &self.users)?;
        write_index(&dir.join(TOPICS_FILE), &self.topics)
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self, MatrixError> {
        let dir = dir.as_ref();
        let users = read_index(&dir.join(USERS_FILE))?;
        let topics = read_index(&dir.join(TOPICS_FILE))?;
        let path = dir.join(MATRIX_FILE);
        let lines = read_lines(&path)?;
        let fmt = |line: usize, message: String| MatrixError::Format {
            path: path.clone(),
            line,
            message,
        };
        let header = lines
            .first()
            .ok_or_else(|| fmt(1, "missing header".into()))?;
        let (n_users, n_topics, nnz) =
            parse_header(header).ok_or_else(|| fmt(1, format!("bad header {header:?}")))?;
        if n_users != users.len() || n_topics != topics.len() {
            return Err(fmt(
                1,
                format!(
                    "header says {n_users}×{n_topics} but index files hold {}×{}",
                    users.len(),
                    topics.len()
                ),
            ));
        }
        let mut m = SparseMatrix::new(users, topics);
        for (i, line) in lines.iter().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = (|| {
                let mut f = line.split('\t');
                let r = f.next()?.parse().ok()?;
                let c = f.next()?.parse().ok()?;
                let v = f.next()?.parse().ok()?;
                f.next().is_none().then_some((r, c, v))
            })();
            let (r, c, v) = parsed.ok_or_else(|| fmt(i + 1, format!("bad cell line {line:?}")))?;
            m.insert(r, c, v).map_err(|e| fmt(i + 1, e.to_string()))?;
        }
        if m.nnz() != nnz {
            return Err(fmt(
                1,
                format!("header nnz {nnz} but {} cells present", m.nnz()),
            ));
        }
        Ok(m)
    }
}

fn parse_header(line: &str) -> Option<(usize, usize, usize)> {
    let f: Vec<&str> = line.split_whitespace().collect();
    match f.as_slice() {
        ["users", u, "topics", t, "nnz", k] => {
            Some((u.parse().ok()?, t.parse().ok()?, k.parse().ok()?))
        }
        _ => None,
    }
}

fn write_with(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
) -> Result<(), MatrixError> {
    let io = |source| MatrixError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    body(&mut out).and_then(|_| out.flush()).map_err(io)
}

fn write_index(path: &Path, map: &IndexMap) -> Result<(), MatrixError> {
    write_with(path, |out| {
        for (i, id) in map.ids().iter().enumerate() {
            writeln!(out, "{i}\t{id}")?;
        }
        Ok(())
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>, MatrixError> {
    let io = |source| MatrixError::Io {
        path: path.to_path_buf(),
        source,
    };
    BufReader::new(File::open(path).map_err(io)?)
        .lines()
        .map(|l| l.map(|s| s.trim_end_matches('\r').to_string()))
        .collect::<io::Result<_>>()
        .map_err(io)
}

fn read_index(path: &Path) -> Result<IndexMap, MatrixError> {
    let mut ids = Vec::new();
    for (i, line) in read_lines(path)?.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let bad = || MatrixError::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected {}<TAB>id", ids.len()),
        };
        let (ord, id) = line.split_once('\t').ok_or_else(bad)?;
        if ord.parse::<usize>().ok() != Some(ids.len()) {
            return Err(bad());
        }
        ids.push(id.to_string());
    }
    IndexMap::from_ids(ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> IndexMap {
        IndexMap::from_ids(xs.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn sample() -> SparseMatrix {
        SparseMatrix::from_cells(
            ids(&["u0", "u1", "u2"]),
            ids(&["a", "b"]),
            [(0, 0, 1.0), (0, 1, -0.5), (2, 1, 1.0 / 3.0)],
        )
        .unwrap()
    }

    #[test]
    fn rejects_invalid_cells() {
        let mut m = sample();
        assert!(matches!(
            m.insert(3, 0, 0.0),
            Err(MatrixError::OutOfBounds { .. })
        ));
        assert!(matches!(
            m.insert(1, 0, 1.5),
            Err(MatrixError::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            m.insert(1, 0, f64::NAN),
            Err(MatrixError::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            m.insert(0, 0, 0.0),
            Err(MatrixError::DuplicateCell { .. })
        ));
        assert!(IndexMap::from_ids(vec!["x".into(), "x".into()]).is_err());
    }

    #[test]
    fn rows_and_counts() {
        let m = sample();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row_counts(), vec![2, 0, 1]);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 1.0), (1, -0.5)]);
        assert_eq!(m.row(1).count(), 0);
        assert_eq!(m.get_by_id("u2", "b"), Some(1.0 / 3.0));
        assert_eq!(m.get_by_id("u1", "b"), None);
    }

    #[test]
    fn dir_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        m.write_dir(dir.path()).unwrap();
        let back = SparseMatrix::read_dir(dir.path()).unwrap();
        assert_eq!(back, m);
        let header = fs::read_to_string(dir.path().join(MATRIX_FILE)).unwrap();
        assert!(header.starts_with("users 3 topics 2 nnz 3\n"));
    }

    #[test]
    fn corrupted_dir_rejected() {
        let dir = tempfile::tempdir().unwrap();
        sample().write_dir(dir.path()).unwrap();
        let path = dir.path().join(MATRIX_FILE);
        let body = fs::read_to_string(&path).unwrap();
        fs::write(&path, body.replace("nnz 3", "nnz 4")).unwrap();
        assert!(matches!(
            SparseMatrix::read_dir(dir.path()),
            Err(MatrixError::Format { .. })
        ));
        fs::write(&path, body.replace("-0.5", "-7")).unwrap();
        assert!(matches!(
            SparseMatrix::read_dir(dir.path()),
            Err(MatrixError::Format { line: 3, .. })
        ));
        assert!(matches!(
            SparseMatrix::read_dir(dir.path().join("missing")),
            Err(MatrixError::Io { .. })
        ));
    }
}
