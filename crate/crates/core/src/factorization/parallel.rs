//! Block-partitioned parallel epochs.
//!
//! Users and topics are cut into `w` contiguous ranges, giving a `w × w`
//! grid of cell buckets. An epoch runs `w` strata; in stratum `s` worker `i`
//! owns user block `i` and topic block `(i + s) mod w`, so concurrent
//! workers never touch the same user or topic vector.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{sgd_step, Cell, TrainConfig};

pub(crate) struct BlockGrid {
    workers: usize,
    user_bounds: Vec<usize>,
    topic_bounds: Vec<usize>,
    buckets: Vec<Vec<Cell>>,
}

fn bounds(n: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * n / parts).collect()
}

fn block_of(bounds: &[usize], x: usize) -> usize {
    bounds.partition_point(|&b| b <= x) - 1
}

/// Splits a column-major factor matrix into the given column ranges.
fn split_columns<'a>(mut data: &'a mut [f64], bounds: &[usize], k: usize) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(bounds.len() - 1);
    for w in bounds.windows(2) {
        let (head, tail) = std::mem::take(&mut data).split_at_mut((w[1] - w[0]) * k);
        out.push(head);
        data = tail;
    }
    out
}

impl BlockGrid {
    pub fn new(cells: &[Cell], n_users: usize, n_topics: usize, workers: usize) -> Self {
        let user_bounds = bounds(n_users, workers);
        let topic_bounds = bounds(n_topics, workers);
        let mut buckets = vec![Vec::new(); workers * workers];
        for c in cells {
            let b = block_of(&user_bounds, c.row) * workers + block_of(&topic_bounds, c.col);
            buckets[b].push(*c);
        }
        BlockGrid {
            workers,
            user_bounds,
            topic_bounds,
            buckets,
        }
    }

    pub fn shuffle<R: Rng>(&mut self, rng: &mut R) {
        for b in &mut self.buckets {
            b.shuffle(rng);
        }
    }

    pub fn run_epoch(&self, p: &mut [f64], q: &mut [f64], k: usize, cfg: &TrainConfig) {
        let w = self.workers;
        for stratum in 0..w {
            let p_blocks = split_columns(p, &self.user_bounds, k);
            let mut q_blocks: Vec<Option<&mut [f64]>> = split_columns(q, &self.topic_bounds, k)
                .into_iter()
                .map(Some)
                .collect();
            std::thread::scope(|scope| {
                for (ub, p_block) in p_blocks.into_iter().enumerate() {
                    let tb = (ub + stratum) % w;
                    let q_block = q_blocks[tb]
                        .take()
                        .expect("each topic block used once per stratum");
                    let bucket = &self.buckets[ub * w + tb];
                    if bucket.is_empty() {
                        continue;
                    }
                    let (u0, t0) = (self.user_bounds[ub], self.topic_bounds[tb]);
                    scope.spawn(move || {
                        for c in bucket {
                            let pu = &mut p_block[(c.row - u0) * k..(c.row - u0 + 1) * k];
                            let qt = &mut q_block[(c.col - t0) * k..(c.col - t0 + 1) * k];
                            sgd_step(
                                pu,
                                qt,
                                c.value,
                                cfg.learning_rate,
                                cfg.lambda_p,
                                cfg.lambda_q,
                            );
                        }
                    });
                }
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::factorize;
    use crate::matrix::{IndexMap, SparseMatrix};

    #[test]
    fn block_lookup() {
        let b = bounds(10, 3);
        assert_eq!(b, vec![0, 3, 6, 10]);
        assert_eq!(block_of(&b, 0), 0);
        assert_eq!(block_of(&b, 5), 1);
        assert_eq!(block_of(&b, 9), 2);
        // more workers than columns: some blocks are empty
        let b = bounds(2, 4);
        assert_eq!(b, vec![0, 0, 1, 1, 2]);
        assert_eq!(block_of(&b, 0), 1);
        assert_eq!(block_of(&b, 1), 3);
    }

    #[test]
    fn every_cell_lands_in_one_bucket() {
        let cells: Vec<Cell> = (0..7)
            .flat_map(|r| {
                (0..5).map(move |c| Cell {
                    row: r,
                    col: c,
                    value: 0.0,
                })
            })
            .collect();
        let grid = BlockGrid::new(&cells, 7, 5, 3);
        assert_eq!(grid.buckets.iter().map(Vec::len).sum::<usize>(), 35);
    }

    #[test]
    fn parallel_training_converges() {
        let ids = |p: &str, n: usize| {
            IndexMap::from_ids((0..n).map(|i| format!("{p}{i}")).collect()).unwrap()
        };
        let a: Vec<f64> = (0..12).map(|i| ((i as f64) * 0.37).sin()).collect();
        let b: Vec<f64> = (0..9).map(|i| ((i as f64) * 0.71).cos()).collect();
        let cells = (0..12).flat_map(|u| {
            let a = a.clone();
            let b = b.clone();
            (0..9).map(move |t| (u, t, a[u] * b[t]))
        });
        let r = SparseMatrix::from_cells(ids("u", 12), ids("t", 9), cells).unwrap();
        let cfg = TrainConfig {
            k: 2,
            lambda_p: 0.0,
            lambda_q: 0.0,
            learning_rate: 0.1,
            epochs: 300,
            seed: 3,
            workers: 3,
        };
        let fit = factorize(&r, &cfg).unwrap();
        assert!(
            *fit.rmse_trace.last().unwrap() < 1e-2,
            "{:?}",
            fit.rmse_trace.last()
        );
        let again = factorize(&r, &cfg).unwrap();
        assert_eq!(fit.model, again.model);
    }
}
