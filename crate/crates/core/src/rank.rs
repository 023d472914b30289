//! Exact rank of integer incidence matrices.
//!
//! Elimination runs over GF(p) with the Mersenne prime p = 2^61 - 1. The
//! homology of the domains handled here is torsion free, so the rank over
//! GF(p) equals the rank over the rationals. Singleton rows and columns are
//! pivoted first (these pivots are elementary collapses and create no fill);
//! the remainder is eliminated with a Markowitz-style pivot choice.

use std::collections::VecDeque;

use crate::sparse::Incidence;

const P: u64 = (1 << 61) - 1;

fn reduce(v: i64) -> u64 {
    v.rem_euclid(P as i64) as u64
}

fn mul(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % P as u128) as u64
}

fn sub_mod(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + P - b
    }
}

fn inv(a: u64) -> u64 {
    let mut result = 1u64;
    let mut base = a;
    let mut e = P - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = mul(result, base);
        }
        base = mul(base, base);
        e >>= 1;
    }
    result
}

type Row = Vec<(usize, u64)>;

struct Eliminator {
    rows: Vec<Row>,
    active: Vec<bool>,
    col_rows: Vec<Vec<usize>>,
    col_count: Vec<usize>,
    queue: VecDeque<Job>,
    rank: usize,
}

#[derive(Clone, Copy)]
enum Job {
    Col(usize),
    Row(usize),
}

impl Eliminator {
    fn new(m: &Incidence) -> Self {
        let mut rows = Vec::with_capacity(m.nrows());
        let mut col_rows = vec![Vec::new(); m.ncols()];
        let mut col_count = vec![0usize; m.ncols()];
        for r in 0..m.nrows() {
            let (cols, vals) = m.row(r);
            let row: Row = cols
                .iter()
                .zip(vals)
                .filter(|(_, v)| **v != 0)
                .map(|(&c, &v)| (c, reduce(v as i64)))
                .collect();
            for &(c, _) in &row {
                col_rows[c].push(r);
                col_count[c] += 1;
            }
            rows.push(row);
        }
        let active = rows.iter().map(|r| !r.is_empty()).collect();
        let mut queue = VecDeque::new();
        for (c, &n) in col_count.iter().enumerate() {
            if n == 1 {
                queue.push_back(Job::Col(c));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() == 1 {
                queue.push_back(Job::Row(r));
            }
        }
        Self {
            rows,
            active,
            col_rows,
            col_count,
            queue,
            rank: 0,
        }
    }

    fn contains(&self, r: usize, c: usize) -> Option<u64> {
        let row = &self.rows[r];
        row.binary_search_by_key(&c, |e| e.0).ok().map(|k| row[k].1)
    }

    fn rows_with(&self, c: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.col_rows[c]
            .iter()
            .copied()
            .filter(|&r| self.active[r] && self.contains(r, c).is_some())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn retire_row(&mut self, r: usize) {
        self.active[r] = false;
        let row = std::mem::take(&mut self.rows[r]);
        for (c, _) in row {
            self.col_count[c] -= 1;
            if self.col_count[c] == 1 {
                self.queue.push_back(Job::Col(c));
            }
        }
    }

    /// Eliminates column `c` from every other active row using pivot row `p`.
    fn pivot(&mut self, p: usize, c: usize) {
        self.rank += 1;
        let pivot_row = self.rows[p].clone();
        let pv = self.contains(p, c).expect("pivot entry present");
        let pinv = inv(pv);
        for r in self.rows_with(c) {
            if r == p {
                continue;
            }
            let factor = mul(self.contains(r, c).unwrap(), pinv);
            let old = std::mem::take(&mut self.rows[r]);
            let mut merged: Row = Vec::with_capacity(old.len() + pivot_row.len());
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < pivot_row.len() {
                let take_old = j == pivot_row.len() || (i < old.len() && old[i].0 < pivot_row[j].0);
                let take_piv = i == old.len() || (j < pivot_row.len() && pivot_row[j].0 < old[i].0);
                if take_old {
                    merged.push(old[i]);
                    i += 1;
                } else if take_piv {
                    let (col, v) = pivot_row[j];
                    merged.push((col, sub_mod(0, mul(factor, v))));
                    self.col_count[col] += 1;
                    self.col_rows[col].push(r);
                    j += 1;
                } else {
                    let col = old[i].0;
                    let v = sub_mod(old[i].1, mul(factor, pivot_row[j].1));
                    if v != 0 {
                        merged.push((col, v));
                    } else {
                        self.col_count[col] -= 1;
                        if self.col_count[col] == 1 {
                            self.queue.push_back(Job::Col(col));
                        }
                    }
                    i += 1;
                    j += 1;
                }
            }
            if merged.is_empty() {
                self.active[r] = false;
            } else if merged.len() == 1 {
                self.queue.push_back(Job::Row(r));
            }
            self.rows[r] = merged;
        }
        self.retire_row(p);
    }

    fn run(mut self) -> usize {
        loop {
            while let Some(job) = self.queue.pop_front() {
                match job {
                    Job::Col(c) => {
                        if self.col_count[c] != 1 {
                            continue;
                        }
                        if let Some(&r) = self.rows_with(c).first() {
                            self.pivot(r, c);
                        }
                    }
                    Job::Row(r) => {
                        if !self.active[r] || self.rows[r].len() != 1 {
                            continue;
                        }
                        let c = self.rows[r][0].0;
                        self.pivot(r, c);
                    }
                }
            }
            // General pivot: sparsest column, then its sparsest row.
            let mut best: Option<(usize, usize)> = None;
            for (c, &n) in self.col_count.iter().enumerate() {
                if n > 0 && best.is_none_or(|(_, bn)| n < bn) {
                    best = Some((c, n));
                }
            }
            let Some((c, _)) = best else {
                return self.rank;
            };
            let r = self
                .rows_with(c)
                .into_iter()
                .min_by_key(|&r| self.rows[r].len())
                .expect("column count is consistent");
            self.pivot(r, c);
        }
    }
}

/// Rank of an integer matrix over the rationals.
pub fn rank(m: &Incidence) -> usize {
    Eliminator::new(m).run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_rank(rows: &[Vec<i64>]) -> usize {
        let mut a: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect();
        let (n, m) = (a.len(), if a.is_empty() { 0 } else { a[0].len() });
        let mut rank = 0;
        for c in 0..m {
            let Some(p) = (rank..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())) else {
                break;
            };
            if a[p][c].abs() < 1e-9 {
                continue;
            }
            a.swap(rank, p);
            for i in 0..n {
                if i != rank {
                    let f = a[i][c] / a[rank][c];
                    for k in 0..m {
                        a[i][k] -= f * a[rank][k];
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    fn incidence(rows: &[Vec<i64>]) -> Incidence {
        let mut t = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                if v != 0 {
                    t.push((r, c, v as i32));
                }
            }
        }
        Incidence::from_triplets(rows.len(), rows[0].len(), &t)
    }

    #[test]
    fn matches_dense_rank_on_small_matrices() {
        let cases = vec![
            vec![vec![1, -1, 0], vec![0, 1, -1], vec![1, 0, -1]],
            vec![vec![1, 1], vec![1, -1]],
            vec![vec![0, 0], vec![0, 0]],
            vec![vec![2, 4, 1], vec![1, 2, 1], vec![3, 6, 2], vec![0, 0, 5]],
        ];
        for rows in cases {
            assert_eq!(rank(&incidence(&rows)), dense_rank(&rows));
        }
    }

    proptest::proptest! {
        #[test]
        fn random_sign_matrices(entries in proptest::collection::vec(-1i64..=1, 48)) {
            let rows: Vec<Vec<i64>> = entries.chunks(8).map(|c| c.to_vec()).collect();
            proptest::prop_assert_eq!(rank(&incidence(&rows)), dense_rank(&rows));
        }
    }
}
