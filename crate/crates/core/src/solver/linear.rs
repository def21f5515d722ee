//! Exact sparse linear systems over complex rationals.

use std::collections::{BTreeMap, BTreeSet};

use crate::kernel::Number;

/// One equation `Σ coeffs[j]·u_j = rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: BTreeMap<usize, Number>,
    pub rhs: Number,
}

impl Row {
    pub fn new() -> Self {
        Row {
            coeffs: BTreeMap::new(),
            rhs: Number::zero(),
        }
    }

    pub fn add_coeff(&mut self, col: usize, c: &Number) {
        let e = self.coeffs.entry(col).or_insert_with(Number::zero);
        *e = e.add(c);
        if e.is_zero() {
            self.coeffs.remove(&col);
        }
    }

    fn is_trivial(&self) -> bool {
        self.coeffs.is_empty() && self.rhs.is_zero()
    }

    /// `self -= f * other`.
    fn axpy(&mut self, f: &Number, other: &Row) {
        for (c, v) in &other.coeffs {
            self.add_coeff(*c, &v.mul(f).neg());
        }
        self.rhs = self.rhs.sub(&other.rhs.mul(f));
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    /// Basic solution: free unknowns are zero.
    Solved { values: Vec<Number>, rank: usize },
    /// Indices of the input rows that reduce to `0 = c ≠ 0`.
    Inconsistent { rows: Vec<usize>, rank: usize },
}

/// Gauss–Jordan elimination restricted to the columns in `allowed` (all
/// others are fixed at zero). Pivots are taken in column order.
pub fn solve(rows: &[Row], ncols: usize, allowed: Option<&BTreeSet<usize>>) -> Outcome {
    let mut work: Vec<(usize, Row)> = rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut r = r.clone();
            if let Some(a) = allowed {
                r.coeffs.retain(|c, _| a.contains(c));
            }
            (k, r)
        })
        .filter(|(_, r)| !r.is_trivial())
        .collect();
    let mut pivot_rows: Vec<(usize, Row)> = Vec::new();
    let mut pivot_cols: Vec<usize> = Vec::new();
    for col in 0..ncols {
        if allowed.is_some_and(|a| !a.contains(&col)) {
            continue;
        }
        let Some(best) = work
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| r.coeffs.contains_key(&col))
            .min_by_key(|(_, (k, r))| (r.coeffs.len(), *k))
            .map(|(i, _)| i)
        else {
            continue;
        };
        let (origin, mut p) = work.swap_remove(best);
        let inv = p.coeffs[&col].inv().expect("nonzero pivot");
        for v in p.coeffs.values_mut() {
            *v = v.mul(&inv);
        }
        p.rhs = p.rhs.mul(&inv);
        for (_, r) in work.iter_mut().chain(pivot_rows.iter_mut()) {
            if let Some(f) = r.coeffs.get(&col).cloned() {
                r.axpy(&f, &p);
            }
        }
        work.retain(|(_, r)| !r.is_trivial());
        pivot_rows.push((origin, p));
        pivot_cols.push(col);
    }
    let rank = pivot_rows.len();
    let mut bad: Vec<usize> = work
        .iter()
        .filter(|(_, r)| r.coeffs.is_empty() && !r.rhs.is_zero())
        .map(|(k, _)| *k)
        .collect();
    if !bad.is_empty() {
        bad.sort_unstable();
        return Outcome::Inconsistent { rows: bad, rank };
    }
    let mut values = vec![Number::zero(); ncols];
    // Remaining entries of a pivot row are free columns, which are zero.
    for ((_, r), col) in pivot_rows.iter().zip(&pivot_cols) {
        values[*col] = r.rhs.clone();
    }
    Outcome::Solved { values, rank }
}

/// Basic solution followed by greedy pruning to an inclusion-minimal
/// support. Unknowns are tried for removal from the highest index down.
pub fn solve_min_support(rows: &[Row], ncols: usize) -> Outcome {
    let first = solve(rows, ncols, None);
    let Outcome::Solved { values, rank } = first else {
        return first;
    };
    let support = |v: &[Number]| -> BTreeSet<usize> {
        v.iter()
            .enumerate()
            .filter(|(_, x)| !x.is_zero())
            .map(|(k, _)| k)
            .collect()
    };
    let mut best = values;
    let mut s = support(&best);
    let order: Vec<usize> = s.iter().rev().copied().collect();
    for u in order {
        if !s.contains(&u) {
            continue;
        }
        let mut trial = s.clone();
        trial.remove(&u);
        if let Outcome::Solved { values, .. } = solve(rows, ncols, Some(&trial)) {
            s = support(&values);
            best = values;
        }
    }
    Outcome::Solved { values: best, rank }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: &[(usize, i64)], rhs: i64) -> Row {
        let mut r = Row::new();
        for (k, v) in c {
            r.add_coeff(*k, &Number::int(*v));
        }
        r.rhs = Number::int(rhs);
        r
    }

    #[test]
    fn unique_solution() {
        let rows = vec![row(&[(0, 1), (1, 1)], 3), row(&[(0, 1), (1, -1)], 1)];
        match solve(&rows, 2, None) {
            Outcome::Solved { values, rank } => {
                assert_eq!(rank, 2);
                assert_eq!(values, vec![Number::int(2), Number::int(1)]);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn inconsistent_rows_reported() {
        let rows = vec![row(&[(0, 1)], 1), row(&[(0, 2)], 3)];
        assert!(matches!(solve(&rows, 1, None), Outcome::Inconsistent { rows, .. } if rows == vec![1]));
    }

    #[test]
    fn pruning_reaches_smaller_support() {
        // u0 - u2 = 0, u1 + u2 = 1: the basic solution sets the free u2 to 0.
        let rows = vec![row(&[(0, 1), (2, -1)], 0), row(&[(1, 1), (2, 1)], 1)];
        let Outcome::Solved { values, .. } = solve_min_support(&rows, 3) else { panic!() };
        assert_eq!(values, vec![Number::zero(), Number::one(), Number::zero()]);
        // u0 + u1 + u2 = 1 alone: basic support {0}.
        let rows = vec![row(&[(0, 1), (1, 1), (2, 1)], 1)];
        let Outcome::Solved { values, .. } = solve_min_support(&rows, 3) else { panic!() };
        assert_eq!(values, vec![Number::one(), Number::zero(), Number::zero()]);
        // u0 + u1 = 1, u0 - u2 = 0 admits u1 = 1 alone.
        let rows = vec![row(&[(0, 1), (1, 1)], 1), row(&[(0, 1), (2, -1)], 0)];
        let Outcome::Solved { values, .. } = solve_min_support(&rows, 3) else { panic!() };
        let nz = values.iter().filter(|v| !v.is_zero()).count();
        assert_eq!(nz, 1);
    }
}
