//! Linear assignment: a shortest-augmenting-path Hungarian solver for
//! rectangular matrices with forbidden (`+inf`) cells, and Murty's ranked
//! enumeration of the K best assignments on top of it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Dense row-major cost matrix. `f64::INFINITY` marks a forbidden cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, fill: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![fill; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged cost matrix");
        Self {
            rows: r,
            cols: c,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Total cost of `cols` (one column per row).
    pub fn cost_of(&self, cols: &[usize]) -> f64 {
        cols.iter().enumerate().map(|(r, &c)| self.get(r, c)).sum()
    }
}

/// Row-to-column assignment with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub cols: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`).
/// Returns `None` when no assignment avoids forbidden cells.
pub fn solve(cost: &CostMatrix) -> Option<Assignment> {
    let (n, m) = (cost.rows, cost.cols);
    if n == 0 {
        return Some(Assignment {
            cols: Vec::new(),
            cost: 0.0,
        });
    }
    if n > m {
        return None;
    }
    let inf = f64::INFINITY;
    // 1-based potentials; column 0 is the virtual root of each search.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![inf; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if !delta.is_finite() {
                return None;
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut cols = vec![0usize; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            cols[row_of[j] - 1] = j - 1;
        }
    }
    let total = cost.cost_of(&cols);
    Some(Assignment { cols, cost: total })
}

struct Node {
    assignment: Assignment,
    constrained: CostMatrix,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Reversed so that `BinaryHeap` pops the cheapest node; equal costs pop
    // in lexicographic column order.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .assignment
            .cost
            .total_cmp(&self.assignment.cost)
            .then_with(|| other.assignment.cols.cmp(&self.assignment.cols))
    }
}

/// The `k` lowest-cost assignments in ascending cost order (Murty's
/// partitioning). Fewer are returned when fewer feasible assignments exist.
pub fn murty_k_best(cost: &CostMatrix, k: usize) -> Vec<Assignment> {
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    let Some(best) = solve(cost) else {
        return out;
    };
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        assignment: best,
        constrained: cost.clone(),
    });

    while let Some(node) = heap.pop() {
        out.push(Assignment {
            cost: cost.cost_of(&node.assignment.cols),
            cols: node.assignment.cols.clone(),
        });
        if out.len() == k {
            break;
        }
        let n = cost.rows;
        let mut fixed = node.constrained;
        for r in 0..n {
            let c = node.assignment.cols[r];
            let mut child = fixed.clone();
            child.set(r, c, f64::INFINITY);
            if let Some(a) = solve(&child) {
                heap.push(Node {
                    assignment: a,
                    constrained: child,
                });
            }
            // Force (r, c) for the remaining children.
            for cc in 0..fixed.cols {
                if cc != c {
                    fixed.set(r, cc, f64::INFINITY);
                }
            }
            for rr in 0..n {
                if rr != r {
                    fixed.set(rr, c, f64::INFINITY);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::brute_force_assignments;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_by_two_ranked() {
        let c = CostMatrix::from_rows(&[vec![1.0, 10.0], vec![2.0, 1.0]]);
        let ranked = murty_k_best(&c, 2);
        let costs: Vec<f64> = ranked.iter().map(|a| a.cost).collect();
        assert_eq!(costs, vec![2.0, 12.0]);
        assert_eq!(ranked[0].cols, vec![0, 1]);
    }

    #[test]
    fn k_one_is_optimum() {
        let c = CostMatrix::from_rows(&[vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]]);
        let best = solve(&c).unwrap();
        assert_eq!(murty_k_best(&c, 1), vec![best.clone()]);
        assert_eq!(best.cost, 5.0);
    }

    #[test]
    fn forbidden_cells_respected() {
        let inf = f64::INFINITY;
        let c = CostMatrix::from_rows(&[vec![0.0, inf], vec![0.0, inf]]);
        assert!(solve(&c).is_none());
        let c = CostMatrix::from_rows(&[vec![5.0, inf, 1.0], vec![inf, 0.0, 0.0]]);
        let all = murty_k_best(&c, 10);
        assert_eq!(all.len(), 3);
        assert_eq!(all.iter().map(|a| a.cost).collect::<Vec<_>>(), vec![1.0, 5.0, 5.0]);
    }

    #[test]
    fn empty_matrix_has_one_assignment() {
        let c = CostMatrix::new(0, 3, 0.0);
        assert_eq!(
            murty_k_best(&c, 4),
            vec![Assignment {
                cols: vec![],
                cost: 0.0
            }]
        );
    }

    #[test]
    fn full_enumeration_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n..=5);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0..20) as f64).collect())
                .collect();
            let c = CostMatrix::from_rows(&rows);
            let expected = brute_force_assignments(&c);
            let got = murty_k_best(&c, usize::MAX);
            assert_eq!(got.len(), expected.len());
            for (g, e) in got.iter().zip(&expected) {
                assert_eq!(g.cost, e.cost);
            }
            let mut seen: Vec<&Vec<usize>> = got.iter().map(|a| &a.cols).collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), got.len());
        }
    }
}
