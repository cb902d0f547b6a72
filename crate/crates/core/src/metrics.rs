//! OSPA distance between finite sets of 2-D positions.

use serde::{Deserialize, Serialize};

use crate::assignment::{solve, CostMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OspaParams {
    /// Order.
    pub p: f64,
    /// Cut-off distance in metres.
    pub c: f64,
}

impl Default for OspaParams {
    fn default() -> Self {
        Self { p: 1.0, c: 200.0 }
    }
}

/// OSPA distance with its localization and cardinality parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ospa {
    pub total: f64,
    pub localization: f64,
    pub cardinality: f64,
}

/// Minimum-cost perfect matching on a square matrix. Returns the column for
/// each row and the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let matrix = CostMatrix::from_rows(cost);
    assert_eq!(matrix.rows(), matrix.cols(), "hungarian needs a square matrix");
    let a = solve(&matrix).expect("finite square matrix is always assignable");
    (a.cols, a.cost)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn ospa(x: &[[f64; 2]], y: &[[f64; 2]], params: OspaParams) -> Ospa {
    let OspaParams { p, c } = params;
    let (small, large) = if x.len() <= y.len() { (x, y) } else { (y, x) };
    let (n, m) = (small.len(), large.len());
    if m == 0 {
        return Ospa {
            total: 0.0,
            localization: 0.0,
            cardinality: 0.0,
        };
    }
    let loc_sum = if n == 0 {
        0.0
    } else {
        let mut cost = CostMatrix::new(n, m, 0.0);
        for (i, a) in small.iter().enumerate() {
            for (j, b) in large.iter().enumerate() {
                cost.set(i, j, distance(*a, *b).min(c).powf(p));
            }
        }
        solve(&cost).expect("finite cost matrix").cost
    };
    let card_sum = c.powf(p) * (m - n) as f64;
    let m = m as f64;
    Ospa {
        total: ((loc_sum + card_sum) / m).powf(1.0 / p),
        localization: (loc_sum / m).powf(1.0 / p),
        cardinality: (card_sum / m).powf(1.0 / p),
    }
}
