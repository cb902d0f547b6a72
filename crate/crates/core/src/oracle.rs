//! Brute-force reference computations used to cross-check the fast paths:
//! exhaustive assignment enumeration, adaptive quadrature and a scalar
//! Kalman step. None of these share code with the implementations they
//! check.

use crate::assignment::{Assignment, CostMatrix};

/// Every feasible row-to-distinct-column assignment, sorted by cost and
/// then lexicographically by columns.
pub fn brute_force_assignments(cost: &CostMatrix) -> Vec<Assignment> {
    fn recurse(cost: &CostMatrix, row: usize, used: &mut Vec<bool>, cols: &mut Vec<usize>, out: &mut Vec<Assignment>) {
        if row == cost.rows() {
            let total: f64 = cols.iter().enumerate().map(|(r, &c)| cost.get(r, c)).sum();
            out.push(Assignment {
                cols: cols.clone(),
                cost: total,
            });
            return;
        }
        for c in 0..cost.cols() {
            if used[c] || !cost.get(row, c).is_finite() {
                continue;
            }
            used[c] = true;
            cols.push(c);
            recurse(cost, row + 1, used, cols, out);
            cols.pop();
            used[c] = false;
        }
    }
    let mut out = Vec::new();
    recurse(cost, 0, &mut vec![false; cost.cols()], &mut Vec::new(), &mut out);
    out.sort_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.cols.cmp(&b.cols)));
    out
}

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integrates `f` over `[a, b]` split into `pieces` panels, each refined
/// adaptively. Splitting keeps narrow peaks from being missed by the first
/// coarse Simpson estimate.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * h;
            adaptive_simpson(f, lo, lo + h, tol / pieces as f64)
        })
        .sum()
}

/// Nested adaptive quadrature over the rectangle `[ax, bx] x [ay, by]`.
pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
    f: &F,
    (ax, bx): (f64, f64),
    (ay, by): (f64, f64),
    pieces: usize,
    tol: f64,
) -> f64 {
    let inner = |x: f64| integrate_1d(&|y: f64| f(x, y), ay, by, pieces, tol / (bx - ax).abs().max(1.0));
    integrate_1d(&inner, ax, bx, pieces, tol)
}

/// Scalar Gaussian density, written out directly.
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Bivariate Gaussian density from explicit covariance entries.
pub fn normal_pdf_2d(x: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let (dx, dy) = (x[0] - mean[0], x[1] - mean[1]);
    let q = (cov[1][1] * dx * dx - 2.0 * cov[0][1] * dx * dy + cov[0][0] * dy * dy) / det;
    (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
}

/// `<N(m_a, v_a), N(m_b, v_b)>` in one dimension by quadrature over
/// `+-12` standard deviations of the narrower factor's union support.
pub fn inner_product_quadrature_1d(ma: f64, va: f64, mb: f64, vb: f64) -> f64 {
    let (sa, sb) = (va.sqrt(), vb.sqrt());
    let lo = (ma - 12.0 * sa).max(mb - 12.0 * sb);
    let hi = (ma + 12.0 * sa).min(mb + 12.0 * sb);
    if lo >= hi {
        return 0.0;
    }
    let f = |x: f64| normal_pdf(x, ma, va) * normal_pdf(x, mb, vb);
    integrate_1d(&f, lo, hi, 64, 1e-16)
}

/// Two-dimensional counterpart of [`inner_product_quadrature_1d`].
pub fn inner_product_quadrature_2d(ma: [f64; 2], pa: [[f64; 2]; 2], mb: [f64; 2], pb: [[f64; 2]; 2]) -> f64 {
    let window = |i: usize| {
        let (sa, sb) = (pa[i][i].sqrt(), pb[i][i].sqrt());
        let lo = (ma[i] - 10.0 * sa).max(mb[i] - 10.0 * sb);
        let hi = (ma[i] + 10.0 * sa).min(mb[i] + 10.0 * sb);
        (lo, hi)
    };
    let (wx, wy) = (window(0), window(1));
    if wx.0 >= wx.1 || wy.0 >= wy.1 {
        return 0.0;
    }
    let f = |x: f64, y: f64| normal_pdf_2d([x, y], ma, pa) * normal_pdf_2d([x, y], mb, pb);
    integrate_2d(&f, wx, wy, 24, 1e-14)
}

/// One predict-update cycle of a scalar random-walk Kalman filter.
/// Returns the posterior `(mean, variance)`.
pub fn kalman_1d(mean: f64, var: f64, process_var: f64, z: f64, meas_var: f64) -> (f64, f64) {
    let prior_var = var + process_var;
    let gain = prior_var / (prior_var + meas_var);
    (mean + gain * (z - mean), (1.0 - gain) * prior_var)
}
