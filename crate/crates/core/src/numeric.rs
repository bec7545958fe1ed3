//! Deterministic numerical primitives shared across the crate: compensated
//! summation, log-sum-exp, and Gauss–Legendre quadrature nodes.
//!
//! Every routine here is sequential and order-stable so that repeated runs
//! (and runs under different thread counts) produce bit-identical results.

/// Neumaier-compensated sum of a slice, evaluated left to right.
pub fn neumaier_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Log of the sum of exponentials, single-pass max shift plus compensated
/// accumulation. Returns `f64::NEG_INFINITY` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let e = (x - m).exp();
        let t = sum + e;
        if sum.abs() >= e.abs() {
            comp += (sum - t) + e;
        } else {
            comp += (e - t) + sum;
        }
        sum = t;
    }
    m + (sum + comp).ln()
}

/// Gauss–Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre polynomial. Deterministic for a given order.
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 2, "quadrature order must be at least 2");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let n = m as f64;
        for i in 0..m {
            // Chebyshev-like initial guess for the i-th root.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(m, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(m, x);
            nodes[m - 1 - i] = x;
            weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
        GaussLegendre { nodes, weights }
    }

    /// Nodes and weights mapped to [lo, hi].
    pub fn mapped(&self, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let nodes = self.nodes.iter().map(|&x| c + h * x).collect();
        let weights = self.weights.iter().map(|&w| h * w).collect();
        (nodes, weights)
    }
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0f64;
    let mut p1 = x;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let dp = (m as f64) * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Least-squares slope of y against x.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "slope needs at least two points");
    let xbar = points.iter().map(|p| p.0).sum::<f64>() / n;
    let ybar = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - xbar) * (p.1 - ybar)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - xbar) * (p.0 - xbar)).sum();
    sxy / sxx
}
