//! The conditioned-Poisson machinery at finite size: the constraint-lattice
//! model for equal-margin tables, the half-open box decomposition of the
//! kernel lattice, exact versus Gaussian box probabilities, the two-sided
//! local-limit sandwich, and the lattice tail bounds.
//!
//! Everything is computed at explicit finite parameters; the module reports
//! measured constants and minimal passing tolerances instead of assuming
//! asymptotic ones.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::numeric::GaussLegendre;
use crate::tables;

/// Quadrature order of the fixed-order fast path used inside tolerance
/// searches; validated against high-order references in the test suite.
const HOT_ORDER: usize = 24;

/// The independent-Poisson model conditioned on a lattice-coset constraint:
/// cell means, the integer kernel basis of the constraint map, and the
/// derived geometry used by all box computations.
#[derive(Debug, Clone)]
pub struct CondModel {
    pub k: u32,
    /// Total count `n` (the sum of all cell means).
    pub nu: f64,
    /// Number of cells, `k^2`.
    pub q: usize,
    /// Kernel dimension, `(k-1)^2`.
    pub s: usize,
    /// Common cell mean `n/k^2`.
    pub lambda: f64,
    /// True when the cell mean is an integer, which makes the flat table a
    /// lattice point and every box anchor exact.
    pub lambda_integral: bool,
    /// Ratio of the smallest cell mean to the total, `1/k^2` here.
    pub tau: f64,
    /// Kernel basis as columns: for cell grid `(i, j)` with `i, j < k-1`,
    /// the column is `e_ij - e_i(k-1) - e_(k-1)j + e_(k-1)(k-1)`.
    pub basis: DMatrix<f64>,
    /// Gram matrix of the whitened basis columns `V / sqrt(lambda)`.
    pub gram: DMatrix<f64>,
    /// Upper-triangular factor `R` with `R^T R = gram`.
    chol: DMatrix<f64>,
    /// Extreme eigenvalues of the whitened Gram matrix.
    gram_eig_min: f64,
    gram_eig_max: f64,
    /// Smallest and largest singular values of the basis matrix; instance
    /// stand-ins for the norm-equivalence constants.
    pub c1: f64,
    pub c2: f64,
    /// `sqrt(det V^T V)`.
    pub sqrt_det_vtv: f64,
}

/// Per-instance normalization constants of the local-limit statement.
#[derive(Debug, Clone, Serialize)]
pub struct ModelConstants {
    /// `(2 pi)^{s/2} prod_i (2 pi lambda_i / nu)^{-1/2}`.
    pub gamma: f64,
    /// Subspace volume normalizer: `Leb(D^{-1} B_0) = nu^{-s/2} mu`.
    pub mu: f64,
    /// `kappa * gamma / mu`, the local-limit constant.
    pub beta: f64,
}

impl CondModel {
    /// Coordinates of a kernel vector in the basis (least squares through the
    /// Gram matrix of the raw basis; exact for vectors lying in the span).
    pub fn coords(&self, z: &DVector<f64>) -> DVector<f64> {
        let vtv = self.basis.transpose() * &self.basis;
        let rhs = self.basis.transpose() * z;
        vtv.lu().solve(&rhs).expect("basis has full rank")
    }

    /// The box anchor `z_w = sum w_a V_a` as a length-`q` vector.
    pub fn anchor(&self, w: &[i64]) -> DVector<f64> {
        let wv = DVector::from_iterator(self.s, w.iter().map(|&x| x as f64));
        &self.basis * wv
    }

    /// Whether the table `lambda + z_w` has all entries nonnegative, i.e.
    /// whether the box's lattice points are realizable counts.
    pub fn box_occupied(&self, w: &[i64]) -> bool {
        let z = self.anchor(w);
        z.iter().all(|&zi| self.lambda + zi >= 0.0)
    }

    /// Instance values of the three bounded-away-from-zero constants.
    pub fn constants(&self, kappa: u64) -> ModelConstants {
        let two_pi = 2.0 * std::f64::consts::PI;
        let gamma = two_pi.powf(self.s as f64 / 2.0)
            * (two_pi * self.lambda / self.nu).powf(-(self.q as f64) / 2.0);
        // Leb(D^{-1} B_0) = sqrt(det(V^T V / lambda)) = sqrt(det V^T V) * lambda^{-s/2}
        let mu = self.sqrt_det_vtv
            * self.lambda.powf(-(self.s as f64) / 2.0)
            * self.nu.powf(self.s as f64 / 2.0);
        ModelConstants {
            gamma,
            mu,
            beta: kappa as f64 * gamma / mu,
        }
    }
}

/// Build the equal-margin table model: uniform cell means `n/k^2` and the
/// `(k-1)^2` corner-difference kernel basis.
pub fn build_table_model(k: u32, n: u64) -> CondModel {
    assert!(k >= 2, "tables need at least two rows");
    assert!(
        n > 0 && n % k as u64 == 0,
        "total must be a positive multiple of k"
    );
    let kk = k as usize;
    let q = kk * kk;
    let s = (kk - 1) * (kk - 1);
    let lambda = n as f64 / (q as f64);
    let mut basis: DMatrix<f64> = DMatrix::zeros(q, s);
    for i in 0..kk - 1 {
        for j in 0..kk - 1 {
            let col = i * (kk - 1) + j;
            basis[(i * kk + j, col)] = 1.0;
            basis[(i * kk + (kk - 1), col)] = -1.0;
            basis[((kk - 1) * kk + j, col)] = -1.0;
            basis[((kk - 1) * kk + (kk - 1), col)] = 1.0;
        }
    }
    let vtv = basis.transpose() * &basis;
    let sqrt_det_vtv = vtv.determinant().sqrt();
    let gram = &vtv / lambda;
    let chol = gram
        .clone()
        .cholesky()
        .expect("gram matrix is positive definite")
        .l()
        .transpose();
    let eig = gram.clone().symmetric_eigen();
    let gram_eig_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let gram_eig_max = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let svd = basis.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    CondModel {
        k,
        nu: n as f64,
        q,
        s,
        lambda,
        lambda_integral: n % (q as u64) == 0,
        tau: 1.0 / q as f64,
        basis,
        gram,
        chol,
        gram_eig_min,
        gram_eig_max,
        c1: sv[0],
        c2: sv[sv.len() - 1],
        sqrt_det_vtv,
    }
}

/// Count the lattice points of `Z^q ∩ span(V)` inside the half-open
/// fundamental box `B_0 = {sum t_a V_a : t_a in [0,1)}` by bounded search.
///
/// Works for any integer basis whose rows contain an invertible `s x s`
/// minor (guaranteed by linear independence): integer candidates are
/// enumerated on those coordinates and validated in full.
pub fn kappa_of_basis(basis: &DMatrix<f64>) -> u64 {
    let q = basis.nrows();
    let s = basis.ncols();
    // pick s rows forming an invertible minor via column-pivoted elimination
    let mut rows: Vec<usize> = Vec::new();
    let mut work = basis.clone();
    for col in 0..s {
        let mut best = usize::MAX;
        let mut best_val = 1e-9;
        for r in 0..q {
            if rows.contains(&r) {
                continue;
            }
            if work[(r, col)].abs() > best_val {
                best_val = work[(r, col)].abs();
                best = r;
            }
        }
        assert!(best != usize::MAX, "basis is rank deficient");
        rows.push(best);
        let pivot = work[(best, col)];
        for r in 0..q {
            if r == best {
                continue;
            }
            let f = work[(r, col)] / pivot;
            for c in col..s {
                work[(r, c)] -= f * work[(best, c)];
            }
        }
    }
    let minor = DMatrix::from_fn(s, s, |r, c| basis[(rows[r], c)]);
    let minor_inv = minor.clone().try_inverse().expect("minor is invertible");

    // ranges of the selected coordinates over t in [0,1)^s
    let mut lo = vec![0i64; s];
    let mut hi = vec![0i64; s];
    for r in 0..s {
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for c in 0..s {
            let v = minor[(r, c)];
            if v < 0.0 {
                a += v;
            } else {
                b += v;
            }
        }
        lo[r] = a.floor() as i64;
        hi[r] = b.ceil() as i64;
    }

    let mut count = 0u64;
    let mut cand = lo.clone();
    'outer: loop {
        // t = minor^{-1} * candidate; keep if t in [0,1)^s and V t integral
        let zr = DVector::from_iterator(s, cand.iter().map(|&x| x as f64));
        let t = &minor_inv * zr;
        if t.iter().all(|&ti| (-1e-9..1.0 - 1e-9).contains(&ti)) {
            let full = basis * &t;
            if full.iter().all(|&zi| (zi - zi.round()).abs() < 1e-9) {
                count += 1;
            }
        }
        for d in 0..s {
            cand[d] += 1;
            if cand[d] <= hi[d] {
                continue 'outer;
            }
            cand[d] = lo[d];
        }
        break;
    }
    count
}

// ---------------------------------------------------------------------------
// box probabilities
// ---------------------------------------------------------------------------

/// Exact probability that the Poisson array lands in the box `lambda + B_w`:
/// the sum of Poisson pmfs over the box's lattice points (one per box for the
/// corner-difference basis). Requires integral cell means.
pub fn box_prob_exact(model: &CondModel, w: &[i64]) -> f64 {
    assert_eq!(w.len(), model.s);
    assert!(
        model.lambda_integral,
        "exact box probabilities need integral cell means"
    );
    let z = model.anchor(w);
    let mut log_p = 0.0;
    for &zi in z.iter() {
        let cell = model.lambda + zi;
        let cell_int = cell.round() as i64;
        debug_assert!((cell - cell_int as f64).abs() < 1e-9);
        if cell_int < 0 {
            return 0.0;
        }
        log_p += crate::scalar::poisson_log_pmf(model.lambda, cell_int as u64);
    }
    log_p.exp()
}

/// Gaussian mass of the dilated coordinate region
/// `{scale * sum_a t_a A_a : t in prod [lo_d, hi_d]}` for the subspace
/// Gaussian: a tensor Gauss-Legendre integral of
/// `(2 pi)^{-s/2} exp(-scale^2 t' G t / 2)` times the parameterization
/// volume factor `scale^s sqrt(det G)`.
fn gauss_region(model: &CondModel, lo: &[f64], hi: &[f64], scale: f64, order: usize) -> f64 {
    let s = model.s;
    let gl = GaussLegendre::new(order);
    let mut axes_nodes = Vec::with_capacity(s);
    let mut axes_weights = Vec::with_capacity(s);
    for d in 0..s {
        let (n, wt) = gl.mapped(lo[d], hi[d]);
        axes_nodes.push(n);
        axes_weights.push(wt);
    }
    let norm = (2.0 * std::f64::consts::PI).powf(-(s as f64) / 2.0)
        * scale.powi(s as i32)
        * model.gram.determinant().sqrt();
    let mut idx = vec![0usize; s];
    let mut total = 0.0f64;
    let mut comp = 0.0f64;
    let mut t = DVector::zeros(s);
    'outer: loop {
        let mut weight = 1.0;
        for d in 0..s {
            t[d] = axes_nodes[d][idx[d]];
            weight *= axes_weights[d][idx[d]];
        }
        let rt = &model.chol * &t;
        let quad: f64 = rt.iter().map(|&v| v * v).sum();
        let val = weight * (-0.5 * scale * scale * quad).exp();
        // compensated accumulation keeps the tensor sum order-stable
        let tsum = total + val;
        if total.abs() >= val.abs() {
            comp += (total - tsum) + val;
        } else {
            comp += (val - tsum) + total;
        }
        total = tsum;
        for d in 0..s {
            idx[d] += 1;
            if idx[d] < order {
                continue 'outer;
            }
            idx[d] = 0;
        }
        break;
    }
    norm * (total + comp)
}

/// Fixed-order Gaussian mass of the dilated box `scale * D^{-1} B_w`.
fn gauss_box(model: &CondModel, w: &[i64], scale: f64, order: usize) -> f64 {
    let lo: Vec<f64> = w.iter().map(|&x| x as f64).collect();
    let hi: Vec<f64> = w.iter().map(|&x| x as f64 + 1.0).collect();
    gauss_region(model, &lo, &hi, scale, order)
}

/// Gaussian probability of the dilated box: `N(scale * D^{-1} B_w)` for the
/// subspace Gaussian with identity covariance in whitened coordinates.
/// The tensor order starts at 12 and is raised in steps of 8 until two
/// successive orders agree to 1e-10 (relative), capped at 48.
pub fn box_prob_normal(model: &CondModel, w: &[i64], scale: f64) -> f64 {
    assert_eq!(w.len(), model.s);
    assert!(scale > 0.0);
    let mut order = 12usize;
    let mut prev = gauss_box(model, w, scale, order);
    loop {
        let next_order = order + 8;
        let next = gauss_box(model, w, scale, next_order);
        if (next - prev).abs() <= 1e-10 * next.abs().max(1e-300) || next_order >= 48 {
            return next;
        }
        order = next_order;
        prev = next;
    }
}

/// `Leb(D^{-1} B_0)`, the subspace volume of the whitened fundamental box.
pub fn leb_of_unit_box(model: &CondModel) -> f64 {
    model.gram.determinant().sqrt()
}

/// Rigorous two-sided bracket for `N(scale * D^{-1} B_w)` from the density
/// extremes over the box: unit coordinate volume times the density bounds
/// `exp(-scale^2 eig * |t|^2 / 2)` at the eigenvalue extremes of the Gram
/// matrix and the nearest/farthest points of the box.
fn gauss_box_bracket(model: &CondModel, w: &[i64], scale: f64) -> (f64, f64) {
    let mut near = 0.0f64;
    let mut far = 0.0f64;
    for &wd in w {
        let (a, b) = (wd as f64, wd as f64 + 1.0);
        let lo = if a <= 0.0 && b >= 0.0 {
            0.0
        } else {
            a.abs().min(b.abs())
        };
        let hi = a.abs().max(b.abs());
        near += lo * lo;
        far += hi * hi;
    }
    let norm = (2.0 * std::f64::consts::PI).powf(-(model.s as f64) / 2.0)
        * scale.powi(model.s as i32)
        * model.gram.determinant().sqrt();
    let lower = norm * (-0.5 * scale * scale * model.gram_eig_max * far).exp();
    let upper = norm * (-0.5 * scale * scale * model.gram_eig_min * near).exp();
    (lower, upper)
}

// ---------------------------------------------------------------------------
// the sandwich
// ---------------------------------------------------------------------------

/// One box row of a sandwich report.
#[derive(Debug, Clone, Serialize)]
pub struct BoxRow {
    pub w: Vec<i64>,
    pub occupied: bool,
    /// `nu^{(q-s)/2} P{Y in lambda + B_w} / beta`.
    pub exact: f64,
    /// Conditional probability `Q{Y in lambda + B_w}`.
    pub exact_conditional: f64,
    /// `theta^{-(s+1)} N(theta * box)`.
    pub lower: f64,
    /// `theta^{s+1} N(box / theta)`.
    pub upper: f64,
    pub pass: bool,
}

/// Output of `sandwich_check`: the per-box sandwich at the requested
/// tolerance plus the minimal tolerances found by bisection.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub k: u32,
    pub n: u64,
    pub theta: f64,
    pub delta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
    pub kappa: u64,
    pub rows: Vec<BoxRow>,
    pub all_pass: bool,
    /// Minimal tolerance at which every box in the window passes the
    /// normalized-mass sandwich.
    pub min_theta: f64,
    /// Minimal tolerance for the conditional-probability sandwich.
    pub min_theta_conditional: f64,
    /// Minimal tolerance for the anchor box alone.
    pub min_theta_center: f64,
    /// `nu^{(q-s)/2} P{Y in lambda + L} / beta`, which approaches 1.
    pub hyperplane_ratio: f64,
    pub notes: Vec<String>,
}

fn window_indices(s: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut w = vec![-radius; s];
    'outer: loop {
        out.push(w.clone());
        for d in 0..s {
            w[d] += 1;
            if w[d] <= radius {
                continue 'outer;
            }
            w[d] = -radius;
        }
        break;
    }
    out
}

/// Per-box data shared by the report and the tolerance searches.
struct BoxData {
    w: Vec<i64>,
    occupied: bool,
    /// Normalized mass target of the two-sided bound.
    exact: f64,
    /// Conditional-probability target.
    exact_conditional: f64,
}

/// Whether one box passes the sandwich at tolerance `theta`, trying the
/// rigorous density-extreme bracket first and falling back to quadrature
/// only when the bracket cannot certify the comparison.
fn box_pass_at(model: &CondModel, bd: &BoxData, theta: f64, conditional: bool) -> bool {
    let s1 = (model.s + 1) as f64;
    let target = if conditional {
        bd.exact_conditional
    } else {
        bd.exact
    };
    let up_factor = theta.powf(s1);
    let (up_lo, up_hi) = gauss_box_bracket(model, &bd.w, 1.0 / theta);
    let upper_ok = if target <= up_factor * up_lo {
        true
    } else if target > up_factor * up_hi {
        false
    } else {
        target <= up_factor * gauss_box(model, &bd.w, 1.0 / theta, HOT_ORDER) * (1.0 + 1e-12)
    };
    if !upper_ok {
        return false;
    }
    if !bd.occupied {
        return true;
    }
    let lo_factor = theta.powf(-s1);
    let (lo_lo, lo_hi) = gauss_box_bracket(model, &bd.w, theta);
    if target >= lo_factor * lo_hi {
        true
    } else if target < lo_factor * lo_lo {
        false
    } else {
        target >= lo_factor * gauss_box(model, &bd.w, theta, HOT_ORDER) * (1.0 - 1e-12)
    }
}

/// Minimal tolerance in `[1, 4]` at which this box passes, by bisection;
/// infinite when even the widest tolerance fails.
fn box_threshold(model: &CondModel, bd: &BoxData, conditional: bool) -> f64 {
    if box_pass_at(model, bd, 1.0, conditional) {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0f64, 4.0f64);
    if !box_pass_at(model, bd, hi, conditional) {
        return f64::INFINITY;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if box_pass_at(model, bd, mid, conditional) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Minimal tolerance over a set of boxes: the largest per-box threshold,
/// with a cheap screen that skips boxes already passing at the running
/// maximum. Boxes are visited outermost first, where thresholds peak.
fn min_theta_over(model: &CondModel, data: &[BoxData], conditional: bool) -> f64 {
    let mut order: Vec<&BoxData> = data.iter().collect();
    order.sort_by_key(|bd| std::cmp::Reverse(bd.w.iter().map(|&x| x.abs()).sum::<i64>()));
    let mut running = 1.0f64;
    for bd in order {
        if box_pass_at(model, bd, running, conditional) {
            continue;
        }
        let t = box_threshold(model, bd, conditional);
        if t.is_infinite() {
            return f64::INFINITY;
        }
        running = running.max(t);
    }
    running
}

/// Check the two-sided box sandwich over the window `max_a |w_a| <= delta nu`
/// at tolerance `theta`, and locate the minimal passing tolerances.
///
/// The bounds use the Jacobian-compensated prefactors `theta^{±(s+1)}`: the
/// dilation of an s-dimensional box changes Gaussian mass by a volume factor
/// `theta^{±s}` even at the origin, so the single-power form can only hold
/// after an asymptotic absorption step. Boxes whose lattice point has a
/// negative cell are reported unoccupied, carry exact mass zero, and are
/// exempt from the lower bound.
pub fn sandwich_check(model: &CondModel, theta: f64, delta: f64) -> SandwichReport {
    assert!(theta > 1.0, "tolerance must exceed 1");
    assert!(delta > 0.0);
    let radius = (delta * model.nu).floor() as i64;
    let window = window_indices(model.s, radius);
    let kappa = kappa_of_basis(&model.basis);
    let consts = model.constants(kappa);
    let scale_pow = model.nu.powf((model.q - model.s) as f64 / 2.0);

    // hyperplane mass: exact sum over the margin-(n/k) table set
    let b_margin = (model.nu as u64 / model.k as u64) as u32;
    let total_p =
        tables::prob_y_in_hk(model.k, b_margin).expect("hyperplane probability within budget");
    let hyperplane_ratio = scale_pow * total_p / consts.beta;

    let data: Vec<BoxData> = window
        .iter()
        .map(|w| {
            let occupied = model.box_occupied(w);
            let p = box_prob_exact(model, w);
            BoxData {
                w: w.clone(),
                occupied,
                exact: scale_pow * p / consts.beta,
                exact_conditional: p / total_p,
            }
        })
        .collect();

    let s1 = (model.s + 1) as f64;
    let rows: Vec<BoxRow> = data
        .par_iter()
        .map(|bd| {
            let lower = theta.powf(-s1) * box_prob_normal(model, &bd.w, theta);
            let upper = theta.powf(s1) * box_prob_normal(model, &bd.w, 1.0 / theta);
            let pass = bd.exact <= upper * (1.0 + 1e-12)
                && (!bd.occupied || bd.exact >= lower * (1.0 - 1e-12));
            BoxRow {
                w: bd.w.clone(),
                occupied: bd.occupied,
                exact: bd.exact,
                exact_conditional: bd.exact_conditional,
                lower,
                upper,
                pass,
            }
        })
        .collect();
    let all_pass = rows.iter().all(|r| r.pass);

    let min_theta = min_theta_over(model, &data, false);
    let min_theta_conditional = min_theta_over(model, &data, true);
    let center: Vec<BoxData> = data
        .iter()
        .filter(|bd| bd.w.iter().all(|&x| x == 0))
        .map(|bd| BoxData {
            w: bd.w.clone(),
            occupied: bd.occupied,
            exact: bd.exact,
            exact_conditional: bd.exact_conditional,
        })
        .collect();
    let min_theta_center = min_theta_over(model, &center, false);

    let unoccupied = rows.iter().filter(|r| !r.occupied).count();
    let notes = vec![
        format!(
            "window radius {radius} ({} boxes, {unoccupied} unoccupied)",
            rows.len()
        ),
        "bounds use the volume-compensated tolerance powers s+1".to_string(),
    ];
    SandwichReport {
        k: model.k,
        n: model.nu as u64,
        theta,
        delta,
        gamma: consts.gamma,
        mu: consts.mu,
        beta: consts.beta,
        kappa,
        rows,
        all_pass,
        min_theta,
        min_theta_conditional,
        min_theta_center,
        hyperplane_ratio,
        notes,
    }
}

// ---------------------------------------------------------------------------
// the pointwise sandwich
// ---------------------------------------------------------------------------

/// Largest relative-deviation radius at which the pointwise local-limit
/// sandwich holds at tolerance `theta`:
/// `theta^{-1} phi(theta x) <= nu^{q/2} P{Y = l} / gamma <= theta phi(x/theta)`
/// for every count vector with `max_i |l_i - lambda| / lambda <= delta`.
///
/// Taking logs, both inequalities separate across coordinates, so the worst
/// case over the whole deviation box is a sum of per-coordinate worst cases
/// of `e(l) = log(sqrt(2 pi lambda) pmf(l)) + x^2 / 2` against the
/// tolerance-tilted quadratics; no enumeration of the q-dimensional box is
/// needed. The radius is located by bisection and the passing endpoint is
/// returned (0 when even the central count fails, the cap 3.0 when
/// everything up to it passes).
pub fn pointwise_max_delta(model: &CondModel, theta: f64) -> f64 {
    assert!(theta > 1.0);
    let log_theta = theta.ln();
    let lam = model.lambda;
    let q = model.q as f64;

    let coord_terms = |delta: f64| -> (f64, f64) {
        let lo = (lam * (1.0 - delta)).ceil().max(0.0) as u64;
        let hi = (lam * (1.0 + delta)).floor() as u64;
        let mut max_upper = f64::NEG_INFINITY;
        let mut max_lower = f64::NEG_INFINITY;
        for l in lo..=hi {
            let x = (l as f64 - lam) / lam.sqrt();
            let e = 0.5 * (2.0 * std::f64::consts::PI * lam).ln()
                + crate::scalar::poisson_log_pmf(lam, l)
                + 0.5 * x * x;
            // upper: sum_i [e_i - (1 - theta^{-2}) x_i^2 / 2] <= log theta
            max_upper = max_upper.max(e - 0.5 * (1.0 - theta.powi(-2)) * x * x);
            // lower: sum_i [-e_i + (theta^2 - 1) x_i^2 / 2] <= log theta
            max_lower = max_lower.max(-e + 0.5 * (theta * theta - 1.0) * x * x);
        }
        (max_upper, max_lower)
    };

    let passes = |delta: f64| -> bool {
        let (u, l) = coord_terms(delta);
        q * u <= log_theta && q * l <= log_theta
    };

    if !passes(0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0f64, 3.0f64);
    if passes(hi) {
        return hi;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

// ---------------------------------------------------------------------------
// lattice tails
// ---------------------------------------------------------------------------

/// Exact mass escaping the windowed lattice set versus the per-coordinate
/// deviation-bound budget, plus the Gaussian analog.
#[derive(Debug, Clone, Serialize)]
pub struct TailsReport {
    pub delta: f64,
    /// Radius `floor(delta nu)` of the box window.
    pub radius: i64,
    /// Exact `P{Y in lambda + L, Y not in lambda + L_delta}`.
    pub exact_outside: f64,
    /// `sum_i P{|Y_i - lambda| > delta0 lambda}` with
    /// `delta0 = C1 delta / (2 sqrt(k))`, each summand bounded by the
    /// two-sided deviation inequality.
    pub coordinate_bound: f64,
    pub delta0: f64,
    /// Gaussian mass outside the whitened windowed set.
    pub normal_outside: f64,
    /// Sum of univariate Gaussian tail bounds for the basis coordinates.
    pub normal_bound: f64,
}

/// Compare the exact lattice tail against the coordinate-wise bound from the
/// deviation inequality, and the Gaussian tail against univariate normal
/// tails. Needs integral cell means and an enumerable margin.
pub fn tails_bound_check(model: &CondModel, delta: f64) -> TailsReport {
    assert!(delta > 0.0);
    let radius = (delta * model.nu).floor() as i64;
    let b_margin = (model.nu as u64 / model.k as u64) as u32;

    // exact: walk the table set, locate each table's box index, and add the
    // pmf of every table outside the window
    let vtv = model.basis.transpose() * &model.basis;
    let vtv_lu = vtv.lu();
    let mut outside_logs: Vec<f64> = Vec::new();
    let lam = model.lambda;
    tables::for_each_table(model.k, b_margin, |t| {
        let z = DVector::from_iterator(model.q, t.entries.iter().map(|&e| e as f64 - lam));
        let rhs = model.basis.transpose() * &z;
        let coords = vtv_lu.solve(&rhs).expect("full rank");
        // box index of coordinate c is floor(c); outside iff any |floor(c)| > radius
        let outside = coords.iter().any(|&c| (c.floor() as i64).abs() > radius);
        if outside {
            let lp: f64 = t
                .entries
                .iter()
                .map(|&e| crate::scalar::poisson_log_pmf(lam, e as u64))
                .sum();
            outside_logs.push(lp);
        }
    })
    .expect("margin within enumeration budget");
    let exact_outside = if outside_logs.is_empty() {
        0.0
    } else {
        crate::numeric::log_sum_exp(&outside_logs).exp()
    };

    // coordinate-wise budget from the two-sided deviation bound at relative
    // radius delta0
    let delta0 = model.c1 * delta / (2.0 * (model.k as f64).sqrt());
    let coordinate_bound = (model.q as f64) * crate::scalar::poisson_tail_upper(lam, delta0);

    // Gaussian side: the window is a single coordinate cube, so its mass is
    // one region integral; compare the complement to univariate tails of the
    // basis coordinates (variances from the inverse Gram matrix)
    let lo = vec![-(radius as f64); model.s];
    let hi = vec![radius as f64 + 1.0; model.s];
    let order = (16 + 4 * radius.unsigned_abs() as usize).min(48);
    let inside = gauss_region(model, &lo, &hi, 1.0, order);
    let normal_outside = (1.0 - inside).max(0.0);
    let gram_inv = model.gram.clone().try_inverse().expect("gram invertible");
    let mut normal_bound = 0.0;
    for a in 0..model.s {
        let sd = gram_inv[(a, a)].sqrt();
        let zscore = radius as f64 / sd;
        // standard normal tail bound 2 exp(-z^2/2)
        normal_bound += 2.0 * (-0.5 * zscore * zscore).exp();
    }

    TailsReport {
        delta,
        radius,
        exact_outside,
        coordinate_bound,
        delta0,
        normal_outside,
        normal_bound,
    }
}

/// Least-squares slope of `log(coordinate bound)` against the total count
/// over a grid of sizes at fixed relative radius: the fitted exponential
/// decay rate of the tail budget.
pub fn tails_fitted_rate(k: u32, delta: f64, totals: &[u64]) -> f64 {
    let pts: Vec<(f64, f64)> = totals
        .iter()
        .map(|&n| {
            let m = build_table_model(k, n);
            let r = tails_bound_check(&m, delta);
            (n as f64, r.coordinate_bound.ln())
        })
        .collect();
    crate::numeric::ls_slope(&pts)
}
