//! Scalar rate functions and closed-form Poisson bounds.
//!
//! Centers on the Cramér-type rate `h(t) = (1+t)ln(1+t) - t` for Poisson
//! deviations, its normalized form `psi(t) = 2h(t)/t^2`, the shifted family
//! `g_k(s) = h(s) - rho_k s^2`, and the two-value restrictions `M_{r,k}`.
//! All pmf work is done in log space; exponentiation happens only at the
//! boundary of each computation.

use statrs::function::gamma::ln_gamma;

/// Series cutoff below which `h` and `psi` switch to their Taylor series.
pub const SERIES_CUTOFF: f64 = 0.125;

/// Rate function `h(t) = (1+t)ln(1+t) - t` for `t >= -1`, with `h(-1) = 1`
/// by continuity and a series branch near 0 to avoid cancellation.
pub fn h(t: f64) -> f64 {
    assert!(t >= -1.0, "h requires t >= -1, got {t}");
    if t == -1.0 {
        return 1.0;
    }
    if t.abs() <= SERIES_CUTOFF {
        // h(t) = sum_{n>=2} (-1)^n t^n / (n(n-1)), alternating for t > 0.
        let mut sum = 0.0f64;
        let mut tp = t * t;
        let mut sign = 1.0f64;
        for n in 2..=24u32 {
            sum += sign * tp / ((n * (n - 1)) as f64);
            tp *= t;
            sign = -sign;
        }
        return sum;
    }
    (1.0 + t) * t.ln_1p() - t
}

/// Normalized rate `psi(t) = 2h(t)/t^2`, extended continuously by
/// `psi(0) = 1`; series branch near 0.
pub fn psi(t: f64) -> f64 {
    assert!(t >= -1.0, "psi requires t >= -1, got {t}");
    if t.abs() <= SERIES_CUTOFF {
        // psi(t) = sum_{m>=0} (-1)^m 2 t^m / ((m+1)(m+2)) = 1 - t/3 + t^2/6 - ...
        let mut sum = 0.0f64;
        let mut tp = 1.0f64;
        let mut sign = 1.0f64;
        for m in 0..=22u32 {
            sum += sign * 2.0 * tp / (((m + 1) * (m + 2)) as f64);
            tp *= t;
            sign = -sign;
        }
        return sum;
    }
    2.0 * h(t) / (t * t)
}

/// Parameters tied to a table dimension `k >= 3`.
#[derive(Clone, Copy, Debug)]
pub struct KParams {
    pub k: u32,
    /// k1 = k - 1
    pub k1: f64,
    /// rho_k = ln(k-1)/(k-1)
    pub rho: f64,
    /// degrees of freedom (k-1)^2
    pub r_dof: u32,
}

impl KParams {
    pub fn new(k: u32) -> Self {
        assert!(k >= 3, "k must be at least 3, got {k}");
        let k1 = (k - 1) as f64;
        KParams {
            k,
            k1,
            rho: k1.ln() / k1,
            r_dof: (k - 1) * (k - 1),
        }
    }

    /// J_k = c/(k-1)^2 for a rate parameter c.
    pub fn j_k(&self, c: f64) -> f64 {
        c / (self.k1 * self.k1)
    }
}

/// `rho_k = ln(k-1)/(k-1)`.
pub fn rho(k: u32) -> f64 {
    KParams::new(k).rho
}

/// `g_k(s) = h(s) - rho_k s^2`.
pub fn g_k(s: f64, k: u32) -> f64 {
    h(s) - rho(k) * s * s
}

/// First derivative `g_k'(s) = ln(1+s) - 2 rho_k s`.
pub fn g_k_d1(s: f64, k: u32) -> f64 {
    assert!(s >= -1.0);
    s.ln_1p() - 2.0 * rho(k) * s
}

/// Coordinate sum `G_k(u) = sum_j g_k(u_j)`.
pub fn g_k_sum(u: &[f64], k: u32) -> f64 {
    u.iter().map(|&s| g_k(s, k)).sum()
}

/// Two-value restriction `M_{r,k}(b) = r g_k(b) + (k-r) g_k(-rb/(k-r))`
/// together with its first and second derivatives in `b`.
///
/// Valid for `0 <= b <= (k-r)/r`; the right endpoint is handled through
/// `h(-1) = 1`, where the derivatives diverge to +inf.
pub fn m_rk(b: f64, r: u32, k: u32) -> (f64, f64, f64) {
    assert!(k >= 3 && r >= 1 && r <= k - 2, "need 1 <= r <= k-2");
    let kr = (k - r) as f64;
    let rf = r as f64;
    assert!(
        b >= 0.0 && b <= kr / rf,
        "b out of range: b={b}, limit {}",
        kr / rf
    );
    let rho_k = rho(k);
    let a = -rf * b / kr;
    let value = rf * (h(b) - rho_k * b * b) + kr * (h(a) - rho_k * a * a);
    // d/db g_k(b) = ln(1+b) - 2 rho b;  d/db g_k(a(b)) = (ln(1+a) - 2 rho a) * (-r/(k-r))
    let d1 = if a <= -1.0 {
        f64::INFINITY
    } else {
        rf * (b.ln_1p() - 2.0 * rho_k * b) - rf * (a.ln_1p() - 2.0 * rho_k * a)
    };
    let d2 = if a <= -1.0 {
        f64::INFINITY
    } else {
        rf * (1.0 / (1.0 + b) - 2.0 * rho_k) + (rf * rf / kr) * (1.0 / (1.0 + a) - 2.0 * rho_k)
    };
    (value, d1, d2)
}

/// `M_k(b) = M_{1,k}(b)` value only.
pub fn m_k(b: f64, k: u32) -> f64 {
    m_rk(b, 1, k).0
}

/// `M_k'(b) = ln((1+b)/(1-b/k1)) - 2 k rho_k b / k1` (r = 1).
pub fn m_k_d1(b: f64, k: u32) -> f64 {
    m_rk(b, 1, k).1
}

/// `M_k''(b) = k/((1+b)(k1-b)) - 2 k rho_k / k1` (r = 1).
pub fn m_k_d2(b: f64, k: u32) -> f64 {
    m_rk(b, 1, k).2
}

/// Log pmf of Poisson(lambda) at `ell`, via log-gamma.
pub fn poisson_log_pmf(lambda: f64, ell: u64) -> f64 {
    assert!(lambda > 0.0);
    -lambda + (ell as f64) * lambda.ln() - ln_gamma(ell as f64 + 1.0)
}

/// The three expansion terms of the local Stirling form of the Poisson pmf:
/// `ln(sqrt(2 pi lambda) * pmf) = -lambda h(u) - ln(1+u)/2 + r`, returned as
/// `(-lambda h(u), -ln(1+u)/2, r)` with `u = ell/lambda - 1`.
///
/// The residual satisfies `|r| <= 1/(12 ell) + 1/(12 lambda)` for `ell >= 1`.
pub fn expansion_terms(lambda: f64, ell: u64) -> (f64, f64, f64) {
    let u = ell as f64 / lambda - 1.0;
    let t1 = -lambda * h(u);
    let t2 = -0.5 * u.ln_1p();
    let lhs = 0.5 * (2.0 * std::f64::consts::PI * lambda).ln() + poisson_log_pmf(lambda, ell);
    (t1, t2, lhs - t1 - t2)
}

/// Pointwise Poisson bound `P{W = ell} <= exp(-lambda h(u))`, `u = ell/lambda - 1`.
pub fn poisson_pmf_upper(lambda: f64, ell: u64) -> f64 {
    assert!(lambda > 0.0);
    let u = ell as f64 / lambda - 1.0;
    (-lambda * h(u)).exp()
}

/// Two-sided tail bound `P{|W - lambda| >= lambda w} <= 2 exp(-lambda h(w))`.
pub fn poisson_tail_upper(lambda: f64, w: f64) -> f64 {
    assert!(lambda > 0.0 && w >= 0.0);
    2.0 * (-lambda * h(w)).exp()
}

/// Exact exponential moment of a chi-squared variable:
/// `E exp(a X) = (1 - 2a)^{-R/2}` for `a < 1/2`, `+inf` otherwise.
pub fn chi2_exp_moment(a: f64, r_dof: u32) -> f64 {
    assert!(r_dof >= 1);
    if a >= 0.5 {
        return f64::INFINITY;
    }
    (1.0 - 2.0 * a).powf(-(r_dof as f64) / 2.0)
}
