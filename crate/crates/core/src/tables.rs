//! Exact enumeration of square count tables with equal row and column margins
//! and the finite-size quantities built on them: the scaled weighted sum
//! `A_n(c)`, the hyperplane-hit probability and its scaling `beta_n`, the
//! conditional table distribution, the bound-chain diagnostic, and dyadic
//! tail sums.
//!
//! Everything here is exact combinatorics evaluated in log space; no sampling
//! and no asymptotic extrapolation. Enumeration order is lexicographic by
//! rows, so all streams (and therefore all reductions) are deterministic.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::numeric::{log_sum_exp, ls_slope, neumaier_sum};
use crate::scalar;

/// Hard cap on the number of tables any enumerating operation will visit.
/// The dynamic-programming counter runs first; anything larger is refused.
pub const MAX_TABLES: u128 = 100_000_000;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("enumeration budget exceeded: {estimated} tables (limit {limit})")]
    BudgetExceeded { estimated: u128, limit: u128 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

// ---------------------------------------------------------------------------
// domain types
// ---------------------------------------------------------------------------

/// A `k x k` matrix of naturals whose every row and column sums to the common
/// margin `b`. The total count is `n = k * b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarginTable {
    pub k: u32,
    pub b: u32,
    /// Row-major entries, length `k * k`.
    pub entries: Vec<u32>,
}

impl MarginTable {
    pub fn n(&self) -> u64 {
        self.k as u64 * self.b as u64
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.entries[i * self.k as usize + j]
    }

    /// True when every row and column sums to the common margin.
    pub fn margins_ok(&self) -> bool {
        let k = self.k as usize;
        if self.entries.len() != k * k {
            return false;
        }
        for i in 0..k {
            let row: u32 = (0..k).map(|j| self.get(i, j)).sum();
            let col: u32 = (0..k).map(|j| self.get(j, i)).sum();
            if row != self.b || col != self.b {
                return false;
            }
        }
        true
    }

    /// Sum of squared entries.
    pub fn sum_sq(&self) -> u64 {
        self.entries.iter().map(|&e| e as u64 * e as u64).sum()
    }

    /// `log(prod_ij entry_ij!)`, the log factorial product in the multinomial
    /// weight and the Poisson pmf.
    pub fn log_factorial_product(&self) -> f64 {
        let terms: Vec<f64> = self
            .entries
            .iter()
            .map(|&e| ln_gamma(e as f64 + 1.0))
            .collect();
        neumaier_sum(&terms)
    }

    /// The goodness-of-fit statistic `|X|^2 = -n + (k^2/n) * sum entries^2`
    /// for cell means `n/k^2`.
    pub fn chi2_stat(&self) -> f64 {
        let n = self.n() as f64;
        let k2 = (self.k as f64) * (self.k as f64);
        -n + k2 / n * self.sum_sq() as f64
    }

    /// The bracket `1 - 2/k + sum (entry/n)^2` appearing inside the weighted
    /// sum; always at least `(1 - 1/k)^2`, with equality at the flat table.
    pub fn bracket(&self) -> f64 {
        let n = self.n() as f64;
        let k = self.k as f64;
        1.0 - 2.0 / k + self.sum_sq() as f64 / (n * n)
    }

    /// Relative deviations `u_ij = entry_ij * k^2 / n - 1` from the flat
    /// table; each row and column of `u` sums to zero and `-1 <= u <= k-1`.
    pub fn u_matrix(&self) -> Vec<f64> {
        let n = self.n() as f64;
        let k2 = (self.k as f64) * (self.k as f64);
        self.entries.iter().map(|&e| e as f64 * k2 / n - 1.0).collect()
    }
}

/// One enumerated table together with the two scalars the weighted sum needs.
#[derive(Debug, Clone)]
pub struct AnTerm {
    pub table: MarginTable,
    /// `log(n!/prod entries!)`.
    pub log_weight: f64,
    /// `1 - 2/k + sum (entry/n)^2`.
    pub bracket: f64,
}

/// A sweep of one scalar quantity over a range of margins.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub c: f64,
    /// `(n, value)` pairs in increasing `n`.
    pub rows: Vec<(u64, f64)>,
    pub max: f64,
    pub argmax: u64,
    /// Least-squares slope of `log value` against `n` across the scanned
    /// window; callers choose the window to isolate the tail of interest.
    pub tail_slope: f64,
}

// ---------------------------------------------------------------------------
// enumeration and counting
// ---------------------------------------------------------------------------

/// Count tables by dynamic programming over residual column capacities,
/// one row at a time. States are canonicalized by sorting (the count of
/// completions depends only on the multiset of capacities), which keeps the
/// table polynomial in the margin for fixed `k`.
pub fn count_hk(k: u32, b: u32) -> u128 {
    assert!(k >= 2, "tables need at least two rows");
    let kk = k as usize;
    let mut states: HashMap<Vec<u32>, u128> = HashMap::new();
    states.insert(vec![b; kk], 1);
    for _row in 0..k {
        let mut next: HashMap<Vec<u32>, u128> = HashMap::new();
        for (caps, ways) in &states {
            let mut row = vec![0u32; kk];
            fill_count_row(b, 0, caps, &mut row, *ways, &mut next);
        }
        states = next;
    }
    *states.get(&vec![0u32; kk]).unwrap_or(&0)
}

fn fill_count_row(
    remaining: u32,
    j: usize,
    caps: &[u32],
    row: &mut [u32],
    ways: u128,
    next: &mut HashMap<Vec<u32>, u128>,
) {
    let k = caps.len();
    if j == k - 1 {
        if remaining <= caps[j] {
            row[j] = remaining;
            let mut new_caps: Vec<u32> = caps.iter().zip(row.iter()).map(|(c, r)| c - r).collect();
            new_caps.sort_unstable();
            *next.entry(new_caps).or_insert(0) += ways;
        }
        return;
    }
    // prune: the suffix capacity must absorb the remaining row total
    let suffix: u32 = caps[j..].iter().sum();
    if remaining > suffix {
        return;
    }
    let top = remaining.min(caps[j]);
    for e in 0..=top {
        row[j] = e;
        fill_count_row(remaining - e, j + 1, caps, row, ways, next);
    }
}

/// Stream every table with the given shape in lexicographic row order,
/// checking the budget first. Returns the number of tables visited.
pub fn for_each_table<F: FnMut(&MarginTable)>(k: u32, b: u32, mut visit: F) -> Result<u128, TableError> {
    if k < 2 {
        return Err(TableError::Parameter(format!("k = {k} < 2")));
    }
    let estimated = count_hk(k, b);
    if estimated > MAX_TABLES {
        return Err(TableError::BudgetExceeded {
            estimated,
            limit: MAX_TABLES,
        });
    }
    let kk = k as usize;
    let mut rem = vec![b; kk];
    let mut entries = Vec::with_capacity(kk * kk);
    let mut count = 0u128;
    fill_tables(k, b, 0, &mut rem, &mut entries, &mut |t| {
        count += 1;
        visit(t);
    });
    debug_assert_eq!(count, estimated);
    Ok(count)
}

fn fill_tables<F: FnMut(&MarginTable)>(
    k: u32,
    b: u32,
    row: u32,
    rem: &mut [u32],
    entries: &mut Vec<u32>,
    emit: &mut F,
) {
    let kk = k as usize;
    if row == k - 1 {
        // the last row is forced by the residual column sums
        if rem.iter().any(|&r| r > b) {
            return;
        }
        let base = entries.len();
        entries.extend_from_slice(rem);
        let table = MarginTable {
            k,
            b,
            entries: entries.clone(),
        };
        debug_assert!(table.margins_ok());
        emit(&table);
        entries.truncate(base);
        return;
    }
    let mut row_buf = vec![0u32; kk];
    fill_row_then_recurse(k, b, row, b, 0, rem, &mut row_buf, entries, emit);
}

#[allow(clippy::too_many_arguments)]
fn fill_row_then_recurse<F: FnMut(&MarginTable)>(
    k: u32,
    b: u32,
    row: u32,
    remaining: u32,
    j: usize,
    rem: &mut [u32],
    row_buf: &mut [u32],
    entries: &mut Vec<u32>,
    emit: &mut F,
) {
    let kk = k as usize;
    if j == kk - 1 {
        if remaining > rem[j] {
            return;
        }
        row_buf[j] = remaining;
        let base = entries.len();
        entries.extend_from_slice(row_buf);
        for (r, e) in rem.iter_mut().zip(row_buf.iter()) {
            *r -= e;
        }
        fill_tables(k, b, row + 1, rem, entries, emit);
        for (r, e) in rem.iter_mut().zip(row_buf.iter()) {
            *r += e;
        }
        entries.truncate(base);
        return;
    }
    let suffix: u32 = rem[j..].iter().sum();
    if remaining > suffix {
        return;
    }
    let top = remaining.min(rem[j]);
    for e in 0..=top {
        row_buf[j] = e;
        fill_row_then_recurse(k, b, row, remaining - e, j + 1, rem, row_buf, entries, emit);
    }
}

/// Materialize the stream (small shapes only; the budget still applies).
pub fn enumerate_hk(k: u32, b: u32) -> Result<Vec<MarginTable>, TableError> {
    let mut out = Vec::new();
    for_each_table(k, b, |t| out.push(t.clone()))?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// the weighted sum A_n(c)
// ---------------------------------------------------------------------------

fn require_positive_margin(k: u32, b: u32) -> Result<(), TableError> {
    if k < 2 {
        return Err(TableError::Parameter(format!("k = {k} < 2")));
    }
    if b == 0 {
        return Err(TableError::Parameter("margin must be positive".into()));
    }
    Ok(())
}

/// `log A_n(c)` assembled from the streamed log-sum-exp of the per-table
/// terms. `lse` is `log sum_tables exp(log_weight + n c log bracket)`.
fn an_log_from_lse(k: u32, b: u32, c: f64, lse: f64) -> f64 {
    let n = (k as u64 * b as u64) as f64;
    let k_f = k as f64;
    (k_f - 1.0) * n.ln() - 2.0 * n * k_f.ln() - 2.0 * n * c * (1.0 - 1.0 / k_f).ln() + lse
}

/// Exact `A_n(c)` with `n = k b`, evaluated in log space over the streamed
/// enumeration (running max-shifted accumulation, so memory stays flat).
pub fn an_exact(k: u32, b: u32, c: f64) -> Result<f64, TableError> {
    require_positive_margin(k, b)?;
    let n = (k as u64 * b as u64) as f64;
    let log_n_fact = ln_gamma(n + 1.0);
    let mut m = f64::NEG_INFINITY;
    let mut s = 0.0f64;
    for_each_table(k, b, |t| {
        let x = log_n_fact - t.log_factorial_product() + n * c * t.bracket().ln();
        if x > m {
            s = s * (m - x).exp() + 1.0;
            m = x;
        } else {
            s += (x - m).exp();
        }
    })?;
    Ok(an_log_from_lse(k, b, c, m + s.ln()).exp())
}

/// The per-table terms of the weighted sum (small shapes only).
pub fn an_terms(k: u32, b: u32) -> Result<Vec<AnTerm>, TableError> {
    require_positive_margin(k, b)?;
    let n = (k as u64 * b as u64) as f64;
    let log_n_fact = ln_gamma(n + 1.0);
    let mut out = Vec::new();
    for_each_table(k, b, |t| {
        out.push(AnTerm {
            table: t.clone(),
            log_weight: log_n_fact - t.log_factorial_product(),
            bracket: t.bracket(),
        });
    })?;
    Ok(out)
}

/// `A_n(c)` recomputed from explicit terms in the order given; used to check
/// that the reduction is insensitive to enumeration order.
pub fn an_from_terms(k: u32, b: u32, c: f64, terms: &[AnTerm]) -> f64 {
    let n = (k as u64 * b as u64) as f64;
    let logs: Vec<f64> = terms
        .iter()
        .map(|t| t.log_weight + n * c * t.bracket.ln())
        .collect();
    an_log_from_lse(k, b, c, log_sum_exp(&logs)).exp()
}

// ---------------------------------------------------------------------------
// hyperplane-hit probability and the conditional distribution
// ---------------------------------------------------------------------------

/// Exact `P{Y in H_k}` for iid Poisson(`n/k^2`) cells: the probability that
/// the k x k array lands on the equal-margins hyperplane set.
pub fn prob_y_in_hk(k: u32, b: u32) -> Result<f64, TableError> {
    require_positive_margin(k, b)?;
    let n = (k as u64 * b as u64) as f64;
    let k2 = (k as f64) * (k as f64);
    // every table contributes e^{-n} (n/k^2)^n / prod entries!, so the
    // table-dependent part is just the factorial product
    let mut m = f64::NEG_INFINITY;
    let mut s = 0.0f64;
    for_each_table(k, b, |t| {
        let x = -t.log_factorial_product();
        if x > m {
            s = s * (m - x).exp() + 1.0;
            m = x;
        } else {
            s += (x - m).exp();
        }
    })?;
    let log_p = -n + n * (n / k2).ln() + m + s.ln();
    Ok(log_p.exp())
}

/// `beta_n = n^{(2k-1)/2} P{Y in H_k}`, the scaling under which the
/// hyperplane-hit probability approaches a positive constant.
pub fn beta_n(k: u32, b: u32) -> Result<f64, TableError> {
    let p = prob_y_in_hk(k, b)?;
    let n = (k as u64 * b as u64) as f64;
    Ok(n.powf((2.0 * k as f64 - 1.0) / 2.0) * p)
}

/// The conditional distribution of the Poisson array given that it lands on
/// the hyperplane set: `p2(table) ∝ 1/prod entries!` (the common Poisson
/// prefactor cancels). Returned in enumeration order; probabilities sum to 1.
pub fn cond_pmf_p2(k: u32, b: u32) -> Result<Vec<(MarginTable, f64)>, TableError> {
    require_positive_margin(k, b)?;
    let mut tables = Vec::new();
    let mut logs = Vec::new();
    for_each_table(k, b, |t| {
        tables.push(t.clone());
        logs.push(-t.log_factorial_product());
    })?;
    let z = log_sum_exp(&logs);
    Ok(tables
        .into_iter()
        .zip(logs)
        .map(|(t, l)| (t, (l - z).exp()))
        .collect())
}

// ---------------------------------------------------------------------------
// the bound chain
// ---------------------------------------------------------------------------

/// The three quantities in the chain that dominates the weighted sum, plus
/// the leading constant linking the first two.
#[derive(Debug, Clone)]
pub struct BoundChain {
    pub k: u32,
    pub b: u32,
    pub c: f64,
    /// Exact `A_n(c)`.
    pub an: f64,
    /// `(1-1/k)^{-2nc} * E2[ bracket^{nc} ]` under the conditional law.
    pub bound1: f64,
    /// `E2[ exp(J_k |X|^2) ]` with `J_k = c/(k-1)^2`.
    pub expmoment: f64,
    /// `an / bound1`, the empirically observed leading constant. It equals
    /// `n! beta_n e^n / n^{n+1/2}` exactly and approaches `sqrt(2 pi)` times
    /// the limiting `beta` by Stirling.
    pub ratio: f64,
}

/// Compute the chain `A_n(c)`, the conditional-expectation bound it is a
/// constant multiple of, and the exponential-moment bound that dominates the
/// latter pointwise. The constant is reported, never assumed.
pub fn bound_chain_check(k: u32, b: u32, c: f64) -> Result<BoundChain, TableError> {
    require_positive_margin(k, b)?;
    let n = (k as u64 * b as u64) as f64;
    let k_f = k as f64;
    let j_k = c / ((k_f - 1.0) * (k_f - 1.0));

    // pass 1: conditional normalizer
    let mut logs = Vec::new();
    for_each_table(k, b, |t| logs.push(-t.log_factorial_product()))?;
    let z = log_sum_exp(&logs);

    // pass 2: both conditional expectations
    let mut bracket_logs = Vec::with_capacity(logs.len());
    let mut moment_logs = Vec::with_capacity(logs.len());
    for_each_table(k, b, |t| {
        let lp2 = -t.log_factorial_product() - z;
        bracket_logs.push(lp2 + n * c * t.bracket().ln());
        moment_logs.push(lp2 + j_k * t.chi2_stat());
    })?;
    let bound1 = (-2.0 * n * c * (1.0 - 1.0 / k_f).ln() + log_sum_exp(&bracket_logs)).exp();
    let expmoment = log_sum_exp(&moment_logs).exp();
    let an = an_exact(k, b, c)?;
    Ok(BoundChain {
        k,
        b,
        c,
        an,
        bound1,
        expmoment,
        ratio: an / bound1,
    })
}

// ---------------------------------------------------------------------------
// dyadic tail sums
// ---------------------------------------------------------------------------

/// One dyadic shell of deviation norms: tables with
/// `2^exponent * k * delta < |u| <= 2^{exponent+1} * k * delta`.
#[derive(Debug, Clone)]
pub struct ShellRow {
    pub exponent: u32,
    pub count: u128,
    /// The crude cardinality scale `(n 2^exponent)^{k^2}` the counts are
    /// compared against.
    pub order: f64,
}

/// The exact tail sum, its target budget, and the closed-form comparison
/// series that dominates it.
#[derive(Debug, Clone)]
pub struct TailSum {
    pub k: u32,
    pub b: u32,
    pub c: f64,
    pub delta: f64,
    /// `sum over |u| > k delta of exp((n/k^2) sum_ij (J_k u^2 - h(u)))`.
    pub lhs: f64,
    /// The decay target `n^{-(2k-1)/2}`.
    pub budget: f64,
    pub ratio: f64,
    /// `n^{k^2} * sum_m exp(k^2 m - n eps0 4^m)` with
    /// `eps0 = (rho_k - J_k)/k^2`.
    pub comparison: f64,
    pub shells: Vec<ShellRow>,
}

/// Exact evaluation of the extreme-deviation tail sum over enumerated
/// tables, with the dyadic-shell bookkeeping used to dominate it.
///
/// Requires `c < (k-1) log(k-1)` so that the per-cell exponent is strictly
/// negative away from the flat table.
pub fn tail_sum_check(k: u32, b: u32, c: f64, delta: f64) -> Result<TailSum, TableError> {
    require_positive_margin(k, b)?;
    if delta <= 0.0 {
        return Err(TableError::Parameter("delta must be positive".into()));
    }
    let k_f = k as f64;
    let threshold = (k_f - 1.0) * (k_f - 1.0).ln();
    if c >= threshold {
        return Err(TableError::Parameter(format!(
            "c = {c} >= (k-1) log(k-1) = {threshold}; the tail exponent is not negative"
        )));
    }
    let n = (k as u64 * b as u64) as f64;
    let k2 = k_f * k_f;
    let j_k = c / ((k_f - 1.0) * (k_f - 1.0));
    let rho = scalar::rho(k);
    let eps0 = (rho - j_k) / k2;

    let cut = k_f * delta;
    let mut terms: Vec<f64> = Vec::new();
    let mut shell_counts: HashMap<u32, u128> = HashMap::new();
    for_each_table(k, b, |t| {
        let u = t.u_matrix();
        let norm_sq: f64 = u.iter().map(|&x| x * x).sum();
        let norm = norm_sq.sqrt();
        if norm <= cut {
            return;
        }
        let exponent: f64 = u.iter().map(|&x| j_k * x * x - scalar::h(x)).sum();
        terms.push((n / k2 * exponent).exp());
        let shell = ((norm / cut).log2().ceil() - 1.0).max(0.0) as u32;
        *shell_counts.entry(shell).or_insert(0) += 1;
    })?;
    let lhs = neumaier_sum(&terms);
    let budget = n.powf(-(2.0 * k_f - 1.0) / 2.0);

    // closed-form dominating series; terms die doubly exponentially
    let mut comp_terms = Vec::new();
    for m in 0u32.. {
        let t = (k2 * m as f64 - n * eps0 * 4.0f64.powi(m as i32)).exp();
        if t < 1e-300 && m > 0 {
            break;
        }
        comp_terms.push(t);
        if m > 200 {
            break;
        }
    }
    let comparison = n.powf(k2) * neumaier_sum(&comp_terms);

    let mut shells: Vec<ShellRow> = shell_counts
        .into_iter()
        .map(|(exponent, count)| ShellRow {
            exponent,
            count,
            order: (n * 2.0f64.powi(exponent as i32)).powf(k2),
        })
        .collect();
    shells.sort_by_key(|s| s.exponent);

    Ok(TailSum {
        k,
        b,
        c,
        delta,
        lhs,
        budget,
        ratio: lhs / budget,
        comparison,
        shells,
    })
}

// ---------------------------------------------------------------------------
// scans and the CSV contract
// ---------------------------------------------------------------------------

/// `A_n(c)` over a contiguous range of margins, with the trend summary.
pub fn an_scan(k: u32, c: f64, b_range: RangeInclusive<u32>) -> Result<ScanResult, TableError> {
    let mut rows = Vec::new();
    for b in b_range {
        let n = k as u64 * b as u64;
        rows.push((n, an_exact(k, b, c)?));
    }
    if rows.len() < 2 {
        return Err(TableError::Parameter("scan needs at least two margins".into()));
    }
    let (mut max, mut argmax) = (f64::NEG_INFINITY, 0u64);
    for &(n, v) in &rows {
        if v > max {
            max = v;
            argmax = n;
        }
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(n, v)| (n as f64, v.ln())).collect();
    let tail_slope = ls_slope(&pts);
    Ok(ScanResult {
        c,
        rows,
        max,
        argmax,
        tail_slope,
    })
}

/// Fixed column contract for machine-readable scan output.
pub const CSV_HEADER: &str = "n,B,c,A_n,beta_n,bound1,expmoment,ratio";

/// One CSV row per margin: the weighted sum, the hyperplane scaling, and the
/// full bound chain, formatted with full float precision.
pub fn chain_report_csv(k: u32, c: f64, b_range: RangeInclusive<u32>) -> Result<String, TableError> {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for b in b_range {
        let chain = bound_chain_check(k, b, c)?;
        let beta = beta_n(k, b)?;
        let n = k as u64 * b as u64;
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            n, b, c, chain.an, beta, chain.bound1, chain.expmoment, chain.ratio
        ));
    }
    Ok(out)
}
