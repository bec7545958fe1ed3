//! Samplers for the conditional law of an independent Poisson array given
//! equal margins: a Metropolis chain on the table set driven by 2x2 minor
//! moves, and a plain rejection sampler whose acceptance frequency measures
//! the conditioning probability.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cond_dist::CondModel;
use crate::tables::MarginTable;

/// A margin-`b` table built by round-robin filling: cell `(i, j)` holds
/// `b div k` plus one extra unit when `(j - i) mod k < b mod k`, which keeps
/// every row and column sum at exactly `b`.
pub fn round_robin_table(k: u32, b: u32) -> MarginTable {
    let kk = k as usize;
    let base = b / k;
    let extra = (b % k) as usize;
    let mut entries = vec![0u32; kk * kk];
    for i in 0..kk {
        for j in 0..kk {
            let shifted = (j + kk - i) % kk;
            entries[i * kk + j] = base + u32::from(shifted < extra);
        }
    }
    let t = MarginTable { k, b, entries };
    debug_assert!(t.margins_ok());
    t
}

/// One proposed 2x2 minor move: rows `i1 < i2`, columns `j1 < j2`, and a
/// sign; the `+` pattern adds at `(i1, j1)`/`(i2, j2)` and removes at
/// `(i1, j2)`/`(i2, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinorMove {
    pub i1: usize,
    pub i2: usize,
    pub j1: usize,
    pub j2: usize,
    pub plus: bool,
}

/// Outcome of applying a minor move to the current table.
enum MoveOutcome {
    /// Log of the target-density ratio new/old.
    LogRatio(f64),
    /// The move would drive a cell negative.
    Invalid,
}

/// Log ratio of the target density `1/prod l_ij!` after versus before the
/// move, or `Invalid` when a decremented cell is already zero.
fn move_log_ratio(t: &MarginTable, mv: MinorMove) -> MoveOutcome {
    let kk = t.k as usize;
    let idx = |i: usize, j: usize| i * kk + j;
    let (up1, up2, dn1, dn2) = if mv.plus {
        (idx(mv.i1, mv.j1), idx(mv.i2, mv.j2), idx(mv.i1, mv.j2), idx(mv.i2, mv.j1))
    } else {
        (idx(mv.i1, mv.j2), idx(mv.i2, mv.j1), idx(mv.i1, mv.j1), idx(mv.i2, mv.j2))
    };
    if t.entries[dn1] == 0 || t.entries[dn2] == 0 {
        return MoveOutcome::Invalid;
    }
    // 1/prod l!: an increment e -> e+1 contributes -ln(e+1), a decrement
    // e -> e-1 contributes +ln(e)
    let lr = -( (t.entries[up1] as f64 + 1.0).ln() )
        - (t.entries[up2] as f64 + 1.0).ln()
        + (t.entries[dn1] as f64).ln()
        + (t.entries[dn2] as f64).ln();
    MoveOutcome::LogRatio(lr)
}

fn apply_move(t: &mut MarginTable, mv: MinorMove) {
    let kk = t.k as usize;
    let idx = |i: usize, j: usize| i * kk + j;
    let (up1, up2, dn1, dn2) = if mv.plus {
        (idx(mv.i1, mv.j1), idx(mv.i2, mv.j2), idx(mv.i1, mv.j2), idx(mv.i2, mv.j1))
    } else {
        (idx(mv.i1, mv.j2), idx(mv.i2, mv.j1), idx(mv.i1, mv.j1), idx(mv.i2, mv.j2))
    };
    t.entries[up1] += 1;
    t.entries[up2] += 1;
    t.entries[dn1] -= 1;
    t.entries[dn2] -= 1;
}

fn draw_move<R: Rng>(rng: &mut R, k: usize) -> MinorMove {
    let i1 = rng.gen_range(0..k);
    let mut i2 = rng.gen_range(0..k - 1);
    if i2 >= i1 {
        i2 += 1;
    }
    let (i1, i2) = (i1.min(i2), i1.max(i2));
    let j1 = rng.gen_range(0..k);
    let mut j2 = rng.gen_range(0..k - 1);
    if j2 >= j1 {
        j2 += 1;
    }
    let (j1, j2) = (j1.min(j2), j1.max(j2));
    let plus = rng.gen::<bool>();
    MinorMove { i1, i2, j1, j2, plus }
}

/// Chain configuration; burn-in and thinning default to the recorded
/// reproducibility settings.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McmcOptions {
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
}

impl McmcOptions {
    pub fn new(steps: u64, seed: u64) -> Self {
        McmcOptions {
            steps,
            burn_in: 10_000,
            thin: 10,
            seed,
        }
    }
}

/// A finished chain: thinned post-burn-in samples plus move accounting.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub samples: Vec<MarginTable>,
    pub accepted: u64,
    pub rejected: u64,
    /// Proposals discarded because a cell would have gone negative.
    pub auto_rejected: u64,
    pub options: McmcOptions,
}

/// Metropolis chain on the margin-`b` tables with uniform 2x2 minor-move
/// proposals and stationary law proportional to `1/prod l_ij!`. The move
/// set connects every pair of tables with the same margins, so the chain is
/// irreducible; proposals that would drive a cell negative are counted and
/// rejected in place.
pub fn mcmc_sampler(model: &CondModel, options: McmcOptions) -> McmcRun {
    let k = model.k;
    let b = (model.nu as u64 / k as u64) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut state = round_robin_table(k, b);
    let mut samples = Vec::new();
    let mut accepted = 0u64;
    let mut rejected = 0u64;
    let mut auto_rejected = 0u64;
    for step in 0..options.steps {
        let mv = draw_move(&mut rng, k as usize);
        match move_log_ratio(&state, mv) {
            MoveOutcome::Invalid => auto_rejected += 1,
            MoveOutcome::LogRatio(lr) => {
                if lr >= 0.0 || rng.gen::<f64>() < lr.exp() {
                    apply_move(&mut state, mv);
                    accepted += 1;
                } else {
                    rejected += 1;
                }
            }
        }
        if step >= options.burn_in && (step - options.burn_in) % options.thin == 0 {
            samples.push(state.clone());
        }
    }
    McmcRun {
        samples,
        accepted,
        rejected,
        auto_rejected,
        options,
    }
}

/// Stable 64-bit key for a table (FNV-1a over the entries), for stream
/// output and visit counting.
pub fn table_hash(t: &MarginTable) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &e in &t.entries {
        for byte in e.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Total variation distance between the empirical law of `samples` and an
/// exact finite law given as (table, probability) pairs.
pub fn tv_distance(samples: &[MarginTable], exact: &[(MarginTable, f64)]) -> f64 {
    use std::collections::HashMap;
    let mut counts: HashMap<&[u32], u64> = HashMap::new();
    for s in samples {
        *counts.entry(s.entries.as_slice()).or_insert(0) += 1;
    }
    let m = samples.len() as f64;
    let mut tv = 0.0;
    let mut seen = 0u64;
    for (t, p) in exact {
        let c = counts.get(t.entries.as_slice()).copied().unwrap_or(0);
        seen += c;
        tv += (c as f64 / m - p).abs();
    }
    // mass on tables outside the reference support (none, when exact is a
    // full law on the same margin set)
    tv += (m - seen as f64) / m;
    0.5 * tv
}

/// Result of independent-array rejection sampling.
#[derive(Debug, Clone)]
pub struct RejectionRun {
    pub attempts: u64,
    pub accepts: u64,
    pub samples: Vec<MarginTable>,
}

impl RejectionRun {
    /// Empirical acceptance frequency, an estimate of the probability that
    /// the independent array lands on the margin constraint.
    pub fn acceptance_rate(&self) -> f64 {
        self.accepts as f64 / self.attempts as f64
    }

    /// Binomial standard error of the acceptance frequency.
    pub fn acceptance_se(&self) -> f64 {
        let p = self.acceptance_rate();
        (p * (1.0 - p) / self.attempts as f64).sqrt()
    }
}

fn poisson_draw<R: Rng>(rng: &mut R, lambda: f64) -> u32 {
    // CDF inversion with the pmf recurrence; fine at desk-scale means
    let u: f64 = rng.gen();
    let mut j = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let cap = (10.0 * lambda + 50.0) as u32;
    while u > cdf && j < cap {
        j += 1;
        p *= lambda / j as f64;
        cdf += p;
    }
    j
}

/// Draw `attempts` independent Poisson arrays at the model's cell mean and
/// keep those whose row and column sums all equal the margin.
pub fn rejection_sampler(model: &CondModel, attempts: u64, seed: u64) -> RejectionRun {
    let k = model.k as usize;
    let b = (model.nu as u64 / model.k as u64) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut accepts = 0u64;
    let mut entries = vec![0u32; k * k];
    for _ in 0..attempts {
        for e in entries.iter_mut() {
            *e = poisson_draw(&mut rng, model.lambda);
        }
        let ok = (0..k).all(|i| {
            (0..k).map(|j| entries[i * k + j]).sum::<u32>() == b
                && (0..k).map(|j| entries[j * k + i]).sum::<u32>() == b
        });
        if ok {
            accepts += 1;
            samples.push(MarginTable {
                k: model.k,
                b,
                entries: entries.clone(),
            });
        }
    }
    RejectionRun {
        attempts,
        accepts,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cond_dist::build_table_model;
    use crate::tables;
    use std::collections::HashSet;

    #[test]
    fn round_robin_tables_have_equal_margins() {
        for k in [2u32, 3, 4, 5] {
            for b in [1u32, 2, 3, 7, 12] {
                let t = round_robin_table(k, b);
                assert!(t.margins_ok(), "k={k} b={b}");
            }
        }
    }

    #[test]
    fn detailed_balance_on_a_single_move_pair() {
        // unnormalized target pi = 1/prod l!; the Metropolis flow
        // pi(T) min(1, r) must match the reverse flow exactly
        let t = round_robin_table(3, 4);
        let mv = MinorMove {
            i1: 0,
            i2: 1,
            j1: 0,
            j2: 1,
            plus: true,
        };
        let lr = match move_log_ratio(&t, mv) {
            MoveOutcome::LogRatio(lr) => lr,
            MoveOutcome::Invalid => panic!("move is valid"),
        };
        let mut t2 = t.clone();
        apply_move(&mut t2, mv);
        let back = MinorMove { plus: false, ..mv };
        let lr_back = match move_log_ratio(&t2, back) {
            MoveOutcome::LogRatio(lr) => lr,
            MoveOutcome::Invalid => panic!("reverse move is valid"),
        };
        assert!((lr + lr_back).abs() < 1e-12, "{lr} vs {lr_back}");
        let pi_t = (-t.log_factorial_product()).exp();
        let pi_t2 = (-t2.log_factorial_product()).exp();
        let flow = pi_t * lr.exp().min(1.0);
        let flow_back = pi_t2 * lr_back.exp().min(1.0);
        assert!(
            (flow - flow_back).abs() <= 1e-12 * flow.max(flow_back),
            "{flow} vs {flow_back}"
        );
    }

    #[test]
    fn chain_visits_every_smallest_table() {
        // margin 1: the six permutation tables form the whole state space
        let model = build_table_model(3, 3);
        let run = mcmc_sampler(&model, McmcOptions::new(200_000, 7));
        let distinct: HashSet<u64> = run.samples.iter().map(table_hash).collect();
        assert_eq!(distinct.len(), 6);
        // moves from a permutation table drive cells negative often
        assert!(run.auto_rejected > 0);
    }

    #[test]
    fn stationary_law_matches_exact_conditional() {
        let model = build_table_model(3, 6);
        let exact = tables::cond_pmf_p2(3, 2).unwrap();
        let long = mcmc_sampler(&model, McmcOptions::new(1_000_000, 11));
        let tv_long = tv_distance(&long.samples, &exact);
        assert!(tv_long <= 0.02, "{tv_long}");
        // a much shorter chain sits farther from stationarity
        let short = mcmc_sampler(&model, McmcOptions::new(20_000, 11));
        let tv_short = tv_distance(&short.samples, &exact);
        assert!(tv_long < tv_short, "{tv_long} vs {tv_short}");
        // margin 3 as well
        let model3 = build_table_model(3, 9);
        let exact3 = tables::cond_pmf_p2(3, 3).unwrap();
        let run3 = mcmc_sampler(&model3, McmcOptions::new(1_000_000, 13));
        let tv3 = tv_distance(&run3.samples, &exact3);
        assert!(tv3 <= 0.02, "{tv3}");
    }

    #[test]
    fn chains_are_reproducible_by_seed() {
        let model = build_table_model(3, 9);
        let a = mcmc_sampler(&model, McmcOptions::new(50_000, 42));
        let b = mcmc_sampler(&model, McmcOptions::new(50_000, 42));
        assert_eq!(a.accepted, b.accepted);
        let ha: Vec<u64> = a.samples.iter().map(table_hash).collect();
        let hb: Vec<u64> = b.samples.iter().map(table_hash).collect();
        assert_eq!(ha, hb);
        let c = mcmc_sampler(&model, McmcOptions::new(50_000, 43));
        let hc: Vec<u64> = c.samples.iter().map(table_hash).collect();
        assert_ne!(ha, hc);
    }

    #[test]
    fn rejection_rate_matches_conditioning_probability() {
        let model = build_table_model(3, 3);
        let run = rejection_sampler(&model, 1_000_000, 99);
        let exact = tables::prob_y_in_hk(3, 1).unwrap();
        let se = run.acceptance_se();
        assert!(
            (run.acceptance_rate() - exact).abs() <= 3.0 * se,
            "rate {} vs exact {exact} (se {se})",
            run.acceptance_rate()
        );
        for t in run.samples.iter().take(50) {
            assert!(t.margins_ok());
        }
    }

    #[test]
    fn accepted_rejection_samples_follow_the_conditional_law() {
        // conditioned on acceptance, the draws follow the factorial law;
        // margin 1 makes all six tables equally likely
        let model = build_table_model(3, 3);
        let run = rejection_sampler(&model, 2_000_000, 5);
        let exact = tables::cond_pmf_p2(3, 1).unwrap();
        let tv = tv_distance(&run.samples, &exact);
        // ~22k accepted samples: uniform-over-6 should be matched well
        assert!(run.accepts > 10_000);
        assert!(tv < 0.02, "{tv}");
    }
}
