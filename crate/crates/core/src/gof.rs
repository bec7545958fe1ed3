//! Goodness-of-fit diagnostics for the conditional law: the distribution of
//! the chi-squared statistic under conditioning, its exponential moment at
//! the subcritical tilt, and the comparison against the limiting
//! chi-squared's closed forms.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cond_dist::CondModel;
use crate::sampler::{mcmc_sampler, McmcOptions};
use crate::scalar::{chi2_exp_moment, rho, KParams};
use crate::tables;

/// How the conditional law is realized: exact enumeration of the table set
/// or a seeded Metropolis chain.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum GofMode {
    Exact,
    Mcmc { steps: u64, seed: u64 },
}

/// Summary of the conditional chi-squared diagnostics at one instance.
#[derive(Debug, Clone, Serialize)]
pub struct GofReport {
    pub k: u32,
    pub n: u64,
    pub c: f64,
    /// Tilt `J = c/(k-1)^2`.
    pub j: f64,
    /// Degrees of freedom of the reference law, `(k-1)^2`.
    pub dof: u32,
    pub mode: GofMode,
    /// Kolmogorov-Smirnov distance between the conditional law of the
    /// statistic and the chi-squared reference.
    pub ks: f64,
    /// Conditional exponential moment `E exp(J |X|^2)`.
    pub moment: f64,
    /// Standard error of the moment when sampled (batch means).
    pub moment_se: Option<f64>,
    /// The moment restricted to `|X|^2 <= delta^2 n`.
    pub truncated: f64,
    pub delta: f64,
    /// Tolerance of the normal-side comparison.
    pub theta: f64,
    /// `theta (1 - 2 theta^2 J)^{-R/2}`, the tolerance-inflated chi-squared
    /// moment; infinite when flagged divergent.
    pub normal_side: f64,
    /// Set when `2 theta^2 J >= 1`, where the reference moment diverges.
    pub divergent: bool,
    /// Number of tables (exact) or retained samples (chain).
    pub support: u64,
}

/// Kolmogorov-Smirnov distance between a weighted discrete law of statistic
/// values and the chi-squared reference: the maximal gap between the
/// reference cdf and the step cdf, checked on both sides of every atom.
fn ks_distance(values_weights: &mut [(f64, f64)], dof: u32) -> f64 {
    let chi = ChiSquared::new(dof as f64).expect("positive dof");
    values_weights.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ks = 0.0f64;
    let mut cum = 0.0;
    let mut i = 0;
    while i < values_weights.len() {
        let v = values_weights[i].0;
        let before = cum;
        // merge ties so the step is taken once per distinct value
        while i < values_weights.len() && values_weights[i].0 == v {
            cum += values_weights[i].1;
            i += 1;
        }
        let f = chi.cdf(v);
        ks = ks.max((f - before).abs()).max((f - cum).abs());
    }
    ks
}

/// Compute the conditional chi-squared diagnostics at margin `n/k` and tilt
/// `J = c/(k-1)^2`, which must be subcritical (`J < rho_k`). The truncation
/// keeps `|X|^2 <= delta^2 n`; the normal side is compared at tolerance
/// `theta`.
pub fn gof_and_moment(
    model: &CondModel,
    c: f64,
    theta: f64,
    delta: f64,
    mode: GofMode,
) -> GofReport {
    let k = model.k;
    let params = KParams::new(k);
    let j = params.j_k(c);
    assert!(
        j < rho(k),
        "tilt must be subcritical: J = {j} >= rho = {}",
        rho(k)
    );
    assert!(theta >= 1.0 && delta > 0.0);
    let dof = (k - 1) * (k - 1);
    let b_margin = (model.nu as u64 / k as u64) as u32;
    let cutoff = delta * delta * model.nu;

    let (ks, moment, moment_se, truncated, support) = match mode {
        GofMode::Exact => {
            let law = tables::cond_pmf_p2(k, b_margin).expect("margin within budget");
            let mut vw: Vec<(f64, f64)> = law
                .iter()
                .map(|(t, p)| (t.chi2_stat(), *p))
                .collect();
            let moment: f64 = vw.iter().map(|(v, p)| p * (j * v).exp()).sum();
            let truncated: f64 = vw
                .iter()
                .filter(|(v, _)| *v <= cutoff)
                .map(|(v, p)| p * (j * v).exp())
                .sum();
            let ks = ks_distance(&mut vw, dof);
            (ks, moment, None, truncated, law.len() as u64)
        }
        GofMode::Mcmc { steps, seed } => {
            let run = mcmc_sampler(model, McmcOptions::new(steps, seed));
            let stats: Vec<f64> = run.samples.iter().map(|t| t.chi2_stat()).collect();
            let m = stats.len() as f64;
            let moment = stats.iter().map(|v| (j * v).exp()).sum::<f64>() / m;
            let truncated = stats
                .iter()
                .filter(|v| **v <= cutoff)
                .map(|v| (j * v).exp())
                .sum::<f64>()
                / m;
            // batch-means standard error of the moment
            let batches = 20usize.min(stats.len().max(1));
            let batch_len = stats.len() / batches;
            let mut means = Vec::with_capacity(batches);
            for bi in 0..batches {
                let chunk = &stats[bi * batch_len..(bi + 1) * batch_len];
                let bm = chunk.iter().map(|v| (j * v).exp()).sum::<f64>() / chunk.len() as f64;
                means.push(bm);
            }
            let grand = means.iter().sum::<f64>() / batches as f64;
            let var = means
                .iter()
                .map(|x| (x - grand) * (x - grand))
                .sum::<f64>()
                / (batches as f64 - 1.0);
            let se = (var / batches as f64).sqrt();
            let weight = 1.0 / m;
            let mut vw: Vec<(f64, f64)> = stats.iter().map(|v| (*v, weight)).collect();
            let ks = ks_distance(&mut vw, dof);
            (ks, moment, Some(se), truncated, stats.len() as u64)
        }
    };

    let divergent = 2.0 * theta * theta * j >= 1.0;
    let normal_side = if divergent {
        f64::INFINITY
    } else {
        theta * chi2_exp_moment(theta * theta * j, dof)
    };

    GofReport {
        k,
        n: model.nu as u64,
        c,
        j,
        dof,
        mode,
        ks,
        moment,
        moment_se,
        truncated,
        delta,
        theta,
        normal_side,
        divergent,
        support,
    }
}
