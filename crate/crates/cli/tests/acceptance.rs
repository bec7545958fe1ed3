//! End-to-end acceptance suite: one test per shipped acceptance criterion,
//! each driving the command-line binary and/or the library exactly as the
//! criterion states and asserting at the stated tolerance.
//!
//! Two criteria are not attainable at desk scale and their tests are
//! intentionally left red rather than weakened; the failing asserts carry
//! the measured values and point at the analysis in
//! /root/notes/decisions.md (criterion 5: the c=1.2 tail slope of the
//! weighted-sum scan is still positive over B in {8..20}; criterion 7: the
//! minimal sandwich tolerance at n in {27, 54} exceeds 2).

use std::path::PathBuf;
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use condtab_core::certify::mk_inflection_brackets;
use condtab_core::cond_dist::build_table_model;
use condtab_core::enclose::{bracket_root, FnId};
use condtab_core::interval::Interval;
use condtab_core::sampler::rejection_sampler;
use condtab_core::scalar::{
    expansion_terms, m_k_d1, poisson_log_pmf, poisson_pmf_upper, poisson_tail_upper, psi,
};
use condtab_core::tables::{an_exact, an_scan, beta_n, count_hk};

/// Serializes the expensive end-to-end runs so wall-clock assertions are not
/// skewed by sibling tests saturating the machine.
static HEAVY: Mutex<()> = Mutex::new(());

fn heavy() -> std::sync::MutexGuard<'static, ()> {
    HEAVY.lock().unwrap_or_else(|p| p.into_inner())
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_condtab")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

/// Run the binary, returning (exit code, stdout).
fn run(args: &[&str]) -> (i32, String) {
    run_env(args, &[])
}

fn run_env(args: &[&str], envs: &[(&str, &str)]) -> (i32, String) {
    let mut cmd = Command::new(bin());
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    let code = out.status.code().expect("binary exits normally");
    (code, String::from_utf8_lossy(&out.stdout).into_owned())
}

fn read_json(path: &PathBuf) -> serde_json::Value {
    let text = std::fs::read_to_string(path).expect("artifact exists");
    serde_json::from_str(&text).expect("artifact is valid JSON")
}

fn read_file(path: &PathBuf) -> String {
    std::fs::read_to_string(path).expect("artifact exists")
}

/// Pull the value of a `# key: value` comment line out of a CSV artifact.
fn csv_comment_f64(text: &str, key: &str) -> f64 {
    let prefix = format!("# {key}: ");
    text.lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("artifact has a {key} line"))
        .parse()
        .expect("comment value parses")
}

// ---------------------------------------------------------------------------
// 1. certified lower bound on the rate factor
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_rate_factor_lower_bound() {
    let _g = heavy();
    let out = tmp("c1-psi.json");
    let t0 = Instant::now();
    let (code, _) = run(&["verify", "psi", "--tmax", "1e6", "--out", out.to_str().unwrap()]);
    let elapsed = t0.elapsed();
    assert_eq!(code, 0, "verify psi must exit VERIFIED");
    assert!(
        elapsed.as_secs() < 60,
        "verify psi took {elapsed:?}, budget is 60 s"
    );
    let doc = read_json(&out);
    assert_eq!(doc["results"][0]["verdict"], "verified");

    // spot margins of psi(t) - 2 log(1+2t)/(1+2t) against a 50-digit oracle
    for (t, want) in [
        (0.5, 0.1724341167380273),
        (1.0, 0.0401805297943748),
        (10.0, 0.0375824421372203),
    ] {
        let margin = psi(t) - 2.0 * (1.0 + 2.0 * t).ln() / (1.0 + 2.0 * t);
        assert!(
            (margin - want).abs() <= 1e-10,
            "margin at t={t}: {margin} vs oracle {want}"
        );
    }
}

// ---------------------------------------------------------------------------
// 2. full zero-sum inequality, certified and sampled
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_zero_sum_inequality_full_range() {
    let _g = heavy();
    let cert_out = tmp("c2-hineq.json");
    let samp_out = tmp("c2-hineq-sampled.json");
    let t0 = Instant::now();
    let (code, _) = run(&[
        "verify",
        "h-ineq",
        "--k",
        "3..64",
        "--out",
        cert_out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "certified h-ineq over k=3..64 must exit VERIFIED");
    let (code, _) = run(&[
        "verify",
        "h-ineq",
        "--k",
        "3..64",
        "--mode",
        "sampled",
        "--seed",
        "12345",
        "--out",
        samp_out.to_str().unwrap(),
    ]);
    let elapsed = t0.elapsed();
    assert_eq!(code, 0, "sampled h-ineq over k=3..64 must exit VERIFIED");
    assert!(
        elapsed.as_secs() < 300,
        "h-ineq runs took {elapsed:?}, budget is 5 min total"
    );

    let certified = read_json(&cert_out);
    assert_eq!(certified["results"].as_array().unwrap().len(), 62);
    for r in certified["results"].as_array().unwrap() {
        assert_eq!(r["verdict"], "verified");
    }
    // 1e5 random feasible points plus descents per k, fixed seed: the
    // sampled minimum must stay above -1e-12
    let sampled = read_json(&samp_out);
    let results = sampled["results"].as_array().unwrap();
    assert_eq!(results.len(), 62);
    for r in results {
        assert_eq!(r["verdict"], "verified");
        let gap = r["params"]["min_gap"].as_f64().unwrap();
        assert!(gap >= -1e-12, "sampled min gap {gap} at k={}", r["params"]["k"]);
    }
}

// ---------------------------------------------------------------------------
// 3. one-against-many margin function landmarks
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_margin_function_landmarks() {
    // upper endpoint of the k=5 dip interval and the derivative there
    let br5 = mk_inflection_brackets(5, 1e-9);
    assert_eq!(br5.len(), 2, "k=5 has exactly two inflection points");
    let b5p = br5[1].cell.midpoint();
    assert!((b5p - 2.1922).abs() <= 0.01, "b5' = {b5p}");
    assert!((b5p - 2.19225705951196).abs() <= 5e-9, "b5' drifted: {b5p}");
    let m5p = m_k_d1(b5p, 5);
    assert!((m5p - 0.055).abs() <= 0.005, "M_5'(b5') = {m5p}");

    // the dip interval is empty exactly for k in {3, 4}
    for k in 3..=64u32 {
        let br = mk_inflection_brackets(k, 1e-6);
        if k <= 4 {
            assert!(br.is_empty(), "k={k}: expected no inflection points");
        } else {
            assert_eq!(br.len(), 2, "k={k}: expected an inflection pair");
            assert!(br.iter().all(|b| b.certified), "k={k}: uncertified pair");
        }
    }

    // interior minimizer location: strictly inside (k1-2, k1-1), k1 = k-1
    for k in 6..=64u32 {
        let k1 = (k - 1) as f64;
        let roots: Vec<_> = bracket_root(FnId::MkD1 { k }, Interval::new(1e-3, k1), 1e-6)
            .into_iter()
            .filter(|b| b.certified)
            .collect();
        assert_eq!(roots.len(), 2, "k={k}: expected a max/min root pair");
        let b_star = roots[1].cell.midpoint();
        assert!(
            k1 - 2.0 < b_star && b_star < k1 - 1.0,
            "k={k}: interior minimizer {b_star} outside ({}, {})",
            k1 - 2.0,
            k1 - 1.0
        );
        if k == 6 {
            assert!((b_star - 3.46148278628747).abs() <= 1e-5, "b*_6 = {b_star}");
        }
    }
}

// ---------------------------------------------------------------------------
// 4. exact enumeration closed forms
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_enumeration_closed_forms() {
    assert_eq!(count_hk(3, 1), 6);
    assert_eq!(count_hk(3, 2), 21);
    let a = an_exact(3, 1, 1.0).unwrap();
    assert!((a - 1.5).abs() <= 1e-12, "A at B=1, c=1: {a}");
    // exact closed form 3^(5/2) * 2 e^{-3} / 9; the published target decimal
    // 0.172513 disagrees with it in the fifth decimal (a transcription slip,
    // see /root/notes/decisions.md), so the exact value is pinned instead
    let b = beta_n(3, 1).unwrap();
    assert!((b - 0.1724674639460913).abs() <= 1e-12, "beta at B=1: {b}");
}

// ---------------------------------------------------------------------------
// 5. weighted-sum growth trend at sub- and super-threshold weights
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_weighted_sum_tail_trend() {
    let _g = heavy();
    let out_a = tmp("c5-an-12.csv");
    let out_b = tmp("c5-an-16.csv");
    let t0 = Instant::now();
    let (code, _) = run(&[
        "scan", "an", "--k", "3", "--c", "1.2", "--B", "8..20",
        "--out", out_a.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let (code, _) = run(&[
        "scan", "an", "--k", "3", "--c", "1.6", "--B", "8..20",
        "--out", out_b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "scans took {elapsed:?}, budget 2 min"
    );
    assert_eq!(read_file(&out_a).lines().count(), 16, "13 rows + 3 header lines");

    let slope_high = an_scan(3, 1.6, 8..=20).unwrap().tail_slope;
    assert!(slope_high > 0.0, "c=1.6 tail slope must be positive: {slope_high}");

    let slope_low = an_scan(3, 1.2, 8..=20).unwrap().tail_slope;
    // Intentionally red at desk scale: the fitted slope is still
    // +3.3154543093164815e-3 per unit n on this window because the
    // sub-exponential prefactor dominates for n <= 60; the turnover lies
    // beyond the exact enumeration budget. Analysis: /root/notes/decisions.md.
    assert!(
        slope_low <= 0.0,
        "c=1.2 tail slope over B=8..20 is {slope_low} (> 0); not attainable at \
         enumerable sizes, see /root/notes/decisions.md"
    );
}

// ---------------------------------------------------------------------------
// 6. pointwise and tail bounds versus exact Poisson values
// ---------------------------------------------------------------------------

#[test]
fn criterion_06_poisson_bound_suite() {
    // pointwise pmf bound dominates on wide grids, zero violations
    for lam in [1.0f64, 4.0, 25.0, 100.0] {
        let lmax = (lam + 40.0 * lam.sqrt() + 200.0) as u64;
        for ell in 0..=lmax {
            let pmf = poisson_log_pmf(lam, ell).exp();
            let bound = poisson_pmf_upper(lam, ell);
            assert!(
                pmf <= bound * (1.0 + 1e-12),
                "pmf bound violated at lambda={lam}, ell={ell}: {pmf} > {bound}"
            );
        }
        // two-sided tail bound dominates the exact tail mass on a w grid;
        // the enumeration is truncated at lmax, and the mass above lmax is
        // itself covered by the same bound evaluated at the cut
        let rem = poisson_tail_upper(lam, lmax as f64 / lam - 1.0);
        for i in 1..=30 {
            let w = 0.1 * i as f64;
            let mut exact = 0.0;
            for ell in 0..=lmax {
                if (ell as f64 - lam).abs() >= lam * w {
                    exact += poisson_log_pmf(lam, ell).exp();
                }
            }
            let bound = poisson_tail_upper(lam, w);
            assert!(
                exact + rem <= bound * (1.0 + 1e-12),
                "tail bound violated at lambda={lam}, w={w}: {exact} > {bound}"
            );
        }
    }

    // local expansion residual bracket on |u| <= 0.5
    for lam in [10.0f64, 100.0, 1000.0] {
        let lo = (0.5 * lam).ceil() as u64;
        let hi = (1.5 * lam).floor() as u64;
        for ell in lo..=hi {
            let (_, _, r) = expansion_terms(lam, ell);
            let cap = 1.0 / (12.0 * ell as f64) + 1.0 / (12.0 * lam);
            assert!(
                r.abs() <= cap * (1.0 + 1e-10),
                "residual bracket violated at lambda={lam}, ell={ell}: |{r}| > {cap}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// 7. two-sided box sandwich at desk scale
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_box_sandwich_desk_scale() {
    let _g = heavy();
    let out27 = tmp("c7-sandwich-27.json");
    let out54 = tmp("c7-sandwich-54.json");
    let (code, _) = run(&["sandwich", "--k", "3", "--n", "27", "--out", out27.to_str().unwrap()]);
    assert_eq!(code, 0, "sandwich search at n=27 must complete");
    let (code, _) = run(&["sandwich", "--k", "3", "--n", "54", "--out", out54.to_str().unwrap()]);
    assert_eq!(code, 0, "sandwich search at n=54 must complete");

    let r27 = read_json(&out27)["report"].clone();
    let r54 = read_json(&out54)["report"].clone();
    let m27 = r27["min_theta"].as_f64().unwrap();
    let m54 = r54["min_theta"].as_f64().unwrap();
    assert!(m27.is_finite() && m54.is_finite());
    assert!((m27 - 2.477110741).abs() <= 1e-6, "minimal tolerance at n=27 drifted: {m27}");
    assert!((m54 - 2.061443967).abs() <= 1e-6, "minimal tolerance at n=54 drifted: {m54}");

    // the minimal passing tolerance improves with size
    assert!(m54 <= m27, "expected improvement with n: {m54} vs {m27}");

    // the whole-window mass ratio sits inside the found tolerance band
    for (name, r) in [("n=27", &r27), ("n=54", &r54)] {
        assert_eq!(r["all_pass"], true, "{name}: rows at the found tolerance");
        let theta = r["theta"].as_f64().unwrap();
        let ratio = r["hyperplane_ratio"].as_f64().unwrap();
        assert!(
            1.0 / theta <= ratio && ratio <= theta,
            "{name}: window ratio {ratio} outside [1/{theta}, {theta}]"
        );
    }

    // Intentionally red at desk scale: the corner boxes need tolerance
    // 2.4771 (n=27) and 2.0614 (n=54); the local-limit error decays like
    // n^{-1/2} and first reaches 2 past n ~ 100, beyond the exact-mass
    // enumeration budget. Analysis: /root/notes/decisions.md.
    assert!(
        m27 <= 2.0 && m54 <= 2.0,
        "minimal sandwich tolerance (n=27: {m27}, n=54: {m54}) exceeds 2; not \
         attainable at these sizes, see /root/notes/decisions.md"
    );
}

// ---------------------------------------------------------------------------
// 8. sampler correctness: chain law and rejection acceptance rate
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_sampler_correctness() {
    let _g = heavy();
    let out = tmp("c8-sample.csv");
    let (code, _) = run(&[
        "sample", "--k", "3", "--B", "2", "--steps", "1e6", "--seed", "7",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let tv = csv_comment_f64(&read_file(&out), "tv_distance");
    assert!(tv <= 0.02, "chain law vs exact law: tv = {tv}");

    // rejection acceptance rate at the smallest instance
    let model = build_table_model(3, 3);
    let run = rejection_sampler(&model, 1_000_000, 99);
    let rate = run.acceptance_rate();
    let se = run.acceptance_se();
    assert!(
        (rate - 0.0110665).abs() <= 3.0 * se,
        "acceptance rate {rate} more than 3 SE ({se}) from 0.0110665"
    );
}

// ---------------------------------------------------------------------------
// 9. goodness of fit: shrinking distance and the exact moment
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_gof_distance_and_moment() {
    let _g = heavy();
    // chain-sampled distance to the limiting law decreases along n = 27, 54, 108
    let mut ks = Vec::new();
    for (b, seed) in [(9u32, 101u64), (18, 102), (36, 103)] {
        let out = tmp(&format!("c9-gof-{b}.json"));
        let (code, _) = run(&[
            "gof", "--k", "3", "--B", &b.to_string(), "--c", "1.0",
            "--mode", "mcmc", "--steps", "1010000", "--seed", &seed.to_string(),
            "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        ks.push(read_json(&out)["report"]["ks"].as_f64().unwrap());
    }
    assert!(
        ks[0] > ks[1] && ks[1] > ks[2],
        "distance must shrink along n=27,54,108: {ks:?}"
    );

    // single-atom instance: the exponential moment has a closed form
    let out = tmp("c9-gof-exact.json");
    let (code, _) = run(&[
        "gof", "--k", "3", "--B", "1", "--c", "1.0", "--mode", "exact",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let moment = read_json(&out)["report"]["moment"].as_f64().unwrap();
    assert!(
        (moment - 1.5f64.exp()).abs() <= 1e-12,
        "exact moment {moment} vs e^1.5"
    );
}

// ---------------------------------------------------------------------------
// 10. determinism: byte-identical artifacts across reruns and thread counts
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_artifacts_are_byte_identical() {
    let _g = heavy();
    // full-size reruns of each criterion command except the n=54 sandwich
    // search, which shares its entire code path with the n=27 run below
    let cases: &[(&str, &[&str])] = &[
        ("psi", &["verify", "psi", "--tmax", "1e6"]),
        ("hineq", &["verify", "h-ineq", "--k", "3..64"]),
        (
            "hineq-sampled",
            &["verify", "h-ineq", "--k", "3..64", "--mode", "sampled", "--seed", "12345"],
        ),
        ("mk", &["verify", "mk", "--k", "3..12"]),
        ("scan-an-low", &["scan", "an", "--k", "3", "--c", "1.2", "--B", "8..20"]),
        ("scan-an-high", &["scan", "an", "--k", "3", "--c", "1.6", "--B", "8..20"]),
        ("scan-beta", &["scan", "beta", "--k", "3", "--B", "1..20"]),
        (
            "scan-tailsum",
            &["scan", "tailsum", "--k", "3", "--c", "1.2", "--B", "2..6", "--delta", "1.2"],
        ),
        ("scan-chain", &["scan", "chain", "--k", "3", "--c", "1.0", "--B", "1..12"]),
        ("sample", &["sample", "--k", "3", "--B", "2", "--steps", "1e6", "--seed", "7"]),
        ("gof-exact", &["gof", "--k", "3", "--B", "1", "--c", "1.0", "--mode", "exact"]),
        (
            "gof-mcmc",
            &["gof", "--k", "3", "--B", "9", "--c", "1.0", "--mode", "mcmc",
              "--steps", "1010000", "--seed", "101"],
        ),
        ("plot-mk", &["plot-mk", "--k", "3,5,6", "--b-step", "0.05"]),
    ];
    for (name, args) in cases {
        let a = tmp(&format!("c10-{name}-a"));
        let b = tmp(&format!("c10-{name}-b"));
        let mut args_a = args.to_vec();
        args_a.extend(["--out", a.to_str().unwrap()]);
        let mut args_b = args.to_vec();
        args_b.extend(["--out", b.to_str().unwrap()]);
        let (code_a, _) = run(&args_a);
        let (code_b, _) = run(&args_b);
        assert_eq!(code_a, code_b, "{name}: exit codes differ between reruns");
        let bytes_a = std::fs::read(&a).expect("first artifact");
        let bytes_b = std::fs::read(&b).expect("second artifact");
        assert!(bytes_a == bytes_b, "{name}: artifacts differ between reruns");
    }

    // the parallel box sweep must not leak thread count into the artifact
    let a = tmp("c10-sandwich-t1");
    let b = tmp("c10-sandwich-t3");
    let (code_a, _) = run_env(
        &["sandwich", "--k", "3", "--n", "27", "--out", a.to_str().unwrap()],
        &[("RAYON_NUM_THREADS", "1")],
    );
    let (code_b, _) = run_env(
        &["sandwich", "--k", "3", "--n", "27", "--out", b.to_str().unwrap()],
        &[("RAYON_NUM_THREADS", "3")],
    );
    assert_eq!(code_a, 0);
    assert_eq!(code_b, 0);
    let bytes_a = std::fs::read(&a).expect("first artifact");
    let bytes_b = std::fs::read(&b).expect("second artifact");
    assert!(
        bytes_a == bytes_b,
        "sandwich artifacts differ across thread counts"
    );
}
