//! Command-line behavior: flag validation, artifact/header discipline, and
//! exit codes, on parameters small enough to run quickly.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_condtab")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin()).args(args).output().expect("binary runs");
    (
        out.status.code().expect("binary exits normally"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

// ---------------------------------------------------------------------------
// usage errors: exit 64, nothing written, nothing printed on stdout
// ---------------------------------------------------------------------------

#[test]
fn rejects_bad_parameters_without_writing() {
    let cases: &[&[&str]] = &[
        &["verify", "mk", "--k", "2"],                          // below domain
        &["verify", "gk"],                                      // missing k
        &["verify", "mk", "--k", "9..3"],                       // empty range
        &["scan", "tailsum", "--k", "3", "--B", "2..4"],        // missing delta
        &["scan", "an", "--k", "3", "--B", "0..4"],             // zero margin
        &["sandwich", "--k", "3", "--n", "28"],                 // 9 does not divide 28
        &["sandwich", "--k", "3", "--n", "27", "--theta", "0.5"], // tolerance below 1
        &["sandwich", "--k", "4", "--n", "16"],                 // window too high-dimensional
        &["gof", "--k", "3", "--B", "2", "--c", "1.4", "--mode", "exact"], // supercritical
        &["sample", "--k", "3", "--B", "2", "--steps", "100", "--seed", "1"], // below burn-in
        &["plot-mk", "--k", "2,5"],                             // k below domain
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = tmp(&format!("usage-{i}.out"));
        let mut full = args.to_vec();
        full.extend(["--out", out.to_str().unwrap()]);
        let (code, stdout, stderr) = run(&full);
        assert_eq!(code, 64, "case {args:?} must be a usage error (stderr: {stderr})");
        assert!(stdout.is_empty(), "case {args:?} printed a verdict: {stdout}");
        assert!(!out.exists(), "case {args:?} wrote an artifact");
    }
}

// ---------------------------------------------------------------------------
// artifact headers: config echo and matching content hash
// ---------------------------------------------------------------------------

#[test]
fn csv_header_embeds_config_and_hash() {
    let out = tmp("hdr-scan.csv");
    let (code, _, _) = run(&[
        "scan", "an", "--k", "3", "--c", "1.0", "--B", "1..3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();

    let config_line = lines.next().unwrap();
    let config_json = config_line.strip_prefix("# config: ").expect("config first");
    let config: serde_json::Value = serde_json::from_str(config_json).unwrap();
    assert_eq!(config["subcommand"], "scan");
    assert_eq!(config["quantity"], "an");
    assert_eq!(config["B"], "1..3");

    let hash_line = lines.next().unwrap();
    let hash = hash_line.strip_prefix("# config_hash: ").expect("hash second");
    let expect = format!("fnv1a64:{:016x}", fnv1a64(config_json.as_bytes()));
    assert_eq!(hash, expect, "stored hash must match the echoed config");

    assert_eq!(lines.next().unwrap(), "n,B,c,A_n,beta_n,bound1,expmoment,ratio");
    assert_eq!(lines.filter(|l| !l.starts_with('#')).count(), 3, "one row per margin");
}

#[test]
fn json_artifact_embeds_config_and_hash() {
    let out = tmp("hdr-verify.json");
    let (code, _, _) = run(&["verify", "gk", "--k", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["config"]["subcommand"], "verify");
    assert_eq!(doc["config"]["target"], "gk");
    assert_eq!(doc["config"]["k"], "5");
    let canonical = serde_json::to_string(&doc["config"]).unwrap();
    let expect = format!("fnv1a64:{:016x}", fnv1a64(canonical.as_bytes()));
    assert_eq!(doc["config_hash"].as_str().unwrap(), expect);
    assert_eq!(doc["results"][0]["verdict"], "verified");
    assert_eq!(doc["results"][0]["params"]["k"], 5.0);
}

// ---------------------------------------------------------------------------
// exit codes: inconclusive proofs exit 2 and still write their certificate
// ---------------------------------------------------------------------------

#[test]
fn starved_prover_exits_inconclusive_with_artifact() {
    let out = tmp("starved.json");
    let (code, stdout, _) = run(&[
        "verify", "gk", "--k", "6", "--max-cells", "4", "--max-depth", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2, "starved budget must be inconclusive, not failed");
    assert!(stdout.contains("INCONCLUSIVE"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["results"][0]["verdict"], "inconclusive");
}

// ---------------------------------------------------------------------------
// sample artifact: one row per retained step, in chain order
// ---------------------------------------------------------------------------

#[test]
fn sample_rows_follow_the_thinning_schedule() {
    let out = tmp("sample-small.csv");
    let (code, _, _) = run(&[
        "sample", "--k", "3", "--B", "2", "--steps", "20000", "--seed", "3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("step,"))
        .collect();
    assert_eq!(rows.len(), 1000, "(20000 - 10000) / 10 retained samples");
    for (i, row) in rows.iter().enumerate() {
        let mut cols = row.split(',');
        let step: u64 = cols.next().unwrap().parse().unwrap();
        assert_eq!(step, 10_000 + 10 * i as u64);
        let hash = cols.next().unwrap();
        assert_eq!(hash.len(), 16, "fixed-width table hash");
        let xsq: f64 = cols.next().unwrap().parse().unwrap();
        assert!(xsq >= 0.0);
    }
}

// ---------------------------------------------------------------------------
// plot artifact: grid rows, dip metadata, and the zero row per k
// ---------------------------------------------------------------------------

#[test]
fn plot_rows_carry_dip_interval_structure() {
    let out = tmp("plot-small.csv");
    let (code, _, _) = run(&[
        "plot-mk", "--k", "3,4,5", "--b-step", "0.25", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("k,"))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();

    for k in ["3", "4", "5"] {
        // a b=0 row with value exactly 0
        assert!(
            rows.iter().any(|r| r[0] == k
                && r[1].parse::<f64>().unwrap() == 0.0
                && r[2].parse::<f64>().unwrap() == 0.0),
            "k={k}: missing zero row"
        );
    }
    // every emitted value respects the certified nonnegativity
    for r in &rows {
        assert!(r[2].parse::<f64>().unwrap() >= -1e-12, "negative value in {r:?}");
    }
    // no dip interval below k=5, one marked interval at k=5
    for r in rows.iter().filter(|r| r[0] != "5") {
        assert_eq!(r[3], "0", "dip flag outside k=5: {r:?}");
        assert_eq!(r[4], "grid");
    }
    let lo: f64 = rows
        .iter()
        .find(|r| r[0] == "5" && r[4] == "ik_lo")
        .expect("k=5 lower endpoint row")[1]
        .parse()
        .unwrap();
    let hi: f64 = rows
        .iter()
        .find(|r| r[0] == "5" && r[4] == "ik_hi")
        .expect("k=5 upper endpoint row")[1]
        .parse()
        .unwrap();
    assert!((hi - 2.1922).abs() <= 0.01, "upper endpoint {hi}");
    assert!(lo < hi && lo > 0.0);
    for r in rows.iter().filter(|r| r[0] == "5" && r[4] == "grid") {
        let b: f64 = r[1].parse().unwrap();
        let expect = u8::from(b > lo && b < hi).to_string();
        assert_eq!(r[3], expect, "dip flag at b={b}");
    }
}

// ---------------------------------------------------------------------------
// scan truncation: partial artifact plus nonzero exit
// ---------------------------------------------------------------------------

#[test]
fn scan_past_enumeration_budget_truncates() {
    // margin 2 at k=9 wants over 1e8 tables, beyond the enumeration cap, so
    // the scan must keep the completed B=1 row and flag the truncation
    let out = tmp("scan-trunc.csv");
    let (code, stdout, _) = run(&[
        "scan", "an", "--k", "9", "--c", "1.0", "--B", "1..10",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "truncated scan exits nonzero");
    assert!(stdout.contains("truncated"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# truncated-at-B: 2")));
    let rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("n,"))
        .count();
    assert_eq!(rows, 1, "completed prefix must be present");
}
