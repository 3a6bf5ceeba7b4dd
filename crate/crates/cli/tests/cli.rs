use std::path::Path;
use std::process::{Command, Output};

fn sdot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdot")).args(args).output().unwrap()
}

fn run(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let dir = out.parent().unwrap();
    let cfg = dir.join(format!("{}.toml", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&cfg, config).unwrap();
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sdot(&args)
}

/// Data rows of a CSV table, skipping the provenance and header lines.
fn table(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

const CANONICAL: &str = r#"
seed = 11
[problem]
sites = [[0.0], [1.0]]
weights = [0.3, 0.7]
sample_size = 2000
[reference]
interval = [0.0, 1.0]
[functionals]
s = [1.0, 2.0]
phi = [{ kind = "identity" }]
[replications]
limit_draws = 2000
bootstrap = 200
[band]
grid = 20
"#;

const THREE_SITE: &str = r#"
seed = 5
[problem]
sites = [[0.2, 0.3], [0.8, 0.4], [0.4, 0.9]]
weights = [0.25, 0.4, 0.35]
sample_size = 2000
[reference]
rectangle = { lo = [0.0, 0.0], hi = [1.0, 1.0] }
[functionals]
phi = [{ kind = "coordinate", axis = 1 }]
[replications]
limit_draws = 2000
bootstrap = 100
[validate]
mc_samples = 100000
directions = 3
"#;

#[test]
fn canonical_solve_writes_known_potentials() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve");
    let o = run("solve", CANONICAL, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = table(&out.join("potentials.csv"));
    let z: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!((z[0] + 0.1).abs() <= 1e-10 && (z[1] - 0.1).abs() <= 1e-10, "{z:?}");
    let head = std::fs::read_to_string(out.join("potentials.csv")).unwrap();
    assert!(head.starts_with("# config_sha256=") && head.lines().next().unwrap().ends_with("seed=11"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("infer", THREE_SITE, &a, &["--threads", "1"]).status.success());
    assert!(run("infer", THREE_SITE, &b, &[]).status.success());
    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8, "{names:?}");
    for name in names {
        let x = std::fs::read(a.join(&name)).unwrap();
        let y = std::fs::read(b.join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run("infer", CANONICAL, &a, &[]).status.success());
    assert!(run("infer", CANONICAL, &b, &["--seed", "12"]).status.success());
    let x = std::fs::read_to_string(a.join("bootstrap_draws.jsonl")).unwrap();
    let y = std::fs::read_to_string(b.join("bootstrap_draws.jsonl")).unwrap();
    assert!(y.lines().next().unwrap().contains("\"seed\":12"));
    assert_ne!(x.lines().nth(1), y.lines().nth(1));
}

#[test]
fn disabled_stages_omit_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nob");
    let config = format!("{CANONICAL}[stages]\nbootstrap = false\n");
    let o = run("infer", &config, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for absent in ["bootstrap_draws.jsonl", "bootstrap_summary.csv", "confidence.csv", "band.csv"] {
        assert!(!out.join(absent).exists(), "{absent}");
    }
    for present in ["plugin.csv", "limit_draws.jsonl", "derivatives.csv", "probe.csv"] {
        assert!(out.join(present).exists(), "{present}");
    }
}

#[test]
fn infer_reports_canonical_limit_and_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("infer");
    assert!(run("infer", CANONICAL, &out, &[]).status.success());
    let deriv = table(&out.join("derivatives.csv"));
    let w: f64 = deriv.iter().find(|r| r[1] == "delta" && r[2] == "1.0").unwrap()[5].parse().unwrap();
    assert_eq!(w, 1.0);
    let summary = table(&out.join("limit_summary.csv"));
    let gamma = summary.iter().find(|r| r[0] == "gamma").unwrap();
    let analytic: f64 = gamma[6].parse().unwrap();
    // facet at y = 0.3, so φ(y) = y scales the unit-field variance 0.21 by 0.3²
    assert!((analytic - 0.09 * 0.21).abs() <= 1e-9, "{analytic}");
    let band = table(&out.join("band.csv"));
    assert!(!band.is_empty());
    let probe = table(&out.join("probe.csv"));
    assert_eq!(probe[0][2], "1.0");
}

#[test]
fn zero_weight_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero");
    let config = CANONICAL.replace("[0.3, 0.7]", "[0.0, 1.0]");
    let o = run("solve", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_passes_and_detects_corrupted_facets() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run("validate", THREE_SITE, &dir.path().join("ok"), &[]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let bad = format!("{}corrupt_facet_scale = 1.5\n", THREE_SITE);
    let out = dir.path().join("bad");
    let o = run("validate", &bad, &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let rows = table(&out.join("validation.csv"));
    assert!(rows.iter().any(|r| r[0].starts_with("fd_delta") && r[3] == "false"));
    assert!(rows.iter().filter(|r| r[0].starts_with("fd_gamma")).all(|r| r[3] == "true"));
}

#[test]
fn single_site_is_trivial() {
    let dir = tempfile::tempdir().unwrap();
    let config = "[problem]\nsites = [[0.5, 0.5]]\nweights = [1.0]\n[reference]\nrectangle = { lo = [0.0, 0.0], hi = [1.0, 1.0] }\n";
    for cmd in ["solve", "validate"] {
        let out = dir.path().join(cmd);
        let o = run(cmd, config, &out, &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let rows = table(&dir.path().join("solve").join("potentials.csv"));
    assert_eq!(rows[0][3], "0.0");
}

#[test]
fn bad_configs_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        CANONICAL.replace("weights = [0.3, 0.7]", "weights = [0.3, 0.6]"),
        CANONICAL.replace("seed = 11", "seed = 11\nunknown_key = 1"),
        CANONICAL.replace("sites = [[0.0], [1.0]]", "sites = [[0.0], [0.0]]"),
        "not toml at all [".to_string(),
    ];
    for (k, config) in cases.iter().enumerate() {
        let o = run("solve", config, &dir.path().join(format!("bad{k}")), &[]);
        assert_eq!(o.status.code(), Some(1), "case {k}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("config error"));
    }
    let o = sdot(&["solve", "--config", "/definitely/missing.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coverage_study_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cov");
    let config = format!("{CANONICAL}[coverage]\nn = 500\nouter_reps = 10\nbootstrap_reps = 100\nband_grid = 50\n");
    let o = run("coverage-study", &config, &out, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = table(&out.join("coverage.csv"));
    let cov: f64 = rows[0][5].parse().unwrap();
    assert!((0.0..=1.0).contains(&cov));
    assert_eq!(table(&out.join("coverage_replications.csv")).len(), 10);
}
