use std::path::Path;
use std::process::{Command, Output};

use kfp_core::GridField;

fn kfp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("kfp runs")
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_CASE: &str = r#"
[verify_estimate]
lambda = 1.0
coefficient = { kind = "scalar", value = 1.0 }
grid = { d = 1, t_lo = 0.0, t_hi = 1.0, nt = 5, lx = 3.141592653589793, nx = [8], lv = 3.141592653589793, nv = [16] }

[[verify_estimate.corpus.cases]]
id = "cos_v"
source = { d = 1, terms = [{ amplitude = 1.0, time = { kind = "constant" }, x_env = { kind = "plane" }, v_env = { kind = "plane" }, k_mod = [0.0], xi_mod = [1.0] }] }
"#;

#[test]
fn solve_cos_v_center_slice_is_half() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("cos_v_steady.toml");
    let o = kfp(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let u = GridField::load(dir.path().join("cos_v.kfpd")).unwrap();
    let it = u.spec.nt / 2;
    let m = u.slab(it).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!((m - 0.5).abs() <= 1e-8, "{m}");
}

#[test]
fn empty_corpus_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_CASE.split("[[verify_estimate.corpus.cases]]").next().unwrap();
    let cfg = write(dir.path(), "empty.toml", body);
    let o = kfp(&["verify-estimate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("corpus.empty"), "{}", stderr(&o));
}

#[test]
fn geometry_test_defaults_check_1e5_triples() {
    let dir = tempfile::tempdir().unwrap();
    let o = kfp(&["geometry-test"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("checked 100000 triples"), "{}", stdout(&o));
    assert!(dir.path().join("geometry.csv").exists());
}

#[test]
fn unknown_keys_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[geometry_test]\ntriples = 10\nbogus = 1\n");
    let o = kfp(&["geometry-test", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config.parse"));
}

#[test]
fn missing_section_and_file_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kfp(&["solve"], dir.path()).status.code(), Some(2));
    assert_eq!(kfp(&["vmo", "--config", "/nonexistent.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn frozen_cap_violation_exits_1_with_id() {
    let dir = tempfile::tempdir().unwrap();
    let body = SMALL_CASE.replace("lambda = 1.0\n", "lambda = 1.0\ncap = 1.0\n");
    let cfg = write(dir.path(), "cap.toml", &body);
    let o = kfp(&["verify-estimate", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("estimate.frozen_cap"));
    // the ratio of this case is 3/2 before the transport term, so the file exists
    assert!(dir.path().join("estimate.csv").exists());
}

#[test]
fn dry_run_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = configs().join("estimate_l2.toml");
    let o = kfp(&["verify-estimate", "--dry-run", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("plan:"));
    assert!(!out.exists());
}

#[test]
fn csv_bit_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "m.toml",
        r#"seed = 4
[maximal_bench]
fields = 3
family = { r_min = 0.35, levels = 2, c = 1.0 }
grid = { d = 1, t_lo = 0.0, t_hi = 1.0, nt = 8, lx = 0.5, nx = [8], lv = 2.0, nv = [8] }
"#,
    );
    let runs: Vec<Vec<u8>> = [None, Some("1"), None]
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let out = dir.path().join(format!("run{i}"));
            let mut args = vec!["maximal-bench", "--config", &cfg];
            if let Some(w) = w {
                args.extend(["--workers", w]);
            }
            let o = kfp(&args, &out);
            assert!(o.status.success(), "{}", stderr(&o));
            std::fs::read(out.join("maximal.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.toml", "seed = 1\n[geometry_test]\ntriples = 2000\nsandwich = 200\ndoubling_configs = 4\ndoubling_samples = 500\n");
    let read = |sub: &str, seed: Option<&str>| {
        let out = dir.path().join(sub);
        let mut args = vec!["geometry-test", "--config", &cfg];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        assert!(kfp(&args, &out).status.success());
        std::fs::read_to_string(out.join("geometry.csv")).unwrap()
    };
    assert_eq!(read("a", None), read("b", Some("1")));
    assert_ne!(read("a", None), read("c", Some("2")));
}

#[test]
fn report_summarizes_ratio_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.toml", SMALL_CASE);
    assert!(kfp(&["verify-estimate", "--config", &cfg], dir.path()).status.success());
    let rep = write(dir.path(), "r.toml", "[report]\ninputs = [\"estimate.csv\"]\n");
    let o = kfp(&["report", "--config", &rep], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let line = summary.lines().nth(1).unwrap();
    let fields: Vec<&str> = line.split(',').collect();
    assert_eq!(fields[1], "1");
    assert!(fields[2].parse::<f64>().unwrap() >= 1.5);
}
