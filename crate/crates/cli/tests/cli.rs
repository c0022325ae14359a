use std::path::Path;
use std::process::{Command, Output};

use hfloquet::io::{read_counts_file, read_record};

fn hfloquet(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hfloquet")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_is_deterministic_and_weight_preserving() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--lx", "3", "--ly", "3", "--j", "0.1", "--n-f", "2", "--seed", "4", "--n-s", "500"];
    let a = stdout(&hfloquet(&args, dir.path()));
    assert_eq!(a, stdout(&hfloquet(&args, dir.path())));
    let mut with_output = args.to_vec();
    with_output.extend(["--output", "c.tsv"]);
    stdout(&hfloquet(&with_output, dir.path()));
    let samples = read_counts_file(&dir.path().join("c.tsv")).unwrap();
    assert_eq!(samples.len(), 500);
    assert!(samples.shots().iter().all(|s| s.count_ones() == 4));
}

#[test]
fn estimate_reports_each_patch_and_order() {
    let dir = tempfile::tempdir().unwrap();
    stdout(&hfloquet(&["simulate", "--lx", "3", "--ly", "3", "--j", "0", "--n-s", "100", "--output", "c.tsv"], dir.path()));
    let out = stdout(&hfloquet(
        &["estimate", "--counts", "c.tsv", "--lx", "3", "--ly", "3", "--patch", "1x1:all", "--orders", "2,3"],
        dir.path(),
    ));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 9 * 2);
    // J = 0 leaves the Neel state: every marginal is a point mass
    for row in rows {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols[3].parse::<f64>().unwrap(), 1.0);
    }
}

#[test]
fn sweep_writes_record_and_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.toml"),
        "lx = 3\nly = 3\nn_f = 2\nrealizations = 2\n[j_grid]\nstart = 0.005\nstop = 0.2\ncount = 4\n\
         [[patches]]\nshape = \"1x2\"\n",
    )
    .unwrap();
    let out = stdout(&hfloquet(&["sweep", "--config", "cfg.toml", "--output-dir", "out", "--spectrum"], dir.path()));
    assert!(out.contains("config_hash"));
    let record = read_record(&dir.path().join("out/record.json")).unwrap();
    assert_eq!(record.entries.len(), 4);
    assert_eq!(record.spectra.len(), 4);
    for name in ["entropy_vs_j_1x2.tsv", "gap_ratio_hist.tsv", "porter_thomas_hist.tsv", "weight_hist.tsv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    let again = stdout(&hfloquet(&["sweep", "--config", "cfg.toml", "--output-dir", "out", "--spectrum"], dir.path()));
    assert_eq!(out, again);
}

#[test]
fn lec_on_a_record_matches_exact_at_the_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--lx", "3", "--ly", "3", "--j-start", "0.005", "--j-stop", "0.2", "--j-count", "5", "--n-f", "2",
        "--realizations", "2", "--source", "sampled", "--n-s", "4000", "--noise-p", "0.02", "--patch", "2x2",
        "--output-dir", "out",
    ];
    stdout(&hfloquet(&args, dir.path()));
    let record = read_record(&dir.path().join("out/record.json")).unwrap();
    let out = stdout(&hfloquet(&["mitigate", "--record", "out/record.json", "--mitigation", "lec"], dir.path()));
    let row = out.lines().find(|l| !l.starts_with('#') && !l.starts_with("patch")).unwrap();
    let cols: Vec<&str> = row.split('\t').collect();
    let exact = record.entries.iter().find(|e| (e.j_over_pi - 0.005).abs() < 1e-12).unwrap().exact;
    assert!((cols[3].parse::<f64>().unwrap() - exact).abs() < 1e-12);
}

#[test]
fn benchmark_lists_every_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&hfloquet(&["benchmark", "--n-max", "6"], dir.path()));
    // n = 2..=6 with 1 <= n_A < n
    assert_eq!(out.lines().count() - 1, 1 + 2 + 3 + 4 + 5);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| hfloquet(args, dir.path()).status.code().unwrap();
    assert_eq!(code(&["simulate", "--lx", "3", "--ly", "3", "--j", "0.3"]), 2);
    assert_eq!(code(&["sweep", "--lx", "3"]), 2);
    std::fs::write(dir.path().join("bad.tsv"), "# n 4\n0120\t1\n").unwrap();
    assert_eq!(code(&["ingest", "--counts", "bad.tsv"]), 4);
    assert_eq!(code(&["ingest", "--counts", "missing.tsv"]), 1);
    let capped = Command::new(env!("CARGO_BIN_EXE_hfloquet"))
        .args(["simulate", "--lx", "4", "--ly", "4", "--j", "0.1"])
        .env("HFLOQUET_MAX_SECTOR_DIM", "1000")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("12870"));
}
