use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn quadls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn with_data<'a>(args: &[&'a str], data: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--data-dir", data]);
    v
}

fn manifest_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("manifest.txt")).unwrap();
    text.lines()
        .find_map(|l| l.split_once(" = ").filter(|(k, _)| *k == key).map(|(_, v)| v.to_string()))
        .unwrap_or_else(|| panic!("no {key} in manifest"))
}

fn last_train_error(path: &Path) -> f64 {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().filter_map(|rec| rec.unwrap()[3].parse::<f64>().ok()).last().unwrap()
}

#[test]
fn sweep_layout_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let data = data.to_str().unwrap();
    let first = tmp.path().join("first");
    let args = ["sweep", "--kinds", "fgf,ffg", "--batch-sizes", "10,50", "--seeds", "4,5", "--budget", "600"];
    let o = quadls(&with_data(&args, data), &first);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut names: Vec<String> = fs::read_dir(&first).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.iter().filter(|n| n.starts_with("run_")).count(), 8);
    assert_eq!(names.iter().filter(|n| n.starts_with("summary_")).count(), 4);
    assert!(names.contains(&"run_ffg_m50_s5.csv".to_string()));
    let text = fs::read_to_string(first.join("run_fgf_m10_s4.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "fe,iter,alpha,train_error,test_error,dtheta,outcome");
    assert!(manifest_value(&first, "run.fgf_m10_s4").starts_with("ok fe="));
    assert_eq!(manifest_value(&first, "config_hash").len(), 64);

    let second = tmp.path().join("second");
    let manifest = first.join("manifest.txt");
    let o = quadls(&["rerun", "--manifest", manifest.to_str().unwrap()], &second);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for n in names.iter().filter(|n| n.ends_with(".csv")) {
        assert_eq!(fs::read(first.join(n)).unwrap(), fs::read(second.join(n)).unwrap(), "{n}");
    }
    assert_eq!(manifest_value(&first, "config_hash"), manifest_value(&second, "config_hash"));
}

#[test]
fn empty_kinds_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let o = quadls(&with_data(&["sweep", "--kinds", ""], data.to_str().unwrap()), tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("kinds"));
}

#[test]
fn missing_dataset_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("nothing-here");
    fs::create_dir(&empty).unwrap();
    for cmd in ["train", "compare-exact", "study", "sweep"] {
        let o = quadls(&[cmd, "--data-dir", empty.to_str().unwrap()], &tmp.path().join(cmd));
        assert!(!o.status.success(), "{cmd}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("not found"), "{cmd}");
    }
}

#[test]
fn command_line_beats_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    let data = data_dir();
    fs::write(&cfg, format!("# sweep settings\nkinds = gg\nbudget = 500\nseeds = 2\ndata_dir = {}\n", data.display()))
        .unwrap();
    let out = tmp.path().join("out");
    let o = quadls(&["sweep", "--config", cfg.to_str().unwrap(), "--budget", "300"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(manifest_value(&out, "budget"), "300");
    assert_eq!(manifest_value(&out, "kinds"), "gg");
    assert_eq!(manifest_value(&out, "flag"), "reject");
    assert!(out.join("run_gg_m10_s2.csv").exists());

    fs::write(&cfg, "colour = blue\n").unwrap();
    let o = quadls(&["sweep", "--config", cfg.to_str().unwrap()], &out);
    assert!(!o.status.success());
}

#[test]
fn train_saves_and_resumes_weights() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let data = data.to_str().unwrap();
    let w = tmp.path().join("w.bin");
    let args = ["train", "--kinds", "gg", "--budget", "400", "--save-weights", w.to_str().unwrap()];
    let o = quadls(&with_data(&args, data), &tmp.path().join("a"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(w.exists());
    let o = quadls(&with_data(&["train", "--kinds", "gg", "--budget", "10", "--load-weights", w.to_str().unwrap()], data), &tmp.path().join("b"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let trained = last_train_error(&tmp.path().join("a/run_gg_m10_s0.csv"));
    let resumed = last_train_error(&tmp.path().join("b/run_gg_m10_s0.csv"));
    assert!(resumed <= trained + 0.05, "{resumed} vs {trained}");
}

#[test]
fn study_writes_stats_and_histogram() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let args = ["study", "--kinds", "gg,fff", "--batch-sizes", "50", "--n-fits", "60", "--seeds", "1"];
    let o = quadls(&with_data(&args, data.to_str().unwrap()), tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(tmp.path().join("study_gg_m50_s1_stats.csv")).unwrap();
    let rec = r.records().next().unwrap().unwrap();
    let n: usize = rec[3].parse().unwrap();
    let rejected: usize = rec[4].parse().unwrap();
    assert_eq!(n + rejected, 60);
    let mut h = csv::Reader::from_path(tmp.path().join("study_gg_m50_s1_hist.csv")).unwrap();
    let counts: usize = h.records().map(|r| r.unwrap()[2].parse::<usize>().unwrap()).sum();
    assert_eq!(counts, n);
}

#[test]
fn compare_exact_against_golden_section() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir();
    let args = ["compare-exact", "--kinds", "fgf,gg", "--iterations", "200"];
    let o = quadls(&with_data(&args, data.to_str().unwrap()), tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let golden = last_train_error(&tmp.path().join("exact_golden_s0.csv"));
    for kind in ["fgf", "gg"] {
        let err = last_train_error(&tmp.path().join(format!("exact_{kind}_s0.csv")));
        assert!(err <= 2.0 * golden.max(1.0 / 400.0), "{kind}: {err} vs golden {golden}");
    }
    let mut r = csv::Reader::from_path(tmp.path().join("exact_golden_s0.csv")).unwrap();
    let outcomes: Vec<String> = r.records().map(|r| r.unwrap()[6].to_string()).collect();
    assert_eq!(outcomes.len(), 200);
    assert!(outcomes.iter().all(|o| o == "exact"));

    let o = quadls(&with_data(&["compare-exact", "--regime", "bounded"], data.to_str().unwrap()), tmp.path());
    assert!(!o.status.success());
}
