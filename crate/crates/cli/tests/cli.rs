use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CASE1: &str = "10 4 6\n1 5\n2 4\n3 3\n4 2\n1 2 2 3 4 4\n";

fn cgpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgpp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_is_reproducible_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("u.txt");
    let out = cgpp(&["gen", "--preset", "uniform-b", "--n", "300", "--seed", "9", "--out", file.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let printed = cgpp(&["gen", "--preset", "uniform-b", "--n", "300", "--seed", "9"]);
    let text = fs::read_to_string(&file).unwrap();
    assert_eq!(stdout(&printed), text);
    let inst = cgpp::Instance::parse(&text).unwrap();
    assert_eq!(inst.len(), 300);
    assert_eq!(inst.to_text(), text);
    let other = cgpp(&["gen", "--preset", "uniform-b", "--n", "300", "--seed", "10"]);
    assert_ne!(stdout(&other), text);
}

#[test]
fn gen_lists_presets_and_guards_placeholders() {
    let list = stdout(&cgpp(&["gen", "--list"]));
    assert!(list.lines().any(|l| l.starts_with("uniform-b ")));
    assert!(list.lines().any(|l| l.starts_with("bw1 ") && l.ends_with("[placeholder]")));
    let refused = cgpp(&["gen", "--preset", "bw1", "--n", "10"]);
    assert!(!refused.status.success());
    assert!(String::from_utf8_lossy(&refused.stderr).contains("placeholder"));
    let allowed = cgpp(&["gen", "--preset", "bw1", "--n", "10", "--allow-placeholder"]);
    assert!(allowed.status.success());
    assert!(stdout(&allowed).starts_with("9 "));
}

#[test]
fn gen_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "spec.toml", "kind = \"categorical\"\nsizes = [3, 7]\nweights = [1.0, 0.0]\n");
    let out = cgpp(&["gen", "--spec", &spec, "--n", "4", "--bin-capacity", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let inst = cgpp::Instance::parse(&stdout(&out)).unwrap();
    assert_eq!(inst.capacity(), 10);
    assert!(inst.item_sizes().all(|s| s == 3));
    let bad = write(dir.path(), "bad.toml", "kind = \"uniform\"\nlo = 5\nhi = 2\n");
    assert!(!cgpp(&["gen", "--spec", &bad]).status.success());
}

#[test]
fn bound_prints_l1_l2_and_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "case1.txt", CASE1);
    let out = cgpp(&["bound", "--instance", &inst]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "2 2 2");
    assert!(!cgpp(&["bound", "--instance", "/nonexistent/x.txt"]).status.success());
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "case1.txt", CASE1);
    let report = dir.path().join("report.csv");
    let fill = dir.path().join("fill.csv");
    let hist = dir.path().join("hist.csv");
    let out = cgpp(&[
        "run",
        "--policy",
        "bestfit",
        "--instance",
        &inst,
        "--report",
        report.to_str().unwrap(),
        "--fillrate",
        fill.to_str().unwrap(),
        "--histogram",
        hist.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("bins=3 l2=2 gap=1"));
    let report = fs::read_to_string(report).unwrap();
    let mut lines = report.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy,n_items,bins,l2,gap,replans,fallback_items,plan_match_items,plan_open_items,runtime_ms"
    );
    assert!(lines.next().unwrap().starts_with("bestfit,6,3,2,1,0,6,0,0,"));
    assert_eq!(
        fs::read_to_string(fill).unwrap(),
        "bin,open_step,fill_rate,mode\n0,0,0.9,free\n1,2,0.9,free\n2,5,0.2,free\n"
    );
    assert_eq!(
        fs::read_to_string(hist).unwrap(),
        "pattern,count,fill_rate\n2,1,0.2\n5+4,1,0.9\n4+3+2,1,0.9\n"
    );
}

#[test]
fn run_every_solver() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "case1.txt", CASE1);
    for (policy, bins) in [("offline", "bins=2"), ("cgpp-l", "bins=2"), ("cgpp", "bins=")] {
        let out = cgpp(&[
            "run",
            "--policy",
            policy,
            "--instance",
            &inst,
            "--section-length",
            "6",
            "--memory-length",
            "3",
            "--overestimate-threshold",
            "0.9",
        ]);
        assert!(out.status.success(), "{policy}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains(bins), "{policy}: {}", stdout(&out));
    }
    assert!(!cgpp(&["run", "--policy", "nope", "--instance", &inst]).status.success());
    assert!(!cgpp(&["run", "--policy", "cgpp", "--instance", &inst, "--memory-length", "5000"]).status.success());
}

#[test]
fn run_reads_param_file() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "case1.txt", CASE1);
    let params = write(dir.path(), "params.toml", "section_length = 6\nmemory_length = 2\n");
    let out = cgpp(&["run", "--policy", "cgpp", "--instance", &inst, "--params", &params]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let typo = write(dir.path(), "typo.toml", "section_lenght = 6\n");
    assert!(!cgpp(&["run", "--policy", "cgpp", "--instance", &inst, "--params", &typo]).status.success());
}

const BENCH: &str = r#"
policies = ["bestfit", "cgpp", "cgpp-l", "offline"]

[params]
section_length = 200
memory_length = 50

[[dataset]]
name = "ub"
preset = "uniform-b"
n_items = 600
n_instances = 3
seed = 4

[[dataset]]
name = "table"
instance = "case1.txt"
"#;

#[test]
fn bench_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "case1.txt", CASE1);
    let config = write(dir.path(), "bench.toml", BENCH);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = cgpp(&["bench", "--config", &config, "--out", a.to_str().unwrap(), "--jobs", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("ub"));
    let out = cgpp(&["bench", "--config", &config, "--out", b.to_str().unwrap(), "--jobs", "3"]);
    assert!(out.status.success());
    for file in ["runs.csv", "aggregates.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let runs = fs::read_to_string(a.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4 * 4);
    assert!(runs.lines().next().unwrap().starts_with("instance,dataset,seed,"));
    let timings = fs::read_to_string(a.join("timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 1 + 4 * 4);
}

#[test]
fn bench_fails_on_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "bench.toml",
        "policies = [\"bestfit\"]\n\n[[dataset]]\nname = \"missing\"\ninstance = \"nowhere.txt\"\n",
    );
    let out_dir = dir.path().join("out");
    let out = cgpp(&["bench", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert!(!out.status.success());
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 2);
    assert!(!cgpp(&["bench", "--config", &config, "--jobs", "0"]).status.success());
}
