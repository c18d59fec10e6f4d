use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIGURE1: &str = "experiment = figure1\ntrials = 1\nseed = 3\n";
const CHARACTER: &str = "\
# small brute-force fixture
experiment = sft-bruteforce
trials = 4
seed = 11
group = 256
[oracle]
name = character
[sft]
tau = 0.5
m1 = 32
m2 = 8
";

fn sft(args: &[&str], env_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sft"));
    cmd.args(args).env_remove("SFT_OUTPUT_DIR");
    if let Some(d) = env_dir {
        cmd.env("SFT_OUTPUT_DIR", d);
    }
    cmd.output().expect("spawn sft")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn list_names_every_experiment() {
    let out = sft(&["list"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["sft-bruteforce", "figure1", "cm-hnp", "rsa-demo", "prop1-sweep", "identities"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing:\n{text}");
    }
}

#[test]
fn run_is_byte_identical_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", CHARACTER);
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    assert!(sft(&["run", s(&cfg), "--out", s(&a)], None).status.success());
    assert!(sft(&["run", s(&cfg), "--out", s(&b)], None).status.success());
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    assert_eq!(first.iter().filter(|&&c| c == b'\n').count(), 4);

    let out = sft(&["verify", s(&a)], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn seed_and_trials_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", CHARACTER);
    let out = sft(&["run", s(&cfg), "--seed", "100", "--trials", "2"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let seeds: Vec<&str> = text.lines().map(|l| l.split("\"seed\":").nth(1).unwrap().split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["100", "101"]);
}

#[test]
fn tampered_rows_fail_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.conf", FIGURE1);
    let rows = dir.path().join("f.jsonl");
    assert!(sft(&["run", s(&cfg), "--out", s(&rows)], None).status.success());
    let text = std::fs::read_to_string(&rows).unwrap().replace("\"argmax\":9", "\"argmax\":10");
    std::fs::write(&rows, text).unwrap();
    let out = sft(&["verify", s(&rows)], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn figure1_csv_has_64_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.conf", FIGURE1);
    let out = sft(&["run", s(&cfg), "--format", "csv"], None);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,index,magnitude,magnitude_sq"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn output_dir_env_and_out_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "f.conf", FIGURE1);
    let env_dir = dir.path().join("env");
    assert!(sft(&["run", s(&cfg)], Some(&env_dir)).status.success());
    assert!(env_dir.join("figure1.jsonl").exists());

    let explicit = dir.path().join("explicit.jsonl");
    std::fs::remove_file(env_dir.join("figure1.jsonl")).unwrap();
    assert!(sft(&["run", s(&cfg), "--out", s(&explicit)], Some(&env_dir)).status.success());
    assert!(explicit.exists());
    assert!(!env_dir.join("figure1.jsonl").exists());
}

#[test]
fn bad_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.conf", "experiment = nope\n");
    let out = sft(&["run", s(&unknown)], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));

    let dup = write(dir.path(), "d.conf", "experiment = figure1\ntrials = 1\ntrials = 2\n");
    assert_eq!(sft(&["run", s(&dup)], None).status.code(), Some(2));
    assert_eq!(sft(&["run", "/nonexistent/x.conf"], None).status.code(), Some(2));
}
