//! Acceptance run. Each criterion executes the configs under `configs/` and
//! prints one PASS/FAIL line; the process exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sft_core::experiment::{self, ExperimentConfig, Format, ResultRow};
use sft_core::Execution;

type Outcome = std::result::Result<String, String>;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn all_configs(dir: &Path, out: &mut Vec<PathBuf>) {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir).expect("configs dir").map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            all_configs(&p, out);
        } else if p.extension().is_some_and(|e| e == "conf") {
            out.push(p);
        }
    }
}

fn jsonl(rows: &[ResultRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    experiment::write_rows(rows, Format::JsonLines, &mut buf).expect("in-memory write");
    buf
}

/// Runs configs and keeps their json-lines output for the determinism check.
#[derive(Default)]
struct Runner {
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Runner {
    fn load(rel: &str) -> std::result::Result<(PathBuf, ExperimentConfig), String> {
        let path = configs_dir().join(rel);
        let cfg = ExperimentConfig::from_file(&path).map_err(|e| format!("{rel}: {e}"))?;
        Ok((path, cfg))
    }

    fn run_cfg(&mut self, path: PathBuf, cfg: &ExperimentConfig) -> std::result::Result<Vec<ResultRow>, String> {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let rows = experiment::run_experiment(cfg).map_err(|e| format!("{name}: {e}"))?;
        let rep = experiment::verify_rows(&rows);
        if !rep.ok() {
            return Err(format!("{name}: row check failed: {:?}", rep.failures));
        }
        let mut stamped = rows.clone();
        for r in &mut stamped {
            r.wall_time_ms = None;
        }
        self.outputs.push((path, jsonl(&stamped)));
        Ok(rows)
    }

    fn run(&mut self, rel: &str) -> std::result::Result<Vec<ResultRow>, String> {
        let (path, cfg) = Self::load(rel)?;
        self.run_cfg(path, &cfg)
    }
}

fn successes(rows: &[ResultRow]) -> usize {
    rows.iter().filter(|r| r.success).count()
}

fn at_least(rel: &str, rows: &[ResultRow], need: usize) -> Outcome {
    let k = successes(rows);
    if k >= need {
        Ok(format!("{rel} {k}/{}", rows.len()))
    } else {
        Err(format!("{rel} {k}/{} (need {need})", rows.len()))
    }
}

fn joined(parts: Vec<Outcome>) -> Outcome {
    let failed: Vec<String> = parts.iter().filter_map(|p| p.clone().err()).collect();
    if failed.is_empty() {
        Ok(parts.into_iter().map(|p| p.unwrap()).collect::<Vec<_>>().join(", "))
    } else {
        Err(failed.join("; "))
    }
}

fn brute_force(r: &mut Runner) -> Outcome {
    let mut fixtures = Vec::new();
    all_configs(&configs_dir().join("bruteforce"), &mut fixtures);
    if fixtures.len() != 10 {
        return Err(format!("expected 10 fixtures, found {}", fixtures.len()));
    }
    let mut parts = Vec::new();
    let mut worst = usize::MAX;
    for p in fixtures {
        let rel = format!("bruteforce/{}", p.file_name().unwrap().to_string_lossy());
        let rows = r.run(&rel)?;
        if let Some(bad) = rows.iter().find(|row| row.payload["within_cap"] != true) {
            return Err(format!("{rel}: list longer than the cap at seed {}", bad.seed));
        }
        if rows.len() != 100 {
            return Err(format!("{rel}: {} trials", rows.len()));
        }
        worst = worst.min(successes(&rows));
        parts.push(at_least(&rel, &rows, 95));
    }
    joined(parts).map(|_| format!("10 fixtures, worst {worst}/100, caps respected"))
}

fn character_at_scale(r: &mut Runner) -> Outcome {
    let mut parts = Vec::new();
    for rel in ["sft-character.conf", "sft-character-cyclic.conf"] {
        let (path, mut cfg) = Runner::load(rel)?;
        // one trial at a time, so each wall time belongs to a single trial
        cfg.timing = true;
        cfg.execution = Execution::Sequential;
        let rows = r.run_cfg(path, &cfg)?;
        let slowest = rows.iter().filter_map(|x| x.wall_time_ms).fold(0.0, f64::max);
        parts.push(at_least(rel, &rows, 100).and_then(|s| {
            if slowest < 1000.0 {
                Ok(format!("{s} slowest {slowest:.0} ms"))
            } else {
                Err(format!("{s} but slowest trial {slowest:.0} ms"))
            }
        }));
    }
    joined(parts)
}

fn figure1(r: &mut Runner) -> Outcome {
    let rows = r.run("figure1.conf")?;
    let again = experiment::run_experiment(&Runner::load("figure1.conf")?.1).map_err(|e| e.to_string())?;
    if jsonl(&rows) != jsonl(&again) {
        return Err("two runs differ".into());
    }
    let row = rows.first().ok_or("no row")?;
    if !row.success || row.payload["argmax"] != 9 || row.payload["peak"] != 9 {
        return Err(format!("argmax {} peak {}", row.payload["argmax"], row.payload["peak"]));
    }
    let dir = std::env::temp_dir().join(format!("sft-acceptance-{}", std::process::id()));
    let path = dir.join("figure1.csv");
    experiment::emit(&rows, Format::Csv, Some(&path)).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let data_rows = text.lines().count() - 1;
    if data_rows != 64 {
        return Err(format!("csv has {data_rows} data rows"));
    }
    Ok(format!(
        "argmax 9, |f(9)|^2 = {:.4}, leakage within 2/k for k <= 8, 64-row csv",
        row.payload["peak_magnitude_sq"].as_f64().unwrap_or(f64::NAN)
    ))
}

fn modulus_switching(r: &mut Runner) -> Outcome {
    let a = r.run("sft-zp-character.conf")?;
    let b = r.run("sft-zp-half.conf")?;
    let c = r.run("concentration-transfer.conf")?;
    joined(vec![
        at_least("character", &a, 95),
        at_least("half", &b, 90),
        at_least("concentration transfer", &c, c.len()),
    ])
}

fn lpn(r: &mut Runner) -> Outcome {
    let a = r.run("gl-lpn.conf")?;
    let b = r.run("gl-lpn-clean.conf")?;
    joined(vec![at_least("rho=0.2", &a, 90), at_least("rho=0", &b, 100)])
}

fn cm_hnp(r: &mut Runner) -> Outcome {
    let clean = r.run("cm-hnp.conf")?;
    let corrupt = r.run("cm-hnp-corrupt.conf")?;
    let rsa = r.run("rsa-demo.conf")?;
    let exp = r.run("exp-demo.conf")?;
    let mv = r.run("mvhnp.conf")?;
    let mut parts = vec![
        at_least("clean", &clean, 80),
        at_least("5% corrupt", &corrupt, 70),
        at_least("rsa", &rsa, rsa.len() * 8 / 10),
        at_least("exp", &exp, exp.len() * 8 / 10),
        at_least("mvhnp", &mv, mv.len() * 8 / 10),
    ];
    for rel in ["rsa-demo-random.conf", "exp-demo-random.conf"] {
        let rows = r.run(rel)?;
        let k = successes(&rows);
        parts.push(if k == 0 { Ok(format!("{rel} no false recoveries")) } else { Err(format!("{rel}: {k} claims")) });
    }
    let budget = rsa.iter().chain(&exp).map(|x| x.queries).max().unwrap_or(0);
    if budget >= 10_000_000 {
        parts.push(Err(format!("demo used {budget} queries")));
    }
    joined(parts)
}

fn all_rows(r: &mut Runner, rel: &str) -> Outcome {
    let rows = r.run(rel)?;
    at_least(rel, &rows, rows.len())
}

fn unreliable(r: &mut Runner) -> Outcome {
    let mut files = Vec::new();
    all_configs(&configs_dir().join("unreliable"), &mut files);
    let mut parts = Vec::new();
    for p in files {
        let rel = format!("unreliable/{}", p.file_name().unwrap().to_string_lossy());
        parts.push(all_rows(r, &rel));
    }
    joined(parts)
}

fn limitation(r: &mut Runner) -> Outcome {
    let rows = r.run("prop1-sweep.conf")?;
    let worst = rows
        .iter()
        .filter(|x| x.payload["kind"] == "monomial")
        .filter_map(|x| x.payload["max_coeff_sq"].as_f64())
        .fold(0.0, f64::max);
    let mobius = rows.iter().find(|x| x.payload["kind"] == "mobius").and_then(|x| x.payload["max_coeff_sq"].as_f64());
    at_least("prop1-sweep", &rows, rows.len())
        .map(|s| format!("{s}, worst composed {worst:.4}, Mobius keeps {:.3}", mobius.unwrap_or(f64::NAN)))
}

fn determinism(r: &mut Runner) -> Outcome {
    let mut every = Vec::new();
    all_configs(&configs_dir(), &mut every);
    let mut seen = 0;
    for path in &every {
        let first = match r.outputs.iter().find(|(p, _)| p == path) {
            Some((_, b)) => b.clone(),
            None => {
                let cfg = ExperimentConfig::from_file(path).map_err(|e| e.to_string())?;
                jsonl(&experiment::run_experiment(&cfg).map_err(|e| e.to_string())?)
            }
        };
        // second run sequentially: output must not depend on scheduling either
        let mut cfg = ExperimentConfig::from_file(path).map_err(|e| e.to_string())?;
        cfg.execution = Execution::Sequential;
        let second = jsonl(&experiment::run_experiment(&cfg).map_err(|e| e.to_string())?);
        if first != second {
            return Err(format!("{} differs between runs", path.display()));
        }
        seen += 1;
    }
    Ok(format!("{seen} configs byte-identical across runs"))
}

struct Criterion {
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    check: fn(&mut Runner) -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "brute-force equivalence", limit: Some(Duration::from_secs(60)), check: brute_force },
        Criterion { id: 2, name: "exact character recovery at scale", limit: None, check: character_at_scale },
        Criterion { id: 3, name: "Figure 1 reproduction", limit: Some(Duration::from_secs(1)), check: figure1 },
        Criterion { id: 4, name: "modulus switching end to end", limit: Some(Duration::from_secs(120)), check: modulus_switching },
        Criterion { id: 5, name: "GL / LPN", limit: Some(Duration::from_secs(60)), check: lpn },
        Criterion { id: 6, name: "CM-HNP", limit: Some(Duration::from_secs(300)), check: cm_hnp },
        Criterion { id: 7, name: "unreliable-oracle bound", limit: None, check: unreliable },
        Criterion { id: 8, name: "limitation collapse", limit: Some(Duration::from_secs(60)), check: limitation },
        Criterion { id: 9, name: "bias floor", limit: None, check: |r| all_rows(r, "bias-floor.conf") },
        Criterion { id: 10, name: "identity suite", limit: None, check: |r| all_rows(r, "identities.conf") },
        Criterion { id: 11, name: "determinism", limit: None, check: determinism },
    ];
    let mut runner = Runner::default();
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let mut res = (c.check)(&mut runner);
        let took = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&res, c.limit) {
            if took > limit {
                res = Err(format!("{detail}; took {took:.1?}, limit {limit:?}"));
            }
        }
        let (tag, detail) = match &res {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2} {} [{:.1}s]: {detail}", c.id, c.name, took.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
