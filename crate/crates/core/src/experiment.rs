//! Named experiments with flat text configs, seeded trials and row output.
//!
//! Config files are `key = value` lines. `#` starts a comment, `[name]`
//! prefixes the following keys with `name.`. Top-level keys: `experiment`,
//! `trials`, `seed`, `output`, `format`, `timing`, `execution`, `group`.
//! Everything else lives under `oracle.`, `sft.` or `params.`.
//!
//! Trial `i` runs with seed `seed + i`; all randomness inside a trial is
//! derived from that seed, so rows are identical across runs and platforms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::functions::{
    make_bit, make_character, make_character_sum, make_half, Corruption, CorruptionSet, Lpn, NoiseSpec, QueryOracle, RandomSign, Replacement, Unreliable,
};
use crate::group::{convolve, dft_full, inverse_dft, Element, FnTable, GroupSpec};
use crate::hnp::{self, DemoConfig, HnpInstance, LeakSpec, MvhnpInstance};
use crate::limits::{self, RationalMap};
use crate::modswitch::{concentration_transfer_check, sft_zp, switch_table, SwitchMap};
use crate::numth::{gcd, pow_mod};
use crate::rng;
use crate::sft::{chain_build, filter_eval, sft_run, CosetNode, HeavyList, SftParams};

// ---- Config ----

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    #[default]
    JsonLines,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::JsonLines => "jsonl",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" | "json-lines" | "json" => Ok(Format::JsonLines),
            "csv" => Ok(Format::Csv),
            _ => Err(Error::Config(format!("unknown format {s:?} (jsonl or csv)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Record per-trial wall time. Off by default so output is reproducible.
    pub timing: bool,
    pub execution: Execution,
    entries: BTreeMap<String, String>,
}

const PREFIXES: [&str; 3] = ["oracle.", "sft.", "params."];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = String::new();
        let mut map = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", ln + 1)))?;
            let (k, v) = (k.trim(), v.trim().trim_matches('"'));
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", ln + 1)));
            }
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            if map.insert(key.clone(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key {key}", ln + 1)));
            }
        }
        Self::from_entries(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn from_entries(mut map: BTreeMap<String, String>) -> Result<Self> {
        let experiment = map.remove("experiment").ok_or_else(|| Error::Config("missing `experiment`".into()))?;
        find_experiment(&experiment)?;
        let take = |map: &mut BTreeMap<String, String>, k: &str| map.remove(k);
        let trials = match take(&mut map, "trials") {
            Some(v) => parse_value::<usize>("trials", &v)?,
            None => 1,
        };
        if trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        let seed = take(&mut map, "seed").map(|v| parse_value::<u64>("seed", &v)).transpose()?.unwrap_or(0);
        let output = take(&mut map, "output").map(PathBuf::from);
        let format = take(&mut map, "format").map(|v| v.parse()).transpose()?.unwrap_or_default();
        let timing = take(&mut map, "timing").map(|v| parse_value::<bool>("timing", &v)).transpose()?.unwrap_or(false);
        let execution = match take(&mut map, "execution").as_deref() {
            None => Execution::default(),
            Some("parallel") => Execution::Parallel,
            Some("sequential") => Execution::Sequential,
            Some(v) => return Err(Error::Config(format!("unknown execution {v:?}"))),
        };
        if let Some(k) = map.keys().find(|k| k.as_str() != "group" && !PREFIXES.iter().any(|p| k.starts_with(p))) {
            return Err(Error::Config(format!("unknown key {k}")));
        }
        Ok(ExperimentConfig { experiment, trials, seed, output, format, timing, execution, entries: map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Sets a nested key such as `sft.tau` or `params.p`.
    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        if key != "group" && !PREFIXES.iter().any(|p| key.starts_with(p)) {
            return Err(Error::Config(format!("unknown key {key}")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key).map(|v| parse_value(key, v)).transpose()
    }

    fn value_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.value(key)?.unwrap_or(default))
    }

    fn list<T: FromStr>(&self, key: &str, default: &str) -> Result<Vec<T>> {
        self.get(key)
            .unwrap_or(default)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| parse_value(key, s))
            .collect()
    }

    pub fn group(&self) -> Result<GroupSpec> {
        parse_group(self.get("group").ok_or_else(|| Error::Config("missing `group`".into()))?)
    }

    /// Overrides on top of `base` from the `sft.` keys.
    pub fn apply_sft(&self, mut p: SftParams) -> Result<SftParams> {
        if let Some(t) = self.value("sft.tau")? {
            p.tau = t;
        }
        if let Some(d) = self.value("sft.delta")? {
            p = p.delta(d);
        }
        match (self.value::<usize>("sft.m1")?, self.value::<usize>("sft.m2")?) {
            (Some(a), Some(b)) => p = p.samples(a, b),
            (None, None) => {}
            _ => return Err(Error::Config("sft.m1 and sft.m2 go together".into())),
        }
        if let Some(c) = self.value("sft.node_cap")? {
            p = p.node_cap(c);
        }
        Ok(p.execution(self.execution))
    }

    /// SFT parameters for one trial; `sft.tau` is required unless a default is given.
    pub fn sft_params(&self, trial_seed: u64, default_tau: Option<f64>) -> Result<SftParams> {
        let tau = self
            .value("sft.tau")?
            .or(default_tau)
            .ok_or_else(|| Error::Config("missing `sft.tau`".into()))?;
        self.apply_sft(SftParams::new(tau).seed(rng::derive_seed(trial_seed, &[rng::TAG_TRIAL])))
    }
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

/// `"1024"`, `"4x8x32"`, or `"N^m"` for `m` copies of `Z_N`.
pub fn parse_group(s: &str) -> Result<GroupSpec> {
    let bad = || Error::InvalidGroup(format!("cannot parse group {s:?}"));
    let moduli: Vec<u64> = if let Some((n, m)) = s.split_once('^') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let m: usize = m.trim().parse().map_err(|_| bad())?;
        vec![n; m]
    } else {
        s.split('x').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    GroupSpec::new(&moduli)
}

/// Comma-separated residues; a bare integer is also accepted on cyclic groups.
pub fn parse_element(g: &GroupSpec, s: &str) -> Result<Element> {
    let v: Vec<u64> = s
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad element {s:?}"))))
        .collect::<Result<_>>()?;
    g.element(&v)
}

// ---- Oracle construction ----

pub struct BuiltOracle {
    pub oracle: QueryOracle,
    /// The planted frequency or secret, when the oracle has one.
    pub planted: Option<Element>,
}

fn element_or_random<R: Rng>(cfg: &ExperimentConfig, g: &GroupSpec, key: &str, r: &mut R) -> Result<Element> {
    match cfg.get(key) {
        None | Some("random") => Ok(g.random(r)),
        Some(s) => parse_element(g, s),
    }
}

/// Builds the function named by `oracle.name`, with planted values drawn from
/// the trial seed, and wraps it when `oracle.corrupt` is set.
pub fn build_oracle(cfg: &ExperimentConfig, g: &GroupSpec, seed: u64) -> Result<BuiltOracle> {
    let name = cfg.get("oracle.name").ok_or_else(|| Error::Config("missing `oracle.name`".into()))?;
    let mut r = rng::stream(seed, &[rng::TAG_PLANT]);
    let one = |c: f64| Complex64::new(c, 0.0);
    let (oracle, planted) = match name {
        "character" => {
            let a = element_or_random(cfg, g, "oracle.alpha", &mut r)?;
            (make_character(g, &a, one(cfg.value_or("oracle.coeff", 1.0)?))?, Some(a))
        }
        "character-sum" => {
            let coeffs: Vec<f64> = cfg.list("oracle.coeffs", "0.7,0.5,0.3")?;
            let alphas: Vec<Element> = match cfg.get("oracle.alphas") {
                None | Some("random") => {
                    if coeffs.len() as u64 > g.order() {
                        return Err(Error::InvalidParams("more terms than group elements".into()));
                    }
                    sample(&mut r, g.order() as usize, coeffs.len()).into_iter().map(|i| g.element_at(i as u64)).collect()
                }
                Some(s) => s.split(';').map(|t| parse_element(g, t)).collect::<Result<_>>()?,
            };
            if alphas.len() != coeffs.len() {
                return Err(Error::Config("oracle.alphas and oracle.coeffs differ in length".into()));
            }
            let terms: Vec<_> = alphas.into_iter().zip(coeffs).map(|(a, c)| (a, one(c))).collect();
            (make_character_sum(g, &terms)?, None)
        }
        "half" => (make_half(g)?, None),
        "bit" => (make_bit(g, cfg.value_or("oracle.i", 0u32)?)?, None),
        "lpn" => {
            let s = element_or_random(cfg, g, "oracle.secret", &mut r)?;
            let rho = cfg.value_or("oracle.rho", 0.0)?;
            (QueryOracle::new(Lpn::new(g, &s, rho, r.random())?), Some(s))
        }
        "noisy-character" => {
            let a = element_or_random(cfg, g, "oracle.alpha", &mut r)?;
            let noise = match cfg.get("oracle.noise").unwrap_or("uniform") {
                "uniform" => NoiseSpec::uniform(cfg.value_or("oracle.width", 1)?, r.random()),
                "gaussian" => NoiseSpec::gaussian(cfg.value_or("oracle.sigma", 0.0)?, r.random()),
                other => return Err(Error::Config(format!("unknown noise {other:?}"))),
            };
            (crate::functions::make_noisy_character(g, &a, noise)?, Some(a))
        }
        "random-sign" => (QueryOracle::new(RandomSign::new(g, r.random())), None),
        other => return Err(Error::Config(format!("unknown oracle {other:?}"))),
    };
    let oracle = match cfg.value::<f64>("oracle.corrupt")? {
        Some(rate) if rate > 0.0 => {
            let u = Unreliable::new(
                oracle.function(),
                Corruption::Rate(rate),
                replacement(cfg.get("oracle.replacement"))?,
                rng::derive_seed(seed, &[rng::TAG_CORRUPT]),
            )?;
            QueryOracle::new(u)
        }
        _ => oracle,
    };
    Ok(BuiltOracle { oracle, planted })
}

fn replacement(s: Option<&str>) -> Result<Replacement> {
    match s {
        None | Some("negate") => Ok(Replacement::Negate),
        Some("random-phase") => Ok(Replacement::RandomPhase),
        Some(o) => Err(Error::Config(format!("unknown replacement {o:?}"))),
    }
}

// ---- Rows ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub seed: u64,
    pub success: bool,
    pub queries: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
    pub payload: Value,
}

/// One row's worth of trial output, before the runner stamps it.
pub struct Outcome {
    pub success: bool,
    pub queries: u64,
    pub payload: Value,
}

type TrialFn = fn(&ExperimentConfig, u64) -> Result<Vec<Outcome>>;
type CheckFn = fn(&ResultRow) -> std::result::Result<(), String>;

pub struct ExperimentInfo {
    pub name: &'static str,
    /// The acceptance criterion this experiment reproduces.
    pub criterion: u8,
    pub summary: &'static str,
    run: TrialFn,
    check: CheckFn,
}

static EXPERIMENTS: &[ExperimentInfo] = &[
    ExperimentInfo {
        name: "sft-bruteforce",
        criterion: 1,
        summary: "SFT output vs brute-force heavy sets on small groups",
        run: run_sft_bruteforce,
        check: check_sft_bruteforce,
    },
    ExperimentInfo {
        name: "sft-character",
        criterion: 2,
        summary: "exact recovery of a planted character",
        run: run_sft_character,
        check: check_sft_character,
    },
    ExperimentInfo {
        name: "figure1",
        criterion: 3,
        summary: "spectrum of a character lifted from Z_p to Z_N",
        run: run_figure1,
        check: check_figure1,
    },
    ExperimentInfo {
        name: "sft-zp",
        criterion: 4,
        summary: "heavy coefficients on Z_p through the modulus switch",
        run: run_sft_zp,
        check: check_sft_zp,
    },
    ExperimentInfo {
        name: "concentration-transfer",
        criterion: 4,
        summary: "concentration of a function before and after lifting",
        run: run_concentration_transfer,
        check: check_concentration_transfer,
    },
    ExperimentInfo {
        name: "gl-lpn",
        criterion: 5,
        summary: "LPN secret recovery with query access",
        run: run_gl_lpn,
        check: check_gl_lpn,
    },
    ExperimentInfo {
        name: "cm-hnp",
        criterion: 6,
        summary: "chosen-multiplier hidden number problem",
        run: run_cm_hnp,
        check: check_cm_hnp,
    },
    ExperimentInfo {
        name: "rsa-demo",
        criterion: 6,
        summary: "toy RSA plaintext recovery from a one-bit leak",
        run: run_rsa_demo,
        check: check_demo,
    },
    ExperimentInfo {
        name: "exp-demo",
        criterion: 6,
        summary: "toy discrete-log recovery from a one-bit leak",
        run: run_exp_demo,
        check: check_demo,
    },
    ExperimentInfo {
        name: "mvhnp",
        criterion: 6,
        summary: "multivariate HNP by coordinate filtering",
        run: run_mvhnp,
        check: check_mvhnp,
    },
    ExperimentInfo {
        name: "unreliable-bound",
        criterion: 7,
        summary: "coefficient degradation under a corruption set",
        run: run_unreliable_bound,
        check: check_unreliable_bound,
    },
    ExperimentInfo {
        name: "prop1-sweep",
        criterion: 8,
        summary: "heavy coefficients under composition with x^d and a Mobius map",
        run: run_prop1_sweep,
        check: check_prop1_sweep,
    },
    ExperimentInfo {
        name: "bias-floor",
        criterion: 9,
        summary: "bias of uniform noise and noisy composed characters",
        run: run_bias_floor,
        check: check_bias_floor,
    },
    ExperimentInfo {
        name: "identities",
        criterion: 10,
        summary: "Fourier identities and filter exactness on small groups",
        run: run_identities,
        check: check_identities,
    },
];

pub fn experiments() -> &'static [ExperimentInfo] {
    EXPERIMENTS
}

pub fn find_experiment(name: &str) -> Result<&'static ExperimentInfo> {
    EXPERIMENTS.iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

/// Runs `cfg.trials` trials with seeds `cfg.seed + i`, rows ordered by trial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let info = find_experiment(&cfg.experiment)?;
    let per_trial = cfg.execution.map_range(cfg.trials, |i| {
        let seed = cfg.seed.wrapping_add(i as u64);
        let start = Instant::now();
        let out = (info.run)(cfg, seed)?;
        let ms = cfg.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        Ok::<_, Error>(out
            .into_iter()
            .map(|o| ResultRow {
                experiment: info.name.to_string(),
                seed,
                success: o.success,
                queries: o.queries,
                wall_time_ms: ms,
                payload: o.payload,
            })
            .collect::<Vec<_>>())
    });
    let mut rows = Vec::new();
    for t in per_trial {
        rows.extend(t?);
    }
    Ok(rows)
}

// ---- Emission ----

const BASE_COLUMNS: [&str; 5] = ["experiment", "seed", "success", "queries", "wall_time_ms"];

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: Format, mut w: W) -> Result<()> {
    match format {
        Format::JsonLines => {
            for r in rows {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n")?;
            }
        }
        Format::Csv if !rows.is_empty() && rows.iter().all(|r| r.experiment == "figure1") => {
            // one line per spectrum entry, for plotting
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["seed", "index", "magnitude", "magnitude_sq"])?;
            for r in rows {
                let mag = r.payload["magnitude"].as_array().cloned().unwrap_or_default();
                let sq = r.payload["magnitude_sq"].as_array().cloned().unwrap_or_default();
                for (i, (m, s)) in mag.iter().zip(&sq).enumerate() {
                    c.write_record([r.seed.to_string(), i.to_string(), m.to_string(), s.to_string()])?;
                }
            }
            c.flush()?;
        }
        Format::Csv => {
            let extra: BTreeSet<String> = rows
                .iter()
                .filter_map(|r| r.payload.as_object())
                .flat_map(|o| o.iter().filter(|(_, v)| scalar(v).is_some()).map(|(k, _)| k.clone()))
                .collect();
            let mut c = csv::Writer::from_writer(w);
            c.write_record(BASE_COLUMNS.iter().map(|s| s.to_string()).chain(extra.iter().cloned()))?;
            for r in rows {
                let mut rec = vec![
                    r.experiment.clone(),
                    r.seed.to_string(),
                    r.success.to_string(),
                    r.queries.to_string(),
                    r.wall_time_ms.map(|t| t.to_string()).unwrap_or_default(),
                ];
                rec.extend(extra.iter().map(|k| r.payload.get(k).and_then(scalar).unwrap_or_default()));
                c.write_record(rec)?;
            }
            c.flush()?;
        }
    }
    Ok(())
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(rows: &[ResultRow], format: Format, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = std::io::BufWriter::new(std::fs::File::create(p)?);
            write_rows(rows, format, &mut f)?;
            f.flush()?;
        }
        None => {
            let out = std::io::stdout();
            let mut lock = out.lock();
            write_rows(rows, format, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

/// `explicit`, then the config's `output`, then `<dir>/<experiment>.<ext>`;
/// `None` means stdout.
pub fn output_path(cfg: &ExperimentConfig, explicit: Option<&Path>, default_dir: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.clone())
        .or_else(|| default_dir.map(|d| d.join(format!("{}.{}", cfg.experiment, cfg.format.extension()))))
}

pub fn read_rows(text: &str) -> Result<Vec<ResultRow>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Ok(serde_json::from_str(l)?)).collect()
}

// ---- Verification ----

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rows: usize,
    /// `(row number, reason)`, 1-based.
    pub failures: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Re-checks each row's payload for internal consistency.
pub fn verify_rows(rows: &[ResultRow]) -> VerifyReport {
    let mut rep = VerifyReport { rows: rows.len(), failures: Vec::new() };
    for (i, r) in rows.iter().enumerate() {
        let res = find_experiment(&r.experiment).map_err(|e| e.to_string()).and_then(|info| (info.check)(r));
        if let Err(why) = res {
            rep.failures.push((i + 1, why));
        }
    }
    rep
}

type Check = std::result::Result<(), String>;

fn field<'a>(r: &'a ResultRow, k: &str) -> std::result::Result<&'a Value, String> {
    r.payload.get(k).ok_or_else(|| format!("payload lacks `{k}`"))
}

fn f64_of(r: &ResultRow, k: &str) -> std::result::Result<f64, String> {
    field(r, k)?.as_f64().ok_or_else(|| format!("`{k}` is not a number"))
}

fn u64_of(r: &ResultRow, k: &str) -> std::result::Result<u64, String> {
    field(r, k)?.as_u64().ok_or_else(|| format!("`{k}` is not an integer"))
}

fn bool_of(r: &ResultRow, k: &str) -> std::result::Result<bool, String> {
    field(r, k)?.as_bool().ok_or_else(|| format!("`{k}` is not a bool"))
}

fn u64s_of(r: &ResultRow, k: &str) -> std::result::Result<Vec<u64>, String> {
    field(r, k)?
        .as_array()
        .and_then(|a| a.iter().map(Value::as_u64).collect())
        .ok_or_else(|| format!("`{k}` is not an integer list"))
}

fn f64s_of(r: &ResultRow, k: &str) -> std::result::Result<Vec<f64>, String> {
    field(r, k)?
        .as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect())
        .ok_or_else(|| format!("`{k}` is not a number list"))
}

fn expect_success(r: &ResultRow, want: bool) -> Check {
    if r.success == want {
        Ok(())
    } else {
        Err(format!("success is {} but the payload says {want}", r.success))
    }
}

// ---- Experiments ----

fn indices(g: &GroupSpec, h: &HeavyList) -> Vec<u64> {
    h.entries.iter().map(|e| g.index_of(&e.alpha)).collect()
}

fn estimates_sq(h: &HeavyList) -> Vec<f64> {
    h.entries.iter().map(|e| e.estimate.norm_sqr()).collect()
}

fn run_sft_bruteforce(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let built = build_oracle(cfg, &g, seed)?;
    let params = cfg.sft_params(seed, None)?;
    let table = built.oracle.table();
    let mags = dft_full(&table)?.magnitudes_sq();
    let heavy: Vec<u64> = (0..mags.len() as u64).filter(|&i| mags[i as usize] > params.tau).collect();
    let out = sft_run(&built.oracle, &params)?;
    let found = indices(&g, &out);
    let linf = table.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let cap = (2.0 * linf * linf / (params.tau / 2.0)).ceil() as u64;
    let all_heavy_found = heavy.iter().all(|h| found.contains(h));
    let only_half_heavy = found.iter().all(|&i| mags[i as usize] > params.tau / 2.0);
    let within_cap = found.len() as u64 <= cap;
    Ok(vec![Outcome {
        success: all_heavy_found && only_half_heavy && within_cap,
        queries: out.queries_used,
        payload: json!({
            "group": g.to_string(),
            "oracle": cfg.get("oracle.name"),
            "tau": params.tau,
            "heavy": heavy,
            "found": found,
            "found_true_sq": found.iter().map(|&i| mags[i as usize]).collect::<Vec<_>>(),
            "estimates_sq": estimates_sq(&out),
            "list_len": found.len(),
            "cap": cap,
            "all_heavy_found": all_heavy_found,
            "only_half_heavy": only_half_heavy,
            "within_cap": within_cap,
        }),
    }])
}

fn check_sft_bruteforce(r: &ResultRow) -> Check {
    let tau = f64_of(r, "tau")?;
    let heavy = u64s_of(r, "heavy")?;
    let found = u64s_of(r, "found")?;
    let true_sq = f64s_of(r, "found_true_sq")?;
    let all = heavy.iter().all(|h| found.contains(h));
    let only = true_sq.iter().all(|&m| m > tau / 2.0);
    let within = found.len() as u64 <= u64_of(r, "cap")?;
    if (all, only, within) != (bool_of(r, "all_heavy_found")?, bool_of(r, "only_half_heavy")?, bool_of(r, "within_cap")?) {
        return Err("flags disagree with the lists".into());
    }
    expect_success(r, all && only && within)
}

fn run_sft_character(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let built = build_oracle(cfg, &g, seed)?;
    let alpha = built.planted.ok_or_else(|| Error::Config("sft-character needs a planted character".into()))?;
    let params = cfg.sft_params(seed, Some(0.5))?;
    let out = sft_run(&built.oracle, &params)?;
    let found = indices(&g, &out);
    let a = g.index_of(&alpha);
    Ok(vec![Outcome {
        success: found == [a],
        queries: out.queries_used,
        payload: json!({ "group": g.to_string(), "alpha": a, "found": found, "estimates_sq": estimates_sq(&out) }),
    }])
}

fn check_sft_character(r: &ResultRow) -> Check {
    expect_success(r, u64s_of(r, "found")? == [u64_of(r, "alpha")?])
}

/// Largest leakage allowed at distance `k` from the peak.
fn figure1_envelope(k: u64) -> f64 {
    2.0 / k as f64
}

fn run_figure1(cfg: &ExperimentConfig, _seed: u64) -> Result<Vec<Outcome>> {
    let p = cfg.value_or("params.p", 37u64)?;
    let n = cfg.value_or("params.n", 64u64)?;
    let alpha = cfg.value_or("params.alpha", 5u64)?;
    let kmax = cfg.value_or("params.kmax", 8u64)?;
    let sw = SwitchMap::with_target(p, n)?;
    let g = GroupSpec::cyclic(p)?;
    let chi = make_character(&g, &g.element_at(alpha % p), Complex64::new(1.0, 0.0))?;
    let spec = dft_full(&switch_table(&chi.table(), &sw)?)?;
    let magnitude: Vec<f64> = spec.values().iter().map(|v| v.norm()).collect();
    let magnitude_sq: Vec<f64> = spec.magnitudes_sq();
    let argmax = spec.argmax();
    let peak = sw.peak_map(alpha % p);
    // larger of the two sides at distance k, then its running max from the far end
    let side: Vec<f64> =
        (1..=kmax).map(|k| magnitude[((peak + k) % n) as usize].max(magnitude[((peak + n - k % n) % n) as usize])).collect();
    let mut envelope = side.clone();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let within_envelope = side.iter().enumerate().all(|(i, &m)| m <= figure1_envelope(i as u64 + 1));
    Ok(vec![Outcome {
        success: argmax == peak && within_envelope,
        queries: 0,
        payload: json!({
            "p": p, "n": n, "alpha": alpha, "peak": peak, "argmax": argmax,
            "peak_magnitude_sq": magnitude_sq[argmax as usize],
            "side": side, "envelope": envelope, "within_envelope": within_envelope,
            "magnitude": magnitude, "magnitude_sq": magnitude_sq,
        }),
    }])
}

fn check_figure1(r: &ResultRow) -> Check {
    let n = u64_of(r, "n")?;
    let mag = f64s_of(r, "magnitude")?;
    let sq = f64s_of(r, "magnitude_sq")?;
    if mag.len() as u64 != n || sq.len() as u64 != n {
        return Err(format!("expected {n} magnitudes"));
    }
    if mag.iter().zip(&sq).any(|(m, s)| (m * m - s).abs() > 1e-9) {
        return Err("magnitude and magnitude_sq disagree".into());
    }
    let argmax = u64_of(r, "argmax")?;
    if sq.iter().any(|&s| s > sq[argmax as usize]) {
        return Err("argmax is not the maximum".into());
    }
    let peak = u64_of(r, "peak")?;
    let side = f64s_of(r, "side")?;
    for (i, &m) in side.iter().enumerate() {
        let k = i as u64 + 1;
        let want = mag[((peak + k) % n) as usize].max(mag[((peak + n - k) % n) as usize]);
        if (want - m).abs() > 1e-12 {
            return Err(format!("side value at distance {k} does not match the spectrum"));
        }
    }
    let ok = side.iter().enumerate().all(|(i, &m)| m <= figure1_envelope(i as u64 + 1));
    expect_success(r, argmax == peak && ok && bool_of(r, "within_envelope")? == ok)
}

fn run_sft_zp(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let built = build_oracle(cfg, &g, seed)?;
    let params = cfg.sft_params(seed, None)?;
    let out = sft_zp(&built.oracle, &params)?;
    let found = indices(&g, &out);
    let (mode, target, success) = match &built.planted {
        Some(a) if cfg.get("oracle.name") == Some("character") => {
            let a = g.index_of(a);
            ("exact", a, found == [a])
        }
        _ => {
            let top = dft_full(&built.oracle.table())?.argmax();
            ("top", top, found.contains(&top))
        }
    };
    Ok(vec![Outcome {
        success,
        queries: out.queries_used,
        payload: json!({
            "group": g.to_string(), "tau": params.tau, "mode": mode, "target": target,
            "found": found, "estimates_sq": estimates_sq(&out),
        }),
    }])
}

fn check_sft_zp(r: &ResultRow) -> Check {
    let found = u64s_of(r, "found")?;
    let t = u64_of(r, "target")?;
    let want = match field(r, "mode")?.as_str() {
        Some("exact") => found == [t],
        Some("top") => found.contains(&t),
        _ => return Err("unknown mode".into()),
    };
    expect_success(r, want)
}

fn run_concentration_transfer(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let p = g.cyclic_modulus()?;
    let built = build_oracle(cfg, &g, seed)?;
    let n = match cfg.value::<u64>("params.n")? {
        Some(n) => n,
        None => SwitchMap::standard(p)?.n(),
    };
    let rep = concentration_transfer_check(&built.oracle.table(), n, cfg.value_or("params.eps", 0.05)?)?;
    Ok(vec![Outcome { success: rep.within_bound, queries: 0, payload: serde_json::to_value(&rep)? }])
}

fn check_concentration_transfer(r: &ResultRow) -> Check {
    let within = u64_of(r, "lifted_size")? as f64 <= f64_of(r, "bound")?;
    if within != bool_of(r, "within_bound")? {
        return Err("within_bound disagrees with sizes".into());
    }
    expect_success(r, within)
}

fn run_gl_lpn(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let built = build_oracle(cfg, &g, seed)?;
    let s = built.planted.ok_or_else(|| Error::Config("gl-lpn needs oracle.name = lpn".into()))?;
    let rho = cfg.value_or("oracle.rho", 0.0)?;
    let params = cfg.sft_params(seed, Some(0.5))?;
    let (recovered, err) = match hnp::gl_recover(&built.oracle, rho, &params) {
        Ok(e) => (Some(g.index_of(&e)), None),
        Err(Error::NoCandidates(m)) => (None, Some(m)),
        Err(e) => return Err(e),
    };
    let s = g.index_of(&s);
    Ok(vec![Outcome {
        success: recovered == Some(s),
        queries: built.oracle.query_count(),
        payload: json!({ "group": g.to_string(), "rho": rho, "secret": s, "recovered": recovered, "error": err }),
    }])
}

fn check_gl_lpn(r: &ResultRow) -> Check {
    let rec = field(r, "recovered")?.as_u64();
    expect_success(r, rec == Some(u64_of(r, "secret")?))
}

fn candidates_json<T: Serialize>(c: &[hnp::Candidate<T>]) -> Value {
    json!(c.iter().map(|c| json!({ "value": c.value, "score": c.score })).collect::<Vec<_>>())
}

fn check_candidates(r: &ResultRow) -> std::result::Result<Vec<Value>, String> {
    let c = field(r, "candidates")?.as_array().ok_or("`candidates` is not a list")?.clone();
    let scores: Vec<f64> = c.iter().map(|c| c["score"].as_f64().unwrap_or(-1.0)).collect();
    if scores.iter().any(|&s| s < hnp::SCORE_THRESHOLD) {
        return Err("candidate scored below the threshold".into());
    }
    if scores.windows(2).any(|w| w[0] < w[1]) {
        return Err("candidates not sorted by score".into());
    }
    Ok(c.iter().map(|c| c["value"].clone()).collect())
}

fn random_unit<R: Rng>(n: u64, r: &mut R) -> u64 {
    loop {
        let s = r.random_range(1..n);
        if gcd(s, n) == 1 {
            return s;
        }
    }
}

fn run_cm_hnp(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let n = g.cyclic_modulus()?;
    let built = build_oracle(cfg, &g, seed)?;
    let mut r = rng::stream(seed, &[rng::TAG_PLANT, 1]);
    let s = match cfg.get("params.secret") {
        None | Some("random") => random_unit(n, &mut r),
        Some(v) => parse_value("params.secret", v)?,
    };
    let mut inst = HnpInstance::plant(built.oracle, s)?;
    let corruption = cfg.value_or("params.corruption", 0.0)?;
    if corruption > 0.0 {
        let u = Unreliable::new(
            inst.shifted.function(),
            Corruption::Rate(corruption),
            replacement(cfg.get("params.replacement"))?,
            rng::derive_seed(seed, &[rng::TAG_CORRUPT, 1]),
        )?;
        inst = HnpInstance::new(inst.base, QueryOracle::new(u), true)?;
    }
    let params = cfg.sft_params(seed, None)?;
    let (cands, queries) = match hnp::hnp_solve(&inst, &params) {
        Ok(set) => (set.candidates, set.queries),
        Err(Error::NoCandidates(_)) => (Vec::new(), inst.base.query_count() + inst.shifted.query_count()),
        Err(e) => return Err(e),
    };
    Ok(vec![Outcome {
        success: cands.iter().any(|c| c.value == s),
        queries,
        payload: json!({
            "modulus": n, "secret": s, "corruption": corruption, "tau": params.tau,
            "candidates": candidates_json(&cands),
        }),
    }])
}

fn check_cm_hnp(r: &ResultRow) -> Check {
    let vals = check_candidates(r)?;
    let s = u64_of(r, "secret")?;
    expect_success(r, vals.iter().any(|v| v.as_u64() == Some(s)))
}

fn demo_config(cfg: &ExperimentConfig, seed: u64, default_size: u64) -> Result<DemoConfig> {
    let mut d = DemoConfig::new(cfg.value_or("params.size", default_size)?, cfg.value_or("params.error_rate", 0.0)?, seed);
    d.leak = LeakSpec { bit: cfg.value_or("params.bit", 0)?, random: cfg.value_or("params.random", false)?, ..d.leak };
    d.params = cfg.apply_sft(d.params)?;
    Ok(d)
}

fn demo_outcome(rep: hnp::DemoReport) -> Result<Vec<Outcome>> {
    let mut payload = serde_json::to_value(&rep)?;
    payload["candidates"] = candidates_json(&rep.candidates);
    Ok(vec![Outcome { success: rep.success, queries: rep.sft_queries, payload }])
}

fn run_rsa_demo(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    demo_outcome(hnp::rsa_demo(&demo_config(cfg, seed, 16)?)?)
}

fn run_exp_demo(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    demo_outcome(hnp::exp_demo(&demo_config(cfg, seed, 65521)?)?)
}

fn check_demo(r: &ResultRow) -> Check {
    check_candidates(r)?;
    let public = u64s_of(r, "public")?;
    let target = u64_of(r, "target")?;
    let modulus = u64_of(r, "modulus")?;
    let rec = field(r, "recovered")?.as_u64();
    if let Some(c) = rec {
        let holds = match (field(r, "scheme")?.as_str(), public.as_slice()) {
            (Some("rsa"), [e]) => pow_mod(c, *e, modulus) == target,
            (Some("exp"), [g, big_p]) => pow_mod(*g, c, *big_p) == target,
            _ => return Err("unknown scheme or public key shape".into()),
        };
        if !holds {
            return Err(format!("claimed recovery {c} does not match the public target"));
        }
    }
    expect_success(r, rec.is_some())
}

fn run_mvhnp(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let p = g.cyclic_modulus()?;
    let built = build_oracle(cfg, &g, seed)?;
    let dim = cfg.value_or("params.dim", 3usize)?;
    let zeros: Vec<usize> = cfg.list("params.zero", "")?;
    let mut r = rng::stream(seed, &[rng::TAG_PLANT, 2]);
    let s: Vec<u64> = (0..dim).map(|i| if zeros.contains(&i) { 0 } else { r.random_range(1..p) }).collect();
    let inst = MvhnpInstance::plant(built.oracle, &s)?;
    let params = cfg.sft_params(seed, None)?;
    let out = hnp::mvhnp_solve(&inst, &params)?;
    Ok(vec![Outcome {
        success: out.candidates.contains(&s),
        queries: out.candidates.queries,
        payload: json!({
            "p": p, "dim": dim, "secret": s, "flagged": out.flagged,
            "candidates": candidates_json(&out.candidates.candidates),
        }),
    }])
}

fn check_mvhnp(r: &ResultRow) -> Check {
    let vals = check_candidates(r)?;
    let s = field(r, "secret")?.clone();
    expect_success(r, vals.contains(&s))
}

fn run_unreliable_bound(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let g = cfg.group()?;
    let built = build_oracle(cfg, &g, seed)?;
    let corruption = match cfg.value::<usize>("params.set_size")? {
        Some(k) => {
            let mut r = rng::stream(seed, &[rng::TAG_CORRUPT]);
            Corruption::Set(CorruptionSet::from_indices(
                sample(&mut r, g.order() as usize, k).into_iter().map(|i| i as u64),
            ))
        }
        None => Corruption::Rate(cfg.value_or("params.fraction", 0.05)?),
    };
    let u = Unreliable::new(
        built.oracle.function(),
        corruption,
        replacement(cfg.get("params.replacement"))?,
        rng::derive_seed(seed, &[rng::TAG_CORRUPT, 2]),
    )?;
    let set_size = u.corruption_set().len();
    let f = built.oracle.table();
    let o = QueryOracle::new(u).table();
    let (fs, os) = (dft_full(&f)?, dft_full(&o)?);
    let linf = f.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let fraction = set_size as f64 / g.order() as f64;
    let slack: Vec<f64> = fs
        .values()
        .iter()
        .zip(os.values())
        .map(|(a, b)| b.norm() - (a.norm() - 2.0 * fraction * linf))
        .collect();
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let failures = slack.iter().filter(|&&s| s < -UNRELIABLE_TOL).count();
    Ok(vec![Outcome {
        success: failures == 0,
        queries: 0,
        payload: json!({
            "group": g.to_string(), "oracle": cfg.get("oracle.name"), "set_size": set_size,
            "order": g.order(), "fraction": fraction, "linf": linf, "min_slack": min_slack, "failures": failures,
        }),
    }])
}

/// Rounding allowance on the exact coefficient inequality.
pub const UNRELIABLE_TOL: f64 = 1e-9;

fn check_unreliable_bound(r: &ResultRow) -> Check {
    let failures = u64_of(r, "failures")?;
    if (failures == 0) != (f64_of(r, "min_slack")? >= -UNRELIABLE_TOL) {
        return Err("failure count disagrees with the minimum slack".into());
    }
    let frac = u64_of(r, "set_size")? as f64 / u64_of(r, "order")? as f64;
    if (frac - f64_of(r, "fraction")?).abs() > 1e-12 || frac >= 0.5 {
        return Err("corruption fraction inconsistent".into());
    }
    expect_success(r, failures == 0)
}

/// Largest squared coefficient tolerated after a non-affine composition.
pub const COLLAPSE_CEILING: f64 = 0.05;
/// Smallest top coefficient required of the uncomposed `half`.
pub const SOURCE_FLOOR: f64 = 0.4;
/// Smallest coefficient the Mobius counterexample must keep.
pub const MOBIUS_FLOOR: f64 = 0.2;

fn prop1_success(kind: &str, fixture: &str, max_sq: f64, source_sq: f64) -> bool {
    match kind {
        "mobius" => max_sq >= MOBIUS_FLOOR,
        _ => max_sq < COLLAPSE_CEILING && (fixture != "half" || source_sq >= SOURCE_FLOOR),
    }
}

fn run_prop1_sweep(cfg: &ExperimentConfig, _seed: u64) -> Result<Vec<Outcome>> {
    let q = cfg.value_or("params.q", 1031u64)?;
    let degrees: Vec<usize> = cfg.list("params.degrees", "2,3,4,5")?;
    let fixtures: Vec<String> = cfg.list("params.functions", "half,bit5")?;
    let eps = cfg.value_or("params.eps", 0.01)?;
    let g = GroupSpec::cyclic(q)?;
    let mut out = Vec::new();
    let mut push = |kind: &str, fixture: &str, rep: limits::ComposeReport| -> Result<()> {
        let mut payload = serde_json::to_value(&rep)?;
        payload["kind"] = json!(kind);
        payload["fixture"] = json!(fixture);
        out.push(Outcome {
            success: prop1_success(kind, fixture, rep.max_coeff_sq, rep.source_max_coeff_sq),
            queries: 0,
            payload,
        });
        Ok(())
    };
    for name in &fixtures {
        let table = match name.as_str() {
            "half" => make_half(&g)?.table(),
            b if b.starts_with("bit") => make_bit(&g, parse_value("params.functions", &b[3..])?)?.table(),
            other => return Err(Error::Config(format!("unknown fixture {other:?}"))),
        };
        for &d in &degrees {
            push("monomial", name, limits::compose_measure(&table, &RationalMap::monomial(q, d)?, eps)?)?;
        }
    }
    let m: Vec<u64> = cfg.list("params.mobius", "3,5,7,2")?;
    let [a, b, c, d] = m[..] else {
        return Err(Error::Config("params.mobius takes four coefficients".into()));
    };
    let (ma, mb) = (cfg.value_or("params.mobius_alpha", 10u64)?, cfg.value_or("params.mobius_beta", 200u64)?);
    let phi = RationalMap::mobius(q, a, b, c, d)?;
    let f = limits::mobius_counterexample(&phi, ma, mb)?;
    push("mobius", "chi+pullback", limits::compose_measure(&f, &phi, eps)?)?;
    Ok(out)
}

fn check_prop1_sweep(r: &ResultRow) -> Check {
    let kind = field(r, "kind")?.as_str().ok_or("`kind` is not a string")?;
    let fixture = field(r, "fixture")?.as_str().ok_or("`fixture` is not a string")?;
    let (m, s) = (f64_of(r, "max_coeff_sq")?, f64_of(r, "source_max_coeff_sq")?);
    if !(0.0..=1.0 + 1e-9).contains(&m) {
        return Err("squared coefficient of a normalized function outside [0, 1]".into());
    }
    expect_success(r, prop1_success(kind, fixture, m, s))
}

/// Margin on the Weil-derived ceiling for noisy composed characters.
pub const NOISY_MARGIN: f64 = 0.01;

fn run_bias_floor(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let ns: Vec<u64> = cfg.list("params.n", "64,1024,4096")?;
    let mut out = Vec::new();
    for &n in &ns {
        let biases = cfg.execution.map_range((n / 2) as usize, |i| limits::bias_uniform(i as u64 + 1, n));
        let mut min_bias = f64::INFINITY;
        let mut argmin = 0;
        for (i, b) in biases.into_iter().enumerate() {
            let m = b?.norm();
            if m < min_bias {
                min_bias = m;
                argmin = i as u64 + 1;
            }
        }
        let full = limits::bias_uniform(n, n)?.norm();
        out.push(Outcome {
            success: min_bias > 0.5 && full < 1e-12,
            queries: 0,
            payload: json!({ "kind": "bias", "n": n, "min_bias": min_bias, "argmin_t": argmin, "full_bias": full }),
        });
    }
    if let Some(q) = cfg.value::<u64>("params.noisy_q")? {
        let noise_seed = rng::derive_seed(seed, &[rng::TAG_NOISE]);
        let affine = RationalMap::affine(q, cfg.value_or("params.noisy_a", 5)?, cfg.value_or("params.noisy_b", 9)?)?;
        let m = limits::noisy_compose_measure(&affine, &NoiseSpec::uniform(q / 2, noise_seed), q)?;
        out.push(Outcome {
            success: m >= 0.25,
            queries: 0,
            payload: json!({ "kind": "noisy-affine", "q": q, "width": q / 2, "max_coeff_sq": m, "floor": 0.25 }),
        });
        let sq = RationalMap::monomial(q, 2)?;
        let ceiling = (sq.weil_bound() / q as f64).powi(2) + NOISY_MARGIN;
        let m = limits::noisy_compose_measure(&sq, &NoiseSpec::uniform(q / 4, noise_seed), q)?;
        out.push(Outcome {
            success: m <= ceiling,
            queries: 0,
            payload: json!({ "kind": "noisy-square", "q": q, "width": q / 4, "max_coeff_sq": m, "ceiling": ceiling }),
        });
    }
    Ok(out)
}

fn check_bias_floor(r: &ResultRow) -> Check {
    let want = match field(r, "kind")?.as_str() {
        Some("bias") => f64_of(r, "min_bias")? > 0.5 && f64_of(r, "full_bias")? < 1e-12,
        Some("noisy-affine") => f64_of(r, "max_coeff_sq")? >= f64_of(r, "floor")?,
        Some("noisy-square") => f64_of(r, "max_coeff_sq")? <= f64_of(r, "ceiling")?,
        _ => return Err("unknown kind".into()),
    };
    expect_success(r, want)
}

/// Identity tolerance.
pub const IDENTITY_TOL: f64 = 1e-9;

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn identity_errors(g: &GroupSpec, seed: u64) -> Result<BTreeMap<&'static str, f64>> {
    let n = g.order() as usize;
    let mut r = rng::stream(seed, &[rng::TAG_PLANT]);
    let random_table = |r: &mut rng::StreamRng| {
        let v = (0..n).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        FnTable::new(g.clone(), v)
    };
    let f = random_table(&mut r)?;
    let h = random_table(&mut r)?;
    let fs = dft_full(&f)?;
    let hs = dft_full(&h)?;
    let mut e = BTreeMap::new();

    let lhs: f64 = f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
    let rhs: f64 = fs.magnitudes_sq().iter().sum();
    e.insert("parseval", (lhs - rhs).abs());

    let chars: Vec<Vec<Complex64>> =
        g.elements().map(|a| g.elements().map(|x| g.character(&a, &x)).collect()).collect();
    let mut ortho = 0.0f64;
    for (i, ca) in chars.iter().enumerate() {
        for (j, cb) in chars.iter().enumerate() {
            let ip: Complex64 = ca.iter().zip(cb).map(|(a, b)| a * b.conj()).sum::<Complex64>() / n as f64;
            let want = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((ip - want).norm());
        }
    }
    e.insert("orthonormality", ortho);

    e.insert("inverse", max_diff(inverse_dft(&fs)?.values(), f.values()));

    let (c, c_inv) = loop {
        let c = g.random(&mut r);
        if let Ok(ci) = g.ring_inverse(&c) {
            break (c, ci);
        }
    };
    let scaled = dft_full(&FnTable::from_fn(g, |x| f.get(&g.mul(&c, x))))?;
    let want: Vec<Complex64> = g.elements().map(|a| fs.get(&g.mul(&c_inv, &a))).collect();
    e.insert("scaling", max_diff(scaled.values(), &want));

    let a = g.random(&mut r);
    let shifted = dft_full(&FnTable::from_fn(g, |x| f.get(&g.add(x, &a))))?;
    let want: Vec<Complex64> = g.elements().map(|al| g.character(&al, &a) * fs.get(&al)).collect();
    e.insert("shifting", max_diff(shifted.values(), &want));

    let conv = dft_full(&convolve(&f, &h)?)?;
    let want: Vec<Complex64> = fs.values().iter().zip(hs.values()).map(|(x, y)| x * y).collect();
    e.insert("convolution", max_diff(conv.values(), &want));

    if g.sft_capable() {
        let mut indicator = 0.0f64;
        let mut filtered = 0.0f64;
        for level in chain_build(g)? {
            let node = CosetNode { z: level.coset_rep(&g.random(&mut r)), level };
            let filt = FnTable::from_fn(g, |x| filter_eval(&node, x));
            let fspec = dft_full(&filt)?;
            let ind: Vec<Complex64> =
                g.elements().map(|al| Complex64::new(if node.contains(&al) { 1.0 } else { 0.0 }, 0.0)).collect();
            indicator = indicator.max(max_diff(fspec.values(), &ind));
            let cf = dft_full(&convolve(&f, &filt)?)?;
            let want: Vec<Complex64> = fs.values().iter().zip(&ind).map(|(x, y)| x * y).collect();
            filtered = filtered.max(max_diff(cf.values(), &want));
        }
        e.insert("filter_indicator", indicator);
        e.insert("filter_convolution", filtered);
    }
    Ok(e)
}

fn run_identities(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Outcome>> {
    let groups: Vec<String> =
        cfg.get("params.groups").unwrap_or("256;16x16;2^8;4x8x8;3x5x7").split(';').map(|s| s.trim().to_string()).collect();
    let mut out = Vec::new();
    for (i, gs) in groups.iter().enumerate() {
        let g = parse_group(gs)?;
        if g.order() > 1 << 8 {
            return Err(Error::InvalidParams(format!("identity suite runs on |G| <= 256, got {g}")));
        }
        let errors = identity_errors(&g, rng::derive_seed(seed, &[i as u64]))?;
        let worst = errors.values().copied().fold(0.0, f64::max);
        out.push(Outcome {
            success: worst <= IDENTITY_TOL,
            queries: 0,
            payload: json!({ "group": g.to_string(), "errors": errors, "max_error": worst }),
        });
    }
    Ok(out)
}

fn check_identities(r: &ResultRow) -> Check {
    let errs = field(r, "errors")?.as_object().ok_or("`errors` is not an object")?;
    let worst = errs.values().map(|v| v.as_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    if (worst - f64_of(r, "max_error")?).abs() > 0.0 {
        return Err("max_error disagrees with the error table".into());
    }
    expect_success(r, worst <= IDENTITY_TOL)
}
