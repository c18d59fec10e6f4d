//! Chosen-multiplier hidden number problems.
//!
//! Given query access to `f` and to `f_s(x) = f(s x)`, the scaling property
//! `f_s^(alpha) = f^(alpha s^{-1})` turns heavy lists of both into candidates
//! `alpha beta^{-1}` for `s`. Candidates are ranked by the empirical correlation
//! `|E_x f_s(x) conj(f(c x))|`, which is 1 for `c = s` (and, for odd `f`, for
//! `c = -s` too).

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, AtomicU8, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{make_bit, OracleFn, QueryOracle};
use crate::group::{Element, GroupSpec};
use crate::modswitch::sft_zp;
use crate::numth::{gcd, inv_mod, is_prime, mul_mod, pow_mod};
use crate::rng::{self, prf, unit_f64};
use crate::sft::{sft_run, HeavyList, SftParams};

/// Number of fresh samples used to score a candidate.
pub const VERIFY_SAMPLES: usize = 256;
/// Minimum correlation score for a candidate to be returned.
pub const SCORE_THRESHOLD: f64 = 0.5;

// ---- Instances ----

/// `x -> f(s x mod N)`.
struct Scaled {
    inner: Arc<dyn OracleFn>,
    s: u64,
    n: u64,
}

impl OracleFn for Scaled {
    fn group(&self) -> &GroupSpec {
        self.inner.group()
    }
    fn linf_bound(&self) -> f64 {
        self.inner.linf_bound()
    }
    fn eval(&self, x: &Element) -> Complex64 {
        self.inner.eval(&self.inner.group().element_at(mul_mod(self.s, x.value(), self.n)))
    }
}

pub struct HnpInstance {
    pub modulus: u64,
    pub base: QueryOracle,
    pub shifted: QueryOracle,
    /// Whether `f` is known in closed form (informational).
    pub base_known: bool,
}

impl HnpInstance {
    pub fn new(base: QueryOracle, shifted: QueryOracle, base_known: bool) -> Result<Self> {
        let n = base.group().cyclic_modulus()?;
        if shifted.group() != base.group() {
            return Err(Error::InvalidParams("f and f_s live on different groups".into()));
        }
        Ok(HnpInstance { modulus: n, base, shifted, base_known })
    }

    /// `f_s(x) = f(s x)` for a planted unit `s`.
    pub fn plant(base: QueryOracle, s: u64) -> Result<Self> {
        let n = base.group().cyclic_modulus()?;
        if s % n == 0 || gcd(s % n, n) != 1 {
            return Err(Error::InvalidParams(format!("secret {s} is not a unit mod {n}")));
        }
        let shifted = QueryOracle::new(Scaled { inner: base.function(), s: s % n, n });
        Self::new(base, shifted, true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Candidate<T> {
    pub value: T,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CandidateSet<T> {
    /// Best first; ties broken by value.
    pub candidates: Vec<Candidate<T>>,
    pub queries: u64,
}

impl<T: PartialEq + Ord> CandidateSet<T> {
    pub fn contains(&self, v: &T) -> bool {
        self.candidates.iter().any(|c| &c.value == v)
    }

    pub fn best(&self) -> Option<&T> {
        self.candidates.first().map(|c| &c.value)
    }

    fn sort(&mut self) {
        self.candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.value.cmp(&b.value)));
    }
}

// ---- CM-HNP ----

/// Heavy list on a cyclic group: direct SFT for powers of two, the modulus
/// switch otherwise.
pub fn heavy_list(oracle: &QueryOracle, params: &SftParams) -> Result<HeavyList> {
    if oracle.group().sft_capable() {
        sft_run(oracle, params)
    } else {
        sft_zp(oracle, params)
    }
}

/// `{alpha beta^{-1} : alpha in ls, beta in l, gcd(beta, N) = 1}`, restricted to units.
pub fn match_candidates(l: &[u64], ls: &[u64], n: u64) -> Vec<u64> {
    let mut out = BTreeSet::new();
    for &b in l {
        let Ok(b_inv) = inv_mod(b, n) else { continue };
        for &a in ls {
            let c = mul_mod(a, b_inv, n);
            if c != 0 && gcd(c, n) == 1 {
                out.insert(c);
            }
        }
    }
    out.into_iter().collect()
}

// |mean f_s(x) conj(f(c x))| over the sample points, with f_s values precomputed.
fn correlation(base: &QueryOracle, xs: &[u64], fs: &[Complex64], c: u64, n: u64) -> f64 {
    let g = base.group();
    let acc: Complex64 =
        xs.iter().zip(fs).map(|(&x, &v)| v * base.query(&g.element_at(mul_mod(c, x, n))).conj()).sum();
    acc.norm() / xs.len() as f64
}

fn score_candidates(
    base: &QueryOracle,
    shifted: &QueryOracle,
    cands: &[u64],
    params: &SftParams,
    tag: u64,
) -> (Vec<Candidate<u64>>, u64) {
    let g = shifted.group();
    let n = g.order();
    let mut r = rng::stream(params.seed, &[rng::TAG_VERIFY, tag]);
    let xs: Vec<u64> = (0..VERIFY_SAMPLES).map(|_| r.random_range(0..n)).collect();
    let fs: Vec<Complex64> = xs.iter().map(|&x| shifted.query(&g.element_at(x))).collect();
    let scores = params.execution.map_slice(cands, |&c| correlation(base, &xs, &fs, c, n));
    let kept = cands
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s >= SCORE_THRESHOLD)
        .map(|(&value, score)| Candidate { value, score })
        .collect();
    (kept, (VERIFY_SAMPLES * (1 + cands.len())) as u64)
}

fn values(h: &HeavyList) -> Vec<u64> {
    h.entries.iter().map(|e| e.alpha.value()).collect()
}

fn solve_with_base_list(
    l: &[u64],
    base: &QueryOracle,
    shifted: &QueryOracle,
    params: &SftParams,
    tag: u64,
) -> Result<CandidateSet<u64>> {
    let n = base.group().order();
    let mut p = params.clone();
    p.seed = rng::derive_seed(params.seed, &[rng::TAG_SHIFTED, tag]);
    let ls = heavy_list(shifted, &p)?;
    let cands = match_candidates(l, &values(&ls), n);
    let (kept, q) = score_candidates(base, shifted, &cands, params, tag);
    let mut out = CandidateSet { candidates: kept, queries: ls.queries_used + q };
    if out.candidates.is_empty() {
        return Err(Error::NoCandidates(format!(
            "{} heavy frequencies in f, {} in f_s, {} candidates, none scored >= {SCORE_THRESHOLD}",
            l.len(),
            ls.len(),
            cands.len()
        )));
    }
    out.sort();
    Ok(out)
}

/// Candidates for `s`, best first. Errors with [`Error::NoCandidates`] when no
/// candidate survives scoring.
pub fn hnp_solve(inst: &HnpInstance, params: &SftParams) -> Result<CandidateSet<u64>> {
    let mut p = params.clone();
    p.seed = rng::derive_seed(params.seed, &[rng::TAG_BASE]);
    let l = heavy_list(&inst.base, &p)?;
    let mut out = solve_with_base_list(&values(&l), &inst.base, &inst.shifted, params, 0)?;
    out.queries += l.queries_used;
    Ok(out)
}

// ---- LPN ----

/// The frequency with the largest estimate from SFT at `tau = (1 - 2 rho)^2 / 2`.
pub fn gl_recover(oracle: &QueryOracle, rho: f64, params: &SftParams) -> Result<Element> {
    if !(0.0..0.5).contains(&rho) {
        return Err(Error::InvalidParams(format!("noise rate {rho} outside [0, 1/2)")));
    }
    let mut p = params.clone();
    p.tau = (1.0 - 2.0 * rho).powi(2) / 2.0;
    let out = sft_run(oracle, &p)?;
    out.entries
        .into_iter()
        .next()
        .map(|e| e.alpha)
        .ok_or_else(|| Error::NoCandidates(format!("empty heavy list at tau = {}", p.tau)))
}

// ---- MVHNP ----

/// `x -> f(<s, x> mod p)` on `Z_p^m`.
struct InnerProduct {
    inner: Arc<dyn OracleFn>,
    group: GroupSpec,
    s: Vec<u64>,
    p: u64,
}

impl OracleFn for InnerProduct {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        self.inner.linf_bound()
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let t = x.residues().iter().zip(&self.s).fold(0u64, |acc, (&a, &b)| (acc + mul_mod(a, b, self.p)) % self.p);
        self.inner.eval(&self.inner.group().element_at(t))
    }
}

/// `r -> f_s(c r e_i)`: the coordinate filter with a random nonzero scalar.
struct Coordinate {
    shifted: Arc<dyn OracleFn>,
    group: GroupSpec,
    i: usize,
    c: u64,
    p: u64,
}

impl OracleFn for Coordinate {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        self.shifted.linf_bound()
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let g = self.shifted.group();
        let mut v = vec![0u64; g.dim()];
        v[self.i] = mul_mod(self.c, x.value(), self.p);
        self.shifted.eval(&g.element(&v).expect("dimension fixed at construction"))
    }
}

pub struct MvhnpInstance {
    pub p: u64,
    pub dim: usize,
    pub base: QueryOracle,
    pub shifted: QueryOracle,
}

impl MvhnpInstance {
    /// `f_s(x) = f(<s, x>)` for a planted nonzero vector `s`.
    pub fn plant(base: QueryOracle, s: &[u64]) -> Result<Self> {
        let p = base.group().cyclic_modulus()?;
        if s.is_empty() || s.iter().all(|&v| v % p == 0) {
            return Err(Error::InvalidParams("secret vector must be nonzero".into()));
        }
        let group = GroupSpec::new(&vec![p; s.len()])?;
        let s: Vec<u64> = s.iter().map(|v| v % p).collect();
        let shifted = QueryOracle::new(InnerProduct { inner: base.function(), group, s: s.clone(), p });
        Ok(MvhnpInstance { p, dim: s.len(), base, shifted })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MvhnpOutcome {
    pub candidates: CandidateSet<Vec<u64>>,
    /// Coordinates whose single-variable subproblem produced no candidate;
    /// they are filled with 0.
    pub flagged: Vec<usize>,
}

/// Per-coordinate candidates kept for assembly.
const PER_COORDINATE: usize = 3;
const MAX_COMBINATIONS: usize = 4096;

pub fn mvhnp_solve(inst: &MvhnpInstance, params: &SftParams) -> Result<MvhnpOutcome> {
    let p = inst.p;
    let mut bp = params.clone();
    bp.seed = rng::derive_seed(params.seed, &[rng::TAG_BASE]);
    let l = values(&heavy_list(&inst.base, &bp)?);
    let mut queries = 0u64;
    let mut per_coord: Vec<Vec<u64>> = Vec::with_capacity(inst.dim);
    let mut flagged = Vec::new();
    let zp = inst.base.group().clone();
    for i in 0..inst.dim {
        let c = 1 + rng::stream(params.seed, &[rng::TAG_COORD, i as u64]).random_range(0..p - 1);
        let coord = QueryOracle::new(Coordinate {
            shifted: inst.shifted.function(),
            group: zp.clone(),
            i,
            c,
            p,
        });
        match solve_with_base_list(&l, &inst.base, &coord, params, 1 + i as u64) {
            Ok(set) => {
                queries += set.queries;
                // candidates are for s_i * c
                let c_inv = inv_mod(c, p)?;
                per_coord.push(
                    set.candidates.iter().take(PER_COORDINATE).map(|cand| mul_mod(cand.value, c_inv, p)).collect(),
                );
            }
            Err(Error::NoCandidates(_)) => {
                queries += coord.query_count();
                flagged.push(i);
                per_coord.push(vec![0]);
            }
            Err(e) => return Err(e),
        }
    }

    let mut combos: Vec<Vec<u64>> = vec![Vec::new()];
    for opts in &per_coord {
        let width = if combos.len() * opts.len() > MAX_COMBINATIONS { 1 } else { opts.len() };
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                opts[..width].iter().map(move |&o| {
                    let mut v = prefix.clone();
                    v.push(o);
                    v
                })
            })
            .collect();
    }
    combos.retain(|v| v.iter().any(|&x| x != 0));

    // dense cross-check
    let g = inst.shifted.group();
    let mut r = rng::stream(params.seed, &[rng::TAG_VERIFY, u64::MAX]);
    let xs: Vec<Element> = (0..VERIFY_SAMPLES).map(|_| g.random(&mut r)).collect();
    let fs: Vec<Complex64> = xs.iter().map(|x| inst.shifted.query(x)).collect();
    let scores = params.execution.map_slice(&combos, |v| {
        let acc: Complex64 = xs
            .iter()
            .zip(&fs)
            .map(|(x, &val)| {
                let t = x.residues().iter().zip(v).fold(0u64, |acc, (&a, &b)| (acc + mul_mod(a, b, p)) % p);
                val * inst.base.query(&zp.element_at(t)).conj()
            })
            .sum();
        acc.norm() / VERIFY_SAMPLES as f64
    });
    queries += (VERIFY_SAMPLES * (1 + combos.len())) as u64;
    let mut set = CandidateSet {
        candidates: combos
            .into_iter()
            .zip(scores)
            .filter(|(_, s)| *s >= SCORE_THRESHOLD)
            .map(|(value, score)| Candidate { value, score })
            .collect(),
        queries,
    };
    set.sort();
    Ok(MvhnpOutcome { candidates: set, flagged })
}

// ---- Toy RSA and EXP demos ----

/// A +-1 function on `Z_N` answered by a (simulated) leak oracle, with each
/// distinct query asked once.
struct CachedLeak<F> {
    group: GroupSpec,
    cache: Vec<AtomicU8>,
    calls: AtomicU64,
    leak: F,
}

impl<F: Fn(u64) -> bool + Send + Sync> CachedLeak<F> {
    fn new(n: u64, leak: F) -> Result<Self> {
        Ok(CachedLeak {
            group: GroupSpec::cyclic(n)?,
            cache: (0..n).map(|_| AtomicU8::new(0)).collect(),
            calls: AtomicU64::new(0),
            leak,
        })
    }
}

impl<F: Fn(u64) -> bool + Send + Sync> OracleFn for CachedLeak<F> {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let r = x.value() as usize;
        let bit = match self.cache[r].load(Ordering::Relaxed) {
            0 => {
                self.calls.fetch_add(1, Ordering::Relaxed);
                let b = (self.leak)(r as u64);
                self.cache[r].store(1 + b as u8, Ordering::Relaxed);
                b
            }
            v => v == 2,
        };
        Complex64::new(if bit { -1.0 } else { 1.0 }, 0.0)
    }
}

/// What the simulated oracle leaks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LeakSpec {
    /// Index of the leaked bit of the hidden value.
    pub bit: u32,
    /// Probability that an answer is flipped.
    pub error_rate: f64,
    /// Replace the oracle by independent random bits.
    pub random: bool,
}

impl Default for LeakSpec {
    fn default() -> Self {
        LeakSpec { bit: 0, error_rate: 0.0, random: false }
    }
}

impl LeakSpec {
    fn answer(&self, hidden: u64, query: u64, seed: u64) -> bool {
        let u = prf(seed, query);
        if self.random {
            return u & 1 == 1;
        }
        let flip = unit_f64(u) < self.error_rate;
        ((hidden >> self.bit) & 1 == 1) ^ flip
    }

    fn validate(&self, n: u64) -> Result<()> {
        if !(0.0..0.5).contains(&self.error_rate) {
            return Err(Error::InvalidParams(format!("oracle error rate {} outside [0, 1/2)", self.error_rate)));
        }
        if self.bit >= crate::functions::bit_length(n) {
            return Err(Error::InvalidParams(format!("bit {} out of range for modulus {n}", self.bit)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DemoReport {
    pub scheme: &'static str,
    pub modulus: u64,
    /// `e` for RSA, `(g, P)` for EXP.
    pub public: Vec<u64>,
    /// `x^e mod N` for RSA, `g^x mod P` for EXP.
    pub target: u64,
    pub leak: LeakSpec,
    pub success: bool,
    pub recovered: Option<u64>,
    pub sft_queries: u64,
    /// Distinct questions put to the leak oracle.
    pub oracle_calls: u64,
    pub candidates: Vec<Candidate<u64>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RsaKey {
    pub n: u64,
    pub e: u64,
    #[serde(skip)]
    d: u64,
    #[serde(skip)]
    factors: (u64, u64),
}

impl RsaKey {
    pub fn new(p: u64, q: u64, e: u64) -> Result<Self> {
        if p == q || !is_prime(p) || !is_prime(q) || p < 3 || q < 3 {
            return Err(Error::InvalidParams(format!("degenerate RSA factors {p}, {q}")));
        }
        let n = p.checked_mul(q).ok_or_else(|| Error::InvalidParams("RSA modulus overflows".into()))?;
        let phi = (p - 1) * (q - 1);
        let d = inv_mod(e, phi).map_err(|_| Error::InvalidParams(format!("e = {e} not invertible mod phi")))?;
        Ok(RsaKey { n, e, d, factors: (p, q) })
    }

    /// Two distinct primes of `bits/2` and `bits - bits/2` bits with the top
    /// two bits set, so `N` has exactly `bits` bits and `N > 2^bits / 2`.
    pub fn generate<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Result<Self> {
        if !(8..=24).contains(&bits) {
            return Err(Error::InvalidParams(format!("RSA demo modulus size {bits} outside [8, 24]")));
        }
        let prime = |b: u32, rng: &mut R| loop {
            let lo = 3u64 << (b - 2);
            let c = rng.random_range(lo..1u64 << b) | 1;
            if is_prime(c) {
                return c;
            }
        };
        loop {
            let (p, q) = (prime(bits / 2, rng), prime(bits - bits / 2, rng));
            for e in [65537u64, 3, 5, 7, 11, 13, 17] {
                if let Ok(k) = RsaKey::new(p, q, e) {
                    if k.n >> (bits - 1) == 1 {
                        return Ok(k);
                    }
                }
            }
        }
    }

    pub fn encrypt(&self, m: u64) -> u64 {
        pow_mod(m, self.e, self.n)
    }

    fn decrypt(&self, c: u64) -> u64 {
        pow_mod(c, self.d, self.n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoConfig {
    /// RSA modulus bits, or the prime group order for EXP.
    pub size: u64,
    pub leak: LeakSpec,
    pub seed: u64,
    pub params: SftParams,
}

impl DemoConfig {
    pub fn new(size: u64, error_rate: f64, seed: u64) -> Self {
        DemoConfig {
            size,
            leak: LeakSpec { error_rate, ..LeakSpec::default() },
            seed,
            params: SftParams::new(0.1).samples(64, 128),
        }
    }
}

fn run_demo(
    scheme: &'static str,
    n: u64,
    public: Vec<u64>,
    target: u64,
    cfg: &DemoConfig,
    leak: impl Fn(u64) -> bool + Send + Sync + 'static,
    check: impl Fn(u64) -> bool,
) -> Result<DemoReport> {
    let cached = Arc::new(CachedLeak::new(n, leak)?);
    let shifted = QueryOracle::from_arc(cached.clone());
    let base = make_bit(&GroupSpec::cyclic(n)?, cfg.leak.bit)?;
    let inst = HnpInstance::new(base, shifted, true)?;
    let mut params = cfg.params.clone();
    params.seed = rng::derive_seed(cfg.seed, &[rng::TAG_TRIAL]);
    let (candidates, sft_queries) = match hnp_solve(&inst, &params) {
        Ok(set) => (set.candidates, set.queries),
        Err(Error::NoCandidates(_)) => (Vec::new(), inst.base.query_count() + inst.shifted.query_count()),
        Err(e) => return Err(e),
    };
    let recovered = candidates.iter().map(|c| c.value).find(|&c| check(c));
    Ok(DemoReport {
        scheme,
        modulus: n,
        public,
        target,
        leak: cfg.leak,
        success: recovered.is_some(),
        recovered,
        sft_queries,
        oracle_calls: cached.calls.load(Ordering::Relaxed),
        candidates,
    })
}

/// Recovers `x` from `x^e mod N` given an oracle leaking one bit of RSA
/// plaintexts: `f_x(r) = leak((r^e x^e) mod N) = bit(r x mod N)`.
pub fn rsa_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let bits = u32::try_from(cfg.size).map_err(|_| Error::InvalidParams("modulus size".into()))?;
    let mut r = rng::stream(cfg.seed, &[rng::TAG_PLANT]);
    let key = RsaKey::generate(bits, &mut r)?;
    cfg.leak.validate(key.n)?;
    let n = key.n;
    let x = loop {
        let x = r.random_range(2..n);
        if gcd(x, n) == 1 {
            break x;
        }
    };
    let y = key.encrypt(x);
    let (leak_spec, leak_seed) = (cfg.leak, rng::derive_seed(cfg.seed, &[rng::TAG_NOISE]));
    let k = key.clone();
    let leak = move |rr: u64| {
        let c = mul_mod(pow_mod(rr, k.e, k.n), y, k.n);
        leak_spec.answer(k.decrypt(c), c, leak_seed)
    };
    let pubk = key.clone();
    run_demo("rsa", n, vec![key.e], y, cfg, leak, move |c| pubk.encrypt(c) == y)
}

/// Group `<g>` of prime order `ell` inside `Z_P^*` with `P = k ell + 1` prime.
fn exp_group(ell: u64) -> Result<(u64, u64)> {
    if !is_prime(ell) || ell > 1 << 20 || ell < 5 {
        return Err(Error::InvalidParams(format!("EXP group order {ell} must be a prime in [5, 2^20]")));
    }
    let mut k = 2u64;
    let big_p = loop {
        if is_prime(k * ell + 1) {
            break k * ell + 1;
        }
        k += 2;
    };
    let g = (2..big_p).map(|h| pow_mod(h, k, big_p)).find(|&g| g != 1).expect("a non-residue exists");
    Ok((g, big_p))
}

/// Recovers `x` from `g^x` given an oracle leaking one bit of discrete logs:
/// `f_x(r) = leak(y^r) = bit(r x mod ell)`.
pub fn exp_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let ell = cfg.size;
    let (g, big_p) = exp_group(ell)?;
    cfg.leak.validate(ell)?;
    let mut r = rng::stream(cfg.seed, &[rng::TAG_PLANT]);
    let x = r.random_range(1..ell);
    let y = pow_mod(g, x, big_p);
    // The simulated oracle solves discrete logs by table lookup.
    let mut dlog = HashMap::with_capacity(ell as usize);
    let mut acc = 1u64;
    for t in 0..ell {
        dlog.insert(acc, t);
        acc = mul_mod(acc, g, big_p);
    }
    let (leak_spec, leak_seed) = (cfg.leak, rng::derive_seed(cfg.seed, &[rng::TAG_NOISE]));
    let leak = move |rr: u64| {
        let h = pow_mod(y, rr, big_p);
        leak_spec.answer(dlog[&h], h, leak_seed)
    };
    run_demo("exp", ell, vec![g, big_p], y, cfg, leak, move |c| pow_mod(g, c, big_p) == y)
}

// ---- Tests ----
