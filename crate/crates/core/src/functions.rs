//! Query oracles: the function zoo, the unreliable-oracle wrapper, and
//! closed-form coefficient predictions used as fixtures.
//!
//! Randomized oracles never store their draws. The noise at `x` is a pure
//! function of `(seed, index(x))`, so repeated and concurrent queries agree
//! bit for bit and storage does not grow with the number of queries.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{centered_abs, root_of_unity, Element, FnTable, GroupSpec, PackedCharacter};
use crate::rng::{self, prf, unit_f64};

/// A function on a finite abelian group that can be evaluated anywhere.
pub trait OracleFn: Send + Sync {
    fn group(&self) -> &GroupSpec;
    /// Declared upper bound on `|f(x)|`.
    fn linf_bound(&self) -> f64;
    fn eval(&self, x: &Element) -> Complex64;
    /// `eval` at the element with row-major index `p`. The SFT inner loop
    /// calls this on power-of-two groups.
    fn eval_index(&self, p: u64) -> Complex64 {
        self.eval(&self.group().element_at(p))
    }
}

/// Query access to an [`OracleFn`] with a query counter.
pub struct QueryOracle {
    f: Arc<dyn OracleFn>,
    queries: AtomicU64,
}

impl QueryOracle {
    pub fn new(f: impl OracleFn + 'static) -> Self {
        Self::from_arc(Arc::new(f))
    }

    pub fn from_arc(f: Arc<dyn OracleFn>) -> Self {
        QueryOracle { f, queries: AtomicU64::new(0) }
    }

    #[inline]
    pub fn query(&self, x: &Element) -> Complex64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.f.eval(x)
    }

    #[inline]
    pub(crate) fn peek_index(&self, p: u64) -> Complex64 {
        self.f.eval_index(p)
    }

    /// Evaluation outside the query budget, for brute-force reference checks.
    #[inline]
    pub fn peek(&self, x: &Element) -> Complex64 {
        self.f.eval(x)
    }

    pub fn group(&self) -> &GroupSpec {
        self.f.group()
    }

    pub fn linf_bound(&self) -> f64 {
        self.f.linf_bound()
    }

    /// Records `n` queries made through [`QueryOracle::peek`] in a hot loop.
    #[inline]
    pub(crate) fn charge(&self, n: u64) {
        self.queries.fetch_add(n, Ordering::Relaxed);
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn reset_count(&self) {
        self.queries.store(0, Ordering::Relaxed);
    }

    pub fn function(&self) -> Arc<dyn OracleFn> {
        Arc::clone(&self.f)
    }

    /// Same function, fresh counter.
    pub fn fork(&self) -> QueryOracle {
        QueryOracle::from_arc(self.function())
    }

    /// The full value table (uncounted).
    pub fn table(&self) -> FnTable {
        FnTable::from_fn(self.group(), |x| self.peek(x))
    }
}

impl fmt::Debug for QueryOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QueryOracle({}, queries={})", self.group(), self.query_count())
    }
}

// ---- Characters ----

/// `sum_k c_k chi_{alpha_k}`.
pub struct CharacterSum {
    group: GroupSpec,
    terms: Vec<(Element, Complex64)>,
    linf: f64,
    // one per term on power-of-two groups, else empty
    packed: Vec<PackedCharacter>,
}

impl OracleFn for CharacterSum {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        self.linf
    }
    fn eval(&self, x: &Element) -> Complex64 {
        self.terms.iter().map(|(a, c)| c * self.group.character(a, x)).sum()
    }
    fn eval_index(&self, p: u64) -> Complex64 {
        if self.packed.is_empty() {
            return self.eval(&self.group.element_at(p));
        }
        self.terms.iter().zip(&self.packed).map(|((_, c), chi)| c * self.group.root(chi.phase(p))).sum()
    }
}

pub fn make_character(g: &GroupSpec, alpha: &Element, coeff: Complex64) -> Result<QueryOracle> {
    make_character_sum(g, &[(alpha.clone(), coeff)])
}

/// `linf_bound` is the triangle-inequality bound `sum |c_k|`.
pub fn make_character_sum(g: &GroupSpec, terms: &[(Element, Complex64)]) -> Result<QueryOracle> {
    if terms.is_empty() {
        return Err(Error::InvalidParams("character sum with no terms".into()));
    }
    for (a, c) in terms {
        g.check(a)?;
        if !c.re.is_finite() || !c.im.is_finite() {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
    }
    let linf = terms.iter().map(|(_, c)| c.norm()).sum();
    let packed = if g.sft_capable() { terms.iter().map(|(a, _)| PackedCharacter::new(g, a)).collect() } else { Vec::new() };
    Ok(QueryOracle::new(CharacterSum { group: g.clone(), terms: terms.to_vec(), linf, packed }))
}

// ---- Noise ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    /// `e` uniform on `[0, width - 1]`.
    UniformInterval { width: u64 },
    /// `e = round(sigma * Z)` for standard normal `Z`.
    Gaussian { sigma: f64 },
    /// `e` in {0, 1}, 1 with probability `rate`.
    Flip { rate: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn uniform(width: u64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::UniformInterval { width }, seed }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Gaussian { sigma }, seed }
    }

    pub fn flip(rate: f64, seed: u64) -> Self {
        NoiseSpec { kind: NoiseKind::Flip { rate }, seed }
    }

    /// Checks the parameter against a modulus `n`.
    pub fn validate(&self, n: u64) -> Result<()> {
        match self.kind {
            NoiseKind::UniformInterval { width } if width < 1 || width > n / 2 => {
                Err(Error::InvalidParams(format!("interval width {width} outside [1, {}]", n / 2)))
            }
            NoiseKind::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                Err(Error::InvalidParams(format!("gaussian sigma {sigma}")))
            }
            NoiseKind::Flip { rate } if !(0.0..0.5).contains(&rate) => {
                Err(Error::InvalidParams(format!("flip rate {rate} outside [0, 1/2)")))
            }
            _ => Ok(()),
        }
    }

    /// The noise value at element index `index`.
    pub fn draw(&self, index: u64) -> i64 {
        match self.kind {
            NoiseKind::UniformInterval { width } => {
                (unit_f64(prf(self.seed, index)) * width as f64) as i64
            }
            NoiseKind::Gaussian { sigma } => {
                if sigma == 0.0 {
                    return 0;
                }
                let mut r = rng::stream(self.seed, &[rng::TAG_NOISE, index]);
                let z: f64 = StandardNormal.sample(&mut r);
                (sigma * z).round() as i64
            }
            NoiseKind::Flip { rate } => (unit_f64(prf(self.seed, index)) < rate) as i64,
        }
    }
}

/// `omega_N^{alpha x + e(x)}` on `Z_N`.
pub struct NoisyCharacter {
    group: GroupSpec,
    n: u64,
    alpha: u64,
    noise: NoiseSpec,
}

impl OracleFn for NoisyCharacter {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let x = x.value();
        let e = self.noise.draw(x) as i128;
        let k = (self.alpha as i128 * x as i128 + e).rem_euclid(self.n as i128) as u64;
        root_of_unity(k, self.n)
    }
}

pub fn make_noisy_character(g: &GroupSpec, alpha: &Element, noise: NoiseSpec) -> Result<QueryOracle> {
    let n = g.cyclic_modulus()?;
    g.check(alpha)?;
    if matches!(noise.kind, NoiseKind::Flip { .. }) {
        return Err(Error::InvalidParams("noisy characters take interval or gaussian noise".into()));
    }
    noise.validate(n)?;
    Ok(QueryOracle::new(NoisyCharacter { group: g.clone(), n, alpha: alpha.value(), noise }))
}

// ---- Half and bits ----

/// +1 on `[0, N/2)`, -1 elsewhere.
pub struct Half {
    group: GroupSpec,
    n: u64,
}

impl OracleFn for Half {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        Complex64::new(if 2 * x.value() < self.n { 1.0 } else { -1.0 }, 0.0)
    }
}

pub fn make_half(g: &GroupSpec) -> Result<QueryOracle> {
    let n = g.cyclic_modulus()?;
    Ok(QueryOracle::new(Half { group: g.clone(), n }))
}

/// `(-1)^{bit i of x}` on the canonical residue.
pub struct Bit {
    group: GroupSpec,
    i: u32,
}

impl OracleFn for Bit {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        Complex64::new(if (x.value() >> self.i) & 1 == 0 { 1.0 } else { -1.0 }, 0.0)
    }
}

/// Number of bits needed for residues of `Z_n`.
pub fn bit_length(n: u64) -> u32 {
    64 - (n - 1).leading_zeros()
}

pub fn make_bit(g: &GroupSpec, i: u32) -> Result<QueryOracle> {
    let n = g.cyclic_modulus()?;
    if i >= bit_length(n) {
        return Err(Error::InvalidParams(format!("bit {i} out of range for Z{n}")));
    }
    Ok(QueryOracle::new(Bit { group: g.clone(), i }))
}

/// Support of `bit_i` on `Z_{2^k}` with the envelope `min(1, 2^{k-i}/|alpha|)`.
///
/// The support is the odd multiples of `2^{k-i-1}`. The exact magnitude at
/// `alpha = j 2^{k-i-1}` is `1 / (2^i |sin(pi j / 2^{i+1})|)`, which is at most
/// half the envelope, so the constant 1 leaves a factor-two margin.
pub fn bit_support_predict(k: u32, i: u32) -> Result<Vec<(u64, f64)>> {
    if i >= k || k > 62 {
        return Err(Error::InvalidParams(format!("need 0 <= i < k <= 62, got i={i}, k={k}")));
    }
    let n = 1u64 << k;
    let step = 1u64 << (k - i - 1);
    Ok((0..1u64 << i)
        .map(|t| {
            let a = (2 * t + 1) * step;
            let env = ((1u64 << (k - i)) as f64 / centered_abs(a, n) as f64).min(1.0);
            (a, env)
        })
        .collect())
}

// ---- LPN ----

/// `(-1)^{<x, s> + e(x)}` on `Z_2^m` with Bernoulli(rho) noise `e`.
pub struct Lpn {
    group: GroupSpec,
    s: Element,
    noise: NoiseSpec,
}

impl Lpn {
    pub fn new(g: &GroupSpec, s: &Element, rho: f64, seed: u64) -> Result<Self> {
        if !g.moduli().iter().all(|&n| n == 2) {
            return Err(Error::InvalidGroup(format!("LPN needs Z2^m, got {g}")));
        }
        g.check(s)?;
        let noise = NoiseSpec::flip(rho, seed);
        noise.validate(2)?;
        Ok(Lpn { group: g.clone(), s: s.clone(), noise })
    }

    pub fn secret(&self) -> &Element {
        &self.s
    }

    pub fn is_flipped(&self, x: &Element) -> bool {
        self.noise.draw(self.group.index_of(x)) == 1
    }

    /// The realized flip set `I`, as element indices.
    pub fn flip_set(&self) -> Vec<u64> {
        (0..self.group.order()).filter(|&i| self.noise.draw(i) == 1).collect()
    }
}

impl OracleFn for Lpn {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let dot = x.residues().iter().zip(self.s.residues()).fold(0, |acc, (a, b)| acc ^ (a & b));
        let e = self.noise.draw(self.group.index_of(x)) as u64;
        Complex64::new(if (dot ^ e) == 0 { 1.0 } else { -1.0 }, 0.0)
    }
}

pub fn make_lpn<R: Rng + ?Sized>(g: &GroupSpec, s: &Element, rho: f64, rng: &mut R) -> Result<QueryOracle> {
    Ok(QueryOracle::new(Lpn::new(g, s, rho, rng.random())?))
}

// ---- Random signs ----

/// Independent uniform +-1 values; no heavy structure.
pub struct RandomSign {
    group: GroupSpec,
    seed: u64,
}

impl RandomSign {
    pub fn new(g: &GroupSpec, seed: u64) -> Self {
        RandomSign { group: g.clone(), seed }
    }
}

impl OracleFn for RandomSign {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        1.0
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let u = prf(self.seed, self.group.index_of(x));
        Complex64::new(if u & 1 == 0 { 1.0 } else { -1.0 }, 0.0)
    }
}

// ---- Tables ----

/// A function given by its full table.
pub struct TableFn {
    table: FnTable,
    linf: f64,
}

impl TableFn {
    pub fn new(table: FnTable) -> Self {
        let linf = table.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        TableFn { table, linf }
    }
}

impl OracleFn for TableFn {
    fn group(&self) -> &GroupSpec {
        self.table.group()
    }
    fn linf_bound(&self) -> f64 {
        self.linf
    }
    fn eval(&self, x: &Element) -> Complex64 {
        self.table.get(x)
    }
}

// ---- Unreliable oracles ----

/// Explicit corruption set `I`, stored as element indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CorruptionSet {
    indices: BTreeSet<u64>,
}

impl CorruptionSet {
    pub fn new(g: &GroupSpec, elements: impl IntoIterator<Item = Element>) -> Result<Self> {
        let mut indices = BTreeSet::new();
        for x in elements {
            g.check(&x)?;
            indices.insert(g.index_of(&x));
        }
        Ok(CorruptionSet { indices })
    }

    pub fn from_indices(indices: impl IntoIterator<Item = u64>) -> Self {
        CorruptionSet { indices: indices.into_iter().collect() }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Corruption {
    Set(CorruptionSet),
    /// Each element is corrupted independently with this probability.
    Rate(f64),
}

/// What the wrapper returns on `I`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Replacement {
    /// `-f(x)`: the worst case for the coefficient bound.
    #[default]
    Negate,
    /// `|f(x)| e^{i theta}` with a uniform random phase.
    RandomPhase,
}

/// `O(x) = f(x)` off `I`, a replacement value with `|O(x)| <= |f(x)|` on `I`.
pub struct Unreliable {
    inner: Arc<dyn OracleFn>,
    corruption: Corruption,
    replacement: Replacement,
    seed: u64,
}

impl Unreliable {
    pub fn new(inner: Arc<dyn OracleFn>, corruption: Corruption, replacement: Replacement, seed: u64) -> Result<Self> {
        let order = inner.group().order();
        match &corruption {
            Corruption::Set(s) => {
                if s.indices.iter().any(|&i| i >= order) {
                    return Err(Error::InvalidParams("corruption index outside the group".into()));
                }
                if 2 * s.len() as u64 >= order {
                    return Err(Error::InvalidParams(format!(
                        "corruption fraction {}/{order} is not below 1/2",
                        s.len()
                    )));
                }
            }
            Corruption::Rate(r) => {
                if !(0.0..0.5).contains(r) {
                    return Err(Error::InvalidParams(format!("corruption rate {r} outside [0, 1/2)")));
                }
            }
        }
        Ok(Unreliable { inner, corruption, replacement, seed })
    }

    pub fn is_corrupted_index(&self, index: u64) -> bool {
        match &self.corruption {
            Corruption::Set(s) => s.indices.contains(&index),
            Corruption::Rate(r) => unit_f64(prf(self.seed, index)) < *r,
        }
    }

    /// The realized `I`, as element indices.
    pub fn corruption_set(&self) -> Vec<u64> {
        (0..self.inner.group().order()).filter(|&i| self.is_corrupted_index(i)).collect()
    }
}

impl OracleFn for Unreliable {
    fn group(&self) -> &GroupSpec {
        self.inner.group()
    }
    fn linf_bound(&self) -> f64 {
        self.inner.linf_bound()
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let v = self.inner.eval(x);
        let idx = self.inner.group().index_of(x);
        if !self.is_corrupted_index(idx) {
            return v;
        }
        match self.replacement {
            Replacement::Negate => -v,
            Replacement::RandomPhase => {
                let theta = std::f64::consts::TAU * unit_f64(prf(self.seed ^ rng::TAG_CORRUPT, idx));
                Complex64::from_polar(v.norm(), theta)
            }
        }
    }
}

pub fn unreliable_wrap<R: Rng + ?Sized>(
    inner: &QueryOracle,
    corruption: Corruption,
    replacement: Replacement,
    rng: &mut R,
) -> Result<QueryOracle> {
    Ok(QueryOracle::new(Unreliable::new(inner.function(), corruption, replacement, rng.random())?))
}

// ---- Tests ----
