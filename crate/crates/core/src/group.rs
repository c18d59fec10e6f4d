//! Finite abelian groups `Z_{N1} x ... x Z_{Nm}`, their characters, and the
//! exhaustive Fourier transform used as the reference oracle.
//!
//! One [`Element`] type serves both as a time-domain point `x` and as a
//! frequency `alpha`; which one is meant follows from the argument position.
//! Elements are indexed in row-major order with component 0 most significant.

use std::f64::consts::TAU;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::numth;

pub const MAX_ORDER: u64 = 1 << 62;
pub const MAX_DFT_ORDER: u64 = 1 << 20;
// Largest lcm for which character values come from a cached table.
const ROOT_TABLE_MAX: u64 = 1 << 16;

type Residues = SmallVec<[u64; 4]>;

// ---- GroupSpec ----

#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct GroupSpec {
    moduli: Vec<u64>,
    order: u64,
    // lcm of the moduli; every character value is an lcm-th root of unity
    lcm: u64,
    // lcm / N_i
    scale: Vec<u64>,
    // every modulus a power of two
    pow2: bool,
    // for pow2 groups, bit offset of each component in one random word
    offsets: Vec<u32>,
    // for pow2 groups, the top bit of each component's field in the index
    high: u64,
    // root_of_unity(k, lcm) for all k, built on first use
    roots: Arc<OnceLock<Box<[Complex64]>>>,
}

// Everything but the moduli is derived from them.
impl PartialEq for GroupSpec {
    fn eq(&self, other: &Self) -> bool {
        self.moduli == other.moduli
    }
}

impl Eq for GroupSpec {}

impl Hash for GroupSpec {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.moduli.hash(state);
    }
}

impl GroupSpec {
    pub fn new(moduli: &[u64]) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidGroup("no components".into()));
        }
        let mut order = 1u64;
        let mut lcm = 1u64;
        for &n in moduli {
            if n < 2 {
                return Err(Error::InvalidGroup(format!("modulus {n} < 2")));
            }
            order = order
                .checked_mul(n)
                .filter(|&o| o <= MAX_ORDER)
                .ok_or_else(|| Error::InvalidGroup(format!("order exceeds 2^62: {moduli:?}")))?;
            lcm = lcm / numth::gcd(lcm, n) * n;
        }
        let scale = moduli.iter().map(|&n| lcm / n).collect();
        let pow2 = moduli.iter().all(|n| n.is_power_of_two());
        let offsets = moduli
            .iter()
            .scan(0u32, |off, n| {
                let here = *off;
                *off += n.trailing_zeros();
                Some(here)
            })
            .collect();
        let mut high = 0u64;
        if pow2 {
            let mut pos = 0;
            for &n in moduli.iter().rev() {
                let b = n.trailing_zeros();
                high |= 1 << (pos + b - 1);
                pos += b;
            }
        }
        Ok(GroupSpec { moduli: moduli.to_vec(), order, lcm, scale, pow2, offsets, high, roots: Arc::default() })
    }

    pub fn cyclic(n: u64) -> Result<Self> {
        Self::new(&[n])
    }

    /// `Z_2^m`.
    pub fn binary_cube(m: usize) -> Result<Self> {
        Self::new(&vec![2; m])
    }

    pub fn moduli(&self) -> &[u64] {
        &self.moduli
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn is_cyclic(&self) -> bool {
        self.moduli.len() == 1
    }

    /// True iff every modulus is a power of two.
    pub fn sft_capable(&self) -> bool {
        self.pow2
    }

    /// The single modulus of a cyclic group.
    pub fn cyclic_modulus(&self) -> Result<u64> {
        if self.is_cyclic() {
            Ok(self.moduli[0])
        } else {
            Err(Error::InvalidGroup(format!("{self} is not cyclic")))
        }
    }

    pub fn zero(&self) -> Element {
        Element(SmallVec::from_elem(0, self.dim()))
    }

    /// Reduces each residue modulo its component.
    pub fn element(&self, residues: &[u64]) -> Result<Element> {
        self.check_dim(residues.len())?;
        Ok(Element(residues.iter().zip(&self.moduli).map(|(&r, &n)| r % n).collect()))
    }

    /// Like [`GroupSpec::element`] but for signed representatives.
    pub fn element_signed(&self, residues: &[i64]) -> Result<Element> {
        self.check_dim(residues.len())?;
        Ok(Element(
            residues.iter().zip(&self.moduli).map(|(&r, &n)| r.rem_euclid(n as i64) as u64).collect(),
        ))
    }

    pub fn element_at(&self, mut index: u64) -> Element {
        debug_assert!(index < self.order);
        let mut r: Residues = SmallVec::from_elem(0, self.dim());
        for i in (0..self.dim()).rev() {
            r[i] = index % self.moduli[i];
            index /= self.moduli[i];
        }
        Element(r)
    }

    pub fn index_of(&self, x: &Element) -> u64 {
        debug_assert_eq!(x.dim(), self.dim());
        x.0.iter().zip(&self.moduli).fold(0u64, |acc, (&r, &n)| acc * n + r)
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.order).map(|i| self.element_at(i))
    }

    pub fn contains(&self, x: &Element) -> bool {
        x.dim() == self.dim() && x.0.iter().zip(&self.moduli).all(|(&r, &n)| r < n)
    }

    pub fn check(&self, x: &Element) -> Result<()> {
        self.check_dim(x.dim())?;
        if !self.contains(x) {
            return Err(Error::InvalidParams(format!("{x} is not in {self}")));
        }
        Ok(())
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    pub fn add(&self, a: &Element, b: &Element) -> Element {
        let mut out = self.zero();
        self.add_into(a, b, &mut out);
        out
    }

    pub fn sub(&self, a: &Element, b: &Element) -> Element {
        let mut out = self.zero();
        self.sub_into(a, b, &mut out);
        out
    }

    pub fn neg(&self, a: &Element) -> Element {
        Element(a.0.iter().zip(&self.moduli).map(|(&r, &n)| if r == 0 { 0 } else { n - r }).collect())
    }

    #[inline]
    pub fn add_into(&self, a: &Element, b: &Element, out: &mut Element) {
        if self.pow2 {
            for ((o, (&x, &y)), &n) in out.0.iter_mut().zip(a.0.iter().zip(b.0.iter())).zip(&self.moduli) {
                *o = x.wrapping_add(y) & (n - 1);
            }
            return;
        }
        for ((o, (&x, &y)), &n) in out.0.iter_mut().zip(a.0.iter().zip(b.0.iter())).zip(&self.moduli) {
            let s = x + y;
            *o = if s >= n { s - n } else { s };
        }
    }

    #[inline]
    pub fn sub_into(&self, a: &Element, b: &Element, out: &mut Element) {
        if self.pow2 {
            for ((o, (&x, &y)), &n) in out.0.iter_mut().zip(a.0.iter().zip(b.0.iter())).zip(&self.moduli) {
                *o = x.wrapping_sub(y) & (n - 1);
            }
            return;
        }
        for ((o, (&x, &y)), &n) in out.0.iter_mut().zip(a.0.iter().zip(b.0.iter())).zip(&self.moduli) {
            *o = if x >= y { x - y } else { x + n - y };
        }
    }

    /// Componentwise product in the ring `Z_{N1} x ... x Z_{Nm}`.
    pub fn mul(&self, a: &Element, b: &Element) -> Element {
        Element(
            (0..self.dim()).map(|i| numth::mul_mod(a.0[i], b.0[i], self.moduli[i])).collect(),
        )
    }

    pub fn scalar_mul(&self, k: u64, a: &Element) -> Element {
        Element(a.0.iter().zip(&self.moduli).map(|(&r, &n)| numth::mul_mod(k % n, r, n)).collect())
    }

    /// Componentwise inverse in the ring; errors if some component is not a unit.
    pub fn ring_inverse(&self, a: &Element) -> Result<Element> {
        let r = a
            .0
            .iter()
            .zip(&self.moduli)
            .map(|(&r, &n)| numth::inv_mod(r, n))
            .collect::<Result<Residues>>()?;
        Ok(Element(r))
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        let mut x = self.zero();
        self.random_into(rng, &mut x);
        x
    }

    #[inline]
    pub fn random_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Element) {
        if self.pow2 {
            // order <= 2^62, so one word has bits for every component
            let w = rng.next_u64();
            for ((r, &n), &off) in out.0.iter_mut().zip(&self.moduli).zip(&self.offsets) {
                *r = w.wrapping_shr(off) & (n - 1);
            }
            return;
        }
        for (r, &n) in out.0.iter_mut().zip(&self.moduli) {
            *r = rng.random_range(0..n);
        }
    }

    /// Phase numerator of `chi_alpha(x)` over `lcm`.
    #[inline]
    pub(crate) fn phase(&self, alpha: &Element, x: &Element) -> u64 {
        if self.pow2 {
            // lcm divides 2^64, so reduce once at the end
            let d = self.scale.len();
            let (a, b, s) = (&alpha.0[..d], &x.0[..d], &self.scale[..d]);
            let mut acc = 0u64;
            for i in 0..d {
                acc = acc.wrapping_add(a[i].wrapping_mul(b[i]).wrapping_mul(s[i]));
            }
            return acc & (self.lcm - 1);
        }
        let terms = alpha.0.iter().zip(x.0.iter()).zip(self.moduli.iter().zip(&self.scale));
        let mut acc = 0u64;
        for ((&a, &b), (&n, &s)) in terms {
            let t = if n <= 1 << 32 {
                a * b % n
            } else {
                (a as u128 * b as u128 % n as u128) as u64
            };
            // t * scale < lcm <= 2^62, and acc < lcm, so the sum fits.
            acc += t * s;
            if acc >= self.lcm {
                acc -= self.lcm;
            }
        }
        acc
    }

    pub fn lcm(&self) -> u64 {
        self.lcm
    }

    /// `chi_alpha(x)` without dimension checks.
    #[inline]
    pub fn character(&self, alpha: &Element, x: &Element) -> Complex64 {
        self.root(self.phase(alpha, x))
    }

    /// `x - y` on row-major indices of a power-of-two group. Each component
    /// is a bit field of the index; borrows are kept inside their field.
    #[inline]
    pub(crate) fn packed_sub(&self, x: u64, y: u64) -> u64 {
        debug_assert!(self.pow2);
        let h = self.high;
        ((x | h).wrapping_sub(y & !h)) ^ ((x ^ !y) & h)
    }

    /// `root_of_unity(k, lcm)` for `k < lcm`.
    #[inline]
    pub(crate) fn root(&self, k: u64) -> Complex64 {
        if self.lcm > ROOT_TABLE_MAX {
            return root_of_unity(k, self.lcm);
        }
        let table = self.roots.get_or_init(|| (0..self.lcm).map(|j| root_of_unity(j, self.lcm)).collect());
        table[k as usize]
    }
}

impl TryFrom<Vec<u64>> for GroupSpec {
    type Error = Error;
    fn try_from(v: Vec<u64>) -> Result<Self> {
        GroupSpec::new(&v)
    }
}

impl From<GroupSpec> for Vec<u64> {
    fn from(g: GroupSpec) -> Self {
        g.moduli
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.moduli.iter().map(|n| format!("Z{n}")).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl fmt::Debug for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupSpec({self})")
    }
}

/// `exp(2 pi i k / n)`, exact at quarter turns.
#[inline]
pub fn root_of_unity(k: u64, n: u64) -> Complex64 {
    let k = k % n;
    if k == 0 {
        return Complex64::new(1.0, 0.0);
    }
    // exact values at k/n in {1/4, 1/2, 3/4}
    if n % 2 == 0 && k == n / 2 {
        return Complex64::new(-1.0, 0.0);
    }
    if n % 4 == 0 && k % (n / 4) == 0 {
        return if k == n / 4 { Complex64::new(0.0, 1.0) } else { Complex64::new(0.0, -1.0) };
    }
    // Signed representative keeps the angle in (-pi, pi].
    let signed = if 2 * k > n { k as f64 - n as f64 } else { k as f64 };
    let (s, c) = (TAU * signed / n as f64).sin_cos();
    Complex64::new(c, s)
}

/// `chi_alpha` on row-major indices of a power-of-two group. The phase is
/// linear in the index bits, so it is summed from one table per index byte.
pub(crate) struct PackedCharacter {
    tables: Vec<[u64; 256]>,
    mask: u64,
}

impl PackedCharacter {
    pub(crate) fn new(g: &GroupSpec, alpha: &Element) -> Self {
        debug_assert!(g.pow2);
        // phase of each single index bit; wrapping is exact since lcm | 2^64
        let mut per_bit = Vec::with_capacity(64);
        for i in (0..g.dim()).rev() {
            for t in 0..g.moduli[i].trailing_zeros() {
                per_bit.push(alpha.0[i].wrapping_shl(t).wrapping_mul(g.scale[i]));
            }
        }
        let tables = per_bit
            .chunks(8)
            .map(|bits| {
                let mut t = [0u64; 256];
                for v in 1..256usize {
                    let low = bits.get(v.trailing_zeros() as usize).copied().unwrap_or(0);
                    t[v] = t[v & (v - 1)].wrapping_add(low);
                }
                t
            })
            .collect();
        PackedCharacter { tables, mask: g.lcm - 1 }
    }

    #[inline]
    pub(crate) fn phase(&self, p: u64) -> u64 {
        let mut acc = 0u64;
        for (k, t) in self.tables.iter().enumerate() {
            acc = acc.wrapping_add(t[(p >> (8 * k)) as usize & 255]);
        }
        acc & self.mask
    }
}

// ---- Element ----

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct Element(Residues);

impl Element {
    pub fn residues(&self) -> &[u64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&r| r == 0)
    }

    /// The residue of a one-component element.
    pub fn value(&self) -> u64 {
        debug_assert_eq!(self.dim(), 1);
        self.0[0]
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
            write!(f, "({})", parts.join(","))
        }
    }
}

impl fmt::Debug for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Checked character evaluation.
pub fn char_eval(g: &GroupSpec, alpha: &Element, x: &Element) -> Result<Complex64> {
    g.check(alpha)?;
    g.check(x)?;
    Ok(g.character(alpha, x))
}

/// Centered absolute value `|a|_N = min(a, N - a)` on a cyclic group.
pub fn centered_abs(a: u64, n: u64) -> u64 {
    let a = a % n;
    a.min(n - a)
}

// ---- Full tables ----

/// A function given by its value at every element, in index order.
#[derive(Clone, Debug, PartialEq)]
pub struct FnTable {
    group: GroupSpec,
    values: Vec<Complex64>,
}

impl FnTable {
    pub fn new(group: GroupSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTable);
        }
        if values.len() as u64 != group.order() {
            return Err(Error::InvalidParams(format!(
                "table has {} entries, group {group} has order {}",
                values.len(),
                group.order()
            )));
        }
        Ok(FnTable { group, values })
    }

    pub fn from_fn(group: &GroupSpec, f: impl Fn(&Element) -> Complex64) -> Self {
        let values = group.elements().map(|x| f(&x)).collect();
        FnTable { group: group.clone(), values }
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, x: &Element) -> Complex64 {
        self.values[self.group.index_of(x) as usize]
    }

    pub fn at(&self, index: u64) -> Complex64 {
        self.values[index as usize]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        FnTable { group: self.group.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `|G| * sum |v|^2`-free squared magnitudes, in index order.
    pub fn magnitudes_sq(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Indices of entries with `|v|^2 > tau`, the heavy set of a spectrum.
    pub fn heavy_indices(&self, tau: f64) -> Vec<u64> {
        (0..self.group.order()).filter(|&i| self.values[i as usize].norm_sqr() > tau).collect()
    }

    /// Index of the largest `|v|`, lowest index on ties.
    pub fn argmax(&self) -> u64 {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if v.norm_sqr() > self.values[best].norm_sqr() {
                best = i;
            }
        }
        best as u64
    }
}

/// `(l2_sq, linf)` with `l2_sq = (1/|G|) sum |f(x)|^2`.
pub fn norms(values: &[Complex64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyTable);
    }
    let l2 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() / values.len() as f64;
    let linf = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok((l2, linf))
}

fn check_dft_size(g: &GroupSpec) -> Result<()> {
    if g.order() > MAX_DFT_ORDER {
        return Err(Error::GroupTooLarge { order: g.order(), limit: MAX_DFT_ORDER });
    }
    Ok(())
}

// Sum over x of v(x) * w^{sign * phase(alpha, x)} for every alpha, with w the
// primitive lcm-th root. Quadratic in |G|: x runs in index order through an
// odometer so the phase is updated in O(1) per term.
fn transform(table: &FnTable, sign: i64, scale: f64, exec: Execution) -> Result<FnTable> {
    let g = &table.group;
    check_dft_size(g)?;
    let l = g.lcm();
    let roots: Vec<Complex64> =
        (0..l).map(|k| root_of_unity(if sign < 0 { (l - k) % l } else { k }, l)).collect();
    let n = g.order() as usize;
    let d = g.dim();
    let out = exec.map_range(n, |a| {
        let alpha = g.element_at(a as u64);
        // per-component phase step and current contribution
        let step: Vec<u64> = (0..d).map(|i| alpha.0[i] % g.moduli[i] * g.scale[i] % l).collect();
        let mut part = vec![0u64; d];
        let mut digit = vec![0u64; d];
        let mut phase = 0u64;
        let mut acc = Complex64::new(0.0, 0.0);
        for v in &table.values {
            acc += v * roots[phase as usize];
            for i in (0..d).rev() {
                digit[i] += 1;
                if digit[i] < g.moduli[i] {
                    part[i] = (part[i] + step[i]) % l;
                    phase = (phase + step[i]) % l;
                    break;
                }
                digit[i] = 0;
                phase = (phase + l - part[i]) % l;
                part[i] = 0;
            }
        }
        acc * scale
    });
    Ok(FnTable { group: g.clone(), values: out })
}

/// `f^(alpha) = (1/|G|) sum_x f(x) conj(chi_alpha(x))`.
pub fn dft_full(table: &FnTable) -> Result<FnTable> {
    dft_full_with(table, Execution::default())
}

pub fn dft_full_with(table: &FnTable, exec: Execution) -> Result<FnTable> {
    transform(table, -1, 1.0 / table.group.order() as f64, exec)
}

/// `f(x) = sum_alpha f^(alpha) chi_alpha(x)`.
pub fn inverse_dft(spectrum: &FnTable) -> Result<FnTable> {
    transform(spectrum, 1, 1.0, Execution::default())
}

/// `(f * g)(x) = (1/|G|) sum_y f(x - y) g(y)`, whose transform is `f^ . g^`.
pub fn convolve(f: &FnTable, h: &FnTable) -> Result<FnTable> {
    if f.group != h.group {
        return Err(Error::InvalidParams("convolution of tables on different groups".into()));
    }
    let g = &f.group;
    check_dft_size(g)?;
    let n = g.order();
    let values = Execution::default().map_range(n as usize, |i| {
        let x = g.element_at(i as u64);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut d = g.zero();
        for j in 0..n {
            let y = g.element_at(j);
            g.sub_into(&x, &y, &mut d);
            acc += f.get(&d) * h.values[j as usize];
        }
        acc / n as f64
    });
    Ok(FnTable { group: g.clone(), values })
}

// ---- Subgroup chain ----

/// `H = {x : x_i = 0 mod 2^{l_i}}` inside an SFT-capable group.
///
/// `H^perp = {a : chi_a(h) = 1 for all h in H}` is the set of `a` whose
/// component `i` is a multiple of `2^{n_i - l_i}`, so `|H^perp| = prod 2^{l_i}`.
/// As a frequency-domain coset, `z + H` fixes the low `l_i` bits of each
/// component of `z`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SubgroupLevel {
    #[serde(skip)]
    group: GroupSpec,
    depths: Vec<u32>,
    // per component: bit offset in a random word, mask, left shift into H^perp
    #[serde(skip)]
    draws: Vec<(u32, u64, u32)>,
    // index bits that H^perp may set
    #[serde(skip)]
    perp_mask: u64,
}

impl SubgroupLevel {
    pub fn new(group: &GroupSpec, depths: &[u32]) -> Result<Self> {
        if !group.sft_capable() {
            return Err(Error::NotSftCapable(group.to_string()));
        }
        group.check_dim(depths.len())?;
        for (&l, &n) in depths.iter().zip(group.moduli()) {
            if l > n.trailing_zeros() {
                return Err(Error::InvalidParams(format!("depth {l} exceeds log2({n})")));
            }
        }
        let mut off = 0;
        let draws = depths
            .iter()
            .zip(group.moduli())
            .map(|(&l, &n)| {
                let d = (off, (1u64 << l) - 1, n.trailing_zeros() - l);
                off += l;
                d
            })
            .collect();
        let mut perp_mask = 0u64;
        let mut pos = 0;
        for (&l, &n) in depths.iter().zip(group.moduli()).rev() {
            let b = n.trailing_zeros();
            perp_mask |= ((1u64 << l) - 1) << (pos + b - l);
            pos += b;
        }
        Ok(SubgroupLevel { group: group.clone(), depths: depths.to_vec(), draws, perp_mask })
    }

    /// `H = G`.
    pub fn whole(group: &GroupSpec) -> Result<Self> {
        Self::new(group, &vec![0; group.dim()])
    }

    /// `H = {0}`.
    pub fn trivial(group: &GroupSpec) -> Result<Self> {
        let d: Vec<u32> = group.moduli().iter().map(|n| n.trailing_zeros()).collect();
        Self::new(group, &d)
    }

    pub fn group(&self) -> &GroupSpec {
        &self.group
    }

    pub fn depths(&self) -> &[u32] {
        &self.depths
    }

    pub fn order(&self) -> u64 {
        self.group.order() >> self.depths.iter().sum::<u32>()
    }

    pub fn orth_order(&self) -> u64 {
        1u64 << self.depths.iter().sum::<u32>()
    }

    pub fn contains(&self, x: &Element) -> bool {
        x.0.iter().zip(&self.depths).all(|(&r, &l)| r & ((1u64 << l) - 1) == 0)
    }

    pub fn in_orth(&self, a: &Element) -> bool {
        a.0.iter()
            .zip(&self.depths)
            .zip(self.group.moduli())
            .all(|((&r, &l), &n)| r & ((1u64 << (n.trailing_zeros() - l)) - 1) == 0)
    }

    /// Canonical minimal representative of `z + H`.
    pub fn coset_rep(&self, z: &Element) -> Element {
        Element(z.0.iter().zip(&self.depths).map(|(&r, &l)| r & ((1u64 << l) - 1)).collect())
    }

    pub fn orth_enumerate(&self) -> Vec<Element> {
        let shifts: Vec<u32> =
            self.group.moduli().iter().zip(&self.depths).map(|(n, &l)| n.trailing_zeros() - l).collect();
        let mut out = Vec::with_capacity(self.orth_order() as usize);
        // odometer over prod 2^{l_i}, last component fastest
        let mut cur = vec![0u64; self.depths.len()];
        loop {
            out.push(Element(cur.iter().zip(&shifts).map(|(&c, &s)| c << s).collect()));
            let mut i = cur.len();
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                cur[i] += 1;
                if cur[i] < 1u64 << self.depths[i] {
                    break;
                }
                cur[i] = 0;
            }
        }
    }

    pub fn orth_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Element {
        let mut out = self.group.zero();
        self.orth_sample_into(rng, &mut out);
        out
    }

    /// Row-major indices of `H^perp` are exactly the words inside this mask.
    pub(crate) fn perp_mask(&self) -> u64 {
        self.perp_mask
    }

    #[inline]
    pub fn orth_sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Element) {
        // the depths sum to at most log2 |G| <= 62
        let w = rng.next_u64();
        for (o, &(off, mask, shift)) in out.0.iter_mut().zip(&self.draws) {
            *o = (w.wrapping_shr(off) & mask).wrapping_shl(shift);
        }
    }
}

impl fmt::Debug for SubgroupLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SubgroupLevel({}, {:?})", self.group, self.depths)
    }
}

pub fn orth_enumerate(h: &SubgroupLevel) -> Vec<Element> {
    h.orth_enumerate()
}

pub fn orth_sample<R: Rng + ?Sized>(h: &SubgroupLevel, rng: &mut R) -> Element {
    h.orth_sample(rng)
}

// ---- Tests ----
