//! Negative results at desk scale: heavy coefficients do not survive
//! composition with non-affine rational maps, the Weil-type character sum
//! bound, and the bias of uniformly noisy characters.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::NoiseSpec;
use crate::group::{dft_full, root_of_unity, FnTable, GroupSpec};
use crate::numth::{inv_mod, is_prime, mul_mod};

pub const MAX_DEGREE: usize = 32;
/// Largest modulus accepted by the brute-force measurements.
pub const MAX_MEASURE_Q: u64 = 1 << 12;

// ---- Polynomials over Z_q, coefficients low degree first ----

fn trim(mut p: Vec<u64>) -> Vec<u64> {
    while p.last() == Some(&0) {
        p.pop();
    }
    p
}

fn degree(p: &[u64]) -> usize {
    p.len().saturating_sub(1)
}

fn poly_eval(p: &[u64], x: u64, q: u64) -> u64 {
    p.iter().rev().fold(0, |acc, &c| (mul_mod(acc, x, q) + c) % q)
}

fn derivative(p: &[u64], q: u64) -> Vec<u64> {
    trim(p.iter().enumerate().skip(1).map(|(i, &c)| mul_mod(c, i as u64 % q, q)).collect())
}

fn poly_rem(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let mut a = a.to_vec();
    let lead_inv = inv_mod(*b.last().expect("nonzero divisor"), q).expect("q prime");
    while a.len() >= b.len() && !a.is_empty() {
        let shift = a.len() - b.len();
        let f = mul_mod(*a.last().unwrap(), lead_inv, q);
        for (i, &c) in b.iter().enumerate() {
            a[shift + i] = (a[shift + i] + q - mul_mod(f, c, q)) % q;
        }
        a = trim(a);
    }
    a
}

fn poly_gcd(a: &[u64], b: &[u64], q: u64) -> Vec<u64> {
    let (mut a, mut b) = (trim(a.to_vec()), trim(b.to_vec()));
    while !b.is_empty() {
        let r = poly_rem(&a, &b, q);
        a = b;
        b = r;
    }
    a
}

/// Number of distinct roots of `p` over the algebraic closure (`deg p < q`).
fn distinct_roots(p: &[u64], q: u64) -> usize {
    let d = derivative(p, q);
    if d.is_empty() {
        return 0;
    }
    degree(p) - degree(&poly_gcd(p, &d, q))
}

// ---- Rational maps ----

/// `phi = g / h` on `Z_q`, defined as 0 on the zeros of `h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RationalMap {
    q: u64,
    num: Vec<u64>,
    den: Vec<u64>,
}

impl RationalMap {
    pub fn new(q: u64, num: &[u64], den: &[u64]) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::InvalidParams(format!("modulus {q} is not prime")));
        }
        let num = trim(num.iter().map(|c| c % q).collect());
        let den = trim(den.iter().map(|c| c % q).collect());
        if den.is_empty() {
            return Err(Error::InvalidParams("denominator is identically zero".into()));
        }
        if num.len() > MAX_DEGREE + 1 || den.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidParams(format!("degree above {MAX_DEGREE}")));
        }
        Ok(RationalMap { q, num, den })
    }

    pub fn polynomial(q: u64, coeffs: &[u64]) -> Result<Self> {
        Self::new(q, coeffs, &[1])
    }

    pub fn monomial(q: u64, d: usize) -> Result<Self> {
        let mut c = vec![0; d + 1];
        c[d] = 1;
        Self::polynomial(q, &c)
    }

    pub fn affine(q: u64, a: u64, b: u64) -> Result<Self> {
        Self::polynomial(q, &[b, a])
    }

    /// `(a x + b) / (c x + d)` with `a d - b c != 0`.
    pub fn mobius(q: u64, a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        if (mul_mod(a % q, d % q, q) + q - mul_mod(b % q, c % q, q)) % q == 0 {
            return Err(Error::InvalidParams("degenerate Mobius map (ad = bc)".into()));
        }
        Self::new(q, &[b, a], &[d, c])
    }

    /// Inverse of a Mobius map: `(d x - b) / (-c x + a)`.
    pub fn mobius_inverse(&self) -> Result<Self> {
        if self.num.len() > 2 || self.den.len() > 2 {
            return Err(Error::InvalidParams("not a Mobius map".into()));
        }
        let at = |p: &[u64], i: usize| p.get(i).copied().unwrap_or(0);
        let (a, b, c, d) = (at(&self.num, 1), at(&self.num, 0), at(&self.den, 1), at(&self.den, 0));
        let q = self.q;
        Self::new(q, &[(q - b) % q, d], &[a, (q - c) % q])
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn num(&self) -> &[u64] {
        &self.num
    }

    pub fn den(&self) -> &[u64] {
        &self.den
    }

    /// `max(deg g, deg h)`.
    pub fn degree(&self) -> usize {
        degree(&self.num).max(degree(&self.den))
    }

    pub fn is_pole(&self, x: u64) -> bool {
        poly_eval(&self.den, x % self.q, self.q) == 0
    }

    pub fn poles(&self) -> Vec<u64> {
        if self.den.len() == 1 {
            return Vec::new();
        }
        (0..self.q).filter(|&x| self.is_pole(x)).collect()
    }

    pub fn eval(&self, x: u64) -> u64 {
        let x = x % self.q;
        let h = poly_eval(&self.den, x, self.q);
        if h == 0 {
            return 0;
        }
        mul_mod(poly_eval(&self.num, x, self.q), inv_mod(h, self.q).expect("q prime"), self.q)
    }

    /// `g = c h` for a constant `c`. A non-constant map of degree at most 32
    /// takes any value at most 32 times off its poles, so sampling enough
    /// points decides the question.
    pub fn is_constant(&self) -> bool {
        let mut seen = None;
        let mut checked = 0;
        for x in 0..self.q {
            if self.is_pole(x) {
                continue;
            }
            let v = self.eval(x);
            match seen {
                None => seen = Some(v),
                Some(s) if s != v => return false,
                _ => {}
            }
            checked += 1;
            if checked > MAX_DEGREE + 1 {
                break;
            }
        }
        true
    }

    pub fn is_affine(&self) -> bool {
        self.den.len() == 1 && self.num.len() <= 2
    }

    /// Lemma bound for `sum over non-poles of omega_q^{phi(x)}`.
    pub fn weil_bound(&self) -> f64 {
        weil_bound(degree(&self.num), degree(&self.den), distinct_roots(&self.den, self.q), self.q)
    }
}

pub fn rational_eval(phi: &RationalMap, x: u64) -> u64 {
    phi.eval(x)
}

/// `(max(deg f, deg g) + u - 2) sqrt(q) + delta`, with `(u, delta) = (v, 1)`
/// when `deg f <= deg g` and `(v + 1, 0)` otherwise. `v` counts the distinct
/// zeros of the denominator `g`. Clamped at 0.
pub fn weil_bound(deg_f: usize, deg_g: usize, v: usize, q: u64) -> f64 {
    let (u, delta) = if deg_f <= deg_g { (v, 1.0) } else { (v + 1, 0.0) };
    let k = (deg_f.max(deg_g) + u) as f64 - 2.0;
    (k * (q as f64).sqrt() + delta).max(0.0)
}

/// `sum over non-poles x of omega_q^{phi(x)}`.
pub fn character_sum(phi: &RationalMap) -> Complex64 {
    (0..phi.q).filter(|&x| !phi.is_pole(x)).map(|x| root_of_unity(phi.eval(x), phi.q)).sum()
}

// ---- Composition ----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComposeReport {
    pub q: u64,
    pub d: usize,
    pub max_coeff_sq: f64,
    pub argmax: u64,
    /// Largest squared coefficient of the normalized `f` itself.
    pub source_max_coeff_sq: f64,
    pub source_argmax: u64,
    /// Concentration profile: the top `k` coefficients of `f` leave tail mass `eps`.
    pub k: usize,
    pub eps: f64,
    /// `(d/sqrt q + 2kd/sqrt q + 2d sqrt eps)^2`.
    pub proof_bound: f64,
    /// `C = 2 d sqrt q` as used in the proof.
    pub loose_c: f64,
    /// The lemma's own value for `psi(x) = a phi(x) - b x`.
    pub lemma_c: f64,
}

/// Subtracts the mean and scales to `||f||_2 = 1`.
pub fn normalize(table: &FnTable) -> Result<FnTable> {
    let n = table.values().len() as f64;
    let mean: Complex64 = table.values().iter().sum::<Complex64>() / n;
    let centered = table.map(|v| v - mean);
    let norm = (centered.values().iter().map(|v| v.norm_sqr()).sum::<f64>() / n).sqrt();
    if norm < 1e-12 {
        return Err(Error::InvalidParams("function is constant".into()));
    }
    Ok(centered.map(|v| v / norm))
}

fn check_q(q: u64) -> Result<()> {
    if q > MAX_MEASURE_Q || !is_prime(q) {
        return Err(Error::InvalidParams(format!("measurement modulus {q} must be a prime <= {MAX_MEASURE_Q}")));
    }
    Ok(())
}

fn max_sq(spec: &FnTable) -> (f64, u64) {
    let i = spec.argmax();
    (spec.at(i).norm_sqr(), i)
}

/// Brute-force spectrum of `f o phi` after normalizing `f`; `eps` fixes the
/// tail mass used for the proof-side bound.
pub fn compose_measure(table: &FnTable, phi: &RationalMap, eps: f64) -> Result<ComposeReport> {
    let q = table.group().cyclic_modulus()?;
    if q != phi.q {
        return Err(Error::DimensionMismatch { expected: q as usize, got: phi.q as usize });
    }
    check_q(q)?;
    if phi.is_constant() {
        return Err(Error::InvalidParams("phi is constant".into()));
    }
    let f = normalize(table)?;
    let spec = dft_full(&f)?;
    let composed = FnTable::from_fn(f.group(), |x| f.at(phi.eval(x.value())));
    let cspec = dft_full(&composed)?;
    let (max_coeff_sq, argmax) = max_sq(&cspec);
    let (source_max_coeff_sq, source_argmax) = max_sq(&spec);

    let mut mags = spec.magnitudes_sq();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut tail: f64 = mags.iter().sum();
    let mut k = 0;
    while k < mags.len() && tail > eps {
        tail -= mags[k];
        k += 1;
    }
    let d = phi.degree();
    let (df, rq) = (d as f64, (q as f64).sqrt());
    let proof_bound = (df / rq + 2.0 * k as f64 * df / rq + 2.0 * df * eps.max(0.0).sqrt()).powi(2);
    // psi = (a g - b x h) / h
    let dn = degree(&phi.num).max(degree(&phi.den) + 1);
    let lemma_c = weil_bound(dn, degree(&phi.den), distinct_roots(&phi.den, q), q);
    Ok(ComposeReport {
        q,
        d,
        max_coeff_sq,
        argmax,
        source_max_coeff_sq,
        source_argmax,
        k,
        eps,
        proof_bound,
        loose_c: 2.0 * df * rq,
        lemma_c,
    })
}

/// `f = chi_alpha + chi_beta o phi^{-1}`: composing with the Mobius map `phi`
/// moves a heavy coefficient to `beta` instead of destroying it.
pub fn mobius_counterexample(phi: &RationalMap, alpha: u64, beta: u64) -> Result<FnTable> {
    let inv = phi.mobius_inverse()?;
    let q = phi.q;
    let g = GroupSpec::cyclic(q)?;
    Ok(FnTable::from_fn(&g, |x| {
        let x = x.value();
        root_of_unity(mul_mod(alpha, x, q), q) + root_of_unity(mul_mod(beta, inv.eval(x), q), q)
    }))
}

// ---- Bias ----

/// `(1/T) sum_{x < T} exp(2 pi i x / N)`, summed directly.
pub fn bias_uniform(t: u64, n: u64) -> Result<Complex64> {
    if t < 1 || t > n {
        return Err(Error::InvalidParams(format!("need 1 <= T <= N, got T = {t}, N = {n}")));
    }
    Ok((0..t).map(|x| root_of_unity(x, n)).sum::<Complex64>() / t as f64)
}

/// Largest squared coefficient of `omega_q^{phi(x) + e(x)}`.
pub fn noisy_compose_measure(phi: &RationalMap, noise: &NoiseSpec, q: u64) -> Result<f64> {
    check_q(q)?;
    if phi.q != q {
        return Err(Error::DimensionMismatch { expected: q as usize, got: phi.q as usize });
    }
    noise.validate(q)?;
    let g = GroupSpec::cyclic(q)?;
    let f = FnTable::from_fn(&g, |x| {
        let x = x.value();
        let k = (phi.eval(x) as i64 + noise.draw(x)).rem_euclid(q as i64) as u64;
        root_of_unity(k, q)
    });
    Ok(max_sq(&dft_full(&f)?).0)
}
