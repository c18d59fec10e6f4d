//! Modulus switching: extend a function on `Z_p` by zero to `Z_N` with `N` a
//! power of two, so that SFT can run on it.
//!
//! A character `chi_alpha` on `Z_p` lifts to a function whose spectrum peaks at
//! `beta = round(N alpha / p)` and leaks into neighbours `beta +- k` with
//! magnitude `O(1/k)`.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functions::{OracleFn, QueryOracle};
use crate::group::{dft_full, Element, FnTable, GroupSpec};
use crate::rng;
use crate::sft::{est_coeff, sft_run, HeavyEntry, HeavyList, SftParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SwitchMap {
    p: u64,
    n: u64,
}

impl SwitchMap {
    /// `N` = the smallest power of two `>= p`.
    pub fn standard(p: u64) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidParams(format!("source modulus {p} < 2")));
        }
        Self::with_target(p, p.next_power_of_two())
    }

    /// Any power of two `N >= ceil(p/2)`. Below `p` the lift keeps `f` on
    /// `[0, N)` only.
    pub fn with_target(p: u64, n: u64) -> Result<Self> {
        if p < 2 || !n.is_power_of_two() || n < p.div_ceil(2) || n > 1 << 62 {
            return Err(Error::InvalidParams(format!("no switch map from Z{p} to Z{n}")));
        }
        Ok(SwitchMap { p, n })
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `round(N alpha / p)` with ties rounded up, reduced mod `N`.
    pub fn peak_map(&self, alpha: u64) -> u64 {
        let (p, n) = (self.p as u128, self.n as u128);
        ((2 * n * (alpha as u128 % p) + p) / (2 * p) % n) as u64
    }

    /// `round(p beta / N)` with ties rounded up, reduced mod `p`.
    ///
    /// `inverse_map(peak_map(a)) = a` for every `a` as soon as `N > p`: the
    /// rounding error `e` of the peak satisfies `|p e / N| < 1/2`. For `N < p`
    /// some frequencies collide; see [`SwitchMap::collisions`].
    pub fn inverse_map(&self, beta: u64) -> u64 {
        let (p, n) = (self.p as u128, self.n as u128);
        ((2 * p * (beta as u128 % n) + n) / (2 * n) % p) as u64
    }

    /// Frequencies of `Z_p` that do not survive the round trip.
    pub fn collisions(&self) -> Vec<u64> {
        (0..self.p).filter(|&a| self.inverse_map(self.peak_map(a)) != a).collect()
    }
}

pub fn peak_map(alpha: u64, sw: &SwitchMap) -> u64 {
    sw.peak_map(alpha)
}

struct Switched {
    inner: Arc<dyn OracleFn>,
    group: GroupSpec,
    keep: u64,
}

impl OracleFn for Switched {
    fn group(&self) -> &GroupSpec {
        &self.group
    }
    fn linf_bound(&self) -> f64 {
        self.inner.linf_bound()
    }
    fn eval(&self, x: &Element) -> Complex64 {
        let v = x.value();
        if v < self.keep {
            self.inner.eval(&self.inner.group().element_at(v))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }
}

/// `f~(x) = f(x)` for `x < p`, 0 for `p <= x < N`.
pub fn switch_oracle(inner: &QueryOracle, sw: &SwitchMap) -> Result<QueryOracle> {
    let p = inner.group().cyclic_modulus()?;
    if p != sw.p {
        return Err(Error::InvalidParams(format!("oracle is on Z{p}, switch map expects Z{}", sw.p)));
    }
    Ok(QueryOracle::new(Switched { inner: inner.function(), group: GroupSpec::cyclic(sw.n)?, keep: p.min(sw.n) }))
}

/// The same lift applied to a full table.
pub fn switch_table(table: &FnTable, sw: &SwitchMap) -> Result<FnTable> {
    let p = table.group().cyclic_modulus()?;
    let keep = p.min(sw.n);
    let values = (0..sw.n).map(|x| if x < keep { table.at(x) } else { Complex64::new(0.0, 0.0) }).collect();
    FnTable::new(GroupSpec::cyclic(sw.n)?, values)
}

/// Rigorous upper bound on `|S| = |sum_{x<K} omega_N^{alpha x}|`:
/// `N |1 - omega_N^{alpha K}| / (2 pi |alpha| (1 - (pi alpha / N)^2 / 3))`.
pub fn geom_sum_bound(alpha: f64, k: u64, n: u64) -> Result<f64> {
    let nf = n as f64;
    if alpha == 0.0 || !alpha.is_finite() || alpha.abs() >= nf / 2.0 {
        return Err(Error::InvalidParams(format!("alpha {alpha} outside 0 < |alpha| < N/2")));
    }
    if alpha.fract() == 0.0 && (alpha.abs() as u128 * k as u128) % n as u128 == 0 {
        return Ok(0.0);
    }
    let chord = 2.0 * (PI * alpha * k as f64 / nf).sin().abs();
    let corr = 1.0 - (PI * alpha / nf).powi(2) / 3.0;
    Ok(nf * chord / (2.0 * PI * alpha.abs() * corr))
}

/// SFT for a cyclic group of any modulus: lift to the next power of two, search
/// there at `tau/4`, map candidates back, and keep those whose coefficient on
/// `Z_p`, re-estimated, is at least `tau/2` in squared magnitude.
///
/// Each re-estimate uses `m1 * m2` samples, the budget of one norm estimate,
/// so that coefficients just below `tau/2` are rejected reliably.
pub fn sft_zp(inner: &QueryOracle, params: &SftParams) -> Result<HeavyList> {
    let p = inner.group().cyclic_modulus()?;
    if p.is_power_of_two() {
        return sft_run(inner, params);
    }
    let sw = SwitchMap::standard(p)?;
    let lifted = switch_oracle(inner, &sw)?;
    let mut lift_params = params.clone();
    lift_params.tau = params.tau / 4.0;
    lift_params.seed = rng::derive_seed(params.seed, &[rng::TAG_LIFT]);
    let found = sft_run(&lifted, &lift_params)?;

    let candidates: BTreeSet<u64> = found.entries.iter().map(|e| sw.inverse_map(e.alpha.value())).collect();
    let candidates: Vec<u64> = candidates.into_iter().collect();
    let g = inner.group();
    let mv = found.m1 * found.m2;
    let estimates = params.execution.map_slice(&candidates, |&a| {
        let mut r = rng::stream(params.seed, &[rng::TAG_VERIFY, a]);
        est_coeff(inner, &g.element_at(a), mv, &mut r)
    });
    let entries = candidates
        .iter()
        .zip(estimates)
        .filter(|(_, e)| e.norm_sqr() >= params.tau / 2.0)
        .map(|(&a, estimate)| HeavyEntry { alpha: g.element_at(a), estimate })
        .collect();
    let mut out = HeavyList {
        entries,
        tau_used: params.tau,
        queries_used: found.queries_used + (candidates.len() * mv) as u64,
        nodes_evaluated: found.nodes_evaluated + candidates.len() as u64,
        node_cap: found.node_cap,
        m1: found.m1,
        m2: found.m2,
        chain_len: found.chain_len,
    };
    out.sort();
    Ok(out)
}

// ---- Concentration transfer ----

/// Lift constant in `lifted_size <= C log2(N)^2 / eps * source_size`.
pub const TRANSFER_CONSTANT: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub p: u64,
    pub n: u64,
    pub eps: f64,
    pub source_size: usize,
    pub lifted_size: usize,
    pub source_tail: f64,
    pub lifted_tail: f64,
    pub constant: f64,
    pub bound: f64,
    pub within_bound: bool,
}

// Smallest k such that the mass outside the top k coefficients is <= eps,
// with that tail.
fn min_support(spectrum: &FnTable, eps: f64) -> (usize, f64) {
    let mut mags = spectrum.magnitudes_sq();
    mags.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = mags.iter().sum();
    let mut tail = total;
    for (k, m) in mags.iter().enumerate() {
        if tail <= eps {
            return (k, tail.max(0.0));
        }
        tail -= m;
    }
    (mags.len(), tail.max(0.0))
}

/// Smallest sets `Gamma` with `||f - f|_Gamma||^2 <= eps` on `Z_p` and on the
/// lift to `Z_N`, by brute force.
pub fn concentration_transfer_check(table: &FnTable, n: u64, eps: f64) -> Result<ConcentrationReport> {
    let p = table.group().cyclic_modulus()?;
    if p > 1 << 12 {
        return Err(Error::InvalidParams(format!("p = {p} exceeds 2^12")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParams(format!("eps {eps}")));
    }
    let sw = SwitchMap::with_target(p, n)?;
    let (source_size, source_tail) = min_support(&dft_full(table)?, eps);
    let (lifted_size, lifted_tail) = min_support(&dft_full(&switch_table(table, &sw)?)?, eps);
    let log_n = (n as f64).log2().max(1.0);
    let bound = TRANSFER_CONSTANT * log_n * log_n / eps * source_size as f64;
    Ok(ConcentrationReport {
        p,
        n,
        eps,
        source_size,
        lifted_size,
        source_tail,
        lifted_tail,
        constant: TRANSFER_CONSTANT,
        bound,
        within_bound: lifted_size as f64 <= bound,
    })
}

// ---- Tests ----

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_bit, make_character, make_half, TableFn};

    fn chi(p: u64, a: u64) -> QueryOracle {
        let g = GroupSpec::cyclic(p).unwrap();
        make_character(&g, &g.element_at(a), Complex64::new(1.0, 0.0)).unwrap()
    }

    fn lifted_spectrum(p: u64, a: u64) -> (SwitchMap, FnTable) {
        let sw = SwitchMap::standard(p).unwrap();
        let o = switch_oracle(&chi(p, a), &sw).unwrap();
        (sw, dft_full(&o.table()).unwrap())
    }

    #[test]
    fn degenerate_switch_is_identity() {
        let f = make_half(&GroupSpec::cyclic(64).unwrap()).unwrap();
        let sw = SwitchMap::standard(64).unwrap();
        assert_eq!(sw.n(), 64);
        let o = switch_oracle(&f, &sw).unwrap();
        assert_eq!(o.table().values(), f.table().values());
    }

    #[test]
    fn constant_lifts_to_indicator() {
        let p = 37;
        let g = GroupSpec::cyclic(p).unwrap();
        let one = make_character(&g, &g.zero(), Complex64::new(1.0, 0.0)).unwrap();
        let o = switch_oracle(&one, &SwitchMap::standard(p).unwrap()).unwrap();
        let t = o.table();
        for x in 0..64 {
            assert_eq!(t.at(x).re, if x < p { 1.0 } else { 0.0 });
        }
        assert!((dft_full(&t).unwrap().at(0).re - p as f64 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn figure_one_profile() {
        let (sw, s) = lifted_spectrum(37, 5);
        assert_eq!(sw.peak_map(5), 9);
        assert_eq!(s.argmax(), 9);
        // frozen from an independent numpy computation
        assert!((s.at(9).norm_sqr() - 0.2913).abs() < 5e-4);
        assert!((s.at(8).norm() - 0.4534).abs() < 5e-4);
        assert!((s.at(10).norm() - 0.1495).abs() < 5e-4);
    }

    #[test]
    fn linearity() {
        let p = 37;
        let g = GroupSpec::cyclic(p).unwrap();
        let sw = SwitchMap::standard(p).unwrap();
        let (f, h) = (make_half(&g).unwrap(), chi(p, 11));
        let (a, b) = (Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5));
        let combo = TableFn::new(FnTable::from_fn(&g, |x| a * f.peek(x) + b * h.peek(x)));
        let lc = switch_oracle(&QueryOracle::new(combo), &sw).unwrap();
        let (lf, lh) = (switch_oracle(&f, &sw).unwrap(), switch_oracle(&h, &sw).unwrap());
        for x in GroupSpec::cyclic(64).unwrap().elements() {
            assert_eq!(lc.peek(&x), a * lf.peek(&x) + b * lh.peek(&x));
        }
    }

    #[test]
    fn peak_map_examples() {
        let sw = SwitchMap::standard(37).unwrap();
        assert_eq!(sw.peak_map(0), 0);
        assert_eq!(sw.peak_map(5), 9);
        // ties round up
        let tie = SwitchMap::with_target(4, 2).unwrap();
        assert_eq!(tie.peak_map(1), 1); // 0.5 -> 1
        assert_eq!(tie.peak_map(3), 0); // 1.5 -> 2 = 0 mod 2
    }

    #[test]
    fn round_trip_exhaustive() {
        for (p, n) in [(1021, 2048), (1021, 1024), (37, 64), (509, 512)] {
            assert!(SwitchMap::with_target(p, n).unwrap().collisions().is_empty(), "p={p} n={n}");
        }
        // shrinking below p loses injectivity
        let shrunk = SwitchMap::with_target(1021, 512).unwrap();
        assert!(!shrunk.collisions().is_empty());
        assert!(SwitchMap::with_target(1021, 256).is_err());
        assert!(SwitchMap::with_target(37, 48).is_err());
    }

    fn direct_sum(alpha: f64, k: u64, n: u64) -> f64 {
        (0..k).map(|x| Complex64::from_polar(1.0, 2.0 * PI * alpha * x as f64 / n as f64)).sum::<Complex64>().norm()
    }

    #[test]
    fn geom_bound_examples() {
        assert_eq!(geom_sum_bound(16.0, 4, 64).unwrap(), 0.0);
        assert!(direct_sum(16.0, 4, 64) < 1e-12);
        assert!(geom_sum_bound(1.0, 37, 64).unwrap() >= direct_sum(1.0, 37, 64));
        let n = 1024;
        let (b4, b8) = (geom_sum_bound(4.0, n / 3, n).unwrap(), geom_sum_bound(8.0, n / 3, n).unwrap());
        let (d4, d8) = (direct_sum(4.0, n / 3, n), direct_sum(8.0, n / 3, n));
        assert!(((b8 / b4) - 0.5).abs() < 0.05 && ((d8 / d4) - 0.5).abs() < 0.05, "{} {}", b8 / b4, d8 / d4);
        assert!(geom_sum_bound(0.0, 3, 64).is_err());
        assert!(geom_sum_bound(32.0, 3, 64).is_err());
    }

    #[test]
    fn geom_bound_is_rigorous() {
        for n in [16u64, 64, 1024] {
            for k in [1, 3, n / 3, n / 2, n - 1] {
                for step in 1..40 {
                    let alpha = step as f64 * (n as f64 / 2.0 - 0.01) / 40.0;
                    assert!(geom_sum_bound(alpha, k, n).unwrap() + 1e-9 >= direct_sum(alpha, k, n));
                    assert!(geom_sum_bound(-alpha, k, n).unwrap() + 1e-9 >= direct_sum(-alpha, k, n));
                }
            }
        }
    }

    fn sample_alphas(p: u64) -> Vec<u64> {
        let mut v: Vec<u64> = (0..p).step_by((p as usize / 23).max(1)).collect();
        // frequencies whose peak sits nearest a half-integer
        let sw = SwitchMap::standard(p).unwrap();
        let mut by_frac: Vec<u64> = (1..p).collect();
        by_frac.sort_by(|&a, &b| {
            let f = |a: u64| ((sw.n() * a) as f64 / p as f64).fract();
            (f(a) - 0.5).abs().total_cmp(&(f(b) - 0.5).abs())
        });
        v.extend(&by_frac[..4]);
        v
    }

    #[test]
    fn leakage_decay_and_peak_floor() {
        for p in [37u64, 509, 1021] {
            for a in sample_alphas(p) {
                let (sw, s) = lifted_spectrum(p, a);
                let n = sw.n();
                let peak = sw.peak_map(a);
                for k in 1..n / 2 {
                    for b in [(peak + k) % n, (peak + n - k) % n] {
                        assert!(s.at(b).norm() <= 2.0 / k as f64, "p={p} a={a} k={k}");
                    }
                }
                // The 0.4 floor needs p/N near 1; at p = 37 (p/N = 0.58) the
                // worst case is 0.2559.
                let floor = if p == 37 { 0.25 } else { 0.4 };
                assert!(s.at(peak).norm_sqr() >= floor, "p={p} a={a} {}", s.at(peak).norm_sqr());
            }
        }
    }

    #[test]
    fn sft_zp_finds_planted_character() {
        let p = 1021;
        let g = GroupSpec::cyclic(p).unwrap();
        for seed in 0..5u64 {
            let a = 1 + seed * 197 % (p - 1);
            let out = sft_zp(&chi(p, a), &SftParams::new(0.3).samples(128, 128).seed(seed)).unwrap();
            assert_eq!(out.alphas(), vec![g.element_at(a)]);
        }
    }

    #[test]
    fn sft_zp_half_contains_heaviest() {
        let p = 1021;
        let g = GroupSpec::cyclic(p).unwrap();
        let f = make_half(&g).unwrap();
        let best = dft_full(&f.table()).unwrap().argmax();
        let out = sft_zp(&f, &SftParams::new(0.15).samples(128, 256).seed(3)).unwrap();
        assert!(out.contains(&g.element_at(best)));
    }

    #[test]
    fn sft_zp_near_msb_bit() {
        let p = 1021;
        let g = GroupSpec::cyclic(p).unwrap();
        let f = make_bit(&g, 9).unwrap();
        let s = dft_full(&f.table()).unwrap();
        let out = sft_zp(&f, &SftParams::new(0.1).samples(128, 256).seed(8)).unwrap();
        assert!(!out.is_empty());
        for e in &out.entries {
            assert!(s.get(&e.alpha).norm_sqr() > 0.05, "{} {}", e.alpha, s.get(&e.alpha).norm_sqr());
        }
    }

    #[test]
    fn transfer_reports() {
        let p = 37;
        let t = chi(p, 5).table();
        let r = concentration_transfer_check(&t, 64, 0.05).unwrap();
        assert_eq!(r.source_size, 1);
        assert!(r.lifted_size > 1 && r.within_bound);

        let g = GroupSpec::cyclic(509).unwrap();
        let r = concentration_transfer_check(&make_half(&g).unwrap().table(), 512, 0.05).unwrap();
        assert!(r.lifted_size <= 50 * r.source_size, "{r:?}");
        assert!(r.within_bound);

        // p/N close to 1 keeps the lifted constant's tail under eps
        let g = GroupSpec::cyclic(61).unwrap();
        let one = FnTable::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let r = concentration_transfer_check(&one, 64, 0.05).unwrap();
        assert_eq!((r.source_size, r.lifted_size), (1, 1));
    }
}
