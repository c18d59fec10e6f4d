//! The significant Fourier transform: binary search over frequency-domain
//! cosets `z + H`, pruned by sampled estimates of the filtered norm
//! `||f_{z+H}||^2 = sum_{alpha in z+H} |f^(alpha)|^2`.
//!
//! The chain `G = H_0 > H_1 > ... > {0}` refines one bit at a time,
//! component-major: component 0 first, then component 1, and so on. Because
//! `z + H` with `H = {x : x = 0 mod 2^l}` fixes the low `l` bits of the
//! frequency, a split on component `i` reveals the next frequency bit from the
//! bottom, while the filter's time-domain support `H^perp` grows from the top
//! bit down (`{0, 2^{n-1}}` at the first split).

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::functions::QueryOracle;
use crate::group::{Element, GroupSpec, PackedCharacter, SubgroupLevel};
use crate::rng::{self, StreamRng};

// ---- Parameters ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Samples {
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SftParams {
    /// Threshold on `|f^(alpha)|^2`.
    pub tau: f64,
    pub delta: f64,
    pub m1: Samples,
    pub m2: Samples,
    /// Max live cosets per level; `None` for `ceil(2 M^2 / (tau/2))`.
    pub node_cap: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl SftParams {
    pub fn new(tau: f64) -> Self {
        SftParams {
            tau,
            delta: 0.05,
            m1: Samples::Auto,
            m2: Samples::Auto,
            node_cap: None,
            seed: 0,
            execution: Execution::default(),
        }
    }

    pub fn samples(mut self, m1: usize, m2: usize) -> Self {
        self.m1 = Samples::Fixed(m1);
        self.m2 = Samples::Fixed(m2);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn node_cap(mut self, cap: usize) -> Self {
        self.node_cap = Some(cap);
        self
    }

    pub fn execution(mut self, e: Execution) -> Self {
        self.execution = e;
        self
    }

    /// Fixes sample counts and node cap for a function bounded by `linf` on a
    /// chain of `chain_len` levels.
    pub fn resolve(&self, linf: f64, chain_len: usize) -> Result<Resolved> {
        if !(linf > 0.0 && linf.is_finite()) {
            return Err(Error::InvalidParams(format!("amplitude bound {linf}")));
        }
        if !(self.tau > 0.0 && self.tau <= linf * linf * (1.0 + 1e-12)) {
            return Err(Error::InvalidParams(format!("tau {} outside (0, {}]", self.tau, linf * linf)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParams(format!("delta {} outside (0, 1)", self.delta)));
        }
        let auto_cap = (2.0 * linf * linf / (self.tau / 2.0)).ceil() as usize;
        let node_cap = match self.node_cap {
            Some(0) => return Err(Error::InvalidParams("node_cap must be at least 1".into())),
            Some(c) => c,
            None => auto_cap,
        };
        let lambda = self.tau.sqrt() / 4.0;
        let delta_prime = self.delta / (2.0 * node_cap as f64 * chain_len as f64);
        let auto_m = chernoff_samples(linf, lambda, delta_prime)? as usize;
        let pick = |s: Samples| match s {
            Samples::Auto => Ok(auto_m),
            Samples::Fixed(0) => Err(Error::InvalidParams("sample counts must be at least 1".into())),
            Samples::Fixed(m) => Ok(m),
        };
        Ok(Resolved { m1: pick(self.m1)?, m2: pick(self.m2)?, node_cap })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Resolved {
    pub m1: usize,
    pub m2: usize,
    pub node_cap: usize,
}

/// Smallest `m` with `2 exp(-lambda^2 m / (2 M^2)) <= delta_prime`.
pub fn chernoff_samples(amp: f64, lambda: f64, delta_prime: f64) -> Result<u64> {
    if !(amp > 0.0 && lambda > 0.0) || !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::InvalidParams(format!(
            "chernoff_samples(M={amp}, lambda={lambda}, delta'={delta_prime})"
        )));
    }
    let ok = |m: u64| 2.0 * (-lambda * lambda * m as f64 / (2.0 * amp * amp)).exp() <= delta_prime * (1.0 + 1e-12);
    let x = 2.0 * amp * amp * (2.0 / delta_prime).ln() / (lambda * lambda);
    let mut m = x.ceil().max(1.0) as u64;
    while !ok(m) {
        m += 1;
    }
    while m > 1 && ok(m - 1) {
        m -= 1;
    }
    Ok(m)
}

// ---- Cosets and filters ----

/// The frequency coset `z + H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct CosetNode {
    pub z: Element,
    pub level: SubgroupLevel,
}

impl CosetNode {
    /// `0 + G`.
    pub fn root(g: &GroupSpec) -> Result<Self> {
        Ok(CosetNode { z: g.zero(), level: SubgroupLevel::whole(g)? })
    }

    /// The two cosets of `next` inside this one; `next` must be an index-2
    /// refinement of this node's level.
    pub fn children(&self, next: &SubgroupLevel) -> Result<[CosetNode; 2]> {
        let cur = self.level.depths();
        let mut split = None;
        for (i, (&a, &b)) in cur.iter().zip(next.depths()).enumerate() {
            if b == a + 1 && split.is_none() {
                split = Some(i);
            } else if a != b {
                split = None;
                break;
            }
        }
        let i = split.ok_or_else(|| Error::InvalidParams("next level is not an index-2 refinement".into()))?;
        let g = self.level.group();
        let mut bump = vec![0u64; g.dim()];
        bump[i] = 1u64 << cur[i];
        let other = g.add(&self.z, &g.element(&bump)?);
        Ok([
            CosetNode { z: self.z.clone(), level: next.clone() },
            CosetNode { z: other, level: next.clone() },
        ])
    }

    pub fn contains(&self, alpha: &Element) -> bool {
        self.level.coset_rep(alpha) == self.z
    }
}

/// `h_{z+H}(x) = chi_z(x) |H|` on `H^perp`, 0 elsewhere. Its transform is the
/// indicator of `z + H`.
pub fn filter_eval(node: &CosetNode, x: &Element) -> Complex64 {
    if node.level.in_orth(x) {
        node.level.group().character(&node.z, x) * node.level.order() as f64
    } else {
        Complex64::new(0.0, 0.0)
    }
}

/// Index-2 chain from `G` down to `{0}`, component-major, one bit at a time.
pub fn chain_build(g: &GroupSpec) -> Result<Vec<SubgroupLevel>> {
    if !g.sft_capable() {
        return Err(Error::NotSftCapable(g.to_string()));
    }
    let mut depths = vec![0u32; g.dim()];
    let mut chain = vec![SubgroupLevel::new(g, &depths)?];
    for (i, &n) in g.moduli().iter().enumerate() {
        for _ in 0..n.trailing_zeros() {
            depths[i] += 1;
            chain.push(SubgroupLevel::new(g, &depths)?);
        }
    }
    Ok(chain)
}

// ---- Estimators ----

/// `(1/m1) sum_i f(x_i) chi_z(-x_i)` for uniform `x_i`.
pub fn est_coeff<R: Rng + ?Sized>(oracle: &QueryOracle, z: &Element, m1: usize, rng: &mut R) -> Complex64 {
    let g = oracle.group();
    let mut x = g.zero();
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..m1 {
        g.random_into(rng, &mut x);
        acc += oracle.peek(&x) * g.character(z, &x).conj();
    }
    oracle.charge(m1 as u64);
    acc / m1 as f64
}

/// `(1/m1) sum_i |(1/m2) sum_j f(x_i - y_ij) chi_z(y_ij)|^2` with `x_i` uniform
/// in `G` and `y_ij` uniform in `H^perp`. Works on row-major indices: in a
/// power-of-two group each component is a bit field, a uniform `x` is a random
/// word, and a uniform `y` is a random word inside `H^perp`'s mask.
pub fn est_norm_sq<R: Rng + ?Sized>(oracle: &QueryOracle, node: &CosetNode, m1: usize, m2: usize, rng: &mut R) -> f64 {
    let g = oracle.group();
    let chi = PackedCharacter::new(g, &node.z);
    let (top, perp) = (g.order() - 1, node.level.perp_mask());
    let mut acc = 0.0;
    for _ in 0..m1 {
        let x = rng.next_u64() & top;
        let mut inner = Complex64::new(0.0, 0.0);
        for _ in 0..m2 {
            let y = rng.next_u64() & perp;
            inner += oracle.peek_index(g.packed_sub(x, y)) * g.root(chi.phase(y));
        }
        acc += (inner / m2 as f64).norm_sqr();
    }
    oracle.charge((m1 * m2) as u64);
    acc / m1 as f64
}

// ---- Main procedure ----

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeavyEntry {
    pub alpha: Element,
    pub estimate: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeavyList {
    /// Sorted by `|estimate|^2` descending, then by frequency.
    pub entries: Vec<HeavyEntry>,
    pub tau_used: f64,
    pub queries_used: u64,
    pub nodes_evaluated: u64,
    pub node_cap: usize,
    pub m1: usize,
    pub m2: usize,
    pub chain_len: usize,
}

impl HeavyList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn alphas(&self) -> Vec<Element> {
        self.entries.iter().map(|e| e.alpha.clone()).collect()
    }

    pub fn contains(&self, alpha: &Element) -> bool {
        self.entries.iter().any(|e| &e.alpha == alpha)
    }

    pub(crate) fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            b.estimate.norm_sqr().total_cmp(&a.estimate.norm_sqr()).then_with(|| a.alpha.cmp(&b.alpha))
        });
    }
}

fn node_stream(seed: u64, tag: u64, depth: usize, g: &GroupSpec, z: &Element) -> StreamRng {
    rng::stream(seed, &[tag, depth as u64, g.index_of(z)])
}

/// Every `tau`-heavy frequency, with probability at least `1 - delta`, and
/// none that is not `tau/2`-heavy.
pub fn sft_run(oracle: &QueryOracle, params: &SftParams) -> Result<HeavyList> {
    let g = oracle.group().clone();
    let chain = chain_build(&g)?;
    let r = params.resolve(oracle.linf_bound(), chain.len())?;
    let exec = params.execution;
    let half_tau = params.tau / 2.0;

    let mut live = vec![CosetNode::root(&g)?];
    let mut norm_evals = 0u64;
    for (depth, level) in chain.iter().enumerate().skip(1) {
        let mut children = Vec::with_capacity(2 * live.len());
        for node in &live {
            children.extend(node.children(level)?);
        }
        let est = exec.map_slice(&children, |c| {
            let mut rng = node_stream(params.seed, rng::TAG_NORM, depth, &g, &c.z);
            est_norm_sq(oracle, c, r.m1, r.m2, &mut rng)
        });
        norm_evals += children.len() as u64;
        live = children.into_iter().zip(est).filter(|(_, e)| *e >= half_tau).map(|(c, _)| c).collect();
        if live.len() > r.node_cap {
            return Err(Error::NodeCapExceeded { level: depth, live: live.len(), cap: r.node_cap });
        }
        if live.is_empty() {
            break;
        }
    }

    let leaf_depth = chain.len();
    let estimates = exec.map_slice(&live, |leaf| {
        let mut rng = node_stream(params.seed, rng::TAG_COEFF, leaf_depth, &g, &leaf.z);
        est_coeff(oracle, &leaf.z, r.m1, &mut rng)
    });
    let coeff_evals = live.len() as u64;
    let entries = live
        .into_iter()
        .zip(estimates)
        .filter(|(_, e)| e.norm_sqr() >= half_tau)
        .map(|(leaf, estimate)| HeavyEntry { alpha: leaf.z, estimate })
        .collect();

    let mut out = HeavyList {
        entries,
        tau_used: params.tau,
        queries_used: norm_evals * (r.m1 * r.m2) as u64 + coeff_evals * r.m1 as u64,
        nodes_evaluated: norm_evals + coeff_evals,
        node_cap: r.node_cap,
        m1: r.m1,
        m2: r.m2,
        chain_len: chain.len(),
    };
    out.sort();
    Ok(out)
}

// ---- Tests ----

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{make_character, make_character_sum, make_half, RandomSign};
    use crate::group::{dft_full, FnTable};
    use std::collections::BTreeSet;

    fn one() -> Complex64 {
        Complex64::new(1.0, 0.0)
    }

    #[test]
    fn chernoff_examples() {
        assert_eq!(chernoff_samples(1.0, 1.0, 2.0 * (-2.0f64).exp()).unwrap(), 4);
        assert_eq!(chernoff_samples(1.0, 0.1, 1e-6).unwrap(), 2902);
        for (l, d) in [(0.3, 0.01), (0.05, 1e-4), (0.5, 0.2)] {
            let m1 = chernoff_samples(1.0, l, d).unwrap() as f64;
            let m2 = chernoff_samples(2.0, l, d).unwrap() as f64;
            assert!((m2 / m1 - 4.0).abs() < 4.0 / m1 + 1e-9);
        }
        assert!(chernoff_samples(0.0, 1.0, 0.1).is_err());
        assert!(chernoff_samples(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn chernoff_is_smallest() {
        for &(amp, l, d) in &[(1.0, 0.2, 0.05), (1.5, 0.1, 1e-3), (0.7, 0.4, 0.3)] {
            let m = chernoff_samples(amp, l, d).unwrap() as f64;
            let f = |m: f64| 2.0 * (-l * l * m / (2.0 * amp * amp)).exp();
            assert!(f(m) <= d * (1.0 + 1e-12));
            assert!(m == 1.0 || f(m - 1.0) > d);
        }
    }

    #[test]
    fn chain_examples() {
        let z2 = GroupSpec::cyclic(2).unwrap();
        let c = chain_build(&z2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].order(), c[1].order()), (2, 1));

        let cube = GroupSpec::binary_cube(5).unwrap();
        let c = chain_build(&cube).unwrap();
        assert_eq!(c.len(), 6);
        for (j, h) in c.iter().enumerate() {
            assert_eq!(h.order(), 1 << (5 - j));
        }

        let g = GroupSpec::new(&[4, 2]).unwrap();
        let c = chain_build(&g).unwrap();
        let depths: Vec<Vec<u32>> = c.iter().map(|h| h.depths().to_vec()).collect();
        assert_eq!(depths, vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![2, 1]]);
        // expanding every node down the chain reaches each frequency exactly once
        let mut nodes = vec![CosetNode::root(&g).unwrap()];
        for h in &c[1..] {
            nodes = nodes.iter().flat_map(|n| n.children(h).unwrap()).collect();
        }
        let leaves: BTreeSet<Element> = nodes.into_iter().map(|n| n.z).collect();
        assert_eq!(leaves, g.elements().collect());

        assert!(chain_build(&GroupSpec::cyclic(6).unwrap()).is_err());
    }

    #[test]
    fn children_partition_parent() {
        let g = GroupSpec::new(&[8, 4]).unwrap();
        let chain = chain_build(&g).unwrap();
        let mut nodes = vec![CosetNode::root(&g).unwrap()];
        for h in &chain[1..] {
            let mut next = Vec::new();
            for n in &nodes {
                let [a, b] = n.children(h).unwrap();
                assert_eq!(a.z, h.coset_rep(&a.z));
                assert_eq!(b.z, h.coset_rep(&b.z));
                for alpha in g.elements().filter(|al| n.contains(al)) {
                    assert!(a.contains(&alpha) ^ b.contains(&alpha));
                }
                next.push(a);
                next.push(b);
            }
            nodes = next;
        }
        let bad = SubgroupLevel::new(&g, &[2, 1]).unwrap();
        assert!(CosetNode::root(&g).unwrap().children(&bad).is_err());
    }

    #[test]
    fn filter_first_splits() {
        let n = 6;
        let g = GroupSpec::cyclic(1 << n).unwrap();
        let chain = chain_build(&g).unwrap();
        let [evens, _] = CosetNode::root(&g).unwrap().children(&chain[1]).unwrap();
        let support: Vec<u64> = (0..1 << n).filter(|&x| filter_eval(&evens, &g.element_at(x)).norm() > 0.0).collect();
        assert_eq!(support, vec![0, 1 << (n - 1)]);

        let cube = GroupSpec::binary_cube(4).unwrap();
        let chain = chain_build(&cube).unwrap();
        let [first, _] = CosetNode::root(&cube).unwrap().children(&chain[1]).unwrap();
        let support: Vec<Element> =
            cube.elements().filter(|x| filter_eval(&first, x).norm() > 0.0).collect();
        assert_eq!(support, vec![cube.zero(), cube.element(&[1, 0, 0, 0]).unwrap()]);
    }

    #[test]
    fn filter_transform_is_coset_indicator() {
        for g in [GroupSpec::binary_cube(8).unwrap(), GroupSpec::new(&[4, 8, 2]).unwrap()] {
            let chain = chain_build(&g).unwrap();
            let mut nodes = vec![CosetNode::root(&g).unwrap()];
            for h in &chain[1..] {
                nodes = nodes.iter().flat_map(|n| n.children(h).unwrap()).collect();
                // check a few nodes per level
                for node in nodes.iter().step_by(nodes.len().div_ceil(3)) {
                    let t = FnTable::from_fn(&g, |x| filter_eval(node, x));
                    let s = dft_full(&t).unwrap();
                    for a in g.elements() {
                        let want = if node.contains(&a) { 1.0 } else { 0.0 };
                        assert!((s.get(&a) - Complex64::new(want, 0.0)).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn est_coeff_examples() {
        let g = GroupSpec::binary_cube(10).unwrap();
        let z = g.element(&[1, 0, 1, 1, 0, 1, 0, 0, 1, 1]).unwrap();
        let chi = make_character(&g, &z, one()).unwrap();
        let mut r = rng::stream(1, &[]);
        for m1 in [1, 7, 100] {
            assert!((est_coeff(&chi, &z, m1, &mut r) - one()).norm() < 1e-12);
        }
        // exhaustive average against an orthogonal character
        let beta = g.element(&[0, 0, 1, 1, 0, 1, 0, 0, 1, 1]).unwrap();
        let chi_b = make_character(&g, &beta, one()).unwrap();
        let full: Complex64 =
            g.elements().map(|x| chi_b.query(&x) * g.character(&z, &x).conj()).sum::<Complex64>() / g.order() as f64;
        assert!(full.norm() < 1e-9);
    }

    #[test]
    fn est_coeff_half_accuracy() {
        let g = GroupSpec::cyclic(1024).unwrap();
        let f = make_half(&g).unwrap();
        let truth = dft_full(&f.table()).unwrap();
        let z = g.element_at(1);
        let good = (0..100u64)
            .filter(|&s| (est_coeff(&f, &z, 2000, &mut rng::stream(s, &[])) - truth.get(&z)).norm() < 0.05)
            .count();
        assert!(good >= 95, "{good}");
    }

    #[test]
    fn est_norm_examples() {
        let g = GroupSpec::cyclic(256).unwrap();
        let a = g.element_at(77);
        let chi = make_character(&g, &a, one()).unwrap();
        let root = CosetNode::root(&g).unwrap();
        assert!((est_norm_sq(&chi, &root, 5, 3, &mut rng::stream(0, &[])) - 1.0).abs() < 1e-12);

        let chain = chain_build(&g).unwrap();
        let mut inside = 0;
        let mut outside = 0;
        for s in 0..100u64 {
            let mut node = root.clone();
            // walk to depth 4 along alpha, and take the sibling too
            for h in &chain[1..=4] {
                node = node.children(h).unwrap().into_iter().find(|c| c.contains(&a)).unwrap();
            }
            let [c0, c1] = node.children(&chain[5]).unwrap();
            let (yes, no) = if c0.contains(&a) { (c0, c1) } else { (c1, c0) };
            let mut r = rng::stream(s, &[]);
            inside += ((est_norm_sq(&chi, &yes, 64, 64, &mut r) - 1.0).abs() < 0.1) as usize;
            outside += (est_norm_sq(&chi, &no, 64, 64, &mut r) < 0.1) as usize;
        }
        assert!(inside >= 95 && outside >= 95, "{inside} {outside}");
    }

    #[test]
    fn est_norm_mixture_split() {
        let g = GroupSpec::binary_cube(10).unwrap();
        let a1 = g.element(&[0, 1, 1, 0, 0, 1, 0, 1, 1, 0]).unwrap();
        let a2 = g.element(&[1, 0, 0, 1, 1, 0, 1, 0, 0, 1]).unwrap();
        let f = make_character_sum(&g, &[(a1, Complex64::new(0.7, 0.0)), (a2, Complex64::new(0.5, 0.0))]).unwrap();
        let chain = chain_build(&g).unwrap();
        let [c0, c1] = CosetNode::root(&g).unwrap().children(&chain[1]).unwrap();
        let mut r = rng::stream(3, &[]);
        let e0 = est_norm_sq(&f, &c0, 400, 64, &mut r);
        let e1 = est_norm_sq(&f, &c1, 400, 64, &mut r);
        assert!((e0 - 0.49).abs() < 0.05 && (e1 - 0.25).abs() < 0.05, "{e0} {e1}");
    }

    #[test]
    fn refinement_is_monotone() {
        // brute force: ||f_{child}||^2 <= ||f_{parent}||^2
        let g = GroupSpec::new(&[8, 4]).unwrap();
        let t = FnTable::from_fn(&g, |x| Complex64::new((x.residues()[0] as f64).sin(), x.residues()[1] as f64));
        let s = dft_full(&t).unwrap();
        let mass = |n: &CosetNode| g.elements().filter(|a| n.contains(a)).map(|a| s.get(&a).norm_sqr()).sum::<f64>();
        let chain = chain_build(&g).unwrap();
        let mut nodes = vec![CosetNode::root(&g).unwrap()];
        for h in &chain[1..] {
            let mut next = Vec::new();
            for n in &nodes {
                let kids = n.children(h).unwrap();
                let m = mass(n);
                assert!(kids.iter().all(|k| mass(k) <= m + 1e-12));
                assert!((kids.iter().map(mass).sum::<f64>() - m).abs() < 1e-9);
                next.extend(kids);
            }
            nodes = next;
        }
    }

    #[test]
    fn finds_single_character() {
        let g = GroupSpec::binary_cube(16).unwrap();
        let a = g.random(&mut rng::stream(11, &[]));
        let chi = make_character(&g, &a, one()).unwrap();
        let out = sft_run(&chi, &SftParams::new(0.5).samples(16, 16).seed(4)).unwrap();
        assert_eq!(out.alphas(), vec![a]);
        assert!((out.entries[0].estimate - one()).norm() < 1e-9);
    }

    #[test]
    fn mixture_output_is_exactly_the_heavy_pair() {
        let g = GroupSpec::binary_cube(10).unwrap();
        let mut r = rng::stream(5, &[]);
        let (a1, a2, a3) = (g.random(&mut r), g.random(&mut r), g.random(&mut r));
        let f = make_character_sum(
            &g,
            &[
                (a1.clone(), Complex64::new(0.7, 0.0)),
                (a2.clone(), Complex64::new(0.5, 0.0)),
                (a3, Complex64::new(0.2, 0.0)),
            ],
        )
        .unwrap();
        let out = sft_run(&f, &SftParams::new(0.2).samples(1024, 32).seed(9)).unwrap();
        assert_eq!(out.alphas(), vec![a1, a2]);
    }

    #[test]
    fn random_signs_give_empty_list() {
        let g = GroupSpec::binary_cube(10).unwrap();
        let f = QueryOracle::new(RandomSign::new(&g, 123));
        let s = dft_full(&f.table()).unwrap();
        assert!(s.heavy_indices(0.15).is_empty());
        let out = sft_run(&f, &SftParams::new(0.3).samples(128, 32).seed(2)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn node_cap_is_enforced() {
        let g = GroupSpec::cyclic(1024).unwrap();
        let f = make_half(&g).unwrap();
        let err = sft_run(&f, &SftParams::new(0.01).samples(64, 64).node_cap(2)).unwrap_err();
        assert!(matches!(err, Error::NodeCapExceeded { cap: 2, .. }));
    }

    #[test]
    fn invalid_params_rejected() {
        let g = GroupSpec::cyclic(64).unwrap();
        let f = make_half(&g).unwrap();
        assert!(sft_run(&f, &SftParams::new(0.0)).is_err());
        assert!(sft_run(&f, &SftParams::new(1.5)).is_err());
        assert!(sft_run(&f, &SftParams::new(0.3).delta(1.0)).is_err());
        assert!(sft_run(&f, &SftParams::new(0.3).samples(0, 4)).is_err());
        let z6 = make_half(&GroupSpec::cyclic(6).unwrap()).unwrap();
        assert!(matches!(sft_run(&z6, &SftParams::new(0.3)), Err(Error::NotSftCapable(_))));
    }

    #[test]
    fn auto_sizing_matches_formula() {
        let p = SftParams::new(0.5).delta(0.1);
        let r = p.resolve(1.0, 17).unwrap();
        assert_eq!(r.node_cap, 8);
        let m = chernoff_samples(1.0, 0.5f64.sqrt() / 4.0, 0.1 / (2.0 * 8.0 * 17.0)).unwrap() as usize;
        assert_eq!((r.m1, r.m2), (m, m));
    }

    #[test]
    fn budget_counters() {
        let g = GroupSpec::cyclic(1024).unwrap();
        let f = make_half(&g).unwrap();
        let out = sft_run(&f, &SftParams::new(0.15).samples(64, 128).seed(1)).unwrap();
        assert_eq!(f.query_count(), out.queries_used);
        assert!(out.queries_used <= (out.m1 * out.m2) as u64 * out.nodes_evaluated);
        assert!(out.nodes_evaluated <= 2 * out.node_cap as u64 * out.chain_len as u64);
        assert!(out.len() <= out.node_cap);
        let uniq: BTreeSet<&Element> = out.entries.iter().map(|e| &e.alpha).collect();
        assert_eq!(uniq.len(), out.len());
        assert!(out.entries.windows(2).all(|w| w[0].estimate.norm_sqr() >= w[1].estimate.norm_sqr()));
    }

    #[test]
    fn deterministic_across_runs_and_paths() {
        let g = GroupSpec::cyclic(1024).unwrap();
        let f = make_half(&g).unwrap();
        let p = SftParams::new(0.15).samples(64, 128).seed(77);
        let a = sft_run(&f, &p.clone().execution(Execution::Parallel)).unwrap();
        let b = sft_run(&f, &p.clone().execution(Execution::Sequential)).unwrap();
        let c = sft_run(&f, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}
