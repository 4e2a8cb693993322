//! Exact oriented-percolation probabilities on tiny instances.
//!
//! Two independent routes: brute force over every bond configuration in
//! the light cone, and the Markov chain on occupied sets, where a site with
//! `k` occupied parents is occupied with probability `1 − (1 − pD)^k`,
//! independently of the other sites of its generation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::FxHashMap;
use serde_json::json;

use crate::error::{Error, Result};
use crate::lattice::{Kernel, Site};

/// Largest bond count the brute-force enumeration accepts.
pub const MAX_BONDS: usize = 24;
/// Largest number of candidate children the chain expands per state.
const MAX_CHILDREN: usize = 20;

pub fn rat_str(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn bond_q(kernel: &Kernel, p: &BigRational) -> Result<BigRational> {
    let w = kernel.point_mass();
    let q = p * BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()));
    if p < &BigRational::zero() || q > BigRational::one() {
        return Err(Error::Config(format!("bond probability p·D = {} is outside [0, 1]", rat_str(&q))));
    }
    Ok(q)
}

fn powers(x: &BigRational, n: usize) -> Vec<BigRational> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(BigRational::one());
    for i in 0..n {
        let next = &v[i] * x;
        v.push(next);
    }
    v
}

/// Exact law of the trajectory `(T_1, …, T_n)`.
#[derive(Clone, Debug)]
pub struct ExactTable {
    pub n: usize,
    pub p: BigRational,
    pub bonds: usize,
    /// `P(T_i ≠ ∅)` for `i = 0..=n`.
    pub survival: Vec<BigRational>,
    /// `E|T_i|` for `i = 0..=n`.
    pub mean_mass: Vec<BigRational>,
    /// Every trajectory of positive probability, `T_0` omitted.
    pub trajectories: Vec<(Vec<Vec<Site>>, BigRational)>,
}

impl ExactTable {
    /// Marginal law of `T_i`.
    pub fn marginal(&self, i: usize) -> FxHashMap<Vec<Site>, BigRational> {
        let mut out: FxHashMap<Vec<Site>, BigRational> = FxHashMap::default();
        for (traj, pr) in &self.trajectories {
            let key = if i == 0 { vec![Site::ORIGIN] } else { traj[i - 1].clone() };
            *out.entry(key).or_insert_with(BigRational::zero) += pr;
        }
        out
    }

    pub fn to_json(&self, d: usize) -> serde_json::Value {
        let traj: Vec<serde_json::Value> = self
            .trajectories
            .iter()
            .map(|(t, pr)| {
                let gens: Vec<Vec<Vec<i32>>> = t.iter().map(|g| g.iter().map(|x| x.coords(d).to_vec()).collect()).collect();
                json!({"generations": gens, "probability": rat_str(pr)})
            })
            .collect();
        json!({
            "n": self.n,
            "p": rat_str(&self.p),
            "bonds": self.bonds,
            "survival": self.survival.iter().map(rat_str).collect::<Vec<_>>(),
            "mean_mass": self.mean_mass.iter().map(rat_str).collect::<Vec<_>>(),
            "trajectories": traj,
        })
    }
}

/// Sums over all `2^B` bond configurations of the light cone of `(0, o)`
/// up to generation `n`. Refuses when `B > 24`.
pub fn op_exact_enumerate(kernel: &Kernel, n: usize, p: &BigRational) -> Result<ExactTable> {
    let q = bond_q(kernel, p)?;
    let mut reach: Vec<Vec<Site>> = vec![vec![Site::ORIGIN]];
    for i in 0..n {
        let mut next: Vec<Site> = reach[i].iter().flat_map(|y| kernel.support().iter().map(move |e| y.add(e))).collect();
        next.sort();
        next.dedup();
        reach.push(next);
    }
    let bond_count: usize = reach[..n].iter().map(|g| g.len() * kernel.support().len()).sum();
    if bond_count > MAX_BONDS {
        return Err(Error::Guard(format!(
            "{bond_count} bonds in the light cone exceed the enumeration bound of {MAX_BONDS}"
        )));
    }
    if reach.iter().any(|g| g.len() > 64) {
        return Err(Error::Guard("generation too wide for exact enumeration".into()));
    }
    // bonds as (generation, parent index, child index)
    let mut bonds = Vec::with_capacity(bond_count);
    for i in 0..n {
        for (a, y) in reach[i].iter().enumerate() {
            for e in kernel.support() {
                let b = reach[i + 1].binary_search(&y.add(e)).unwrap();
                bonds.push((i, a, b));
            }
        }
    }
    // trajectory (as bitmasks) -> configuration counts by number of open bonds
    let mut counts: FxHashMap<Vec<u64>, Vec<u64>> = FxHashMap::default();
    let mut occ = vec![0u64; n + 1];
    for mask in 0u64..(1u64 << bond_count) {
        occ.iter_mut().for_each(|m| *m = 0);
        occ[0] = 1;
        for (bi, &(g, a, b)) in bonds.iter().enumerate() {
            if mask >> bi & 1 == 1 && occ[g] >> a & 1 == 1 {
                occ[g + 1] |= 1 << b;
            }
        }
        let entry = counts.entry(occ[1..].to_vec()).or_insert_with(|| vec![0; bond_count + 1]);
        entry[mask.count_ones() as usize] += 1;
    }
    let qp = powers(&q, bond_count);
    let rp = powers(&(BigRational::one() - &q), bond_count);
    let mut trajectories: Vec<(Vec<Vec<Site>>, BigRational)> = counts
        .into_iter()
        .filter_map(|(traj, by_k)| {
            let pr = by_k.iter().enumerate().fold(BigRational::zero(), |acc, (k, &c)| {
                acc + BigRational::from_integer(BigInt::from(c)) * &qp[k] * &rp[bond_count - k]
            });
            if pr.is_zero() {
                return None;
            }
            let sets = traj
                .iter()
                .enumerate()
                .map(|(i, m)| reach[i + 1].iter().enumerate().filter(|(b, _)| m >> b & 1 == 1).map(|(_, x)| *x).collect())
                .collect();
            Some((sets, pr))
        })
        .collect();
    trajectories.sort_by(|a, b| a.0.cmp(&b.0));
    let mut survival = vec![BigRational::one()];
    let mut mean_mass = vec![BigRational::one()];
    for i in 1..=n {
        let mut s = BigRational::zero();
        let mut m = BigRational::zero();
        for (traj, pr) in &trajectories {
            if !traj[i - 1].is_empty() {
                s += pr;
                m += pr * BigRational::from_integer(BigInt::from(traj[i - 1].len()));
            }
        }
        survival.push(s);
        mean_mass.push(m);
    }
    Ok(ExactTable { n, p: p.clone(), bonds: bond_count, survival, mean_mass, trajectories })
}

/// The Markov chain on occupied sets.
#[derive(Clone, Debug)]
pub struct SubsetChain {
    kernel: Kernel,
    /// `(1 − q)^k`.
    miss: Vec<BigRational>,
}

impl SubsetChain {
    pub fn new(kernel: &Kernel, p: &BigRational) -> Result<SubsetChain> {
        let q = bond_q(kernel, p)?;
        let miss = powers(&(BigRational::one() - q), kernel.support().len());
        Ok(SubsetChain { kernel: kernel.clone(), miss })
    }

    /// Law of the next occupied set given the current one.
    pub fn step_from(&self, set: &[Site]) -> Result<Vec<(Vec<Site>, BigRational)>> {
        let mut parents: FxHashMap<Site, usize> = FxHashMap::default();
        for y in set {
            for e in self.kernel.support() {
                *parents.entry(y.add(e)).or_default() += 1;
            }
        }
        let mut kids: Vec<(Site, usize)> = parents.into_iter().collect();
        kids.sort();
        if kids.len() > MAX_CHILDREN {
            return Err(Error::Guard(format!("{} candidate sites exceed the chain bound of {MAX_CHILDREN}", kids.len())));
        }
        let mut out: Vec<(Vec<Site>, BigRational)> = vec![(Vec::new(), BigRational::one())];
        for (x, k) in kids {
            let absent = &self.miss[k];
            let present = BigRational::one() - absent;
            let mut next = Vec::with_capacity(out.len() * 2);
            for (s, pr) in out {
                let mut with = s.clone();
                with.push(x);
                next.push((with, &pr * &present));
                next.push((s, pr * absent));
            }
            out = next;
        }
        out.retain(|o| !o.1.is_zero());
        Ok(out)
    }

    /// Laws of `T_0..T_n` started from `start`.
    pub fn marginals(&self, start: Vec<Site>, n: usize) -> Result<Vec<FxHashMap<Vec<Site>, BigRational>>> {
        let mut cur: FxHashMap<Vec<Site>, BigRational> = FxHashMap::default();
        cur.insert(start, BigRational::one());
        let mut all = vec![cur.clone()];
        for _ in 0..n {
            let mut next: FxHashMap<Vec<Site>, BigRational> = FxHashMap::default();
            for (set, pr) in &cur {
                for (s, t) in self.step_from(set)? {
                    *next.entry(s).or_insert_with(BigRational::zero) += pr * t;
                }
            }
            cur = next;
            all.push(cur.clone());
        }
        Ok(all)
    }

    /// `P(C_m ≠ ∅, Σ_{i=m+2}^{2m−1} |C_i| ≤ M)` for each `M` in `caps`,
    /// where `C_i` is the cluster of `(0, start)` at generation `i`.
    pub fn survive_and_light(&self, start: Site, m: usize, caps: &[u64]) -> Result<Vec<BigRational>> {
        let top = caps.iter().copied().max().unwrap_or(0) + 1;
        let mut cur: FxHashMap<(Vec<Site>, u64), BigRational> = FxHashMap::default();
        cur.insert((vec![start], 0), BigRational::one());
        let mut step_cache: FxHashMap<Vec<Site>, Vec<(Vec<Site>, BigRational)>> = FxHashMap::default();
        for i in 1..=(2 * m).saturating_sub(1) {
            let mut next: FxHashMap<(Vec<Site>, u64), BigRational> = FxHashMap::default();
            for ((set, count), pr) in &cur {
                if !step_cache.contains_key(set) {
                    step_cache.insert(set.clone(), self.step_from(set)?);
                }
                for (s, t) in &step_cache[set] {
                    if i == m && s.is_empty() {
                        continue;
                    }
                    let add = if i >= m + 2 { s.len() as u64 } else { 0 };
                    let c = (count + add).min(top);
                    *next.entry((s.clone(), c)).or_insert_with(BigRational::zero) += pr * t;
                }
            }
            cur = next;
        }
        Ok(caps
            .iter()
            .map(|&cap| cur.iter().filter(|((_, c), _)| *c <= cap).fold(BigRational::zero(), |acc, (_, p)| acc + p))
            .collect())
    }
}

/// One `(ℓ, m, M)` cell of the factorization check, with per-site terms.
#[derive(Clone, Debug)]
pub struct Condition7Row {
    pub ell: usize,
    pub m: usize,
    pub cap: u64,
    pub lhs: BigRational,
    pub rhs: BigRational,
    /// `(x, P(x∈T_ℓ, event for the cluster of (ℓ,x)), P(x∈T_ℓ)·P(event for (0,o)))`.
    pub terms: Vec<(Site, BigRational, BigRational)>,
}

impl Condition7Row {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs && self.terms.iter().all(|t| t.1 == t.2)
    }

    pub fn to_json(&self, d: usize) -> serde_json::Value {
        json!({
            "ell": self.ell,
            "m": self.m,
            "M": self.cap,
            "lhs": rat_str(&self.lhs),
            "rhs": rat_str(&self.rhs),
            "holds": self.holds(),
            "terms": self.terms.iter().map(|(x, a, b)| json!({"x": x.coords(d), "lhs": rat_str(a), "rhs": rat_str(b)})).collect::<Vec<_>>(),
        })
    }
}

/// Left side: `Σ_x P(x ∈ T_ℓ, ∃x': (ℓ,x)→(ℓ+m,x'), #{(i,y): (ℓ,x)→(i,y), ℓ+m+2 ≤ i ≤ ℓ+2m−1} ≤ M)`,
/// summed over the law of `T_ℓ` with the cluster of each occupied `x`
/// followed from its own position. Right side: `E|T_ℓ| · P(S > m, Σ_{i=m+2}^{2m−1} |T_i| ≤ M)`.
pub fn condition7_exact(kernel: &Kernel, p: &BigRational, ell: usize, m: usize, caps: &[u64]) -> Result<Vec<Condition7Row>> {
    if m < 4 {
        return Err(Error::Config(format!("m must be at least 4, got {m}")));
    }
    let chain = SubsetChain::new(kernel, p)?;
    let law = chain.marginals(vec![Site::ORIGIN], ell)?.pop().unwrap();
    let mut occupancy: FxHashMap<Site, BigRational> = FxHashMap::default();
    let mut lhs_terms: FxHashMap<Site, Vec<BigRational>> = FxHashMap::default();
    let mut events: FxHashMap<Site, Vec<BigRational>> = FxHashMap::default();
    for (set, pr) in &law {
        for x in set {
            if !events.contains_key(x) {
                events.insert(*x, chain.survive_and_light(*x, m, caps)?);
            }
            *occupancy.entry(*x).or_insert_with(BigRational::zero) += pr;
            let e = &events[x];
            let acc = lhs_terms.entry(*x).or_insert_with(|| vec![BigRational::zero(); caps.len()]);
            for (a, v) in acc.iter_mut().zip(e) {
                *a += pr * v;
            }
        }
    }
    let origin = chain.survive_and_light(Site::ORIGIN, m, caps)?;
    let mean: BigRational = occupancy.values().fold(BigRational::zero(), |a, b| a + b);
    let mut sites: Vec<Site> = occupancy.keys().copied().collect();
    sites.sort();
    Ok(caps
        .iter()
        .enumerate()
        .map(|(k, &cap)| {
            let terms: Vec<(Site, BigRational, BigRational)> =
                sites.iter().map(|x| (*x, lhs_terms[x][k].clone(), &occupancy[x] * &origin[k])).collect();
            let lhs = terms.iter().fold(BigRational::zero(), |a, t| a + &t.1);
            Condition7Row { ell, m, cap, lhs, rhs: &mean * &origin[k], terms }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    #[test]
    fn survival_one_step_is_three_quarters() {
        let k = Kernel::spread_out(1, 1).unwrap();
        let t = op_exact_enumerate(&k, 1, &rat(1, 1)).unwrap();
        assert_eq!(t.survival[1], rat(3, 4));
        assert_eq!(t.mean_mass[1], rat(1, 1));
    }

    #[test]
    fn chain_matches_brute_force() {
        let k = Kernel::spread_out(1, 1).unwrap();
        for p in [rat(1, 1), rat(13, 10), rat(3, 2)] {
            let table = op_exact_enumerate(&k, 4, &p).unwrap();
            let chain = SubsetChain::new(&k, &p).unwrap().marginals(vec![Site::ORIGIN], 4).unwrap();
            for i in 0..=4 {
                let a = table.marginal(i);
                assert_eq!(a, chain[i], "generation {i}");
            }
            let total = table.trajectories.iter().fold(BigRational::zero(), |a, t| a + &t.1);
            assert_eq!(total, BigRational::one());
        }
    }

    #[test]
    fn chain_matches_brute_force_in_two_dimensions() {
        let k = Kernel::spread_out(2, 1).unwrap();
        let p = rat(1, 1);
        let table = op_exact_enumerate(&k, 1, &p).unwrap();
        let chain = SubsetChain::new(&k, &p).unwrap().marginals(vec![Site::ORIGIN], 1).unwrap();
        assert_eq!(table.marginal(1), chain[1]);
        assert_eq!(table.mean_mass[1], p);
    }

    #[test]
    fn enumeration_guard() {
        let k = Kernel::spread_out(1, 1).unwrap();
        assert!(matches!(op_exact_enumerate(&k, 5, &rat(1, 1)), Err(Error::Guard(_))));
        assert!(op_exact_enumerate(&k, 1, &rat(3, 1)).is_err());
    }

    #[test]
    fn factorization_holds_term_by_term() {
        let k = Kernel::spread_out(1, 1).unwrap();
        for ell in 0..=2 {
            let rows = condition7_exact(&k, &rat(13, 10), ell, 4, &[0, 2, 5, 10]).unwrap();
            for r in &rows {
                assert!(r.holds(), "ell={ell} M={}", r.cap);
            }
            // M = 0 forbids any occupied site in generations m+2..2m-1
            assert!(rows[0].lhs < rows[3].lhs);
        }
    }

    #[test]
    fn survive_and_light_without_cap_is_survival() {
        let k = Kernel::spread_out(1, 1).unwrap();
        let p = rat(13, 10);
        let chain = SubsetChain::new(&k, &p).unwrap();
        let big = chain.survive_and_light(Site::ORIGIN, 4, &[1000]).unwrap();
        let laws = chain.marginals(vec![Site::ORIGIN], 4).unwrap();
        let alive = laws[4].iter().filter(|(s, _)| !s.is_empty()).fold(BigRational::zero(), |a, (_, p)| a + p);
        assert_eq!(big[0], alive);
    }
}
