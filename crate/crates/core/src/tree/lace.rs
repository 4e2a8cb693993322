//! Lace-expansion identity layer.
//!
//! For a symmetric assignment `U_{s,t}`, `0 ≤ s < t ≤ n`, the product
//! `K_{[0,n]} = ∏(1 + U_{s,t})` is compared with the sum over compositions of
//! `[0,n]` into consecutive blocks of `∏ J_block`, where `J_{[a,b]}` sums
//! `∏_{st∈Γ} U_{s,t}` over graphs `Γ` whose intervals `[s,t]` cover `[a,b]`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rustc_hash::FxHashMap;

use super::{enumerate_trees, rho_poly, two_point_direct, LatticeTree, Poly};
use crate::error::{Error, Result};
use crate::lattice::{Kernel, Site};

pub use crate::op::exact::rat_str;

/// Largest `n` accepted by the brute-force graph enumeration.
pub const MAX_LACE_N: usize = 6;

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Pairs `(s, t)` with `a ≤ s < t ≤ b`, in lexicographic order.
pub fn pairs(a: usize, b: usize) -> Vec<(usize, usize)> {
    (a..=b).flat_map(|s| (s + 1..=b).map(move |t| (s, t))).collect()
}

/// Assignment of `U_{s,t}` on `[0,n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UAssignment {
    pub n: usize,
    values: FxHashMap<(usize, usize), BigRational>,
}

impl UAssignment {
    pub fn new(n: usize, f: impl Fn(usize, usize) -> BigRational) -> UAssignment {
        UAssignment { n, values: pairs(0, n).into_iter().map(|(s, t)| ((s, t), f(s, t))).collect() }
    }

    pub fn constant(n: usize, c: BigRational) -> UAssignment {
        UAssignment::new(n, |_, _| c.clone())
    }

    /// Entries `a/q` with `q ∈ 1..=qmax` and `a ∈ [−q, q]`, plus occasional
    /// exact `0` and `−1`.
    pub fn random<R: Rng + ?Sized>(n: usize, qmax: i64, rng: &mut R) -> UAssignment {
        let mut u = UAssignment { n, values: FxHashMap::default() };
        for p in pairs(0, n) {
            let v = match rng.random_range(0..8) {
                0 => BigRational::zero(),
                1 => -BigRational::one(),
                _ => {
                    let q = rng.random_range(1..=qmax);
                    BigRational::new(rng.random_range(-q..=q).into(), q.into())
                }
            };
            u.values.insert(p, v);
        }
        u
    }

    pub fn get(&self, s: usize, t: usize) -> &BigRational {
        &self.values[&(s.min(t), s.max(t))]
    }

    /// Common denominator and integer numerators, if they fit in `i64`.
    fn integer_form(&self) -> Option<(BigInt, FxHashMap<(usize, usize), i64>)> {
        let q = self.values.values().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let mut nums = FxHashMap::default();
        for (p, v) in &self.values {
            nums.insert(*p, (v.numer() * (&q / v.denom())).to_i64()?);
        }
        Some((q, nums))
    }
}

/// `K_{[a,b]} = ∏_{a≤s<t≤b} (1 + U_{s,t})`.
pub fn k_direct(u: &UAssignment, a: usize, b: usize) -> BigRational {
    pairs(a, b).into_iter().fold(BigRational::one(), |acc, (s, t)| acc * (BigRational::one() + u.get(s, t)))
}

fn full_cover(a: usize, b: usize) -> u64 {
    ((1u64 << (b - a)) - 1) << a
}

fn cover(s: usize, t: usize) -> u64 {
    ((1u64 << (t - s)) - 1) << s
}

/// `J_{[a,b]}` by enumerating every graph on `[a,b]`.
pub fn j_brute(u: &UAssignment, a: usize, b: usize) -> BigRational {
    if a == b {
        return BigRational::one();
    }
    let ps = pairs(a, b);
    let full = full_cover(a, b);
    if let Some((q, nums)) = u.integer_form() {
        let ns: Vec<i128> = ps.iter().map(|p| nums[p] as i128).collect();
        let mut buckets = vec![0i128; ps.len() + 1];
        if j_int(&ps, &ns, 0, 1, 0, 0, full, &mut buckets).is_some() {
            let mut qk = BigInt::one();
            let mut total = BigRational::zero();
            for c in buckets {
                total += BigRational::new(BigInt::from(c), qk.clone());
                qk *= &q;
            }
            return total;
        }
    }
    let vals: Vec<BigRational> = ps.iter().map(|&(s, t)| u.get(s, t).clone()).collect();
    let mut total = BigRational::zero();
    j_rat(&ps, &vals, 0, BigRational::one(), 0, full, &mut total);
    total
}

#[allow(clippy::too_many_arguments)]
fn j_int(ps: &[(usize, usize)], ns: &[i128], i: usize, prod: i128, k: usize, cov: u64, full: u64, buckets: &mut [i128]) -> Option<()> {
    if i == ps.len() {
        if cov == full {
            buckets[k] = buckets[k].checked_add(prod)?;
        }
        return Some(());
    }
    j_int(ps, ns, i + 1, prod, k, cov, full, buckets)?;
    if ns[i] != 0 {
        let (s, t) = ps[i];
        j_int(ps, ns, i + 1, prod.checked_mul(ns[i])?, k + 1, cov | cover(s, t), full, buckets)?;
    }
    Some(())
}

fn j_rat(ps: &[(usize, usize)], vals: &[BigRational], i: usize, prod: BigRational, cov: u64, full: u64, total: &mut BigRational) {
    if i == ps.len() {
        if cov == full {
            *total += prod;
        }
        return;
    }
    if !vals[i].is_zero() {
        let (s, t) = ps[i];
        j_rat(ps, vals, i + 1, &prod * &vals[i], cov | cover(s, t), full, total);
    }
    j_rat(ps, vals, i + 1, prod, cov, full, total);
}

/// `J_{[a,b]}` by dynamic programming over covered unit segments.
pub fn j_dp(u: &UAssignment, a: usize, b: usize) -> BigRational {
    if a == b {
        return BigRational::one();
    }
    let mut dp: BTreeMap<u64, BigRational> = BTreeMap::from([(0, BigRational::one())]);
    for (s, t) in pairs(a, b) {
        let v = u.get(s, t);
        if v.is_zero() {
            continue;
        }
        let mut next = dp.clone();
        for (m, x) in &dp {
            *next.entry(m | cover(s, t)).or_insert_with(BigRational::zero) += x * v;
        }
        dp = next;
    }
    dp.remove(&full_cover(a, b)).unwrap_or_else(BigRational::zero)
}

/// Cached `J_{[a,b]}` for every subinterval of `[0,n]`.
#[derive(Clone, Debug)]
pub struct LaceGraphTable {
    pub n: usize,
    pub j: BTreeMap<(usize, usize), BigRational>,
}

impl LaceGraphTable {
    pub fn build(u: &UAssignment) -> Result<LaceGraphTable> {
        if u.n > MAX_LACE_N {
            return Err(Error::Guard(format!("n = {} exceeds {MAX_LACE_N} (2^{} graphs)", u.n, u.n * (u.n + 1) / 2)));
        }
        let mut j = BTreeMap::new();
        for a in 0..=u.n {
            for b in a..=u.n {
                j.insert((a, b), j_brute(u, a, b));
            }
        }
        Ok(LaceGraphTable { n: u.n, j })
    }

    /// Sum over compositions of `[0,n]` with at least `min_blocks` blocks of
    /// the product of block `J` values.
    pub fn compositions(&self, min_blocks: usize) -> BigRational {
        let n = self.n;
        let mut total = BigRational::zero();
        for cuts in 0u32..(1 << n) {
            if cuts.count_ones() as usize + 1 < min_blocks {
                continue;
            }
            let mut start = 0;
            let mut prod = BigRational::one();
            for i in 0..=n {
                if i == n || cuts >> i & 1 == 1 {
                    prod *= &self.j[&(start, i)];
                    start = i + 1;
                }
            }
            total += prod;
        }
        total
    }
}

#[derive(Clone, Debug)]
pub struct LaceCheck {
    pub n: usize,
    pub k: BigRational,
    pub decomposition: BigRational,
    pub holds: bool,
    pub witness: Option<String>,
}

impl LaceCheck {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "K": rat_str(&self.k),
            "decomposition": rat_str(&self.decomposition),
            "holds": self.holds,
            "witness": self.witness,
        })
    }
}

pub fn lace_identity_check(u: &UAssignment) -> Result<LaceCheck> {
    let table = LaceGraphTable::build(u)?;
    let k = k_direct(u, 0, u.n);
    let decomposition = table.compositions(1);
    let holds = k == decomposition;
    let witness = (!holds).then(|| {
        let entries: Vec<String> = pairs(0, u.n).into_iter().map(|(s, t)| format!("U{s}{t}={}", rat_str(u.get(s, t)))).collect();
        entries.join(" ")
    });
    Ok(LaceCheck { n: u.n, k, decomposition, holds, witness })
}

/// Exact `π_n(x)` and the recomposition of `ρ t_n(x)`, as polynomials in `w`.
#[derive(Clone, Debug)]
pub struct PiReport {
    pub n: usize,
    pub max_edges: usize,
    /// `π_n(x)` for every reachable `x`.
    pub pi: BTreeMap<Site, Poly>,
    /// Compositions with at least two blocks.
    pub multi_block: BTreeMap<Site, Poly>,
    /// Sum with the full product `K_{[0,n]}` in place of `J_{[0,n]}`.
    pub k_sum: BTreeMap<Site, Poly>,
    /// Direct tree sum `ρ t_n(x)`.
    pub direct: BTreeMap<Site, Poly>,
    pub rho: Poly,
}

impl PiReport {
    /// `ρ t_n(x) = π_n(x) + Σ_{N≥2}` at every `x`.
    pub fn recomposition_holds(&self) -> bool {
        let keys: std::collections::BTreeSet<&Site> =
            self.pi.keys().chain(self.multi_block.keys()).chain(self.direct.keys()).collect();
        keys.into_iter().all(|x| {
            let mut s = self.pi.get(x).cloned().unwrap_or_default();
            s.add(&self.multi_block.get(x).cloned().unwrap_or_default());
            s.equal_upto(&self.direct.get(x).cloned().unwrap_or_default(), self.max_edges)
                && self.k_sum.get(x).cloned().unwrap_or_default().equal_upto(&self.direct.get(x).cloned().unwrap_or_default(), self.max_edges)
        })
    }

    pub fn symmetric(&self) -> bool {
        self.pi.iter().all(|(x, p)| self.pi.get(&x.neg()).is_some_and(|q| q.equal_upto(p, self.max_edges)))
    }

    pub fn pi_at(&self, x: &Site) -> Poly {
        self.pi.get(x).cloned().unwrap_or_default()
    }
}

fn all_walks(kernel: &Kernel, n: usize) -> Vec<Vec<Site>> {
    let mut out = vec![vec![Site::ORIGIN]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|w| {
                kernel.support().iter().map(move |e| {
                    let mut v = w.clone();
                    v.push(v.last().unwrap().add(e));
                    v
                })
            })
            .collect();
    }
    out
}

struct PatternValues {
    j: i128,
    multi: i128,
    k: i128,
}

fn pattern_values(n: usize, mask: u64, ps: &[(usize, usize)]) -> PatternValues {
    let u = UAssignment::new(n, |s, t| {
        let i = ps.iter().position(|&p| p == (s, t)).unwrap();
        if mask >> i & 1 == 1 {
            -BigRational::one()
        } else {
            BigRational::zero()
        }
    });
    let table = LaceGraphTable::build(&u).expect("n within guard");
    let as_int = |r: BigRational| r.to_integer().to_i128().expect("integer pattern value");
    PatternValues {
        j: as_int(table.j[&(0, n)].clone()),
        multi: as_int(table.compositions(2)),
        k: as_int(k_direct(&u, 0, n)),
    }
}

/// `π_n(x)` summed over all `n`-step walks and all rib tuples with
/// `n + Σ|R_i| ≤ max_edges`, using `U_{s,t} = −1[R_s ∩ R_t ≠ ∅]`.
pub fn pi_n_exact(kernel: &Kernel, n: usize, max_edges: usize) -> Result<PiReport> {
    if n > 4 || kernel.dim() > 2 || n > max_edges {
        return Err(Error::Guard(format!("π_n is limited to n ≤ 4, d ≤ 2 and n ≤ depth (got n={n}, d={}, depth={max_edges})", kernel.dim())));
    }
    let trees = enumerate_trees(kernel, max_edges, Site::ORIGIN)?;
    let ribs: Vec<&LatticeTree> = trees.iter().filter(|t| t.size() + n <= max_edges).collect();
    let ps = pairs(0, n);
    let mut cache: FxHashMap<u64, PatternValues> = FxHashMap::default();
    let mut pi = BTreeMap::<Site, Poly>::new();
    let mut multi = BTreeMap::<Site, Poly>::new();
    let mut ksum = BTreeMap::<Site, Poly>::new();
    for w in all_walks(kernel, n) {
        let x = w[n];
        let mut chosen: Vec<Vec<Site>> = Vec::with_capacity(n + 1);
        let mut emit = |sets: &[Vec<Site>], extra: usize| {
            let mut mask = 0u64;
            for (i, &(s, t)) in ps.iter().enumerate() {
                if sets[s].iter().any(|v| sets[t].binary_search(v).is_ok()) {
                    mask |= 1 << i;
                }
            }
            let pv = cache.entry(mask).or_insert_with(|| pattern_values(n, mask, &ps));
            let deg = n + extra;
            if pv.j != 0 {
                pi.entry(x).or_default().add_term(deg, pv.j);
            }
            if pv.multi != 0 {
                multi.entry(x).or_default().add_term(deg, pv.multi);
            }
            if pv.k != 0 {
                ksum.entry(x).or_default().add_term(deg, pv.k);
            }
        };
        rib_choices(&ribs, &w, 0, max_edges - n, &mut chosen, &mut emit);
    }
    for m in [&mut pi, &mut multi, &mut ksum] {
        m.retain(|_, p| !p.is_zero());
    }
    let mut direct = two_point_direct(&trees, n);
    direct.retain(|_, p| !p.is_zero());
    Ok(PiReport { n, max_edges, pi, multi_block: multi, k_sum: ksum, direct, rho: rho_poly(&trees) })
}

fn rib_choices<F: FnMut(&[Vec<Site>], usize)>(
    ribs: &[&LatticeTree],
    w: &[Site],
    i: usize,
    budget: usize,
    chosen: &mut Vec<Vec<Site>>,
    emit: &mut F,
) {
    if i == w.len() {
        let used: usize = chosen.iter().map(|v| v.len() - 1).sum();
        emit(chosen, used);
        return;
    }
    let used: usize = chosen.iter().map(|v| v.len() - 1).sum();
    for r in ribs {
        if used + r.size() > budget {
            break;
        }
        let mut placed: Vec<Site> = r.vertices.iter().map(|v| v.add(&w[i])).collect();
        placed.sort();
        chosen.push(placed);
        rib_choices(ribs, w, i + 1, budget, chosen, emit);
        chosen.pop();
    }
}

/// Magnitude of the largest numerator or denominator in an assignment.
pub fn assignment_height(u: &UAssignment) -> BigInt {
    u.values.values().map(|v| v.numer().abs().max(v.denom().clone())).max().unwrap_or_default()
}
