//! Exact lattice-tree laboratory.
//!
//! Trees are finite subtrees of the graph on `Z^d` whose edges are the
//! kernel's steps. With a uniform kernel `W_{z,D}(T) = w^{|T|}` for
//! `w = z·D₀`, so every weighted sum here is kept as an integer polynomial
//! in `w` ([`Poly`]) truncated at a total edge count, and only evaluated at
//! a rational `z` when a number is asked for.

pub mod lace;
pub mod lemmas;
pub mod poly;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::lattice::{Kernel, Site};

pub use lace::{lace_identity_check, pi_n_exact, LaceCheck, PiReport};
pub use lemmas::{lemma_checks, LemmaReport, TreeEvent};
pub use poly::Poly;

/// Enumeration refuses when the projected tree count exceeds this.
pub const ENUMERATION_GUARD: f64 = 1e8;

/// A lattice tree: sorted vertices and sorted edges `(a, b)` with `a < b`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeTree {
    pub vertices: Vec<Site>,
    pub edges: Vec<(Site, Site)>,
}

fn edge(a: Site, b: Site) -> (Site, Site) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl LatticeTree {
    pub fn single(x: Site) -> LatticeTree {
        LatticeTree { vertices: vec![x], edges: Vec::new() }
    }

    /// Builds a tree from an edge list, checking connectivity and acyclicity.
    pub fn from_edges(root: Site, edges: &[(Site, Site)]) -> Result<LatticeTree> {
        let mut es: Vec<(Site, Site)> = edges.iter().map(|&(a, b)| edge(a, b)).collect();
        es.sort();
        es.dedup();
        let mut vs: Vec<Site> = es.iter().flat_map(|&(a, b)| [a, b]).chain([root]).collect();
        vs.sort();
        vs.dedup();
        if es.len() + 1 != vs.len() {
            return Err(Error::Config(format!("{} edges on {} vertices is not a tree", es.len(), vs.len())));
        }
        let t = LatticeTree { vertices: vs, edges: es };
        if t.depths(&root).len() != t.vertices.len() {
            return Err(Error::Config("edge set is not connected".into()));
        }
        Ok(t)
    }

    pub fn size(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, x: &Site) -> bool {
        self.vertices.binary_search(x).is_ok()
    }

    pub fn translate(&self, by: &Site) -> LatticeTree {
        LatticeTree {
            vertices: self.vertices.iter().map(|v| v.add(by)).collect(),
            edges: self.edges.iter().map(|(a, b)| (a.add(by), b.add(by))).collect(),
        }
    }

    fn adjacency(&self) -> FxHashMap<Site, Vec<Site>> {
        let mut adj: FxHashMap<Site, Vec<Site>> = FxHashMap::default();
        for v in &self.vertices {
            adj.entry(*v).or_default();
        }
        for (a, b) in &self.edges {
            adj.get_mut(a).unwrap().push(*b);
            adj.get_mut(b).unwrap().push(*a);
        }
        adj
    }

    /// Tree distance from `root` to every vertex.
    pub fn depths(&self, root: &Site) -> FxHashMap<Site, usize> {
        let adj = self.adjacency();
        let mut out = FxHashMap::default();
        if !adj.contains_key(root) {
            return out;
        }
        out.insert(*root, 0);
        let mut queue = VecDeque::from([*root]);
        while let Some(u) = queue.pop_front() {
            let du = out[&u];
            for v in &adj[&u] {
                if !out.contains_key(v) {
                    out.insert(*v, du + 1);
                    queue.push_back(*v);
                }
            }
        }
        out
    }

    /// The tree path from `a` to `b`.
    pub fn path(&self, a: &Site, b: &Site) -> Option<Vec<Site>> {
        let adj = self.adjacency();
        let mut prev: FxHashMap<Site, Site> = FxHashMap::default();
        let mut queue = VecDeque::from([*a]);
        prev.insert(*a, *a);
        while let Some(u) = queue.pop_front() {
            if u == *b {
                let mut p = vec![u];
                let mut cur = u;
                while cur != *a {
                    cur = prev[&cur];
                    p.push(cur);
                }
                p.reverse();
                return Some(p);
            }
            for v in adj.get(&u)? {
                if !prev.contains_key(v) {
                    prev.insert(*v, u);
                    queue.push_back(*v);
                }
            }
        }
        None
    }

    /// Component of `x` after deleting the edges in `cut`.
    fn component(&self, x: &Site, cut: &FxHashSet<(Site, Site)>) -> LatticeTree {
        let kept: Vec<(Site, Site)> = self.edges.iter().filter(|e| !cut.contains(e)).copied().collect();
        let sub = LatticeTree { vertices: self.vertices.clone(), edges: kept };
        let reach = sub.depths(x);
        let mut vs: Vec<Site> = reach.keys().copied().collect();
        vs.sort();
        let es = sub.edges.iter().filter(|(a, _)| reach.contains_key(a)).copied().collect();
        LatticeTree { vertices: vs, edges: es }
    }

    /// `R_x(T)`: `x` and its descendants seen from `root`.
    pub fn descendant_tree(&self, root: &Site, x: &Site) -> LatticeTree {
        let path = self.path(root, x).expect("x is a vertex");
        let mut cut = FxHashSet::default();
        if path.len() >= 2 {
            let n = path.len();
            cut.insert(edge(path[n - 2], path[n - 1]));
        }
        self.component(x, &cut)
    }

    /// `T_{≯x}`: the tree with the strict descendants of `x` removed.
    pub fn ancestor_part(&self, root: &Site, x: &Site) -> LatticeTree {
        let below = self.descendant_tree(root, x);
        let drop: FxHashSet<Site> = below.vertices.iter().filter(|v| *v != x).copied().collect();
        LatticeTree {
            vertices: self.vertices.iter().filter(|v| !drop.contains(v)).copied().collect(),
            edges: self.edges.iter().filter(|(a, b)| !drop.contains(a) && !drop.contains(b)).copied().collect(),
        }
    }

    /// `W_{z,D}(T) = z^{|T|} ∏ D(e)`.
    pub fn weight(&self, kernel: &Kernel, z: &BigRational) -> BigRational {
        self.edges.iter().fold(BigRational::one(), |acc, (a, b)| {
            let dw = kernel.weight(&b.sub(a));
            acc * z * BigRational::new(BigInt::from(*dw.numer()), BigInt::from(*dw.denom()))
        })
    }
}

/// `w = z·D₀` for a uniform kernel.
pub fn edge_weight(kernel: &Kernel, z: &BigRational) -> BigRational {
    let d0 = kernel.point_mass();
    z * BigRational::new(BigInt::from(*d0.numer()), BigInt::from(*d0.denom()))
}

/// Projected count of trees with at most `max_edges` edges through a site:
/// each such tree embeds in the universal cover, giving `c_k ≤ e·(e(Δ−1))^k`.
pub fn projected_count(kernel: &Kernel, max_edges: usize) -> f64 {
    let mu = std::f64::consts::E * (kernel.support().len() as f64 - 1.0).max(1.0);
    (0..=max_edges).map(|k| std::f64::consts::E * mu.powi(k as i32)).sum()
}

/// Upper bound on `Σ_{k > max_edges} c_k w^k`, or `None` when the bound diverges.
pub fn truncation_tail(kernel: &Kernel, max_edges: usize, w: f64) -> Option<f64> {
    let r = std::f64::consts::E * (kernel.support().len() as f64 - 1.0).max(1.0) * w;
    (r < 1.0).then(|| std::f64::consts::E * r.powi(max_edges as i32 + 1) / (1.0 - r))
}

fn check_guard(kernel: &Kernel, max_edges: usize) -> Result<()> {
    let proj = projected_count(kernel, max_edges);
    if proj > ENUMERATION_GUARD {
        return Err(Error::Guard(format!(
            "projected {proj:.3e} trees with ≤ {max_edges} edges exceeds the guard {ENUMERATION_GUARD:.0e}"
        )));
    }
    Ok(())
}

/// All trees containing `base` with at most `max_edges` edges, each once,
/// sorted by edge count and then lexicographically.
pub fn enumerate_trees(kernel: &Kernel, max_edges: usize, base: Site) -> Result<Vec<LatticeTree>> {
    check_guard(kernel, max_edges)?;
    let mut out = vec![LatticeTree::single(base)];
    let mut verts: FxHashSet<Site> = FxHashSet::default();
    verts.insert(base);
    let untried: Vec<(Site, Site)> = kernel.support().iter().map(|e| (base, base.add(e))).collect();
    let mut edges = Vec::new();
    grow(kernel, max_edges, &mut verts, &mut edges, &untried, &mut out);
    out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
    Ok(out)
}

// Redelmeier growth: untried edges before the chosen one stay excluded
// in the branch below it.
fn grow(
    kernel: &Kernel,
    max_edges: usize,
    verts: &mut FxHashSet<Site>,
    edges: &mut Vec<(Site, Site)>,
    untried: &[(Site, Site)],
    out: &mut Vec<LatticeTree>,
) {
    for (i, &(u, v)) in untried.iter().enumerate() {
        if verts.contains(&v) {
            continue;
        }
        verts.insert(v);
        edges.push(edge(u, v));
        let mut es = edges.clone();
        es.sort();
        let mut vs: Vec<Site> = verts.iter().copied().collect();
        vs.sort();
        out.push(LatticeTree { vertices: vs, edges: es });
        if edges.len() < max_edges {
            let mut next: Vec<(Site, Site)> = untried[i + 1..].to_vec();
            for e in kernel.support() {
                let w = v.add(e);
                if !verts.contains(&w) {
                    next.push((v, w));
                }
            }
            grow(kernel, max_edges, verts, edges, &next, out);
        }
        edges.pop();
        verts.remove(&v);
    }
}

/// Independent enumerator: breadth-first growth by one edge with
/// deduplication in a `BTreeSet`.
pub fn enumerate_by_growth(kernel: &Kernel, max_edges: usize, base: Site) -> Vec<LatticeTree> {
    let mut level: BTreeSet<LatticeTree> = BTreeSet::from([LatticeTree::single(base)]);
    let mut all: Vec<LatticeTree> = level.iter().cloned().collect();
    for _ in 0..max_edges {
        let mut next = BTreeSet::new();
        for t in &level {
            for u in &t.vertices {
                for e in kernel.support() {
                    let v = u.add(e);
                    if t.contains(&v) {
                        continue;
                    }
                    let mut es = t.edges.clone();
                    es.push(edge(*u, v));
                    es.sort();
                    let mut vs = t.vertices.clone();
                    vs.push(v);
                    vs.sort();
                    next.insert(LatticeTree { vertices: vs, edges: es });
                }
            }
        }
        all.extend(next.iter().cloned());
        level = next;
    }
    all
}

/// `ρ t_n(x)` for every `x`, as polynomials in `w`, at truncation `max_edges`.
pub type TwoPointTable = BTreeMap<Site, Poly>;

/// Route (a): direct sum over enumerated trees with `x ∈ T_n`.
pub fn two_point_direct(trees: &[LatticeTree], n: usize) -> TwoPointTable {
    let mut out = TwoPointTable::new();
    for t in trees {
        for (x, dx) in t.depths(&Site::ORIGIN) {
            if dx == n {
                out.entry(x).or_default().add_term(t.size(), 1);
            }
        }
    }
    out
}

/// `ρ` at truncation: the weight polynomial of all enumerated trees.
pub fn rho_poly(trees: &[LatticeTree]) -> Poly {
    let mut p = Poly::zero();
    for t in trees {
        p.add_term(t.size(), 1);
    }
    p
}

/// Self-avoiding `n`-step walks from the origin.
pub fn self_avoiding_walks(kernel: &Kernel, n: usize) -> Vec<Vec<Site>> {
    let mut out = Vec::new();
    let mut cur = vec![Site::ORIGIN];
    fn rec(kernel: &Kernel, n: usize, cur: &mut Vec<Site>, out: &mut Vec<Vec<Site>>) {
        if cur.len() == n + 1 {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for e in kernel.support() {
            let y = last.add(e);
            if !cur.contains(&y) {
                cur.push(y);
                rec(kernel, n, cur, out);
                cur.pop();
            }
        }
    }
    rec(kernel, n, &mut cur, &mut out);
    out
}

/// Route (b): sum over backbones and mutually avoiding rib tuples with
/// `n + Σ|R_i| ≤ max_edges`. `ribs` must hold every tree at the origin with
/// at most `max_edges − n` edges.
pub fn two_point_backbone(kernel: &Kernel, ribs: &[LatticeTree], n: usize, max_edges: usize) -> TwoPointTable {
    let mut out = TwoPointTable::new();
    if n > max_edges {
        return out;
    }
    for w in self_avoiding_walks(kernel, n) {
        let mut used: FxHashSet<Site> = FxHashSet::default();
        let mut total = Poly::zero();
        rib_tuples(ribs, &w, 0, max_edges - n, &mut used, &mut |extra| total.add_term(n + extra, 1));
        if !total.is_zero() {
            out.entry(w[n]).or_default().add(&total);
        }
    }
    out
}

// Places ribs at backbone points i.., keeping them disjoint from each other
// and from the backbone points not yet covered.
fn rib_tuples<F: FnMut(usize)>(ribs: &[LatticeTree], w: &[Site], i: usize, budget: usize, used: &mut FxHashSet<Site>, emit: &mut F) {
    rib_tuples_acc(ribs, w, i, budget, 0, used, emit)
}

fn rib_tuples_acc<F: FnMut(usize)>(
    ribs: &[LatticeTree],
    w: &[Site],
    i: usize,
    budget: usize,
    spent: usize,
    used: &mut FxHashSet<Site>,
    emit: &mut F,
) {
    if i == w.len() {
        emit(spent);
        return;
    }
    for r in ribs {
        if r.size() > budget - spent {
            break;
        }
        let placed: Vec<Site> = r.vertices.iter().map(|v| v.add(&w[i])).collect();
        if placed.iter().any(|v| used.contains(v) || w[i + 1..].contains(v)) {
            continue;
        }
        used.extend(placed.iter().copied());
        rib_tuples_acc(ribs, w, i + 1, budget, spent + r.size(), used, emit);
        for v in &placed {
            used.remove(v);
        }
    }
}

/// Backbone and ribs of a tree with `x` at generation `n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RibsDecomposition {
    pub backbone: Vec<Site>,
    pub ribs: Vec<LatticeTree>,
}

pub fn ribs_decompose(t: &LatticeTree, n: usize, x: &Site) -> Result<RibsDecomposition> {
    let backbone = t.path(&Site::ORIGIN, x).ok_or_else(|| Error::Config(format!("{x:?} is not in the tree")))?;
    if backbone.len() != n + 1 {
        return Err(Error::Config(format!("{x:?} is at generation {}, not {n}", backbone.len() - 1)));
    }
    let cut: FxHashSet<(Site, Site)> = backbone.windows(2).map(|p| edge(p[0], p[1])).collect();
    let ribs = backbone.iter().map(|w| t.component(w, &cut)).collect();
    Ok(RibsDecomposition { backbone, ribs })
}

pub fn ribs_compose(dec: &RibsDecomposition, kernel: &Kernel) -> Result<LatticeTree> {
    let w = &dec.backbone;
    if w.first() != Some(&Site::ORIGIN) || dec.ribs.len() != w.len() {
        return Err(Error::Config("backbone must start at the origin with one rib per point".into()));
    }
    for p in w.windows(2) {
        if !kernel.contains(&p[1].sub(&p[0])) {
            return Err(Error::Config(format!("backbone step {:?} → {:?} is not a kernel step", p[0], p[1])));
        }
    }
    let mut seen: FxHashSet<Site> = FxHashSet::default();
    let mut edges: Vec<(Site, Site)> = w.windows(2).map(|p| edge(p[0], p[1])).collect();
    for (i, r) in dec.ribs.iter().enumerate() {
        if !r.contains(&w[i]) {
            return Err(Error::Config(format!("rib {i} does not contain its backbone point")));
        }
        for v in &r.vertices {
            if !seen.insert(*v) {
                return Err(Error::Config(format!("ribs overlap at {v:?}")));
            }
        }
        edges.extend(r.edges.iter().copied());
    }
    LatticeTree::from_edges(Site::ORIGIN, &edges)
}

/// Evaluated two-point value with its truncation diagnostics.
#[derive(Clone, Debug)]
pub struct TwoPointValue {
    pub n: usize,
    pub x: Site,
    pub direct: Poly,
    pub backbone: Poly,
    pub value: BigRational,
    pub rho: BigRational,
    pub tail_bound: Option<f64>,
    pub agree: bool,
}

/// `ρ_z t_n(x)` by both routes at truncation `max_edges`.
pub fn two_point(kernel: &Kernel, z: &BigRational, n: usize, x: &Site, max_edges: usize) -> Result<TwoPointValue> {
    let w = edge_weight(kernel, z);
    let wf = crate::tree::lace::to_f64(&w);
    if z <= &BigRational::zero() || truncation_tail(kernel, max_edges, wf).is_none() {
        return Err(Error::Guard(format!("z = {} is outside the range where the truncation tail is controlled", crate::op::exact::rat_str(z))));
    }
    let trees = enumerate_trees(kernel, max_edges, Site::ORIGIN)?;
    let ribs: Vec<LatticeTree> = trees.iter().filter(|t| t.size() + n <= max_edges).cloned().collect();
    let direct = two_point_direct(&trees, n).remove(x).unwrap_or_default();
    let backbone = two_point_backbone(kernel, &ribs, n, max_edges).remove(x).unwrap_or_default();
    let rho = rho_poly(&trees);
    Ok(TwoPointValue {
        n,
        x: *x,
        value: direct.eval(&w),
        rho: rho.eval(&w),
        agree: direct.equal_upto(&backbone, max_edges),
        direct,
        backbone,
        tail_bound: truncation_tail(kernel, max_edges, wf),
    })
}
