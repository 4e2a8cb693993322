//! Exact checks of the rib-splitting inequality and the generation-shift
//! moment bound on the truncated lattice-tree measure.
//!
//! All sums are kept in weight units (`Σ W`, i.e. `ρ` times a probability)
//! as polynomials in `w`, so each inequality is checked coefficient by
//! coefficient and then evaluated exactly at the requested `z`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde_json::json;

use super::{edge_weight, enumerate_trees, rho_poly, two_point_direct, LatticeTree, Poly};
use crate::error::{Error, Result};
use crate::lattice::{Kernel, Site};
use crate::op::exact::rat_str;

/// Tree events, evaluated on a tree seen from a given root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TreeEvent {
    All,
    /// Some vertex at tree distance at least `k` from the root.
    Survive(usize),
    /// Every pair of vertices within sup-norm distance `r`.
    Diam(u32),
    /// At most `M` vertices.
    Mass(usize),
}

impl TreeEvent {
    pub fn catalog() -> Vec<TreeEvent> {
        use TreeEvent::*;
        vec![All, Survive(1), Survive(2), Survive(3), Diam(1), Diam(2), Mass(2), Mass(4)]
    }

    pub fn holds(&self, t: &LatticeTree, root: &Site) -> bool {
        match *self {
            TreeEvent::All => true,
            TreeEvent::Survive(k) => t.depths(root).values().any(|&d| d >= k),
            TreeEvent::Diam(r) => t.vertices.iter().all(|a| t.vertices.iter().all(|b| a.sub(b).inf_norm() <= r)),
            TreeEvent::Mass(m) => t.vertices.len() <= m,
        }
    }
}

impl fmt::Display for TreeEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeEvent::All => write!(f, "all"),
            TreeEvent::Survive(k) => write!(f, "survive-{k}"),
            TreeEvent::Diam(r) => write!(f, "diam<={r}"),
            TreeEvent::Mass(m) => write!(f, "mass<={m}"),
        }
    }
}

/// Rib-splitting bound `Σ W 1(x∈T_n, T_{≯x}∈A, R_x∈B_x) ≤ (Σ W 1(x∈T_n, T_{≯x}∈A))·(Σ W 1(T∈B))`,
/// minimised over `x` for one `(n, A, B)`.
#[derive(Clone, Debug)]
pub struct SplitRow {
    pub n: usize,
    pub a: TreeEvent,
    pub b: TreeEvent,
    pub sites: usize,
    /// Smallest coefficient of `RHS − LHS` over all sites and degrees.
    pub coeff_gap: i128,
    /// Smallest evaluated `(RHS − LHS)/ρ` over sites.
    pub margin: BigRational,
    pub worst_site: Option<Site>,
}

/// Generation-shift bound with `f(y) = |y|^p`.
#[derive(Clone, Debug)]
pub struct ShiftRow {
    pub n: usize,
    pub m: usize,
    pub p: u32,
    /// `E Σ_{x∈T_n} f(x − x_m)`.
    pub lhs: BigRational,
    /// `Σ_y f(y) P(y∈T_{n−m})`.
    pub sum_f: BigRational,
    /// `E|T_m|`.
    pub mass_m: BigRational,
    /// `ρ · E|T_m| · Σ_y f(y) P(y∈T_{n−m})`, the bound the splitting argument gives.
    pub product_bound: BigRational,
    /// `c · Σ_y f(y) P(y∈T_{n−m})` with `c = max_k E|T_k|`.
    pub constant_bound: BigRational,
    pub coeff_gap: i128,
}

impl ShiftRow {
    pub fn product_holds(&self) -> bool {
        self.coeff_gap >= 0 && self.product_bound >= self.lhs
    }

    pub fn constant_holds(&self) -> bool {
        self.constant_bound >= self.lhs
    }
}

#[derive(Clone, Debug)]
pub struct LemmaReport {
    pub d: usize,
    pub z: BigRational,
    pub depth: usize,
    pub rho: BigRational,
    pub sup_mass: BigRational,
    pub split: Vec<SplitRow>,
    pub shift: Vec<ShiftRow>,
}

impl LemmaReport {
    /// Every rib-splitting instance and every product-form shift bound holds.
    pub fn holds(&self) -> bool {
        self.split.iter().all(|r| r.coeff_gap >= 0 && !r.margin.is_negative()) && self.shift.iter().all(ShiftRow::product_holds)
    }

    pub fn min_split_margin(&self) -> Option<BigRational> {
        self.split.iter().map(|r| r.margin.clone()).min()
    }

    pub fn min_shift_margin(&self) -> Option<BigRational> {
        self.shift.iter().map(|r| &r.product_bound - &r.lhs).min()
    }

    /// Shift rows where the bound without the factor `ρ` fails.
    pub fn constant_failures(&self) -> Vec<&ShiftRow> {
        self.shift.iter().filter(|r| !r.constant_holds()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "d": self.d,
            "z": rat_str(&self.z),
            "depth": self.depth,
            "rho": rat_str(&self.rho),
            "sup_mass": rat_str(&self.sup_mass),
            "holds": self.holds(),
            "split": self.split.iter().map(|r| json!({
                "n": r.n, "A": r.a.to_string(), "B": r.b.to_string(), "sites": r.sites,
                "coeff_gap": r.coeff_gap.to_string(), "margin": rat_str(&r.margin),
            })).collect::<Vec<_>>(),
            "shift": self.shift.iter().map(|r| json!({
                "n": r.n, "m": r.m, "p": r.p, "lhs": rat_str(&r.lhs), "sum_f": rat_str(&r.sum_f),
                "mass_m": rat_str(&r.mass_m), "product_bound": rat_str(&r.product_bound),
                "constant_bound": rat_str(&r.constant_bound), "coeff_gap": r.coeff_gap.to_string(),
                "product_holds": r.product_holds(), "constant_holds": r.constant_holds(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn parents(t: &LatticeTree) -> BTreeMap<Site, Site> {
    let depth = t.depths(&Site::ORIGIN);
    let mut out = BTreeMap::new();
    for (a, b) in &t.edges {
        if depth[a] + 1 == depth[b] {
            out.insert(*b, *a);
        } else {
            out.insert(*a, *b);
        }
    }
    out
}

fn f_pow(y: &Site, p: u32) -> i128 {
    (y.norm2() as i128).pow(p / 2)
}

pub const SHIFT_POWERS: [u32; 4] = [0, 2, 4, 6];

pub fn lemma_checks(kernel: &Kernel, z: &BigRational, depth: usize) -> Result<LemmaReport> {
    if !z.is_positive() {
        return Err(Error::Config("z must be positive".into()));
    }
    let trees = enumerate_trees(kernel, depth, Site::ORIGIN)?;
    let w = edge_weight(kernel, z);
    let rho_p = rho_poly(&trees);
    let rho = rho_p.eval(&w);
    let catalog = TreeEvent::catalog();

    let mut b_poly: BTreeMap<TreeEvent, Poly> = BTreeMap::new();
    let mut a_poly: BTreeMap<(usize, Site, TreeEvent), Poly> = BTreeMap::new();
    let mut l_poly: BTreeMap<(usize, Site, TreeEvent, TreeEvent), Poly> = BTreeMap::new();
    let mut shift_lhs: BTreeMap<(usize, usize, u32), Poly> = BTreeMap::new();

    for t in &trees {
        let e = t.size();
        for ev in &catalog {
            if ev.holds(t, &Site::ORIGIN) {
                b_poly.entry(*ev).or_default().add_term(e, 1);
            }
        }
        let par = parents(t);
        for (x, n) in t.depths(&Site::ORIGIN) {
            if n == 0 {
                continue;
            }
            let upper = t.ancestor_part(&Site::ORIGIN, &x);
            let below = t.descendant_tree(&Site::ORIGIN, &x);
            let a_in: Vec<TreeEvent> = catalog.iter().copied().filter(|ev| ev.holds(&upper, &Site::ORIGIN)).collect();
            let b_in: Vec<TreeEvent> = catalog.iter().copied().filter(|ev| ev.holds(&below, &x)).collect();
            for a in &a_in {
                a_poly.entry((n, x, *a)).or_default().add_term(e, 1);
                for b in &b_in {
                    l_poly.entry((n, x, *a, *b)).or_default().add_term(e, 1);
                }
            }
            let mut anc = x;
            for m in (0..n).rev() {
                anc = par[&anc];
                let dy = x.sub(&anc);
                for p in SHIFT_POWERS {
                    shift_lhs.entry((n, m, p)).or_default().add_term(e, f_pow(&dy, p));
                }
            }
        }
    }

    let mut split = Vec::new();
    for n in 1..=depth {
        for a in &catalog {
            for b in &catalog {
                let bp = b_poly.get(b).cloned().unwrap_or_default();
                let mut row = SplitRow { n, a: *a, b: *b, sites: 0, coeff_gap: i128::MAX, margin: BigRational::zero(), worst_site: None };
                let mut first = true;
                for ((nn, x, aa), ap) in a_poly.range((n, Site::ORIGIN, *a)..) {
                    if *nn != n {
                        break;
                    }
                    if aa != a {
                        continue;
                    }
                    let lp = l_poly.get(&(n, *x, *a, *b)).cloned().unwrap_or_default();
                    let prod = ap.mul_trunc(&bp, depth);
                    row.sites += 1;
                    row.coeff_gap = row.coeff_gap.min(lp.min_gap_to(&prod, depth));
                    let margin = (ap.eval(&w) * bp.eval(&w) - lp.eval(&w)) / &rho;
                    if first || margin < row.margin {
                        row.margin = margin;
                        row.worst_site = Some(*x);
                        first = false;
                    }
                }
                if row.sites > 0 {
                    split.push(row);
                }
            }
        }
    }

    let s_tables: Vec<BTreeMap<Site, Poly>> = (0..=depth).map(|k| two_point_direct(&trees, k)).collect();
    let mass: Vec<Poly> = s_tables
        .iter()
        .map(|tab| {
            let mut p = Poly::zero();
            for q in tab.values() {
                p.add(q);
            }
            p
        })
        .collect();
    let sup_mass = mass.iter().map(|p| p.eval(&w) / &rho).max().unwrap_or_else(BigRational::zero);
    let mut shift = Vec::new();
    for ((n, m, p), lhs) in &shift_lhs {
        let mut sum_f = Poly::zero();
        for (y, q) in &s_tables[n - m] {
            sum_f.add(&q.scale(f_pow(y, *p)));
        }
        let prod = sum_f.mul_trunc(&mass[*m], depth);
        let sum_f_v = sum_f.eval(&w) / &rho;
        let mass_v = mass[*m].eval(&w) / &rho;
        shift.push(ShiftRow {
            n: *n,
            m: *m,
            p: *p,
            lhs: lhs.eval(&w) / &rho,
            product_bound: &rho * &mass_v * &sum_f_v,
            constant_bound: &sup_mass * &sum_f_v,
            sum_f: sum_f_v,
            mass_m: mass_v,
            coeff_gap: lhs.min_gap_to(&prod, depth),
        });
    }

    Ok(LemmaReport { d: kernel.dim(), z: z.clone(), depth, rho, sup_mass, split, shift })
}
