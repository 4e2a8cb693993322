//! Ancestral relations on occupancy processes.
//!
//! A realized model exposes its occupied sets `T_t` and the relation
//! `(s,y) → (t,x)` through [`AncestralSystem`]. The axioms are audited by
//! [`check_ar_axioms`]; paths, rescaled views, and the modulus statistic are
//! built on top of the trait alone.

pub mod eventlog;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{PointSet, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Discrete,
    Continuous,
}

/// A realized occupancy process with an ancestral relation.
///
/// Times are `f64` in both kinds; discrete systems read `T_t = T_{⌊t⌋}`.
pub trait AncestralSystem {
    fn dim(&self) -> usize;

    fn time_kind(&self) -> TimeKind;

    /// Sorted times at which the occupied set or the relation can change,
    /// starting with `0`. Discrete systems list every generation through
    /// the first empty one.
    fn event_times(&self) -> Vec<f64>;

    /// `T_t`, sorted.
    fn occupied(&self, t: f64) -> Vec<Site>;

    fn is_occupied(&self, t: f64, x: &Site) -> bool;

    /// `e_{s,t}(y, x)`: whether `(s, y) → (t, x)`.
    fn related(&self, s: f64, y: &Site, t: f64, x: &Site) -> bool;

    /// Extinction time `S`, or `None` if the realization was cut off alive.
    fn survival_time(&self) -> Option<f64>;

    /// Last time at which queries are answered.
    fn horizon(&self) -> f64;

    /// Every site occupied at some time.
    fn range_sites(&self) -> Vec<Site>;

    /// An ancestral path to `(t, x)`.
    ///
    /// The default walks forward through the event times, choosing at each
    /// the least site (in `Site` order) still related to both the current
    /// point and the target.
    fn ancestral_path(&self, t: f64, x: &Site) -> Result<AncestralPath> {
        greedy_forward_path(self, t, x)
    }
}

/// Right-continuous step function `s ↦ w_s` ending at `(t, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AncestralPath {
    /// `(time, site)` pairs; the first is `(0, o)` and times strictly increase.
    pub breakpoints: Vec<(f64, Site)>,
    pub terminal: (f64, Site),
}

impl AncestralPath {
    pub fn at(&self, s: f64) -> Site {
        if s >= self.terminal.0 {
            return self.terminal.1;
        }
        let i = self.breakpoints.partition_point(|&(tau, _)| tau <= s);
        self.breakpoints[i.saturating_sub(1)].1
    }

    pub fn constant(t: f64, x: Site) -> AncestralPath {
        AncestralPath { breakpoints: vec![(0.0, x)], terminal: (t, x) }
    }
}

fn greedy_forward_path<S: AncestralSystem + ?Sized>(sys: &S, t: f64, x: &Site) -> Result<AncestralPath> {
    if !sys.is_occupied(t, x) {
        return Err(Error::Config(format!("{x:?} is not occupied at time {t}")));
    }
    let mut cur = (0.0, Site::ORIGIN);
    let mut breakpoints = vec![cur];
    let tt = match sys.time_kind() {
        TimeKind::Discrete => t.floor(),
        TimeKind::Continuous => t,
    };
    for tau in sys.event_times().into_iter().filter(|&tau| tau > 0.0 && tau <= tt) {
        let next = sys
            .occupied(tau)
            .into_iter()
            .find(|y| sys.related(cur.0, &cur.1, tau, y) && sys.related(tau, y, t, x))
            .ok_or_else(|| Error::Numerical(format!("no interpolation witness at time {tau}")))?;
        if next != cur.1 {
            breakpoints.push((tau, next));
        }
        cur = (tau, next);
    }
    if cur.1 != *x {
        return Err(Error::Numerical(format!("path to {x:?} at {t} ended at {:?}", cur.1)));
    }
    Ok(AncestralPath { breakpoints, terminal: (t, *x) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    /// `T_0 ≠ {o}`.
    InitialState,
    /// `(s,y) → (s,x)` disagrees with `x = y ∈ T_s`.
    SameTime { s: f64, y: Site, x: Site, related: bool },
    /// A relation touches an unoccupied endpoint or runs backward in time.
    Endpoint { s: f64, y: Site, t: f64, x: Site },
    /// `(0,o) → (t,x)` disagrees with `x ∈ T_t`.
    Root { t: f64, x: Site, related: bool },
    /// Occupancy after an empty time.
    Death { s: f64, t: f64 },
    Interpolation { s1: f64, y1: Site, s2: f64, s3: f64, y3: Site },
    Transitivity { s1: f64, y1: Site, s2: f64, y2: Site, s3: f64, y3: Site },
}

/// Audits the ancestral-relation axioms on a realized system.
///
/// Occupancy, same-time, root, and death properties are checked at every
/// representative time (event times plus one time past extinction) over
/// all occupied sites and a ring of unoccupied probe sites. Transitivity
/// and interpolation are checked over triples `s1 < s2 < s3`, exhaustively
/// when their count is at most `sample_budget`, otherwise on that many
/// triples drawn with a fixed seed.
pub fn check_ar_axioms<S: AncestralSystem + ?Sized>(sys: &S, sample_budget: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut times = sys.event_times();
    if let Some(end) = sys.survival_time() {
        times.push(end + 1.0);
    }
    times.retain(|&t| t <= sys.horizon() || Some(t) == sys.survival_time().map(|e| e + 1.0));
    times.dedup();
    let occ: Vec<Vec<Site>> = times.iter().map(|&t| sys.occupied(t)).collect();

    if occ.first().map(|o| o.as_slice()) != Some(&[Site::ORIGIN][..]) {
        out.push(Violation::InitialState);
    }

    let d = sys.dim();
    let mut probe_set: FxHashSet<Site> = FxHashSet::default();
    for x in sys.range_sites() {
        probe_set.insert(x);
        for i in 0..d {
            for sign in [-1, 1] {
                let mut c = x.0;
                c[i] += sign;
                probe_set.insert(Site(c));
            }
        }
    }
    let mut probes: Vec<Site> = probe_set.into_iter().collect();
    probes.sort();

    for (k, &t) in times.iter().enumerate() {
        let here = &occ[k];
        for x in &probes {
            let inside = here.binary_search(x).is_ok();
            if sys.is_occupied(t, x) != inside {
                out.push(Violation::Endpoint { s: t, y: *x, t, x: *x });
            }
            if sys.related(t, x, t, x) != inside {
                out.push(Violation::SameTime { s: t, y: *x, x: *x, related: !inside });
            }
            if sys.related(0.0, &Site::ORIGIN, t, x) != inside {
                out.push(Violation::Root { t, x: *x, related: !inside });
            }
        }
        for y in here {
            for x in here {
                if x != y && sys.related(t, y, t, x) {
                    out.push(Violation::SameTime { s: t, y: *y, x: *x, related: true });
                }
            }
        }
        if here.is_empty() {
            if let Some(j) = occ[k..].iter().position(|o| !o.is_empty()) {
                out.push(Violation::Death { s: t, t: times[k + j] });
            }
        }
    }

    // relations must start and end on occupied points and run forward in time
    let n = times.len();
    for i in 0..n {
        let s = times[i];
        let mut partners = vec![i + 1, i + 2, n - 1];
        partners.retain(|&j| j > i && j < n);
        partners.dedup();
        for j in partners {
            let t = times[j];
            for y in &occ[i] {
                for x in probes.iter().filter(|x| occ[j].binary_search(x).is_err()) {
                    if sys.related(s, y, t, x) {
                        out.push(Violation::Endpoint { s, y: *y, t, x: *x });
                    }
                }
                for x in &occ[j] {
                    if sys.related(t, x, s, y) {
                        out.push(Violation::Endpoint { s: t, y: *x, t: s, x: *y });
                    }
                }
            }
            for y in probes.iter().filter(|y| occ[i].binary_search(y).is_err()) {
                for x in &occ[j] {
                    if sys.related(s, y, t, x) {
                        out.push(Violation::Endpoint { s, y: *y, t, x: *x });
                    }
                }
            }
        }
    }

    let check = |i1: usize, i2: usize, i3: usize, y1: &Site, y3: &Site, out: &mut Vec<Violation>| {
        let (s1, s2, s3) = (times[i1], times[i2], times[i3]);
        let direct = sys.related(s1, y1, s3, y3);
        let witness = occ[i2].iter().find(|y2| sys.related(s1, y1, s2, y2) && sys.related(s2, y2, s3, y3));
        match (direct, witness) {
            (true, None) => out.push(Violation::Interpolation { s1, y1: *y1, s2, s3, y3: *y3 }),
            (false, Some(y2)) => out.push(Violation::Transitivity { s1, y1: *y1, s2, y2: *y2, s3, y3: *y3 }),
            _ => {}
        }
    };

    let mut total: u128 = 0;
    for i1 in 0..n {
        for i3 in i1 + 2..n {
            total += (occ[i1].len() * occ[i3].len()) as u128 * (i3 - i1 - 1) as u128;
        }
    }
    if total <= sample_budget as u128 {
        for i1 in 0..n {
            for i2 in i1 + 1..n {
                for i3 in i2 + 1..n {
                    for y1 in &occ[i1] {
                        for y3 in &occ[i3] {
                            check(i1, i2, i3, y1, y3, &mut out);
                        }
                    }
                }
            }
        }
    } else {
        let live: Vec<usize> = (0..n).filter(|&i| !occ[i].is_empty()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_a7c5);
        let mut done = 0;
        let mut attempts = 0;
        while done < sample_budget && attempts < 20 * sample_budget && live.len() >= 2 {
            attempts += 1;
            let a = live[rng.random_range(0..live.len())];
            let c = live[rng.random_range(0..live.len())];
            let (i1, i3) = (a.min(c), a.max(c));
            if i3 < i1 + 2 {
                continue;
            }
            let i2 = rng.random_range(i1 + 1..i3);
            let y1 = occ[i1][rng.random_range(0..occ[i1].len())];
            let y3 = occ[i3][rng.random_range(0..occ[i3].len())];
            check(i1, i2, i3, &y1, &y3, &mut out);
            done += 1;
        }
    }
    out
}

/// Occupancy and ancestry in rescaled coordinates: time `t/n`, space `x/√n`.
pub struct Rescaled<'a, S: AncestralSystem + ?Sized> {
    sys: &'a S,
    n: f64,
    root_n: f64,
}

impl<'a, S: AncestralSystem + ?Sized> Rescaled<'a, S> {
    pub fn new(sys: &'a S, n: f64) -> Result<Self> {
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::Config(format!("rescaling factor must be a finite n ≥ 1, got {n}")));
        }
        Ok(Rescaled { sys, n, root_n: n.sqrt() })
    }

    pub fn scale(&self) -> f64 {
        self.n
    }

    /// Unscaled time for a rescaled time.
    pub fn raw_time(&self, t: f64) -> f64 {
        match self.sys.time_kind() {
            TimeKind::Discrete => (t * self.n).floor(),
            TimeKind::Continuous => t * self.n,
        }
    }

    /// Unscaled site for a rescaled point, if it lies on the scaled lattice.
    pub fn raw_site(&self, x: &[f64]) -> Option<Site> {
        let mut c = [0i32; crate::lattice::MAX_DIM];
        for (slot, &v) in c.iter_mut().zip(x) {
            let u = v * self.root_n;
            let r = u.round();
            if (u - r).abs() > 1e-9 * u.abs().max(1.0) {
                return None;
            }
            *slot = r as i32;
        }
        Some(Site(c))
    }

    pub fn occupied(&self, t: f64) -> PointSet {
        let sites = self.sys.occupied(self.raw_time(t));
        PointSet::from_sites(self.sys.dim(), &sites, self.n)
    }

    pub fn mass(&self, t: f64) -> usize {
        self.sys.occupied(self.raw_time(t)).len()
    }

    pub fn related(&self, s: f64, y: &[f64], t: f64, x: &[f64]) -> bool {
        match (self.raw_site(y), self.raw_site(x)) {
            (Some(ry), Some(rx)) => self.sys.related(self.raw_time(s), &ry, self.raw_time(t), &rx),
            _ => false,
        }
    }

    /// The rescaled range `R^{(n)}`.
    pub fn range(&self) -> PointSet {
        PointSet::from_sites(self.sys.dim(), &self.sys.range_sites(), self.n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusReport {
    pub n: f64,
    pub rho: Vec<f64>,
    /// `Δ^{(n)}(ρ)` in rescaled space units.
    pub delta: Vec<f64>,
    /// Set when paths are not unique, so the scan may miss related pairs.
    pub lower_bound: bool,
}

/// `Δ^{(n)}(ρ)` for each `ρ` in `rho_grid`, scanning the ancestral paths of
/// every occupied point at every event time.
pub fn modulus_stat<S: AncestralSystem + ?Sized>(
    sys: &S,
    n: f64,
    rho_grid: &[f64],
    unique_paths: bool,
) -> Result<ModulusReport> {
    if !(n >= 1.0) {
        return Err(Error::Config(format!("rescaling factor must be ≥ 1, got {n}")));
    }
    let mut best = vec![0i64; rho_grid.len()];
    let discrete = sys.time_kind() == TimeKind::Discrete;
    for tau in sys.event_times() {
        if tau > sys.horizon() {
            break;
        }
        for x in sys.occupied(tau) {
            let path = sys.ancestral_path(tau, &x)?;
            let bp = &path.breakpoints;
            for i in 0..bp.len() {
                for j in i + 1..bp.len() {
                    // shortest time separation between a point on piece i and one on piece j
                    let gap = if discrete { bp[j].0 - bp[i + 1].0 + 1.0 } else { bp[j].0 - bp[i + 1].0 };
                    let disp = bp[j].1.sub(&bp[i].1).norm2();
                    for (k, &rho) in rho_grid.iter().enumerate() {
                        let ok = if discrete { gap <= rho * n } else { gap < rho * n };
                        if ok && disp > best[k] {
                            best[k] = disp;
                        }
                    }
                }
            }
        }
    }
    Ok(ModulusReport {
        n,
        rho: rho_grid.to_vec(),
        delta: best.iter().map(|&b| (b as f64).sqrt() / n.sqrt()).collect(),
        lower_bound: !unique_paths,
    })
}

/// A system given by explicit generations and parent links, used for tests
/// and as the common representation of discrete-time models.
#[derive(Clone, Debug)]
pub struct GenerationSystem {
    pub d: usize,
    /// `T_0, T_1, …`, each sorted; the last may be empty.
    pub generations: Vec<Vec<Site>>,
    /// `parents[i][k]` lists indices into `generations[i]` for the `k`-th
    /// site of `generations[i + 1]`.
    pub parents: Vec<Vec<Vec<u32>>>,
    /// Whether the process was cut off before extinction.
    pub truncated: bool,
}

impl GenerationSystem {
    fn gen_index(&self, t: f64) -> Option<usize> {
        if t < 0.0 {
            return None;
        }
        Some(t.floor() as usize)
    }

    fn index_of(&self, g: usize, x: &Site) -> Option<usize> {
        self.generations.get(g)?.binary_search(x).ok()
    }

    fn empty_after(&self, g: usize) -> bool {
        g >= self.generations.len() && !self.truncated
    }

    /// Indices in generation `g2` reachable from index `k` of generation `g1`.
    pub fn descendants(&self, g1: usize, k: usize, g2: usize) -> Vec<bool> {
        let mut cur = vec![false; self.generations[g1].len()];
        cur[k] = true;
        for g in g1..g2 {
            let next: Vec<bool> = self.parents[g].iter().map(|ps| ps.iter().any(|&p| cur[p as usize])).collect();
            cur = next;
        }
        cur
    }
}

impl AncestralSystem for GenerationSystem {
    fn dim(&self) -> usize {
        self.d
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Discrete
    }

    fn event_times(&self) -> Vec<f64> {
        let mut n = self.generations.len();
        if !self.truncated && self.generations.last().is_some_and(|g| !g.is_empty()) {
            n += 1;
        }
        (0..n).map(|g| g as f64).collect()
    }

    fn occupied(&self, t: f64) -> Vec<Site> {
        self.gen_index(t).and_then(|g| self.generations.get(g)).cloned().unwrap_or_default()
    }

    fn is_occupied(&self, t: f64, x: &Site) -> bool {
        self.gen_index(t).and_then(|g| self.index_of(g, x)).is_some()
    }

    fn related(&self, s: f64, y: &Site, t: f64, x: &Site) -> bool {
        let (Some(g1), Some(g2)) = (self.gen_index(s), self.gen_index(t)) else {
            return false;
        };
        if g1 > g2 || self.empty_after(g2) {
            return false;
        }
        let (Some(k), Some(j)) = (self.index_of(g1, y), self.index_of(g2, x)) else {
            return false;
        };
        if g1 == g2 {
            return j == k;
        }
        self.descendants(g1, k, g2)[j]
    }

    fn survival_time(&self) -> Option<f64> {
        if self.truncated {
            return None;
        }
        let live = self.generations.iter().rposition(|g| !g.is_empty()).map_or(0, |g| g + 1);
        Some(live as f64)
    }

    fn horizon(&self) -> f64 {
        self.event_times().last().copied().unwrap_or(0.0)
    }

    fn range_sites(&self) -> Vec<Site> {
        let mut all: Vec<Site> = self.generations.iter().flatten().copied().collect();
        all.sort();
        all.dedup();
        all
    }
}
