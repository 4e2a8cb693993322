//! Lattice geometry, step kernels, the scaling functions `m(t)`, and the
//! Hausdorff metric on finite point sets.

use std::fmt;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice dimension supported by [`Site`].
pub const MAX_DIM: usize = 6;

/// A point of `Z^d`. Coordinates past the context dimension are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn new(coords: &[i32]) -> Site {
        assert!(coords.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", coords.len());
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    pub fn coords(&self, d: usize) -> &[i32] {
        &self.0[..d]
    }

    pub fn is_origin(&self) -> bool {
        self.0 == [0; MAX_DIM]
    }

    #[inline]
    pub fn add(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(other.0.iter()) {
            *a += *b;
        }
        Site(c)
    }

    #[inline]
    pub fn sub(&self, other: &Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(other.0.iter()) {
            *a -= *b;
        }
        Site(c)
    }

    pub fn neg(&self) -> Site {
        let mut c = self.0;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Site(c)
    }

    /// Squared Euclidean norm.
    #[inline]
    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|&a| (a as i64) * (a as i64)).sum()
    }

    pub fn norm(&self) -> f64 {
        (self.norm2() as f64).sqrt()
    }

    /// `L_∞` norm.
    pub fn inf_norm(&self) -> u32 {
        self.0.iter().map(|a| a.unsigned_abs()).max().unwrap_or(0)
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let last = self.0.iter().rposition(|&a| a != 0).map_or(1, |i| i + 1);
        self.0[..last].serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Site, D::Error> {
        let v: Vec<i32> = Vec::deserialize(de)?;
        if v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("too many coordinates"));
        }
        Ok(Site::new(&v))
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // trailing zero coordinates are dropped; the context carries d
        let last = self.0.iter().rposition(|&a| a != 0).map_or(1, |i| i + 1);
        write!(f, "(")?;
        for (i, a) in self.0[..last].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelVariant {
    NearestNeighbor,
    SpreadOutUniform,
}

impl std::str::FromStr for KernelVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" | "nearest-neighbor" | "nearest-neighbour" => Ok(KernelVariant::NearestNeighbor),
            "so" | "spread-out" | "spread-out-uniform" => Ok(KernelVariant::SpreadOutUniform),
            other => Err(Error::Config(format!("unknown kernel variant `{other}`"))),
        }
    }
}

/// A finite-range symmetric step distribution on `Z^d`.
///
/// Both variants are uniform on their support (the `2d` unit vectors, or the
/// box `[-L, L]^d` minus the origin), so every weight is the exact rational
/// `1 / |support|`.
#[derive(Clone, Debug)]
pub struct Kernel {
    variant: KernelVariant,
    d: usize,
    range: u32,
    support: Vec<Site>,
    sigma2: Ratio<i64>,
}

/// Serialized kernel record. Kernels are rebuilt from parameters on load.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct KernelRecord {
    pub variant: KernelVariant,
    pub d: usize,
    #[serde(rename = "L")]
    pub range: u32,
    pub sigma2: f64,
}

impl Kernel {
    pub fn new(variant: KernelVariant, d: usize, range: u32) -> Result<Kernel> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::Config(format!("dimension must be in 1..={MAX_DIM}, got {d}")));
        }
        if range == 0 {
            return Err(Error::Config("kernel range L must be at least 1".into()));
        }
        let support = match variant {
            KernelVariant::NearestNeighbor => {
                if range != 1 {
                    return Err(Error::Config(format!(
                        "nearest-neighbor kernel requires L = 1, got {range}"
                    )));
                }
                let mut s = Vec::with_capacity(2 * d);
                for i in 0..d {
                    for sign in [-1, 1] {
                        let mut c = [0; MAX_DIM];
                        c[i] = sign;
                        s.push(Site(c));
                    }
                }
                s
            }
            KernelVariant::SpreadOutUniform => {
                let side = 2 * range as usize + 1;
                let total = side.checked_pow(d as u32).filter(|&n| n <= 50_000_000).ok_or_else(|| {
                    Error::Config(format!("box [-{range},{range}]^{d} is too large"))
                })?;
                let mut s = Vec::with_capacity(total - 1);
                for idx in 0..total {
                    let mut c = [0; MAX_DIM];
                    let mut rem = idx;
                    for slot in c.iter_mut().take(d) {
                        *slot = (rem % side) as i32 - range as i32;
                        rem /= side;
                    }
                    let site = Site(c);
                    if !site.is_origin() {
                        s.push(site);
                    }
                }
                s
            }
        };
        let n = support.len() as i64;
        let second: i64 = support.iter().map(|x| (x.0[0] as i64).pow(2)).sum();
        let sigma2 = Ratio::new(second, n);
        Ok(Kernel { variant, d, range, support, sigma2 })
    }

    pub fn nearest_neighbor(d: usize) -> Result<Kernel> {
        Kernel::new(KernelVariant::NearestNeighbor, d, 1)
    }

    pub fn spread_out(d: usize, range: u32) -> Result<Kernel> {
        Kernel::new(KernelVariant::SpreadOutUniform, d, range)
    }

    pub fn from_record(rec: &KernelRecord) -> Result<Kernel> {
        Kernel::new(rec.variant, rec.d, rec.range)
    }

    pub fn record(&self) -> KernelRecord {
        KernelRecord { variant: self.variant, d: self.d, range: self.range, sigma2: self.sigma2_f64() }
    }

    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    pub fn support(&self) -> &[Site] {
        &self.support
    }

    /// Common value of `D(x)` on the support.
    pub fn point_mass(&self) -> Ratio<i64> {
        Ratio::new(1, self.support.len() as i64)
    }

    pub fn weight(&self, x: &Site) -> Ratio<i64> {
        if self.contains(x) {
            self.point_mass()
        } else {
            Ratio::from_integer(0)
        }
    }

    pub fn contains(&self, x: &Site) -> bool {
        if x.is_origin() || x.0[self.d..].iter().any(|&a| a != 0) {
            return false;
        }
        match self.variant {
            KernelVariant::NearestNeighbor => x.norm2() == 1,
            KernelVariant::SpreadOutUniform => x.inf_norm() <= self.range,
        }
    }

    /// Per-coordinate variance `Σ_x x_1^2 D(x)`, exact.
    pub fn sigma2(&self) -> Ratio<i64> {
        self.sigma2
    }

    pub fn sigma2_f64(&self) -> f64 {
        *self.sigma2.numer() as f64 / *self.sigma2.denom() as f64
    }

    pub fn max_weight_f64(&self) -> f64 {
        1.0 / self.support.len() as f64
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        self.support[rng.random_range(0..self.support.len())]
    }
}

/// The normalizing function `m(t)` for each model family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ScalingFunction {
    /// Voter model, `d = 2`: `(t ∨ e) / log(t ∨ e)`.
    VoterD2,
    /// Voter model, `d > 2`: `t ∨ 1`.
    VoterHigh,
    /// Lattice trees: `A^2 V (t ∨ 1)`.
    LatticeTree { a: f64, v: f64 },
    /// Oriented percolation: `A^2 V (t ∨ 1)`.
    OrientedPercolation { a: f64, v: f64 },
}

impl ScalingFunction {
    pub fn voter(d: usize) -> ScalingFunction {
        if d == 2 {
            ScalingFunction::VoterD2
        } else {
            ScalingFunction::VoterHigh
        }
    }

    /// `t ∨ 1` normalization (tree/OP form with `A = V = 1`), used for
    /// branching random walk.
    pub fn linear() -> ScalingFunction {
        ScalingFunction::LatticeTree { a: 1.0, v: 1.0 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            ScalingFunction::VoterD2 => {
                let u = t.max(std::f64::consts::E);
                u / u.ln()
            }
            ScalingFunction::VoterHigh => t.max(1.0),
            ScalingFunction::LatticeTree { a, v } | ScalingFunction::OrientedPercolation { a, v } => {
                a * a * v * t.max(1.0)
            }
        }
    }
}

/// A finite set of points of `R^d`, duplicates collapsed.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    d: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn empty(d: usize) -> PointSet {
        PointSet { d, coords: Vec::new() }
    }

    pub fn from_points<I, P>(d: usize, points: I) -> PointSet
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut pts: Vec<Vec<f64>> = points
            .into_iter()
            .map(|p| {
                let p = p.as_ref();
                assert_eq!(p.len(), d, "point dimension mismatch");
                p.to_vec()
            })
            .collect();
        pts.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        pts.dedup();
        PointSet { d, coords: pts.concat() }
    }

    /// Sites scaled by `1/√n`.
    pub fn from_sites<'a, I>(d: usize, sites: I, n: f64) -> PointSet
    where
        I: IntoIterator<Item = &'a Site>,
    {
        let scale = 1.0 / n.sqrt();
        PointSet::from_points(
            d,
            sites.into_iter().map(|s| s.coords(d).iter().map(|&a| a as f64 * scale).collect::<Vec<_>>()),
        )
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        if self.d == 0 {
            0
        } else {
            self.coords.len() / self.d
        }
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.d.max(1))
    }

    pub fn contains_all(&self, other: &PointSet) -> bool {
        other.iter().all(|p| self.iter().any(|q| q == p))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Point sets above this size get a uniform-grid index for nearest-point queries.
const GRID_INDEX_THRESHOLD: usize = 10_000;

struct GridIndex<'a> {
    set: &'a PointSet,
    cell: f64,
    buckets: rustc_hash::FxHashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    fn new(set: &'a PointSet) -> Self {
        let d = set.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in set.iter() {
            for i in 0..d {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1e-12)).product();
        let cell = (volume / set.len() as f64).powf(1.0 / d as f64).max(1e-9);
        let mut buckets: rustc_hash::FxHashMap<Vec<i64>, Vec<usize>> = Default::default();
        for (i, p) in set.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        GridIndex { set, cell, buckets }
    }

    fn key(p: &[f64], cell: f64) -> Vec<i64> {
        p.iter().map(|x| (x / cell).floor() as i64).collect()
    }

    fn nearest2(&self, q: &[f64]) -> f64 {
        let d = self.set.dim();
        let center = Self::key(q, self.cell);
        let pts: Vec<&[f64]> = self.set.iter().collect();
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            // every point outside the searched cube is at least ring*cell away
            let reach = ring as f64 * self.cell;
            if best.is_finite() && reach * reach >= best {
                return best;
            }
            let mut offset = vec![-ring; d];
            loop {
                if offset.iter().any(|o| o.abs() == ring) {
                    let key: Vec<i64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                    if let Some(bucket) = self.buckets.get(&key) {
                        for &i in bucket {
                            best = best.min(dist2(q, pts[i]));
                        }
                    }
                }
                let mut i = 0;
                while i < d {
                    offset[i] += 1;
                    if offset[i] <= ring {
                        break;
                    }
                    offset[i] = -ring;
                    i += 1;
                }
                if i == d {
                    break;
                }
            }
            ring += 1;
        }
    }
}

/// One-sided deficiency `Δ_1(K, K') = max_{x∈K} d(x, K')`.
///
/// `Δ_1(∅, K') = 0`; `Δ_1(K, ∅) = ∞` for nonempty `K`.
pub fn delta1(k: &PointSet, k2: &PointSet) -> f64 {
    if k.is_empty() {
        return 0.0;
    }
    if k2.is_empty() {
        return f64::INFINITY;
    }
    let best2 = if k2.len() > GRID_INDEX_THRESHOLD {
        let index = GridIndex::new(k2);
        k.iter().map(|p| index.nearest2(p)).fold(0.0, f64::max)
    } else {
        k.iter().map(|p| k2.iter().map(|q| dist2(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max)
    };
    best2.sqrt()
}

/// The usual Hausdorff sum `d_1 = Δ_1(K,K') + Δ_1(K',K)`.
pub fn hausdorff_d1(k1: &PointSet, k2: &PointSet) -> f64 {
    delta1(k1, k2) + delta1(k2, k1)
}

/// The bounded metric `d_0 = d_1 ∧ 1`, with `d_0(∅, K) = 1` for `K ≠ ∅`.
pub fn hausdorff_d0(k1: &PointSet, k2: &PointSet) -> f64 {
    match (k1.is_empty(), k2.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => hausdorff_d1(k1, k2).min(1.0),
    }
}

/// `r_0(K) = sup |x|`; zero for the empty set.
pub fn radius_r0(k: &PointSet) -> f64 {
    k.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>()).fold(0.0, f64::max).sqrt()
}
