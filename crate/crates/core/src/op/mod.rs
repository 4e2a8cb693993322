//! Oriented percolation on `Z₊ × Z^d` from `(0, o)`.
//!
//! Each bond `((i, y), (i+1, x))` is occupied independently with
//! probability `p·D(x − y)`. `T_n` is the set of `x` reached from the origin
//! by an occupied path; a realization keeps, for each occupied site, its
//! occupied parent bonds, which is all the ancestral relation needs.

pub mod exact;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::ancestral::eventlog::{LogHeader, LogRecord};
use crate::ancestral::{GenerationSystem, TimeKind};
use crate::error::{Error, Result};
use crate::estimators::{mean_se, ols_slope, ModelSupplier, ReplicaSummary, RunLimits};
use crate::lattice::{Kernel, ScalingFunction, Site};
use crate::rng::{replica_farm, StreamKey};

pub use exact::{condition7_exact, op_exact_enumerate, Condition7Row, ExactTable, SubsetChain};

/// Supports larger than this use binomial placement.
const THINNING_LIMIT: usize = 64;

#[derive(Clone, Debug)]
pub struct OpConfig {
    pub kernel: Kernel,
    pub p: f64,
    pub n_max: usize,
    /// Cap on `|T_i|`; the run is flagged as truncated beyond it.
    pub cap: usize,
}

impl OpConfig {
    pub fn new(kernel: Kernel, p: f64, n_max: usize) -> Result<OpConfig> {
        let q = p * kernel.max_weight_f64();
        if !(p >= 0.0) || q > 1.0 + 1e-12 {
            return Err(Error::Config(format!("need 0 ≤ p ≤ {}, got {p}", 1.0 / kernel.max_weight_f64())));
        }
        Ok(OpConfig { kernel, p, n_max, cap: 1_000_000 })
    }

    pub fn with_cap(mut self, cap: usize) -> OpConfig {
        self.cap = cap;
        self
    }

    /// Bond occupation probability `p·D(e)` for `e` in the support.
    pub fn bond_prob(&self) -> f64 {
        (self.p * self.kernel.max_weight_f64()).min(1.0)
    }
}

/// Appends the occupied children of one parent (as offsets) to `out`.
pub fn sample_children<R: Rng + ?Sized>(kernel: &Kernel, q: f64, rng: &mut R, out: &mut Vec<Site>) {
    let support = kernel.support();
    if support.len() <= THINNING_LIMIT {
        for e in support {
            if rng.random::<f64>() < q {
                out.push(*e);
            }
        }
    } else {
        let k = Binomial::new(support.len() as u64, q).expect("valid binomial").sample(rng) as usize;
        for i in index::sample(rng, support.len(), k) {
            out.push(support[i]);
        }
    }
}

#[derive(Clone, Debug)]
pub struct OpRealization {
    pub config: OpConfig,
    pub seed: u64,
    pub system: GenerationSystem,
}

impl OpRealization {
    /// First empty generation, if reached.
    pub fn extinction_generation(&self) -> Option<usize> {
        self.system.generations.iter().position(|g| g.is_empty())
    }

    pub fn header(&self) -> LogHeader {
        let mut params = serde_json::Map::new();
        params.insert("p".into(), self.config.p.into());
        params.insert("n_max".into(), self.config.n_max.into());
        params.insert("generations".into(), self.system.generations.len().into());
        params.insert("truncated".into(), self.system.truncated.into());
        LogHeader {
            model: "op".into(),
            d: self.config.kernel.dim(),
            range: self.config.kernel.range(),
            kernel: self.config.kernel.variant(),
            seed: self.seed,
            params,
        }
    }

    /// One `bond` record per occupied parent bond, stamped with the child's generation.
    pub fn log_records(&self) -> Vec<LogRecord> {
        let d = self.config.kernel.dim();
        let g = &self.system.generations;
        let mut out = Vec::new();
        for (i, ps) in self.system.parents.iter().enumerate() {
            for (k, list) in ps.iter().enumerate() {
                for &j in list {
                    out.push(LogRecord::new((i + 1) as f64, "bond", &[g[i][j as usize], g[i + 1][k]], d));
                }
            }
        }
        out
    }

    pub fn from_log(header: &LogHeader, records: &[LogRecord]) -> Result<OpRealization> {
        if header.model != "op" {
            return Err(Error::EventLog(format!("expected an op log, found `{}`", header.model)));
        }
        let num = |k: &str| header.params.get(k).ok_or_else(|| Error::EventLog(format!("header lacks `{k}`")));
        let p = num("p")?.as_f64().ok_or_else(|| Error::EventLog("bad `p`".into()))?;
        let n_max = num("n_max")?.as_u64().ok_or_else(|| Error::EventLog("bad `n_max`".into()))? as usize;
        let ngen = num("generations")?.as_u64().ok_or_else(|| Error::EventLog("bad `generations`".into()))? as usize;
        let truncated = header.params.get("truncated").and_then(|v| v.as_bool()).unwrap_or(false);
        let kernel = Kernel::new(header.kernel, header.d, header.range)?;
        let mut bonds: Vec<Vec<(Site, Site)>> = vec![Vec::new(); ngen];
        for r in records {
            let g = r.t as usize;
            if r.kind != "bond" || g == 0 || g >= ngen || r.t.fract() != 0.0 {
                return Err(Error::EventLog(format!("bad bond record at t={}", r.t)));
            }
            bonds[g].push((r.site(0)?, r.site(1)?));
        }
        let mut generations = vec![vec![Site::ORIGIN]];
        let mut parents = Vec::new();
        for g in 1..ngen {
            let mut kids: Vec<Site> = bonds[g].iter().map(|b| b.1).collect();
            kids.sort();
            kids.dedup();
            let mut ps = vec![Vec::new(); kids.len()];
            for (y, x) in &bonds[g] {
                let j = generations[g - 1]
                    .binary_search(y)
                    .map_err(|_| Error::EventLog(format!("bond from unoccupied {y:?} at generation {}", g - 1)))?;
                let k = kids.binary_search(x).unwrap();
                ps[k].push(j as u32);
            }
            for list in &mut ps {
                list.sort_unstable();
            }
            generations.push(kids);
            parents.push(ps);
        }
        let config = OpConfig { kernel, p, n_max, cap: usize::MAX };
        Ok(OpRealization { config, seed: header.seed, system: GenerationSystem { d: header.d, generations, parents, truncated } })
    }
}

/// Grows the cluster of `(0, o)` for up to `n_max` generations.
pub fn simulate_op(cfg: &OpConfig, key: StreamKey) -> OpRealization {
    let mut rng = key.rng();
    let q = cfg.bond_prob();
    let mut generations = vec![vec![Site::ORIGIN]];
    let mut parents: Vec<Vec<Vec<u32>>> = Vec::new();
    let mut truncated = false;
    let mut kids = Vec::new();
    while generations.len() <= cfg.n_max {
        let cur = generations.last().unwrap();
        if cur.is_empty() {
            break;
        }
        let mut links: FxHashMap<Site, Vec<u32>> = FxHashMap::default();
        for (j, y) in cur.iter().enumerate() {
            kids.clear();
            sample_children(&cfg.kernel, q, &mut rng, &mut kids);
            for e in &kids {
                links.entry(y.add(e)).or_default().push(j as u32);
            }
        }
        let mut next: Vec<(Site, Vec<u32>)> = links.into_iter().collect();
        next.sort_by(|a, b| a.0.cmp(&b.0));
        let (sites, ps): (Vec<Site>, Vec<Vec<u32>>) = next.into_iter().unzip();
        let big = sites.len() > cfg.cap;
        generations.push(sites);
        parents.push(ps);
        if big {
            truncated = true;
            break;
        }
    }
    // the last generation is empty exactly when the cluster died out
    truncated |= generations.last().is_some_and(|g| !g.is_empty());
    let system = GenerationSystem { d: cfg.kernel.dim(), generations, parents, truncated };
    OpRealization { config: cfg.clone(), seed: key.mix(), system }
}

/// Oriented percolation as a replica supplier.
#[derive(Clone, Debug)]
pub struct OpModel {
    pub kernel: Kernel,
    pub p: f64,
}

impl ModelSupplier for OpModel {
    fn label(&self) -> String {
        format!("op(d={}, {:?}, L={}, p={})", self.kernel.dim(), self.kernel.variant(), self.kernel.range(), self.p)
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Discrete
    }

    fn scaling(&self) -> ScalingFunction {
        ScalingFunction::linear()
    }

    fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
        let mut rng = key.rng();
        let q = (self.p * self.kernel.max_weight_f64()).min(1.0);
        let mut s = ReplicaSummary::start(limits);
        let horizon = limits.horizon.floor() as usize;
        let mut cur = vec![Site::ORIGIN];
        let mut seen: rustc_hash::FxHashSet<Site> = Default::default();
        let mut kids = Vec::new();
        let mut g = 0usize;
        loop {
            s.record_state(g as f64, cur.len() as f64, limits);
            if cur.is_empty() {
                s.finish(g as f64, true, limits);
                return s;
            }
            if g >= horizon || s.exited(limits) {
                s.finish(g as f64, false, limits);
                return s;
            }
            seen.clear();
            for y in &cur {
                kids.clear();
                sample_children(&self.kernel, q, &mut rng, &mut kids);
                for e in &kids {
                    let x = y.add(e);
                    if seen.insert(x) {
                        s.visit(&x, (g + 1) as f64, limits);
                    }
                }
            }
            s.integrate(g as f64, (g + 1) as f64, cur.len() as f64, limits);
            cur.clear();
            cur.extend(seen.iter().copied());
            cur.sort();
            g += 1;
            if cur.len() > limits.site_cap {
                s.truncated = true;
                s.record_state(g as f64, cur.len() as f64, limits);
                s.finish(g as f64, false, limits);
                return s;
            }
        }
    }
}

/// One bisection step of [`estimate_pc`].
#[derive(Clone, Debug, Serialize)]
pub struct PcRound {
    pub p: f64,
    /// Slope of `log Ê|T_n|` against `n` over the fitting window.
    pub slope: f64,
    /// Bootstrap standard error of the slope.
    pub slope_se: f64,
    pub verdict: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct PcEstimate {
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub rounds: Vec<PcRound>,
    /// Set when the budget ran out with the bracket still wide.
    pub flagged: bool,
    pub window: (usize, usize),
}

/// Slope of `log Ê|T_n|` over generations `[n_max/2, n_max]` with a
/// replica-bootstrap standard error.
pub fn mass_slope(kernel: &Kernel, p: f64, n_max: usize, replicas: u64, key: StreamKey) -> (f64, f64) {
    let w0 = n_max / 2;
    let probes: Vec<f64> = (w0..=n_max).map(|n| n as f64).collect();
    let model = OpModel { kernel: kernel.clone(), p };
    let limits = RunLimits::until(n_max as f64).with_probes(&probes);
    let rows: Vec<Vec<f64>> = replica_farm(key, replicas, |_, k| model.run_replica(k, &limits).mass_at);
    let fit = |idx: &[usize]| -> f64 {
        let ys: Vec<f64> = (0..probes.len())
            .map(|j| {
                let m = idx.iter().map(|&i| rows[i][j]).sum::<f64>() / idx.len() as f64;
                m.max(1e-300).ln()
            })
            .collect();
        ols_slope(&probes, &ys).0
    };
    let all: Vec<usize> = (0..rows.len()).collect();
    let slope = fit(&all);
    let mut rng = key.stream(99).rng();
    let boots: Vec<f64> = (0..200)
        .map(|_| {
            let idx: Vec<usize> = (0..rows.len()).map(|_| rng.random_range(0..rows.len())).collect();
            fit(&idx)
        })
        .collect();
    let (_, se) = mean_se(&boots);
    (slope, se * (boots.len() as f64).sqrt())
}

/// Bisection on `p` for a flat mean mass `E|T_n|` over `[n_max/2, n_max]`.
///
/// A slope more than two bootstrap errors above zero moves the upper end,
/// more than two below moves the lower end; a slope within that band stops
/// the search. The returned bracket is the last `[lo, hi]`.
pub fn estimate_pc(kernel: &Kernel, lo: f64, hi: f64, n_max: usize, replicas: u64, rounds: usize, key: StreamKey) -> Result<PcEstimate> {
    let pmax = 1.0 / kernel.max_weight_f64();
    if !(0.0 <= lo && lo < hi && hi <= pmax) {
        return Err(Error::Config(format!("need 0 ≤ lo < hi ≤ {pmax}, got [{lo}, {hi}]")));
    }
    if n_max < 4 {
        return Err(Error::Config("n_max must be at least 4".into()));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut log = Vec::new();
    let mut settled = false;
    for r in 0..rounds {
        let mid = 0.5 * (lo + hi);
        let (slope, se) = mass_slope(kernel, mid, n_max, replicas, key.experiment(r as u64));
        let verdict = if slope > 2.0 * se {
            hi = mid;
            "supercritical"
        } else if slope < -2.0 * se {
            lo = mid;
            "subcritical"
        } else {
            settled = true;
            "flat"
        };
        log.push(PcRound { p: mid, slope, slope_se: se, verdict });
        if settled {
            break;
        }
    }
    let p_hat = log.last().filter(|r| r.verdict == "flat").map_or(0.5 * (lo + hi), |r| r.p);
    let flagged = !settled && (hi - lo) > 0.01 * p_hat;
    Ok(PcEstimate { p_hat, lo, hi, rounds: log, flagged, window: (n_max / 2, n_max) })
}

/// `P̂(∃z: (s,y) → (s+t,z) | y ∈ T_s)` with `y` uniform on `T_s`.
pub fn restart_survival(cfg: &OpConfig, s: usize, t: usize, replicas: u64, key: StreamKey) -> (u64, u64) {
    let cfg = OpConfig { n_max: s + t, ..cfg.clone() };
    let outs: Vec<Option<bool>> = replica_farm(key, replicas, |_, k| {
        let r = simulate_op(&cfg, k);
        let g = &r.system.generations;
        if g.len() <= s || g[s].is_empty() {
            return None;
        }
        let j = k.stream(7).rng().random_range(0..g[s].len());
        Some(g.len() > s + t && r.system.descendants(s, j, s + t).iter().any(|&b| b))
    });
    let trials = outs.iter().flatten().count() as u64;
    (outs.iter().flatten().filter(|&&b| b).count() as u64, trials)
}

/// `E[Σ_{x∈T_n} Σ_{y∈T_m} 1((m,y)→(n,x)) |x−y|^p]` estimated directly,
/// and through `E|T_m| · E[Σ_{z∈T_{n−m}} |z|^p]`.
pub fn lagged_moment_pair(cfg: &OpConfig, m: usize, n: usize, p: u32, replicas: u64, key: StreamKey) -> ((f64, f64), (f64, f64)) {
    let cfg_n = OpConfig { n_max: n, ..cfg.clone() };
    let pow = |x: &Site| (x.norm2() as f64).powf(p as f64 / 2.0);
    let direct: Vec<f64> = replica_farm(key.stream(0), replicas, |_, k| {
        let r = simulate_op(&cfg_n, k);
        let g = &r.system.generations;
        if g.len() <= n || g[n].is_empty() {
            return 0.0;
        }
        let mut tot = 0.0;
        for (j, y) in g[m].iter().enumerate() {
            for (i, hit) in r.system.descendants(m, j, n).iter().enumerate() {
                if *hit {
                    tot += pow(&g[n][i].sub(y));
                }
            }
        }
        tot
    });
    let model = OpModel { kernel: cfg.kernel.clone(), p: cfg.p };
    let limits = RunLimits::until(m as f64).with_probes(&[m as f64]);
    let mass: Vec<f64> = replica_farm(key.stream(1), replicas, |_, k| model.run_replica(k, &limits).mass_at[0]);
    let cfg_k = OpConfig { n_max: n - m, ..cfg.clone() };
    let spread: Vec<f64> = replica_farm(key.stream(2), replicas, |_, k| {
        let r = simulate_op(&cfg_k, k);
        r.system.generations.get(n - m).map_or(0.0, |g| g.iter().map(pow).sum())
    });
    let (mm, mse) = mean_se(&mass);
    let (sm, sse) = mean_se(&spread);
    let prod = mm * sm;
    let prod_se = ((mm * sse).powi(2) + (sm * mse).powi(2)).sqrt();
    (mean_se(&direct), (prod, prod_se))
}

/// `Σ_x |x|^p P̂(x ∈ T_n) / n^{p/2}` for each `n` in the grid.
pub fn spread_moment(cfg: &OpConfig, p: u32, n_grid: &[usize], replicas: u64, key: StreamKey) -> Vec<(usize, f64, f64)> {
    let nmax = n_grid.iter().copied().max().unwrap_or(0);
    let cfg = OpConfig { n_max: nmax, ..cfg.clone() };
    let rows: Vec<Vec<f64>> = replica_farm(key, replicas, |_, k| {
        let r = simulate_op(&cfg, k);
        n_grid
            .iter()
            .map(|&n| {
                r.system.generations.get(n).map_or(0.0, |g| g.iter().map(|x| (x.norm2() as f64).powf(p as f64 / 2.0)).sum())
            })
            .collect()
    });
    n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (m, se) = mean_se(&col);
            let norm = (n.max(1) as f64).powf(p as f64 / 2.0);
            (n, m / norm, se / norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancestral::{check_ar_axioms, AncestralSystem};
    use crate::estimators::proportion;

    #[test]
    fn one_step_survival_at_p_one() {
        let k = Kernel::spread_out(1, 1).unwrap();
        let cfg = OpConfig::new(k, 1.0, 1).unwrap();
        let n = 40_000;
        let alive = (0..n).filter(|&i| !simulate_op(&cfg, StreamKey::new(3).replica(i)).system.generations[1].is_empty()).count();
        let pr = proportion(alive as u64, n);
        assert!(pr.lo < 0.75 && 0.75 < pr.hi, "{pr:?}");
    }

    #[test]
    fn bond_frequencies_match() {
        for (d, l) in [(1, 2), (2, 5)] {
            let k = Kernel::spread_out(d, l).unwrap();
            let q = 0.9 * k.max_weight_f64();
            let mut rng = StreamKey::new(8).rng();
            let mut counts: FxHashMap<Site, u64> = FxHashMap::default();
            let n = 20_000u64;
            let mut out = Vec::new();
            for _ in 0..n {
                out.clear();
                sample_children(&k, q, &mut rng, &mut out);
                let mut sorted = out.clone();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), out.len());
                for e in &out {
                    *counts.entry(*e).or_default() += 1;
                }
            }
            let se = (q * (1.0 - q) / n as f64).sqrt();
            for e in k.support() {
                let f = *counts.get(e).unwrap_or(&0) as f64 / n as f64;
                assert!((f - q).abs() < 4.0 * se + 1e-3 * (k.support().len() as f64).sqrt() * se, "{e:?} {f} vs {q}");
            }
        }
    }

    #[test]
    fn parent_map_is_sound_and_steps_are_bounded() {
        let k = Kernel::spread_out(2, 2).unwrap();
        let cfg = OpConfig::new(k.clone(), 1.1, 30).unwrap();
        for i in 0..50 {
            let r = simulate_op(&cfg, StreamKey::new(4).replica(i));
            let g = &r.system.generations;
            for (i, ps) in r.system.parents.iter().enumerate() {
                assert_eq!(ps.len(), g[i + 1].len());
                for (kid, list) in ps.iter().enumerate() {
                    assert!(!list.is_empty());
                    for &j in list {
                        let step = g[i + 1][kid].sub(&g[i][j as usize]);
                        assert!(k.contains(&step) && step.inf_norm() <= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn realizations_satisfy_axioms() {
        for (d, l, p) in [(1, 1, 1.3), (2, 1, 1.2), (5, 1, 1.0)] {
            let k = Kernel::spread_out(d, l).unwrap();
            let cfg = OpConfig::new(k, p, 12).unwrap();
            for i in 0..40 {
                let r = simulate_op(&cfg, StreamKey::new(5).replica(i));
                assert_eq!(check_ar_axioms(&r.system, 2000), vec![], "d={d} replica {i}");
            }
        }
    }

    #[test]
    fn summary_matches_realization() {
        let k = Kernel::spread_out(2, 1).unwrap();
        let model = OpModel { kernel: k.clone(), p: 1.2 };
        let cfg = OpConfig::new(k, 1.2, 15).unwrap();
        let limits = RunLimits::until(15.0).with_probes(&[3.0, 9.0, 15.0]);
        for i in 0..40 {
            let key = StreamKey::new(6).replica(i);
            let s = model.run_replica(key, &limits);
            let r = simulate_op(&cfg, key);
            assert_eq!(s.extinction, r.system.survival_time());
            for (j, &t) in limits.probe_times.iter().enumerate() {
                assert_eq!(s.mass_at[j], r.system.generations.get(t as usize).map_or(0, |g| g.len()) as f64);
            }
        }
    }

    #[test]
    fn log_round_trip() {
        let k = Kernel::spread_out(2, 1).unwrap();
        let cfg = OpConfig::new(k, 1.3, 10).unwrap();
        let r = simulate_op(&cfg, StreamKey::new(1));
        let mut buf = Vec::new();
        crate::ancestral::eventlog::write_log(&mut buf, &r.header(), &r.log_records()).unwrap();
        let (h, recs) = crate::ancestral::eventlog::read_log(buf.as_slice()).unwrap();
        let back = OpRealization::from_log(&h, &recs).unwrap();
        assert_eq!(back.system.generations, r.system.generations);
        assert_eq!(back.system.parents, r.system.parents);
    }

    #[test]
    fn mean_mass_is_p_after_one_step() {
        let k = Kernel::spread_out(2, 3).unwrap();
        let model = OpModel { kernel: k, p: 0.8 };
        let pts = crate::estimators::mean_mass(&model, &[1.0], 20_000, StreamKey::new(2));
        assert!((pts[0].mean - 0.8).abs() < 4.0 * pts[0].stderr, "{pts:?}");
    }

    #[test]
    fn restart_matches_survival() {
        let k = Kernel::spread_out(1, 1).unwrap();
        let cfg = OpConfig::new(k.clone(), 1.29, 10).unwrap();
        let (h, n) = restart_survival(&cfg, 3, 5, 20_000, StreamKey::new(12));
        let model = OpModel { kernel: k, p: 1.29 };
        let theta = crate::estimators::estimate_survival(&model, &[5.0], 20_000, StreamKey::new(13)).points[0].estimate;
        let a = proportion(h, n);
        let se = (a.se.powi(2) + theta * (1.0 - theta) / 20_000.0).sqrt();
        assert!((a.p - theta).abs() < 4.0 * se, "{} vs {theta}", a.p);
    }

    #[test]
    fn lagged_moment_reduction_is_an_identity() {
        let k = Kernel::spread_out(1, 1).unwrap();
        let cfg = OpConfig::new(k, 1.29, 10).unwrap();
        let ((d, dse), (r, rse)) = lagged_moment_pair(&cfg, 3, 7, 2, 40_000, StreamKey::new(14));
        assert!((d - r).abs() < 4.0 * (dse * dse + rse * rse).sqrt(), "{d} ± {dse} vs {r} ± {rse}");
    }

    #[test]
    fn pc_one_dimensional_nearest_neighbour() {
        // bond percolation threshold on the directed square lattice is 0.6447
        let k = Kernel::spread_out(1, 1).unwrap();
        let est = estimate_pc(&k, 1.0, 2.0, 120, 3000, 8, StreamKey::new(15)).unwrap();
        assert!((est.p_hat - 1.2894).abs() < 0.1, "{est:?}");
        assert!(est.p_hat > 1.0);
    }

    #[test]
    fn pc_decreases_with_range() {
        let est: Vec<f64> = [1u32, 2, 4]
            .iter()
            .map(|&l| {
                let k = Kernel::spread_out(1, l).unwrap();
                estimate_pc(&k, 1.0, 1.0 / k.max_weight_f64(), 100, 2000, 8, StreamKey::new(16 + l as u64)).unwrap().p_hat
            })
            .collect();
        assert!(est[0] > est[1] && est[1] > est[2] && est[2] > 1.0, "{est:?}");
    }
}
