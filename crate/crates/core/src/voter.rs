//! Voter model from a single 1 at the origin.
//!
//! Voter `x` adopts the opinion of `y` at rate `D(y − x)`; an arrow is
//! drawn from `y` to `x` at each such time. Only arrows into the cluster
//! or out of it can change `T_t` or be crossed by a dual walk started from
//! an occupied point, so the simulation generates exactly those:
//!
//! * class A, rate `|T|`: arrows into an occupied `x` from `y = x + ξ`;
//!   a death if `y ∉ T`, otherwise a logged non-flip arrow;
//! * class B, rate `|T|`: candidate arrows from an occupied `y` into
//!   `x = y + ξ`, kept (as a birth) only when `x ∉ T`.
//!
//! Both classes are drawn from one exponential clock of rate `2|T|`.

use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::Serialize;

use crate::ancestral::eventlog::{LogHeader, LogRecord};
use crate::ancestral::{AncestralPath, AncestralSystem, TimeKind};
use crate::error::{Error, Result};
use crate::estimators::{mean_se, EstimatorReport, ModelSupplier, ReplicaSummary, RunLimits};
use crate::lattice::{Kernel, ScalingFunction, Site};
use crate::rng::{exp_from_uniform, replica_farm, StreamKey};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrowKind {
    /// The target adopts a 1.
    Birth,
    /// The target adopts a 0.
    Death,
    /// Source and target agree.
    Keep,
}

impl ArrowKind {
    fn tag(self) -> &'static str {
        match self {
            ArrowKind::Birth => "birth",
            ArrowKind::Death => "death",
            ArrowKind::Keep => "keep",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ArrowEvent {
    pub time: f64,
    pub source: Site,
    pub target: Site,
    pub kind: ArrowKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineEnd {
    Extinct,
    Horizon,
    Stopped,
    Capped,
}

/// Occupied set with O(1) uniform sampling, insertion and removal.
#[derive(Default)]
struct OccupiedSet {
    sites: Vec<Site>,
    index: FxHashMap<Site, u32>,
}

impl OccupiedSet {
    fn contains(&self, x: &Site) -> bool {
        self.index.contains_key(x)
    }

    fn insert(&mut self, x: Site) {
        self.index.insert(x, self.sites.len() as u32);
        self.sites.push(x);
    }

    fn remove(&mut self, x: &Site) {
        let i = self.index.remove(x).expect("removing an occupied site") as usize;
        let last = self.sites.pop().unwrap();
        if i < self.sites.len() {
            self.sites[i] = last;
            self.index.insert(last, i as u32);
        }
    }
}

/// Runs the voter dynamics until extinction, `t_max`, the observer asks to
/// stop, or more than `site_cap` distinct sites have been occupied.
///
/// The observer sees every arrow with the cluster size after it and returns
/// `false` to stop. Returns the reason and the stopping time.
pub fn run_engine<R, F>(kernel: &Kernel, rng: &mut R, t_max: f64, site_cap: usize, mut observe: F) -> (EngineEnd, f64)
where
    R: Rng + ?Sized,
    F: FnMut(&ArrowEvent, usize) -> bool,
{
    let mut occ = OccupiedSet::default();
    occ.insert(Site::ORIGIN);
    let mut seen: FxHashSet<Site> = FxHashSet::default();
    seen.insert(Site::ORIGIN);
    let mut t = 0.0;
    loop {
        let k = occ.sites.len();
        if k == 0 {
            return (EngineEnd::Extinct, t);
        }
        let dt = exp_from_uniform(rng.random::<f64>(), 2.0 * k as f64);
        if t + dt > t_max {
            return (EngineEnd::Horizon, t_max);
        }
        t += dt;
        let class_a = rng.random::<bool>();
        let pick = occ.sites[rng.random_range(0..k)];
        let step = kernel.sample(rng);
        let ev = if class_a {
            let src = pick.add(&step);
            if occ.contains(&src) {
                ArrowEvent { time: t, source: src, target: pick, kind: ArrowKind::Keep }
            } else {
                occ.remove(&pick);
                ArrowEvent { time: t, source: src, target: pick, kind: ArrowKind::Death }
            }
        } else {
            let tgt = pick.add(&step);
            if occ.contains(&tgt) {
                continue;
            }
            occ.insert(tgt);
            seen.insert(tgt);
            ArrowEvent { time: t, source: pick, target: tgt, kind: ArrowKind::Birth }
        };
        if !observe(&ev, occ.sites.len()) {
            return (EngineEnd::Stopped, t);
        }
        if seen.len() > site_cap {
            return (EngineEnd::Capped, t);
        }
    }
}

/// A realization with its full arrow log.
#[derive(Clone, Debug)]
pub struct VoterRealization {
    pub kernel: Kernel,
    pub seed: u64,
    /// Time-ordered arrows touching the cluster.
    pub arrows: Vec<ArrowEvent>,
    /// Arrows into each site, time-ordered, as `(time, source)`.
    into: FxHashMap<Site, Vec<(f64, Site)>>,
    /// Occupancy intervals `[birth, death)` per site.
    intervals: FxHashMap<Site, Vec<(f64, f64)>>,
    pub extinction: Option<f64>,
    pub horizon: f64,
    pub truncated: bool,
}

pub fn simulate_voter(kernel: &Kernel, key: StreamKey, t_max: f64, site_cap: usize) -> Result<VoterRealization> {
    if !(t_max > 0.0) {
        return Err(Error::Config(format!("t_max must be positive, got {t_max}")));
    }
    let mut rng = key.rng();
    let mut arrows = Vec::new();
    let (end, t_end) = run_engine(kernel, &mut rng, t_max, site_cap, |ev, _| {
        arrows.push(*ev);
        true
    });
    let mut real = VoterRealization::from_arrows(kernel.clone(), key.mix(), arrows)?;
    match end {
        EngineEnd::Extinct => {}
        EngineEnd::Horizon => real.horizon = t_max,
        EngineEnd::Capped | EngineEnd::Stopped => {
            real.horizon = t_end;
            real.truncated = true;
        }
    }
    Ok(real)
}

impl VoterRealization {
    /// Rebuilds a realization from its arrow log. The horizon is the last
    /// arrow time unless the cluster died out.
    pub fn from_arrows(kernel: Kernel, seed: u64, arrows: Vec<ArrowEvent>) -> Result<VoterRealization> {
        let mut into: FxHashMap<Site, Vec<(f64, Site)>> = FxHashMap::default();
        let mut intervals: FxHashMap<Site, Vec<(f64, f64)>> = FxHashMap::default();
        intervals.insert(Site::ORIGIN, vec![(0.0, f64::INFINITY)]);
        let mut alive = 1usize;
        let mut last = 0.0;
        for ev in &arrows {
            if ev.time <= last && last > 0.0 {
                return Err(Error::EventLog(format!("arrow times must increase (at {})", ev.time)));
            }
            last = ev.time;
            into.entry(ev.target).or_default().push((ev.time, ev.source));
            match ev.kind {
                ArrowKind::Birth => {
                    intervals.entry(ev.target).or_default().push((ev.time, f64::INFINITY));
                    alive += 1;
                }
                ArrowKind::Death => {
                    let iv = intervals
                        .get_mut(&ev.target)
                        .and_then(|v| v.last_mut())
                        .filter(|iv| iv.1.is_infinite())
                        .ok_or_else(|| Error::EventLog(format!("death of unoccupied {:?}", ev.target)))?;
                    iv.1 = ev.time;
                    alive -= 1;
                }
                ArrowKind::Keep => {}
            }
        }
        let extinction = if alive == 0 { Some(last) } else { None };
        Ok(VoterRealization {
            kernel,
            seed,
            arrows,
            into,
            intervals,
            extinction,
            horizon: extinction.unwrap_or(last),
            truncated: false,
        })
    }

    pub fn header(&self) -> LogHeader {
        let mut params = serde_json::Map::new();
        params.insert("horizon".into(), self.horizon.into());
        params.insert("truncated".into(), self.truncated.into());
        LogHeader {
            model: "voter".into(),
            d: self.kernel.dim(),
            range: self.kernel.range(),
            kernel: self.kernel.variant(),
            seed: self.seed,
            params,
        }
    }

    pub fn log_records(&self) -> Vec<LogRecord> {
        let d = self.kernel.dim();
        self.arrows.iter().map(|a| LogRecord::new(a.time, a.kind.tag(), &[a.source, a.target], d)).collect()
    }

    pub fn from_log(header: &LogHeader, records: &[LogRecord]) -> Result<VoterRealization> {
        if header.model != "voter" {
            return Err(Error::EventLog(format!("expected a voter log, found `{}`", header.model)));
        }
        let kernel = Kernel::new(header.kernel, header.d, header.range)?;
        let arrows = records
            .iter()
            .map(|r| {
                let kind = match r.kind.as_str() {
                    "birth" => ArrowKind::Birth,
                    "death" => ArrowKind::Death,
                    "keep" => ArrowKind::Keep,
                    other => return Err(Error::EventLog(format!("unknown arrow kind `{other}`"))),
                };
                Ok(ArrowEvent { time: r.t, source: r.site(0)?, target: r.site(1)?, kind })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut real = VoterRealization::from_arrows(kernel, header.seed, arrows)?;
        if let Some(h) = header.params.get("horizon").and_then(|v| v.as_f64()) {
            real.horizon = h;
        }
        real.truncated = header.params.get("truncated").and_then(|v| v.as_bool()).unwrap_or(false);
        Ok(real)
    }

    /// Sites with at least one logged arrow or occupancy interval.
    pub fn logged_sites(&self) -> Vec<Site> {
        let mut all: Vec<Site> = self.intervals.keys().chain(self.into.keys()).copied().collect();
        all.extend(self.arrows.iter().map(|a| a.source));
        all.sort();
        all.dedup();
        all
    }

    fn occupied_at(&self, t: f64, x: &Site) -> bool {
        if t < 0.0 || t > self.horizon {
            return false;
        }
        self.intervals.get(x).is_some_and(|v| v.iter().any(|&(b, d)| b <= t && t < d))
    }

    /// Dual walk `s ↦ W^{t,x}_s` for `s ∈ [0, t]`, following logged arrows.
    pub fn dual_walk(&self, t: f64, x: &Site) -> Result<DualWalk> {
        if t < 0.0 || t > self.horizon {
            return Err(Error::Config(format!("time {t} outside [0, {}]", self.horizon)));
        }
        if !self.into.contains_key(x) && !self.intervals.contains_key(x) && !self.arrows.iter().any(|a| a.source == *x) {
            return Err(Error::Config(format!("{x:?} lies outside the logged neighbourhood")));
        }
        let mut jumps = Vec::new();
        let mut cur = *x;
        let mut bound = t;
        let mut inclusive = true;
        while let Some((tau, src)) = self.latest_arrow(&cur, bound, inclusive, 0.0) {
            jumps.push((t - tau, src));
            cur = src;
            bound = tau;
            inclusive = false;
        }
        Ok(DualWalk { terminal: (t, *x), jumps })
    }

    /// Latest arrow into `x` with time in `(floor, bound]` (or `(floor, bound)`).
    fn latest_arrow(&self, x: &Site, bound: f64, inclusive: bool, floor: f64) -> Option<(f64, Site)> {
        let list = self.into.get(x)?;
        let i = if inclusive { list.partition_point(|a| a.0 <= bound) } else { list.partition_point(|a| a.0 < bound) };
        if i == 0 {
            return None;
        }
        let a = list[i - 1];
        (a.0 > floor).then_some(a)
    }

    /// `W^{t,x}_{t−s}`: the site reached by following arrows in `(s, t]`.
    pub fn ancestor(&self, t: f64, x: &Site, s: f64) -> Site {
        let mut cur = *x;
        let mut bound = t;
        let mut inclusive = true;
        while let Some((tau, src)) = self.latest_arrow(&cur, bound, inclusive, s) {
            cur = src;
            bound = tau;
            inclusive = false;
        }
        cur
    }

    /// `Σ_{x∈T_t} |x − W^{t,x}_s|^p`.
    pub fn lagged_displacement_sum(&self, s: f64, t: f64, p: u32) -> f64 {
        self.occupied(t)
            .iter()
            .map(|x| (x.sub(&self.ancestor(t, x, t - s)).norm2() as f64).powf(p as f64 / 2.0))
            .sum()
    }
}

/// Backward trace from `(t, x)`: `jumps` lists `(backward time u, new site)`
/// in increasing `u`; `W_u` is the site of the last jump with time `< u`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWalk {
    pub terminal: (f64, Site),
    pub jumps: Vec<(f64, Site)>,
}

impl DualWalk {
    /// `W^{t,x}_u`, left-continuous in `u`.
    pub fn at(&self, u: f64) -> Site {
        let mut cur = self.terminal.1;
        for &(v, y) in &self.jumps {
            if v < u {
                cur = y;
            } else {
                break;
            }
        }
        cur
    }

    pub fn end(&self) -> Site {
        self.jumps.last().map_or(self.terminal.1, |j| j.1)
    }
}

impl AncestralSystem for VoterRealization {
    fn dim(&self) -> usize {
        self.kernel.dim()
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Continuous
    }

    fn event_times(&self) -> Vec<f64> {
        let mut v = vec![0.0];
        v.extend(self.arrows.iter().map(|a| a.time));
        v
    }

    fn occupied(&self, t: f64) -> Vec<Site> {
        let mut out: Vec<Site> = self.intervals.keys().filter(|x| self.occupied_at(t, x)).copied().collect();
        out.sort();
        out
    }

    fn is_occupied(&self, t: f64, x: &Site) -> bool {
        self.occupied_at(t, x)
    }

    fn related(&self, s: f64, y: &Site, t: f64, x: &Site) -> bool {
        if s < 0.0 || s > t || !self.occupied_at(t, x) {
            return false;
        }
        self.ancestor(t, x, s) == *y
    }

    fn survival_time(&self) -> Option<f64> {
        self.extinction
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn range_sites(&self) -> Vec<Site> {
        let mut v: Vec<Site> = self.intervals.keys().copied().collect();
        v.sort();
        v
    }

    /// The reversed dual walk.
    fn ancestral_path(&self, t: f64, x: &Site) -> Result<AncestralPath> {
        if !self.occupied_at(t, x) {
            return Err(Error::Config(format!("{x:?} is not occupied at time {t}")));
        }
        let w = self.dual_walk(t, x)?;
        let mut breakpoints = vec![(0.0, w.end())];
        let mut before = Vec::with_capacity(w.jumps.len());
        let mut cur = *x;
        for &(u, y) in &w.jumps {
            before.push((t - u, cur));
            cur = y;
        }
        breakpoints.extend(before.into_iter().rev());
        Ok(AncestralPath { breakpoints, terminal: (t, *x) })
    }
}

/// The voter model as a replica supplier for the estimators.
#[derive(Clone, Debug)]
pub struct VoterModel {
    pub kernel: Kernel,
}

impl ModelSupplier for VoterModel {
    fn label(&self) -> String {
        format!("voter(d={}, {:?}, L={})", self.kernel.dim(), self.kernel.variant(), self.kernel.range())
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Continuous
    }

    fn scaling(&self) -> ScalingFunction {
        ScalingFunction::voter(self.kernel.dim())
    }

    fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
        let mut rng = key.rng();
        let mut s = ReplicaSummary::start(limits);
        s.record_state(0.0, 1.0, limits);
        let mut last_t = 0.0;
        let mut mass = 1.0;
        let (end, t_end) = run_engine(&self.kernel, &mut rng, limits.horizon, limits.site_cap, |ev, size| {
            if ev.kind == ArrowKind::Keep {
                return true;
            }
            s.integrate(last_t, ev.time, mass, limits);
            last_t = ev.time;
            mass = size as f64;
            s.record_state(ev.time, mass, limits);
            if ev.kind == ArrowKind::Birth {
                s.visit(&ev.target, ev.time, limits);
                if s.exited(limits) {
                    return false;
                }
            }
            true
        });
        s.integrate(last_t, t_end, mass, limits);
        match end {
            EngineEnd::Extinct => s.finish(t_end, true, limits),
            EngineEnd::Horizon | EngineEnd::Stopped => s.finish(t_end, false, limits),
            EngineEnd::Capped => {
                s.truncated = true;
                s.finish(t_end, false, limits)
            }
        }
        s
    }
}

/// The two Condition-4 estimates: the direct lagged displacement sum and
/// the walk moment it reduces to.
#[derive(Clone, Debug, Serialize)]
pub struct Condition4Pair {
    pub direct: EstimatorReport,
    pub reduction: EstimatorReport,
    /// `E|W_s|^p` computed exactly from the step moments.
    pub exact: f64,
    /// `(s ∨ 1)^{p/2}`.
    pub scale: f64,
}

pub fn condition4_voter_check(
    kernel: &Kernel,
    p: u32,
    s: f64,
    t: f64,
    replicas: u64,
    key: StreamKey,
) -> Result<Condition4Pair> {
    if !(0.0 < s && s <= t) {
        return Err(Error::Config(format!("need 0 < s ≤ t, got s={s}, t={t}")));
    }
    if p % 2 != 0 || p < 2 {
        return Err(Error::Config(format!("p must be a positive even integer, got {p}")));
    }
    let direct_vals: Vec<f64> = replica_farm(key.stream(0), replicas, |_, k| {
        let mut rng = k.rng();
        let mut arrows = Vec::new();
        let (end, _) = run_engine(kernel, &mut rng, t, usize::MAX, |ev, _| {
            arrows.push(*ev);
            true
        });
        let mut real = VoterRealization::from_arrows(kernel.clone(), 0, arrows).expect("engine log is consistent");
        if end == EngineEnd::Horizon {
            real.horizon = t;
        }
        if real.extinction.is_some_and(|e| e <= t) {
            return 0.0;
        }
        real.lagged_displacement_sum(s, t, p)
    });
    let (dm, dse) = mean_se(&direct_vals);
    let (wm, wse) = crate::walk::walk_moment_mc(kernel, s, p, replicas, key.stream(1));
    let params = serde_json::json!({"model": "voter", "kernel": kernel.record(), "p": p, "s": s, "t": t});
    let scale = s.max(1.0).powf(p as f64 / 2.0);
    Ok(Condition4Pair {
        direct: EstimatorReport::new("condition4-direct", params.clone(), dm, dse, replicas, key.seed),
        reduction: EstimatorReport::new("condition4-walk", params, wm, wse, replicas, key.seed),
        exact: crate::walk::walk_moment_exact(kernel, s, p)?,
        scale,
    })
}

/// Restart survival `P(∃z: (s,y) → (s+t,z) | y ∈ T_s)` with `y` uniform on
/// `T_s`, estimated over replicas alive at `s`. Returns `(hits, trials)`.
pub fn restart_survival(kernel: &Kernel, s: f64, t: f64, replicas: u64, key: StreamKey) -> (u64, u64) {
    let outs: Vec<Option<bool>> = replica_farm(key, replicas, |_, k| {
        let mut rng = k.rng();
        let mut arrows = Vec::new();
        let (end, _) = run_engine(kernel, &mut rng, s + t, usize::MAX, |ev, _| {
            arrows.push(*ev);
            true
        });
        let mut real = VoterRealization::from_arrows(kernel.clone(), 0, arrows).ok()?;
        if end == EngineEnd::Horizon {
            real.horizon = s + t;
        }
        let at_s = real.occupied(s);
        if at_s.is_empty() {
            return None;
        }
        let y = at_s[k.stream(7).rng().random_range(0..at_s.len())];
        Some(real.occupied(s + t).iter().any(|z| real.ancestor(s + t, z, s) == y))
    });
    let trials = outs.iter().flatten().count() as u64;
    let hits = outs.iter().flatten().filter(|&&b| b).count() as u64;
    (hits, trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancestral::check_ar_axioms;

    fn small(d: usize, seed: u64, t: f64) -> VoterRealization {
        simulate_voter(&Kernel::nearest_neighbor(d).unwrap(), StreamKey::new(seed), t, 10_000).unwrap()
    }

    #[test]
    fn first_event_is_fair() {
        let k = Kernel::nearest_neighbor(2).unwrap();
        let n = 20_000;
        let births = (0..n)
            .filter(|&i| {
                let mut rng = StreamKey::new(9).replica(i).rng();
                let mut first = None;
                run_engine(&k, &mut rng, f64::INFINITY, usize::MAX, |ev, _| {
                    first = Some(ev.kind);
                    false
                });
                first == Some(ArrowKind::Birth)
            })
            .count();
        let p = births as f64 / n as f64;
        assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn dual_membership_matches_forward_occupancy() {
        for seed in 0..30 {
            let r = small(2, seed, 6.0);
            let sites = r.logged_sites();
            for t in r.event_times().into_iter().chain([r.horizon]) {
                for x in &sites {
                    let w = r.dual_walk(t, x).unwrap();
                    assert_eq!(w.end() == Site::ORIGIN, r.is_occupied(t, x), "seed {seed} t {t} x {x:?}");
                }
            }
        }
    }

    #[test]
    fn duals_coalesce() {
        for seed in 0..20 {
            let r = small(2, seed, 5.0);
            let t = r.horizon;
            let sites = r.logged_sites();
            let walks: Vec<DualWalk> = sites.iter().map(|x| r.dual_walk(t, x).unwrap()).collect();
            let mut times: Vec<f64> = walks.iter().flat_map(|w| w.jumps.iter().map(|j| j.0)).collect();
            times.push(t);
            times.sort_by(f64::total_cmp);
            for a in 0..walks.len() {
                for b in a + 1..walks.len() {
                    let mut met = false;
                    for &u in &times {
                        let u = u + 1e-12;
                        let same = walks[a].at(u) == walks[b].at(u);
                        assert!(!met || same, "walks separated after meeting");
                        met |= same;
                    }
                }
            }
        }
    }

    #[test]
    fn realizations_satisfy_axioms() {
        for seed in 0..40 {
            let r = small(3, seed, 8.0);
            assert_eq!(check_ar_axioms(&r, 3000), vec![], "seed {seed}");
        }
    }

    #[test]
    fn path_is_reversed_dual() {
        let r = small(2, 4, 10.0);
        for t in r.event_times() {
            for x in r.occupied(t) {
                let p = r.ancestral_path(t, &x).unwrap();
                assert_eq!(p.at(0.0), Site::ORIGIN);
                assert_eq!(p.at(t), x);
                for &(s, _) in &p.breakpoints {
                    for u in [s, (s + t) / 2.0] {
                        assert_eq!(p.at(u), r.ancestor(t, &x, u));
                        assert!(r.related(u, &p.at(u), t, &x));
                    }
                }
            }
        }
    }

    #[test]
    fn log_replay_is_bit_exact() {
        let r = small(2, 12, 10.0);
        let mut buf = Vec::new();
        crate::ancestral::eventlog::write_log(&mut buf, &r.header(), &r.log_records()).unwrap();
        let (h, recs) = crate::ancestral::eventlog::read_log(buf.as_slice()).unwrap();
        let back = VoterRealization::from_log(&h, &recs).unwrap();
        assert_eq!(back.arrows, r.arrows);
        assert_eq!(back.horizon, r.horizon);
        let again = small(2, 12, 10.0);
        let mut buf2 = Vec::new();
        crate::ancestral::eventlog::write_log(&mut buf2, &again.header(), &again.log_records()).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn summary_mode_agrees_with_full_mode() {
        let k = Kernel::nearest_neighbor(2).unwrap();
        let model = VoterModel { kernel: k.clone() };
        let limits = RunLimits::until(7.0).with_probes(&[1.0, 3.0, 7.0]);
        for i in 0..30 {
            let key = StreamKey::new(21).replica(i);
            let s = model.run_replica(key, &limits);
            let full = simulate_voter(&k, key, 7.0, usize::MAX).unwrap();
            assert_eq!(s.extinction, full.extinction);
            for (j, &t) in limits.probe_times.iter().enumerate() {
                assert_eq!(s.mass_at[j], full.occupied(t).len() as f64);
            }
            let r2 = full.range_sites().iter().map(|x| x.norm2()).max().unwrap();
            assert_eq!(s.max_radius2, r2);
        }
    }

    #[test]
    fn arrow_counts_match_occupation_time() {
        // arrows into occupied sites arrive at rate one per occupied site
        let k = Kernel::nearest_neighbor(3).unwrap();
        let stats: Vec<(f64, f64)> = replica_farm(StreamKey::new(31), 20_000, |_, key| {
            let r = simulate_voter(&k, key, 5.0, usize::MAX).unwrap();
            let class_a = r.arrows.iter().filter(|a| a.kind != ArrowKind::Birth).count() as f64;
            let times = r.event_times();
            let mut occ_time = 0.0;
            for w in times.windows(2) {
                occ_time += r.occupied(w[0]).len() as f64 * (w[1] - w[0]);
            }
            occ_time += r.occupied(*times.last().unwrap()).len() as f64 * (r.horizon - times.last().unwrap());
            (class_a, occ_time)
        });
        let diff: Vec<f64> = stats.iter().map(|s| s.0 - s.1).collect();
        let (m, se) = mean_se(&diff);
        assert!(m.abs() < 4.0 * se, "{m} ± {se}");
        // step displacement is uniform over the kernel support
        let r = simulate_voter(&k, StreamKey::new(2), 200.0, 100_000).unwrap();
        let mut counts: FxHashMap<Site, usize> = FxHashMap::default();
        for a in &r.arrows {
            *counts.entry(a.source.sub(&a.target)).or_default() += 1;
        }
        assert!(counts.keys().all(|s| k.contains(s)));
    }

    #[test]
    fn pure_birth_tail_decays() {
        let k = Kernel::nearest_neighbor(2).unwrap();
        let sizes: Vec<usize> = replica_farm(StreamKey::new(77), 50_000, |_, key| {
            simulate_voter(&k, key, 2.0, usize::MAX).unwrap().range_sites().len()
        });
        let tail = |n: usize| sizes.iter().filter(|&&s| s >= n).count() as f64 / sizes.len() as f64;
        let xs: Vec<f64> = (2..12).map(|n| n as f64).collect();
        let ys: Vec<f64> = (2..12).map(|n| tail(n).max(1e-9).ln()).collect();
        let (slope, _) = crate::estimators::ols_slope(&xs, &ys);
        assert!(slope < -0.1, "{slope}");
    }
}
