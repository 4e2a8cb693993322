//! Model-agnostic estimators over replica farms.
//!
//! A model is anything implementing [`ModelSupplier`]: given a stream key
//! and [`RunLimits`] it runs one replica and returns a [`ReplicaSummary`].
//! One replica answers every grid point of a curve, so estimated survival
//! and one-arm curves are monotone by construction.

pub mod conditions;
pub mod stats;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ancestral::TimeKind;
use crate::lattice::{ScalingFunction, Site};
use crate::rng::{replica_farm, StreamKey};

pub use conditions::{condition_check, ConditionModel, ConditionParams, ConditionReport, ConditionRow, Verdict};
pub use stats::{ks_resampling_quantile, ks_statistic, mean_se, ols_slope, proportion, quantile, Proportion};

/// Stopping rules and probes for one replica.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunLimits {
    /// Stop once this time is reached alive.
    pub horizon: f64,
    /// Stop once some occupied site has Euclidean norm above this radius.
    pub exit_radius: Option<f64>,
    /// Times at which `|T_t|` is recorded, increasing.
    pub probe_times: Vec<f64>,
    /// Window for `∫ |T_t| dt`.
    pub mass_window: Option<(f64, f64)>,
    /// Cap on distinct occupied sites (particles per generation for BRW).
    pub site_cap: usize,
}

impl RunLimits {
    pub fn until(horizon: f64) -> RunLimits {
        RunLimits { horizon, exit_radius: None, probe_times: Vec::new(), mass_window: None, site_cap: 1_000_000 }
    }

    pub fn with_probes(mut self, probes: &[f64]) -> RunLimits {
        self.probe_times = probes.to_vec();
        self
    }

    pub fn with_exit(mut self, radius: f64) -> RunLimits {
        self.exit_radius = Some(radius);
        self
    }

    pub fn with_window(mut self, t0: f64, t1: f64) -> RunLimits {
        self.mass_window = Some((t0, t1));
        self
    }

    pub fn with_cap(mut self, cap: usize) -> RunLimits {
        self.site_cap = cap;
        self
    }
}

/// What one replica reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaSummary {
    /// Extinction time `S`, if observed.
    pub extinction: Option<f64>,
    /// Time at which simulation stopped.
    pub end_time: f64,
    /// Stopped by the site cap.
    pub truncated: bool,
    /// Largest squared norm of an occupied site up to `end_time`.
    pub max_radius2: i64,
    /// First time the exit radius was crossed.
    pub exit_time: Option<f64>,
    /// `|T_t|` at each probe time; `NaN` past an alive stop.
    pub mass_at: Vec<f64>,
    /// `∫ |T_t| dt` over the mass window, up to `end_time`.
    pub mass_integral: f64,
    #[serde(skip)]
    next_probe: usize,
    #[serde(skip)]
    current_mass: f64,
}

impl ReplicaSummary {
    pub fn start(limits: &RunLimits) -> ReplicaSummary {
        ReplicaSummary {
            extinction: None,
            end_time: 0.0,
            truncated: false,
            max_radius2: 0,
            exit_time: None,
            mass_at: vec![f64::NAN; limits.probe_times.len()],
            mass_integral: 0.0,
            next_probe: 0,
            current_mass: 1.0,
        }
    }

    /// The occupied mass becomes `mass` at time `t` (right-continuous).
    #[inline]
    pub fn record_state(&mut self, t: f64, mass: f64, limits: &RunLimits) {
        while self.next_probe < limits.probe_times.len() && limits.probe_times[self.next_probe] < t {
            self.mass_at[self.next_probe] = self.current_mass;
            self.next_probe += 1;
        }
        self.current_mass = mass;
    }

    /// A site becomes occupied at time `t`.
    #[inline]
    pub fn visit(&mut self, x: &Site, t: f64, limits: &RunLimits) {
        let r2 = x.norm2();
        if r2 > self.max_radius2 {
            self.max_radius2 = r2;
            if let Some(r) = limits.exit_radius {
                if self.exit_time.is_none() && (r2 as f64) > r * r {
                    self.exit_time = Some(t);
                }
            }
        }
    }

    /// Adds `mass · |[t0, t1] ∩ window|`.
    #[inline]
    pub fn integrate(&mut self, t0: f64, t1: f64, mass: f64, limits: &RunLimits) {
        if let Some((w0, w1)) = limits.mass_window {
            let len = t1.min(w1) - t0.max(w0);
            if len > 0.0 {
                self.mass_integral += mass * len;
            }
        }
    }

    pub fn exited(&self, limits: &RunLimits) -> bool {
        limits.exit_radius.is_some() && self.exit_time.is_some()
    }

    /// Closes the probe record at the stopping time.
    pub fn finish(&mut self, end_time: f64, extinct: bool, limits: &RunLimits) {
        self.end_time = end_time;
        if extinct {
            self.extinction = Some(end_time);
            self.current_mass = 0.0;
        }
        while self.next_probe < limits.probe_times.len() {
            let t = limits.probe_times[self.next_probe];
            if t > end_time && !extinct {
                break;
            }
            self.mass_at[self.next_probe] = if t >= end_time && extinct { 0.0 } else { self.current_mass };
            self.next_probe += 1;
        }
    }

    /// Whether the process is known to be alive at `t`; `None` if unknown.
    pub fn alive_at(&self, t: f64) -> Option<bool> {
        match self.extinction {
            Some(s) => Some(s > t),
            None if self.end_time >= t => Some(true),
            None => None,
        }
    }
}

/// A model that can run independent replicas.
pub trait ModelSupplier: Sync {
    fn label(&self) -> String;
    fn time_kind(&self) -> TimeKind;
    fn scaling(&self) -> ScalingFunction;
    fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary;
}

/// A named statistic with provenance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorReport {
    pub name: String,
    pub params: serde_json::Value,
    pub estimate: f64,
    pub stderr: f64,
    pub replicas: u64,
    pub seed: u64,
    pub config_hash: String,
    pub notes: Vec<String>,
}

impl EstimatorReport {
    pub fn new(name: &str, params: serde_json::Value, estimate: f64, stderr: f64, replicas: u64, seed: u64) -> Self {
        let config_hash = config_hash(&params);
        EstimatorReport { name: name.into(), params, estimate, stderr, replicas, seed, config_hash, notes: Vec::new() }
    }

    pub fn note(mut self, n: &str) -> Self {
        self.notes.push(n.into());
        self
    }
}

/// Hex SHA-256 of the canonical JSON form of a configuration value.
pub fn config_hash(v: &serde_json::Value) -> String {
    let bytes = serde_json::to_vec(v).expect("json value serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub lo: f64,
    pub hi: f64,
    /// Normalized estimate (`m(t)θ̂` or `m(r²)η̂`) with its interval.
    pub normalized: f64,
    pub normalized_lo: f64,
    pub normalized_hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalCurve {
    pub model: String,
    pub replicas: u64,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

/// `θ̂(t) = P̂(S > t)` on the grid, with Wilson intervals and the
/// normalized column `m(t)θ̂(t)`.
pub fn estimate_survival<M: ModelSupplier>(model: &M, t_grid: &[f64], replicas: u64, key: StreamKey) -> SurvivalCurve {
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let limits = RunLimits::until(horizon);
    let ends: Vec<Option<f64>> = replica_farm(key, replicas, |_, k| model.run_replica(k, &limits).extinction);
    let sf = model.scaling();
    let points = t_grid
        .iter()
        .map(|&t| {
            let alive = ends.iter().filter(|e| e.is_none_or(|s| s > t)).count() as u64;
            let p = proportion(alive, replicas);
            let m = sf.eval(t);
            CurvePoint {
                x: t,
                estimate: p.p,
                stderr: p.se,
                lo: p.lo,
                hi: p.hi,
                normalized: m * p.p,
                normalized_lo: m * p.lo,
                normalized_hi: m * p.hi,
            }
        })
        .collect();
    SurvivalCurve { model: model.label(), replicas, seed: key.seed, points }
}

#[derive(Clone, Debug, Serialize)]
pub struct OneArmCurve {
    pub model: String,
    pub replicas: u64,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
    /// Replicas stopped alive inside the largest ball (cap or horizon).
    pub undetermined: u64,
    /// Predicted limit of the normalized column, when supplied.
    pub prediction: Option<f64>,
}

/// `η̂_r = P̂(r_0(R) > r)` on the grid with the normalized column
/// `m(r²)η̂_r`. Each replica runs until extinction or until its range
/// leaves the largest ball.
pub fn estimate_one_arm<M: ModelSupplier>(
    model: &M,
    r_grid: &[f64],
    replicas: u64,
    key: StreamKey,
    horizon: f64,
    site_cap: usize,
    prediction: Option<f64>,
) -> OneArmCurve {
    let rmax = r_grid.iter().copied().fold(0.0, f64::max);
    let limits = RunLimits::until(horizon).with_exit(rmax).with_cap(site_cap);
    let outs: Vec<(i64, bool)> = replica_farm(key, replicas, |_, k| {
        let s = model.run_replica(k, &limits);
        let determined = s.extinction.is_some() || s.exit_time.is_some();
        (s.max_radius2, determined)
    });
    let undetermined = outs.iter().filter(|o| !o.1).count() as u64;
    let sf = model.scaling();
    let points = r_grid
        .iter()
        .map(|&r| {
            let hits = outs.iter().filter(|o| (o.0 as f64) > r * r).count() as u64;
            let p = proportion(hits, replicas);
            let m = sf.eval(r * r);
            CurvePoint {
                x: r,
                estimate: p.p,
                stderr: p.se,
                lo: p.lo,
                hi: p.hi,
                normalized: m * p.p,
                normalized_lo: m * p.lo,
                normalized_hi: m * p.hi,
            }
        })
        .collect();
    OneArmCurve { model: model.label(), replicas, seed: key.seed, points, undetermined, prediction }
}

#[derive(Clone, Debug, Serialize)]
pub struct MassPoint {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// `Ê|T_t|` on a time grid.
pub fn mean_mass<M: ModelSupplier>(model: &M, t_grid: &[f64], replicas: u64, key: StreamKey) -> Vec<MassPoint> {
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let limits = RunLimits::until(horizon).with_probes(t_grid);
    let rows: Vec<Vec<f64>> = replica_farm(key, replicas, |_, k| model.run_replica(k, &limits).mass_at);
    t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (mean, stderr) = mean_se(&col);
            MassPoint { t, mean, stderr }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MassSummary {
    pub n: f64,
    pub t0: f64,
    pub t1: f64,
    pub replicas: u64,
    /// Per-replica `∫_{t0}^{t1} X_t^{(n)}(1) dt`.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Per-replica survival past `n·s` for the conditioning threshold used.
    #[serde(skip)]
    pub survived: Vec<bool>,
    pub mean: f64,
    pub stderr: f64,
}

impl MassSummary {
    /// Moments `E[Y^p | S^{(n)} > s]` for `p = 1..=k`.
    pub fn conditioned_moments(&self, k: u32) -> Vec<f64> {
        let kept: Vec<f64> = self.values.iter().zip(&self.survived).filter(|(_, &s)| s).map(|(v, _)| *v).collect();
        (1..=k).map(|p| kept.iter().map(|v| v.powi(p as i32)).sum::<f64>() / kept.len() as f64).collect()
    }

    /// `P̂(Y ≤ a | S^{(n)} > s)`.
    pub fn conditioned_tail(&self, a: f64) -> Proportion {
        let kept: Vec<f64> = self.values.iter().zip(&self.survived).filter(|(_, &s)| s).map(|(v, _)| *v).collect();
        proportion(kept.iter().filter(|&&v| v <= a).count() as u64, kept.len() as u64)
    }
}

/// Rescaled occupation mass `∫_{t0}^{t1} |T_{nt}|/m(n) dt` per replica,
/// together with survival past time `n·s`.
pub fn integrated_mass<M: ModelSupplier>(
    model: &M,
    n: f64,
    t0: f64,
    t1: f64,
    s: f64,
    replicas: u64,
    key: StreamKey,
) -> crate::error::Result<MassSummary> {
    if !(t0 < t1) {
        return Err(crate::error::Error::Config(format!("need t0 < t1, got {t0} and {t1}")));
    }
    let limits = RunLimits::until(n * t1.max(s)).with_window(n * t0, n * t1);
    let m = model.scaling().eval(n);
    let outs: Vec<(f64, bool)> = replica_farm(key, replicas, |_, k| {
        let r = model.run_replica(k, &limits);
        // ∫ |T_{nt}| dt = (1/n) ∫ |T_u| du
        (r.mass_integral / n / m, r.alive_at(n * s).unwrap_or(true))
    });
    let values: Vec<f64> = outs.iter().map(|o| o.0).collect();
    let survived = outs.iter().map(|o| o.1).collect();
    let (mean, stderr) = mean_se(&values);
    Ok(MassSummary { n, t0, t1, replicas, values, survived, mean, stderr })
}

#[derive(Clone, Debug, Serialize)]
pub struct RangeSample {
    pub model: String,
    pub n: f64,
    pub s: f64,
    pub replicas: u64,
    pub survivors: u64,
    /// Replicas cut off alive at the range horizon.
    pub cut_off: u64,
    /// `r_0(R^{(n)})` for each surviving replica.
    #[serde(skip)]
    pub r0: Vec<f64>,
    /// Raised when fewer than 100 replicas survive.
    pub few_survivors: bool,
}

/// Conditional law of `r_0(R^{(n)})` given `S^{(n)} > s`, by rejection.
/// Each replica runs to extinction or to time `horizon_factor · n · s`.
pub fn range_statistics<M: ModelSupplier>(
    model: &M,
    n: f64,
    s: f64,
    horizon_factor: f64,
    replicas: u64,
    key: StreamKey,
) -> crate::error::Result<RangeSample> {
    if !(s > 0.0) {
        return Err(crate::error::Error::Config(format!("survival threshold must be positive, got {s}")));
    }
    let limits = RunLimits::until(horizon_factor * n * s);
    let outs: Vec<Option<(f64, bool)>> = replica_farm(key, replicas, |_, k| {
        let r = model.run_replica(k, &limits);
        if r.alive_at(n * s) == Some(true) {
            Some(((r.max_radius2 as f64).sqrt() / n.sqrt(), r.extinction.is_none()))
        } else {
            None
        }
    });
    let kept: Vec<(f64, bool)> = outs.into_iter().flatten().collect();
    let survivors = kept.len() as u64;
    Ok(RangeSample {
        model: model.label(),
        n,
        s,
        replicas,
        survivors,
        cut_off: kept.iter().filter(|k| k.1).count() as u64,
        r0: kept.iter().map(|k| k.0).collect(),
        few_survivors: survivors < 100,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KsComparison {
    pub statistic: f64,
    /// 95th percentile of the same-law resampling statistic at equal sizes.
    pub null_q95: f64,
    pub sizes: (usize, usize),
}

/// Two-sample KS with a resampling reference built from the first sample.
pub fn ks_compare(a: &[f64], b: &[f64], rounds: usize, key: StreamKey) -> KsComparison {
    let mut rng = key.rng();
    KsComparison {
        statistic: ks_statistic(a, b),
        null_q95: ks_resampling_quantile(a, a.len(), b.len(), rounds, 0.95, &mut rng),
        sizes: (a.len(), b.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Deterministic;

    impl ModelSupplier for Deterministic {
        fn label(&self) -> String {
            "deterministic".into()
        }
        fn time_kind(&self) -> TimeKind {
            TimeKind::Discrete
        }
        fn scaling(&self) -> ScalingFunction {
            ScalingFunction::linear()
        }
        // replica i dies at generation i mod 10; its range radius is that generation
        fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
            let life = (key.replica % 10) as f64;
            let mut s = ReplicaSummary::start(limits);
            let mut t = 0.0;
            while t < life && t < limits.horizon {
                s.record_state(t, 1.0, limits);
                s.integrate(t, t + 1.0, 1.0, limits);
                s.visit(&Site::new(&[(t + 1.0) as i32]), t + 1.0, limits);
                t += 1.0;
            }
            if t >= life {
                s.record_state(life, 0.0, limits);
                s.finish(life, true, limits);
            } else {
                s.finish(t, false, limits);
            }
            s
        }
    }

    #[test]
    fn survival_curve_is_monotone_and_exact() {
        let c = estimate_survival(&Deterministic, &[0.0, 2.0, 5.0, 9.0], 100, StreamKey::new(1));
        let est: Vec<f64> = c.points.iter().map(|p| p.estimate).collect();
        assert_eq!(est, vec![0.9, 0.7, 0.4, 0.0]);
    }

    #[test]
    fn extinct_before_window_has_zero_mass() {
        let m = integrated_mass(&Deterministic, 1.0, 3.0, 5.0, 1.0, 10, StreamKey::new(1)).unwrap();
        assert_eq!(m.values[..4], [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.values[4], 1.0);
        assert_eq!(m.values[7], 2.0);
    }

    #[test]
    fn probes_follow_right_continuity() {
        let limits = RunLimits::until(10.0).with_probes(&[0.0, 1.0, 1.5, 3.0, 20.0]);
        let mut s = ReplicaSummary::start(&limits);
        s.record_state(0.0, 1.0, &limits);
        s.record_state(1.0, 2.0, &limits);
        s.record_state(3.0, 0.0, &limits);
        s.finish(3.0, true, &limits);
        assert_eq!(s.mass_at, vec![1.0, 2.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn one_arm_counts_radius() {
        let c = estimate_one_arm(&Deterministic, &[1.0, 4.0], 100, StreamKey::new(1), 100.0, 10, None);
        assert_eq!(c.points[0].estimate, 0.8);
        assert_eq!(c.points[1].estimate, 0.5);
        assert_eq!(c.undetermined, 0);
    }

    #[test]
    fn hash_is_stable() {
        let h = config_hash(&serde_json::json!({"a": 1, "b": [1.5, "x"]}));
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&serde_json::json!({"a": 1, "b": [1.5, "x"]})));
        assert_ne!(h, config_hash(&serde_json::json!({"a": 2, "b": [1.5, "x"]})));
    }
}
