//! Super-Brownian reference quantities and critical branching random walk.
//!
//! Parameter dictionary: a discrete-time BRW with unit-variance offspring
//! law (binary `{0, 2}`), rescaled by time `n`, space `√n`, mass `1/n`,
//! pairs with `(γ, σ₀²) = (1, σ²)` under the normalization `m(t) = t ∨ 1`.
//! Offspring variance `v` gives `γ = v`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use serde::Serialize;

use crate::ancestral::{GenerationSystem, TimeKind};
use crate::error::{Error, Result};
use crate::estimators::{proportion, ModelSupplier, Proportion, ReplicaSummary, RunLimits};
use crate::lattice::{Kernel, ScalingFunction, Site};
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SbmParams {
    pub gamma: f64,
    pub sigma02: f64,
}

impl SbmParams {
    pub fn new(gamma: f64, sigma02: f64) -> Result<SbmParams> {
        if !(gamma > 0.0 && sigma02 > 0.0) {
            return Err(Error::Config(format!("γ and σ₀² must be positive, got ({gamma}, {sigma02})")));
        }
        Ok(SbmParams { gamma, sigma02 })
    }

    /// Voter pairing `(2β_d, σ²)`.
    pub fn voter(kernel: &Kernel) -> Result<SbmParams> {
        SbmParams::new(2.0 * crate::walk::beta_d(kernel)?, kernel.sigma2_f64())
    }

    /// Tree and oriented-percolation pairing `(1, v)`.
    pub fn tree_or_op(v: f64) -> Result<SbmParams> {
        SbmParams::new(1.0, v)
    }

    pub fn brw(kernel: &Kernel, law: OffspringLaw) -> Result<SbmParams> {
        SbmParams::new(law.variance(), kernel.sigma2_f64())
    }
}

// ---------------------------------------------------------------------------
// boundary blow-up profile

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootingResult {
    pub d: usize,
    /// Radius of the ball the profile blows up on.
    pub radius: f64,
    /// Centre value `v_d(0)`.
    pub v0: f64,
    /// Final bisection bracket on the centre value.
    pub bracket: (f64, f64),
    /// `|r_b(v0) − radius|` for the returned centre value.
    pub blowup_residual: f64,
    pub bisection_steps: usize,
    pub ode_steps: usize,
}

const V_STAR: f64 = 1e10;

/// Blow-up radius of `v'' + (d−1)v'/r = v²`, `v(0) = a`, `v'(0) = 0`,
/// and the number of accepted integration steps.
pub fn blowup_radius(d: usize, a: f64, rtol: f64) -> (f64, usize) {
    let df = d as f64;
    // series start: v = a + a² r²/(2d) + a³ r⁴/(4d(d+2))
    let r0 = 1e-3 / a.sqrt();
    let mut r = r0;
    let mut y = [
        a + a * a * r0 * r0 / (2.0 * df) + a.powi(3) * r0.powi(4) / (4.0 * df * (df + 2.0)),
        a * a * r0 / df + a.powi(3) * r0.powi(3) / (df * (df + 2.0)),
    ];
    let f = |r: f64, y: &[f64; 2]| [y[1], y[0] * y[0] - (df - 1.0) * y[1] / r];
    let mut h = r0;
    let mut steps = 0;
    // Dormand–Prince 5(4)
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    while y[0] < V_STAR {
        // never step past the predicted blow-up point
        h = h.min(0.5 * (6.0 / y[0]).sqrt());
        let mut k = [[0.0f64; 2]; 7];
        for s in 0..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                ys[0] += h * A[s][j] * kj[0];
                ys[1] += h * A[s][j] * kj[1];
            }
            k[s] = f(r + C[s] * h, &ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..2 {
            let mut d5 = 0.0;
            let mut d4 = 0.0;
            for s in 0..7 {
                d5 += B5[s] * k[s][c];
                d4 += B4[s] * k[s][c];
            }
            y5[c] += h * d5;
            let scale = 1e-300 + rtol * y[c].abs().max(y5[c].abs());
            err = err.max((h * (d5 - d4)).abs() / scale);
        }
        if err <= 1.0 && y5[0].is_finite() && y5[0] > 0.0 {
            r += h;
            y = y5;
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    // v ≈ 6/(r_b − r)² near blow-up
    (r + (6.0 / y[0]).sqrt(), steps)
}

/// Centre value of the radial profile blowing up on the ball of `radius`.
pub fn solve_vd_radius(d: usize, radius: f64, tol: f64) -> Result<ShootingResult> {
    if d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    if !(tol > 0.0) || !(radius > 0.0) {
        return Err(Error::Config("tolerance and radius must be positive".into()));
    }
    let rtol = (tol * 1e-3).max(1e-13);
    let mut ode_steps = 0;
    let mut rb = |a: f64| {
        let (r, n) = blowup_radius(d, a, rtol);
        ode_steps += n;
        r
    };
    let guess = 10.0 / (radius * radius);
    let (mut lo, mut hi) = (guess, guess);
    // r_b decreases in a: lo must blow up beyond the radius, hi within it
    let mut expansions = 0;
    while rb(lo) <= radius {
        lo /= 4.0;
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numerical(format!("no lower bracket for d={d}, last a={lo}")));
        }
    }
    while rb(hi) > radius {
        hi *= 4.0;
        expansions += 1;
        if expansions > 120 {
            return Err(Error::Numerical(format!("no upper bracket for d={d}, last a={hi}")));
        }
    }
    let mut steps = 0;
    while (hi - lo) > tol * 0.5 * (hi + lo) {
        let mid = (lo * hi).sqrt();
        if rb(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    let v0 = 0.5 * (lo + hi);
    let residual = (rb(v0) - radius).abs();
    Ok(ShootingResult {
        d,
        radius,
        v0,
        bracket: (lo, hi),
        blowup_residual: residual,
        bisection_steps: steps,
        ode_steps,
    })
}

/// `v_d(0)` on the unit ball.
pub fn solve_vd(d: usize, tol: f64) -> Result<ShootingResult> {
    solve_vd_radius(d, 1.0, tol)
}

// ---------------------------------------------------------------------------
// canonical-measure closed forms

/// `N_o(S > s) = 2/(γ s)`.
pub fn canonical_tail(params: &SbmParams, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Config(format!("canonical tail needs s > 0, got {s}")));
    }
    Ok(2.0 / (params.gamma * s))
}

/// `N_o(r_0(R) > r) = v_d(0) σ₀² / (γ r²)`.
pub fn canonical_range_tail(params: &SbmParams, vd0: f64, r: f64) -> f64 {
    vd0 * params.sigma02 / (params.gamma * r * r)
}

/// One-arm limit `σ₀² s_D v_d(0) / 2`.
pub fn one_arm_limit(params: &SbmParams, s_d: f64, vd0: f64) -> f64 {
    params.sigma02 * s_d * vd0 / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FellerLaplace {
    /// `v_t^{(λ)}`.
    pub v: f64,
    /// `2 / (2 + γ v_t^{(λ)})`.
    pub functional: f64,
}

/// Solution of `dv/dt = −γv²/2 + λ`, `v_0 = 0`, and the conditioned
/// Laplace functional built from it.
pub fn feller_laplace(params: &SbmParams, t: f64, lambda: f64) -> FellerLaplace {
    let v = if lambda == 0.0 {
        0.0
    } else {
        (2.0 * lambda / params.gamma).sqrt() * (0.5 * t * (2.0 * params.gamma * lambda).sqrt()).tanh()
    };
    FellerLaplace { v, functional: 2.0 / (2.0 + params.gamma * v) }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallMassTail {
    /// Leading behaviour `4√a / √(2πγ)`.
    pub asymptotic: f64,
    /// Upper bound `2√(2/γ) e √a`.
    pub bound: f64,
}

pub fn small_mass_tail(params: &SbmParams, a: f64) -> Result<SmallMassTail> {
    if !(a > 0.0) {
        return Err(Error::Config(format!("small-mass tail needs a > 0, got {a}")));
    }
    let g = params.gamma;
    Ok(SmallMassTail {
        asymptotic: 4.0 * a.sqrt() / (2.0 * std::f64::consts::PI * g).sqrt(),
        bound: 2.0 * (2.0 / g).sqrt() * std::f64::consts::E * a.sqrt(),
    })
}

// ---------------------------------------------------------------------------
// branching random walk

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffspringLaw {
    /// 0 or 2 children with probability 1/2 each.
    Binary,
    /// `P(k) = 2^{-(k+1)}`.
    Geometric,
}

impl std::str::FromStr for OffspringLaw {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(OffspringLaw::Binary),
            "geometric" => Ok(OffspringLaw::Geometric),
            other => Err(Error::Config(format!("unknown offspring law `{other}`"))),
        }
    }
}

impl OffspringLaw {
    pub fn variance(self) -> f64 {
        match self {
            OffspringLaw::Binary => 1.0,
            OffspringLaw::Geometric => 2.0,
        }
    }

    /// Generating function `f(s) = E s^ξ`.
    pub fn pgf(self, s: f64) -> f64 {
        match self {
            OffspringLaw::Binary => 0.5 * (1.0 + s * s),
            OffspringLaw::Geometric => 1.0 / (2.0 - s),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> u32 {
        match self {
            OffspringLaw::Binary => {
                if rng.random::<bool>() {
                    2
                } else {
                    0
                }
            }
            OffspringLaw::Geometric => {
                let mut k = 0;
                while rng.random::<bool>() {
                    k += 1;
                }
                k
            }
        }
    }

    /// Total offspring of `k` individuals.
    pub fn sample_sum<R: Rng + ?Sized>(self, k: u64, rng: &mut R) -> u64 {
        if k == 0 {
            return 0;
        }
        match self {
            OffspringLaw::Binary => 2 * Binomial::new(k, 0.5).unwrap().sample(rng),
            OffspringLaw::Geometric => {
                // negative binomial(k, 1/2) as a gamma–Poisson mixture
                let lambda = Gamma::new(k as f64, 1.0).unwrap().sample(rng);
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).unwrap().sample(rng) as u64
                }
            }
        }
    }
}

/// Exact survival `θ(n) = P(Z_n > 0)` for `n = 0..=n_max`.
pub fn gw_survival(law: OffspringLaw, n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut q = 0.0; // P(Z_n = 0)
    out.push(1.0);
    for _ in 0..n_max {
        q = law.pgf(q);
        out.push(1.0 - q);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Particle {
    pub site: Site,
    /// Index of the parent in the previous generation.
    pub parent: u32,
}

#[derive(Clone, Debug)]
pub struct BrwRealization {
    pub d: usize,
    pub generations: Vec<Vec<Particle>>,
    pub truncated: bool,
}

/// Critical BRW from one particle at the origin, generation by generation,
/// stopping at extinction, after `n_max` generations, or when a generation
/// exceeds `cap` particles.
pub fn simulate_brw(kernel: &Kernel, law: OffspringLaw, key: StreamKey, n_max: usize, cap: usize) -> BrwRealization {
    let mut rng = key.rng();
    let mut generations = vec![vec![Particle { site: Site::ORIGIN, parent: 0 }]];
    let mut truncated = false;
    for _ in 0..n_max {
        let cur = generations.last().unwrap();
        if cur.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for (i, p) in cur.iter().enumerate() {
            for _ in 0..law.sample(&mut rng) {
                next.push(Particle { site: p.site.add(&kernel.sample(&mut rng)), parent: i as u32 });
            }
        }
        if next.len() > cap {
            truncated = true;
            break;
        }
        generations.push(next);
    }
    if !truncated && generations.last().is_some_and(|g| !g.is_empty()) && generations.len() > n_max {
        truncated = true;
    }
    BrwRealization { d: kernel.dim(), generations, truncated }
}

impl BrwRealization {
    pub fn extinction_generation(&self) -> Option<usize> {
        self.generations.iter().position(|g| g.is_empty())
    }

    /// Site-level ancestral system: `(i, y) → (j, x)` when some particle at
    /// `x` in generation `j` is reachable from a particle at `y` in
    /// generation `i` along site-level parent links.
    pub fn to_system(&self) -> GenerationSystem {
        let mut generations: Vec<Vec<Site>> = Vec::with_capacity(self.generations.len());
        let mut parents: Vec<Vec<Vec<u32>>> = Vec::new();
        for (g, parts) in self.generations.iter().enumerate() {
            let mut sites: Vec<Site> = parts.iter().map(|p| p.site).collect();
            sites.sort();
            sites.dedup();
            if g > 0 {
                let prev = &generations[g - 1];
                let prev_parts = &self.generations[g - 1];
                let mut links: Vec<Vec<u32>> = vec![Vec::new(); sites.len()];
                for p in parts {
                    let k = sites.binary_search(&p.site).unwrap();
                    let ps = prev.binary_search(&prev_parts[p.parent as usize].site).unwrap() as u32;
                    links[k].push(ps);
                }
                for l in &mut links {
                    l.sort_unstable();
                    l.dedup();
                }
                parents.push(links);
            }
            generations.push(sites);
        }
        GenerationSystem { d: self.d, generations, parents, truncated: self.truncated }
    }
}

/// Replica summary for the BRW: particle counts per generation and the
/// running range radius, without storing the family tree.
pub fn brw_summary(kernel: &Kernel, law: OffspringLaw, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
    let mut rng = key.rng();
    let mut cur = vec![Site::ORIGIN];
    let mut next = Vec::new();
    let mut summary = ReplicaSummary::start(limits);
    let horizon = limits.horizon.floor() as usize;
    let mut g = 0usize;
    loop {
        summary.record_state(g as f64, cur.len() as f64, limits);
        if cur.is_empty() {
            summary.finish(g as f64, true, limits);
            break;
        }
        if g >= horizon || summary.exited(limits) {
            summary.finish(g as f64, false, limits);
            break;
        }
        next.clear();
        for p in &cur {
            for _ in 0..law.sample(&mut rng) {
                let x = p.add(&kernel.sample(&mut rng));
                summary.visit(&x, (g + 1) as f64, limits);
                next.push(x);
            }
        }
        // discrete time: mass is constant on [g, g+1)
        summary.integrate(g as f64, (g + 1) as f64, cur.len() as f64, limits);
        if next.len() > limits.site_cap {
            summary.truncated = true;
            summary.record_state((g + 1) as f64, next.len() as f64, limits);
            summary.finish((g + 1) as f64, false, limits);
            break;
        }
        std::mem::swap(&mut cur, &mut next);
        g += 1;
    }
    summary
}

/// Branching random walk as a replica supplier.
#[derive(Clone, Debug)]
pub struct BrwModel {
    pub kernel: Kernel,
    pub law: OffspringLaw,
}

impl ModelSupplier for BrwModel {
    fn label(&self) -> String {
        format!("brw(d={}, {:?}, L={}, {:?})", self.kernel.dim(), self.kernel.variant(), self.kernel.range(), self.law)
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Discrete
    }

    fn scaling(&self) -> ScalingFunction {
        ScalingFunction::linear()
    }

    fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
        brw_summary(&self.kernel, self.law, key, limits)
    }
}

/// Galton–Watson population sizes with no spatial component.
#[derive(Clone, Copy, Debug)]
pub struct GaltonWatsonModel {
    pub law: OffspringLaw,
}

impl ModelSupplier for GaltonWatsonModel {
    fn label(&self) -> String {
        format!("galton-watson({:?})", self.law)
    }

    fn time_kind(&self) -> TimeKind {
        TimeKind::Discrete
    }

    fn scaling(&self) -> ScalingFunction {
        ScalingFunction::linear()
    }

    fn run_replica(&self, key: StreamKey, limits: &RunLimits) -> ReplicaSummary {
        let mut rng = key.rng();
        let mut s = ReplicaSummary::start(limits);
        let horizon = limits.horizon.floor() as usize;
        let mut z = 1u64;
        let mut g = 0usize;
        loop {
            s.record_state(g as f64, z as f64, limits);
            if z == 0 {
                s.finish(g as f64, true, limits);
                return s;
            }
            if g >= horizon {
                s.finish(g as f64, false, limits);
                return s;
            }
            s.integrate(g as f64, (g + 1) as f64, z as f64, limits);
            z = self.law.sample_sum(z, &mut rng);
            g += 1;
            if z as usize > limits.site_cap {
                s.truncated = true;
                s.record_state(g as f64, z as f64, limits);
                s.finish(g as f64, false, limits);
                return s;
            }
        }
    }
}

/// Spaceless GW population sizes `Z_0..Z_n` (stops early at extinction).
pub fn gw_path<R: Rng + ?Sized>(law: OffspringLaw, n: usize, rng: &mut R) -> Vec<u64> {
    let mut z = vec![1u64];
    for _ in 0..n {
        let last = *z.last().unwrap();
        if last == 0 {
            break;
        }
        z.push(law.sample_sum(last, rng));
    }
    z
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallMassEstimate {
    pub n: usize,
    pub replicas: u64,
    pub survivors: u64,
    /// `(a, P̂(Y ≤ a | Z_n > 0))` with `Y = n^{-2} Σ_{k=n}^{2n−1} Z_k`.
    #[serde(skip)]
    pub rows: Vec<(f64, Proportion)>,
}

/// Monte Carlo small-mass law of the integrated mass over `[1, 2]` for the
/// spaceless GW process at scale `n`, conditioned on survival to time 1.
pub fn small_mass_mc(law: OffspringLaw, n: usize, a_grid: &[f64], replicas: u64, key: StreamKey) -> SmallMassEstimate {
    let ys: Vec<Option<f64>> = crate::rng::replica_farm(key, replicas, |_, k| {
        let mut rng = k.rng();
        let z = gw_path(law, 2 * n - 1, &mut rng);
        if z.len() <= n || z[n] == 0 {
            return None;
        }
        let total: u64 = z[n..].iter().sum();
        Some(total as f64 / (n as f64 * n as f64))
    });
    let survivors: Vec<f64> = ys.into_iter().flatten().collect();
    let rows = a_grid
        .iter()
        .map(|&a| (a, proportion(survivors.iter().filter(|&&y| y <= a).count() as u64, survivors.len() as u64)))
        .collect();
    SmallMassEstimate { n, replicas, survivors: survivors.len() as u64, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ancestral::{check_ar_axioms, AncestralSystem};

    #[test]
    fn canonical_tail_examples() {
        let p1 = SbmParams::new(1.0, 1.0).unwrap();
        let p2 = SbmParams::new(2.0, 1.0).unwrap();
        assert_eq!(canonical_tail(&p1, 2.0).unwrap(), 1.0);
        assert_eq!(canonical_tail(&p2, 1.0).unwrap(), 1.0);
        assert_eq!(canonical_tail(&p1, 6.0).unwrap(), 0.5 * canonical_tail(&p1, 3.0).unwrap());
        assert!(canonical_tail(&p1, 0.0).is_err());
    }

    #[test]
    fn feller_limits() {
        let p = SbmParams::new(1.5, 1.0).unwrap();
        let z = feller_laplace(&p, 3.0, 0.0);
        assert_eq!((z.v, z.functional), (0.0, 1.0));
        let big = feller_laplace(&p, 1e3, 2.0);
        assert!((big.v - (2.0 * 2.0 / 1.5f64).sqrt()).abs() < 1e-12);
        let mut prev = 1.0;
        for k in 0..50 {
            let f = feller_laplace(&p, 1.0, k as f64 * 0.5).functional;
            assert!(f <= prev && f > 0.0);
            prev = f;
        }
    }

    #[test]
    fn small_mass_constants() {
        let p = SbmParams::new(1.0, 1.0).unwrap();
        let s = small_mass_tail(&p, 0.01).unwrap();
        assert!((s.asymptotic - 0.4 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!(s.asymptotic < s.bound);
    }

    #[test]
    fn blowup_scaling_in_centre_value() {
        // r_b(a) = r_b(1)/√a
        let (r1, _) = blowup_radius(3, 1.0, 1e-12);
        let (r4, _) = blowup_radius(3, 4.0, 1e-12);
        assert!((r1 / r4 - 2.0).abs() < 1e-8, "{r1} {r4}");
    }

    #[test]
    fn vd_monotone_bracket() {
        let r = solve_vd(2, 1e-8).unwrap();
        assert!(r.bracket.0 <= r.v0 && r.v0 <= r.bracket.1);
        assert!(blowup_radius(2, r.bracket.0, 1e-12).0 > 1.0);
        assert!(blowup_radius(2, r.bracket.1, 1e-12).0 <= 1.0);
        assert!((r.v0 - 12.563430).abs() < 1e-4, "{}", r.v0);
    }

    #[test]
    fn gw_recursion_binary() {
        let th = gw_survival(OffspringLaw::Binary, 2000);
        assert_eq!(th[1], 0.5);
        assert!((2000.0 * th[2000] - 2.0).abs() < 0.02);
    }

    #[test]
    fn brw_family_tree_is_ancestral() {
        let k = Kernel::nearest_neighbor(2).unwrap();
        for r in 0..50 {
            let real = simulate_brw(&k, OffspringLaw::Binary, StreamKey::new(3).replica(r), 40, 10_000);
            let sys = real.to_system();
            assert_eq!(check_ar_axioms(&sys, 2000), vec![]);
            assert_eq!(sys.survival_time().is_none(), real.truncated);
        }
    }

    #[test]
    fn sample_sum_means() {
        let mut rng = StreamKey::new(1).rng();
        for law in [OffspringLaw::Binary, OffspringLaw::Geometric] {
            let n = 20_000;
            let s: u64 = (0..n).map(|_| law.sample_sum(10, &mut rng)).sum();
            let mean = s as f64 / n as f64;
            let se = (10.0 * law.variance() / n as f64).sqrt();
            assert!((mean - 10.0).abs() < 4.0 * se, "{law:?} {mean}");
        }
    }
}
