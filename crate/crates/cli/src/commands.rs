use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::json;

use sbmrange::brw::{self, BrwModel, OffspringLaw, SbmParams};
use sbmrange::estimators::{
    self, condition_check, estimate_one_arm, estimate_survival, ks_compare, ConditionModel, ConditionParams, ModelSupplier, OneArmCurve,
    SurvivalCurve,
};
use sbmrange::op::{self, OpConfig, OpModel};
use sbmrange::tree::{self, lace, Poly};
use sbmrange::voter::{self, VoterModel};
use sbmrange::{Error, Kernel, KernelVariant, Site, StreamKey};

use crate::output::{num, read_manifest, Run, Table};
use crate::{BrwCmd, EstimateCmd, Group, Lattice, OneArm, OpCmd, SbmCmd, TreeCmd, TreeLattice, VoterCmd};

pub enum Outcome {
    Done(PathBuf),
    /// The run completed but an exact check did not hold.
    CheckFailed(PathBuf, String),
}

fn kernel(l: &Lattice) -> Result<Kernel> {
    let v: KernelVariant = l.kernel.parse()?;
    Ok(Kernel::new(v, l.d, l.range)?)
}

fn tree_kernel(l: &TreeLattice) -> Result<Kernel> {
    kernel(&Lattice { d: l.d, kernel: l.kernel.clone(), range: l.range })
}

/// Parses `a`, `a/b`, or a finite decimal into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Config(format!("`{s}` is not a rational number"));
    if let Some((a, b)) = s.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b == BigInt::from(0) {
            return Err(bad().into());
        }
        return Ok(BigRational::new(a, b));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = format!("{int}{frac}");
        let a: BigInt = digits.parse().map_err(|_| bad())?;
        return Ok(BigRational::new(a, BigInt::from(10).pow(frac.len() as u32)));
    }
    Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?))
}

fn law(s: &str) -> Result<OffspringLaw> {
    Ok(s.parse()?)
}

fn opts<T: serde::Serialize>(t: &T) -> serde_json::Value {
    serde_json::to_value(t).expect("options serialize")
}

pub fn run(group: Group, argv: Vec<String>) -> Result<Outcome> {
    match group {
        Group::Voter(c) => voter_cmd(c, argv),
        Group::Op(c) => op_cmd(c, argv),
        Group::Brw(c) => brw_cmd(c, argv),
        Group::Sbm(c) => sbm_cmd(c, argv),
        Group::Tree(c) => tree_cmd(c, argv),
        Group::Estimate(c) => estimate_cmd(c, argv),
    }
}

fn done(run: Run) -> Result<Outcome> {
    let dir = run.dir.clone();
    run.finish()?;
    Ok(Outcome::Done(dir))
}

fn checked(run: Run, ok: bool, what: &str) -> Result<Outcome> {
    let dir = run.dir.clone();
    run.finish()?;
    Ok(if ok { Outcome::Done(dir) } else { Outcome::CheckFailed(dir, what.into()) })
}

fn survival_table(c: &SurvivalCurve, time: &str, norm: &str, exact: Option<&[f64]>) -> Table {
    let mut cols = vec![
        ("t", time),
        ("theta", "P(S > t), fraction of replicas alive at t"),
        ("stderr", "binomial standard error of theta"),
        ("lo", "Wilson 95% lower bound of theta"),
        ("hi", "Wilson 95% upper bound of theta"),
        ("normalized", norm),
        ("normalized_lo", "normalized lower bound"),
        ("normalized_hi", "normalized upper bound"),
        ("replicas", "replica count"),
    ];
    if exact.is_some() {
        cols.push(("exact", "exact Galton-Watson survival P(Z_t > 0), same units as theta"));
    }
    let mut t = Table::new(&cols);
    for (i, p) in c.points.iter().enumerate() {
        let mut row = vec![num(p.x), num(p.estimate), num(p.stderr), num(p.lo), num(p.hi), num(p.normalized), num(p.normalized_lo), num(p.normalized_hi), c.replicas.to_string()];
        if let Some(e) = exact {
            row.push(num(e[i]));
        }
        t.push(row);
    }
    t
}

fn one_arm_table(c: &OneArmCurve, norm: &str) -> Table {
    let mut t = Table::new(&[
        ("r", "radius in lattice units (Euclidean)"),
        ("eta", "P(range leaves the ball of radius r)"),
        ("stderr", "binomial standard error of eta"),
        ("lo", "Wilson 95% lower bound of eta"),
        ("hi", "Wilson 95% upper bound of eta"),
        ("normalized", norm),
        ("normalized_lo", "normalized lower bound"),
        ("normalized_hi", "normalized upper bound"),
        ("prediction", "predicted limit of the normalized column (NaN when unavailable)"),
        ("replicas", "replica count"),
        ("undetermined", "replicas stopped alive inside the largest ball"),
    ]);
    for p in &c.points {
        t.push(vec![
            num(p.x),
            num(p.estimate),
            num(p.stderr),
            num(p.lo),
            num(p.hi),
            num(p.normalized),
            num(p.normalized_lo),
            num(p.normalized_hi),
            num(c.prediction.unwrap_or(f64::NAN)),
            c.replicas.to_string(),
            c.undetermined.to_string(),
        ]);
    }
    t
}

fn one_arm<M: ModelSupplier>(model: &M, a: &OneArm, prediction: Option<f64>, norm: &str, name: &str, argv: Vec<String>) -> Result<Outcome> {
    if a.r_grid.is_empty() {
        return Err(Error::Config("empty r grid".into()).into());
    }
    let mut run = Run::new(name, argv, opts(a), Some(a.mc.seed))?;
    let key = StreamKey::new(a.mc.seed).experiment(2);
    let c = estimate_one_arm(model, &a.r_grid, a.mc.replicas, key, a.horizon, a.cap, prediction);
    run.csv("one_arm.csv", &one_arm_table(&c, norm))?;
    done(run)
}

fn voter_cmd(c: VoterCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        VoterCmd::Survive(a) => {
            let k = kernel(&a.lattice)?;
            let mut run = Run::new("voter survive", argv, opts(&a), Some(a.mc.seed))?;
            let model = VoterModel { kernel: k.clone() };
            let curve = estimate_survival(&model, &a.t_grid, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(1));
            let norm = if k.dim() == 2 { "m(t)*theta with m(t) = (t v e)/log(t v e)" } else { "m(t)*theta with m(t) = t v 1" };
            run.csv("survival.csv", &survival_table(&curve, "time in voter clock units", norm, None))?;
            done(run)
        }
        VoterCmd::OneArm(a) => {
            let k = kernel(&a.lattice)?;
            let prediction = SbmParams::voter(&k).ok().and_then(|params| {
                let beta = sbmrange::walk::beta_d(&k).ok()?;
                let v0 = brw::solve_vd(k.dim(), 1e-8).ok()?.v0;
                Some(brw::one_arm_limit(&params, 1.0 / beta, v0))
            });
            let norm = if k.dim() == 2 { "m(r^2)*eta with m(u) = (u v e)/log(u v e)" } else { "r^2*eta" };
            one_arm(&VoterModel { kernel: k }, &a, prediction, norm, "voter one-arm", argv)
        }
        VoterCmd::Cond4(a) => {
            let k = kernel(&a.lattice)?;
            if !a.t.is_empty() && a.t.len() != a.s.len() {
                return Err(Error::Config("--t must list one end time per lag in --s".into()).into());
            }
            let mut run = Run::new("voter cond4", argv, opts(&a), Some(a.mc.seed))?;
            let mut t = Table::new(&[
                ("s", "lag, voter time units"),
                ("t", "end time, voter time units"),
                ("direct", "E sum over related pairs of |x-y|^p, lattice units^p"),
                ("direct_se", "standard error of direct"),
                ("walk", "E|W_s|^p for the rate-one walk, Monte Carlo"),
                ("walk_se", "standard error of walk"),
                ("exact", "E|W_s|^p from the exact step moments"),
                ("scale", "(s v 1)^(p/2)"),
                ("ratio", "direct / scale"),
            ]);
            for (i, &s) in a.s.iter().enumerate() {
                let tt = a.t.get(i).copied().unwrap_or(2.0 * s);
                let pair = voter::condition4_voter_check(&k, a.p, s, tt, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(4).replica(i as u64))?;
                t.push(vec![
                    num(s),
                    num(tt),
                    num(pair.direct.estimate),
                    num(pair.direct.stderr),
                    num(pair.reduction.estimate),
                    num(pair.reduction.stderr),
                    num(pair.exact),
                    num(pair.scale),
                    num(pair.direct.estimate / pair.scale),
                ]);
            }
            run.csv("cond4.csv", &t)?;
            done(run)
        }
    }
}

fn op_cmd(c: OpCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        OpCmd::PcEstimate(a) => {
            let k = kernel(&a.lattice)?;
            let mut run = Run::new("op pc-estimate", argv, opts(&a), Some(a.mc.seed))?;
            let est = op::estimate_pc(&k, a.lo, a.hi, a.n_max, a.mc.replicas, a.rounds, StreamKey::new(a.mc.seed).experiment(5))?;
            let mut t = Table::new(&[
                ("p", "bond parameter tried"),
                ("slope", "OLS slope of log mean mass against generation"),
                ("slope_se", "bootstrap standard error of slope"),
                ("verdict", "up, down, or flat"),
            ]);
            for r in &est.rounds {
                t.push(vec![num(r.p), num(r.slope), num(r.slope_se), r.verdict.to_string()]);
            }
            run.csv("pc_rounds.csv", &t)?;
            run.json("pc.json", &serde_json::to_value(&est)?)?;
            done(run)
        }
        OpCmd::Survive(a) => {
            let k = kernel(&a.lattice)?;
            OpConfig::new(k.clone(), a.p, 1)?;
            let mut run = Run::new("op survive", argv, opts(&a), Some(a.mc.seed))?;
            let model = OpModel { kernel: k, p: a.p };
            let curve = estimate_survival(&model, &a.t_grid, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(1));
            run.csv("survival.csv", &survival_table(&curve, "generation", "(t v 1)*theta", None))?;
            done(run)
        }
        OpCmd::OneArm(a) => {
            let k = kernel(&a.lattice)?;
            let p = a.p.ok_or_else(|| Error::Config("op one-arm needs --p".into()))?;
            OpConfig::new(k.clone(), p, 1)?;
            one_arm(&OpModel { kernel: k, p }, &a, None, "r^2*eta", "op one-arm", argv)
        }
        OpCmd::Exact(a) => {
            let k = kernel(&a.lattice)?;
            let p = parse_rational(&a.p)?;
            let mut run = Run::new("op exact", argv, opts(&a), None)?;
            let table = op::op_exact_enumerate(&k, a.n, &p)?;
            run.json("exact.json", &table.to_json(k.dim()))?;
            let mut ok = true;
            if let Some(ell) = a.ell {
                let rows = op::condition7_exact(&k, &p, ell, a.m, &a.caps)?;
                ok = rows.iter().all(|r| r.holds());
                run.json("condition7.json", &json!({"holds": ok, "rows": rows.iter().map(|r| r.to_json(k.dim())).collect::<Vec<_>>()}))?;
            }
            checked(run, ok, "light-cluster factorization")
        }
        OpCmd::Spread(a) => {
            let k = kernel(&a.lattice)?;
            if a.moment == 0 || a.moment % 2 != 0 {
                return Err(Error::Config(format!("--moment must be a positive even integer, got {}", a.moment)).into());
            }
            let cfg = OpConfig::new(k, a.p, 1)?;
            let mut run = Run::new("op spread", argv, opts(&a), Some(a.mc.seed))?;
            let mut t = Table::new(&[
                ("n", "generation"),
                ("moment", "sum over x of |x|^q P(x in T_n) / n^(q/2), q = --moment"),
                ("stderr", "standard error of moment"),
                ("status", "evidence only; no bound is asserted"),
            ]);
            for (n, m, se) in op::spread_moment(&cfg, a.moment, &a.n_grid, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(13)) {
                t.push(vec![n.to_string(), num(m), num(se), "conjecture-check".into()]);
            }
            run.csv("spread.csv", &t)?;
            done(run)
        }
    }
}

fn brw_cmd(c: BrwCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        BrwCmd::Survive(a) => {
            let k = kernel(&a.lattice)?;
            let l = law(&a.law)?;
            let mut run = Run::new("brw survive", argv, opts(&a), Some(a.mc.seed))?;
            let model = BrwModel { kernel: k, law: l };
            let curve = estimate_survival(&model, &a.t_grid, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(1));
            let tmax = a.t_grid.iter().copied().fold(0.0, f64::max) as usize;
            let gw = brw::gw_survival(l, tmax);
            let exact: Vec<f64> = a.t_grid.iter().map(|&t| gw[(t.floor() as usize).min(tmax)]).collect();
            run.csv("survival.csv", &survival_table(&curve, "generation", "(t v 1)*theta", Some(&exact)))?;
            done(run)
        }
        BrwCmd::OneArm(a) => {
            let k = kernel(&a.lattice)?;
            let l = law(&a.law)?;
            let params = SbmParams::brw(&k, l)?;
            let v0 = brw::solve_vd(k.dim(), 1e-8)?.v0;
            let prediction = brw::one_arm_limit(&params, 2.0 / params.gamma, v0);
            one_arm(&BrwModel { kernel: k, law: l }, &a, Some(prediction), "r^2*eta", "brw one-arm", argv)
        }
        BrwCmd::MassTail(a) => {
            let l = law(&a.law)?;
            let mut run = Run::new("brw mass-tail", argv, opts(&a), Some(a.mc.seed))?;
            let est = brw::small_mass_mc(l, a.n, &a.a_grid, a.mc.replicas, StreamKey::new(a.mc.seed).experiment(9));
            let params = SbmParams::new(l.variance(), 1.0)?;
            let mut t = Table::new(&[
                ("a", "mass threshold, rescaled units"),
                ("p", "P(integrated mass over [1,2] <= a | alive at 1)"),
                ("stderr", "binomial standard error of p"),
                ("lo", "Wilson 95% lower bound"),
                ("hi", "Wilson 95% upper bound"),
                ("ratio", "p / sqrt(a)"),
                ("asymptotic", "small-a leading constant, per sqrt(a)"),
                ("bound", "upper bound constant, per sqrt(a)"),
                ("survivors", "replicas alive at 1"),
            ]);
            for (av, pr) in &est.rows {
                let st = brw::small_mass_tail(&params, *av)?;
                let r = av.sqrt();
                t.push(vec![num(*av), num(pr.p), num(pr.se), num(pr.lo), num(pr.hi), num(pr.p / r), num(st.asymptotic / r), num(st.bound / r), est.survivors.to_string()]);
            }
            run.csv("mass_tail.csv", &t)?;
            done(run)
        }
    }
}

fn sbm_cmd(c: SbmCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        SbmCmd::Vd(a) => {
            let mut run = Run::new("sbm vd", argv, opts(&a), None)?;
            let r = brw::solve_vd_radius(a.d, a.radius, a.tol)?;
            let unit = if a.radius == 1.0 { r.v0 } else { brw::solve_vd(a.d, a.tol)?.v0 };
            run.json(
                "vd.json",
                &json!({
                    "d": a.d,
                    "radius": a.radius,
                    "v0": r.v0,
                    "bracket": [r.bracket.0, r.bracket.1],
                    "blowup_residual": r.blowup_residual,
                    "bisection_steps": r.bisection_steps,
                    "ode_steps": r.ode_steps,
                    "scaling_residual": (r.v0 - unit / (a.radius * a.radius)).abs() / r.v0,
                }),
            )?;
            done(run)
        }
        SbmCmd::Feller(a) => {
            let params = SbmParams::new(a.gamma, 1.0)?;
            let mut run = Run::new("sbm feller", argv, opts(&a), None)?;
            let f = brw::feller_laplace(&params, a.t, a.lambda);
            let h = 1e-4 * a.t.max(1.0);
            let dv = (brw::feller_laplace(&params, a.t + h, a.lambda).v - brw::feller_laplace(&params, (a.t - h).max(0.0), a.lambda).v)
                / (a.t + h - (a.t - h).max(0.0));
            let residual = (dv - (a.lambda - a.gamma * f.v * f.v / 2.0)).abs();
            run.json("feller.json", &json!({"gamma": a.gamma, "t": a.t, "lambda": a.lambda, "v": f.v, "functional": f.functional, "riccati_residual": residual}))?;
            done(run)
        }
    }
}

fn poly_json(p: &Poly) -> serde_json::Value {
    json!(p.0.iter().map(|c| c.to_string()).collect::<Vec<_>>())
}

fn tree_cmd(c: TreeCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        TreeCmd::Enumerate(a) => {
            let k = tree_kernel(&a.lattice)?;
            let mut run = Run::new("tree enumerate", argv, opts(&a), None)?;
            let trees = tree::enumerate_trees(&k, a.depth, Site::ORIGIN)?;
            let acyclic = trees.iter().all(|t| t.edges.len() + 1 == t.vertices.len());
            let mut t = Table::new(&[("edges", "number of edges"), ("trees", "trees containing the origin with that many edges")]);
            let mut counts = BTreeMap::new();
            for tr in &trees {
                *counts.entry(tr.size()).or_insert(0u64) += 1;
            }
            for (e, n) in &counts {
                t.push(vec![e.to_string(), n.to_string()]);
            }
            run.csv("counts.csv", &t)?;
            run.json("enumerate.json", &json!({"d": k.dim(), "L": k.range(), "depth": a.depth, "total": trees.len(), "acyclic": acyclic}))?;
            checked(run, acyclic, "acyclicity audit")
        }
        TreeCmd::TwoPoint(a) => {
            let k = tree_kernel(&a.tree.lattice)?;
            let z = parse_rational(&a.tree.z)?;
            let x = if a.x.is_empty() {
                let mut c = vec![0; k.dim()];
                c[0] = a.n as i32;
                Site::new(&c)
            } else {
                if a.x.len() != k.dim() {
                    return Err(Error::Config(format!("--x needs {} coordinates", k.dim())).into());
                }
                Site::new(&a.x)
            };
            let mut run = Run::new("tree two-point", argv, opts(&a), None)?;
            let v = tree::two_point(&k, &z, a.n, &x, a.tree.depth)?;
            run.json(
                "two_point.json",
                &json!({
                    "n": a.n, "x": x.coords(k.dim()), "z": lace::rat_str(&z), "depth": a.tree.depth,
                    "direct_coefficients": poly_json(&v.direct), "backbone_coefficients": poly_json(&v.backbone),
                    "value": lace::rat_str(&v.value), "rho": lace::rat_str(&v.rho),
                    "tail_bound": v.tail_bound, "agree": v.agree,
                    "note": "strictly subcritical activity; sums truncated at the stated edge count",
                }),
            )?;
            checked(run, v.agree, "direct and backbone sums differ")
        }
        TreeCmd::LaceCheck(a) => {
            let mut run = Run::new("tree lace-check", argv, opts(&a), Some(a.seed))?;
            let checks: Vec<lace::LaceCheck> = if let Some(u) = &a.u {
                vec![lace::lace_identity_check(&lace::UAssignment::constant(a.n, parse_rational(u)?))?]
            } else {
                let mut rng = StreamKey::new(a.seed).experiment(11).rng();
                (0..a.trials).map(|_| lace::lace_identity_check(&lace::UAssignment::random(a.n, a.qmax, &mut rng))).collect::<sbmrange::Result<_>>()?
            };
            let pass = checks.iter().all(|c| c.holds);
            let failures: Vec<_> = checks.iter().filter(|c| !c.holds).map(|c| c.to_json()).collect();
            run.json("lace_check.json", &json!({"n": a.n, "assignments": checks.len(), "pass": pass, "failures": failures, "first": checks.first().map(|c| c.to_json())}))?;
            checked(run, pass, "lace identity")
        }
        TreeCmd::PiN(a) => {
            let k = tree_kernel(&a.tree.lattice)?;
            let z = parse_rational(&a.tree.z)?;
            let w = tree::edge_weight(&k, &z);
            let mut run = Run::new("tree pi-n", argv, opts(&a), None)?;
            let rep = tree::pi_n_exact(&k, a.n, a.tree.depth)?;
            let rows: Vec<_> = rep
                .pi
                .iter()
                .map(|(x, p)| json!({"x": x.coords(k.dim()), "coefficients": poly_json(p), "value": lace::rat_str(&p.eval(&w))}))
                .collect();
            let ok = rep.recomposition_holds() && rep.symmetric();
            run.json(
                "pi_n.json",
                &json!({"n": a.n, "z": lace::rat_str(&z), "depth": a.tree.depth, "recomposition": rep.recomposition_holds(), "symmetric": rep.symmetric(), "rho": lace::rat_str(&rep.rho.eval(&w)), "pi": rows}),
            )?;
            checked(run, ok, "recomposition or symmetry")
        }
        TreeCmd::LemmaCheck(a) => {
            let k = tree_kernel(&a.lattice)?;
            let z = parse_rational(&a.z)?;
            let mut run = Run::new("tree lemma-check", argv, opts(&a), None)?;
            let rep = tree::lemma_checks(&k, &z, a.depth)?;
            run.json("lemma_check.json", &rep.to_json())?;
            checked(run, rep.holds(), "lemma margins")
        }
    }
}

fn condition_model(name: &str, l: &Lattice, bond: f64, law_s: &str, n_max: usize) -> Result<ConditionModel> {
    let k = kernel(l)?;
    Ok(match name {
        "voter" => ConditionModel::Voter(k),
        "op" => ConditionModel::Op(OpConfig::new(k, bond, n_max)?),
        "brw" => ConditionModel::Brw(k, law(law_s)?),
        "tree" => ConditionModel::Tree(k),
        other => return Err(Error::Config(format!("unknown model `{other}`")).into()),
    })
}

fn estimate_cmd(c: EstimateCmd, argv: Vec<String>) -> Result<Outcome> {
    match c {
        EstimateCmd::Condition(a) => {
            let n_max = a.grid.iter().copied().fold(0.0, f64::max) as usize * 2 + a.start as usize + 1;
            let model = condition_model(&a.model, &a.lattice, a.bond, &a.law, n_max)?;
            let params = ConditionParams { grid: a.grid.clone(), p: a.p, start: a.start, caps: a.caps.clone(), replicas: a.mc.replicas, seed: a.mc.seed };
            let rep = condition_check(a.which, &model, &params)?;
            let mut run = Run::new("estimate condition", argv, opts(&a), Some(a.mc.seed))?;
            let mut t = Table::new(&[
                ("x", "grid value (time, lag, or window length)"),
                ("aux", "secondary grid value (mass cap M) or NaN"),
                ("lhs", "estimated left-hand side"),
                ("lhs_se", "standard error of lhs"),
                ("shape", "bounding shape at x"),
                ("ratio", "lhs / shape"),
                ("ratio_se", "standard error of ratio"),
            ]);
            for r in &rep.rows {
                t.push(vec![num(r.x), num(r.aux.unwrap_or(f64::NAN)), num(r.lhs), num(r.lhs_se), num(r.shape), num(r.ratio), num(r.ratio_se)]);
            }
            run.csv("condition.csv", &t)?;
            run.json("condition.json", &serde_json::to_value(&rep)?)?;
            done(run)
        }
        EstimateCmd::Range(a) => {
            let k = kernel(&a.lattice)?;
            let mut run = Run::new("estimate range", argv, opts(&a), Some(a.mc.seed))?;
            let base = StreamKey::new(a.mc.seed).experiment(12);
            let mut samples = Vec::new();
            for (i, &n) in a.n.iter().enumerate() {
                let key = base.replica(i as u64);
                let s = match a.model.as_str() {
                    "voter" => estimators::range_statistics(&VoterModel { kernel: k.clone() }, n, a.s, a.horizon_factor, a.mc.replicas, key)?,
                    "op" => {
                        OpConfig::new(k.clone(), a.bond, 1)?;
                        estimators::range_statistics(&OpModel { kernel: k.clone(), p: a.bond }, n, a.s, a.horizon_factor, a.mc.replicas, key)?
                    }
                    "brw" => estimators::range_statistics(&BrwModel { kernel: k.clone(), law: law(&a.law)? }, n, a.s, a.horizon_factor, a.mc.replicas, key)?,
                    other => return Err(Error::Guard(format!("range statistics support voter, op, brw; got `{other}`")).into()),
                };
                samples.push(s);
            }
            let mut t = Table::new(&[
                ("r", "rescaled range radius r_0 = max |x| / sqrt(n)"),
                ("ecdf", "empirical CDF of r_0 given survival past n*s"),
                ("n", "scale"),
            ]);
            for s in &samples {
                let mut v = s.r0.clone();
                v.sort_by(f64::total_cmp);
                let m = v.len() as f64;
                for (j, r) in v.iter().enumerate() {
                    t.push(vec![num(*r), num((j + 1) as f64 / m), num(s.n)]);
                }
            }
            run.csv("r0.csv", &t)?;
            let mut ks = Table::new(&[
                ("n_a", "smaller scale"),
                ("n_b", "larger scale"),
                ("ks", "two-sample Kolmogorov-Smirnov distance"),
                ("null_q95", "95th percentile of same-law resampling distance"),
                ("survivors_a", "conditioned sample size at n_a"),
                ("survivors_b", "conditioned sample size at n_b"),
            ]);
            for (i, w) in samples.windows(2).enumerate() {
                let c = ks_compare(&w[0].r0, &w[1].r0, 200, base.stream(100 + i as u64));
                ks.push(vec![num(w[0].n), num(w[1].n), num(c.statistic), num(c.null_q95), w[0].survivors.to_string(), w[1].survivors.to_string()]);
            }
            run.csv("ks.csv", &ks)?;
            run.json("range.json", &serde_json::to_value(&samples)?)?;
            done(run)
        }
        EstimateCmd::Mass(a) => {
            let k = kernel(&a.lattice)?;
            let mut run = Run::new("estimate mass", argv, opts(&a), Some(a.mc.seed))?;
            let base = StreamKey::new(a.mc.seed).experiment(14);
            let mut moments = Table::new(&[
                ("n", "scale"),
                ("k", "moment order"),
                ("moment", "E[Y^k | survival past n*s], Y = integral over [t0,t1] of |T_nt|/m(n) dt"),
                ("survivors", "conditioned sample size"),
            ]);
            let mut tail = Table::new(&[
                ("n", "scale"),
                ("a", "mass threshold"),
                ("p", "P(Y <= a | survival past n*s)"),
                ("stderr", "binomial standard error of p"),
                ("lo", "Wilson 95% lower bound"),
                ("hi", "Wilson 95% upper bound"),
                ("ratio", "p / sqrt(a)"),
            ]);
            for (i, &n) in a.n.iter().enumerate() {
                let key = base.replica(i as u64);
                let m = match a.model.as_str() {
                    "voter" => estimators::integrated_mass(&VoterModel { kernel: k.clone() }, n, a.t0, a.t1, a.s, a.mc.replicas, key)?,
                    "op" => {
                        OpConfig::new(k.clone(), a.bond, 1)?;
                        estimators::integrated_mass(&OpModel { kernel: k.clone(), p: a.bond }, n, a.t0, a.t1, a.s, a.mc.replicas, key)?
                    }
                    "brw" => estimators::integrated_mass(&BrwModel { kernel: k.clone(), law: law(&a.law)? }, n, a.t0, a.t1, a.s, a.mc.replicas, key)?,
                    other => return Err(Error::Guard(format!("integrated mass supports voter, op, brw; got `{other}`")).into()),
                };
                let survivors = m.survived.iter().filter(|&&s| s).count();
                for (j, v) in m.conditioned_moments(a.moments).into_iter().enumerate() {
                    moments.push(vec![num(n), (j + 1).to_string(), num(v), survivors.to_string()]);
                }
                for &av in &a.a_grid {
                    let pr = m.conditioned_tail(av);
                    tail.push(vec![num(n), num(av), num(pr.p), num(pr.se), num(pr.lo), num(pr.hi), num(pr.p / av.sqrt())]);
                }
            }
            run.csv("moments.csv", &moments)?;
            run.csv("tail.csv", &tail)?;
            run.json("mass.json", &json!({"check": "partial: moment boundedness across n only; weak convergence is not tested"}))?;
            done(run)
        }
        EstimateCmd::Plotdata(a) => {
            let mut run = Run::new("estimate plotdata", argv, opts(&a), None)?;
            let t = plotdata(&a.inputs, a.y.as_deref(), a.split.as_deref())?;
            run.csv("plotdata.csv", &t)?;
            done(run)
        }
        EstimateCmd::Rerun(a) => {
            let m = read_manifest(Path::new(&a.manifest))?;
            let mut full = vec!["sbmrange".to_string()];
            full.extend(m.argv.iter().cloned());
            let cli = <crate::Cli as clap::Parser>::try_parse_from(&full).map_err(|e| anyhow!("manifest arguments do not parse: {e}"))?;
            if matches!(cli.group, Group::Estimate(EstimateCmd::Rerun(_))) {
                bail!("a rerun manifest cannot point at another rerun");
            }
            run(cli.group, m.argv)
        }
    }
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(path: &str) -> Result<Csv> {
    let text = std::fs::read_to_string(path).with_context(|| format!("missing artifact {path}"))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines.next().ok_or_else(|| anyhow!("{path} has no header"))?.split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    Ok(Csv { header, rows })
}

/// Long-format table `(series, x, y, ylo, yhi)`. An input may name its y
/// column as `path:column`.
pub fn plotdata(inputs: &[String], y: Option<&str>, split: Option<&str>) -> Result<Table> {
    let mut t = Table::new(&[
        ("series", "curve label: file stem, y column, and split value"),
        ("x", "first column of the source table"),
        ("y", "plotted column"),
        ("ylo", "lower band or NaN"),
        ("yhi", "upper band or NaN"),
    ]);
    for input in inputs {
        let (path, ycol) = match input.rsplit_once(':') {
            Some((p, c)) if !c.contains('/') && !c.is_empty() => (p, Some(c)),
            _ => (input.as_str(), y),
        };
        let csv = read_csv(path)?;
        let col = |name: &str| csv.header.iter().position(|h| h == name);
        let yi = match ycol {
            Some(c) => col(c).ok_or_else(|| anyhow!("{path} has no column `{c}`"))?,
            None => 1.min(csv.header.len() - 1),
        };
        let yname = csv.header[yi].clone();
        let (lo, hi) = match (col(&format!("{yname}_lo")), col(&format!("{yname}_hi"))) {
            (Some(a), Some(b)) => (Some(a), Some(b)),
            _ if yi == 1 => (col("lo"), col("hi")),
            _ => (None, None),
        };
        let si = match split {
            Some(s) => Some(col(s).ok_or_else(|| anyhow!("{path} has no column `{s}`"))?),
            None => None,
        };
        let stem = Path::new(path).file_stem().and_then(|s| s.to_str()).unwrap_or(path);
        for r in &csv.rows {
            let series = match si {
                Some(i) => format!("{stem}:{yname}:{}={}", csv.header[i], r[i]),
                None => format!("{stem}:{yname}"),
            };
            let get = |i: Option<usize>| i.map_or("NaN".to_string(), |i| r[i].clone());
            t.push(vec![series, r[0].clone(), r[yi].clone(), get(lo), get(hi)]);
        }
    }
    Ok(t)
}
