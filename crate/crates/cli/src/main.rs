//! Command-line runner for the lattice-model laboratory.
//!
//! Exit codes: 0 success, 1 internal error or failed check, 2 refused by a
//! guard, 64 usage error.

mod commands;
mod config;
mod output;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "sbmrange", version, about = "Critical lattice models, exact identities, and super-Brownian reference values")]
pub struct Cli {
    /// TOML file with default flag values (flags on the command line win).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<String>,
    #[command(subcommand)]
    pub group: Group,
}

#[derive(Subcommand, Debug)]
pub enum Group {
    /// Voter model from a single occupied site.
    #[command(subcommand)]
    Voter(VoterCmd),
    /// Oriented percolation.
    #[command(subcommand)]
    Op(OpCmd),
    /// Branching random walk.
    #[command(subcommand)]
    Brw(BrwCmd),
    /// Super-Brownian reference quantities.
    #[command(subcommand)]
    Sbm(SbmCmd),
    /// Exact lattice-tree laboratory.
    #[command(subcommand)]
    Tree(TreeCmd),
    /// Condition checks, range statistics, plot tables, and reruns.
    #[command(subcommand)]
    Estimate(EstimateCmd),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Lattice {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    /// `nn` (nearest neighbour) or `so` (uniform on the box of radius L).
    #[arg(long, default_value = "nn")]
    pub kernel: String,
    #[arg(long = "L", default_value_t = 1)]
    pub range: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Mc {
    #[arg(long, default_value_t = 10_000)]
    pub replicas: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum VoterCmd {
    /// Survival curve θ(t) with the normalized column m(t)θ(t).
    Survive(VoterSurvive),
    /// One-arm curve η_r with the predicted limit.
    OneArm(OneArm),
    /// Lagged displacement moment, direct and by walk reduction.
    Cond4(VoterCond4),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VoterSurvive {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, value_delimiter = ',', default_value = "25,50,100")]
    pub t_grid: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OneArm {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, value_delimiter = ',', default_value = "5,10")]
    pub r_grid: Vec<f64>,
    /// Time (generation) horizon per replica.
    #[arg(long, default_value_t = 1e6)]
    pub horizon: f64,
    /// Cap on occupied sites (particles for the BRW) per replica.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
    /// Bond parameter for oriented percolation.
    #[arg(long)]
    pub p: Option<f64>,
    /// Offspring law for the BRW.
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct VoterCond4 {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = 6)]
    pub p: u32,
    #[arg(long, value_delimiter = ',', default_value = "4,16")]
    pub s: Vec<f64>,
    /// End times, one per lag; defaults to 2s.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Subcommand, Debug)]
pub enum OpCmd {
    /// Bisection estimate of the critical bond parameter.
    PcEstimate(OpPc),
    /// Survival curve by generation.
    Survive(OpSurvive),
    /// One-arm curve.
    OneArm(OneArm),
    /// Exact trajectory law by bond enumeration and the light-cluster identity.
    Exact(OpExact),
    /// Normalized spatial moment of the cluster by generation (conjecture evidence, no verdict).
    Spread(OpSpread),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpPc {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = 1.0)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.6)]
    pub hi: f64,
    #[arg(long, default_value_t = 40)]
    pub n_max: usize,
    #[arg(long, default_value_t = 8)]
    pub rounds: usize,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpSurvive {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    pub t_grid: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpSpread {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long)]
    pub p: f64,
    /// Even moment order.
    #[arg(long, default_value_t = 6)]
    pub moment: u32,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub n_grid: Vec<usize>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OpExact {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    /// Exact bond parameter, e.g. `1` or `13/10`.
    #[arg(long, default_value = "1")]
    pub p: String,
    /// Start generation for the light-cluster identity.
    #[arg(long)]
    pub ell: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,2,5,10")]
    pub caps: Vec<u64>,
}

#[derive(Subcommand, Debug)]
pub enum BrwCmd {
    /// Survival curve with the exact Galton–Watson column.
    Survive(BrwSurvive),
    /// One-arm curve.
    OneArm(OneArm),
    /// Small-mass law of the integrated mass over [1, 2].
    MassTail(BrwMassTail),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BrwSurvive {
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
    pub t_grid: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BrwMassTail {
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.04,0.02,0.01")]
    pub a_grid: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Subcommand, Debug)]
pub enum SbmCmd {
    /// Centre value v_d(0) of the boundary blow-up profile.
    Vd(SbmVd),
    /// Feller Laplace functional and its Riccati residual.
    Feller(SbmFeller),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SbmVd {
    #[arg(long, default_value_t = 3)]
    pub d: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SbmFeller {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Subcommand, Debug)]
pub enum TreeCmd {
    /// Count trees containing the origin by edge number.
    Enumerate(TreeArgs),
    /// ρ t_n(x) by direct sum and by backbone and ribs.
    TwoPoint(TreeTwoPoint),
    /// Product versus block decomposition of K on [0, n].
    LaceCheck(TreeLace),
    /// π_n(x) and the recomposition of ρ t_n(x).
    PiN(TreePi),
    /// Rib-splitting and generation-shift inequalities.
    LemmaCheck(TreeArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreeLattice {
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value = "nn")]
    pub kernel: String,
    #[arg(long = "L", default_value_t = 1)]
    pub range: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreeArgs {
    #[command(flatten)]
    pub lattice: TreeLattice,
    /// Activity z as an exact rational.
    #[arg(long, default_value = "1/4")]
    pub z: String,
    /// Edge-count truncation.
    #[arg(long, default_value_t = 4)]
    pub depth: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreeTwoPoint {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    /// Target site, comma separated; defaults to n·e₁.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<i32>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreeLace {
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Number of random rational assignments.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Largest denominator of random entries.
    #[arg(long, default_value_t = 12)]
    pub qmax: i64,
    /// Check one constant assignment instead of random ones.
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TreePi {
    #[command(flatten)]
    pub tree: TreeArgs,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
}

#[derive(Subcommand, Debug)]
pub enum EstimateCmd {
    /// Empirical check of one structural condition.
    Condition(EstimateCondition),
    /// Conditional range-radius laws across scales and KS distances.
    Range(EstimateRange),
    /// Rescaled integrated mass over a time window, conditioned on survival.
    Mass(EstimateMass),
    /// Long-format plot table from curve CSVs.
    Plotdata(EstimatePlot),
    /// Replay the command recorded in a manifest.
    Rerun(EstimateRerun),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateCondition {
    /// Condition number: 2, 3, 4, 5, or 7.
    #[arg(long)]
    pub which: u8,
    /// voter, op, brw, or tree.
    #[arg(long)]
    pub model: String,
    #[command(flatten)]
    pub lattice: Lattice,
    /// Bond parameter for oriented percolation.
    #[arg(long, default_value_t = 1.0)]
    pub bond: f64,
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16")]
    pub grid: Vec<f64>,
    /// Moment exponent.
    #[arg(long, default_value_t = 6)]
    pub p: u32,
    /// Restart time or start generation.
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    #[arg(long, value_delimiter = ',', default_value = "10,100,1000")]
    pub caps: Vec<u64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateRange {
    /// voter, op, or brw.
    #[arg(long, default_value = "voter")]
    pub model: String,
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = 1.0)]
    pub bond: f64,
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    pub n: Vec<f64>,
    /// Survival threshold in rescaled time.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Replicas run to time factor·n·s at most.
    #[arg(long, default_value_t = 20.0)]
    pub horizon_factor: f64,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateMass {
    /// voter, op, or brw.
    #[arg(long, default_value = "voter")]
    pub model: String,
    #[command(flatten)]
    pub lattice: Lattice,
    #[arg(long, default_value_t = 1.0)]
    pub bond: f64,
    #[arg(long, default_value = "binary")]
    pub law: String,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    pub n: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub t0: f64,
    #[arg(long, default_value_t = 2.0)]
    pub t1: f64,
    /// Survival threshold in rescaled time.
    #[arg(long, default_value_t = 1.0)]
    pub s: f64,
    /// Highest conditioned moment reported.
    #[arg(long, default_value_t = 3)]
    pub moments: u32,
    #[arg(long, value_delimiter = ',', default_value = ".04,.02,.01")]
    pub a_grid: Vec<f64>,
    #[command(flatten)]
    pub mc: Mc,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimatePlot {
    /// Curve CSV files.
    #[arg(long, value_delimiter = ',', required = true)]
    pub inputs: Vec<String>,
    /// Column used for y; defaults to the second column.
    #[arg(long)]
    pub y: Option<String>,
    /// Column whose values split a file into series.
    #[arg(long)]
    pub split: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct EstimateRerun {
    #[arg(long)]
    pub manifest: String,
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().collect();
    let (args, warnings) = match config::merge(raw) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(64);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let replay = strip_config(&args);
    match commands::run(cli.group, replay) {
        Ok(commands::Outcome::Done(path)) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Ok(commands::Outcome::CheckFailed(path, what)) => {
            println!("{}", path.display());
            eprintln!("check failed: {what}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<sbmrange::Error>() {
                Some(sbmrange::Error::Guard(_)) => ExitCode::from(2),
                Some(sbmrange::Error::Config(_)) => ExitCode::from(64),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Arguments after the program name, without `--config`.
fn strip_config(args: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in args.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if a == "--config" {
            skip = true;
            continue;
        }
        if a.starts_with("--config=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}
