//! Command-line surface: `find-parameter`, `renorm`, `thurston`, `figure1`,
//! `conjugacy`. Every run is deterministic given (config, seed) and writes a
//! manifest beside its outputs.

mod config;
mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fibrenorm::complexext::{
    julia_inverse_points, puzzle_hierarchy, rescale_piece, ComplexExtension, ExtensionMode,
};
use fibrenorm::conjugacy::{conjugacy_report, match_critical_sets, smoothness_diagnostic};
use fibrenorm::thurston::{iterate_to_fixed_point, MarkedTriple};
use fibrenorm::unimodal::locate_fibonacci_parameter;
use fibrenorm::{Family, Hierarchy, PrecisionContext};
use rug::Float;

use config::{write_manifest, RunConfig};
use output::{figure1_svg, opt_f64, points_csv, write_atomic};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Dynamics(fibrenorm::Error),
    Io(std::io::Error),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Dynamics(_) => 1,
            CliError::Io(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {}", m),
            CliError::Dynamics(e) => write!(f, "dynamics error: {}", e),
            CliError::Io(e) => write!(f, "io error: {}", e),
        }
    }
}

impl From<fibrenorm::Error> for CliError {
    fn from(e: fibrenorm::Error) -> Self {
        CliError::Dynamics(e)
    }
}

#[derive(Parser)]
#[command(
    name = "fibrenorm",
    about = "Numerical laboratory for Fibonacci unimodal maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Structured config file (TOML); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Map family: quadratic | cubic.
    #[arg(long)]
    family: Option<String>,
    /// Perturbation strength of the cubic family.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Combinatorial depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Working precision in bits (>= 53).
    #[arg(long)]
    precision: Option<u32>,
    /// Start level m for puzzle pieces.
    #[arg(long, value_name = "M")]
    start_level: Option<usize>,
    /// Sampling budget (points per boundary / point cloud).
    #[arg(long)]
    budget: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonOpts {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        if let Some(v) = &self.family {
            cfg.family = v.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = self.precision {
            cfg.precision = v;
        }
        if let Some(v) = self.start_level {
            cfg.start_level = v;
        }
        if let Some(v) = self.budget {
            cfg.budget = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Locate the Fibonacci parameter of a family by closest-return
    /// combinatorics; prints the parameter and writes the bisection
    /// certificate.
    FindParameter(CommonOpts),
    /// Build the renormalization hierarchy and emit the scaling table.
    Renorm(CommonOpts),
    /// Iterate the Thurston pull-back on marked triples.
    Thurston {
        #[command(flatten)]
        common: CommonOpts,
        /// Starting coordinate gamma_0 < 0.
        #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
        gamma0: f64,
        /// Convergence tolerance on successive iterates.
        #[arg(long, default_value_t = 1e-30)]
        tol: f64,
    },
    /// Puzzle pieces, Julia set and the figure-1 overlay.
    Figure1(CommonOpts),
    /// Conjugacy diagnostics between two Fibonacci maps.
    Conjugacy {
        #[command(flatten)]
        common: CommonOpts,
        /// Second map family: quadratic | cubic | affine.
        /// "affine" takes the rescaled copy x -> f(s·x)/s of the first map.
        #[arg(long, default_value = "cubic")]
        family_b: String,
        /// Perturbation strength for a cubic second map.
        #[arg(long)]
        epsilon_b: Option<f64>,
        /// Scale s of the affine copy when family-b = affine.
        #[arg(long, default_value_t = 2.0)]
        affine_scale: f64,
    },
}

fn float_str(x: &Float) -> String {
    let digits = (x.prec() as f64 * 0.3010).ceil() as usize + 2;
    x.to_string_radix(10, Some(digits))
}

fn locate(family: &Family, depth: usize, ctx: &PrecisionContext) -> Result<(Float, fibrenorm::unimodal::SearchCertificate), CliError> {
    if depth < 5 {
        eprintln!(
            "warning: depth {} is shallow; the parameter bracket stays wide",
            depth
        );
    }
    Ok(locate_fibonacci_parameter(family, depth, ctx)?)
}

fn cmd_find_parameter(cfg: &RunConfig) -> Result<(), CliError> {
    let ctx = PrecisionContext::new(cfg.precision);
    let family = cfg.family()?;
    let started = Instant::now();
    let (t, cert) = locate(&family, cfg.depth, &ctx)?;
    eprintln!("timing: locate = {:?}", started.elapsed());
    println!(
        "family {} depth {}: parameter = {}",
        family.name(),
        cfg.depth,
        float_str(&t)
    );
    println!("bracket width = {}", cert.final_width);
    let body = serde_json::json!({
        "family": family.name(),
        "depth": cfg.depth,
        "precision": cfg.precision,
        "parameter": float_str(&t),
        "parameter_f64": t.to_f64(),
        "bracket_width": cert.final_width,
        "certificate": cert,
    });
    write_atomic(
        &cfg.out.join("parameter.json"),
        format!("{}\n", serde_json::to_string_pretty(&body).unwrap()).as_bytes(),
    )?;
    write_manifest(&cfg.out, "find-parameter", cfg)
}

fn build_hierarchy(cfg: &RunConfig, family: &Family) -> Result<Hierarchy, CliError> {
    let ctx = PrecisionContext::new(cfg.precision);
    let (t, _) = locate(family, cfg.depth + 3, &ctx)?;
    let map = family.instantiate(t);
    Ok(Hierarchy::build(map, &ctx, cfg.depth)?)
}

fn cmd_renorm(cfg: &RunConfig) -> Result<(), CliError> {
    let family = cfg.family()?;
    let started = Instant::now();
    let hier = build_hierarchy(cfg, &family)?;
    let fit_from = 8.min(cfg.depth.saturating_sub(1)).max(2);
    let table = hier.scaling_table(fit_from, cfg.depth)?;
    eprintln!("timing: renorm = {:?}", started.elapsed());

    let mut csv = String::from("n,mu,ratio1,ratio3,time_central,time_side,sigma_side\n");
    for row in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.n,
            row.mu,
            opt_f64(row.ratio1),
            opt_f64(row.ratio3),
            row.time_central,
            row.time_side,
            opt_f64(row.sigma_side)
        ));
    }
    write_atomic(&cfg.out.join("scaling.csv"), csv.as_bytes())?;
    write_manifest(&cfg.out, "renorm", cfg)?;

    println!(
        "built {} levels; properties (i)-(iii) hold at every level",
        hier.depth()
    );
    println!(
        "log2(mu) slope over n = {}..{}: {:.6} (target -1/3)",
        fit_from, cfg.depth, table.slope_log2_mu
    );
    if let Some(row) = table.rows.iter().rev().find(|r| r.ratio3.is_some()) {
        println!(
            "mu_(n+3)/mu_n at n = {}: {:.6} (target 1/2)",
            row.n,
            row.ratio3.unwrap()
        );
    }
    Ok(())
}

fn cmd_thurston(cfg: &RunConfig, gamma0: f64, tol: f64) -> Result<(), CliError> {
    let ctx = PrecisionContext::new(cfg.precision);
    let t0 = MarkedTriple::new(ctx.float(gamma0))?;
    let tol_f = ctx.float(tol);
    let run = iterate_to_fixed_point(&t0, &tol_f, &ctx)?;
    let mut csv = String::from("k,gamma,contraction_ratio\n");
    for (k, gamma) in run.trajectory.iter().enumerate() {
        let rate = if k >= 1 {
            format!("{}", run.rates[k - 1])
        } else {
            String::new()
        };
        csv.push_str(&format!("{},{},{}\n", k, float_str(gamma), rate));
    }
    write_atomic(&cfg.out.join("thurston.csv"), csv.as_bytes())?;
    write_manifest(&cfg.out, "thurston", cfg)?;
    let tail_rate = run.rates.iter().rev().nth(1).copied().unwrap_or(f64::NAN);
    println!(
        "converged to {} in {} steps; asymptotic contraction {:.9} (1/(2a) = {:.9})",
        float_str(&run.fixed_point.gamma),
        run.steps,
        tail_rate,
        fibrenorm::thurston::fixed_point_contraction(&ctx).to_f64()
    );
    Ok(())
}

fn cmd_figure1(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_puzzle()?;
    let family = cfg.family()?;
    if !matches!(family, Family::Quadratic) {
        return Err(CliError::Usage(
            "figure1 runs in exact mode and needs --family quadratic".into(),
        ));
    }
    let started = Instant::now();
    let hier = build_hierarchy(cfg, &family)?;
    let ext = ComplexExtension::new(hier.map.clone(), ExtensionMode::Exact)?;
    let pieces = puzzle_hierarchy(&ext, &hier, cfg.start_level, cfg.depth, cfg.budget)?;
    let ctx = PrecisionContext::new(cfg.precision);
    let rescaled: Vec<_> = pieces
        .iter()
        .map(|p| rescale_piece(p, &ctx))
        .collect::<fibrenorm::Result<_>>()?;
    let julia = julia_inverse_points((-1.0, 0.0), cfg.budget, cfg.seed);
    let report = fibrenorm::complexext::figure1_report(&rescaled, &julia)?;
    eprintln!("timing: figure1 = {:?}", started.elapsed());

    let mut csv = String::from("n,hausdorff\n");
    for row in &report.rows {
        csv.push_str(&format!("{},{}\n", row.level, row.hausdorff));
    }
    write_atomic(&cfg.out.join("hausdorff.csv"), csv.as_bytes())?;

    let piece_groups: Vec<(i64, Vec<[f64; 2]>)> = rescaled
        .iter()
        .map(|p| (p.level as i64, p.boundary.to_f64_points()))
        .collect();
    let groups_ref: Vec<(i64, &[[f64; 2]])> = piece_groups
        .iter()
        .map(|(l, v)| (*l, v.as_slice()))
        .collect();
    write_atomic(
        &cfg.out.join("pieces.csv"),
        points_csv(&groups_ref).as_bytes(),
    )?;
    write_atomic(
        &cfg.out.join("julia.csv"),
        points_csv(&[(-1i64, julia.as_slice())]).as_bytes(),
    )?;

    let a = ctx.golden_ratio().to_f64();
    let deepest = piece_groups.last().unwrap();
    let svg = figure1_svg(&deepest.1, &julia, 20_000, a + 0.2);
    write_atomic(&cfg.out.join("figure1.svg"), svg.as_bytes())?;
    write_manifest(&cfg.out, "figure1", cfg)?;

    for row in &report.rows {
        println!("P_{}: hausdorff distance to Julia = {:.6}", row.level, row.hausdorff);
    }
    println!(
        "strictly decreasing over the deepest {} levels",
        report.decreasing_tail
    );
    Ok(())
}

fn cmd_conjugacy(
    cfg: &RunConfig,
    family_b: &str,
    epsilon_b: Option<f64>,
    affine_scale: f64,
) -> Result<(), CliError> {
    let family_a = cfg.family()?;
    let ctx = PrecisionContext::new(cfg.precision);
    let started = Instant::now();
    let hier_a = build_hierarchy(cfg, &family_a)?;

    let hier_b = match family_b {
        "identity" => hier_a.clone(),
        "affine" => {
            // The rescaled copy x -> f(s·x)/s of map A.
            let s = affine_scale;
            let t_b = hier_a.map.t.clone() / s;
            let fam = Family::ScaledQuadratic { scale: s };
            match family_a {
                Family::Quadratic => {}
                _ => {
                    return Err(CliError::Usage(
                        "family-b = affine needs --family quadratic".into(),
                    ))
                }
            }
            Hierarchy::build(fam.instantiate(t_b), &ctx, cfg.depth)?
        }
        "quadratic" | "cubic" => {
            let fam = match family_b {
                "quadratic" => Family::Quadratic,
                _ => Family::CubicPerturbed {
                    epsilon: epsilon_b.unwrap_or(cfg.epsilon),
                },
            };
            let (t_b, _) = locate(&fam, cfg.depth + 3, &ctx)?;
            Hierarchy::build(fam.instantiate(t_b), &ctx, cfg.depth)?
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown family-b '{}' (expected quadratic|cubic|affine|identity)",
                other
            )))
        }
    };

    let report = conjugacy_report(&hier_a, &hier_b, cfg.depth)?;
    let pairs = match_critical_sets(&hier_a, &hier_b, cfg.depth)?;
    let smooth = smoothness_diagnostic(&pairs, &hier_a, &hier_b, cfg.depth)?;
    eprintln!("timing: conjugacy = {:?}", started.elapsed());

    write_atomic(
        &cfg.out.join("report.json"),
        format!("{}\n", serde_json::to_string_pretty(&report).unwrap()).as_bytes(),
    )?;
    write_atomic(
        &cfg.out.join("smoothness.json"),
        format!("{}\n", serde_json::to_string_pretty(&smooth).unwrap()).as_bytes(),
    )?;
    write_manifest(&cfg.out, "conjugacy", cfg)?;

    let max_qs = report
        .qs
        .iter()
        .map(|q| q.max_ratio)
        .fold(f64::NAN, f64::max);
    println!(
        "matched {} pairs to depth {}; max qs ratio {:.6}; tau = {:.9}",
        report.pairs.len(),
        cfg.depth,
        max_qs,
        report.tau
    );
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::FindParameter(common) => cmd_find_parameter(&common.resolve()?),
        Command::Renorm(common) => cmd_renorm(&common.resolve()?),
        Command::Thurston {
            common,
            gamma0,
            tol,
        } => cmd_thurston(&common.resolve()?, *gamma0, *tol),
        Command::Figure1(common) => cmd_figure1(&common.resolve()?),
        Command::Conjugacy {
            common,
            family_b,
            epsilon_b,
            affine_scale,
        } => cmd_conjugacy(&common.resolve()?, family_b, *epsilon_b, *affine_scale),
    }
}

fn main() {
    match run() {
        Ok(()) => {}
        Err(e) => {
            eprintln!("{}", e);
            std::process::exit(e.code());
        }
    }
}
