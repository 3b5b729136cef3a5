//! `cubature` command line: signature computation, cubature moment checks,
//! walk diagnostics, pricing and convergence-rate studies.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a requested
//! check failed (moment mismatch, KS rejection, ...).

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cubature_core::cubature::{check_moments, resolve_formula, CheckMode};
use cubature_core::estimator::{
    estimate_mc, estimate_tree, convergence_study, MeshKind, Payoff, Reference,
};
use cubature_core::mesh::{
    build_cubature_path, clt_condition_report, donsker_marginal_check, holder_statistic,
    moment_scaling_check, walk_nodes, Mesh,
};
use cubature_core::sde::{black_scholes_exact, VectorFieldSystem, DEFAULT_SUBSTEPS};
use cubature_core::stats::chunk_rng;
use cubature_core::{PiecewiseLinearPath, VERSION};

#[derive(Parser)]
#[command(name = "cubature", version, about = "Cubature on Wiener space toolkit")]
struct Cli {
    /// Worker threads for Monte Carlo runs (output is identical for any
    /// count).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the truncated signature of a piecewise-linear path.
    Sig(SigArgs),
    /// Check a cubature formula's moments against the Brownian signature.
    Cubecheck(CubecheckArgs),
    /// Random-walk diagnostics: KS marginals, Lévy area, moment scaling,
    /// Hölder statistic.
    Walkdiag(WalkdiagArgs),
    /// Price one payoff under a cubature scheme.
    Cubprice(ConfigArgs),
    /// Convergence-rate study across mesh sizes.
    Cubrate(ConfigArgs),
}

#[derive(Args)]
struct SigArgs {
    /// Path JSON file.
    #[arg(long)]
    path: String,
    /// Truncation level.
    #[arg(long)]
    m: usize,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct CubecheckArgs {
    /// `builtin:deg3`, `builtin:wz`, `builtin:nv` or a discrete-formula
    /// JSON file.
    #[arg(long)]
    formula: String,
    #[arg(long)]
    d: usize,
    /// Graded degree up to which moments are compared.
    #[arg(long)]
    m: usize,
    /// Monte Carlo samples (generative formulas; optional for discrete).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct WalkdiagArgs {
    #[arg(long)]
    formula: String,
    #[arg(long)]
    d: usize,
    /// `uniform:n` or `kusuoka:n:gamma`.
    #[arg(long)]
    mesh: String,
    /// Hölder exponent for the dyadic statistic.
    #[arg(long, default_value_t = 0.4)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration JSON.
    #[arg(long)]
    config: String,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    formula: String,
    d: usize,
    mesh: String,
    model: ModelConfig,
    payoff: PayoffConfig,
    x0: Vec<f64>,
    samples: usize,
    seed: Option<u64>,
    #[serde(default)]
    substeps: Option<usize>,
    /// `mc` (default) or `tree` (discrete formulas, terminal payoffs).
    #[serde(default)]
    method: Option<String>,
    #[serde(default)]
    reference: Option<ReferenceConfig>,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
struct StudyConfig {
    formula: String,
    d: usize,
    /// `uniform` or `kusuoka`.
    mesh_kind: String,
    #[serde(default)]
    gamma: Option<f64>,
    ns: Vec<usize>,
    model: ModelConfig,
    payoff: PayoffConfig,
    x0: Vec<f64>,
    /// One count for all rows, or one per row.
    samples: Vec<usize>,
    seed: Option<u64>,
    #[serde(default)]
    substeps: Option<usize>,
    reference: ReferenceConfig,
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(tag = "model", deny_unknown_fields)]
enum ModelConfig {
    #[serde(rename = "black_scholes")]
    BlackScholes { sigma: Vec<f64> },
    #[serde(rename = "linear")]
    Linear { dim: usize, mats: Vec<Vec<f64>> },
}

impl ModelConfig {
    fn build(&self) -> cubature_core::Result<VectorFieldSystem> {
        match self {
            ModelConfig::BlackScholes { sigma } => VectorFieldSystem::black_scholes(sigma.clone()),
            ModelConfig::Linear { dim, mats } => VectorFieldSystem::linear(*dim, mats.clone()),
        }
    }
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(tag = "kind", deny_unknown_fields)]
enum PayoffConfig {
    #[serde(rename = "call")]
    Call {
        #[serde(default)]
        coord: usize,
        strike: f64,
    },
    #[serde(rename = "smooth_bump")]
    SmoothBump {
        #[serde(default)]
        coord: usize,
        center: f64,
    },
    #[serde(rename = "asian")]
    Asian {
        #[serde(default)]
        coord: usize,
        strike: f64,
    },
    #[serde(rename = "lookback")]
    Lookback {
        #[serde(default)]
        coord: usize,
    },
    #[serde(rename = "barrier")]
    Barrier {
        #[serde(default)]
        coord: usize,
        level: f64,
        strike: f64,
        #[serde(default)]
        monitor: Option<Vec<f64>>,
    },
}

impl PayoffConfig {
    fn build(&self) -> Payoff {
        match self.clone() {
            PayoffConfig::Call { coord, strike } => {
                Payoff::Terminal(Box::new(move |x: &[f64]| (x[coord] - strike).max(0.0)))
            }
            PayoffConfig::SmoothBump { coord, center } => Payoff::Terminal(Box::new(move |x| {
                let z = x[coord] / center - 1.0;
                (-z * z).exp()
            })),
            PayoffConfig::Asian { coord, strike } => Payoff::Asian { coord, strike },
            PayoffConfig::Lookback { coord } => Payoff::Lookback { coord },
            PayoffConfig::Barrier {
                coord,
                level,
                strike,
                monitor,
            } => Payoff::Barrier {
                coord,
                level,
                strike,
                monitor,
            },
        }
    }
}

#[derive(Serialize, Deserialize, Clone)]
#[serde(tag = "kind", deny_unknown_fields)]
enum ReferenceConfig {
    #[serde(rename = "exact")]
    Exact { value: f64 },
    /// Zero-rate Black-Scholes call closed form, from the model sigma and
    /// the payoff strike.
    #[serde(rename = "black_scholes")]
    BlackScholes,
    #[serde(rename = "wong_zakai")]
    WongZakai {
        fine_n: usize,
        samples: usize,
        seed: u64,
        #[serde(default)]
        substeps: Option<usize>,
    },
}

impl ReferenceConfig {
    fn build(
        &self,
        model: &ModelConfig,
        payoff: &PayoffConfig,
        x0: &[f64],
    ) -> Result<Reference, String> {
        match self {
            ReferenceConfig::Exact { value } => Ok(Reference::Exact(*value)),
            ReferenceConfig::BlackScholes => {
                let (ModelConfig::BlackScholes { sigma }, PayoffConfig::Call { coord, strike }) =
                    (model, payoff)
                else {
                    return Err(
                        "black_scholes reference needs a black_scholes model and a call payoff"
                            .to_string(),
                    );
                };
                Ok(Reference::Exact(black_scholes_exact(
                    x0[*coord],
                    *strike,
                    sigma[*coord],
                    1.0,
                )))
            }
            ReferenceConfig::WongZakai {
                fine_n,
                samples,
                seed,
                substeps,
            } => Ok(Reference::WongZakaiMc {
                fine_n: *fine_n,
                samples: *samples,
                seed: *seed,
                substeps: substeps.unwrap_or(1),
            }),
        }
    }
}

fn env_seed() -> u64 {
    std::env::var("CUBATURE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn emit(out: &Option<String>, text: &str) -> Result<(), String> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(file) => std::fs::write(file, text).map_err(|e| format!("writing {file}: {e}")),
    }
}

fn header(config_json: &str) -> String {
    format!("# version: {VERSION}\n# config: {config_json}\n")
}

fn run_sig(a: &SigArgs) -> Result<u8, String> {
    let text = std::fs::read_to_string(&a.path).map_err(|e| format!("reading {}: {e}", a.path))?;
    let path: PiecewiseLinearPath = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let sig = path.signature(a.m).map_err(|e| e.to_string())?;
    let json = serde_json::to_string_pretty(sig.series()).map_err(|e| e.to_string())?;
    emit(&a.out, &format!("{json}\n"))?;
    Ok(0)
}

fn run_cubecheck(a: &CubecheckArgs) -> Result<u8, String> {
    let formula = resolve_formula(&a.formula, a.d).map_err(|e| e.to_string())?;
    let seed = a.seed.unwrap_or_else(env_seed);
    let (mode, tol) = if formula.is_discrete() && a.samples.is_none() {
        (CheckMode::Exact, a.tol.unwrap_or(1e-13))
    } else {
        let samples = a.samples.ok_or("generative formulas need --samples")?;
        (CheckMode::Mc { samples, seed }, a.tol.unwrap_or(1e-12))
    };
    let report = check_moments(&formula, a.m, mode, tol).map_err(|e| e.to_string())?;
    let resolved = format!(
        "{{\"formula\":{:?},\"d\":{},\"m\":{},\"mode\":{:?},\"tol\":{tol},\"seed\":{seed}}}",
        a.formula, a.d, a.m, report.mode
    );
    let mut text = header(&resolved);
    text.push_str("word,degree,cubature,target,diff,stderr,pass\n");
    for r in &report.rows {
        let se = r.stderr.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            r.word, r.degree, r.cubature, r.target, r.diff, se, r.pass
        );
    }
    emit(&a.out, &text)?;
    if report.passed {
        Ok(0)
    } else {
        for r in report.failing() {
            eprintln!(
                "moment mismatch: word {} cubature {} target {}",
                r.word, r.cubature, r.target
            );
        }
        Ok(2)
    }
}

fn run_walkdiag(a: &WalkdiagArgs) -> Result<u8, String> {
    let formula = resolve_formula(&a.formula, a.d).map_err(|e| e.to_string())?;
    let mesh = Mesh::parse(&a.mesh).map_err(|e| e.to_string())?;
    let seed = a.seed.unwrap_or_else(env_seed);
    let resolved = format!(
        "{{\"formula\":{:?},\"d\":{},\"mesh\":{:?},\"alpha\":{},\"samples\":{},\"seed\":{seed}}}",
        a.formula, a.d, a.mesh, a.alpha, a.samples
    );
    let marginal =
        donsker_marginal_check(&formula, &mesh, a.samples, seed).map_err(|e| e.to_string())?;
    let scaling = moment_scaling_check(&formula, &[mesh.clone()], 1, a.samples.min(10_000), seed)
        .map_err(|e| e.to_string())?;
    let clt = if formula.is_discrete() {
        clt_condition_report(&formula, &[mesh.clone()], None)
    } else {
        clt_condition_report(&formula, &[mesh.clone()], Some((a.samples.min(10_000), seed)))
    }
    .map_err(|e| e.to_string())?;
    // Hölder statistic over a handful of sampled walks.
    let mut holder = Vec::new();
    for i in 0..32u64 {
        let mut rng = chunk_rng(seed ^ 0x9e3779b97f4a7c15, i);
        let p = build_cubature_path(&formula, &mesh, &mut rng).map_err(|e| e.to_string())?;
        let walk = walk_nodes(p, &mesh, 2).map_err(|e| e.to_string())?;
        holder.push(holder_statistic(&walk, a.alpha).map_err(|e| e.to_string())?);
    }
    holder.sort_by(f64::total_cmp);

    let mut text = header(&resolved);
    text.push_str("metric,value\n");
    for (i, ks) in marginal.ks.iter().enumerate() {
        let _ = writeln!(text, "ks_statistic_{},{}", i + 1, ks.statistic);
        let _ = writeln!(text, "ks_p_value_{},{}", i + 1, ks.p_value);
    }
    let _ = writeln!(text, "ks_pass,{}", marginal.ks_pass);
    if let (Some(m), Some(v)) = (marginal.area_mean, marginal.area_variance) {
        let _ = writeln!(text, "area_mean,{m}");
        let _ = writeln!(text, "area_variance,{v}");
        let _ = writeln!(text, "area_pass,{}", marginal.area_pass.unwrap());
    } else {
        let _ = writeln!(text, "area,n/a");
    }
    let _ = writeln!(text, "scaling_max_ratio,{}", scaling.max_ratio);
    if let Some(s) = scaling.slope {
        let _ = writeln!(text, "scaling_slope,{s}");
    }
    let _ = writeln!(text, "scaling_bounded,{}", scaling.bounded);
    let _ = writeln!(text, "clt_norm2_expectation,{}", clt.norm2_expectation);
    for ((i, j), v) in &clt.a {
        let _ = writeln!(text, "clt_a_{i}{j},{v}");
    }
    for ((i, j), v) in &clt.b {
        let _ = writeln!(text, "clt_b_{i}{j},{v}");
    }
    for (n, eps, v) in &clt.cond_v {
        let _ = writeln!(text, "clt_cond_v_n{n}_eps{eps},{v}");
    }
    let _ = writeln!(text, "holder_median,{}", holder[holder.len() / 2]);
    let _ = writeln!(text, "holder_max,{}", holder[holder.len() - 1]);
    emit(&a.out, &text)?;
    Ok(if marginal.ks_pass { 0 } else { 2 })
}

fn run_cubprice(a: &ConfigArgs) -> Result<u8, String> {
    let text =
        std::fs::read_to_string(&a.config).map_err(|e| format!("reading {}: {e}", a.config))?;
    let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    cfg.seed = Some(cfg.seed.unwrap_or_else(env_seed));
    cfg.substeps = Some(cfg.substeps.unwrap_or(DEFAULT_SUBSTEPS));
    cfg.method = Some(cfg.method.unwrap_or_else(|| "mc".to_string()));
    let formula = resolve_formula(&cfg.formula, cfg.d).map_err(|e| e.to_string())?;
    let mesh = Mesh::parse(&cfg.mesh).map_err(|e| e.to_string())?;
    let vf = cfg.model.build().map_err(|e| e.to_string())?;
    let payoff = cfg.payoff.build();
    let resolved = serde_json::to_string(&cfg).map_err(|e| e.to_string())?;
    let mut out = header(&resolved);
    out.push_str("quantity,value\n");
    match cfg.method.as_deref() {
        Some("tree") => {
            let v = estimate_tree(
                &formula,
                &mesh,
                &vf,
                &payoff,
                &cfg.x0,
                cfg.substeps.unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let _ = writeln!(out, "estimate,{v}");
            let _ = writeln!(out, "stderr,0");
        }
        Some("mc") => {
            let est = estimate_mc(
                &formula,
                &mesh,
                &vf,
                &payoff,
                &cfg.x0,
                cfg.samples,
                cfg.seed.unwrap(),
                cfg.substeps.unwrap(),
            )
            .map_err(|e| e.to_string())?;
            let _ = writeln!(out, "estimate,{}", est.value);
            let _ = writeln!(out, "stderr,{}", est.stderr);
            let _ = writeln!(out, "divergent,{}", est.divergent);
            let _ = writeln!(out, "unreliable,{}", est.unreliable);
        }
        other => return Err(format!("unknown method {other:?}")),
    }
    if let Some(rc) = &cfg.reference {
        let reference = rc.build(&cfg.model, &cfg.payoff, &cfg.x0)?;
        let (v, se) = cubature_core::estimator::reference_value(&reference, &vf, &payoff, &cfg.x0)
            .map_err(|e| e.to_string())?;
        let _ = writeln!(out, "reference,{v}");
        let _ = writeln!(out, "reference_stderr,{se}");
    }
    emit(&a.out, &out)?;
    Ok(0)
}

fn run_cubrate(a: &ConfigArgs) -> Result<u8, String> {
    let text =
        std::fs::read_to_string(&a.config).map_err(|e| format!("reading {}: {e}", a.config))?;
    let mut cfg: StudyConfig = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    cfg.seed = Some(cfg.seed.unwrap_or_else(env_seed));
    cfg.substeps = Some(cfg.substeps.unwrap_or(DEFAULT_SUBSTEPS));
    if cfg.samples.len() == 1 {
        cfg.samples = vec![cfg.samples[0]; cfg.ns.len()];
    }
    let formula = resolve_formula(&cfg.formula, cfg.d).map_err(|e| e.to_string())?;
    let kind = match cfg.mesh_kind.as_str() {
        "uniform" => MeshKind::Uniform,
        "kusuoka" => MeshKind::Kusuoka(cfg.gamma.ok_or("kusuoka mesh kind needs gamma")?),
        other => return Err(format!("unknown mesh kind {other:?}")),
    };
    let vf = cfg.model.build().map_err(|e| e.to_string())?;
    let payoff = cfg.payoff.build();
    let reference = cfg.reference.build(&cfg.model, &cfg.payoff, &cfg.x0)?;
    let report = convergence_study(
        &formula,
        kind,
        &cfg.ns,
        &vf,
        &payoff,
        &cfg.x0,
        &cfg.samples,
        cfg.seed.unwrap(),
        cfg.substeps.unwrap(),
        &reference,
    )
    .map_err(|e| e.to_string())?;
    let resolved = serde_json::to_string(&cfg).map_err(|e| e.to_string())?;
    let mut out = header(&resolved);
    out.push_str("n,mesh_size,estimate,stderr,reference,abs_error,resolvable\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n, r.mesh_size, r.estimate, r.stderr, r.reference, r.abs_error, r.resolvable
        );
    }
    match report.fitted_order {
        Some(o) => {
            let _ = writeln!(out, "fitted_order,{o}");
        }
        None => {
            let _ = writeln!(out, "fitted_order,unresolved");
        }
    }
    emit(&a.out, &out)?;
    Ok(0)
}

fn run(cli: &Cli) -> Result<u8, String> {
    match &cli.command {
        Command::Sig(a) => run_sig(a),
        Command::Cubecheck(a) => run_cubecheck(a),
        Command::Walkdiag(a) => run_walkdiag(a),
        Command::Cubprice(a) => run_cubprice(a),
        Command::Cubrate(a) => run_cubrate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind::*;
            let kind = e.kind();
            let _ = e.print();
            return if matches!(kind, DisplayHelp | DisplayVersion) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.max(1))
        .build();
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
