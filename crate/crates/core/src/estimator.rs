//! Weak-approximation estimates `E[f(X^D)]` over cubature paths: Monte
//! Carlo over sampled paths, exhaustive tree expansion for discrete
//! formulas, and convergence-rate studies against a reference value.

use serde::Serialize;

use crate::cubature::{CubatureFormula, FormulaKind};
use crate::error::{contract, Error, Result};
use crate::mesh::{build_cubature_path, Mesh};
use crate::sde::{integrate_along_path, wong_zakai_reference, SolutionPath, VectorFieldSystem};
use crate::stats::{ls_slope, mc_run, KahanSum, MomentAccumulator};

pub enum Payoff {
    Terminal(Box<dyn Fn(&[f64]) -> f64 + Send + Sync>),
    /// Arithmetic (trapezoid) average of one coordinate against a strike.
    Asian { coord: usize, strike: f64 },
    /// Running maximum of one coordinate over the sample times.
    Lookback { coord: usize },
    /// Knock-out call: worthless once the coordinate reaches `level` at a
    /// monitoring time, otherwise a call on the terminal value. Monitoring
    /// is discrete: at the given dates, or at every sample time when none
    /// are given.
    Barrier {
        coord: usize,
        level: f64,
        strike: f64,
        monitor: Option<Vec<f64>>,
    },
    Custom(Box<dyn Fn(&SolutionPath) -> f64 + Send + Sync>),
}

pub fn path_payoff_eval(payoff: &Payoff, path: &SolutionPath) -> f64 {
    match payoff {
        Payoff::Terminal(f) => f(path.terminal()),
        Payoff::Asian { coord, strike } => {
            let mut acc = 0.0;
            for i in 1..path.len() {
                let dt = path.times[i] - path.times[i - 1];
                acc += 0.5 * dt * (path.state(i - 1)[*coord] + path.state(i)[*coord]);
            }
            let span = path.times[path.len() - 1] - path.times[0];
            let avg = if span > 0.0 { acc / span } else { path.terminal()[*coord] };
            (avg - strike).max(0.0)
        }
        Payoff::Lookback { coord } => (0..path.len())
            .map(|i| path.state(i)[*coord])
            .fold(f64::NEG_INFINITY, f64::max),
        Payoff::Barrier {
            coord,
            level,
            strike,
            monitor,
        } => {
            let breached = match monitor {
                Some(dates) => dates.iter().any(|&t| path.value_at(t, *coord) >= *level),
                None => (0..path.len()).any(|i| path.state(i)[*coord] >= *level),
            };
            if breached {
                0.0
            } else {
                (path.terminal()[*coord] - strike).max(0.0)
            }
        }
        Payoff::Custom(f) => f(path),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub divergent: usize,
    /// Set when more than 0.1% of the samples diverged.
    pub unreliable: bool,
}

const MAX_DIVERGENT_FRACTION: f64 = 1e-3;

/// Mean payoff over independently built cubature paths; seed-reproducible
/// for any worker count. Divergent samples are excluded and counted.
pub fn estimate_mc(
    formula: &CubatureFormula,
    mesh: &Mesh,
    vf: &VectorFieldSystem,
    payoff: &Payoff,
    x0: &[f64],
    samples: usize,
    seed: u64,
    substeps: usize,
) -> Result<McEstimate> {
    if samples < 1 {
        return Err(contract("need at least one sample"));
    }
    #[derive(Default)]
    struct Acc {
        acc: MomentAccumulator,
        divergent: usize,
        error: Option<String>,
    }
    let acc = mc_run(
        samples,
        seed,
        |rng, len| {
            let mut out = Acc::default();
            for _ in 0..len {
                let driver = match build_cubature_path(formula, mesh, rng) {
                    Ok(p) => p,
                    Err(e) => {
                        out.error.get_or_insert(e.to_string());
                        continue;
                    }
                };
                match integrate_along_path(vf, &driver, x0, substeps) {
                    Ok(sol) => out.acc.push(path_payoff_eval(payoff, &sol)),
                    Err(Error::Divergence { .. }) => out.divergent += 1,
                    Err(e) => {
                        out.error.get_or_insert(e.to_string());
                    }
                }
            }
            out
        },
        |a: &mut Acc, b| {
            a.acc.merge(&b.acc);
            a.divergent += b.divergent;
            if a.error.is_none() {
                a.error = b.error;
            }
        },
    );
    if let Some(e) = acc.error {
        return Err(contract(e));
    }
    Ok(McEstimate {
        value: acc.acc.mean(),
        stderr: acc.acc.stderr(),
        samples,
        divergent: acc.divergent,
        unreliable: acc.divergent as f64 > MAX_DIVERGENT_FRACTION * samples as f64,
    })
}

pub const TREE_BUDGET: usize = 10_000_000;

/// Exhaustive expectation over all branch words of a discrete formula:
/// deterministic, no MC error. Terminal payoffs only.
pub fn estimate_tree(
    formula: &CubatureFormula,
    mesh: &Mesh,
    vf: &VectorFieldSystem,
    payoff: &Payoff,
    x0: &[f64],
    substeps: usize,
) -> Result<f64> {
    let FormulaKind::Discrete(paths) = formula.kind() else {
        return Err(Error::Unsupported(
            "tree expansion requires a discrete formula".to_string(),
        ));
    };
    let Payoff::Terminal(f) = payoff else {
        return Err(Error::Unsupported(
            "tree expansion supports terminal payoffs only".to_string(),
        ));
    };
    let k = paths.len();
    let n = mesh.n();
    let branches = (k as f64).powi(n as i32);
    if branches > TREE_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            required: branches,
            limit: TREE_BUDGET as f64,
        });
    }
    // Rescaled block drivers per (step, branch), shifted to the mesh step so
    // a custom time component integrates with the right slopes.
    let mut blocks: Vec<Vec<crate::path::PiecewiseLinearPath>> = Vec::with_capacity(n);
    for step in 1..=n {
        let dt = mesh.delta(step);
        blocks.push(
            paths
                .iter()
                .map(|(_, p)| p.rescale(dt))
                .collect::<Result<_>>()?,
        );
    }
    let mut sum = KahanSum::new();
    dfs(
        &mut sum,
        &blocks,
        paths,
        vf,
        f,
        0,
        1.0,
        x0.to_vec(),
        substeps,
    )?;
    Ok(sum.value())
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    sum: &mut KahanSum,
    blocks: &[Vec<crate::path::PiecewiseLinearPath>],
    paths: &[(f64, crate::path::PiecewiseLinearPath)],
    vf: &VectorFieldSystem,
    f: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    depth: usize,
    weight: f64,
    state: Vec<f64>,
    substeps: usize,
) -> Result<()> {
    if depth == blocks.len() {
        sum.add(weight * f(&state));
        return Ok(());
    }
    for (j, (w, _)) in paths.iter().enumerate() {
        let sol = integrate_along_path(vf, &blocks[depth][j], &state, substeps)?;
        dfs(
            sum,
            blocks,
            paths,
            vf,
            f,
            depth + 1,
            weight * w,
            sol.terminal().to_vec(),
            substeps,
        )?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
pub enum MeshKind {
    Uniform,
    Kusuoka(f64),
}

impl MeshKind {
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        match self {
            MeshKind::Uniform => Mesh::uniform(n),
            MeshKind::Kusuoka(g) => Mesh::kusuoka(n, *g),
        }
    }
}

pub enum Reference {
    Exact(f64),
    /// Fine Wong-Zakai MC of the Stratonovich solution.
    WongZakaiMc {
        fine_n: usize,
        samples: usize,
        seed: u64,
        substeps: usize,
    },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub mesh_size: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub reference: f64,
    pub abs_error: f64,
    /// Error exceeds 4x the joint statistical error, so it carries rate
    /// information.
    pub resolvable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<RateRow>,
    pub reference: f64,
    pub reference_stderr: f64,
    /// Log-log slope of abs_error against mesh size over resolvable rows;
    /// `None` with fewer than 2 such rows.
    pub fitted_order: Option<f64>,
    pub resolvable_rows: usize,
}

/// Resolves a reference to (value, stderr).
pub fn reference_value(
    reference: &Reference,
    vf: &VectorFieldSystem,
    payoff: &Payoff,
    x0: &[f64],
) -> Result<(f64, f64)> {
    match reference {
        Reference::Exact(v) => Ok((*v, 0.0)),
        Reference::WongZakaiMc {
            fine_n,
            samples,
            seed,
            substeps,
        } => {
            let acc = mc_run(
                *samples,
                *seed,
                |rng, len| {
                    let mut acc = MomentAccumulator::new();
                    for _ in 0..len {
                        let sol = wong_zakai_reference(vf, x0, *fine_n, rng, *substeps).unwrap();
                        acc.push(path_payoff_eval(payoff, &sol));
                    }
                    acc
                },
                |a: &mut MomentAccumulator, b| a.merge(&b),
            );
            Ok((acc.mean(), acc.stderr()))
        }
    }
}

/// Estimates at every `n` in the family and fits the weak order on the
/// statistically resolvable rows.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    formula: &CubatureFormula,
    kind: MeshKind,
    ns: &[usize],
    vf: &VectorFieldSystem,
    payoff: &Payoff,
    x0: &[f64],
    samples_per_row: &[usize],
    seed: u64,
    substeps: usize,
    reference: &Reference,
) -> Result<ConvergenceReport> {
    if ns.is_empty() || samples_per_row.len() != ns.len() {
        return Err(contract(
            "need one sample count per mesh size in the study",
        ));
    }
    let (refv, refse) = reference_value(reference, vf, payoff, x0)?;
    let mut rows = Vec::with_capacity(ns.len());
    for (i, (&n, &samples)) in ns.iter().zip(samples_per_row).enumerate() {
        let mesh = kind.mesh(n)?;
        let est = estimate_mc(
            formula,
            &mesh,
            vf,
            payoff,
            x0,
            samples,
            seed.wrapping_add(i as u64),
            substeps,
        )?;
        let joint = (est.stderr * est.stderr + refse * refse).sqrt();
        let abs_error = (est.value - refv).abs();
        rows.push(RateRow {
            n,
            mesh_size: mesh.size(),
            estimate: est.value,
            stderr: est.stderr,
            reference: refv,
            abs_error,
            resolvable: abs_error > 4.0 * joint,
        });
    }
    rows.sort_by_key(|r| r.n);
    let xs: Vec<f64> = rows
        .iter()
        .filter(|r| r.resolvable)
        .map(|r| r.mesh_size.ln())
        .collect();
    let ys: Vec<f64> = rows
        .iter()
        .filter(|r| r.resolvable)
        .map(|r| r.abs_error.ln())
        .collect();
    let fitted_order = ls_slope(&xs, &ys);
    Ok(ConvergenceReport {
        resolvable_rows: xs.len(),
        rows,
        reference: refv,
        reference_stderr: refse,
        fitted_order,
    })
}
