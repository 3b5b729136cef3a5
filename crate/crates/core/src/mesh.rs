//! Meshes, concatenated cubature paths, the group-valued random walk and
//! its empirical diagnostics: moment scaling, endpoint marginals, CLT
//! conditions and a dyadic Hölder statistic.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cubature::CubatureFormula;
use crate::error::{contract, Result};
use crate::path::{PiecewiseLinearPath, ScalarPath};
use crate::stats::{ks_test_standard_normal, ls_slope, mc_run, KahanSum, KsResult, MomentAccumulator};
use crate::tensor::{Alphabet, GroupElement};

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn uniform(n: usize) -> Result<Mesh> {
        if n < 1 {
            return Err(contract("mesh needs at least one step"));
        }
        Ok(Mesh {
            nodes: (0..=n).map(|k| k as f64 / n as f64).collect(),
        })
    }

    /// Nodes `(k/n)^gamma`, concentrating small steps near 0.
    pub fn kusuoka(n: usize, gamma: f64) -> Result<Mesh> {
        if n < 1 {
            return Err(contract("mesh needs at least one step"));
        }
        if !(gamma >= 1.0) {
            return Err(contract(format!(
                "kusuoka mesh requires gamma >= 1, got {gamma}"
            )));
        }
        Ok(Mesh {
            nodes: (0..=n).map(|k| (k as f64 / n as f64).powf(gamma)).collect(),
        })
    }

    /// Parses `uniform:n` or `kusuoka:n:gamma`.
    pub fn parse(spec: &str) -> Result<Mesh> {
        let parts: Vec<&str> = spec.split(':').collect();
        match parts.as_slice() {
            ["uniform", n] => {
                let n = n
                    .parse::<usize>()
                    .map_err(|_| contract(format!("bad mesh size in {spec:?}")))?;
                Mesh::uniform(n)
            }
            ["kusuoka", n, gamma] => {
                let n = n
                    .parse::<usize>()
                    .map_err(|_| contract(format!("bad mesh size in {spec:?}")))?;
                let gamma = gamma
                    .parse::<f64>()
                    .map_err(|_| contract(format!("bad gamma in {spec:?}")))?;
                Mesh::kusuoka(n, gamma)
            }
            _ => Err(contract(format!(
                "mesh spec must be uniform:n or kusuoka:n:gamma, got {spec:?}"
            ))),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of steps.
    pub fn n(&self) -> usize {
        self.nodes.len() - 1
    }

    /// `t_k - t_{k-1}` for `k` in `1..=n`.
    pub fn delta(&self, k: usize) -> f64 {
        self.nodes[k] - self.nodes[k - 1]
    }

    /// Mesh size `|D| = max delta`.
    pub fn size(&self) -> f64 {
        (1..=self.n()).map(|k| self.delta(k)).fold(0.0, f64::max)
    }
}

/// Draws one block per mesh step, rescales each to its step and
/// concatenates. Breakpoints at mesh nodes are exact (the last local point
/// of every block is snapped to `t_k`), so the time component satisfies
/// `h^D(t_k) = t_k` exactly, and everywhere for identity time.
pub fn build_cubature_path(
    formula: &CubatureFormula,
    mesh: &Mesh,
    rng: &mut ChaCha8Rng,
) -> Result<PiecewiseLinearPath> {
    let d = formula.d();
    let has_time = formula.has_time_component();
    let mut breakpoints = vec![0.0];
    let mut nodes = vec![0.0; d];
    let mut h_values = if has_time { vec![0.0] } else { Vec::new() };
    let mut offset = vec![0.0; d];
    for k in 1..=mesh.n() {
        let (t0, t1) = (mesh.nodes[k - 1], mesh.nodes[k]);
        let dt = t1 - t0;
        let scale = dt.sqrt();
        let block = formula.sample(rng);
        let bp = block.breakpoints();
        for (i, &s) in bp.iter().enumerate().skip(1) {
            let t = if i + 1 == bp.len() { t1 } else { t0 + s * dt };
            breakpoints.push(t);
            let node = block.node(i);
            for j in 0..d {
                nodes.push(offset[j] + scale * node[j]);
            }
            if has_time {
                let h = block.time_component().unwrap().value_at(s);
                h_values.push(if i + 1 == bp.len() { t1 } else { t0 + h * dt });
            }
        }
        let end = block.endpoint();
        for j in 0..d {
            offset[j] += scale * end[j];
        }
    }
    let path = PiecewiseLinearPath::new(d, breakpoints.clone(), nodes)?;
    if has_time {
        path.with_time(ScalarPath::new(breakpoints, h_values)?)
    } else {
        Ok(path)
    }
}

/// The walk `Xi^n_k = S_m(W^D)_{0, t_k}` at the mesh nodes.
pub struct WalkSample {
    pub mesh: Mesh,
    pub elements: Vec<GroupElement>,
    pub path: PiecewiseLinearPath,
}

/// Signatures at the mesh nodes via incremental Chen products.
pub fn walk_nodes(path: PiecewiseLinearPath, mesh: &Mesh, m: usize) -> Result<WalkSample> {
    let alphabet = Alphabet::new(path.d(), path.has_time_component())?;
    let mut elements = Vec::with_capacity(mesh.n() + 1);
    let mut acc = GroupElement::unit(alphabet, m)?;
    elements.push(acc.clone());
    for k in 1..=mesh.n() {
        let block = path.restrict(mesh.nodes[k - 1], mesh.nodes[k])?;
        acc = acc.mul(&block.signature(m)?)?;
        elements.push(acc.clone());
    }
    Ok(WalkSample {
        mesh: mesh.clone(),
        elements,
        path,
    })
}

/// Walk node elements built directly from rescaled block signatures,
/// without materializing the concatenated path.
fn walk_elements(
    formula: &CubatureFormula,
    mesh: &Mesh,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GroupElement>> {
    let alphabet = formula.alphabet()?;
    let mut acc = GroupElement::unit(alphabet, m)?;
    let mut out = Vec::with_capacity(mesh.n() + 1);
    out.push(acc.clone());
    for k in 1..=mesh.n() {
        let xi = formula
            .sample(rng)
            .signature(m)?
            .dilate(mesh.delta(k).sqrt())?;
        acc = acc.mul(&xi)?;
        out.push(acc.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub t: f64,
    pub moment: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub p: usize,
    pub rows: Vec<ScalingRow>,
    pub max_ratio: f64,
    /// Log-log slope of ratio against `t_k`; bounded means within 0.3 of 0.
    pub slope: Option<f64>,
    pub bounded: bool,
}

const SCALING_SLOPE_BAND: f64 = 0.3;

/// Monte Carlo check of the moment bound `E||Xi^n_k||^{4p} <= C t_k^{2p}`
/// across a family of meshes, at step-2 walk level.
pub fn moment_scaling_check(
    formula: &CubatureFormula,
    meshes: &[Mesh],
    p: usize,
    samples: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if !(p == 1 || p == 2) {
        return Err(contract("moment scaling check supports p in {1, 2}"));
    }
    let mut rows = Vec::new();
    for (mi, mesh) in meshes.iter().enumerate() {
        let accs = mc_run(
            samples,
            seed.wrapping_add(mi as u64),
            |rng, len| {
                let mut accs = vec![MomentAccumulator::new(); mesh.n()];
                for _ in 0..len {
                    let walk = walk_elements(formula, mesh, 2, rng).unwrap();
                    for k in 1..=mesh.n() {
                        accs[k - 1].push(walk[k].homogeneous_norm().powi(4 * p as i32));
                    }
                }
                accs
            },
            |a: &mut Vec<MomentAccumulator>, b| {
                if a.is_empty() {
                    *a = b;
                } else {
                    for (x, y) in a.iter_mut().zip(&b) {
                        x.merge(y);
                    }
                }
            },
        );
        for k in 1..=mesh.n() {
            let t = mesh.nodes()[k];
            let moment = accs[k - 1].mean();
            rows.push(ScalingRow {
                n: mesh.n(),
                t,
                moment,
                ratio: moment / t.powi(2 * p as i32),
            });
        }
    }
    let max_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let xs: Vec<f64> = rows.iter().map(|r| r.t.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio.ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let bounded = slope.map(|s| s.abs() <= SCALING_SLOPE_BAND).unwrap_or(false);
    Ok(ScalingReport {
        p,
        rows,
        max_ratio,
        slope,
        bounded,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MarginalReport {
    pub samples: usize,
    pub ks: Vec<KsResult>,
    pub ks_pass: bool,
    pub significance: f64,
    /// Lévy area `A^{1,2}` of the endpoint; `None` for d = 1.
    pub area_mean: Option<f64>,
    pub area_mean_stderr: Option<f64>,
    pub area_variance: Option<f64>,
    pub area_variance_stderr: Option<f64>,
    pub area_pass: Option<bool>,
}

pub const KS_SIGNIFICANCE: f64 = 1e-3;

/// The Lévy area variance of enhanced Brownian motion over `[0,1]`.
pub const AREA_VARIANCE: f64 = 0.25;

/// Endpoint marginal of the walk against the Brownian law: per-coordinate
/// Kolmogorov-Smirnov tests and, for d >= 2, the `A^{1,2}` Lévy area
/// moments (mean 0, variance 1/4 within 4 stderr).
pub fn donsker_marginal_check(
    formula: &CubatureFormula,
    mesh: &Mesh,
    samples: usize,
    seed: u64,
) -> Result<MarginalReport> {
    let d = formula.d();
    #[derive(Default)]
    struct Acc {
        coords: Vec<Vec<f64>>,
        area: MomentAccumulator,
    }
    let acc = mc_run(
        samples,
        seed,
        |rng, len| {
            let mut acc = Acc {
                coords: vec![Vec::with_capacity(len); d],
                area: MomentAccumulator::new(),
            };
            for _ in 0..len {
                let walk = walk_elements(formula, mesh, 2, rng).unwrap();
                let last = walk.last().unwrap();
                let s = last.series();
                let al = last.alphabet();
                let off = usize::from(al.has_time_letter());
                let lvl1 = s.level(1);
                for j in 0..d {
                    acc.coords[j].push(lvl1[j + off]);
                }
                if d >= 2 {
                    let a = al.size();
                    let lvl2 = s.level(2);
                    let c12 = lvl2[off * a + off + 1];
                    let c21 = lvl2[(off + 1) * a + off];
                    acc.area.push(0.5 * (c12 - c21));
                }
            }
            acc
        },
        |a: &mut Acc, b| {
            if a.coords.is_empty() {
                *a = b;
            } else {
                for (x, y) in a.coords.iter_mut().zip(b.coords) {
                    x.extend(y);
                }
                a.area.merge(&b.area);
            }
        },
    );
    let ks: Vec<KsResult> = acc
        .coords
        .into_iter()
        .map(ks_test_standard_normal)
        .collect();
    let ks_pass = ks.iter().all(|r| r.p_value >= KS_SIGNIFICANCE);
    let (mut am, mut ams, mut av, mut avs, mut ap) = (None, None, None, None, None);
    if d >= 2 {
        let mean = acc.area.mean();
        let mean_se = acc.area.stderr();
        let var = acc.area.variance();
        let var_se = acc.area.variance_stderr();
        ap = Some(mean.abs() <= 4.0 * mean_se && (var - AREA_VARIANCE).abs() <= 4.0 * var_se);
        (am, ams, av, avs) = (Some(mean), Some(mean_se), Some(var), Some(var_se));
    }
    Ok(MarginalReport {
        samples,
        ks,
        ks_pass,
        significance: KS_SIGNIFICANCE,
        area_mean: am,
        area_mean_stderr: ams,
        area_variance: av,
        area_variance_stderr: avs,
        area_pass: ap,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionReport {
    /// `E||xi||^2` for one unrescaled draw.
    pub norm2_expectation: f64,
    /// Per mesh: `sum_k dt_k E||xi||^2`; equals `norm2_expectation` up to
    /// float roundoff (the sum telescopes).
    pub cond_i: Vec<(usize, f64)>,
    /// `a^{i,j} = E[A^{i,j}]` for `i < j`; 0 for cubature order >= 2.
    pub a: Vec<((usize, usize), f64)>,
    /// `b^{i,j} = E[X^i X^j]`; `delta_ij` for cubature order >= 2.
    pub b: Vec<((usize, usize), f64)>,
    /// Per mesh and eps in {0.5, 1}: the truncated second moment
    /// `sum_k dt_k E[1{sqrt(dt_k)||xi|| > eps} ||xi||^2]`.
    pub cond_v: Vec<(usize, f64, f64)>,
}

pub const COND_V_EPS: [f64; 2] = [0.5, 1.0];

/// Numeric values of the CLT conditions (i), (iii), (iv), (v) for the walk
/// driven by `formula` over each mesh. Exact weighted sums for discrete
/// formulas; seeded MC otherwise.
pub fn clt_condition_report(
    formula: &CubatureFormula,
    meshes: &[Mesh],
    mc: Option<(usize, u64)>,
) -> Result<ConditionReport> {
    let d = formula.d();
    // Per-draw records: (weight, ||xi||^2, A^{i,j} for i<j, X^i X^j sym).
    struct Draw {
        w: f64,
        norm2: f64,
        area: Vec<f64>,
        xprod: Vec<f64>,
    }
    let record = |w: f64, g: &GroupElement| -> Draw {
        let al = g.alphabet();
        let off = usize::from(al.has_time_letter());
        let a = al.size();
        let s = g.series();
        let lvl1 = s.level(1);
        let lvl2 = s.level(2);
        let mut area = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                let cij = lvl2[(i + off) * a + j + off];
                let cji = lvl2[(j + off) * a + i + off];
                area.push(0.5 * (cij - cji));
            }
        }
        let mut xprod = Vec::new();
        for i in 0..d {
            for j in 0..d {
                xprod.push(lvl1[i + off] * lvl1[j + off]);
            }
        }
        Draw {
            w,
            norm2: g.homogeneous_norm().powi(2),
            area,
            xprod,
        }
    };
    let draws: Vec<Draw> = match (formula.kind(), mc) {
        (crate::cubature::FormulaKind::Discrete(paths), None) => paths
            .iter()
            .map(|(w, p)| Ok(record(*w, &p.signature(2)?)))
            .collect::<Result<_>>()?,
        (_, Some((samples, seed))) => {
            let w = 1.0 / samples as f64;
            mc_run(
                samples,
                seed,
                |rng, len| {
                    (0..len)
                        .map(|_| record(w, &formula.sample(rng).signature(2).unwrap()))
                        .collect::<Vec<Draw>>()
                },
                |a: &mut Vec<Draw>, b| a.extend(b),
            )
        }
        (crate::cubature::FormulaKind::Generative(_), None) => {
            return Err(contract(
                "generative formulas need MC samples for the condition report",
            ))
        }
    };
    let wsum = |f: &dyn Fn(&Draw) -> f64| -> f64 {
        let mut s = KahanSum::new();
        for dr in &draws {
            s.add(dr.w * f(dr));
        }
        s.value()
    };
    let norm2_expectation = wsum(&|dr| dr.norm2);
    let mut cond_i = Vec::new();
    let mut cond_v = Vec::new();
    for mesh in meshes {
        let mut sum = KahanSum::new();
        for k in 1..=mesh.n() {
            sum.add(mesh.delta(k) * norm2_expectation);
        }
        cond_i.push((mesh.n(), sum.value()));
        for eps in COND_V_EPS {
            let mut sum = KahanSum::new();
            for k in 1..=mesh.n() {
                let dt = mesh.delta(k);
                let tail = wsum(&|dr| {
                    if dt * dr.norm2 > eps * eps {
                        dr.norm2
                    } else {
                        0.0
                    }
                });
                sum.add(dt * tail);
            }
            cond_v.push((mesh.n(), eps, sum.value()));
        }
    }
    let mut a = Vec::new();
    let mut pair = 0;
    for i in 0..d {
        for j in (i + 1)..d {
            a.push(((i + 1, j + 1), wsum(&|dr| dr.area[pair])));
            pair += 1;
        }
    }
    let mut b = Vec::new();
    for i in 0..d {
        for j in 0..d {
            b.push(((i + 1, j + 1), wsum(&|dr| dr.xprod[i * d + j])));
        }
    }
    Ok(ConditionReport {
        norm2_expectation,
        cond_i,
        a,
        b,
        cond_v,
    })
}

/// `max d(Xi_s, Xi_t) / |t-s|^alpha` over dyadic-scale node pairs:
/// for every scale `s = 2^j` the pairs `(k, k+s)` with `k` a multiple of
/// `s`, giving O(n log n) pairs.
pub fn holder_statistic(walk: &WalkSample, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(contract("holder exponent must lie in (0, 1)"));
    }
    let n = walk.mesh.n();
    let mut best: f64 = 0.0;
    let mut scale = 1;
    while scale <= n {
        let mut k = 0;
        while k + scale <= n {
            let dist = walk.elements[k].distance(&walk.elements[k + scale])?;
            let dt = walk.mesh.nodes()[k + scale] - walk.mesh.nodes()[k];
            best = best.max(dist / dt.powf(alpha));
            k += scale;
        }
        scale *= 2;
    }
    Ok(best)
}
