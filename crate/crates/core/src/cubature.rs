//! Cubature formulas on Wiener space and the moment-matching checker.
//!
//! A formula of order `m` is a path-valued random variable whose expected
//! step-`m` signature matches the expected signature of Brownian motion
//! (with the time letter graded at weight 2 when a time component is
//! declared). Discrete formulas carry an explicit weighted list of paths
//! and can be checked exactly; generative formulas are checked by seeded
//! Monte Carlo.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::path::{PiecewiseLinearPath, ScalarPath};
use crate::stats::{mc_run, KahanSum, MomentAccumulator};
use crate::tensor::{Alphabet, TensorSeries};

pub type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> PiecewiseLinearPath + Send + Sync>;

pub enum FormulaKind {
    /// Finitely many paths with positive weights summing to 1.
    Discrete(Vec<(f64, PiecewiseLinearPath)>),
    /// Draws one path per call from the supplied generator.
    Generative(Sampler),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeComponent {
    None,
    Identity,
    Custom,
}

pub struct CubatureFormula {
    d: usize,
    order: usize,
    time: TimeComponent,
    kind: FormulaKind,
}

const WEIGHT_SUM_TOL: f64 = 1e-14;

impl CubatureFormula {
    pub fn discrete(
        d: usize,
        order: usize,
        paths: Vec<(f64, PiecewiseLinearPath)>,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(contract("discrete formula needs at least one path"));
        }
        let mut sum = KahanSum::new();
        for (w, p) in &paths {
            if !(*w > 0.0) {
                return Err(contract(format!("weights must be positive, got {w}")));
            }
            sum.add(*w);
            if p.d() != d {
                return Err(contract(format!(
                    "path dimension {} does not match formula dimension {d}",
                    p.d()
                )));
            }
            if p.node(0).iter().any(|&x| x != 0.0) {
                return Err(contract("formula paths must start at 0"));
            }
            if (p.duration() - 1.0).abs() > 1e-12 {
                return Err(contract("formula paths must live on [0,1]"));
            }
        }
        if (sum.value() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(contract(format!(
                "weights must sum to 1, got {}",
                sum.value()
            )));
        }
        let time = match paths[0].1.time_component() {
            None => TimeComponent::None,
            Some(_) => TimeComponent::Custom,
        };
        if paths
            .iter()
            .any(|(_, p)| p.has_time_component() != (time != TimeComponent::None))
        {
            return Err(contract(
                "all paths must agree on whether a time component is present",
            ));
        }
        Ok(CubatureFormula {
            d,
            order,
            time,
            kind: FormulaKind::Discrete(paths),
        })
    }

    pub fn generative(d: usize, order: usize, time: TimeComponent, sampler: Sampler) -> Self {
        CubatureFormula {
            d,
            order,
            time,
            kind: FormulaKind::Generative(sampler),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn time_component(&self) -> TimeComponent {
        self.time
    }

    pub fn kind(&self) -> &FormulaKind {
        &self.kind
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, FormulaKind::Discrete(_))
    }

    pub fn has_time_component(&self) -> bool {
        self.time != TimeComponent::None
    }

    /// Alphabet over which signatures of this formula's paths live.
    pub fn alphabet(&self) -> Result<Alphabet> {
        Alphabet::new(self.d, self.has_time_component())
    }

    /// Draws one path on `[0,1]`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> PiecewiseLinearPath {
        match &self.kind {
            FormulaKind::Generative(s) => s(rng),
            FormulaKind::Discrete(paths) => {
                let u: f64 = rand::Rng::random(rng);
                let mut acc = 0.0;
                for (w, p) in paths {
                    acc += w;
                    if u < acc {
                        return p.clone();
                    }
                }
                paths.last().unwrap().1.clone()
            }
        }
    }
}

/// The 2d straight lines `t -> t * (±sqrt(d) e_i)` with equal weights;
/// matches the Brownian signature up to graded degree 3 and carries the
/// identity time component.
pub fn degree3_formula(d: usize) -> Result<CubatureFormula> {
    let w = 1.0 / (2 * d) as f64;
    let s = (d as f64).sqrt();
    let mut paths = Vec::with_capacity(2 * d);
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[i] = sign * s;
            paths.push((w, PiecewiseLinearPath::linear(&v, 1.0)?.with_identity_time()));
        }
    }
    CubatureFormula::discrete(d, 3, paths).map(|mut f| {
        f.time = TimeComponent::Identity;
        f
    })
}

/// Wong-Zakai: the line `t -> t z` with `z` standard normal; order 3.
pub fn wong_zakai_formula(d: usize) -> Result<CubatureFormula> {
    Alphabet::spatial(d)?;
    Ok(CubatureFormula::generative(
        d,
        3,
        TimeComponent::Identity,
        Box::new(move |rng| {
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            PiecewiseLinearPath::linear(&z, 1.0)
                .unwrap()
                .with_identity_time()
        }),
    ))
}

/// Ninomiya-Victoir order-5 formula. One coordinate moves per subinterval:
/// time runs at slope `1/eps` on `[0, eps/2]` and `]1-eps/2, 1]` with
/// `eps = 1/(d+1)`; the spatial coordinates move one after another in
/// increasing order when the Bernoulli flip is -1 and decreasing order
/// when it is +1, coordinate `i` picking up a standard normal increment.
pub fn ninomiya_victoir_formula(d: usize) -> Result<CubatureFormula> {
    Alphabet::with_time(d)?;
    Ok(CubatureFormula::generative(
        d,
        5,
        TimeComponent::Custom,
        Box::new(move |rng| {
            let flip_up: bool = rand::Rng::random(rng);
            let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            nv_path(d, flip_up, &z)
        }),
    ))
}

fn nv_path(d: usize, flip_up: bool, z: &[f64]) -> PiecewiseLinearPath {
    let eps = 1.0 / (d + 1) as f64;
    // Breakpoints 0, eps/2, eps/2 + eps, ..., eps/2 + d*eps = 1 - eps/2, 1.
    let mut breakpoints = Vec::with_capacity(d + 3);
    breakpoints.push(0.0);
    for j in 0..=d {
        breakpoints.push(eps / 2.0 + j as f64 * eps);
    }
    breakpoints.push(1.0);
    let mut nodes = vec![0.0; (d + 3) * d];
    let mut h_values = vec![0.5; d + 3];
    h_values[0] = 0.0;
    h_values[d + 2] = 1.0;
    let mut current = vec![0.0; d];
    for j in 0..d {
        // Subinterval j+1 (after the initial time run) moves one coordinate.
        let coord = if flip_up { d - 1 - j } else { j };
        current[coord] += z[coord];
        nodes[(j + 2) * d..(j + 3) * d].copy_from_slice(&current);
    }
    nodes[(d + 2) * d..].copy_from_slice(&current);
    let h = ScalarPath::new(breakpoints.clone(), h_values).unwrap();
    PiecewiseLinearPath::new(d, breakpoints, nodes)
        .unwrap()
        .with_time(h)
        .unwrap()
}

/// `E[S_m(B)] = exp(e_0 + 1/2 sum_i e_i e_i)` truncated at graded degree
/// `m`; the drift letter appears only when the alphabet has one.
pub fn expected_brownian_signature(alphabet: Alphabet, m: usize) -> Result<TensorSeries> {
    let mut gen = TensorSeries::zero(alphabet, m)?;
    if alphabet.has_time_letter() {
        gen.level_mut(1)[0] = 1.0;
    }
    if m >= 2 {
        let a = alphabet.size();
        let off = usize::from(alphabet.has_time_letter());
        let lvl2 = gen.level_mut(2);
        for i in 0..alphabet.d() {
            lvl2[(i + off) * a + (i + off)] = 0.5;
        }
    }
    gen.exp()
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentRow {
    pub word: String,
    pub degree: usize,
    pub cubature: f64,
    pub target: f64,
    pub diff: f64,
    pub stderr: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub m: usize,
    pub mode: String,
    pub tol: f64,
    pub rows: Vec<MomentRow>,
    pub max_diff: f64,
    pub passed: bool,
}

impl MomentReport {
    pub fn failing(&self) -> impl Iterator<Item = &MomentRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

#[derive(Clone, Copy, Debug)]
pub enum CheckMode {
    Exact,
    Mc { samples: usize, seed: u64 },
}

/// Per-coefficient accumulators over the flattened levels of a series.
#[derive(Default)]
struct CoeffAccum {
    levels: Vec<Vec<MomentAccumulator>>,
}

impl CoeffAccum {
    fn push(&mut self, s: &TensorSeries) {
        if self.levels.is_empty() {
            self.levels = (0..=s.level_cap())
                .map(|k| vec![MomentAccumulator::new(); s.level(k).len()])
                .collect();
        }
        for k in 0..=s.level_cap() {
            for (acc, &x) in self.levels[k].iter_mut().zip(s.level(k)) {
                acc.push(x);
            }
        }
    }

    fn merge(&mut self, other: CoeffAccum) {
        if self.levels.is_empty() {
            self.levels = other.levels;
            return;
        }
        for (mine, theirs) in self.levels.iter_mut().zip(&other.levels) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                a.merge(b);
            }
        }
    }
}

/// Compares the formula's expected signature coefficients against the
/// Brownian targets for every word of graded degree <= `m`. Exact mode
/// (Discrete only) sums weighted signatures with compensated accumulation;
/// MC mode passes a word when `|diff| <= max(tol, 4 stderr)`.
pub fn check_moments(
    formula: &CubatureFormula,
    m: usize,
    mode: CheckMode,
    tol: f64,
) -> Result<MomentReport> {
    let alphabet = formula.alphabet()?;
    let target = expected_brownian_signature(alphabet, m)?;
    let (means, errs, mode_name) = match (&formula.kind, mode) {
        (FormulaKind::Discrete(paths), CheckMode::Exact) => {
            let mut sums: Vec<Vec<KahanSum>> = (0..=m)
                .map(|k| vec![KahanSum::new(); target.level(k).len()])
                .collect();
            for (w, p) in paths {
                let sig = p.signature(m)?;
                for k in 0..=m {
                    for (s, &x) in sums[k].iter_mut().zip(sig.series().level(k)) {
                        s.add(w * x);
                    }
                }
            }
            let means: Vec<Vec<f64>> = sums
                .iter()
                .map(|lvl| lvl.iter().map(|s| s.value()).collect())
                .collect();
            (means, None, "exact".to_string())
        }
        (FormulaKind::Generative(_), CheckMode::Exact) => {
            return Err(Error::Unsupported(
                "exact moment check requires a discrete formula".to_string(),
            ))
        }
        (_, CheckMode::Mc { samples, seed }) => {
            let acc = mc_run(
                samples,
                seed,
                |rng, len| {
                    let mut acc = CoeffAccum::default();
                    for _ in 0..len {
                        let p = formula.sample(rng);
                        acc.push(p.signature(m).unwrap().series());
                    }
                    acc
                },
                |a, b| a.merge(b),
            );
            let means: Vec<Vec<f64>> = acc
                .levels
                .iter()
                .map(|lvl| lvl.iter().map(|a| a.mean()).collect())
                .collect();
            let errs: Vec<Vec<f64>> = acc
                .levels
                .iter()
                .map(|lvl| lvl.iter().map(|a| a.stderr()).collect())
                .collect();
            (means, Some(errs), format!("mc:{samples}:{seed}"))
        }
    };

    let mut rows = Vec::new();
    let mut max_diff: f64 = 0.0;
    for k in 1..=m {
        for idx in 0..target.level(k).len() {
            if !target.word_allowed(k, idx) {
                continue;
            }
            let cub = means[k][idx];
            let tgt = target.level(k)[idx];
            let diff = cub - tgt;
            let se = errs.as_ref().map(|e| e[k][idx]);
            let bound = match se {
                None => tol,
                Some(se) => tol.max(4.0 * se),
            };
            let pass = diff.abs() <= bound;
            max_diff = max_diff.max(diff.abs());
            rows.push(MomentRow {
                word: target.word_string(k, idx),
                degree: target.word_degree(k, idx),
                cubature: cub,
                target: tgt,
                diff,
                stderr: se,
                pass,
            });
        }
    }
    let passed = rows.iter().all(|r| r.pass);
    Ok(MomentReport {
        m,
        mode: mode_name,
        tol,
        rows,
        max_diff,
        passed,
    })
}

#[derive(Serialize, Deserialize)]
struct DiscreteRepr {
    d: usize,
    m: usize,
    paths: Vec<WeightedPathRepr>,
}

#[derive(Serialize, Deserialize)]
struct WeightedPathRepr {
    weight: f64,
    path: PiecewiseLinearPath,
}

/// Reads a discrete formula from its JSON form
/// `{d, m, paths: [{weight, path}]}`.
pub fn discrete_formula_from_json(text: &str) -> Result<CubatureFormula> {
    let repr: DiscreteRepr = serde_json::from_str(text)?;
    CubatureFormula::discrete(
        repr.d,
        repr.m,
        repr.paths.into_iter().map(|w| (w.weight, w.path)).collect(),
    )
}

pub fn discrete_formula_to_json(formula: &CubatureFormula) -> Result<String> {
    match &formula.kind {
        FormulaKind::Discrete(paths) => {
            let repr = DiscreteRepr {
                d: formula.d,
                m: formula.order,
                paths: paths
                    .iter()
                    .map(|(w, p)| WeightedPathRepr {
                        weight: *w,
                        path: p.clone(),
                    })
                    .collect(),
            };
            Ok(serde_json::to_string_pretty(&repr)?)
        }
        FormulaKind::Generative(_) => Err(Error::Unsupported(
            "generative formulas have no JSON form".to_string(),
        )),
    }
}

/// Resolves `builtin:deg3`, `builtin:wz`, `builtin:nv` or a JSON file path.
pub fn resolve_formula(spec: &str, d: usize) -> Result<CubatureFormula> {
    match spec {
        "builtin:deg3" => degree3_formula(d),
        "builtin:wz" => wong_zakai_formula(d),
        "builtin:nv" => ninomiya_victoir_formula(d),
        file => {
            let text = std::fs::read_to_string(file)?;
            let f = discrete_formula_from_json(&text)?;
            if f.d() != d {
                return Err(contract(format!(
                    "formula file has d={}, requested d={d}",
                    f.d()
                )));
            }
            Ok(f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chunk_rng;

    #[test]
    fn degree3_weights_and_endpoints() {
        for d in 1..=3 {
            let f = degree3_formula(d).unwrap();
            let FormulaKind::Discrete(paths) = f.kind() else {
                panic!()
            };
            assert_eq!(paths.len(), 2 * d);
            let mut mean = vec![0.0; d];
            let mut cov = vec![0.0; d * d];
            for (w, p) in paths {
                assert!((w - 1.0 / (2 * d) as f64).abs() < 1e-15);
                let e = p.endpoint();
                for i in 0..d {
                    mean[i] += w * e[i];
                    for j in 0..d {
                        cov[i * d + j] += w * e[i] * e[j];
                    }
                }
            }
            for i in 0..d {
                assert!(mean[i].abs() < 1e-14);
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((cov[i * d + j] - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn degree3_passes_m3_fails_m4() {
        for d in 1..=3 {
            let f = degree3_formula(d).unwrap();
            let r3 = check_moments(&f, 3, CheckMode::Exact, 1e-13).unwrap();
            assert!(r3.passed, "d={d}: {:?}", r3.failing().next());
            let r4 = check_moments(&f, 4, CheckMode::Exact, 1e-13).unwrap();
            assert!(!r4.passed, "d={d} unexpectedly matches level 4");
            assert!(r4.failing().all(|r| r.degree == 4));
        }
    }

    #[test]
    fn degree3_d2_failing_word_value() {
        // Coefficient of (1,1,2,2) vanishes on every axis line but the
        // Brownian target is 1/2 * 1/2 * 1/2 = 1/8.
        let f = degree3_formula(2).unwrap();
        let r = check_moments(&f, 4, CheckMode::Exact, 1e-13).unwrap();
        let row = r.rows.iter().find(|r| r.word == "1122").unwrap();
        assert!((row.target - 0.125).abs() < 1e-15);
        assert!(row.cubature.abs() < 1e-15);
        assert!(!row.pass);
    }

    #[test]
    fn expected_signature_d1_m2_spatial() {
        let s = expected_brownian_signature(Alphabet::spatial(1).unwrap(), 2).unwrap();
        assert_eq!(s.scalar(), 1.0);
        assert_eq!(s.level(1), &[0.0]);
        assert_eq!(s.level(2), &[0.5]);
    }

    #[test]
    fn expected_signature_odd_words_vanish() {
        let s = expected_brownian_signature(Alphabet::with_time(2).unwrap(), 5).unwrap();
        for k in 1..=5 {
            for idx in 0..s.level(k).len() {
                if s.word_degree(k, idx) % 2 == 1 {
                    assert_eq!(s.level(k)[idx], 0.0, "word {}", s.word_string(k, idx));
                }
            }
        }
    }

    #[test]
    fn expected_signature_matches_mc_iterated_integrals() {
        // Stratonovich iterated integrals of Brownian motion, d=2, m=4,
        // via fine piecewise-linear interpolations.
        let al = Alphabet::spatial(2).unwrap();
        let target = expected_brownian_signature(al, 4).unwrap();
        let fine = 64;
        let acc = mc_run(
            20_000,
            9119,
            |rng, len| {
                let mut acc = CoeffAccum::default();
                for _ in 0..len {
                    let mut nodes = vec![0.0; 2];
                    let dt = 1.0 / fine as f64;
                    for i in 0..fine {
                        for k in 0..2 {
                            let z: f64 = StandardNormal.sample(rng);
                            nodes.push(nodes[i * 2 + k] + dt.sqrt() * z);
                        }
                    }
                    let bp: Vec<f64> = (0..=fine).map(|i| i as f64 * dt).collect();
                    let p = PiecewiseLinearPath::new(2, bp, nodes).unwrap();
                    acc.push(p.signature(4).unwrap().series());
                }
                acc
            },
            |a, b| a.merge(b),
        );
        for k in 1..=4 {
            for idx in 0..target.level(k).len() {
                let mean = acc.levels[k][idx].mean();
                let se = acc.levels[k][idx].stderr();
                let tgt = target.level(k)[idx];
                // 1/fine interpolation bias on top of the MC band.
                assert!(
                    (mean - tgt).abs() <= 4.0 * se + 0.5 / fine as f64,
                    "word {}: mc {mean} vs {tgt} (se {se})",
                    target.word_string(k, idx)
                );
            }
        }
    }

    #[test]
    fn wong_zakai_endpoint_is_standard_normal() {
        let f = wong_zakai_formula(2).unwrap();
        let mut rng = chunk_rng(7, 0);
        let mut acc = [MomentAccumulator::new(), MomentAccumulator::new()];
        let mut cross = MomentAccumulator::new();
        for _ in 0..50_000 {
            let p = f.sample(&mut rng);
            let e = p.endpoint();
            acc[0].push(e[0]);
            acc[1].push(e[1]);
            cross.push(e[0] * e[1]);
        }
        for a in &acc {
            assert!(a.mean().abs() < 4.0 * a.stderr());
            assert!((a.variance() - 1.0).abs() < 4.0 * a.variance_stderr());
        }
        assert!(cross.mean().abs() < 4.0 * cross.stderr());
    }

    #[test]
    fn wong_zakai_passes_m3_fails_level4() {
        let f = wong_zakai_formula(2).unwrap();
        let r3 = check_moments(&f, 3, CheckMode::Mc { samples: 200_000, seed: 11 }, 1e-12).unwrap();
        assert!(r3.passed, "{:?}", r3.failing().next());
        let r5 = check_moments(&f, 5, CheckMode::Mc { samples: 200_000, seed: 11 }, 1e-12).unwrap();
        assert!(!r5.passed);
        // E[(int W^1 dW^2)^2] = 2 c_1212 + 4 c_1122 by the shuffle identity:
        // 1/2 for Brownian motion, 1/4 for the chord.
        let row = |w: &str| r5.rows.iter().find(|r| r.word == w).unwrap();
        let (a, b) = (row("1212"), row("1122"));
        let target = 2.0 * a.target + 4.0 * b.target;
        let cub = 2.0 * a.cubature + 4.0 * b.cubature;
        let se = 2.0 * a.stderr.unwrap() + 4.0 * b.stderr.unwrap();
        assert!((target - 0.5).abs() < 1e-15);
        assert!((cub - 0.25).abs() < 10.0 * se);
        assert!((target - cub).abs() > 10.0 * se);
    }

    #[test]
    fn nv_path_structure() {
        for d in 1..=3 {
            let eps = 1.0 / (d + 1) as f64;
            for flip_up in [false, true] {
                let z: Vec<f64> = (0..d).map(|i| (i + 1) as f64).collect();
                let p = nv_path(d, flip_up, &z);
                let h = p.time_component().unwrap();
                assert_eq!(h.value_at(0.0), 0.0);
                assert_eq!(h.value_at(1.0), 1.0);
                assert!((h.lipschitz_constant() - (d + 1) as f64).abs() < 1e-12);
                assert!((h.value_at(eps / 2.0) - 0.5).abs() < 1e-15);
                // One moving coordinate per subinterval.
                for seg in 0..p.num_segments() {
                    let a = p.node(seg);
                    let b = p.node(seg + 1);
                    let moving = (0..d).filter(|&k| a[k] != b[k]).count();
                    assert!(moving <= 1, "segment {seg} moves {moving} coordinates");
                }
                for (k, zi) in z.iter().enumerate() {
                    assert!((p.endpoint()[k] - zi).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn nv_flip_orders_coordinates() {
        let p = nv_path(2, false, &[1.0, 10.0]);
        // Increasing order: coordinate 1 moves before coordinate 2.
        assert_eq!(p.node(2), &[1.0, 0.0]);
        let q = nv_path(2, true, &[1.0, 10.0]);
        assert_eq!(q.node(2), &[0.0, 10.0]);
    }

    #[test]
    fn nv_passes_m5_mc() {
        let f = ninomiya_victoir_formula(2).unwrap();
        let r = check_moments(&f, 5, CheckMode::Mc { samples: 400_000, seed: 5 }, 1e-12).unwrap();
        assert!(
            r.passed,
            "failing words: {:?}",
            r.failing().map(|x| x.word.clone()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn exact_mode_rejects_generative() {
        let f = wong_zakai_formula(1).unwrap();
        assert!(matches!(
            check_moments(&f, 3, CheckMode::Exact, 1e-13),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sampler_determinism() {
        let f = ninomiya_victoir_formula(3).unwrap();
        let draw = |seed| {
            let mut rng = chunk_rng(seed, 0);
            (0..10)
                .map(|_| f.sample(&mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(42);
        let b = draw(42);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.breakpoints(), q.breakpoints());
            assert_eq!(p.endpoint(), q.endpoint());
        }
    }

    #[test]
    fn discrete_json_round_trip() {
        let f = degree3_formula(2).unwrap();
        let text = discrete_formula_to_json(&f).unwrap();
        let g = discrete_formula_from_json(&text).unwrap();
        assert_eq!(g.d(), 2);
        assert_eq!(g.order(), 3);
        let r = check_moments(&g, 3, CheckMode::Exact, 1e-13).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn discrete_rejects_bad_weights() {
        let line = PiecewiseLinearPath::linear(&[1.0], 1.0).unwrap();
        assert!(CubatureFormula::discrete(1, 1, vec![(0.6, line.clone()), (0.6, line)]).is_err());
    }
}
