//! Vector-field systems and pathwise ODE integration along piecewise-linear
//! drivers, plus the Wong-Zakai reference sampler and the Black-Scholes
//! closed form used as acceptance oracles.
//!
//! Everything is Stratonovich-native: along a linear segment with spatial
//! slope `w` and time slope `hdot` the state solves the autonomous ODE
//! `y' = hdot V_0(y) + sum_i w^i V_i(y)`, integrated with the classical
//! 4th-order one-step method.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{contract, Error, Result};
use crate::path::PiecewiseLinearPath;

type Field = Box<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub struct VectorFieldSystem {
    dim: usize,
    d: usize,
    fields: Vec<Field>,
}

impl VectorFieldSystem {
    /// `fields[0]` is the drift `V_0` (paired with the time component of the
    /// driver); `fields[1..]` pair with the spatial coordinates.
    pub fn new(dim: usize, fields: Vec<Field>) -> Result<Self> {
        if fields.is_empty() {
            return Err(contract("need at least the drift field V_0"));
        }
        Ok(VectorFieldSystem {
            dim,
            d: fields.len() - 1,
            fields,
        })
    }

    /// Geometric model per coordinate: `V_i = sigma_i x_i e_i` driven by
    /// coordinate `i`, with the Stratonovich drift correction
    /// `V_0(x)_i = -1/2 sigma_i^2 x_i` so the Ito drift is zero.
    pub fn black_scholes(sigma: Vec<f64>) -> Result<Self> {
        let dim = sigma.len();
        if dim == 0 {
            return Err(contract("black-scholes needs at least one asset"));
        }
        let s0 = sigma.clone();
        let mut fields: Vec<Field> = vec![Box::new(move |x, out| {
            for i in 0..x.len() {
                out[i] = -0.5 * s0[i] * s0[i] * x[i];
            }
        })];
        for (i, s) in sigma.into_iter().enumerate() {
            fields.push(Box::new(move |x, out| {
                out.fill(0.0);
                out[i] = s * x[i];
            }));
        }
        VectorFieldSystem::new(dim, fields)
    }

    /// Linear fields `V_i(x) = A_i x`; `mats[0]` is the drift matrix.
    pub fn linear(dim: usize, mats: Vec<Vec<f64>>) -> Result<Self> {
        if mats.iter().any(|m| m.len() != dim * dim) {
            return Err(contract("linear system matrices must be dim x dim"));
        }
        let fields: Vec<Field> = mats
            .into_iter()
            .map(|m| -> Field {
                Box::new(move |x: &[f64], out: &mut [f64]| {
                    let n = x.len();
                    for i in 0..n {
                        let mut acc = 0.0;
                        for j in 0..n {
                            acc += m[i * n + j] * x[j];
                        }
                        out[i] = acc;
                    }
                })
            })
            .collect();
        VectorFieldSystem::new(dim, fields)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of spatial driving coordinates.
    pub fn d(&self) -> usize {
        self.d
    }

    fn eval(&self, i: usize, x: &[f64], out: &mut [f64]) {
        (self.fields[i])(x, out)
    }
}

#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub times: Vec<f64>,
    /// States flattened with stride `dim`.
    pub states: Vec<f64>,
    pub dim: usize,
}

impl SolutionPath {
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Linear interpolation of coordinate `c` at time `t`.
    pub fn value_at(&self, t: f64, c: usize) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.state(0)[c];
        }
        if t >= self.times[n - 1] {
            return self.terminal()[c];
        }
        let i = self.times.partition_point(|&s| s <= t);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (a, b) = (self.state(i - 1)[c], self.state(i)[c]);
        if t1 == t0 {
            return b;
        }
        a + (b - a) * (t - t0) / (t1 - t0)
    }
}

/// Integrates `dy = V_0(y) dh + sum_i V_i(y) dW^i` along the driver,
/// recording the state at every driver breakpoint. Blow-up (non-finite
/// state) reports the offending segment.
pub fn integrate_along_path(
    vf: &VectorFieldSystem,
    driver: &PiecewiseLinearPath,
    x0: &[f64],
    substeps_per_segment: usize,
) -> Result<SolutionPath> {
    if driver.d() != vf.d() {
        return Err(contract(format!(
            "driver has {} spatial coordinates, system expects {}",
            driver.d(),
            vf.d()
        )));
    }
    if x0.len() != vf.dim() {
        return Err(contract("x0 dimension mismatch"));
    }
    if substeps_per_segment == 0 {
        return Err(contract("need at least one substep per segment"));
    }
    let bp = driver.breakpoints();
    let d = vf.d();
    let dim = vf.dim();
    let mut times = Vec::with_capacity(bp.len());
    let mut states = Vec::with_capacity(bp.len() * dim);
    times.push(bp[0]);
    states.extend_from_slice(x0);
    let mut y = x0.to_vec();
    let mut slope = vec![0.0; d + 1];
    let mut scratch = Scratch::new(dim);
    for seg in 0..bp.len() - 1 {
        let (t0, t1) = (bp[seg], bp[seg + 1]);
        let dt = t1 - t0;
        if dt == 0.0 {
            times.push(t1);
            states.extend_from_slice(&y);
            continue;
        }
        // Constant slopes on the segment: time component then spatial.
        slope[0] = match driver.time_component() {
            Some(h) => (h.value_at(t1) - h.value_at(t0)) / dt,
            None => 0.0,
        };
        let a = driver.node(seg);
        let b = driver.node(seg + 1);
        for i in 0..d {
            slope[i + 1] = (b[i] - a[i]) / dt;
        }
        let h = dt / substeps_per_segment as f64;
        for _ in 0..substeps_per_segment {
            rk4_step(vf, &slope, h, &mut y, &mut scratch);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                segment: seg,
                t_start: t0,
                t_end: t1,
            });
        }
        times.push(t1);
        states.extend_from_slice(&y);
    }
    Ok(SolutionPath { times, states, dim })
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    f: Vec<f64>,
}

impl Scratch {
    fn new(dim: usize) -> Self {
        Scratch {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
            f: vec![0.0; dim],
        }
    }
}

/// Combined right-hand side `hdot V_0 + sum_i w^i V_i` at `x`.
fn rhs(vf: &VectorFieldSystem, slope: &[f64], x: &[f64], out: &mut [f64], f: &mut [f64]) {
    out.fill(0.0);
    for (i, &c) in slope.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        vf.eval(i, x, f);
        for (o, &v) in out.iter_mut().zip(f.iter()) {
            *o += c * v;
        }
    }
}

fn rk4_step(vf: &VectorFieldSystem, slope: &[f64], h: f64, y: &mut [f64], s: &mut Scratch) {
    let dim = y.len();
    rhs(vf, slope, y, &mut s.k1, &mut s.f);
    for i in 0..dim {
        s.tmp[i] = y[i] + 0.5 * h * s.k1[i];
    }
    rhs(vf, slope, &s.tmp, &mut s.k2, &mut s.f);
    for i in 0..dim {
        s.tmp[i] = y[i] + 0.5 * h * s.k2[i];
    }
    rhs(vf, slope, &s.tmp, &mut s.k3, &mut s.f);
    for i in 0..dim {
        s.tmp[i] = y[i] + h * s.k3[i];
    }
    rhs(vf, slope, &s.tmp, &mut s.k4, &mut s.f);
    for i in 0..dim {
        y[i] += h / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
}

pub const DEFAULT_SUBSTEPS: usize = 8;
pub const MAX_SUBSTEPS: usize = 256;

/// Integrates with `DEFAULT_SUBSTEPS`, doubling until two successive
/// terminal states agree to `1e-10` relative (capped at `MAX_SUBSTEPS`).
pub fn integrate_adaptive(
    vf: &VectorFieldSystem,
    driver: &PiecewiseLinearPath,
    x0: &[f64],
) -> Result<SolutionPath> {
    let mut sub = DEFAULT_SUBSTEPS;
    let mut sol = integrate_along_path(vf, driver, x0, sub)?;
    while sub < MAX_SUBSTEPS {
        let next = integrate_along_path(vf, driver, x0, sub * 2)?;
        let scale = next
            .terminal()
            .iter()
            .fold(1.0f64, |acc, &v| acc.max(v.abs()));
        let diff = sol
            .terminal()
            .iter()
            .zip(next.terminal())
            .fold(0.0f64, |acc, (&a, &b)| acc.max((a - b).abs()));
        sol = next;
        if diff <= 1e-10 * scale {
            break;
        }
        sub *= 2;
    }
    Ok(sol)
}

/// One Stratonovich reference sample: integrates along a fine
/// piecewise-linear Brownian interpolation with `fine_n` uniform steps and
/// the identity time component.
pub fn wong_zakai_reference(
    vf: &VectorFieldSystem,
    x0: &[f64],
    fine_n: usize,
    rng: &mut ChaCha8Rng,
    substeps: usize,
) -> Result<SolutionPath> {
    let d = vf.d();
    let dt = 1.0 / fine_n as f64;
    let mut breakpoints = Vec::with_capacity(fine_n + 1);
    let mut nodes = vec![0.0; d];
    breakpoints.push(0.0);
    for k in 1..=fine_n {
        breakpoints.push(k as f64 * dt);
        for j in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            nodes.push(nodes[(k - 1) * d + j] + dt.sqrt() * z);
        }
    }
    let driver = PiecewiseLinearPath::new(d, breakpoints, nodes)?.with_identity_time();
    integrate_along_path(vf, &driver, x0, substeps)
}

/// Zero-rate Black-Scholes call value.
pub fn black_scholes_exact(s0: f64, strike: f64, sigma: f64, maturity: f64) -> f64 {
    assert!(s0 > 0.0 && strike > 0.0 && sigma >= 0.0 && maturity >= 0.0);
    let sd = sigma * maturity.sqrt();
    if sd == 0.0 {
        return (s0 - strike).max(0.0);
    }
    let d1 = ((s0 / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    s0 * crate::stats::normal_cdf(d1) - strike * crate::stats::normal_cdf(d2)
}
