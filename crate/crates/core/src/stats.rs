//! Shared numerical utilities: compensated summation, mergeable moment
//! accumulators, a one-sample Kolmogorov-Smirnov test against the standard
//! normal, least-squares slope fits, and the seed-derivation scheme used by
//! all Monte Carlo drivers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Neumaier-compensated accumulator. Deterministic for a fixed order of
/// `add` calls.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming mean/variance accumulator (Welford), mergeable via Chan's
/// update. Merging in a fixed order keeps results independent of the
/// worker count.
#[derive(Clone, Copy, Debug, Default)]
pub struct MomentAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MomentAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MomentAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    /// Standard error of the sample variance (moment-based, no normality
    /// assumption): `sqrt((m4 - var^2)/n)` requires fourth moments, which we
    /// do not track; this uses the Gaussian-form approximation
    /// `var * sqrt(2/(n-1))` and is only used for wide 4-sigma bands.
    pub fn variance_stderr(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            self.variance() * (2.0 / (self.n - 1) as f64).sqrt()
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov distribution tail `Q(lambda) = P(sup > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample KS test of `data` against the standard normal. `data` is
/// consumed for in-place sorting.
pub fn ks_test_standard_normal(mut data: Vec<f64>) -> KsResult {
    data.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = data.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in data.iter().enumerate() {
        let cdf = normal_cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_tail(lambda),
    }
}

/// Least-squares slope of `y` against `x`. Returns `None` with fewer than
/// two distinct abscissae.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Number of samples per RNG stream. Each chunk of this many samples draws
/// from its own counter-mode stream, so results do not depend on how chunks
/// are scheduled across workers.
pub const MC_CHUNK: usize = 4096;

/// Derives the RNG for chunk `chunk` of the run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk + 1);
    rng
}

/// Runs `samples` Monte Carlo draws split into fixed-size chunks, each with
/// its own derived RNG stream, evaluated in parallel and reduced in chunk
/// order. The result is bit-identical for any worker count.
pub fn mc_run<A, F, M>(samples: usize, seed: u64, per_chunk: F, merge: M) -> A
where
    A: Send + Default,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
    M: Fn(&mut A, A),
{
    let chunks: Vec<(u64, usize)> = (0..samples.div_ceil(MC_CHUNK))
        .map(|c| (c as u64, MC_CHUNK.min(samples - c * MC_CHUNK)))
        .collect();
    let partials: Vec<A> = chunks
        .par_iter()
        .map(|&(c, len)| {
            let mut rng = chunk_rng(seed, c);
            per_chunk(&mut rng, len)
        })
        .collect();
    let mut acc = A::default();
    for p in partials {
        merge(&mut acc, p);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kahan_beats_naive_on_adversarial_order() {
        let mut k = KahanSum::new();
        k.add(1e16);
        for _ in 0..1000 {
            k.add(1.0);
        }
        k.add(-1e16);
        assert_eq!(k.value(), 1000.0);
    }

    #[test]
    fn welford_merge_matches_sequential() {
        let mut rng = chunk_rng(11, 0);
        let data: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..3.0)).collect();
        let mut whole = MomentAccumulator::new();
        for &x in &data {
            whole.push(x);
        }
        let mut left = MomentAccumulator::new();
        let mut right = MomentAccumulator::new();
        for &x in &data[..400] {
            left.push(x);
        }
        for &x in &data[400..] {
            right.push(x);
        }
        left.merge(&right);
        assert!((whole.mean() - left.mean()).abs() < 1e-12);
        assert!((whole.variance() - left.variance()).abs() < 1e-12);
    }

    #[test]
    fn ks_accepts_normal_rejects_shifted() {
        let mut rng = chunk_rng(12, 0);
        let normal: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let r = ks_test_standard_normal(normal.clone());
        assert!(r.p_value > 1e-3, "p = {}", r.p_value);

        let shifted: Vec<f64> = normal.iter().map(|&x| x + 0.1).collect();
        let r = ks_test_standard_normal(shifted);
        assert!(r.p_value < 1e-3, "p = {}", r.p_value);
    }

    #[test]
    fn slope_fit_exact_on_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|&v| 2.5 * v - 1.0).collect();
        assert!((ls_slope(&x, &y).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn mc_run_worker_count_invariant() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| {
                mc_run(
                    10_000,
                    99,
                    |rng, len| {
                        let mut acc = MomentAccumulator::new();
                        for _ in 0..len {
                            acc.push(StandardNormal.sample(rng));
                        }
                        acc
                    },
                    |a: &mut MomentAccumulator, b| a.merge(&b),
                )
            })
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.mean().to_bits(), four.mean().to_bits());
        assert_eq!(one.variance().to_bits(), four.variance().to_bits());
    }
}
