//! Arithmetic in the truncated tensor algebra over `d` letters, optionally
//! extended by a time letter of grading weight 2, together with the
//! associated nilpotent group: truncated exp/log, dilation, homogeneous
//! norms and a Lie-membership check.
//!
//! Words are stored densely per level in lexicographic order, letters
//! ordered `0 < 1 < ... < d` (letter 0 is the time letter when present).
//! A word `w` has graded degree `deg(w) = |w| + #{zero letters in w}`;
//! coefficients of words with `deg(w) > m` are identically zero.

mod serde_repr;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{contract, Error, Result};

/// Largest supported number of spatial letters.
pub const MAX_D: usize = 6;
/// Largest supported truncation level.
pub const MAX_LEVEL: usize = 6;

/// The letter set: spatial letters `1..=d`, plus letter `0` of grading
/// weight 2 when a time component is carried along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    d: usize,
    has_time_letter: bool,
}

impl Alphabet {
    pub fn new(d: usize, has_time_letter: bool) -> Result<Self> {
        if d < 1 || d > MAX_D {
            return Err(contract(format!("alphabet requires 1 <= d <= {MAX_D}, got {d}")));
        }
        Ok(Alphabet { d, has_time_letter })
    }

    pub fn spatial(d: usize) -> Result<Self> {
        Self::new(d, false)
    }

    pub fn with_time(d: usize) -> Result<Self> {
        Self::new(d, true)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_time_letter(&self) -> bool {
        self.has_time_letter
    }

    /// Number of letters, i.e. the branching factor of the word tree.
    pub fn size(&self) -> usize {
        self.d + usize::from(self.has_time_letter)
    }

    /// Letter for digit `i` in `0..size()`.
    pub fn letter(&self, digit: usize) -> usize {
        if self.has_time_letter {
            digit
        } else {
            digit + 1
        }
    }

    /// Grading weight of the letter at `digit`: 2 for the time letter, 1 otherwise.
    fn digit_weight(&self, digit: usize) -> usize {
        if self.has_time_letter && digit == 0 {
            2
        } else {
            1
        }
    }
}

/// Precomputed layout for one `(alphabet, m)` pair: level sizes and the
/// graded degree of every word.
#[derive(Debug)]
pub(crate) struct Shape {
    pub alphabet: Alphabet,
    pub m: usize,
    /// `sizes[k] = size()^k`, `k = 0..=m`.
    pub sizes: Vec<usize>,
    /// `degree[k][idx]` = graded degree of the word at `(k, idx)`.
    pub degree: Vec<Vec<u8>>,
}

impl Shape {
    fn build(alphabet: Alphabet, m: usize) -> Shape {
        let a = alphabet.size();
        let mut sizes = Vec::with_capacity(m + 1);
        let mut degree = Vec::with_capacity(m + 1);
        let mut size = 1usize;
        for k in 0..=m {
            sizes.push(size);
            let mut deg = vec![0u8; size];
            if k > 0 {
                let prev: &Vec<u8> = &degree[k - 1];
                for idx in 0..size {
                    let first = idx / sizes[k - 1];
                    let rest = idx % sizes[k - 1];
                    deg[idx] = prev[rest] + alphabet.digit_weight(first) as u8;
                }
            }
            degree.push(deg);
            size *= a;
        }
        Shape {
            alphabet,
            m,
            sizes,
            degree,
        }
    }

    pub fn allowed(&self, level: usize, idx: usize) -> bool {
        (self.degree[level][idx] as usize) <= self.m
    }

    /// Letters of the word at `(level, idx)`, most significant first.
    pub fn word(&self, level: usize, idx: usize) -> Vec<usize> {
        let a = self.alphabet.size();
        let mut out = vec![0usize; level];
        let mut rest = idx;
        for pos in (0..level).rev() {
            out[pos] = self.alphabet.letter(rest % a);
            rest /= a;
        }
        out
    }
}

fn shape_cache() -> &'static Mutex<HashMap<(usize, bool, usize), Arc<Shape>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool, usize), Arc<Shape>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(crate) fn shape(alphabet: Alphabet, m: usize) -> Result<Arc<Shape>> {
    if m < 1 || m > MAX_LEVEL {
        return Err(contract(format!(
            "level cap must satisfy 1 <= m <= {MAX_LEVEL}, got {m}"
        )));
    }
    let key = (alphabet.d, alphabet.has_time_letter, m);
    let mut cache = shape_cache().lock().unwrap();
    Ok(cache
        .entry(key)
        .or_insert_with(|| Arc::new(Shape::build(alphabet, m)))
        .clone())
}

/// Element of the truncated tensor algebra: one real coefficient per word
/// of graded degree at most `m`, dense per level.
#[derive(Clone, Debug)]
pub struct TensorSeries {
    shape: Arc<Shape>,
    levels: Vec<Vec<f64>>,
}

impl TensorSeries {
    pub fn zero(alphabet: Alphabet, m: usize) -> Result<Self> {
        let shape = shape(alphabet, m)?;
        let levels = shape.sizes.iter().map(|&s| vec![0.0; s]).collect();
        Ok(TensorSeries { shape, levels })
    }

    pub fn unit(alphabet: Alphabet, m: usize) -> Result<Self> {
        let mut s = Self::zero(alphabet, m)?;
        s.levels[0][0] = 1.0;
        Ok(s)
    }

    /// The basis element `e_letter` (letter 0 is the time letter).
    pub fn basis(alphabet: Alphabet, m: usize, letter: usize) -> Result<Self> {
        let digit = if alphabet.has_time_letter {
            letter
        } else {
            letter
                .checked_sub(1)
                .ok_or_else(|| contract("letter 0 requires a time-letter alphabet"))?
        };
        if digit >= alphabet.size() {
            return Err(contract(format!("letter {letter} outside alphabet")));
        }
        let mut s = Self::zero(alphabet, m)?;
        s.levels[1][digit] = 1.0;
        Ok(s)
    }

    /// Series with level-1 part `v` (in letter order: time first when present)
    /// and zero everywhere else.
    pub fn from_level1(alphabet: Alphabet, m: usize, v: &[f64]) -> Result<Self> {
        if v.len() != alphabet.size() {
            return Err(contract(format!(
                "level-1 vector has {} entries, alphabet has {} letters",
                v.len(),
                alphabet.size()
            )));
        }
        let mut s = Self::zero(alphabet, m)?;
        s.levels[1].copy_from_slice(v);
        Ok(s)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.shape.alphabet
    }

    pub fn level_cap(&self) -> usize {
        self.shape.m
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.levels[k]
    }

    pub fn scalar(&self) -> f64 {
        self.levels[0][0]
    }

    #[cfg(test)]
    pub(crate) fn shape(&self) -> &Arc<Shape> {
        &self.shape
    }

    pub fn same_shape(&self, other: &TensorSeries) -> bool {
        Arc::ptr_eq(&self.shape, &other.shape)
            || (self.shape.alphabet == other.shape.alphabet && self.shape.m == other.shape.m)
    }

    fn check_shape(&self, other: &TensorSeries) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left_d: self.shape.alphabet.d,
                left_time: self.shape.alphabet.has_time_letter,
                left_m: self.shape.m,
                right_d: other.shape.alphabet.d,
                right_time: other.shape.alphabet.has_time_letter,
                right_m: other.shape.m,
            })
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.levels
            .iter()
            .flat_map(|l| l.iter())
            .fold(0.0f64, |acc, &c| acc.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.levels.iter().all(|l| l.iter().all(|c| c.is_finite()))
    }

    pub fn add(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (lo, li) in out.levels.iter_mut().zip(other.levels.iter()) {
            for (o, i) in lo.iter_mut().zip(li.iter()) {
                *o += i;
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.check_shape(other)?;
        let mut out = self.clone();
        for (lo, li) in out.levels.iter_mut().zip(other.levels.iter()) {
            for (o, i) in lo.iter_mut().zip(li.iter()) {
                *o -= i;
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> TensorSeries {
        let mut out = self.clone();
        for l in out.levels.iter_mut() {
            for x in l.iter_mut() {
                *x *= c;
            }
        }
        out
    }

    /// Truncated tensor product: the coefficient of `w` in the result is the
    /// sum over splittings `w = uv` of `self(u) * other(v)`, with graded
    /// truncation at `m`.
    pub fn mul(&self, other: &TensorSeries) -> Result<TensorSeries> {
        self.check_shape(other)?;
        let shape = &self.shape;
        let m = shape.m;
        let mut out = TensorSeries::zero(shape.alphabet, m)?;
        for k in 0..=m {
            let target = &mut out.levels[k];
            for i in 0..=k {
                let j = k - i;
                let left = &self.levels[i];
                let right = &other.levels[j];
                let right_size = shape.sizes[j];
                for (u, &cu) in left.iter().enumerate() {
                    if cu == 0.0 {
                        continue;
                    }
                    let base = u * right_size;
                    for (v, &cv) in right.iter().enumerate() {
                        target[base + v] += cu * cv;
                    }
                }
            }
            // graded truncation: kill words whose degree exceeds m
            let deg = &shape.degree[k];
            for (idx, t) in target.iter_mut().enumerate() {
                if deg[idx] as usize > m {
                    *t = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Dilation: multiplies the coefficient of `w` by `lambda^deg(w)`,
    /// the time letter counting twice.
    pub fn dilate(&self, lambda: f64) -> Result<TensorSeries> {
        if !(lambda >= 0.0) {
            return Err(contract(format!("dilation requires lambda >= 0, got {lambda}")));
        }
        let m = self.shape.m;
        let mut pow = vec![1.0f64; 2 * m + 1];
        for p in 1..=2 * m {
            pow[p] = pow[p - 1] * lambda;
        }
        let mut out = self.clone();
        for k in 1..=m {
            let deg = &self.shape.degree[k];
            for (idx, c) in out.levels[k].iter_mut().enumerate() {
                *c *= pow[(deg[idx] as usize).min(2 * m)];
            }
        }
        Ok(out)
    }

    /// Truncated exponential `1 + x + x^2/2! + ...`; requires zero scalar part.
    pub fn exp(&self) -> Result<TensorSeries> {
        if self.scalar() != 0.0 {
            return Err(contract("exp requires zero empty-word coefficient"));
        }
        let m = self.shape.m;
        let mut out = TensorSeries::unit(self.shape.alphabet, m)?;
        let mut term = TensorSeries::unit(self.shape.alphabet, m)?;
        for k in 1..=m {
            term = term.mul(self)?.scale(1.0 / k as f64);
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// Truncated logarithm; requires empty-word coefficient 1.
    pub fn log(&self) -> Result<TensorSeries> {
        if (self.scalar() - 1.0).abs() > 1e-9 * self.max_abs().max(1.0) {
            return Err(contract(format!(
                "log requires empty-word coefficient 1, got {}",
                self.scalar()
            )));
        }
        let m = self.shape.m;
        let mut y = self.clone();
        y.levels[0][0] = 0.0;
        let mut out = TensorSeries::zero(self.shape.alphabet, m)?;
        let mut power = TensorSeries::unit(self.shape.alphabet, m)?;
        for k in 1..=m {
            power = power.mul(&y)?;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out = out.add(&power.scale(sign / k as f64))?;
        }
        Ok(out)
    }

    /// Multiplicative inverse of a series with empty-word coefficient 1.
    pub fn inverse(&self) -> Result<TensorSeries> {
        if (self.scalar() - 1.0).abs() > 1e-9 * self.max_abs().max(1.0) {
            return Err(contract("inverse requires empty-word coefficient 1"));
        }
        let m = self.shape.m;
        let mut y = self.clone();
        y.levels[0][0] = 0.0;
        let mut out = TensorSeries::unit(self.shape.alphabet, m)?;
        let mut power = TensorSeries::unit(self.shape.alphabet, m)?;
        for k in 1..=m {
            power = power.mul(&y)?;
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            out = out.add(&power.scale(sign))?;
        }
        Ok(out)
    }

    /// Letters of the word at `(level, idx)` as a digit string, e.g. `"121"`.
    pub fn word_string(&self, level: usize, idx: usize) -> String {
        if level == 0 {
            return "()".to_string();
        }
        self.shape
            .word(level, idx)
            .iter()
            .map(|l| l.to_string())
            .collect()
    }

    /// Graded degree of the word at `(level, idx)`.
    pub fn word_degree(&self, level: usize, idx: usize) -> usize {
        self.shape.degree[level][idx] as usize
    }

    pub fn word_allowed(&self, level: usize, idx: usize) -> bool {
        self.shape.allowed(level, idx)
    }
}

/// Element of the truncated group: a series with empty-word coefficient 1
/// whose logarithm lies in the free Lie algebra.
#[derive(Clone, Debug)]
pub struct GroupElement {
    series: TensorSeries,
}

impl GroupElement {
    pub fn unit(alphabet: Alphabet, m: usize) -> Result<Self> {
        Ok(GroupElement {
            series: TensorSeries::unit(alphabet, m)?,
        })
    }

    /// Wraps a series without checking the Lie-membership invariant; the
    /// caller guarantees it (e.g. products of group elements).
    pub fn from_series_unchecked(series: TensorSeries) -> Self {
        GroupElement { series }
    }

    /// Wraps a series, checking the empty-word coefficient and the
    /// Lie-membership defect against `tol` (scaled by the magnitude of the
    /// coefficients).
    pub fn from_series(series: TensorSeries, tol: f64) -> Result<Self> {
        if (series.scalar() - 1.0).abs() > tol {
            return Err(contract("group element requires empty-word coefficient 1"));
        }
        let defect = membership_defect(&series)?;
        let scale = series.max_abs().max(1.0);
        if defect > tol * scale {
            return Err(contract(format!(
                "series is not a group element: membership defect {defect:.3e}"
            )));
        }
        Ok(GroupElement { series })
    }

    pub fn exp(x: &LieElement) -> Result<Self> {
        Ok(GroupElement {
            series: x.series().exp()?,
        })
    }

    pub fn log(&self) -> Result<LieElement> {
        Ok(LieElement {
            series: self.series.log()?,
        })
    }

    pub fn series(&self) -> &TensorSeries {
        &self.series
    }

    pub fn into_series(self) -> TensorSeries {
        self.series
    }

    pub fn alphabet(&self) -> Alphabet {
        self.series.alphabet()
    }

    pub fn level_cap(&self) -> usize {
        self.series.level_cap()
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        Ok(GroupElement {
            series: self.series.mul(&other.series)?,
        })
    }

    pub fn inverse(&self) -> Result<GroupElement> {
        Ok(GroupElement {
            series: self.series.inverse()?,
        })
    }

    pub fn dilate(&self, lambda: f64) -> Result<GroupElement> {
        Ok(GroupElement {
            series: self.series.dilate(lambda)?,
        })
    }

    /// Homogeneous norm: `max_D |part_D|^(1/D)` over graded degrees `D`,
    /// where `part_D` collects the coefficients of words of degree `D`.
    /// Equivalent (as a homogeneous norm) to the Carnot-Caratheodory norm;
    /// at level 2 it is `max(|x|, |a|^(1/2))`.
    pub fn homogeneous_norm(&self) -> f64 {
        let m = self.series.level_cap();
        let mut sq = vec![0.0f64; m + 1];
        for k in 1..=m {
            let deg = &self.series.shape.degree[k];
            for (idx, &c) in self.series.level(k).iter().enumerate() {
                let d = deg[idx] as usize;
                if d <= m {
                    sq[d] += c * c;
                }
            }
        }
        let mut norm = 0.0f64;
        for (d, &s) in sq.iter().enumerate().skip(1) {
            if s > 0.0 {
                norm = norm.max(s.sqrt().powf(1.0 / d as f64));
            }
        }
        norm
    }

    /// Left-invariant distance `norm(g^{-1} h)`.
    pub fn distance(&self, other: &GroupElement) -> Result<f64> {
        Ok(self.inverse()?.mul(other)?.homogeneous_norm())
    }

    /// `exp` of a pure level-1 element `v`, computed directly: the
    /// coefficient of a length-`k` word is the product of the letter
    /// components over `k!`. This is the signature of a linear segment with
    /// increment `v` and the hot path of signature computation.
    pub fn exp_of_increment(alphabet: Alphabet, m: usize, v: &[f64]) -> Result<Self> {
        let mut out = TensorSeries::unit(alphabet, m)?;
        if v.len() != alphabet.size() {
            return Err(contract(format!(
                "increment has {} entries, alphabet has {} letters",
                v.len(),
                alphabet.size()
            )));
        }
        out.levels[1].copy_from_slice(v);
        let a = alphabet.size();
        for k in 2..=m {
            let (done, rest) = out.levels.split_at_mut(k);
            let prev = &done[k - 1];
            let target = &mut rest[0];
            let inv_k = 1.0 / k as f64;
            let sub = prev.len();
            for (i, &vi) in v.iter().enumerate().take(a) {
                let c = vi * inv_k;
                let base = i * sub;
                for (r, &p) in prev.iter().enumerate() {
                    target[base + r] = c * p;
                }
            }
        }
        // graded truncation
        let shape = out.shape.clone();
        for k in 1..=m {
            let deg = &shape.degree[k];
            for (idx, c) in out.levels[k].iter_mut().enumerate() {
                if deg[idx] as usize > m {
                    *c = 0.0;
                }
            }
        }
        Ok(GroupElement { series: out })
    }
}

/// Element of the free Lie algebra (inside the truncated tensor algebra):
/// zero empty-word coefficient, zero non-Lie components.
#[derive(Clone, Debug)]
pub struct LieElement {
    series: TensorSeries,
}

impl LieElement {
    pub fn zero(alphabet: Alphabet, m: usize) -> Result<Self> {
        Ok(LieElement {
            series: TensorSeries::zero(alphabet, m)?,
        })
    }

    /// Lie element with level-1 part `v` (letter order, time first when present).
    pub fn from_increment(alphabet: Alphabet, m: usize, v: &[f64]) -> Result<Self> {
        Ok(LieElement {
            series: TensorSeries::from_level1(alphabet, m, v)?,
        })
    }

    /// Wraps a series as a Lie element; the caller guarantees the Lie
    /// invariant (e.g. results of `log` on group elements or brackets).
    pub fn from_series_unchecked(series: TensorSeries) -> Self {
        LieElement { series }
    }

    pub fn series(&self) -> &TensorSeries {
        &self.series
    }

    pub fn add(&self, other: &LieElement) -> Result<LieElement> {
        Ok(LieElement {
            series: self.series.add(&other.series)?,
        })
    }

    pub fn scale(&self, c: f64) -> LieElement {
        LieElement {
            series: self.series.scale(c),
        }
    }

    /// Commutator `[a, b] = ab - ba`.
    pub fn bracket(&self, other: &LieElement) -> Result<LieElement> {
        let ab = self.series.mul(&other.series)?;
        let ba = other.series.mul(&self.series)?;
        Ok(LieElement {
            series: ab.sub(&ba)?,
        })
    }
}

/// Right-normed bracketing (Dynkin) map applied to a homogeneous level-`k`
/// component, returned as a dense level-`k` coefficient vector.
fn dynkin_level(coeffs: &[f64], k: usize, a: usize) -> Vec<f64> {
    if k == 1 {
        return coeffs.to_vec();
    }
    let sub_size = coeffs.len() / a;
    let mut out = vec![0.0f64; coeffs.len()];
    for j in 0..a {
        let sub = &coeffs[j * sub_size..(j + 1) * sub_size];
        if sub.iter().all(|&c| c == 0.0) {
            continue;
        }
        let rec = dynkin_level(sub, k - 1, a);
        // e_j (x) rec
        for (t, &r) in rec.iter().enumerate() {
            out[j * sub_size + t] += r;
        }
        // - rec (x) e_j
        for (t, &r) in rec.iter().enumerate() {
            out[t * a + j] -= r;
        }
    }
    out
}

/// Distance of `log(a)` from the free Lie algebra, using the
/// Dynkin-Specht-Wever criterion per homogeneous level: a degree-`k`
/// component `l` is Lie iff the right-bracketing map sends it to `k*l`.
/// Returns the max over levels of the Euclidean norm of `rho(l)/k - l`.
/// Requires empty-word coefficient 1.
pub fn membership_defect(series: &TensorSeries) -> Result<f64> {
    let lg = series.log()?;
    let a = series.alphabet().size();
    let mut defect = 0.0f64;
    for k in 2..=series.level_cap() {
        let level = lg.level(k);
        let rho = dynkin_level(level, k, a);
        let mut sq = 0.0f64;
        for (idx, &c) in level.iter().enumerate() {
            let diff = rho[idx] / k as f64 - c;
            sq += diff * diff;
        }
        defect = defect.max(sq.sqrt());
    }
    Ok(defect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn a2() -> Alphabet {
        Alphabet::spatial(2).unwrap()
    }

    fn random_series(rng: &mut ChaCha8Rng, alphabet: Alphabet, m: usize) -> TensorSeries {
        let mut s = TensorSeries::zero(alphabet, m).unwrap();
        for k in 0..=m {
            for idx in 0..s.shape().sizes[k] {
                if s.shape().allowed(k, idx) {
                    s.level_mut(k)[idx] = rng.random_range(-1.0..1.0);
                }
            }
        }
        s
    }

    pub(crate) fn random_lie(rng: &mut ChaCha8Rng, alphabet: Alphabet, m: usize) -> LieElement {
        // random linear combination of letters and nested brackets
        let mut acc = LieElement::zero(alphabet, m).unwrap();
        let start = if alphabet.has_time_letter() { 0 } else { 1 };
        let letters: Vec<LieElement> = (start..=alphabet.d())
            .map(|l| {
                LieElement::from_series_unchecked(
                    TensorSeries::basis(alphabet, m, l).unwrap(),
                )
            })
            .collect();
        for l in &letters {
            acc = acc.add(&l.scale(rng.random_range(-1.0..1.0))).unwrap();
        }
        // nested right brackets up to depth m
        for _ in 0..2 * m {
            let mut b = letters[rng.random_range(0..letters.len())].clone();
            let depth = rng.random_range(1..m.max(2));
            for _ in 0..depth {
                let l = &letters[rng.random_range(0..letters.len())];
                b = l.bracket(&b).unwrap();
            }
            acc = acc.add(&b.scale(rng.random_range(-0.5..0.5))).unwrap();
        }
        acc
    }

    #[test]
    fn mul_exp_letters_step2() {
        let m = 2;
        let e1 = TensorSeries::basis(a2(), m, 1).unwrap();
        let e2 = TensorSeries::basis(a2(), m, 2).unwrap();
        let g = e1.exp().unwrap().mul(&e2.exp().unwrap()).unwrap();
        assert_eq!(g.level(1), &[1.0, 1.0]);
        // level 2 words in order: 11, 12, 21, 22
        let l2 = g.level(2);
        assert!((l2[0] - 0.5).abs() < 1e-15);
        assert!((l2[1] - 1.0).abs() < 1e-15);
        assert!(l2[2].abs() < 1e-15);
        assert!((l2[3] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mul_unit_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_series(&mut rng, a2(), 3);
        let unit = TensorSeries::unit(a2(), 3).unwrap();
        let prod = s.mul(&unit).unwrap();
        for k in 0..=3 {
            for (a, b) in prod.level(k).iter().zip(s.level(k)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mul_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let a = random_series(&mut rng, a2(), 3);
            let b = random_series(&mut rng, a2(), 3);
            let c = random_series(&mut rng, a2(), 3);
            let left = a.mul(&b).unwrap().mul(&c).unwrap();
            let right = a.mul(&b.mul(&c).unwrap()).unwrap();
            let diff = left.sub(&right).unwrap().max_abs();
            assert!(diff <= 1e-12, "associativity defect {diff}");
        }
    }

    #[test]
    fn mul_shape_mismatch_rejected() {
        let a = TensorSeries::unit(a2(), 2).unwrap();
        let b = TensorSeries::unit(a2(), 3).unwrap();
        assert!(matches!(a.mul(&b), Err(Error::ShapeMismatch { .. })));
        let c = TensorSeries::unit(Alphabet::spatial(3).unwrap(), 2).unwrap();
        assert!(a.mul(&c).is_err());
    }

    #[test]
    fn exp_zero_is_unit() {
        let z = LieElement::zero(a2(), 2).unwrap();
        let g = GroupElement::exp(&z).unwrap();
        assert_eq!(g.series().scalar(), 1.0);
        assert_eq!(g.series().max_abs(), 1.0);
        assert!(g.homogeneous_norm() == 0.0);
    }

    #[test]
    fn exp_single_letter() {
        let x = LieElement::from_increment(a2(), 2, &[1.0, 0.0]).unwrap();
        let g = GroupElement::exp(&x).unwrap();
        assert_eq!(g.series().level(1), &[1.0, 0.0]);
        assert_eq!(g.series().level(2)[0], 0.5);
    }

    #[test]
    fn exp_with_bracket() {
        // x = e1 + [e1, e2]: antisymmetric level-2 part has coefficient 1 on (1,2)-(2,1)
        let e1 = LieElement::from_increment(a2(), 2, &[1.0, 0.0]).unwrap();
        let e2 = LieElement::from_increment(a2(), 2, &[0.0, 1.0]).unwrap();
        let x = e1.add(&e1.bracket(&e2).unwrap()).unwrap();
        let g = GroupElement::exp(&x).unwrap();
        let l2 = g.series().level(2);
        let anti = (l2[1] - l2[2]) / 2.0;
        assert!((anti - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_unit_is_zero() {
        let g = GroupElement::unit(a2(), 3).unwrap();
        assert_eq!(g.log().unwrap().series().max_abs(), 0.0);
    }

    #[test]
    fn log_cbh_step2() {
        let e1 = TensorSeries::basis(a2(), 2, 1).unwrap();
        let e2 = TensorSeries::basis(a2(), 2, 2).unwrap();
        let g = e1.exp().unwrap().mul(&e2.exp().unwrap()).unwrap();
        let lg = g.log().unwrap();
        assert!((lg.level(1)[0] - 1.0).abs() < 1e-15);
        assert!((lg.level(1)[1] - 1.0).abs() < 1e-15);
        // level 2 = 1/2 [e1,e2]
        let l2 = lg.level(2);
        assert!((l2[1] - 0.5).abs() < 1e-15);
        assert!((l2[2] + 0.5).abs() < 1e-15);
        assert!(l2[0].abs() < 1e-15 && l2[3].abs() < 1e-15);
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = random_lie(&mut rng, a2(), 2);
            let g = GroupElement::exp(&x).unwrap();
            let back = GroupElement::exp(&g.log().unwrap()).unwrap();
            let scale = g.series().max_abs().max(1.0);
            let diff = g.series().sub(back.series()).unwrap().max_abs();
            assert!(diff <= 1e-12 * scale);
        }
    }

    #[test]
    fn log_requires_unit_scalar() {
        let z = TensorSeries::zero(a2(), 2).unwrap();
        assert!(z.log().is_err());
    }

    #[test]
    fn dilate_examples() {
        let unit = TensorSeries::unit(a2(), 2).unwrap();
        let d = unit.dilate(3.7).unwrap();
        assert_eq!(d.scalar(), 1.0);
        assert_eq!(d.max_abs(), 1.0);

        // 1 + e1 + e1(x)e1, lambda = 2 -> 1 + 2 e1 + 4 e1(x)e1
        let mut s = TensorSeries::unit(a2(), 2).unwrap();
        s.level_mut(1)[0] = 1.0;
        s.level_mut(2)[0] = 1.0;
        let d = s.dilate(2.0).unwrap();
        assert_eq!(d.level(1)[0], 2.0);
        assert_eq!(d.level(2)[0], 4.0);

        assert!(s.dilate(-1.0).is_err());
    }

    #[test]
    fn dilate_time_letter_weight_two() {
        let al = Alphabet::with_time(1).unwrap();
        let mut s = TensorSeries::unit(al, 2).unwrap();
        s.level_mut(1)[0] = 1.0; // e0 coefficient
        s.level_mut(1)[1] = 1.0; // e1 coefficient
        let dt: f64 = 0.3;
        let d = s.dilate(dt.sqrt()).unwrap();
        assert!((d.level(1)[0] - dt).abs() < 1e-15);
        assert!((d.level(1)[1] - dt.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn dilate_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = random_series(&mut rng, a2(), 3);
        let a = s.dilate(0.7).unwrap().dilate(1.3).unwrap();
        let b = s.dilate(0.7 * 1.3).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn norm_examples() {
        let unit = GroupElement::unit(a2(), 2).unwrap();
        assert_eq!(unit.homogeneous_norm(), 0.0);

        let x = LieElement::from_increment(a2(), 2, &[3.0, 0.0]).unwrap();
        let g = GroupElement::exp(&x).unwrap();
        // max(3, sqrt(4.5)) = 3
        assert!((g.homogeneous_norm() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn norm_homogeneous_under_dilation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x = random_lie(&mut rng, a2(), 2);
            let g = GroupElement::exp(&x).unwrap();
            let n = g.homogeneous_norm();
            for &lambda in &[0.1, 2.0, 10.0] {
                let nd = g.dilate(lambda).unwrap().homogeneous_norm();
                assert!(
                    (nd - lambda * n).abs() <= 1e-12 * (1.0 + lambda * n),
                    "homogeneity violated: {nd} vs {}",
                    lambda * n
                );
            }
        }
    }

    #[test]
    fn defect_of_exponentials_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for m in 2..=4 {
            for _ in 0..25 {
                let x = random_lie(&mut rng, a2(), m);
                let g = GroupElement::exp(&x).unwrap();
                let scale = g.series().max_abs().max(1.0);
                let d = membership_defect(g.series()).unwrap();
                assert!(d <= 1e-12 * scale, "defect {d} at m={m}");
            }
        }
    }

    #[test]
    fn defect_detects_non_group_series() {
        // 1 + e1 + e1(x)e2: symmetric level-2 part is not x(x)x/2
        let mut s = TensorSeries::unit(a2(), 2).unwrap();
        s.level_mut(1)[0] = 1.0;
        s.level_mut(2)[1] = 1.0;
        let d = membership_defect(&s).unwrap();
        // hand evaluation: log level-2 = e1e2 - 1/2 e1e1; sym part has
        // entries (-1/2, 1/2, 1/2, 0), norm sqrt(3)/2
        assert!((d - (0.75f64).sqrt()).abs() < 1e-12, "defect {d}");
    }

    #[test]
    fn distance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = GroupElement::exp(&random_lie(&mut rng, a2(), 2)).unwrap();
        assert!(g.distance(&g).unwrap() <= 1e-13);

        // d(unit, exp(v)) = |v| for pure level-1 v at m=2
        let v = [0.6, -0.8];
        let e = GroupElement::exp(&LieElement::from_increment(a2(), 2, &v).unwrap()).unwrap();
        let unit = GroupElement::unit(a2(), 2).unwrap();
        assert!((unit.distance(&e).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn distance_left_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let g = GroupElement::exp(&random_lie(&mut rng, a2(), 2)).unwrap();
            let h = GroupElement::exp(&random_lie(&mut rng, a2(), 2)).unwrap();
            let k = GroupElement::exp(&random_lie(&mut rng, a2(), 2)).unwrap();
            let d1 = g.distance(&h).unwrap();
            let d2 = k.mul(&g).unwrap().distance(&k.mul(&h).unwrap()).unwrap();
            assert!((d1 - d2).abs() <= 1e-12 * (1.0 + d1));
        }
    }

    #[test]
    fn exp_of_increment_matches_series_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for &(d, time, m) in &[(2usize, false, 4usize), (2, true, 5), (3, false, 3)] {
            let al = Alphabet::new(d, time).unwrap();
            let v: Vec<f64> = (0..al.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = GroupElement::exp_of_increment(al, m, &v).unwrap();
            let slow = TensorSeries::from_level1(al, m, &v).unwrap().exp().unwrap();
            assert!(fast.series().sub(&slow).unwrap().max_abs() <= 1e-14);
        }
    }

    #[test]
    fn group_product_stays_in_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..25 {
            let g = GroupElement::exp(&random_lie(&mut rng, a2(), 3)).unwrap();
            let h = GroupElement::exp(&random_lie(&mut rng, a2(), 3)).unwrap();
            let p = g.mul(&h).unwrap();
            let scale = p.series().max_abs().max(1.0);
            assert!(membership_defect(p.series()).unwrap() <= 1e-11 * scale);
        }
    }
}
