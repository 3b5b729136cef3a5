//! Piecewise-linear paths with an optional Lipschitz time component,
//! their truncated signatures via products of segment exponentials, and
//! the rescaling/concatenation operations used to assemble mesh-wide
//! driving paths.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::tensor::{Alphabet, GroupElement};

/// Relative tolerance under which consecutive breakpoints are merged.
const DEDUP_REL: f64 = 1e-15;

/// Scalar piecewise-linear function, used for the time component `h`.
#[derive(Clone, Debug)]
pub struct ScalarPath {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarPath {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.is_empty() {
            return Err(contract("scalar path needs matching breakpoints and values"));
        }
        if breakpoints[0] != 0.0 || values[0] != 0.0 {
            return Err(contract("scalar path must start at (0, 0)"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(contract("scalar path breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(contract("scalar path values must be finite"));
        }
        Ok(ScalarPath { breakpoints, values })
    }

    /// Identity on `[0, t]`.
    pub fn identity(t: f64) -> Self {
        ScalarPath {
            breakpoints: vec![0.0, t],
            values: vec![0.0, t],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, s: f64) -> f64 {
        let bp = &self.breakpoints;
        if s <= bp[0] {
            return self.values[0];
        }
        let last = bp.len() - 1;
        if s >= bp[last] {
            return self.values[last];
        }
        let i = bp.partition_point(|&b| b <= s);
        let (s0, s1) = (bp[i - 1], bp[i]);
        let w = (s - s0) / (s1 - s0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }

    /// Maximum slope magnitude.
    pub fn lipschitz_constant(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
            .fold(0.0f64, f64::max)
    }
}

/// Continuous piecewise-linear path in `R^d` started at 0, with an optional
/// scalar time component `h` (also started at 0).
#[derive(Clone, Debug)]
pub struct PiecewiseLinearPath {
    d: usize,
    breakpoints: Vec<f64>,
    /// Flat node storage, stride `d`; `nodes[0..d]` is the zero vector.
    nodes: Vec<f64>,
    time: Option<ScalarPath>,
}

impl PiecewiseLinearPath {
    pub fn new(d: usize, breakpoints: Vec<f64>, nodes: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(contract("path dimension must be positive"));
        }
        if breakpoints.is_empty() || nodes.len() != breakpoints.len() * d {
            return Err(contract("node storage must hold one point per breakpoint"));
        }
        if breakpoints[0] != 0.0 {
            return Err(contract("path must start at time 0"));
        }
        if nodes[..d].iter().any(|&v| v != 0.0) {
            return Err(contract("path must start at the origin"));
        }
        if nodes.iter().any(|v| !v.is_finite()) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(contract("path data must be finite"));
        }
        let horizon = *breakpoints.last().unwrap();
        // merge breakpoints closer than the dedup tolerance
        let tol = DEDUP_REL * horizon.max(f64::MIN_POSITIVE);
        let mut bp = Vec::with_capacity(breakpoints.len());
        let mut nd = Vec::with_capacity(nodes.len());
        for (i, &b) in breakpoints.iter().enumerate() {
            if i > 0 {
                let prev = *bp.last().unwrap();
                if b <= prev + tol {
                    if b < prev {
                        return Err(contract("breakpoints must be strictly increasing"));
                    }
                    // drop the duplicate node
                    continue;
                }
            }
            bp.push(b);
            nd.extend_from_slice(&nodes[i * d..(i + 1) * d]);
        }
        Ok(PiecewiseLinearPath {
            d,
            breakpoints: bp,
            nodes: nd,
            time: None,
        })
    }

    pub fn with_time(mut self, h: ScalarPath) -> Result<Self> {
        let horizon = self.duration();
        let h_end = *h.breakpoints.last().unwrap();
        if (h_end - horizon).abs() > 1e-12 * horizon.max(1.0) {
            return Err(contract("time component must span the path interval"));
        }
        self.time = Some(h);
        Ok(self)
    }

    pub fn with_identity_time(self) -> Self {
        let t = self.duration();
        let h = ScalarPath::identity(if t > 0.0 { t } else { 1.0 });
        PiecewiseLinearPath {
            time: if t > 0.0 { Some(h) } else { None },
            ..self
        }
    }

    /// Linear path on `[0, horizon]` to endpoint `v`.
    pub fn linear(v: &[f64], horizon: f64) -> Result<Self> {
        let d = v.len();
        let mut nodes = vec![0.0; d];
        nodes.extend_from_slice(v);
        Self::new(d, vec![0.0, horizon], nodes)
    }

    /// Constant path at the origin on a degenerate interval.
    pub fn degenerate(d: usize) -> Self {
        PiecewiseLinearPath {
            d,
            breakpoints: vec![0.0],
            nodes: vec![0.0; d],
            time: None,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn duration(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.node(self.breakpoints.len() - 1)
    }

    pub fn time_component(&self) -> Option<&ScalarPath> {
        self.time.as_ref()
    }

    pub fn has_time_component(&self) -> bool {
        self.time.is_some()
    }

    pub fn num_segments(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn value_at(&self, s: f64, out: &mut [f64]) {
        let bp = &self.breakpoints;
        let last = bp.len() - 1;
        if s <= bp[0] {
            out.copy_from_slice(self.node(0));
            return;
        }
        if s >= bp[last] {
            out.copy_from_slice(self.node(last));
            return;
        }
        let i = bp.partition_point(|&b| b <= s);
        let (s0, s1) = (bp[i - 1], bp[i]);
        let w = (s - s0) / (s1 - s0);
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.node(i - 1)[k] * (1.0 - w) + self.node(i)[k] * w;
        }
    }

    /// Breakpoints of the path merged with those of its time component.
    fn merged_breakpoints(&self) -> Vec<f64> {
        match &self.time {
            None => self.breakpoints.clone(),
            Some(h) => {
                let mut all: Vec<f64> = self
                    .breakpoints
                    .iter()
                    .chain(h.breakpoints.iter())
                    .copied()
                    .collect();
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let tol = DEDUP_REL * self.duration().max(f64::MIN_POSITIVE);
                all.dedup_by(|a, b| *a <= *b + tol);
                all
            }
        }
    }

    /// Step-`m` truncated signature. With a time component present the
    /// signature is taken over the extended alphabet (letter 0 = time,
    /// graded weight 2); each linear segment contributes the exponential of
    /// its full increment, which is exact.
    pub fn signature(&self, m: usize) -> Result<GroupElement> {
        let has_time = self.time.is_some();
        let alphabet = Alphabet::new(self.d, has_time)?;
        let mut acc = GroupElement::unit(alphabet, m)?;
        let points = self.merged_breakpoints();
        let a = alphabet.size();
        let mut v_prev = vec![0.0; a];
        let mut v_next = vec![0.0; a];
        let mut incr = vec![0.0; a];
        let offset = usize::from(has_time);
        self.value_at(points[0], &mut v_prev[offset..]);
        if let Some(h) = &self.time {
            v_prev[0] = h.value_at(points[0]);
        }
        for win in points.windows(2) {
            self.value_at(win[1], &mut v_next[offset..]);
            if let Some(h) = &self.time {
                v_next[0] = h.value_at(win[1]);
            }
            for k in 0..a {
                incr[k] = v_next[k] - v_prev[k];
            }
            let factor = GroupElement::exp_of_increment(alphabet, m, &incr)?;
            acc = acc.mul(&factor)?;
            std::mem::swap(&mut v_prev, &mut v_next);
        }
        Ok(acc)
    }

    /// Signature of the spatial components only, ignoring any time component.
    pub fn signature_spatial(&self, m: usize) -> Result<GroupElement> {
        let alphabet = Alphabet::spatial(self.d)?;
        let mut acc = GroupElement::unit(alphabet, m)?;
        let mut incr = vec![0.0; self.d];
        for i in 1..self.breakpoints.len() {
            for k in 0..self.d {
                incr[k] = self.node(i)[k] - self.node(i - 1)[k];
            }
            acc = acc.mul(&GroupElement::exp_of_increment(alphabet, m, &incr)?)?;
        }
        Ok(acc)
    }

    /// Rescales a path on `[0,1]` to `[0, dt]`: spatial components become
    /// `s -> sqrt(dt) * W(s/dt)`, the time component `s -> dt * h(s/dt)`.
    pub fn rescale(&self, dt: f64) -> Result<PiecewiseLinearPath> {
        if !(dt > 0.0) {
            return Err(contract(format!("rescale requires dt > 0, got {dt}")));
        }
        if (self.duration() - 1.0).abs() > 1e-9 {
            return Err(contract("rescale expects a path on [0, 1]"));
        }
        let root = dt.sqrt();
        let breakpoints: Vec<f64> = self.breakpoints.iter().map(|&b| b * dt).collect();
        let nodes: Vec<f64> = self.nodes.iter().map(|&v| v * root).collect();
        let time = self.time.as_ref().map(|h| ScalarPath {
            breakpoints: h.breakpoints.iter().map(|&b| b * dt).collect(),
            values: h.values.iter().map(|&v| v * dt).collect(),
        });
        Ok(PiecewiseLinearPath {
            d: self.d,
            breakpoints,
            nodes,
            time,
        })
    }

    /// Concatenates paths, each started at 0 on its own interval, into one
    /// continuous path on `[0, sum of horizons]`.
    pub fn concatenate(parts: &[PiecewiseLinearPath]) -> Result<PiecewiseLinearPath> {
        let Some(first) = parts.first() else {
            return Ok(PiecewiseLinearPath::degenerate(1));
        };
        let d = first.d;
        let any_time = parts.iter().any(|p| p.time.is_some());
        if any_time && parts.iter().any(|p| p.time.is_none() && p.num_segments() > 0) {
            return Err(contract("cannot concatenate paths with and without time components"));
        }
        let mut breakpoints = vec![0.0];
        let mut nodes = vec![0.0; d];
        let mut h_breakpoints = vec![0.0];
        let mut h_values = vec![0.0];
        let mut t_off = 0.0;
        let mut v_off = vec![0.0; d];
        let mut h_off = 0.0;
        for p in parts {
            if p.d != d {
                return Err(contract("concatenation requires equal path dimensions"));
            }
            for i in 1..p.breakpoints.len() {
                breakpoints.push(t_off + p.breakpoints[i]);
                for k in 0..d {
                    nodes.push(v_off[k] + p.node(i)[k]);
                }
            }
            if let Some(h) = &p.time {
                for i in 1..h.breakpoints.len() {
                    h_breakpoints.push(t_off + h.breakpoints[i]);
                    h_values.push(h_off + h.values[i]);
                }
                h_off += *h.values.last().unwrap();
            }
            t_off += p.duration();
            for k in 0..d {
                v_off[k] += p.endpoint()[k];
            }
        }
        let mut out = PiecewiseLinearPath::new(d, breakpoints, nodes)?;
        if any_time {
            out = out.with_time(ScalarPath::new(h_breakpoints, h_values)?)?;
        }
        Ok(out)
    }

    /// Restriction to `[s, t]`, shifted to start at 0 in time and value.
    pub fn restrict(&self, s: f64, t: f64) -> Result<PiecewiseLinearPath> {
        if s > t {
            return Err(contract("restriction requires s <= t"));
        }
        let mut points: Vec<f64> = vec![s];
        for &b in &self.breakpoints {
            if b > s && b < t {
                points.push(b);
            }
        }
        points.push(t);
        let mut start = vec![0.0; self.d];
        self.value_at(s, &mut start);
        let mut breakpoints = Vec::with_capacity(points.len());
        let mut nodes = Vec::with_capacity(points.len() * self.d);
        let mut buf = vec![0.0; self.d];
        for &p in &points {
            breakpoints.push(p - s);
            self.value_at(p, &mut buf);
            for k in 0..self.d {
                nodes.push(buf[k] - start[k]);
            }
        }
        // force exact zeros at the new origin
        for v in nodes[..self.d].iter_mut() {
            *v = 0.0;
        }
        let mut out = PiecewiseLinearPath::new(self.d, breakpoints, nodes)?;
        if let Some(h) = &self.time {
            let mut hb: Vec<f64> = vec![0.0];
            let mut hv: Vec<f64> = vec![0.0];
            let h_start = h.value_at(s);
            for (&b, &v) in h.breakpoints.iter().zip(h.values.iter()) {
                if b > s && b < t {
                    hb.push(b - s);
                    hv.push(v - h_start);
                }
            }
            if t > s {
                hb.push(t - s);
                hv.push(h.value_at(t) - h_start);
            }
            out = out.with_time(ScalarPath::new(hb, hv)?)?;
        }
        Ok(out)
    }

    /// Time reversal: runs the increments backwards, started at 0.
    pub fn reversal(&self) -> PiecewiseLinearPath {
        let horizon = self.duration();
        let n = self.breakpoints.len();
        let mut breakpoints = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(self.nodes.len());
        let end = self.endpoint().to_vec();
        for i in (0..n).rev() {
            breakpoints.push(horizon - self.breakpoints[i]);
            for k in 0..self.d {
                nodes.push(self.node(i)[k] - end[k]);
            }
        }
        PiecewiseLinearPath {
            d: self.d,
            breakpoints,
            nodes,
            time: None,
        }
    }

    /// Cameron-Martin norm of the spatial components over `[s, t]`
    /// (defaults to the whole interval): the L2 norm of the derivative.
    pub fn cameron_martin_norm(&self, sub: Option<(f64, f64)>) -> Result<f64> {
        Ok(self.segment_sum(sub, |slope_sq, len| slope_sq * len)?.sqrt())
    }

    /// First variation of the spatial components over `[s, t]`.
    pub fn one_variation(&self, sub: Option<(f64, f64)>) -> Result<f64> {
        self.segment_sum(sub, |slope_sq, len| slope_sq.sqrt() * len)
    }

    fn segment_sum(
        &self,
        sub: Option<(f64, f64)>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<f64> {
        let (s, t) = sub.unwrap_or((0.0, self.duration()));
        if s > t {
            return Err(contract("subinterval requires s <= t"));
        }
        let mut total = 0.0;
        for i in 1..self.breakpoints.len() {
            let (a, b) = (self.breakpoints[i - 1], self.breakpoints[i]);
            let overlap = (b.min(t) - a.max(s)).max(0.0);
            if overlap == 0.0 {
                continue;
            }
            let len = b - a;
            let mut slope_sq = 0.0;
            for k in 0..self.d {
                let dv = (self.node(i)[k] - self.node(i - 1)[k]) / len;
                slope_sq += dv * dv;
            }
            total += f(slope_sq, overlap);
        }
        Ok(total)
    }
}

/// Signature of a path over a stated interval.
#[derive(Clone, Debug)]
pub struct PathSignature {
    pub value: GroupElement,
    pub interval: (f64, f64),
}

/// Serialized path form: `{d, breakpoints, nodes, h_breakpoints?, h_nodes?}`.
#[derive(Serialize, Deserialize)]
struct PathRepr {
    d: usize,
    breakpoints: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_breakpoints: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h_nodes: Option<Vec<f64>>,
}

impl Serialize for PiecewiseLinearPath {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = PathRepr {
            d: self.d,
            breakpoints: self.breakpoints.clone(),
            nodes: (0..self.breakpoints.len())
                .map(|i| self.node(i).to_vec())
                .collect(),
            h_breakpoints: self.time.as_ref().map(|h| h.breakpoints.clone()),
            h_nodes: self.time.as_ref().map(|h| h.values.clone()),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PiecewiseLinearPath {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let repr = PathRepr::deserialize(deserializer)?;
        let nodes: Vec<f64> = repr.nodes.iter().flatten().copied().collect();
        let mut path = PiecewiseLinearPath::new(repr.d, repr.breakpoints, nodes)
            .map_err(|e| D::Error::custom(e.to_string()))?;
        match (repr.h_breakpoints, repr.h_nodes) {
            (Some(hb), Some(hv)) => {
                let h = ScalarPath::new(hb, hv).map_err(|e| D::Error::custom(e.to_string()))?;
                path = path.with_time(h).map_err(|e| D::Error::custom(e.to_string()))?;
            }
            (None, None) => {}
            _ => return Err(D::Error::custom("h_breakpoints and h_nodes must come together")),
        }
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::membership_defect;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_path(rng: &mut ChaCha8Rng, d: usize, segments: usize) -> PiecewiseLinearPath {
        let mut breakpoints = vec![0.0];
        let mut t = 0.0;
        for _ in 0..segments {
            t += rng.random_range(0.05..1.0);
            breakpoints.push(t);
        }
        let horizon = t;
        for b in breakpoints.iter_mut() {
            *b /= horizon;
        }
        *breakpoints.last_mut().unwrap() = 1.0;
        let mut nodes = vec![0.0; d];
        for i in 1..=segments {
            for k in 0..d {
                let prev = nodes[(i - 1) * d + k];
                nodes.push(prev + rng.random_range(-1.0..1.0));
            }
        }
        PiecewiseLinearPath::new(d, breakpoints, nodes).unwrap()
    }

    #[test]
    fn single_segment_signature_is_exponential() {
        let v = [0.3, -0.7];
        let p = PiecewiseLinearPath::linear(&v, 1.0).unwrap();
        let sig = p.signature(2).unwrap();
        assert_eq!(sig.series().level(1), &v[..]);
        let l2 = sig.series().level(2);
        assert!((l2[0] - 0.5 * v[0] * v[0]).abs() < 1e-15);
        assert!((l2[1] - 0.5 * v[0] * v[1]).abs() < 1e-15);
    }

    #[test]
    fn two_segment_levy_area_is_half() {
        let p = PiecewiseLinearPath::new(
            2,
            vec![0.0, 0.5, 1.0],
            vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let lg = p.signature(2).unwrap().log().unwrap();
        assert_eq!(lg.series().level(1), &[1.0, 1.0]);
        let l2 = lg.series().level(2);
        assert!((l2[1] - 0.5).abs() < 1e-15);
        assert!((l2[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_square_loop_has_area_one() {
        let p = PiecewiseLinearPath::new(
            2,
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![
                0.0, 0.0, //
                1.0, 0.0, //
                1.0, 1.0, //
                0.0, 1.0, //
                0.0, 0.0,
            ],
        )
        .unwrap();
        let sig = p.signature(2).unwrap();
        assert!(sig.series().level(1).iter().all(|&v| v.abs() < 1e-14));
        let l2 = sig.series().level(2);
        let area = (l2[1] - l2[2]) / 2.0;
        assert!((area - 1.0).abs() < 1e-14, "area {area}");
        assert!(membership_defect(sig.series()).unwrap() <= 1e-12);
    }

    #[test]
    fn rescale_identity_and_endpoint() {
        let v = [2.0, -1.0];
        let p = PiecewiseLinearPath::linear(&v, 1.0).unwrap();
        let same = p.rescale(1.0).unwrap();
        assert_eq!(same.endpoint(), &v[..]);
        let quarter = p.rescale(0.25).unwrap();
        assert_eq!(quarter.duration(), 0.25);
        assert_eq!(quarter.endpoint(), &[1.0, -0.5][..]);
        assert!(p.rescale(0.0).is_err());
    }

    #[test]
    fn rescale_commutes_with_dilation() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let segs = rng.random_range(1..5);
            let p = random_path(&mut rng, 2, segs);
            let dt = rng.random_range(0.01..4.0);
            let lhs = p.rescale(dt).unwrap().signature(3).unwrap();
            let rhs = p.signature(3).unwrap().dilate(dt.sqrt()).unwrap();
            let scale = rhs.series().max_abs().max(1.0);
            let diff = lhs.series().sub(rhs.series()).unwrap().max_abs();
            assert!(diff <= 1e-12 * scale, "diff {diff}");
        }
    }

    #[test]
    fn concatenate_single_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let p = random_path(&mut rng, 2, 3);
        let q = PiecewiseLinearPath::concatenate(std::slice::from_ref(&p)).unwrap();
        assert_eq!(p.breakpoints(), q.breakpoints());
        assert_eq!(p.endpoint(), q.endpoint());
    }

    #[test]
    fn chen_identity_on_random_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let segs_a = rng.random_range(1..4);
            let a = random_path(&mut rng, 2, segs_a);
            let segs_b = rng.random_range(1..4);
            let b = random_path(&mut rng, 2, segs_b);
            let cat = PiecewiseLinearPath::concatenate(&[a.clone(), b.clone()]).unwrap();
            let lhs = cat.signature(3).unwrap();
            let rhs = a.signature(3).unwrap().mul(&b.signature(3).unwrap()).unwrap();
            let scale = rhs.series().max_abs().max(1.0);
            assert!(lhs.series().sub(rhs.series()).unwrap().max_abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn wong_zakai_blocks_interpolate_brownian_nodes() {
        // two linear blocks with increments z1, z2 concatenate to the
        // piecewise-linear interpolation through (0, z1, z1 + z2)
        let z1 = [0.4, -0.2];
        let z2 = [-0.1, 0.9];
        let b1 = PiecewiseLinearPath::linear(&z1, 0.5).unwrap();
        let b2 = PiecewiseLinearPath::linear(&z2, 0.5).unwrap();
        let cat = PiecewiseLinearPath::concatenate(&[b1, b2]).unwrap();
        assert_eq!(cat.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(cat.node(1), &z1[..]);
        assert!((cat.endpoint()[0] - 0.3).abs() < 1e-15);
        assert!((cat.endpoint()[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn reversal_cancels_signature() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..25 {
            let p = random_path(&mut rng, 2, 4);
            let loop_path =
                PiecewiseLinearPath::concatenate(&[p.clone(), p.reversal()]).unwrap();
            let sig = loop_path.signature(3).unwrap();
            let unit = GroupElement::unit(Alphabet::spatial(2).unwrap(), 3).unwrap();
            assert!(sig.series().sub(unit.series()).unwrap().max_abs() <= 1e-11);
        }
    }

    #[test]
    fn cameron_martin_norm_examples() {
        let z = [3.0, 4.0];
        let p = PiecewiseLinearPath::linear(&z, 1.0).unwrap();
        assert!((p.cameron_martin_norm(None).unwrap() - 5.0).abs() < 1e-14);

        let c = PiecewiseLinearPath::new(1, vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(c.cameron_martin_norm(None).unwrap(), 0.0);
    }

    #[test]
    fn cameron_martin_restriction_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..50 {
            let p = random_path(&mut rng, 2, 5);
            let u = rng.random_range(0.1..0.9);
            let a = p.cameron_martin_norm(Some((0.0, u))).unwrap();
            let b = p.cameron_martin_norm(Some((u, 1.0))).unwrap();
            let whole = p.cameron_martin_norm(None).unwrap();
            assert!((a * a + b * b - whole * whole).abs() <= 1e-12);
        }
    }

    #[test]
    fn one_variation_examples() {
        let p = PiecewiseLinearPath::linear(&[-2.0], 1.0).unwrap();
        assert!((p.one_variation(None).unwrap() - 2.0).abs() < 1e-14);

        let square = PiecewiseLinearPath::new(
            2,
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert!((square.one_variation(None).unwrap() - 4.0).abs() < 1e-14);
        assert!(square.one_variation(Some((0.5, 0.2))).is_err());
    }

    #[test]
    fn cameron_martin_embedding_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..1000 {
            let segs = rng.random_range(1..6);
            let p = random_path(&mut rng, 2, segs);
            let s = rng.random_range(0.0..1.0);
            let t = rng.random_range(s..1.0);
            let var1 = p.one_variation(Some((s, t))).unwrap();
            let cm = p.cameron_martin_norm(Some((s, t))).unwrap();
            assert!(
                var1 <= (t - s).sqrt() * cm + 1e-12,
                "embedding violated: {var1} > sqrt({}) * {cm}",
                t - s
            );
        }
    }

    #[test]
    fn restrict_matches_block_signature() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let a = random_path(&mut rng, 2, 3);
        let b = random_path(&mut rng, 2, 2);
        let cat = PiecewiseLinearPath::concatenate(&[a.clone(), b.clone()]).unwrap();
        let block = cat.restrict(1.0, 2.0).unwrap();
        let sig_block = block.signature(3).unwrap();
        let sig_b = b.signature(3).unwrap();
        let scale = sig_b.series().max_abs().max(1.0);
        assert!(sig_block.series().sub(sig_b.series()).unwrap().max_abs() <= 1e-11 * scale);
    }

    #[test]
    fn degenerate_path_has_unit_signature() {
        let p = PiecewiseLinearPath::degenerate(2);
        let sig = p.signature(3).unwrap();
        assert_eq!(sig.homogeneous_norm(), 0.0);
    }

    #[test]
    fn signature_with_time_component_uses_extended_alphabet() {
        let p = PiecewiseLinearPath::linear(&[1.0], 1.0)
            .unwrap()
            .with_identity_time();
        let sig = p.signature(3).unwrap();
        assert!(sig.alphabet().has_time_letter());
        // level-1: (h, w) increments
        assert_eq!(sig.series().level(1), &[1.0, 1.0]);
    }

    #[test]
    fn path_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let p = random_path(&mut rng, 2, 3).with_identity_time();
        let text = serde_json::to_string(&p).unwrap();
        let q: PiecewiseLinearPath = serde_json::from_str(&text).unwrap();
        assert_eq!(p.breakpoints(), q.breakpoints());
        assert_eq!(p.endpoint(), q.endpoint());
        assert!(q.has_time_component());
    }
}
