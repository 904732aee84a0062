//! Piecewise-quadratic convex functions with exact Legendre–Fenchel conjugation.
//!
//! Order-book shape functions and their transaction-cost conjugates both live
//! in the class of convex piecewise quadratics: a discrete book yields a shape
//! with piecewise-constant derivative, a density book a piecewise-linear one,
//! and the class is closed under conjugation. Conjugating segment by segment
//! (slopes and breakpoints swap roles on monotone pieces) keeps the transform
//! exact instead of relying on a numerical sup-search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One quadratic piece `a·x² + b·x + c` on the interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Segment {
    pub fn new(lo: f64, hi: f64, a: f64, b: f64, c: f64) -> Self {
        Segment { lo, hi, a, b, c }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn slope(&self, x: f64) -> f64 {
        2.0 * self.a * x + self.b
    }

    fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PwqError {
    #[error("piecewise function needs at least one segment")]
    Empty,
    #[error("segment {0} has invalid or non-contiguous interval")]
    BadInterval(usize),
    #[error("non-finite coefficient in segment {0}")]
    NonFinite(usize),
    #[error("function is not convex near x = {0}")]
    NotConvex(f64),
}

/// A contiguous piecewise-quadratic function, `+∞` outside its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseQuadratic {
    segments: Vec<Segment>,
}

/// Tolerance for value continuity at junctions, relative to the local scale.
const JOIN_TOL: f64 = 1e-9;

impl PiecewiseQuadratic {
    /// Builds from ordered, contiguous segments. Adjacent identical pieces are merged.
    pub fn new(segments: Vec<Segment>) -> Result<Self, PwqError> {
        if segments.is_empty() {
            return Err(PwqError::Empty);
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.lo <= s.hi) {
                return Err(PwqError::BadInterval(i));
            }
            if !(s.a.is_finite() && s.b.is_finite() && s.c.is_finite()) {
                return Err(PwqError::NonFinite(i));
            }
            if i > 0 && segments[i - 1].hi != s.lo {
                return Err(PwqError::BadInterval(i));
            }
        }
        let mut merged: Vec<Segment> = Vec::with_capacity(segments.len());
        for s in segments {
            match merged.last_mut() {
                Some(last) if last.a == s.a && last.b == s.b && last.c == s.c => last.hi = s.hi,
                Some(last) if s.is_point() && !last.is_point() => {} // redundant junction point
                _ => merged.push(s),
            }
        }
        Ok(PiecewiseQuadratic { segments: merged })
    }

    /// The single quadratic `a·x² + b·x + c` on all of ℝ.
    pub fn quadratic(a: f64, b: f64, c: f64) -> Self {
        PiecewiseQuadratic {
            segments: vec![Segment::new(f64::NEG_INFINITY, f64::INFINITY, a, b, c)],
        }
    }

    /// `m/2 · x²` on all of ℝ (flat-book cost with depth density `m`).
    pub fn half_quadratic(m: f64) -> Self {
        Self::quadratic(0.5 * m, 0.0, 0.0)
    }

    /// `k·|x|` on all of ℝ (bid-ask spread cost with half-spread `k`).
    pub fn scaled_abs(k: f64) -> Self {
        PiecewiseQuadratic {
            segments: vec![
                Segment::new(f64::NEG_INFINITY, 0.0, 0.0, -k, 0.0),
                Segment::new(0.0, f64::INFINITY, 0.0, k, 0.0),
            ],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.segments[0].lo, self.segments[self.segments.len() - 1].hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.domain();
        lo <= x && x <= hi
    }

    /// Breakpoints of the subdivision, domain endpoints included when finite.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        if self.segments[0].lo.is_finite() {
            out.push(self.segments[0].lo);
        }
        for s in &self.segments {
            if s.hi.is_finite() {
                out.push(s.hi);
            }
        }
        out.dedup();
        out
    }

    fn segment_index(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        // binary search on segment lower bounds
        let mut lo = 0usize;
        let mut hi = self.segments.len() - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.segments[mid].lo <= x {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        // point segments can stack at the same abscissa; prefer the one covering x
        while lo + 1 < self.segments.len() && self.segments[lo].hi < x {
            lo += 1;
        }
        Some(lo)
    }

    /// Function value, `+∞` outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        match self.segment_index(x) {
            Some(i) => self.segments[i].eval(x),
            None => f64::INFINITY,
        }
    }

    /// Right derivative (left derivative at the right domain endpoint).
    pub fn deriv(&self, x: f64) -> f64 {
        match self.segment_index(x) {
            Some(i) => {
                if x == self.segments[i].hi && i + 1 < self.segments.len() {
                    self.segments[i + 1].slope(x)
                } else {
                    self.segments[i].slope(x)
                }
            }
            None => f64::NAN,
        }
    }

    /// One-sided derivatives at `x`: `(left, right)`. At domain endpoints the
    /// outward side is reported as `±∞` (the function jumps to `+∞` there).
    pub fn deriv_one_sided(&self, x: f64) -> (f64, f64) {
        match self.segment_index(x) {
            None => (f64::NAN, f64::NAN),
            Some(i) => {
                let s = &self.segments[i];
                let left = if x > s.lo {
                    s.slope(x)
                } else if i > 0 {
                    self.segments[i - 1].slope(x)
                } else {
                    f64::NEG_INFINITY
                };
                let right = if x < s.hi {
                    s.slope(x)
                } else if i + 1 < self.segments.len() {
                    self.segments[i + 1].slope(x)
                } else {
                    f64::INFINITY
                };
                (left, right)
            }
        }
    }

    /// Validates convexity: each piece convex, values continuous, slopes
    /// non-decreasing across junctions.
    pub fn check_convex(&self) -> Result<(), PwqError> {
        for s in &self.segments {
            if s.a < 0.0 {
                return Err(PwqError::NotConvex(if s.lo.is_finite() { s.lo } else { s.hi }));
            }
        }
        for w in self.segments.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            let x = l.hi;
            let scale = l.eval(x).abs().max(1.0);
            if (l.eval(x) - r.eval(x)).abs() > JOIN_TOL * scale {
                return Err(PwqError::NotConvex(x));
            }
            if l.slope(x) > r.slope(x) + JOIN_TOL * (l.slope(x).abs().max(1.0)) {
                return Err(PwqError::NotConvex(x));
            }
        }
        Ok(())
    }

    /// Range of slopes attained on the domain: `(inf f', sup f')`.
    pub fn slope_range(&self) -> (f64, f64) {
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        let lo = if first.lo.is_finite() {
            first.slope(first.lo)
        } else if first.a > 0.0 {
            f64::NEG_INFINITY
        } else {
            first.b
        };
        let hi = if last.hi.is_finite() {
            last.slope(last.hi)
        } else if last.a > 0.0 {
            f64::INFINITY
        } else {
            last.b
        };
        (lo, hi)
    }

    /// Exact Legendre–Fenchel transform `f*(y) = sup_x (x·y − f(x))` of a
    /// convex input. Quadratic pieces map to quadratic pieces (slope interval
    /// becomes the new domain), linear pieces collapse to kinks, slope jumps
    /// open up linear pieces, and finite domain endpoints yield linear tails.
    pub fn conjugate(&self) -> Result<PiecewiseQuadratic, PwqError> {
        self.check_convex()?;
        let mut out: Vec<Segment> = Vec::with_capacity(self.segments.len() + 2);

        // slopes attained at each segment's ends (±∞ on unbounded quadratics)
        let end_slopes = |s: &Segment| {
            let lo = if s.lo.is_finite() {
                s.slope(s.lo)
            } else if s.a > 0.0 {
                f64::NEG_INFINITY
            } else {
                s.b
            };
            let hi = if s.hi.is_finite() {
                s.slope(s.hi)
            } else if s.a > 0.0 {
                f64::INFINITY
            } else {
                s.b
            };
            (lo, hi)
        };

        let first = &self.segments[0];
        let mut prev_slope = end_slopes(first).0;
        // finite left endpoint: every slope below f'(lo) is maximized at lo
        if first.lo.is_finite() {
            out.push(Segment::new(
                f64::NEG_INFINITY,
                prev_slope,
                0.0,
                first.lo,
                -first.eval(first.lo),
            ));
        }

        for s in &self.segments {
            let (m_lo, m_hi) = end_slopes(s);
            // a slope jump at the junction is maximized at the junction point
            if m_lo > prev_slope && prev_slope.is_finite() {
                out.push(Segment::new(prev_slope, m_lo, 0.0, s.lo, -s.eval(s.lo)));
            }
            if s.a > 0.0 && m_hi > m_lo {
                // x(y) = (y − b)/(2a) gives f*(y) = (y − b)²/(4a) − c
                let inv4a = 1.0 / (4.0 * s.a);
                out.push(Segment::new(
                    m_lo,
                    m_hi,
                    inv4a,
                    -s.b / (2.0 * s.a),
                    s.b * s.b * inv4a - s.c,
                ));
            }
            // linear pieces only contribute the kink at y = b; the values there
            // are pinned by the adjacent junction/tail pieces
            prev_slope = m_hi;
        }

        // finite right endpoint: every slope above f'(hi) is maximized at hi
        let last = &self.segments[self.segments.len() - 1];
        if last.hi.is_finite() {
            out.push(Segment::new(
                prev_slope,
                f64::INFINITY,
                0.0,
                last.hi,
                -last.eval(last.hi),
            ));
        }

        if out.is_empty() {
            // f is linear on all of ℝ: conjugate is the point {b} with value −c
            let s = &self.segments[0];
            return PiecewiseQuadratic::new(vec![Segment::new(s.b, s.b, 0.0, 0.0, -s.c)]);
        }

        let conj = PiecewiseQuadratic::new(out)?;
        debug_assert!(conj.check_convex().is_ok());
        Ok(conj)
    }

    /// Extends a bounded domain to all of ℝ with convex quadratic tails of
    /// curvature `density` that match the boundary value and inner slope
    /// (the book keeps absorbing volume at that depth density beyond its
    /// last level).
    pub fn with_quadratic_tails(&self, density: f64) -> Result<PiecewiseQuadratic, PwqError> {
        if !(density > 0.0 && density.is_finite()) {
            return Err(PwqError::NonFinite(0));
        }
        let mut segs = self.segments.clone();
        let (lo, hi) = self.domain();
        if lo.is_finite() {
            let first = segs[0];
            let m = first.slope(lo);
            let v = first.eval(lo);
            // (d/2)(x − lo)² + m(x − lo) + v
            let a = 0.5 * density;
            let b = m - density * lo;
            let c = v - m * lo + a * lo * lo;
            segs.insert(0, Segment::new(f64::NEG_INFINITY, lo, a, b, c));
        }
        if hi.is_finite() {
            let last = segs[segs.len() - 1];
            let m = last.slope(hi);
            let v = last.eval(hi);
            let a = 0.5 * density;
            let b = m - density * hi;
            let c = v - m * hi + a * hi * hi;
            segs.push(Segment::new(hi, f64::INFINITY, a, b, c));
        }
        PiecewiseQuadratic::new(segs)
    }

    /// Argument scaling: returns `g` with `g(x) = f(k·x)`, `k > 0`.
    pub fn scale_arg(&self, k: f64) -> PiecewiseQuadratic {
        assert!(k > 0.0 && k.is_finite(), "scale factor must be positive");
        let segs = self
            .segments
            .iter()
            .map(|s| Segment::new(s.lo / k, s.hi / k, s.a * k * k, s.b * k, s.c))
            .collect();
        PiecewiseQuadratic::new(segs).expect("scaling preserves segment order")
    }

    /// Minimum value and a minimizer over the domain.
    pub fn minimize(&self) -> (f64, f64) {
        let mut best = (f64::INFINITY, f64::NAN);
        for s in &self.segments {
            let mut cands = [s.lo, s.hi, f64::NAN];
            if s.a > 0.0 {
                let v = -s.b / (2.0 * s.a);
                if s.lo <= v && v <= s.hi {
                    cands[2] = v;
                }
            }
            for x in cands {
                if x.is_finite() {
                    let f = s.eval(x);
                    if f < best.0 {
                        best = (f, x);
                    }
                }
            }
            // unbounded linear decrease means no finite minimum; callers only
            // use this on coercive functions
        }
        (best.1, best.0)
    }
}
