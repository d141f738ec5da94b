//! Affine sandwiches `a_L + b_L φ ≤ ψ(φ) ≤ a_U + b_U φ` on an interval.
//!
//! The interval is cut at the flex points of `ψ`. On a concave piece the
//! chord lies below the curve, on a convex piece the tangent at the
//! midpoint does. Neighbouring pieces are merged left to right into a
//! single line that stays below both. Upper lines come from running the
//! same construction on `−ψ`.

use serde::{Deserialize, Serialize};

use crate::domain::Interval;
use crate::error::{Error, Result};
use crate::kernels::{scan_flex_points, KernelSpec, FLEX_SCAN_SAMPLES};

/// A scalar function with first and second derivatives.
pub trait Curve {
    fn value(&self, t: f64) -> f64;
    fn slope(&self, t: f64) -> f64;
    fn curvature(&self, t: f64) -> f64;

    /// Points in `(lo, hi)` where the curvature changes sign.
    fn flex_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        scan_flex_points(|t| self.curvature(t), lo, hi, FLEX_SCAN_SAMPLES)
    }
}

/// `t ↦ a + b t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub a: f64,
    pub b: f64,
}

impl Line {
    pub fn at(&self, t: f64) -> f64 {
        self.a + self.b * t
    }

    fn through(t0: f64, v0: f64, t1: f64, v1: f64) -> Line {
        if t1 == t0 {
            return Line { a: v0.min(v1), b: 0.0 };
        }
        let b = (v1 - v0) / (t1 - t0);
        Line { a: v0 - b * t0, b }
    }

    fn negate(self) -> Line {
        Line {
            a: -self.a,
            b: -self.b,
        }
    }
}

/// Lower and upper lines valid on `interval`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEnvelope {
    pub lower: Line,
    pub upper: Line,
    pub interval: Interval,
}

/// `ψ` of a kernel on its extended domain.
pub struct Psi<'a>(pub &'a KernelSpec);

impl Curve for Psi<'_> {
    fn value(&self, t: f64) -> f64 {
        self.0.psi_jet(t).0
    }

    fn slope(&self, t: f64) -> f64 {
        self.0.psi_jet(t).1
    }

    fn curvature(&self, t: f64) -> f64 {
        self.0.psi_jet(t).2
    }

    fn flex_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.0
            .psi_flex_points(Interval::new(lo, hi))
            .unwrap_or_default()
    }
}

struct Negated<'a, C: ?Sized>(&'a C);

impl<C: Curve + ?Sized> Curve for Negated<'_, C> {
    fn value(&self, t: f64) -> f64 {
        -self.0.value(t)
    }

    fn slope(&self, t: f64) -> f64 {
        -self.0.slope(t)
    }

    fn curvature(&self, t: f64) -> f64 {
        -self.0.curvature(t)
    }

    fn flex_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.0.flex_points(lo, hi)
    }
}

/// Envelope of `ψ` on `interval`, which must lie inside `ψ`'s domain.
pub fn linear_envelope(spec: &KernelSpec, interval: Interval) -> Result<LinearEnvelope> {
    let dom = spec.psi_domain();
    let slack = 1e-12 * (1.0 + interval.lo.abs().max(interval.hi.abs()));
    if !(interval.lo <= interval.hi) {
        return Err(Error::input(format!(
            "empty interval [{}, {}]",
            interval.lo, interval.hi
        )));
    }
    for v in [interval.lo, interval.hi] {
        if v < dom.lo - slack || v > dom.hi + slack {
            return Err(Error::Domain {
                what: "psi",
                value: v,
                lo: dom.lo,
                hi: dom.hi,
            });
        }
    }
    Ok(kernel_envelope(spec, interval))
}

/// Envelope of `ψ` on its extended domain, used by the bounding code where
/// box points may leave the unit sphere.
pub fn kernel_envelope(spec: &KernelSpec, interval: Interval) -> LinearEnvelope {
    envelope(&Psi(spec), interval)
}

/// Envelope of an arbitrary curve.
pub fn envelope<C: Curve + ?Sized>(curve: &C, interval: Interval) -> LinearEnvelope {
    LinearEnvelope {
        lower: lower_line(curve, interval),
        upper: lower_line(&Negated(curve), interval).negate(),
        interval,
    }
}

/// A line below `curve` on `interval`.
pub fn lower_line<C: Curve + ?Sized>(curve: &C, interval: Interval) -> Line {
    let (lo, hi) = (interval.lo, interval.hi);
    if lo == hi {
        return Line {
            a: curve.value(lo),
            b: 0.0,
        };
    }
    let mut cuts = vec![lo];
    cuts.extend(curve.flex_points(lo, hi).into_iter().filter(|t| *t > lo && *t < hi));
    cuts.push(hi);

    let mut merged = piece_line(curve, cuts[0], cuts[1]);
    for w in cuts.windows(2).skip(1) {
        let next = piece_line(curve, w[0], w[1]);
        merged = merge(merged, next, lo, w[0], w[1]);
    }
    // absorb rounding in the constructions above
    let scale = merged.a.abs() + merged.b.abs() * lo.abs().max(hi.abs()) + 1e-300;
    merged.a -= 8.0 * f64::EPSILON * scale;
    merged
}

/// Chord on a concave piece, midpoint tangent on a convex one.
fn piece_line<C: Curve + ?Sized>(curve: &C, lo: f64, hi: f64) -> Line {
    if is_convex_piece(curve, lo, hi) {
        let mid = 0.5 * (lo + hi);
        let (v, d) = (curve.value(mid), curve.slope(mid));
        Line { a: v - d * mid, b: d }
    } else {
        Line::through(lo, curve.value(lo), hi, curve.value(hi))
    }
}

/// Between flex points the curvature keeps one sign, so the first nonzero
/// interior sample decides. An all-zero piece is affine and either rule fits.
fn is_convex_piece<C: Curve + ?Sized>(curve: &C, lo: f64, hi: f64) -> bool {
    const PROBES: usize = 9;
    for k in 1..=PROBES {
        let t = lo + (hi - lo) * k as f64 / (PROBES + 1) as f64;
        let c = curve.curvature(t);
        if c > 0.0 {
            return true;
        }
        if c < 0.0 {
            return false;
        }
    }
    true
}

/// One line below `f1` on `[lo, mid]` and `f2` on `[mid, hi]`, both lines.
///
/// When `f2(mid) ≤ f1(mid)` the result passes through
/// `(lo, min(f1(lo), f2(lo)))` and `(hi, f2(hi))`; otherwise it passes through
/// `(lo, f1(lo))` and `(hi, min(f1(hi), f2(hi)))`. Being affine, the result is
/// checked against each line at the ends of that line's piece only.
fn merge(f1: Line, f2: Line, lo: f64, mid: f64, hi: f64) -> Line {
    if f2.at(mid) <= f1.at(mid) {
        Line::through(lo, f1.at(lo).min(f2.at(lo)), hi, f2.at(hi))
    } else {
        Line::through(lo, f1.at(lo), hi, f1.at(hi).min(f2.at(hi)))
    }
}
