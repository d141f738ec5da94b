//! Axis-aligned boxes and closed intervals.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "[{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn shift(self, by: f64) -> Interval {
        Interval::new(self.lo + by, self.hi + by)
    }

    pub fn scale(self, by: f64) -> Interval {
        if by >= 0.0 {
            Interval::new(self.lo * by, self.hi * by)
        } else {
            Interval::new(self.hi * by, self.lo * by)
        }
    }

    /// Range of `v²` for `v` in the interval.
    pub fn square(self) -> Interval {
        let (a, b) = (self.lo * self.lo, self.hi * self.hi);
        if self.lo <= 0.0 && self.hi >= 0.0 {
            Interval::new(0.0, a.max(b))
        } else {
            Interval::new(a.min(b), a.max(b))
        }
    }
}

/// Axis-aligned hyper-rectangle `T = [lower, upper]`.
///
/// Zero-width sides are allowed; they freeze a coordinate (feature boxes
/// perturb only a handful of pixels and keep the rest fixed).
impl std::ops::Add for Interval {
    type Output = Interval;

    fn add(self, other: Interval) -> Interval {
        Interval::new(self.lo + other.lo, self.hi + other.hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl InputBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::input("box must have at least one dimension"));
        }
        for (j, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::input(format!("box side {j} is not finite")));
            }
            if l > u {
                return Err(Error::input(format!(
                    "box side {j} has lower {l} > upper {u}"
                )));
            }
        }
        Ok(InputBox { lower, upper })
    }

    /// The degenerate box `{x}`.
    pub fn point(x: &[f64]) -> Result<Self> {
        InputBox::new(x.to_vec(), x.to_vec())
    }

    /// `[center - radius, center + radius]` on every coordinate.
    pub fn around(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::input(format!("radius must be >= 0, got {radius}")));
        }
        InputBox::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    /// `[center - radii, center + radii]` with per-coordinate radii.
    pub fn around_with(center: &[f64], radii: &[f64]) -> Result<Self> {
        check_dim(center.len(), radii.len())?;
        if radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(Error::input("radii must be >= 0"));
        }
        InputBox::new(
            center.iter().zip(radii).map(|(c, r)| c - r).collect(),
            center.iter().zip(radii).map(|(c, r)| c + r).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, j: usize) -> Interval {
        Interval::new(self.lower[j], self.upper[j])
    }

    pub fn sides(&self) -> impl Iterator<Item = Interval> + '_ {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| Interval::new(*l, *u))
    }

    pub fn width(&self, j: usize) -> f64 {
        self.upper[j] - self.lower[j]
    }

    /// Longest side length (`D` in the covering-number bound).
    pub fn max_side(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).fold(0.0, f64::max)
    }

    /// Indices of the sides with positive width.
    pub fn free_dims(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| self.width(j) > 0.0).collect()
    }

    /// Number of sides with positive width.
    pub fn effective_dim(&self) -> usize {
        (0..self.dim()).filter(|&j| self.width(j) > 0.0).count()
    }

    pub fn is_point(&self) -> bool {
        self.effective_dim() == 0
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { 0.5 * (l + u) })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// True when `other` lies inside `self`.
    pub fn contains_box(&self, other: &InputBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|j| self.lower[j] <= other.lower[j] && other.upper[j] <= self.upper[j])
    }

    /// Clamp `x` onto the box.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    /// The corner maximising the Euclidean distance from `from`.
    pub fn farthest_corner(&self, from: &[f64]) -> Vec<f64> {
        from.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(f, (l, u))| if (f - l).abs() >= (u - f).abs() { *l } else { *u })
            .collect()
    }

    /// Intersect every side with `[lo, hi]`, keeping at least the clamped
    /// centre so that the result is never empty.
    pub fn clip(&self, lo: f64, hi: f64) -> InputBox {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| {
                let (a, b) = (l.max(lo), u.min(hi));
                if a <= b {
                    (a, b)
                } else {
                    let c = (0.5 * (l + u)).clamp(lo, hi);
                    (c, c)
                }
            })
            .unzip();
        InputBox { lower, upper }
    }

    /// Widest side, lowest index on ties; `None` for a point.
    pub fn widest_dim(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.dim() {
            let w = self.width(j);
            if w > 0.0 && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((j, w));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Bisect along the widest side.
    pub fn bisect(&self) -> Option<(InputBox, InputBox)> {
        let j = self.widest_dim()?;
        let mid = 0.5 * (self.lower[j] + self.upper[j]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[j] = mid;
        right.lower[j] = mid;
        Some((left, right))
    }

    /// Map a point of the unit cube `[0,1]^dim` into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(t, (l, h))| l + t * (h - l))
            .collect()
    }
}
