//! Covariance functions and their `Σ(x, y) = ψ(φ(x, y))` decomposition.
//!
//! Every family factors into a scalar "feature" `φ` carrying all two-point
//! dependence and a smooth scalar map `ψ`. The bound engine leans on three
//! properties of the split:
//!
//! * `φ` is continuous,
//! * `ψ` is differentiable with a continuous derivative, so it can be
//!   sandwiched between lines on any interval,
//! * `sup_{x ∈ T} Σ_i c_i φ(x, x_i)` is computable over a box `T`.
//!
//! | family | `φ(x, y)` | `ψ(φ)` |
//! |---|---|---|
//! | squared-exponential | `Σ θ_j (x_j − y_j)²` | `σ² e^{−φ}` |
//! | relu-deep | `k₁ + k₂ x·y` | layer recursion, see [`KernelSpec::psi`] |
//! | rational-quadratic | `Σ θ_j (x_j − y_j)²` | `σ² (1 + φ/2)^{−α}` |
//! | linear | `Σ (x_j − θ_j)(y_j − θ_j)` | `σ² φ` |
//! | periodic | `Σ θ_j sin²(p_j (x_j − y_j))` | `σ² e^{−φ/2}` |
//! | matern-half-integer | `(2p + 1) Σ θ_j (x_j − y_j)²` | `σ² e^{−√φ} Σ_l k_{l,p} φ^{(p−l)/2} · p!/(2p)!` |

use std::f64::consts::PI;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::domain::{InputBox, Interval};
use crate::error::{check_dim, Error, Result};

/// Number of samples in the curvature sign scan used to locate flex points.
pub const FLEX_SCAN_SAMPLES: usize = 1024;

/// A kernel family together with its hyperparameters.
///
/// Serialised as `{"family": "<name>", "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case")]
pub enum KernelSpec {
    /// `σ² exp(−Σ θ_j (x_j − y_j)²)`; `theta` are inverse squared lengthscales.
    SquaredExponential { variance: f64, theta: Vec<f64> },
    /// Infinitely wide fully connected ReLU network with `layers` hidden
    /// layers, weight prior variance `σ_w²` and bias prior variance `σ_b²`.
    ReluDeep {
        layers: usize,
        weight_variance: f64,
        bias_variance: f64,
        input_dim: usize,
    },
    /// `σ² (1 + ½ Σ θ_j (x_j − y_j)²)^{−α}`.
    RationalQuadratic {
        variance: f64,
        alpha: f64,
        theta: Vec<f64>,
    },
    /// `σ² Σ (x_j − θ_j)(y_j − θ_j)`; `theta` are offsets.
    Linear { variance: f64, theta: Vec<f64> },
    /// `σ² exp(−½ Σ θ_j sin²(p_j (x_j − y_j)))`.
    Periodic {
        variance: f64,
        theta: Vec<f64>,
        frequency: Vec<f64>,
    },
    /// Matérn with `ν = p + ½`, `p ∈ {0, 1, 2}`.
    MaternHalfInteger { variance: f64, theta: Vec<f64>, p: u32 },
}

/// Result of maximising `Σ_i c_i φ(x, x_i)` over a box.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiSup {
    /// Upper bound on the supremum; equal to it when `exact`.
    pub value: f64,
    /// A point of the box. When `exact` it attains `value`.
    pub argmax: Vec<f64>,
    /// False when `value` is a sound over-approximation only.
    pub exact: bool,
}

impl KernelSpec {
    pub fn squared_exponential(variance: f64, theta: Vec<f64>) -> Self {
        KernelSpec::SquaredExponential { variance, theta }
    }

    pub fn relu(layers: usize, weight_variance: f64, bias_variance: f64, input_dim: usize) -> Self {
        KernelSpec::ReluDeep {
            layers,
            weight_variance,
            bias_variance,
            input_dim,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::SquaredExponential { .. } => "squared-exponential",
            KernelSpec::ReluDeep { .. } => "relu-deep",
            KernelSpec::RationalQuadratic { .. } => "rational-quadratic",
            KernelSpec::Linear { .. } => "linear",
            KernelSpec::Periodic { .. } => "periodic",
            KernelSpec::MaternHalfInteger { .. } => "matern-half-integer",
        }
    }

    /// Check the hyperparameter invariants.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::input(format!("{name} must be finite and > 0, got {v}")))
            }
        }
        fn weights(name: &str, theta: &[f64], allow_negative: bool) -> Result<()> {
            if theta.is_empty() {
                return Err(Error::input(format!("{name} must be non-empty")));
            }
            for (j, t) in theta.iter().enumerate() {
                if !t.is_finite() || (!allow_negative && *t < 0.0) {
                    return Err(Error::input(format!("{name}[{j}] = {t} is invalid")));
                }
            }
            Ok(())
        }
        match self {
            KernelSpec::SquaredExponential { variance, theta } => {
                positive("variance", *variance)?;
                weights("theta", theta, false)
            }
            KernelSpec::ReluDeep {
                layers,
                weight_variance,
                bias_variance,
                input_dim,
            } => {
                if *layers < 1 {
                    return Err(Error::input("relu-deep needs at least one layer"));
                }
                if *input_dim < 1 {
                    return Err(Error::input("relu-deep input_dim must be >= 1"));
                }
                positive("weight_variance", *weight_variance)?;
                if !(bias_variance.is_finite() && *bias_variance >= 0.0) {
                    return Err(Error::input(format!(
                        "bias_variance must be >= 0, got {bias_variance}"
                    )));
                }
                Ok(())
            }
            KernelSpec::RationalQuadratic {
                variance,
                alpha,
                theta,
            } => {
                positive("variance", *variance)?;
                positive("alpha", *alpha)?;
                weights("theta", theta, false)
            }
            KernelSpec::Linear { variance, theta } => {
                positive("variance", *variance)?;
                weights("theta", theta, true)
            }
            KernelSpec::Periodic {
                variance,
                theta,
                frequency,
            } => {
                positive("variance", *variance)?;
                weights("theta", theta, false)?;
                weights("frequency", frequency, true)?;
                check_dim(theta.len(), frequency.len())
            }
            KernelSpec::MaternHalfInteger { variance, theta, p } => {
                positive("variance", *variance)?;
                weights("theta", theta, false)?;
                if *p > 2 {
                    return Err(Error::input(format!(
                        "matern-half-integer supports p in {{0, 1, 2}}, got {p}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        match self {
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. }
            | KernelSpec::Linear { theta, .. }
            | KernelSpec::Periodic { theta, .. }
            | KernelSpec::MaternHalfInteger { theta, .. } => theta.len(),
            KernelSpec::ReluDeep { input_dim, .. } => *input_dim,
        }
    }

    /// True when `Σ(x, x)` does not depend on `x`.
    pub fn is_stationary(&self) -> bool {
        !matches!(self, KernelSpec::Linear { .. } | KernelSpec::ReluDeep { .. })
    }

    fn check_inputs(&self, x1: &[f64], x2: &[f64]) -> Result<()> {
        check_dim(self.input_dim(), x1.len())?;
        check_dim(self.input_dim(), x2.len())
    }

    /// Evaluate the kernel from its textbook definition.
    ///
    /// For `relu-deep` this runs the layer recursion on the raw inputs;
    /// it agrees with `psi(phi(x, y))` when both inputs have unit norm.
    pub fn eval(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_inputs(x1, x2)?;
        Ok(match self {
            KernelSpec::SquaredExponential { variance, theta } => {
                variance * (-weighted_sq_dist(theta, x1, x2)).exp()
            }
            KernelSpec::ReluDeep {
                layers,
                weight_variance: sw,
                bias_variance: sb,
                input_dim,
            } => {
                let m = *input_dim as f64;
                let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
                let mut s11 = sb + sw / m * dot(x1, x1);
                let mut s22 = sb + sw / m * dot(x2, x2);
                let mut s12 = sb + sw / m * dot(x1, x2);
                for _ in 0..*layers {
                    let norm = (s11 * s22).sqrt();
                    let beta = if norm > 0.0 {
                        (s12 / norm).clamp(-1.0, 1.0).acos()
                    } else {
                        PI / 2.0
                    };
                    s12 = sb + sw / (2.0 * PI) * norm * (beta.sin() + (PI - beta) * beta.cos());
                    s11 = sb + sw / 2.0 * s11;
                    s22 = sb + sw / 2.0 * s22;
                }
                s12
            }
            KernelSpec::RationalQuadratic {
                variance,
                alpha,
                theta,
            } => variance * (1.0 + 0.5 * weighted_sq_dist(theta, x1, x2)).powf(-alpha),
            KernelSpec::Linear { variance, theta } => {
                variance
                    * theta
                        .iter()
                        .zip(x1.iter().zip(x2))
                        .map(|(t, (a, b))| (a - t) * (b - t))
                        .sum::<f64>()
            }
            KernelSpec::Periodic {
                variance,
                theta,
                frequency,
            } => {
                let s: f64 = theta
                    .iter()
                    .zip(frequency)
                    .zip(x1.iter().zip(x2))
                    .map(|((t, p), (a, b))| t * (p * (a - b)).sin().powi(2))
                    .sum();
                variance * (-0.5 * s).exp()
            }
            KernelSpec::MaternHalfInteger { variance, theta, p } => {
                let r = weighted_sq_dist(theta, x1, x2).sqrt();
                variance
                    * match p {
                        0 => (-r).exp(),
                        1 => {
                            let s = 3f64.sqrt() * r;
                            (1.0 + s) * (-s).exp()
                        }
                        _ => {
                            let s = 5f64.sqrt() * r;
                            (1.0 + s + 5.0 * r * r / 3.0) * (-s).exp()
                        }
                    }
            }
        })
    }

    /// `φ(x1, x2)`.
    pub fn phi(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_inputs(x1, x2)?;
        Ok(self.phi_unchecked(x1, x2))
    }

    pub(crate) fn phi_unchecked(&self, x1: &[f64], x2: &[f64]) -> f64 {
        match self {
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. } => weighted_sq_dist(theta, x1, x2),
            KernelSpec::MaternHalfInteger { theta, p, .. } => {
                (2 * p + 1) as f64 * weighted_sq_dist(theta, x1, x2)
            }
            KernelSpec::Periodic {
                theta, frequency, ..
            } => theta
                .iter()
                .zip(frequency)
                .zip(x1.iter().zip(x2))
                .map(|((t, p), (a, b))| t * (p * (a - b)).sin().powi(2))
                .sum(),
            KernelSpec::Linear { theta, .. } => theta
                .iter()
                .zip(x1.iter().zip(x2))
                .map(|(t, (a, b))| (a - t) * (b - t))
                .sum(),
            KernelSpec::ReluDeep { .. } => {
                let (k1, k2) = self.relu_k();
                k1 + k2 * x1.iter().zip(x2).map(|(a, b)| a * b).sum::<f64>()
            }
        }
    }

    /// Domain of `ψ`. Arguments outside it are rejected by [`KernelSpec::psi`].
    pub fn psi_domain(&self) -> Interval {
        match self {
            KernelSpec::Linear { .. } => Interval::new(f64::NEG_INFINITY, f64::INFINITY),
            KernelSpec::ReluDeep { .. } => Interval::new(-1.0, 1.0),
            _ => Interval::new(0.0, f64::INFINITY),
        }
    }

    /// `ψ(φ)`, rejecting arguments outside [`KernelSpec::psi_domain`].
    pub fn psi(&self, phi: f64) -> Result<f64> {
        let dom = self.psi_domain();
        let slack = 1e-12 * (1.0 + phi.abs());
        if phi.is_nan() || phi < dom.lo - slack || phi > dom.hi + slack {
            return Err(Error::Domain {
                what: "psi",
                value: phi,
                lo: dom.lo,
                hi: dom.hi,
            });
        }
        Ok(self.psi_jet(phi).0)
    }

    /// `(ψ, ψ', ψ'')` at `φ`, on the extended domain.
    ///
    /// `relu-deep` extends `ψ` past `[−1, 1]` by its tangent lines at the
    /// endpoints. Box points in a unit-normalised input space can leave the
    /// unit sphere, which pushes `φ` slightly beyond 1; the extension keeps
    /// `ψ` convex and continuously differentiable there.
    pub fn psi_jet(&self, phi: f64) -> (f64, f64, f64) {
        match self {
            KernelSpec::SquaredExponential { variance, .. } => {
                let e = variance * (-phi).exp();
                (e, -e, e)
            }
            KernelSpec::RationalQuadratic {
                variance, alpha, ..
            } => {
                let base = 1.0 + 0.5 * phi;
                let v = variance * base.powf(-alpha);
                (
                    v,
                    -0.5 * alpha * v / base,
                    0.25 * alpha * (alpha + 1.0) * v / (base * base),
                )
            }
            KernelSpec::Linear { variance, .. } => (variance * phi, *variance, 0.0),
            KernelSpec::Periodic { variance, .. } => {
                let e = variance * (-0.5 * phi).exp();
                (e, -0.5 * e, 0.25 * e)
            }
            KernelSpec::MaternHalfInteger { variance, p, .. } => matern_jet(*variance, *p, phi),
            KernelSpec::ReluDeep { .. } => {
                if phi > 1.0 {
                    let (v, d, _) = self.relu_jet(1.0);
                    (v + d * (phi - 1.0), d, 0.0)
                } else if phi < -1.0 {
                    let (v, d, _) = self.relu_jet(-1.0);
                    (v + d * (phi + 1.0), d, 0.0)
                } else {
                    self.relu_jet(phi)
                }
            }
        }
    }

    /// `ψ(φ(x1, x2))` without dimension checks. This is the covariance used
    /// by [`crate::gp::TrainedGP`], so that inference and bounding see the
    /// same function.
    pub fn covariance(&self, x1: &[f64], x2: &[f64]) -> f64 {
        self.psi_jet(self.phi_unchecked(x1, x2)).0
    }

    /// Constants `(k₁, k₂)` of the ReLU feature `φ = k₁ + k₂ x·y`.
    pub fn relu_k(&self) -> (f64, f64) {
        match self {
            KernelSpec::ReluDeep {
                weight_variance: sw,
                bias_variance: sb,
                input_dim,
                ..
            } => {
                let w = sw / *input_dim as f64;
                let c0 = sb + w;
                (sb / c0, w / c0)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Forward-mode evaluation of the ReLU recursion as a function of the
    /// first-layer correlation `ρ₀ = φ ∈ [−1, 1]`.
    fn relu_jet(&self, phi: f64) -> (f64, f64, f64) {
        let KernelSpec::ReluDeep {
            layers,
            weight_variance: sw,
            bias_variance: sb,
            input_dim,
        } = self
        else {
            unreachable!()
        };
        let mut c = sb + sw / *input_dim as f64;
        let (mut rho, mut d1, mut d2) = (phi, 1.0, 0.0);
        let mut sigma = c * rho;
        for _ in 0..*layers {
            let c_next = sb + 0.5 * sw * c;
            let scale = sw * c / (2.0 * PI);
            let (j, j1, j2) = arc_cosine_jet(rho);
            sigma = sb + scale * j;
            let n1 = scale * j1 * d1;
            let n2 = scale * (j2 * d1 * d1 + j1 * d2);
            // carry derivatives of Σ^l / c_l into the next layer
            rho = sigma / c_next;
            d1 = n1 / c_next;
            d2 = n2 / c_next;
            c = c_next;
        }
        (sigma, d1 * c, d2 * c)
    }

    /// Inflection points of `ψ` inside `interval`, sorted.
    ///
    /// Squared-exponential, rational-quadratic, periodic and Matérn `ψ` are
    /// strictly convex in `φ` and the linear `ψ` is affine, so none of them
    /// has a flex point. ReLU flex points are located numerically from the
    /// sign of `ψ''` on a uniform scan refined by bisection.
    pub fn psi_flex_points(&self, interval: Interval) -> Result<Vec<f64>> {
        if !(interval.lo <= interval.hi) {
            return Err(Error::input(format!(
                "empty interval [{}, {}]",
                interval.lo, interval.hi
            )));
        }
        Ok(match self {
            KernelSpec::ReluDeep { .. } => scan_flex_points(
                |t| self.psi_jet(t).2,
                interval.lo,
                interval.hi,
                FLEX_SCAN_SAMPLES,
            ),
            _ => Vec::new(),
        })
    }

    /// Enclosure of `{φ(x, anchor) : x ∈ region}`.
    pub fn phi_range(&self, region: &InputBox, anchor: &[f64]) -> Result<Interval> {
        check_dim(self.input_dim(), region.dim())?;
        check_dim(self.input_dim(), anchor.len())?;
        Ok(self.phi_range_unchecked(region, anchor))
    }

    pub(crate) fn phi_range_unchecked(&self, region: &InputBox, anchor: &[f64]) -> Interval {
        let mut acc = Interval::point(0.0);
        match self {
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. } => {
                for (j, side) in region.sides().enumerate() {
                    acc = acc.add(side.shift(-anchor[j]).square().scale(theta[j]));
                }
            }
            KernelSpec::MaternHalfInteger { theta, p, .. } => {
                for (j, side) in region.sides().enumerate() {
                    acc = acc.add(side.shift(-anchor[j]).square().scale(theta[j]));
                }
                acc = acc.scale((2 * p + 1) as f64);
            }
            KernelSpec::Periodic {
                theta, frequency, ..
            } => {
                for (j, side) in region.sides().enumerate() {
                    let u = side.shift(-anchor[j]).scale(frequency[j]);
                    acc = acc.add(sin2_range(u).range.scale(theta[j]));
                }
            }
            KernelSpec::Linear { theta, .. } => {
                for (j, side) in region.sides().enumerate() {
                    acc = acc.add(side.shift(-theta[j]).scale(anchor[j] - theta[j]));
                }
            }
            KernelSpec::ReluDeep { .. } => {
                let (k1, k2) = self.relu_k();
                for (j, side) in region.sides().enumerate() {
                    acc = acc.add(side.scale(anchor[j]));
                }
                acc = acc.scale(k2).shift(k1);
            }
        }
        acc
    }

    /// Enclosure of `{φ(x, x) : x ∈ region}`, used to bound the prior
    /// variance `Σ(x, x)` for non-stationary kernels.
    pub fn self_phi_range(&self, region: &InputBox) -> Interval {
        match self {
            KernelSpec::Linear { theta, .. } => region
                .sides()
                .zip(theta)
                .fold(Interval::point(0.0), |acc, (s, t)| acc.add(s.shift(-t).square())),
            KernelSpec::ReluDeep { .. } => {
                let (k1, k2) = self.relu_k();
                region
                    .sides()
                    .fold(Interval::point(0.0), |acc, s| acc.add(s.square()))
                    .scale(k2)
                    .shift(k1)
            }
            _ => Interval::point(0.0),
        }
    }

    /// `∇ₓ φ(x, anchor)`, or `∇ₓ φ(x, x)` when `anchor` is `None`.
    pub(crate) fn phi_gradient(&self, x: &[f64], anchor: Option<&[f64]>) -> Vec<f64> {
        match (self, anchor) {
            (KernelSpec::Linear { theta, .. }, None) => {
                x.iter().zip(theta).map(|(v, t)| 2.0 * (v - t)).collect()
            }
            (KernelSpec::ReluDeep { .. }, None) => {
                let k2 = self.relu_k().1;
                x.iter().map(|v| 2.0 * k2 * v).collect()
            }
            (_, None) => vec![0.0; x.len()],
            (
                KernelSpec::SquaredExponential { theta, .. } | KernelSpec::RationalQuadratic { theta, .. },
                Some(a),
            ) => sq_dist_gradient(1.0, theta, x, a),
            (KernelSpec::MaternHalfInteger { theta, p, .. }, Some(a)) => {
                sq_dist_gradient((2 * p + 1) as f64, theta, x, a)
            }
            (
                KernelSpec::Periodic {
                    theta, frequency, ..
                },
                Some(a),
            ) => (0..x.len())
                .map(|j| theta[j] * frequency[j] * (2.0 * frequency[j] * (x[j] - a[j])).sin())
                .collect(),
            (KernelSpec::Linear { theta, .. }, Some(a)) => a.iter().zip(theta).map(|(v, t)| v - t).collect(),
            (KernelSpec::ReluDeep { .. }, Some(a)) => {
                let k2 = self.relu_k().1;
                a.iter().map(|v| k2 * v).collect()
            }
        }
    }

    /// Per-coordinate bounds `(sup |∂ⱼφ|, sup |∂ⱼ²φ|)` over `region`. Every
    /// family's `φ` has a diagonal Hessian in `x`.
    pub(crate) fn phi_derivative_sups(&self, region: &InputBox, anchor: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let m = region.dim();
        let abs_max = |s: Interval, c: f64| (s.lo - c).abs().max((s.hi - c).abs());
        match (self, anchor) {
            (KernelSpec::Linear { theta, .. }, None) => (
                region.sides().zip(theta).map(|(s, t)| 2.0 * abs_max(s, *t)).collect(),
                vec![2.0; m],
            ),
            (KernelSpec::ReluDeep { .. }, None) => {
                let k2 = self.relu_k().1;
                (region.sides().map(|s| 2.0 * k2 * abs_max(s, 0.0)).collect(), vec![2.0 * k2; m])
            }
            (_, None) => (vec![0.0; m], vec![0.0; m]),
            (
                KernelSpec::SquaredExponential { theta, .. } | KernelSpec::RationalQuadratic { theta, .. },
                Some(a),
            ) => sq_dist_sups(1.0, theta, region, a),
            (KernelSpec::MaternHalfInteger { theta, p, .. }, Some(a)) => {
                sq_dist_sups((2 * p + 1) as f64, theta, region, a)
            }
            (
                KernelSpec::Periodic {
                    theta, frequency, ..
                },
                Some(a),
            ) => (0..m)
                .map(|j| {
                    let (t, f) = (theta[j], frequency[j]);
                    let u = 2.0 * f.abs() * abs_max(region.side(j), a[j]);
                    ((t * f).abs() * u.min(1.0), 2.0 * t * f * f)
                })
                .unzip(),
            (KernelSpec::Linear { theta, .. }, Some(a)) => {
                (a.iter().zip(theta).map(|(v, t)| (v - t).abs()).collect(), vec![0.0; m])
            }
            (KernelSpec::ReluDeep { .. }, Some(a)) => {
                let k2 = self.relu_k().1;
                (a.iter().map(|v| (k2 * v).abs()).collect(), vec![0.0; m])
            }
        }
    }

    /// `(sup |ψ'|, sup |ψ''|)` over `phi`, when both are finite.
    ///
    /// The stationary families have completely monotone `ψ`, so both
    /// magnitudes peak at the left end. The ReLU `ψ` is a power series with
    /// non-negative coefficients on `[−1, 1]`, so they peak at the largest
    /// `|φ|`; ranges touching `±1` are refused since `ψ''` diverges there.
    pub(crate) fn psi_derivative_sup(&self, phi: Interval) -> Option<(f64, f64)> {
        let (d1, d2) = match self {
            KernelSpec::Linear { variance, .. } => (*variance, 0.0),
            KernelSpec::ReluDeep { .. } => {
                let t = phi.lo.abs().max(phi.hi.abs());
                if !(t < 1.0 - 1e-9) {
                    return None;
                }
                let (_, d1, d2) = self.relu_jet(t);
                (d1, d2)
            }
            _ => {
                let (_, d1, d2) = self.psi_jet(phi.lo.max(0.0));
                (d1.abs(), d2.abs())
            }
        };
        (d1.is_finite() && d2.is_finite()).then_some((d1, d2))
    }

    /// `sup_{x ∈ region} Σ_i coeffs[i] φ(x, anchors[i])` and a maximiser.
    ///
    /// Exact for every family except periodic, where the per-summand optima
    /// are added up and the result is flagged as an over-approximation.
    pub fn weighted_phi_sup(
        &self,
        region: &InputBox,
        coeffs: &[f64],
        anchors: &[Vec<f64>],
    ) -> Result<PhiSup> {
        check_dim(coeffs.len(), anchors.len())?;
        check_dim(self.input_dim(), region.dim())?;
        for a in anchors {
            check_dim(self.input_dim(), a.len())?;
        }
        Ok(self.weighted_phi_sup_unchecked(region, coeffs, anchors))
    }

    pub(crate) fn weighted_phi_sup_unchecked(
        &self,
        region: &InputBox,
        coeffs: &[f64],
        anchors: &[Vec<f64>],
    ) -> PhiSup {
        if coeffs.iter().all(|c| *c == 0.0) {
            return PhiSup {
                value: 0.0,
                argmax: region.center(),
                exact: true,
            };
        }
        let m = region.dim();
        match self {
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. }
            | KernelSpec::MaternHalfInteger { theta, .. } => {
                let scale = match self {
                    KernelSpec::MaternHalfInteger { p, .. } => (2 * p + 1) as f64,
                    _ => 1.0,
                };
                let total: f64 = coeffs.iter().sum();
                let mut argmax = Vec::with_capacity(m);
                let mut value = 0.0;
                for j in 0..m {
                    let side = region.side(j);
                    let f = |x: f64| -> f64 {
                        coeffs
                            .iter()
                            .zip(anchors)
                            .map(|(c, a)| c * (x - a[j]) * (x - a[j]))
                            .sum::<f64>()
                    };
                    let mut cands = vec![side.lo, side.hi];
                    if total < 0.0 {
                        let s: f64 = coeffs.iter().zip(anchors).map(|(c, a)| c * a[j]).sum();
                        cands.push((s / total).clamp(side.lo, side.hi));
                    }
                    let (x, v) = best_of(&cands, f);
                    argmax.push(x);
                    value += scale * theta[j] * v;
                }
                PhiSup {
                    value,
                    argmax,
                    exact: true,
                }
            }
            KernelSpec::ReluDeep { .. } | KernelSpec::Linear { .. } => {
                // Σ c_i φ(x, x_i) = const + Σ_j w_j x_j
                let (constant, w): (f64, Vec<f64>) = match self {
                    KernelSpec::ReluDeep { .. } => {
                        let (k1, k2) = self.relu_k();
                        let w = (0..m)
                            .map(|j| k2 * coeffs.iter().zip(anchors).map(|(c, a)| c * a[j]).sum::<f64>())
                            .collect();
                        (k1 * coeffs.iter().sum::<f64>(), w)
                    }
                    KernelSpec::Linear { theta, .. } => {
                        let w: Vec<f64> = (0..m)
                            .map(|j| {
                                coeffs
                                    .iter()
                                    .zip(anchors)
                                    .map(|(c, a)| c * (a[j] - theta[j]))
                                    .sum::<f64>()
                            })
                            .collect();
                        let constant = -w.iter().zip(theta).map(|(wj, t)| wj * t).sum::<f64>();
                        (constant, w)
                    }
                    _ => unreachable!(),
                };
                let argmax: Vec<f64> = w
                    .iter()
                    .zip(region.lower().iter().zip(region.upper()))
                    .map(|(wj, (l, u))| if *wj > 0.0 { *u } else { *l })
                    .collect();
                let value = constant + w.iter().zip(&argmax).map(|(a, b)| a * b).sum::<f64>();
                PhiSup {
                    value,
                    argmax,
                    exact: true,
                }
            }
            KernelSpec::Periodic {
                theta, frequency, ..
            } => {
                let mut value = 0.0;
                let mut argmax = Vec::with_capacity(m);
                for j in 0..m {
                    let side = region.side(j);
                    let p = frequency[j];
                    let mut cands = vec![side.lo, side.hi];
                    for (c, a) in coeffs.iter().zip(anchors) {
                        let r = sin2_range(side.shift(-a[j]).scale(p));
                        let (v, at) = if *c >= 0.0 {
                            (r.range.hi, r.argmax)
                        } else {
                            (r.range.lo, r.argmin)
                        };
                        value += c * theta[j] * v;
                        if p != 0.0 {
                            cands.push((at / p + a[j]).clamp(side.lo, side.hi));
                        }
                    }
                    let f = |x: f64| -> f64 {
                        coeffs
                            .iter()
                            .zip(anchors)
                            .map(|(c, a)| c * (p * (x - a[j])).sin().powi(2))
                            .sum::<f64>()
                    };
                    argmax.push(best_of(&cands, f).0);
                }
                PhiSup {
                    value,
                    argmax,
                    exact: false,
                }
            }
        }
    }
}

/// Arc-cosine kernel shape `J(ρ) = √(1 − ρ²) + (π − acos ρ) ρ` with its
/// first two derivatives.
fn arc_cosine_jet(rho: f64) -> (f64, f64, f64) {
    let r = rho.clamp(-1.0, 1.0);
    let s = (1.0 - r * r).max(0.0);
    let a = r.acos();
    (s.sqrt() + (PI - a) * r, PI - a, 1.0 / s.max(1e-300).sqrt())
}

/// Matérn `ψ` and derivatives in `φ = s²`, closed forms for `p ≤ 2`.
fn matern_jet(variance: f64, p: u32, phi: f64) -> (f64, f64, f64) {
    let phi = phi.max(0.0);
    let s = phi.sqrt();
    let e = variance * (-s).exp();
    let poly = matern_poly(p, s);
    let (d1, d2) = match p {
        0 => {
            if s == 0.0 {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (-e / (2.0 * s), e * (s + 1.0) / (4.0 * s * s * s))
            }
        }
        1 => (
            -0.5 * e,
            if s == 0.0 {
                f64::INFINITY
            } else {
                e / (4.0 * s)
            },
        ),
        _ => (-e * (1.0 + s) / 6.0, e / 12.0),
    };
    (e * poly, d1, d2)
}

/// `p!/(2p)! Σ_{l=0}^{p} (p+l)!/(l!(p−l)!) (2s)^{p−l}`.
fn matern_poly(p: u32, s: f64) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    let kp = fact(p) / fact(2 * p);
    (0..=p)
        .map(|l| fact(p + l) / (fact(l) * fact(p - l)) * (2.0 * s).powi((p - l) as i32))
        .sum::<f64>()
        * kp
}

fn sq_dist_gradient(kappa: f64, theta: &[f64], x: &[f64], a: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|j| 2.0 * kappa * theta[j] * (x[j] - a[j])).collect()
}

fn sq_dist_sups(kappa: f64, theta: &[f64], region: &InputBox, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    region
        .sides()
        .zip(theta.iter().zip(a))
        .map(|(s, (t, c))| {
            let d = (s.lo - c).abs().max((s.hi - c).abs());
            (2.0 * kappa * t * d, 2.0 * kappa * t)
        })
        .unzip()
}

fn weighted_sq_dist(theta: &[f64], x1: &[f64], x2: &[f64]) -> f64 {
    theta
        .iter()
        .zip(x1.iter().zip(x2))
        .map(|(t, (a, b))| t * (a - b) * (a - b))
        .sum()
}

fn best_of(cands: &[f64], f: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut best = (cands[0], f(cands[0]));
    for &x in &cands[1..] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

pub(crate) struct Sin2Range {
    pub range: Interval,
    pub argmin: f64,
    pub argmax: f64,
}

/// Range of `sin²(u)` for `u` in `interval`, with locations of the extrema.
pub(crate) fn sin2_range(u: Interval) -> Sin2Range {
    let f = |t: f64| t.sin().powi(2);
    let (fa, fb) = (f(u.lo), f(u.hi));
    let (mut lo, mut argmin) = if fa <= fb { (fa, u.lo) } else { (fb, u.hi) };
    let (mut hi, mut argmax) = if fa >= fb { (fa, u.lo) } else { (fb, u.hi) };
    let zero = (u.lo / PI).ceil() * PI;
    if zero <= u.hi {
        lo = 0.0;
        argmin = zero;
    }
    let peak = ((u.lo - PI / 2.0) / PI).ceil() * PI + PI / 2.0;
    if peak <= u.hi {
        hi = 1.0;
        argmax = peak;
    }
    Sin2Range {
        range: Interval::new(lo, hi),
        argmin,
        argmax,
    }
}

/// Sign changes of `curvature` on `[lo, hi]`, located by a uniform scan of
/// `samples` cells and refined by bisection. Zero samples inherit the sign
/// of their left neighbour.
pub fn scan_flex_points(curvature: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let mut out = Vec::new();
    if !(hi > lo) || samples == 0 {
        return out;
    }
    let at = |k: usize| lo + (hi - lo) * k as f64 / samples as f64;
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut prev_t = lo;
    let mut prev_s = sign(curvature(lo));
    for k in 1..=samples {
        let t = at(k);
        let s = sign(curvature(t));
        if s == 0 {
            continue;
        }
        if prev_s != 0 && s != prev_s {
            let (mut a, mut b) = (prev_t, t);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if sign(curvature(mid)) == prev_s {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev_t = t;
        prev_s = s;
    }
    out
}
