//! Bounds on posterior variances over a box.
//!
//! For the difference process,
//!
//! `Σ°(x*, x) = Σ** + Σ_xx − 2Σ_{x,x*} − ‖L⁻¹(r − r*)‖²` with `r = Σ_{x,D}`,
//! `r* = Σ_{x*,D}`.
//!
//! On a region with centre `c`, each kernel value is modelled either by the
//! image under `ψ` of its `φ`-range (`ψ` is monotone for every family), or by
//! its first-order expansion at `c` plus a bound on the second-order
//! remainder, whichever leaves the smaller independent residual. The first model is loose to first order
//! in the region width and the second to second order. Substituting the
//! models leaves a convex quadratic in the expansion offsets and residuals,
//! whose certified minimum bounds the variance from above.

use nalgebra::{DMatrix, DVector};

use crate::bounds::bnb::{minimize, BnBConfig, BoundResult, RegionBound};
use crate::bounds::qp::AffineQp;
use crate::domain::{InputBox, Interval};
use crate::error::{check_dim, Error, Result};
use crate::gp::TrainedGP;
use crate::kernels::KernelSpec;

/// Bounds on `ξ = sup_{x ∈ region} Var[z(x*) − z(x)]` for output `output`.
pub fn variance_sup_bounds(
    gp: &TrainedGP,
    x_star: &[f64],
    region: &InputBox,
    output: usize,
    cfg: &BnBConfig,
) -> Result<BoundResult> {
    gp.check_output(output)?;
    gp.check_point(x_star)?;
    check_dim(gp.input_dim(), region.dim())?;
    let k_star = gp.cross_cov(x_star);
    let cross = Cross {
        x_star,
        prior_star: gp.spec().covariance(x_star, x_star),
    };
    sup_variance(
        gp,
        region,
        cfg,
        Some(cross),
        &k_star,
        |r| vec![r.center(), r.farthest_corner(x_star)],
        |x| gp.diff_var_unchecked(x_star, &k_star, x),
    )
}

/// Bounds on `sup_{x ∈ region} Var[z(x)]`.
pub fn variance_self_sup(gp: &TrainedGP, region: &InputBox, cfg: &BnBConfig) -> Result<BoundResult> {
    check_dim(gp.input_dim(), region.dim())?;
    let zero = DVector::zeros(gp.num_train());
    sup_variance(
        gp,
        region,
        cfg,
        None,
        &zero,
        |r| vec![r.center(), r.lower().to_vec(), r.upper().to_vec()],
        |x| gp.var_unchecked(x),
    )
}

struct Cross<'a> {
    x_star: &'a [f64],
    prior_star: f64,
}

/// `k(x) ∈ value + grad·(x − c) + [−radius, radius]` on a region.
struct Model {
    value: f64,
    grad: Vec<f64>,
    radius: f64,
}

impl Model {
    fn constant(range: Interval) -> Model {
        Model {
            value: range.mid(),
            grad: Vec::new(),
            radius: 0.5 * range.width(),
        }
    }
}

/// The range model or the expansion model of
/// `x ↦ ψ(φ(x, anchor))` (`anchor = None` for `φ(x, x)`), on the free
/// coordinates of `region`, whichever has the smaller residual.
fn kernel_model(spec: &KernelSpec, region: &InputBox, center: &[f64], free: &[usize], half: &[f64], anchor: Option<&[f64]>) -> Model {
    let phi = match anchor {
        Some(a) => spec.phi_range_unchecked(region, a),
        None => spec.self_phi_range(region),
    };
    let range = Model::constant(psi_range(spec, phi));
    let Some((d1, d2)) = spec.psi_derivative_sup(phi) else {
        return range;
    };
    let (v, slope, _) = spec.psi_jet(spec.phi_unchecked(center, anchor.unwrap_or(center)));
    let dphi = spec.phi_gradient(center, anchor);
    let (g, p) = spec.phi_derivative_sups(region, anchor);
    let sg: f64 = free.iter().zip(half).map(|(&j, w)| g[j] * w).sum();
    let sp: f64 = free.iter().zip(half).map(|(&j, w)| p[j] * w * w).sum();
    let radius = 0.5 * (d2 * sg * sg + d1 * sp);
    let expansion = Model {
        value: v,
        grad: free.iter().map(|&j| slope * dphi[j]).collect(),
        radius: radius + 8.0 * f64::EPSILON * (v.abs() + radius),
    };
    if expansion.radius.is_finite() && expansion.radius < range.radius {
        expansion
    } else {
        range
    }
}

/// Upper bound on `Σ_xx [+ Σ** − 2Σ_{x,x*}] − ‖L⁻¹(r − target)‖²` over a
/// non-degenerate region.
fn relaxed_upper(gp: &TrainedGP, region: &InputBox, cross: Option<&Cross>, target: &DVector<f64>) -> f64 {
    let spec = gp.spec();
    let center = region.center();
    let free = region.free_dims();
    let half: Vec<f64> = free.iter().map(|&j| 0.5 * region.width(j)).collect();
    let p = free.len();
    let grad_of = |m: &Model| -> Vec<f64> {
        if m.grad.is_empty() {
            vec![0.0; p]
        } else {
            m.grad.clone()
        }
    };

    let own = kernel_model(spec, region, &center, &free, &half, None);
    let mut value = own.value;
    let mut radius = own.radius;
    let mut q = DVector::from_vec(grad_of(&own));
    if let Some(c) = cross {
        let k = kernel_model(spec, region, &center, &free, &half, Some(c.x_star));
        value += c.prior_star - 2.0 * k.value;
        radius += 2.0 * k.radius;
        q -= DVector::from_vec(grad_of(&k)) * 2.0;
    }

    let anchors = gp.inputs();
    let n = anchors.len();
    let mut b = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, p);
    let mut lo = DVector::zeros(p + n);
    let mut hi = DVector::zeros(p + n);
    for (j, w) in half.iter().enumerate() {
        lo[j] = -w;
        hi[j] = *w;
    }
    for (l, xl) in anchors.iter().enumerate() {
        let m = kernel_model(spec, region, &center, &free, &half, Some(xl));
        b[l] = m.value - target[l];
        for (j, g) in m.grad.iter().enumerate() {
            jac[(l, j)] = *g;
        }
        lo[p + l] = -m.radius;
        hi[p + l] = m.radius;
    }
    let qp = AffineQp {
        chol: gp.cholesky_factor(),
        b,
        jac,
        q,
        lo,
        hi,
    };
    let sol = qp.minimize(&DVector::zeros(p + n));
    if !sol.converged {
        log::trace!("variance relaxation stopped after {} iterations", sol.iterations);
    }
    value + radius - sol.certified_lower
}

fn sup_variance(
    gp: &TrainedGP,
    region: &InputBox,
    cfg: &BnBConfig,
    cross: Option<Cross>,
    target: &DVector<f64>,
    probes: impl Fn(&InputBox) -> Vec<Vec<f64>>,
    exact: impl Fn(&[f64]) -> f64,
) -> Result<BoundResult> {
    let result = minimize(region, cfg, |r| {
        if r.is_point() {
            let x = r.center();
            let v = -exact(&x);
            return Ok(RegionBound {
                lower: v,
                upper: v,
                witness: x,
            });
        }
        let upper_bound = relaxed_upper(gp, r, cross.as_ref(), target);
        if !upper_bound.is_finite() {
            return Err(Error::Numerical("variance relaxation produced a non-finite bound".into()));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for p in probes(r) {
            let v = exact(&p);
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, p));
            }
        }
        let (value, witness) = best.expect("at least one probe");
        let ub = upper_bound.max(value);
        Ok(RegionBound {
            lower: -(ub + 1e-12 * (1.0 + ub.abs())),
            upper: -value,
            witness,
        })
    })?;
    Ok(result.negated())
}

/// Range of `ψ` over a `φ`-interval; `ψ` is monotone for every family.
pub(crate) fn psi_range(spec: &KernelSpec, phi: Interval) -> Interval {
    let (a, b) = (spec.psi_jet(phi.lo).0, spec.psi_jet(phi.hi).0);
    let pad = 4.0 * f64::EPSILON * a.abs().max(b.abs());
    Interval::new(a.min(b) - pad, a.max(b) + pad)
}
