//! Bounds on the extrema of the posterior mean over a box.

use crate::bounds::bnb::{minimize, BnBConfig, BoundResult, RegionBound};
use crate::bounds::envelope::kernel_envelope;
use crate::domain::InputBox;
use crate::error::{check_dim, Result};
use crate::gp::TrainedGP;

/// Bounds on `inf_{x ∈ region} μ̄_i(x)`.
pub fn mean_inf_bounds(
    gp: &TrainedGP,
    region: &InputBox,
    output: usize,
    cfg: &BnBConfig,
) -> Result<BoundResult> {
    signed_mean_inf(gp, region, output, 1.0, cfg)
}

/// Bounds on `sup_{x ∈ region} μ̄_i(x)`.
pub fn mean_sup_bounds(
    gp: &TrainedGP,
    region: &InputBox,
    output: usize,
    cfg: &BnBConfig,
) -> Result<BoundResult> {
    Ok(signed_mean_inf(gp, region, output, -1.0, cfg)?.negated())
}

/// Upper bound on `sup_{x ∈ region} μ̄_i(x*) − μ̄_i(x)`.
pub fn mu_o_sup(
    gp: &TrainedGP,
    x_star: &[f64],
    region: &InputBox,
    output: usize,
    cfg: &BnBConfig,
) -> Result<f64> {
    warn_outside(region, x_star)?;
    let inf = mean_inf_bounds(gp, region, output, cfg)?;
    Ok(gp.mean_component(x_star, output) - inf.lower)
}

/// Upper bound on `sup_{x ∈ region} ‖μ̄(x*) − μ̄(x)‖₁`, taking the supremum
/// of each component separately.
pub fn mu_o_l1_sup(
    gp: &TrainedGP,
    x_star: &[f64],
    region: &InputBox,
    cfg: &BnBConfig,
) -> Result<f64> {
    warn_outside(region, x_star)?;
    let mut total = 0.0;
    for i in 0..gp.output_dim() {
        let at_star = gp.mean_component(x_star, i);
        let below = at_star - mean_inf_bounds(gp, region, i, cfg)?.lower;
        let above = mean_sup_bounds(gp, region, i, cfg)?.upper - at_star;
        total += below.max(above).max(0.0);
    }
    Ok(total)
}

fn warn_outside(region: &InputBox, x_star: &[f64]) -> Result<()> {
    check_dim(region.dim(), x_star.len())?;
    if !region.contains(x_star) {
        log::warn!("test point lies outside the region being certified");
    }
    Ok(())
}

/// Bounds on `inf sign·μ̄_i` over `region`.
fn signed_mean_inf(
    gp: &TrainedGP,
    region: &InputBox,
    output: usize,
    sign: f64,
    cfg: &BnBConfig,
) -> Result<BoundResult> {
    gp.check_output(output)?;
    check_dim(gp.input_dim(), region.dim())?;
    let spec = gp.spec();
    let anchors = gp.inputs();
    let weights: Vec<f64> = gp.weights(output).iter().map(|t| sign * t).collect();
    let offset = sign * gp.prior_mean()[output];
    let objective = |x: &[f64]| sign * gp.mean_component(x, output);

    minimize(region, cfg, |r| {
        if r.is_point() {
            let x = r.center();
            let v = objective(&x);
            return Ok(RegionBound {
                lower: v,
                upper: v,
                witness: x,
            });
        }
        // w_l ψ(φ_l) ≥ w_l (a_l + b_l φ_l), picking the lower line when
        // w_l ≥ 0 and the upper line otherwise
        let mut constant = offset;
        let mut neg_coeffs = Vec::with_capacity(anchors.len());
        for (w, xl) in weights.iter().zip(anchors) {
            let env = kernel_envelope(spec, spec.phi_range_unchecked(r, xl));
            let line = if *w >= 0.0 { env.lower } else { env.upper };
            constant += w * line.a;
            neg_coeffs.push(-w * line.b);
        }
        let sup = spec.weighted_phi_sup_unchecked(r, &neg_coeffs, anchors);
        let lower = constant - sup.value;

        let center = r.center();
        let (vc, va) = (objective(&center), objective(&sup.argmax));
        let (upper, witness) = if va < vc { (va, sup.argmax) } else { (vc, center) };
        Ok(RegionBound {
            lower: lower.min(upper),
            upper,
            witness,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::Dataset;
    use crate::kernels::KernelSpec;

    fn toy_gp() -> TrainedGP {
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.9).sin() * 1.5, (t * 1.7).cos() * 1.5]
            })
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0] - x[1] * x[1] + 0.3 * x[0]).collect();
        TrainedGP::fit(
            KernelSpec::squared_exponential(1.0, vec![0.7, 0.7]),
            &Dataset::scalar(xs, ys).unwrap(),
            1e-6,
        )
        .unwrap()
    }

    fn grid_extrema(gp: &TrainedGP, r: &InputBox, n: usize) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..n {
            for j in 0..n {
                let u = [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64];
                let v = gp.mean_component(&r.from_unit(&u), 0);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }

    #[test]
    fn point_region_is_exact() {
        let gp = toy_gp();
        let x = [0.2, -0.1];
        let r = InputBox::point(&x).unwrap();
        let b = mean_inf_bounds(&gp, &r, 0, &BnBConfig::default()).unwrap();
        let v = gp.posterior_mean(&x).unwrap()[0];
        assert_eq!((b.lower, b.upper), (v, v));
        assert_eq!(mu_o_sup(&gp, &x, &r, 0, &BnBConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn zero_targets_give_zero_bounds() {
        let xs = vec![vec![0.0, 0.0], vec![1.0, 0.5]];
        let gp = TrainedGP::fit(
            KernelSpec::squared_exponential(1.0, vec![1.0, 1.0]),
            &Dataset::scalar(xs, vec![0.0, 0.0]).unwrap(),
            1e-6,
        )
        .unwrap();
        let r = InputBox::around(&[0.5, 0.5], 0.5).unwrap();
        let cfg = BnBConfig::default();
        let b = mean_inf_bounds(&gp, &r, 0, &cfg).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert_eq!(mean_sup_bounds(&gp, &r, 0, &cfg).unwrap().upper, 0.0);
        assert_eq!(mu_o_l1_sup(&gp, &[0.5, 0.5], &r, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn brackets_grid_extrema() {
        let gp = toy_gp();
        let cfg = BnBConfig {
            tolerance: 1e-4,
            max_regions: 20_000,
        };
        for (c, rad) in [([0.0, 0.0], 0.1), ([0.5, -0.3], 0.4), ([1.0, 1.0], 1.0)] {
            let r = InputBox::around(&c, rad).unwrap();
            let (glo, ghi) = grid_extrema(&gp, &r, 101);
            let inf = mean_inf_bounds(&gp, &r, 0, &cfg).unwrap();
            let sup = mean_sup_bounds(&gp, &r, 0, &cfg).unwrap();
            assert!(inf.converged && sup.converged);
            assert!(inf.lower <= glo + 1e-12 && glo <= inf.upper + 1e-4, "{inf:?} vs {glo}");
            assert!(sup.lower - 1e-4 <= ghi && ghi <= sup.upper + 1e-12, "{sup:?} vs {ghi}");
            assert!(r.contains(&inf.witness));
            let wv = gp.mean_component(&inf.witness, 0);
            assert!(inf.lower <= wv && wv <= inf.upper);
        }
    }

    #[test]
    fn l1_bound_covers_both_directions() {
        let gp = toy_gp();
        let cfg = BnBConfig::default();
        let x = [0.4, 0.4];
        let r = InputBox::around(&x, 0.3).unwrap();
        let up = mu_o_sup(&gp, &x, &r, 0, &cfg).unwrap();
        let down = mean_sup_bounds(&gp, &r, 0, &cfg).unwrap().upper - gp.mean_component(&x, 0);
        let l1 = mu_o_l1_sup(&gp, &x, &r, &cfg).unwrap();
        assert_eq!(l1, up.max(down).max(0.0));
    }
}
