//! Lipschitz constants of the canonical pseudo-metric.
//!
//! `d(x₁, x₂)² ≤ Σ₁₁ + Σ₂₂ − 2Σ₁₂` under the prior, since conditioning only
//! shrinks variances. Every bound below dominates the prior `d` by
//! `K ‖x₁ − x₂‖₂`.

use crate::kernels::KernelSpec;

/// `K` with `d(x₁, x₂) ≤ K ‖x₁ − x₂‖₂`, or `f64::INFINITY` when the kernel
/// admits no such constant (Matérn with `p = 0` is only Hölder).
///
/// * squared-exponential: `2σ²(1 − e^{−φ}) ≤ 2σ² θ_max ‖Δ‖²`. Reported as
///   `σ √(2 max(1, θ_max))`, which is `√2 σ` whenever every `θ_j ≤ 1`.
/// * rational-quadratic: `1 − (1 + u)^{−α} ≤ α u` gives `σ √(α θ_max)`.
/// * periodic: `1 − e^{−φ/2} ≤ φ/2` and `sin² u ≤ u²` give `σ √max(θ_j p_j²)`.
/// * Matérn: convexity of `ψ` gives `ψ(0) − ψ(φ) ≤ |ψ'(0)| φ`.
/// * linear: the prior `d` is exactly `σ ‖Δ‖`.
/// * relu-deep (unit-norm inputs): `1 − φ₁₂ = k₂ ‖Δ‖²/2` and convexity of `ψ`
///   give `K = √(k₂ ψ'(1))`.
pub fn lipschitz_bound(spec: &KernelSpec) -> f64 {
    let theta_max = |theta: &[f64]| theta.iter().copied().fold(0.0, f64::max);
    match spec {
        KernelSpec::SquaredExponential { variance, theta } => {
            variance.sqrt() * (2.0 * theta_max(theta).max(1.0)).sqrt()
        }
        KernelSpec::RationalQuadratic {
            variance,
            alpha,
            theta,
        } => (variance * alpha * theta_max(theta)).sqrt(),
        KernelSpec::Periodic {
            variance,
            theta,
            frequency,
        } => {
            let w = theta
                .iter()
                .zip(frequency)
                .map(|(t, p)| t * p * p)
                .fold(0.0, f64::max);
            (variance * w).sqrt()
        }
        KernelSpec::MaternHalfInteger { variance, theta, p } => {
            let slope0 = match p {
                0 => return f64::INFINITY,
                1 => variance / 2.0,
                _ => variance / 6.0,
            };
            (2.0 * slope0 * (2 * p + 1) as f64 * theta_max(theta)).sqrt()
        }
        KernelSpec::Linear { variance, .. } => variance.sqrt(),
        KernelSpec::ReluDeep { .. } => {
            let (_, k2) = spec.relu_k();
            (k2 * spec.psi_jet(1.0).1).sqrt()
        }
    }
}

/// `sup d ≤ 2 √ξ̂` by the triangle inequality through `x*`.
pub fn sup_d_bound(xi_upper: f64) -> f64 {
    2.0 * xi_upper.max(0.0).sqrt()
}
