//! Dudley entropy bound on the expected supremum of the centred process.
//!
//! `12 ∫₀^{a} √(m ln(√m K D / z + 1)) dz`, `a = sup_d / 2`.
//!
//! The integrand blows up (integrably) at `z → 0`. Substituting
//! `z = a e^{−u}` gives `a e^{−u} √(m ln(1 + B e^{u}))` on `[0, ∞)` with
//! `B = √m K D / a`, a smooth integrand with exponential decay. It is
//! integrated by adaptive Gauss–Kronrod on `[0, U]` and the tail beyond `U`
//! is bounded in closed form.

use crate::error::{Error, Result};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// Truncation point of the substituted integral.
const U_MAX: f64 = 60.0;
const ABS_FLOOR: f64 = 1e-14;
const MAX_SEGMENTS: usize = 4096;

/// Over-estimate of the Dudley bound: the quadrature sum plus its error
/// estimate plus the tail bound.
pub fn dudley_bound(lipschitz: f64, side: f64, m_eff: usize, sup_d: f64, quad_tol: f64) -> Result<f64> {
    for (name, v) in [("K", lipschitz), ("D", side), ("sup_d", sup_d)] {
        if v.is_nan() || v < 0.0 {
            return Err(Error::input(format!("{name} must be >= 0, got {v}")));
        }
    }
    if !(quad_tol > 0.0) {
        return Err(Error::input(format!("quad_tol must be > 0, got {quad_tol}")));
    }
    let a = 0.5 * sup_d;
    let m = m_eff as f64;
    if a == 0.0 || m_eff == 0 || lipschitz == 0.0 || side == 0.0 {
        return Ok(0.0);
    }
    if !lipschitz.is_finite() || !sup_d.is_finite() || !side.is_finite() {
        return Ok(f64::INFINITY);
    }
    let b = m.sqrt() * lipschitz * side / a;
    let f = |u: f64| {
        let t = b * u.exp();
        let log = if t < 1e12 {
            t.ln_1p()
        } else {
            u + b.ln() + (1.0 / t).ln_1p()
        };
        a * (-u).exp() * (m * log).sqrt()
    };
    let (value, err) = adaptive_gk15(f, 0.0, U_MAX, quad_tol);
    // ln(1 + B e^u) ≤ ln(1 + B) + u and ∫_U^∞ e^{−u} √u du ≤ e^{−U} (√U + 1/(2√U))
    let tail = a * m.sqrt() * (-U_MAX).exp() * (b.ln_1p().sqrt() + U_MAX.sqrt() + 0.5 / U_MAX.sqrt());
    Ok(12.0 * (value + err + tail))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and `|K15 − G7|` on one segment.
fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive bisection, always refining the segment with the
/// largest error estimate. Returns the integral and the summed error.
pub(crate) fn adaptive_gk15(f: impl Fn(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    let mut segs = vec![{
        let (v, e) = gk15(&f, lo, hi);
        (lo, hi, v, e)
    }];
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let err: f64 = segs.iter().map(|s| s.3).sum();
        if err <= (rel_tol * total.abs()).max(ABS_FLOOR) || segs.len() >= MAX_SEGMENTS {
            return (total, err);
        }
        let (k, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = segs.swap_remove(k);
        let mid = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, mid);
        let (v2, e2) = gk15(&f, mid, b);
        segs.push((a, mid, v1, e1));
        segs.push((mid, b, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson after `z = a t²`, which removes the singularity.
    fn reference(k: f64, d: f64, m: usize, sup_d: f64, panels: usize) -> f64 {
        let a = sup_d / 2.0;
        let mf = m as f64;
        let c = mf.sqrt() * k * d;
        let g = |t: f64| {
            if t == 0.0 {
                0.0
            } else {
                2.0 * a * t * (mf * (c / (a * t * t)).ln_1p()).sqrt()
            }
        };
        let h = 1.0 / panels as f64;
        let mut s = g(0.0) + g(1.0);
        for i in 1..panels {
            s += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        12.0 * s * h / 3.0
    }

    #[test]
    fn zero_cases() {
        assert_eq!(dudley_bound(1.0, 1.0, 1, 0.0, 1e-8).unwrap(), 0.0);
        assert_eq!(dudley_bound(0.0, 1.0, 1, 2.0, 1e-8).unwrap(), 0.0);
        assert!(dudley_bound(-1.0, 1.0, 1, 2.0, 1e-8).is_err());
    }

    #[test]
    fn matches_reference_quadrature() {
        let v = dudley_bound(1.0, 1.0, 1, 2.0, 1e-8).unwrap();
        let r = reference(1.0, 1.0, 1, 2.0, 1_000_000);
        assert!(((v - r) / r).abs() < 1e-6, "{v} vs {r}");
        assert!(v >= r * (1.0 - 1e-9));
    }

    #[test]
    fn gk15_integrates_polynomials_exactly() {
        let (v, e) = gk15(&|x: f64| x.powi(7) - 3.0 * x * x, 0.0, 2.0);
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn monotone_in_each_argument() {
        let base = dudley_bound(1.0, 0.5, 2, 0.3, 1e-8).unwrap();
        assert!(dudley_bound(2.0, 0.5, 2, 0.3, 1e-8).unwrap() > base);
        assert!(dudley_bound(1.0, 0.6, 2, 0.3, 1e-8).unwrap() > base);
        assert!(dudley_bound(1.0, 0.5, 3, 0.3, 1e-8).unwrap() > base);
        assert!(dudley_bound(1.0, 0.5, 2, 0.4, 1e-8).unwrap() > base);
    }
}
