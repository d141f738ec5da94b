//! Convex quadratics `‖L⁻¹(b + J h + e)‖² − q·h` over a box, by spectral
//! projected gradient.

use nalgebra::{DMatrix, DVector};

/// Stop once the projected gradient is this small in the max norm.
pub const PG_TOLERANCE: f64 = 1e-9;
pub const MAX_ITERATIONS: usize = 60;

#[derive(Clone, Debug)]
pub(crate) struct QpSolution {
    /// Lower bound on the box minimum from the linearisation at the final
    /// iterate. Valid whether or not the iteration converged.
    pub certified_lower: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `f(h, e) = ‖L⁻¹(b + J h + e)‖² − q·h` on a box in `(h, e)`.
pub(crate) struct AffineQp<'a> {
    pub chol: &'a DMatrix<f64>,
    pub b: DVector<f64>,
    /// `N × p`, possibly with `p = 0`.
    pub jac: DMatrix<f64>,
    pub q: DVector<f64>,
    /// Bounds on the stacked `(h, e)`, of length `p + N`.
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl AffineQp<'_> {
    fn split(&self) -> usize {
        self.jac.ncols()
    }

    fn eval(&self, z: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.split();
        let h = z.rows(0, p);
        let e = z.rows(p, z.len() - p);
        let mut r = &self.b + e;
        if p > 0 {
            r += &self.jac * h;
        }
        let v = self.chol.solve_lower_triangular(&r).expect("non-singular factor");
        let y = self.chol.tr_solve_lower_triangular(&v).expect("non-singular factor") * 2.0;
        let mut g = DVector::zeros(z.len());
        if p > 0 {
            g.rows_mut(0, p).copy_from(&(self.jac.tr_mul(&y) - &self.q));
        }
        g.rows_mut(p, z.len() - p).copy_from(&y);
        (v.norm_squared() - self.q.dot(&h), g)
    }

    /// Spectral projected gradient from `start`, with a linearisation
    /// certificate at the last iterate.
    pub(crate) fn minimize(&self, start: &DVector<f64>) -> QpSolution {
        let (lo, hi) = (&self.lo, &self.hi);
        let mut z = project(start, lo, hi);
        let (mut f, mut g) = self.eval(&z);
        let mut step = {
            let gmax = g.amax();
            if gmax > 0.0 {
                1.0 / gmax
            } else {
                1.0
            }
        };
        let mut iterations = 0;
        let mut converged = false;
        while iterations < MAX_ITERATIONS {
            let pg = &z - project(&(&z - &g), lo, hi);
            if pg.amax() <= PG_TOLERANCE {
                converged = true;
                break;
            }
            iterations += 1;
            let d = project(&(&z - &g * step), lo, hi) - &z;
            let slope = g.dot(&d);
            if slope >= 0.0 {
                converged = true;
                break;
            }
            let mut t = 1.0;
            let (mut z_new, mut f_new, mut g_new);
            loop {
                z_new = &z + &d * t;
                (f_new, g_new) = self.eval(&z_new);
                if f_new <= f + 1e-4 * t * slope || t < 1e-12 {
                    break;
                }
                t *= 0.5;
            }
            if f_new > f {
                break;
            }
            let s = &z_new - &z;
            let y = &g_new - &g;
            let sy = s.dot(&y);
            step = if sy > 0.0 {
                (s.norm_squared() / sy).clamp(1e-12, 1e12)
            } else {
                (step * 10.0).min(1e12)
            };
            z = z_new;
            f = f_new;
            g = g_new;
        }
        QpSolution {
            certified_lower: linearised_lower(f, &g, &z, lo, hi).min(f),
            iterations,
            converged,
        }
    }
}

fn project(r: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    r.zip_zip_map(lo, hi, |v, l, h| v.clamp(l, h))
}

/// `f(y) ≥ f(z) + g·(y − z)` for convex `f`; minimise the right side over
/// the box coordinate by coordinate.
fn linearised_lower(f: f64, g: &DVector<f64>, z: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    let drop: f64 = (0..z.len())
        .map(|l| (g[l] * (lo[l] - z[l])).min(g[l] * (hi[l] - z[l])))
        .sum();
    f + drop
}
