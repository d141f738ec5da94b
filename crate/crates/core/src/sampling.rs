//! Monte-Carlo estimates of the violation probabilities on a finite grid.
//!
//! Joint posterior draws on `grid ∪ {x*}` give empirical under-approximations
//! of the probabilities the certificates bound from above.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificate::Mode;
use crate::domain::InputBox;
use crate::error::{check_dim, Error, Result};
use crate::gp::TrainedGP;

pub const MAX_GRID_POINTS: usize = 1_000_000;
pub const DEFAULT_SAMPLES: usize = 10_000;
pub const DEFAULT_PER_DIM: usize = 45;

/// Residual diagonal, relative to the largest variance, at which the
/// pivoted factorisation stops.
const RANK_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalEstimate {
    pub delta: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_grid: usize,
    pub seed: u64,
}

/// Uniform grid with `per_dim` points along each side of positive width.
pub fn grid_points(region: &InputBox, per_dim: usize) -> Result<Vec<Vec<f64>>> {
    if per_dim == 0 {
        return Err(Error::input("per_dim must be >= 1"));
    }
    let free = region.free_dims();
    let total = free
        .iter()
        .try_fold(1usize, |acc, _| acc.checked_mul(per_dim))
        .filter(|n| *n <= MAX_GRID_POINTS)
        .ok_or_else(|| {
            Error::input(format!(
                "grid of {per_dim}^{} points exceeds the limit of {MAX_GRID_POINTS}",
                free.len()
            ))
        })?;
    let center = region.center();
    let coord = |j: usize, k: usize| {
        if per_dim == 1 {
            center[j]
        } else {
            let s = region.side(j);
            s.lo + s.width() * k as f64 / (per_dim - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(total);
    let mut idx = vec![0usize; free.len()];
    for _ in 0..total {
        let mut p = center.clone();
        for (f, &j) in free.iter().enumerate() {
            p[j] = coord(j, idx[f]);
        }
        points.push(p);
        for d in (0..idx.len()).rev() {
            idx[d] += 1;
            if idx[d] < per_dim {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(points)
}

/// Per-draw maxima of the two violation statistics.
#[derive(Clone, Debug)]
pub struct DrawStatistics {
    /// `max_x z_i(x*) − z_i(x)` per draw, for the requested output.
    pub safety: Vec<f64>,
    /// `max_x ‖z(x*) − z(x)‖₁` per draw.
    pub invariance: Vec<f64>,
    pub n_grid: usize,
    pub seed: u64,
}

impl DrawStatistics {
    pub fn estimate(&self, mode: Mode, delta: f64) -> EmpiricalEstimate {
        let stats = match mode {
            Mode::Phi1 => &self.safety,
            Mode::Phi2 => &self.invariance,
        };
        let n = stats.len();
        let hits = stats.iter().filter(|s| **s > delta).count();
        let p = hits as f64 / n as f64;
        EmpiricalEstimate {
            delta,
            estimate: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_samples: n,
            n_grid: self.n_grid,
            seed: self.seed,
        }
    }
}

/// Draw `n_samples` joint posterior samples on `grid ∪ {x_star}` and record
/// the violation statistics. Draw `k` uses stream `k` of a ChaCha generator
/// seeded with `seed`, so the result does not depend on thread scheduling.
pub fn draw_statistics(
    gp: &TrainedGP,
    x_star: &[f64],
    grid: &[Vec<f64>],
    output: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DrawStatistics> {
    gp.check_output(output)?;
    gp.check_point(x_star)?;
    for p in grid {
        check_dim(gp.input_dim(), p.len())?;
    }
    if n_samples == 0 {
        return Err(Error::input("n_samples must be >= 1"));
    }
    let mut points: Vec<&[f64]> = vec![x_star];
    points.extend(grid.iter().map(Vec::as_slice).filter(|p| *p != x_star));
    let g = points.len();

    let whitened: Vec<_> = points.iter().map(|p| gp.whiten(&gp.cross_cov(p))).collect();
    let cov = DMatrix::from_fn(g, g, |i, j| {
        gp.spec().covariance(points[i], points[j]) - whitened[i].dot(&whitened[j])
    });
    let factor = pivoted_cholesky(&cov)?;
    let rank = factor.ncols();
    let rows: Vec<Vec<f64>> = (0..g).map(|p| factor.row(p).iter().copied().collect()).collect();
    let means: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..gp.output_dim()).map(|i| gp.mean_component(p, i)).collect())
        .collect();
    let outputs = gp.output_dim();

    let pairs: Vec<(f64, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut safety = f64::NEG_INFINITY;
            let mut l1 = vec![0.0; g];
            let mut z = vec![0.0; rank];
            #[allow(clippy::needless_range_loop)]
            for i in 0..outputs {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                let f: Vec<f64> = (0..g)
                    .map(|p| {
                        means[p][i] + rows[p].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
                    })
                    .collect();
                for p in 0..g {
                    let diff = f[0] - f[p];
                    l1[p] += diff.abs();
                    if i == output {
                        safety = safety.max(diff);
                    }
                }
            }
            (safety, l1.into_iter().fold(0.0, f64::max))
        })
        .collect();
    let (safety, invariance) = pairs.into_iter().unzip();
    Ok(DrawStatistics {
        safety,
        invariance,
        n_grid: g,
        seed,
    })
}

/// Empirical estimate of `φ₁` (output `output`) or `φ₂` at each `delta`.
pub fn empirical_phi(
    gp: &TrainedGP,
    x_star: &[f64],
    grid: &[Vec<f64>],
    deltas: &[f64],
    n_samples: usize,
    seed: u64,
    mode: Mode,
    output: usize,
) -> Result<Vec<EmpiricalEstimate>> {
    let stats = draw_statistics(gp, x_star, grid, output, n_samples, seed)?;
    Ok(deltas.iter().map(|d| stats.estimate(mode, *d)).collect())
}

/// Low-rank `F` with `F Fᵀ ≈ A` for a positive semi-definite `A`, pivoting
/// on the largest residual variance and stopping once every residual
/// variance is negligible.
pub(crate) fn pivoted_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut diag: Vec<f64> = (0..n).map(|i| a[(i, i)].max(0.0)).collect();
    let scale = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numerical("covariance has non-finite entries".into()));
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; n];
    while cols.len() < n {
        let (piv, &dmax) = diag
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("unused index remains");
        if dmax <= RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        used[piv] = true;
        let root = dmax.sqrt();
        let mut col = vec![0.0; n];
        for i in 0..n {
            if used[i] && i != piv {
                continue;
            }
            let mut v = a[(i, piv)];
            for c in &cols {
                v -= c[i] * c[piv];
            }
            col[i] = v / root;
        }
        col[piv] = root;
        for i in 0..n {
            if !used[i] {
                diag[i] = (diag[i] - col[i] * col[i]).max(0.0);
            }
        }
        cols.push(col);
    }
    Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}
