//! Exact Gaussian-process posterior inference.
//!
//! Outputs are modelled as `n` independent processes sharing one kernel, so
//! the posterior covariance does not depend on the output index and a single
//! Cholesky factor serves all of them.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::kernels::KernelSpec;

/// Jitter used when none is configured.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// Pre-clamp variances below this are reported as numerical trouble.
const NEGATIVE_VARIANCE_WARN: f64 = -1e-8;

/// Training inputs and targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::input("dataset must contain at least one sample"));
        }
        check_dim(inputs.len(), targets.len())?;
        let (m, n) = (inputs[0].len(), targets[0].len());
        if m == 0 || n == 0 {
            return Err(Error::input("inputs and targets need at least one column"));
        }
        for (row, (x, y)) in inputs.iter().zip(&targets).enumerate() {
            if x.len() != m || y.len() != n {
                return Err(Error::input(format!(
                    "row {row}: expected {m} inputs and {n} targets, got {} and {}",
                    x.len(),
                    y.len()
                )));
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(Error::input(format!("row {row} contains a non-finite value")));
            }
        }
        Ok(Dataset { inputs, targets })
    }

    /// Single-output dataset.
    pub fn scalar(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        Dataset::new(inputs, targets.into_iter().map(|y| vec![y]).collect())
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets[0].len()
    }

    /// First `count` samples.
    pub fn head(&self, count: usize) -> Result<Dataset> {
        let k = count.min(self.len());
        Dataset::new(self.inputs[..k].to_vec(), self.targets[..k].to_vec())
    }

    /// SHA-256 over the little-endian bytes of the shape, inputs and targets.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.len(), self.input_dim(), self.output_dim()] {
            h.update((v as u64).to_le_bytes());
        }
        for row in self.inputs.iter().chain(&self.targets) {
            for v in row {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Moments of `z(x*) − z(x)` under the posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffMoments {
    pub mean: Vec<f64>,
    pub cov: DMatrix<f64>,
}

/// Immutable posterior state.
#[derive(Debug)]
pub struct TrainedGP {
    spec: KernelSpec,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    jitter: f64,
    prior_mean: Vec<f64>,
    chol: DMatrix<f64>,
    weights: Vec<DVector<f64>>,
    clamped: AtomicUsize,
}

impl Clone for TrainedGP {
    fn clone(&self) -> Self {
        TrainedGP {
            spec: self.spec.clone(),
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            jitter: self.jitter,
            prior_mean: self.prior_mean.clone(),
            chol: self.chol.clone(),
            weights: self.weights.clone(),
            clamped: AtomicUsize::new(self.clamped.load(Ordering::Relaxed)),
        }
    }
}

impl TrainedGP {
    /// Condition on `data` with zero prior mean.
    pub fn fit(spec: KernelSpec, data: &Dataset, jitter: f64) -> Result<Self> {
        let zeros = vec![0.0; data.output_dim()];
        Self::fit_with_prior_mean(spec, data, jitter, zeros)
    }

    pub fn fit_with_prior_mean(
        spec: KernelSpec,
        data: &Dataset,
        jitter: f64,
        prior_mean: Vec<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        check_dim(spec.input_dim(), data.input_dim())?;
        check_dim(data.output_dim(), prior_mean.len())?;
        if !(jitter.is_finite() && jitter >= 0.0) {
            return Err(Error::input(format!("jitter must be finite and >= 0, got {jitter}")));
        }
        let n = data.len();
        let inputs = data.inputs();
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = spec.covariance(&inputs[i], &inputs[j]);
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
            gram[(i, i)] += jitter;
        }
        if gram.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("Gram matrix has non-finite entries".into()));
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                context: format!("{n}x{n} Gram matrix with jitter {jitter}"),
            })?
            .unpack();
        let weights = (0..data.output_dim())
            .map(|i| {
                let centred = DVector::from_iterator(
                    n,
                    data.targets().iter().map(|y| y[i] - prior_mean[i]),
                );
                let half = chol.solve_lower_triangular(&centred).expect("non-singular factor");
                chol.tr_solve_lower_triangular(&half).expect("non-singular factor")
            })
            .collect();
        Ok(TrainedGP {
            spec,
            inputs: inputs.to_vec(),
            targets: data.targets().to_vec(),
            jitter,
            prior_mean,
            chol,
            weights,
            clamped: AtomicUsize::new(0),
        })
    }

    /// The unconditioned prior with `outputs` components.
    pub fn prior_only(spec: KernelSpec, outputs: usize) -> Result<Self> {
        spec.validate()?;
        if outputs == 0 {
            return Err(Error::input("need at least one output"));
        }
        Ok(TrainedGP {
            spec,
            inputs: Vec::new(),
            targets: Vec::new(),
            jitter: 0.0,
            prior_mean: vec![0.0; outputs],
            chol: DMatrix::zeros(0, 0),
            weights: vec![DVector::zeros(0); outputs],
            clamped: AtomicUsize::new(0),
        })
    }

    /// Rebuild from stored parts without refactorising.
    pub(crate) fn from_parts(
        spec: KernelSpec,
        data: &Dataset,
        jitter: f64,
        prior_mean: Vec<f64>,
        chol: DMatrix<f64>,
        weights: Vec<DVector<f64>>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = data.len();
        if chol.shape() != (n, n) || weights.len() != data.output_dim() {
            return Err(Error::Parse("stored factor does not match the dataset".into()));
        }
        if weights.iter().any(|w| w.len() != n) {
            return Err(Error::Parse("stored weights do not match the dataset".into()));
        }
        Ok(TrainedGP {
            spec,
            inputs: data.inputs().to_vec(),
            targets: data.targets().to_vec(),
            jitter,
            prior_mean,
            chol,
            weights,
            clamped: AtomicUsize::new(0),
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn dataset(&self) -> Option<Dataset> {
        Dataset::new(self.inputs.clone(), self.targets.clone()).ok()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn prior_mean(&self) -> &[f64] {
        &self.prior_mean
    }

    /// Lower Cholesky factor of the regularised Gram matrix.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `t = (Σ_DD + jitter·I)⁻¹ (y − μ)` for output `i`.
    pub fn weights(&self, i: usize) -> &DVector<f64> {
        &self.weights[i]
    }

    pub fn all_weights(&self) -> &[DVector<f64>] {
        &self.weights
    }

    pub fn num_train(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.prior_mean.len()
    }

    /// How many posterior variances were clamped up to zero so far.
    pub fn clamp_count(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.input_dim(), x.len())
    }

    pub(crate) fn check_output(&self, i: usize) -> Result<()> {
        if i < self.output_dim() {
            Ok(())
        } else {
            Err(Error::input(format!(
                "output index {i} out of range for {} outputs",
                self.output_dim()
            )))
        }
    }

    /// `Σ_{x,D}` as a column vector.
    pub fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.inputs.len(),
            self.inputs.iter().map(|xi| self.spec.covariance(x, xi)),
        )
    }

    /// `L⁻¹ v` for the stored factor `L`.
    pub fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        if v.is_empty() {
            return v.clone();
        }
        self.chol.solve_lower_triangular(v).expect("non-singular factor")
    }

    /// Posterior mean of every output at `x`.
    pub fn posterior_mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let k = self.cross_cov(x);
        Ok(self
            .weights
            .iter()
            .zip(&self.prior_mean)
            .map(|(t, mu)| mu + k.dot(t))
            .collect())
    }

    /// Posterior mean of output `i` without dimension checks.
    pub(crate) fn mean_component(&self, x: &[f64], i: usize) -> f64 {
        let t = &self.weights[i];
        self.prior_mean[i]
            + self
                .inputs
                .iter()
                .zip(t.iter())
                .map(|(xi, ti)| ti * self.spec.covariance(x, xi))
                .sum::<f64>()
    }

    /// Posterior covariance between `z(x1)` and `z(x2)` (any output).
    pub fn posterior_cov(&self, x1: &[f64], x2: &[f64]) -> Result<f64> {
        self.check_point(x1)?;
        self.check_point(x2)?;
        let v1 = self.whiten(&self.cross_cov(x1));
        let v2 = self.whiten(&self.cross_cov(x2));
        Ok(self.spec.covariance(x1, x2) - v1.dot(&v2))
    }

    /// Posterior variance, clamped at zero.
    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.var_unchecked(x))
    }

    pub(crate) fn var_unchecked(&self, x: &[f64]) -> f64 {
        let v = self.whiten(&self.cross_cov(x));
        self.clamp(self.spec.covariance(x, x) - v.norm_squared())
    }

    /// Variance of `z(x*) − z(x)`, from `Σ** + Σxx − 2Σ*x − ‖L⁻¹(Σ_{x,D} − Σ_{x*,D})‖²`.
    pub(crate) fn diff_var_unchecked(&self, x_star: &[f64], k_star: &DVector<f64>, x: &[f64]) -> f64 {
        let r = self.cross_cov(x) - k_star;
        let v = self.whiten(&r);
        let prior = self.spec.covariance(x_star, x_star) + self.spec.covariance(x, x)
            - 2.0 * self.spec.covariance(x_star, x);
        self.clamp(prior - v.norm_squared())
    }

    fn clamp(&self, v: f64) -> f64 {
        if v < 0.0 {
            self.clamped.fetch_add(1, Ordering::Relaxed);
            if v < NEGATIVE_VARIANCE_WARN {
                log::warn!("posterior variance {v:e} clamped to zero");
            }
            0.0
        } else {
            v
        }
    }

    /// Moments of the difference process `z(x*) − z(x)`.
    pub fn difference_moments(&self, x_star: &[f64], x: &[f64]) -> Result<DiffMoments> {
        self.check_point(x_star)?;
        self.check_point(x)?;
        let ms = self.posterior_mean(x_star)?;
        let mx = self.posterior_mean(x)?;
        let var = self.diff_var_unchecked(x_star, &self.cross_cov(x_star), x);
        let n = self.output_dim();
        Ok(DiffMoments {
            mean: ms.iter().zip(&mx).map(|(a, b)| a - b).collect(),
            cov: DMatrix::from_diagonal_element(n, n, var),
        })
    }

    /// Gaussian log-evidence summed over outputs.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.num_train() as f64;
        let log_det: f64 = self.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        self.weights
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let fit: f64 = self
                    .targets
                    .iter()
                    .zip(t.iter())
                    .map(|(y, ti)| (y[i] - self.prior_mean[i]) * ti)
                    .sum();
                -0.5 * fit - 0.5 * log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
            })
            .sum()
    }
}

/// Values to try for one hyperparameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    /// `variance`, `theta`, `alpha`, `frequency`, `p`, `layers`,
    /// `weight_variance`, `bias_variance` or `jitter`.
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    pub spec: KernelSpec,
    pub jitter: f64,
    pub log_likelihood: f64,
}

/// Replace one hyperparameter of `spec`. Vector-valued parameters are set
/// to `value` in every coordinate.
pub fn with_param(spec: &KernelSpec, param: &str, value: f64) -> Result<KernelSpec> {
    let mut s = spec.clone();
    let bad = || Error::input(format!("parameter {param:?} does not apply to {}", spec.family_name()));
    let as_count = |v: f64| -> Result<usize> {
        if v >= 0.0 && v.fract() == 0.0 {
            Ok(v as usize)
        } else {
            Err(Error::input(format!("{param} must be a non-negative integer, got {v}")))
        }
    };
    match (&mut s, param) {
        (
            KernelSpec::SquaredExponential { variance, .. }
            | KernelSpec::RationalQuadratic { variance, .. }
            | KernelSpec::Linear { variance, .. }
            | KernelSpec::Periodic { variance, .. }
            | KernelSpec::MaternHalfInteger { variance, .. },
            "variance",
        ) => *variance = value,
        (
            KernelSpec::SquaredExponential { theta, .. }
            | KernelSpec::RationalQuadratic { theta, .. }
            | KernelSpec::Linear { theta, .. }
            | KernelSpec::Periodic { theta, .. }
            | KernelSpec::MaternHalfInteger { theta, .. },
            "theta",
        ) => theta.iter_mut().for_each(|t| *t = value),
        (KernelSpec::RationalQuadratic { alpha, .. }, "alpha") => *alpha = value,
        (KernelSpec::Periodic { frequency, .. }, "frequency") => {
            frequency.iter_mut().for_each(|p| *p = value)
        }
        (KernelSpec::MaternHalfInteger { p, .. }, "p") => *p = as_count(value)? as u32,
        (KernelSpec::ReluDeep { layers, .. }, "layers") => *layers = as_count(value)?,
        (KernelSpec::ReluDeep { weight_variance, .. }, "weight_variance") => *weight_variance = value,
        (KernelSpec::ReluDeep { bias_variance, .. }, "bias_variance") => *bias_variance = value,
        _ => return Err(bad()),
    }
    Ok(s)
}

/// Maximise the log marginal likelihood over the Cartesian product of
/// `grids`. The first grid varies slowest; ties keep the earliest point.
pub fn hyper_grid_search(
    template: &KernelSpec,
    data: &Dataset,
    grids: &[HyperGrid],
    default_jitter: f64,
) -> Result<GridSearchResult> {
    for g in grids {
        if g.values.is_empty() {
            return Err(Error::input(format!("grid for {:?} is empty", g.param)));
        }
        if g.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("grid for {:?} has non-finite values", g.param)));
        }
    }
    let mut best: Option<GridSearchResult> = None;
    let mut failures = Vec::new();
    let mut index = vec![0usize; grids.len()];
    loop {
        let mut spec = template.clone();
        let mut jitter = default_jitter;
        let mut label = Vec::new();
        let mut setup = Ok(());
        for (g, &k) in grids.iter().zip(&index) {
            let v = g.values[k];
            label.push(format!("{}={v}", g.param));
            if g.param == "jitter" {
                jitter = v;
            } else {
                match with_param(&spec, &g.param, v) {
                    Ok(s) => spec = s,
                    Err(e) => setup = Err(e),
                }
            }
        }
        setup?;
        match TrainedGP::fit(spec.clone(), data, jitter) {
            Ok(gp) => {
                let ll = gp.log_marginal_likelihood();
                log::debug!("grid point {}: log-likelihood {ll}", label.join(", "));
                if ll.is_finite() && best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
                    best = Some(GridSearchResult {
                        spec,
                        jitter,
                        log_likelihood: ll,
                    });
                }
            }
            Err(e) => failures.push(format!("{} ({e})", label.join(", "))),
        }
        // odometer increment, last grid fastest
        let mut d = grids.len();
        loop {
            if d == 0 {
                return best.ok_or_else(|| {
                    Error::Numerical(format!("every grid point failed: {}", failures.join("; ")))
                });
            }
            d -= 1;
            index[d] += 1;
            if index[d] < grids[d].values.len() {
                break;
            }
            index[d] = 0;
        }
    }
}
