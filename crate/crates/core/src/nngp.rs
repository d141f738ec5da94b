//! Least-squares classification with deep ReLU kernels, feature-mask
//! perturbation boxes and the normalised-variance statistic
//! `σ̄²(x*) = sup_{x ∈ T} Var[z(x)] / Var[z(x*)]`.

use serde::{Deserialize, Serialize};

use crate::bounds::{variance_self_sup, BnBConfig};
use crate::domain::InputBox;
use crate::error::{check_dim, Error, Result};
use crate::gp::{Dataset, TrainedGP};
use crate::kernels::KernelSpec;

/// `x / ‖x‖₂`.
pub fn unit_normalize(x: &[f64]) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::input("cannot normalise a zero or non-finite vector"));
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

/// Coding of class labels as regression targets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OneHotCoding {
    /// `e_k`.
    #[default]
    ZeroOne,
    /// `e_k − 1/n`.
    Centered,
}

pub fn one_hot_targets(labels: &[usize], n_classes: usize, coding: OneHotCoding) -> Result<Vec<Vec<f64>>> {
    if n_classes == 0 {
        return Err(Error::input("need at least one class"));
    }
    let shift = match coding {
        OneHotCoding::ZeroOne => 0.0,
        OneHotCoding::Centered => 1.0 / n_classes as f64,
    };
    labels
        .iter()
        .enumerate()
        .map(|(row, &l)| {
            if l >= n_classes {
                return Err(Error::input(format!(
                    "row {row}: label {l} outside [0, {n_classes})"
                )));
            }
            let mut y = vec![-shift; n_classes];
            y[l] += 1.0;
            Ok(y)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    pub class: usize,
    pub scores: Vec<f64>,
    /// Winning score minus the runner-up (the winning score for one class).
    pub margin: f64,
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn classify(gp: &TrainedGP, x: &[f64]) -> Result<ClassificationResult> {
    let scores = gp.posterior_mean(x)?;
    let class = argmax(&scores);
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != class)
        .map(|(_, s)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = if runner_up.is_finite() {
        scores[class] - runner_up
    } else {
        scores[class]
    };
    Ok(ClassificationResult {
        class,
        scores,
        margin,
    })
}

/// Fraction of `inputs` classified as `labels`.
pub fn accuracy(gp: &TrainedGP, inputs: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    check_dim(inputs.len(), labels.len())?;
    if inputs.is_empty() {
        return Err(Error::input("no evaluation rows"));
    }
    let mut hits = 0;
    for (x, l) in inputs.iter().zip(labels) {
        if classify(gp, x)?.class == *l {
            hits += 1;
        }
    }
    Ok(hits as f64 / inputs.len() as f64)
}

/// Pixels that may move, and by how much.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub name: String,
    pub pixels: Vec<usize>,
    pub gamma: f64,
}

impl FeatureMask {
    pub fn new(name: impl Into<String>, mut pixels: Vec<usize>, gamma: f64) -> Result<Self> {
        pixels.sort_unstable();
        pixels.dedup();
        let m = FeatureMask {
            name: name.into(),
            pixels,
            gamma,
        };
        Ok(m)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.pixels.is_empty() {
            return Err(Error::input(format!("mask {:?} is empty", self.name)));
        }
        if !self.pixels.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::input(format!("mask {:?} pixels must be sorted and unique", self.name)));
        }
        if let Some(p) = self.pixels.iter().find(|p| **p >= dim) {
            return Err(Error::input(format!("mask {:?} pixel {p} outside [0, {dim})", self.name)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::input(format!("mask {:?} gamma must be >= 0", self.name)));
        }
        Ok(())
    }

    pub fn with_gamma(&self, gamma: f64) -> FeatureMask {
        FeatureMask {
            gamma,
            ..self.clone()
        }
    }
}

/// The box moving the masked pixels of `x_star` by at most `γ`, optionally
/// intersected with `[clip.0, clip.1]`. The box always contains `x_star`.
pub fn feature_box(x_star: &[f64], mask: &FeatureMask, clip: Option<(f64, f64)>) -> Result<InputBox> {
    mask.validate(x_star.len())?;
    let mut lower = x_star.to_vec();
    let mut upper = x_star.to_vec();
    for &j in &mask.pixels {
        let (mut a, mut b) = (x_star[j] - mask.gamma, x_star[j] + mask.gamma);
        if let Some((lo, hi)) = clip {
            a = a.max(lo).min(x_star[j]);
            b = b.min(hi).max(x_star[j]);
        }
        lower[j] = a;
        upper[j] = b;
    }
    InputBox::new(lower, upper)
}

/// `σ̄²(x*)` over `region`. The search tolerance in `cfg` is read on the
/// normalised scale.
pub fn normalized_variance_sup(
    gp: &TrainedGP,
    x_star: &[f64],
    region: &InputBox,
    cfg: &BnBConfig,
) -> Result<f64> {
    let denom = gp.posterior_var(x_star)?;
    if !(denom > 0.0) {
        return Err(Error::Numerical(
            "posterior variance at the test point is zero; the ratio is undefined".into(),
        ));
    }
    let scaled = BnBConfig {
        tolerance: cfg.tolerance * denom,
        ..*cfg
    };
    let sup = variance_self_sup(gp, region, &scaled)?;
    Ok(sup.upper.max(denom) / denom)
}

/// One cell of a depth/size sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceCell {
    pub layers: usize,
    pub n_train: usize,
    pub point_id: usize,
    pub sigma_bar_sq: std::result::Result<f64, String>,
}

/// ReLU prior shared across a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReluPrior {
    pub weight_variance: f64,
    pub bias_variance: f64,
}

/// `σ̄²` for every `(L, |D|, x*)`, fitting one GP per `(L, |D|)` on the
/// first `|D|` rows of `pool`. Cells are ordered by layers, then size, then
/// point.
#[allow(clippy::too_many_arguments)]
pub fn depth_width_sweep(
    pool: &Dataset,
    layer_counts: &[usize],
    sizes: &[usize],
    prior: ReluPrior,
    jitter: f64,
    mask: &FeatureMask,
    clip: Option<(f64, f64)>,
    x_stars: &[Vec<f64>],
    cfg: &BnBConfig,
) -> Result<Vec<VarianceCell>> {
    if layer_counts.is_empty() || sizes.is_empty() || x_stars.is_empty() {
        return Err(Error::input("layer, size and point lists must be non-empty"));
    }
    let boxes: Vec<Result<InputBox>> = x_stars.iter().map(|x| feature_box(x, mask, clip)).collect();
    let mut cells = Vec::new();
    for &layers in layer_counts {
        for &n in sizes {
            let spec = KernelSpec::relu(layers, prior.weight_variance, prior.bias_variance, pool.input_dim());
            let fitted = if n == 0 || n > pool.len() {
                Err(format!("size {n} outside [1, {}]", pool.len()))
            } else {
                pool.head(n)
                    .and_then(|d| TrainedGP::fit(spec, &d, jitter))
                    .map_err(|e| e.to_string())
            };
            for (point_id, (x, b)) in x_stars.iter().zip(&boxes).enumerate() {
                let value = match (&fitted, b) {
                    (Err(e), _) => Err(e.clone()),
                    (_, Err(e)) => Err(e.to_string()),
                    (Ok(gp), Ok(b)) => normalized_variance_sup(gp, x, b, cfg).map_err(|e| e.to_string()),
                };
                if let Err(e) = &value {
                    log::warn!("variance cell L={layers} N={n} point {point_id} failed: {e}");
                }
                cells.push(VarianceCell {
                    layers,
                    n_train: n,
                    point_id,
                    sigma_bar_sq: value,
                });
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        assert_eq!(unit_normalize(&[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        assert_eq!(unit_normalize(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(unit_normalize(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn one_hot_round_trip() {
        let labels = [2, 0, 1, 2];
        let y = one_hot_targets(&labels, 10, OneHotCoding::ZeroOne).unwrap();
        assert_eq!(y[0][2], 1.0);
        assert_eq!(y[0].iter().sum::<f64>(), 1.0);
        let back: Vec<usize> = y.iter().map(|r| argmax(r)).collect();
        assert_eq!(back, labels);
        assert_eq!(one_hot_targets(&[0], 2, OneHotCoding::ZeroOne).unwrap(), vec![vec![1.0, 0.0]]);
        let c = one_hot_targets(&[1], 4, OneHotCoding::Centered).unwrap();
        assert!(c[0].iter().sum::<f64>().abs() < 1e-15);
        assert!(one_hot_targets(&[3], 3, OneHotCoding::ZeroOne).is_err());
    }

    #[test]
    fn ties_go_to_lowest_class() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3]), 1);
    }

    #[test]
    fn feature_box_shapes() {
        let x = vec![0.0, 0.5, 0.9, 0.2];
        let mask = FeatureMask::new("m", vec![2, 0], 0.15).unwrap();
        let b = feature_box(&x, &mask, Some((0.0, 1.0))).unwrap();
        assert_eq!(b.effective_dim(), 2);
        assert_eq!(b.side(0).lo, 0.0);
        assert_eq!(b.side(0).hi, 0.15);
        assert!((b.side(2).hi - 1.0).abs() < 1e-15);
        assert_eq!((b.side(1).lo, b.side(1).hi), (0.5, 0.5));
        assert!(b.contains(&x));
        let z = feature_box(&x, &mask.with_gamma(0.0), None).unwrap();
        assert!(z.is_point());
        let empty = FeatureMask::new("e", vec![], 0.1).unwrap();
        assert!(feature_box(&x, &empty, None).is_err());
    }

    #[test]
    fn normalized_variance_limits() {
        let xs: Vec<Vec<f64>> = (0..6)
            .map(|i| unit_normalize(&[1.0 + i as f64, 2.0, (i % 3) as f64]).unwrap())
            .collect();
        let data = Dataset::new(xs, (0..6).map(|i| vec![(i % 2) as f64, 1.0 - (i % 2) as f64]).collect()).unwrap();
        let gp = TrainedGP::fit(KernelSpec::relu(2, 3.19, 0.0, 3), &data, 1e-6).unwrap();
        let x = unit_normalize(&[0.3, 1.0, 2.0]).unwrap();
        let cfg = BnBConfig::default();
        let mask = FeatureMask::new("m", vec![0, 2], 0.0).unwrap();
        let b0 = feature_box(&x, &mask, None).unwrap();
        assert_eq!(normalized_variance_sup(&gp, &x, &b0, &cfg).unwrap(), 1.0);
        let b = feature_box(&x, &mask.with_gamma(0.15), None).unwrap();
        assert!(normalized_variance_sup(&gp, &x, &b, &cfg).unwrap() >= 1.0);
    }
}
