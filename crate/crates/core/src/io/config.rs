//! The run configuration: a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::BnBConfig;
use crate::certificate::Mode;
use crate::domain::InputBox;
use crate::dudley::DEFAULT_QUAD_TOL;
use crate::error::{Error, Result};
use crate::gp::{HyperGrid, DEFAULT_JITTER};
use crate::kernels::KernelSpec;
use crate::nngp::{feature_box, FeatureMask, OneHotCoding};
use crate::sampling::{DEFAULT_PER_DIM, DEFAULT_SAMPLES};

/// Where training or evaluation rows come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    Csv(CsvSource),
    /// The seeded saddle-shaped regression problem.
    Quadratic(QuadraticSource),
}

/// A CSV file with a header row. Either the first `features` columns are
/// inputs and the next `targets` columns are targets, or a `label_column`
/// holds integer class labels and the first `features` other columns are
/// inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub features: usize,
    #[serde(default)]
    pub targets: Option<usize>,
    #[serde(default)]
    pub label_column: Option<String>,
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub coding: OneHotCoding,
    /// Scale every input row to unit Euclidean norm.
    #[serde(default)]
    pub normalize: bool,
    /// Keep only the first `rows` data rows.
    #[serde(default)]
    pub rows: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSource {
    #[serde(default = "default_quadratic_samples")]
    pub samples: usize,
    pub coefficients: [f64; 3],
    pub noise_std: f64,
    pub seed: u64,
}

fn default_quadratic_samples() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPoint {
    pub name: String,
    pub x: Vec<f64>,
}

/// A mask selected by name from a mask file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskRef {
    pub file: PathBuf,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    pub points: Vec<NamedPoint>,
    /// Half-widths of the regions; with a mask, the per-pixel budget.
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    /// Output certified in safety mode.
    #[serde(default)]
    pub output: usize,
    #[serde(default)]
    pub mask: Option<MaskRef>,
    #[serde(default)]
    pub clip: Option<[f64; 2]>,
}

fn both_modes() -> Vec<Mode> {
    vec![Mode::Phi1, Mode::Phi2]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_per_dim")]
    pub per_dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to the certify section's positive gammas.
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    /// Defaults to the certify section's deltas.
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        BaselineSection {
            n_samples: DEFAULT_SAMPLES,
            per_dim: DEFAULT_PER_DIM,
            seed: 0,
            gammas: None,
            deltas: None,
        }
    }
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_per_dim() -> usize {
    DEFAULT_PER_DIM
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceSection {
    /// Labelled training pool; each cell uses its first `|D|` rows.
    pub pool: DatasetSource,
    /// Labelled rows holding the test points.
    pub test: DatasetSource,
    /// Row indices of the test points.
    pub points: Vec<usize>,
    pub layers: Vec<usize>,
    pub sizes: Vec<usize>,
    pub weight_variance: f64,
    pub bias_variance: f64,
    pub mask: MaskRef,
    /// Overrides the mask's own budget.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub clip: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: Option<DatasetSource>,
    /// Labelled rows scored after fitting.
    #[serde(default)]
    pub evaluation: Option<DatasetSource>,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub hyper_grid: Vec<HyperGrid>,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default)]
    pub prior_mean: Option<Vec<f64>>,
    #[serde(default)]
    pub bnb: BnBConfig,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    /// Model artifact; defaults to `model.gpm` in the output directory.
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub certify: Option<CertifySection>,
    #[serde(default)]
    pub baseline: Option<BaselineSection>,
    #[serde(default)]
    pub variance: Option<VarianceSection>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

fn default_quad_tol() -> f64 {
    DEFAULT_QUAD_TOL
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Parse `path`, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    /// Make every relative path relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        let fix_source = |s: &mut DatasetSource| {
            if let DatasetSource::Csv(c) = s {
                fix(&mut c.path);
            }
        };
        if let Some(d) = &mut self.dataset {
            fix_source(d);
        }
        if let Some(d) = &mut self.evaluation {
            fix_source(d);
        }
        if let Some(m) = &mut self.model {
            fix(m);
        }
        if let Some(c) = &mut self.certify {
            if let Some(m) = &mut c.mask {
                fix(&mut m.file);
            }
        }
        if let Some(v) = &mut self.variance {
            fix_source(&mut v.pool);
            fix_source(&mut v.test);
            fix(&mut v.mask.file);
        }
        fix(&mut self.out_dir);
    }

    /// Checks shared by every command. Referenced files must exist.
    pub fn validate(&self) -> Result<()> {
        self.bnb.validate()?;
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::input("jitter must be finite and >= 0"));
        }
        if !(self.quad_tol > 0.0) {
            return Err(Error::input("quad_tol must be > 0"));
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        for src in self.dataset.iter().chain(&self.evaluation) {
            src.validate()?;
        }
        if let Some(c) = &self.certify {
            c.validate()?;
        }
        if let Some(b) = &self.baseline {
            if b.n_samples == 0 || b.per_dim == 0 {
                return Err(Error::input("baseline n_samples and per_dim must be >= 1"));
            }
            if let Some(d) = &b.deltas {
                check_deltas(d)?;
            }
        }
        if let Some(v) = &self.variance {
            v.pool.validate()?;
            v.test.validate()?;
            require_file(&v.mask.file)?;
            if v.points.is_empty() || v.layers.is_empty() || v.sizes.is_empty() {
                return Err(Error::input("variance points, layers and sizes must be non-empty"));
            }
        }
        Ok(())
    }

    pub fn model_path(&self) -> PathBuf {
        self.model.clone().unwrap_or_else(|| self.out_dir.join("model.gpm"))
    }
}

impl DatasetSource {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSource::Csv(c) => {
                require_file(&c.path)?;
                match (&c.targets, &c.label_column) {
                    (Some(_), None) | (None, Some(_)) => {}
                    _ => {
                        return Err(Error::input(format!(
                            "{}: give exactly one of targets and label_column",
                            c.path.display()
                        )))
                    }
                }
                if c.features == 0 {
                    return Err(Error::input("features must be >= 1"));
                }
                Ok(())
            }
            DatasetSource::Quadratic(q) => {
                if q.samples == 0 {
                    return Err(Error::input("quadratic samples must be >= 1"));
                }
                Ok(())
            }
        }
    }
}

impl CertifySection {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::input("certify points must be non-empty"));
        }
        let mut names: Vec<&str> = self.points.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("certify point names must be unique"));
        }
        for p in &self.points {
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::input(format!(
                    "point name {:?} must be non-empty and use only letters, digits, '-' and '_'",
                    p.name
                )));
            }
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::input("gammas must be a non-empty list of finite values >= 0"));
        }
        check_deltas(&self.deltas)?;
        if self.modes.is_empty() {
            return Err(Error::input("modes must be non-empty"));
        }
        if let Some(m) = &self.mask {
            require_file(&m.file)?;
        }
        if let Some([lo, hi]) = self.clip {
            if !(lo <= hi) {
                return Err(Error::input("clip must satisfy lo <= hi"));
            }
        }
        Ok(())
    }
}

fn check_deltas(d: &[f64]) -> Result<()> {
    if d.is_empty() || d.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::input("deltas must be a non-empty list of finite values > 0"));
    }
    Ok(())
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::input(format!("file not found: {}", p.display())))
    }
}

/// The region around `x` for budget `gamma`: the masked feature box when a
/// mask is given, the cube of half-width `gamma` otherwise. With `clip`,
/// sides are intersected with `[clip.0, clip.1]` without excluding `x`.
pub fn region_for(x: &[f64], gamma: f64, mask: Option<&FeatureMask>, clip: Option<[f64; 2]>) -> Result<InputBox> {
    let clip = clip.map(|[lo, hi]| (lo, hi));
    match mask {
        Some(m) => feature_box(x, &m.with_gamma(gamma), clip),
        None => {
            let every = FeatureMask::new("all", (0..x.len()).collect(), gamma)?;
            feature_box(x, &every, clip)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_json(r#"{"kernel": {"family": "squared-exponential", "params": {"variance": 1.0, "theta": [1.0]}}}"#).unwrap();
        assert_eq!(cfg.jitter, DEFAULT_JITTER);
        assert_eq!(cfg.bnb, BnBConfig::default());
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
        assert_eq!(cfg.model_path(), PathBuf::from("out/model.gpm"));
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::from_json(r#"{"jiter": 1e-3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bnb": {"tolerance": 1e-3, "max_region": 4}}"#).is_err());
    }

    #[test]
    fn relative_paths_follow_the_config() {
        let mut cfg = RunConfig::from_json(
            r#"{"dataset": {"csv": {"path": "d.csv", "features": 2, "targets": 1}}, "out_dir": "o"}"#,
        )
        .unwrap();
        cfg.resolve_paths(Path::new("/tmp/run"));
        let DatasetSource::Csv(c) = cfg.dataset.as_ref().unwrap() else { panic!() };
        assert_eq!(c.path, PathBuf::from("/tmp/run/d.csv"));
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/run/o"));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn certify_section_checks() {
        let mut c = CertifySection {
            points: vec![NamedPoint { name: "a".into(), x: vec![0.0] }],
            gammas: vec![0.0, 0.1],
            deltas: vec![0.1],
            modes: both_modes(),
            output: 0,
            mask: None,
            clip: None,
        };
        c.validate().unwrap();
        c.deltas = vec![0.0];
        assert!(c.validate().is_err());
        c.deltas = vec![0.1];
        c.points[0].name = "a/b".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn regions() {
        let r = region_for(&[0.5, 0.0], 0.1, None, Some([0.0, 1.0])).unwrap();
        assert_eq!(r.side(1).lo, 0.0);
        assert!((r.side(0).lo - 0.4).abs() < 1e-15);
        let m = FeatureMask::new("m", vec![1], 0.3).unwrap();
        let r = region_for(&[0.5, 0.0], 0.1, Some(&m), None).unwrap();
        assert_eq!(r.effective_dim(), 1);
        assert_eq!(r.side(1).hi, 0.1);
    }
}
