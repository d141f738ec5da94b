//! Summaries of an output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::float_serde::format_float;
use crate::io::tables::{read_baseline, read_sweep, read_variance, BaselineRow, SweepRow, VarianceRow};
use crate::kernels::KernelSpec;

pub const FIT_SUMMARY: &str = "fit.json";
pub const VARIANCE_TABLE: &str = "variance.csv";
pub const REPORT: &str = "report.md";

/// Standard errors allowed between a sampled estimate and its bound.
pub const DOMINANCE_SIGMAS: f64 = 3.0;

/// What `fit` records next to the model artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub kernel: KernelSpec,
    pub jitter: f64,
    pub n_train: usize,
    pub fingerprint: String,
    #[serde(with = "crate::float_serde")]
    pub log_marginal_likelihood: f64,
    /// Held-out accuracy when evaluation rows were given.
    #[serde(default)]
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub n_evaluated: Option<usize>,
}

pub fn sweep_file(point: &str) -> String {
    format!("sweep_{point}.csv")
}

pub fn baseline_file(point: &str) -> String {
    format!("baseline_{point}.csv")
}

/// One certificate picked out of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Highlight {
    pub point: String,
    pub row: SweepRow,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSummary {
    pub point: String,
    pub rows: usize,
    pub vacuous: usize,
    pub failed: usize,
    pub unconverged: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub point: String,
    pub baseline: BaselineRow,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BaselineSummary {
    pub point: String,
    pub rows: usize,
    /// Rows with a matching certificate.
    pub compared: usize,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VarianceSummary {
    pub cells: usize,
    pub failed: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub fit: Option<FitSummary>,
    pub sweeps: Vec<SweepSummary>,
    /// Smallest bound among computed certificates.
    pub tightest: Option<Highlight>,
    /// Largest bound among non-vacuous certificates.
    pub loosest: Option<Highlight>,
    pub baselines: Vec<BaselineSummary>,
    pub variance: Option<VarianceSummary>,
}

impl Report {
    pub fn is_empty(&self) -> bool {
        self.fit.is_none() && self.sweeps.is_empty() && self.baselines.is_empty() && self.variance.is_none()
    }

    pub fn total_certificates(&self) -> usize {
        self.sweeps.iter().map(|s| s.rows).sum()
    }

    pub fn total_vacuous(&self) -> usize {
        self.sweeps.iter().map(|s| s.vacuous).sum()
    }

    pub fn total_failed(&self) -> usize {
        self.sweeps.iter().map(|s| s.failed).sum()
    }

    /// Markdown rendering.
    pub fn render(&self) -> String {
        let mut s = String::from("# gpcert report\n\n");
        if self.is_empty() {
            s.push_str("No artifacts found: run `fit`, `certify`, `baseline` or `variance` first.\n");
            return s;
        }
        if let Some(f) = &self.fit {
            let _ = writeln!(s, "## Model\n");
            let _ = writeln!(s, "- kernel: {}", f.kernel.family_name());
            let _ = writeln!(s, "- training rows: {}", f.n_train);
            let _ = writeln!(s, "- jitter: {}", format_float(f.jitter));
            let _ = writeln!(s, "- log marginal likelihood: {:.6}", f.log_marginal_likelihood);
            if let (Some(a), Some(n)) = (f.accuracy, f.n_evaluated) {
                let _ = writeln!(s, "- held-out accuracy: {a:.4} on {n} rows");
            }
            s.push('\n');
        }
        if !self.sweeps.is_empty() {
            let _ = writeln!(s, "## Certificates\n");
            let _ = writeln!(s, "| point | certificates | vacuous | failed | unconverged |");
            let _ = writeln!(s, "|---|---|---|---|---|");
            for w in &self.sweeps {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} |",
                    w.point, w.rows, w.vacuous, w.failed, w.unconverged
                );
            }
            let _ = writeln!(
                s,
                "\nTotal: {} certificates, {} vacuous, {} failed.\n",
                self.total_certificates(),
                self.total_vacuous(),
                self.total_failed()
            );
            for (label, h) in [("Tightest", &self.tightest), ("Loosest non-vacuous", &self.loosest)] {
                match h {
                    Some(h) => {
                        let _ = writeln!(
                            s,
                            "- {label}: point {}, {} at gamma {}, delta {}: phi_hat {} (ln {:.4})",
                            h.point,
                            h.row.mode.as_str(),
                            format_float(h.row.gamma),
                            format_float(h.row.delta),
                            format_float(h.row.phi_hat),
                            h.row.log_phi_hat
                        );
                    }
                    None => {
                        let _ = writeln!(s, "- {label}: none");
                    }
                }
            }
            s.push('\n');
        }
        if !self.baselines.is_empty() {
            let _ = writeln!(s, "## Sampling baselines\n");
            let _ = writeln!(s, "| point | estimates | compared | above bound + {DOMINANCE_SIGMAS} s.e. |");
            let _ = writeln!(s, "|---|---|---|---|");
            for b in &self.baselines {
                let _ = writeln!(s, "| {} | {} | {} | {} |", b.point, b.rows, b.compared, b.violations.len());
            }
            for b in &self.baselines {
                for v in &b.violations {
                    let _ = writeln!(
                        s,
                        "\n- point {}, {} at gamma {}, delta {}: estimate {} exceeds bound {}",
                        v.point,
                        v.baseline.mode.as_str(),
                        format_float(v.baseline.gamma),
                        format_float(v.baseline.delta),
                        format_float(v.baseline.phi_hat),
                        format_float(v.bound)
                    );
                }
            }
            s.push('\n');
        }
        if let Some(v) = &self.variance {
            let _ = writeln!(s, "## Normalised variance\n");
            let _ = writeln!(s, "- cells: {} ({} failed)", v.cells, v.failed);
            if let (Some(lo), Some(hi)) = (v.min, v.max) {
                let _ = writeln!(s, "- range: {lo:.6} to {hi:.6}");
            }
            s.push('\n');
        }
        s
    }
}

fn points_with(dir: &Path, prefix: &str) -> Result<Vec<(String, PathBuf)>> {
    let entries = match std::fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(dir)(e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(Error::io(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(point) = name.strip_prefix(prefix).and_then(|n| n.strip_suffix(".csv")) {
            out.push((point.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

fn summarize_sweep(point: &str, rows: &[SweepRow]) -> SweepSummary {
    SweepSummary {
        point: point.to_string(),
        rows: rows.len(),
        vacuous: rows.iter().filter(|r| r.error.is_none() && r.vacuous).count(),
        failed: rows.iter().filter(|r| r.error.is_some()).count(),
        unconverged: rows.iter().filter(|r| r.error.is_none() && !r.converged).count(),
    }
}

fn compare(point: &str, baseline: &[BaselineRow], sweep: Option<&Vec<SweepRow>>) -> BaselineSummary {
    let mut out = BaselineSummary {
        point: point.to_string(),
        rows: baseline.len(),
        ..Default::default()
    };
    let Some(sweep) = sweep else {
        return out;
    };
    for b in baseline {
        let bound = sweep.iter().find(|r| {
            r.error.is_none() && r.mode == b.mode && r.gamma == b.gamma && r.delta == b.delta
        });
        if let Some(r) = bound {
            out.compared += 1;
            if b.phi_hat > r.phi_hat + DOMINANCE_SIGMAS * b.std_error {
                out.violations.push(Violation {
                    point: point.to_string(),
                    baseline: b.clone(),
                    bound: r.phi_hat,
                });
            }
        }
    }
    out
}

fn summarize_variance(rows: &[VarianceRow]) -> VarianceSummary {
    let ok: Vec<f64> = rows.iter().map(|r| r.sigma_bar_sq).filter(|v| !v.is_nan()).collect();
    VarianceSummary {
        cells: rows.len(),
        failed: rows.len() - ok.len(),
        min: ok.iter().copied().reduce(f64::min),
        max: ok.iter().copied().reduce(f64::max),
    }
}

/// Gather every artifact in `dir`.
pub fn build_report(dir: &Path) -> Result<Report> {
    let mut report = Report::default();
    let fit = dir.join(FIT_SUMMARY);
    if fit.is_file() {
        let text = std::fs::read_to_string(&fit).map_err(Error::io(&fit))?;
        report.fit = Some(serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", fit.display())))?);
    }
    let mut sweeps = Vec::new();
    for (point, path) in points_with(dir, "sweep_")? {
        let rows = read_sweep(&path)?;
        report.sweeps.push(summarize_sweep(&point, &rows));
        sweeps.push((point, rows));
    }
    let computed = || {
        sweeps
            .iter()
            .flat_map(|(p, rows)| rows.iter().filter(|r| r.error.is_none()).map(move |r| (p, r)))
    };
    let pick = |(p, r): (&String, &SweepRow)| Highlight {
        point: p.clone(),
        row: r.clone(),
    };
    report.tightest = computed()
        .min_by(|a, b| a.1.log_phi_hat.total_cmp(&b.1.log_phi_hat))
        .map(pick);
    report.loosest = computed()
        .filter(|(_, r)| !r.vacuous)
        .max_by(|a, b| a.1.log_phi_hat.total_cmp(&b.1.log_phi_hat))
        .map(pick);
    for (point, path) in points_with(dir, "baseline_")? {
        let rows = read_baseline(&path)?;
        let sweep = sweeps.iter().find(|(p, _)| *p == point).map(|(_, r)| r);
        report.baselines.push(compare(&point, &rows, sweep));
    }
    let variance = dir.join(VARIANCE_TABLE);
    if variance.is_file() {
        report.variance = Some(summarize_variance(&read_variance(&variance)?));
    }
    Ok(report)
}
