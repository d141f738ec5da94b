//! CSV tables written by the commands, and their readers.
//!
//! Floats are written in shortest round-trip form, with `inf`, `-inf` and
//! `nan` for non-finite values, so every table parses back bit for bit.

use std::path::Path;

use crate::certificate::{Certificate, Mode};
use crate::error::{Error, Result};
use crate::float_serde::{format_float, parse_float};

pub const SWEEP_COLUMNS: [&str; 14] = [
    "gamma",
    "delta",
    "mode",
    "phi_hat",
    "log_phi_hat",
    "eta",
    "xi_hat",
    "dudley",
    "K",
    "sup_d",
    "sup_mean",
    "vacuous",
    "converged",
    "error",
];

pub const BASELINE_COLUMNS: [&str; 8] = [
    "gamma",
    "delta",
    "mode",
    "phi_hat",
    "std_error",
    "n_samples",
    "n_grid",
    "seed",
];

pub const VARIANCE_COLUMNS: [&str; 4] = ["L", "N", "point_id", "sigma_bar_sq"];

/// One row of a certificate sweep. Failed cells carry `error` and NaN
/// numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub delta: f64,
    pub mode: Mode,
    pub phi_hat: f64,
    pub log_phi_hat: f64,
    pub eta: f64,
    pub xi_hat: f64,
    pub dudley: f64,
    pub lipschitz: f64,
    pub sup_d: f64,
    pub sup_mean: f64,
    pub vacuous: bool,
    pub converged: bool,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn from_certificate(gamma: f64, c: &Certificate) -> SweepRow {
        SweepRow {
            gamma,
            delta: c.delta,
            mode: c.mode,
            phi_hat: c.phi_hat,
            log_phi_hat: c.log_phi_hat,
            eta: c.eta,
            xi_hat: c.xi_hat,
            dudley: c.dudley,
            lipschitz: c.lipschitz,
            sup_d: c.sup_d,
            sup_mean: c.sup_mean,
            vacuous: c.vacuous,
            converged: c.converged,
            error: None,
        }
    }

    pub fn failed(gamma: f64, delta: f64, mode: Mode, error: String) -> SweepRow {
        let nan = f64::NAN;
        SweepRow {
            gamma,
            delta,
            mode,
            phi_hat: nan,
            log_phi_hat: nan,
            eta: nan,
            xi_hat: nan,
            dudley: nan,
            lipschitz: nan,
            sup_d: nan,
            sup_mean: nan,
            vacuous: false,
            converged: false,
            error: Some(error),
        }
    }

    fn fields(&self) -> Vec<String> {
        let f = format_float;
        vec![
            f(self.gamma),
            f(self.delta),
            self.mode.as_str().into(),
            f(self.phi_hat),
            f(self.log_phi_hat),
            f(self.eta),
            f(self.xi_hat),
            f(self.dudley),
            f(self.lipschitz),
            f(self.sup_d),
            f(self.sup_mean),
            self.vacuous.to_string(),
            self.converged.to_string(),
            self.error.clone().unwrap_or_default(),
        ]
    }

    fn parse(r: &Row) -> Result<SweepRow> {
        let error = r.text(13);
        Ok(SweepRow {
            gamma: r.float(0)?,
            delta: r.float(1)?,
            mode: r.mode(2)?,
            phi_hat: r.float(3)?,
            log_phi_hat: r.float(4)?,
            eta: r.float(5)?,
            xi_hat: r.float(6)?,
            dudley: r.float(7)?,
            lipschitz: r.float(8)?,
            sup_d: r.float(9)?,
            sup_mean: r.float(10)?,
            vacuous: r.flag(11)?,
            converged: r.flag(12)?,
            error: (!error.is_empty()).then(|| error.to_string()),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineRow {
    pub gamma: f64,
    pub delta: f64,
    pub mode: Mode,
    /// The empirical estimate.
    pub phi_hat: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_grid: usize,
    pub seed: u64,
}

impl BaselineRow {
    fn fields(&self) -> Vec<String> {
        vec![
            format_float(self.gamma),
            format_float(self.delta),
            self.mode.as_str().into(),
            format_float(self.phi_hat),
            format_float(self.std_error),
            self.n_samples.to_string(),
            self.n_grid.to_string(),
            self.seed.to_string(),
        ]
    }

    fn parse(r: &Row) -> Result<BaselineRow> {
        Ok(BaselineRow {
            gamma: r.float(0)?,
            delta: r.float(1)?,
            mode: r.mode(2)?,
            phi_hat: r.float(3)?,
            std_error: r.float(4)?,
            n_samples: r.int(5)?,
            n_grid: r.int(6)?,
            seed: r.int(7)?,
        })
    }
}

/// `sigma_bar_sq` is NaN for failed cells.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRow {
    pub layers: usize,
    pub n_train: usize,
    pub point_id: usize,
    pub sigma_bar_sq: f64,
}

impl VarianceRow {
    fn fields(&self) -> Vec<String> {
        vec![
            self.layers.to_string(),
            self.n_train.to_string(),
            self.point_id.to_string(),
            format_float(self.sigma_bar_sq),
        ]
    }

    fn parse(r: &Row) -> Result<VarianceRow> {
        Ok(VarianceRow {
            layers: r.int(0)?,
            n_train: r.int(1)?,
            point_id: r.int(2)?,
            sigma_bar_sq: r.float(3)?,
        })
    }
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_table(path, &SWEEP_COLUMNS, rows.iter().map(SweepRow::fields))
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    read_table(path, &SWEEP_COLUMNS, SweepRow::parse)
}

pub fn write_baseline(path: &Path, rows: &[BaselineRow]) -> Result<()> {
    write_table(path, &BASELINE_COLUMNS, rows.iter().map(BaselineRow::fields))
}

pub fn read_baseline(path: &Path) -> Result<Vec<BaselineRow>> {
    read_table(path, &BASELINE_COLUMNS, BaselineRow::parse)
}

pub fn write_variance(path: &Path, rows: &[VarianceRow]) -> Result<()> {
    write_table(path, &VARIANCE_COLUMNS, rows.iter().map(VarianceRow::fields))
}

pub fn read_variance(path: &Path) -> Result<Vec<VarianceRow>> {
    read_table(path, &VARIANCE_COLUMNS, VarianceRow::parse)
}

fn io_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    path: &'a Path,
    line: usize,
}

impl Row<'_> {
    fn text(&self, k: usize) -> &str {
        self.record.get(k).unwrap_or("")
    }

    fn fail(&self, k: usize, what: &str) -> Error {
        Error::Parse(format!(
            "{} line {}: field {} ({:?}) is not {what}",
            self.path.display(),
            self.line,
            k + 1,
            self.text(k)
        ))
    }

    fn float(&self, k: usize) -> Result<f64> {
        parse_float(self.text(k)).ok_or_else(|| self.fail(k, "a number"))
    }

    fn int<T: std::str::FromStr>(&self, k: usize) -> Result<T> {
        self.text(k).parse().map_err(|_| self.fail(k, "an integer"))
    }

    fn flag(&self, k: usize) -> Result<bool> {
        self.text(k).parse().map_err(|_| self.fail(k, "true or false"))
    }

    fn mode(&self, k: usize) -> Result<Mode> {
        match self.text(k) {
            "phi1" => Ok(Mode::Phi1),
            "phi2" => Ok(Mode::Phi2),
            _ => Err(self.fail(k, "phi1 or phi2")),
        }
    }
}

fn read_table<T>(path: &Path, header: &[&str], parse: impl Fn(&Row) -> Result<T>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let found = r.headers().map_err(|e| io_error(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse(format!(
            "{}: expected columns {}",
            path.display(),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let record = rec.map_err(|e| io_error(path, e))?;
        out.push(parse(&Row {
            record: &record,
            path,
            line: i + 2,
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn same(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    #[test]
    fn sweep_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![
            SweepRow {
                gamma: 0.1,
                delta: 1.0 / 3.0,
                mode: Mode::Phi2,
                phi_hat: 0.0,
                log_phi_hat: -1234.5,
                eta: 0.2,
                xi_hat: 1e-7,
                dudley: 0.04,
                lipschitz: f64::INFINITY,
                sup_d: 2e-3,
                sup_mean: 1e-4,
                vacuous: false,
                converged: true,
                error: None,
            },
            SweepRow::failed(0.2, 0.5, Mode::Phi1, "not positive definite, with a comma".into()),
        ];
        write_sweep(&path, &rows).unwrap();
        let back = read_sweep(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
        assert!(same(back[1].phi_hat, rows[1].phi_hat));
        assert_eq!(back[1].error, rows[1].error);
    }

    #[test]
    fn other_tables_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = vec![BaselineRow {
            gamma: 0.1,
            delta: 0.05,
            mode: Mode::Phi1,
            phi_hat: 0.0123,
            std_error: 0.0011,
            n_samples: 10_000,
            n_grid: 2025,
            seed: 7,
        }];
        let p = dir.path().join("b.csv");
        write_baseline(&p, &b).unwrap();
        assert_eq!(read_baseline(&p).unwrap(), b);
        let v = vec![
            VarianceRow {
                layers: 2,
                n_train: 100,
                point_id: 0,
                sigma_bar_sq: 1.75,
            },
            VarianceRow {
                layers: 3,
                n_train: 50,
                point_id: 1,
                sigma_bar_sq: f64::NAN,
            },
        ];
        let p = dir.path().join("v.csv");
        write_variance(&p, &v).unwrap();
        let back = read_variance(&p).unwrap();
        assert_eq!(back[0], v[0]);
        assert!(back[1].sigma_bar_sq.is_nan());
        assert!(read_sweep(&p).is_err());
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().next(), Some("L,N,point_id,sigma_bar_sq"));
    }
}
