//! Dataset and mask ingestion.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gp::Dataset;
use crate::io::config::{CsvSource, DatasetSource};
use crate::nngp::{one_hot_targets, unit_normalize, FeatureMask};
use crate::synthetic::{quadratic_dataset, QuadraticConfig};

/// A dataset plus its class labels when it came from a labelled file.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub dataset: Dataset,
    pub labels: Option<Vec<usize>>,
}

pub fn load_dataset(source: &DatasetSource) -> Result<LoadedData> {
    match source {
        DatasetSource::Csv(c) => load_csv(c),
        DatasetSource::Quadratic(q) => Ok(LoadedData {
            dataset: quadratic_dataset(&QuadraticConfig {
                samples: q.samples,
                coefficients: q.coefficients,
                noise_std: q.noise_std,
                seed: q.seed,
            })?,
            labels: None,
        }),
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

fn load_csv(src: &CsvSource) -> Result<LoadedData> {
    let path = &src.path;
    let mut reader = open(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let label_idx = match &src.label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Parse(format!("{}: no column named {name:?}", path.display()))
        })?),
        None => None,
    };
    let expected = src.features + src.targets.unwrap_or(0) + usize::from(label_idx.is_some());
    if header.len() != expected {
        return Err(Error::Parse(format!(
            "{}: header has {} columns, expected {expected}",
            path.display(),
            header.len()
        )));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        if src.rows.is_some_and(|r| i >= r) {
            break;
        }
        // 1-based file line of this row, counting the header
        let line = i + 2;
        let record = record.map_err(|e| Error::Parse(format!("{} line {line}: {e}", path.display())))?;
        if record.len() != expected {
            return Err(Error::Parse(format!(
                "{} line {line}: {} fields, expected {expected}",
                path.display(),
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(expected);
        for (k, field) in record.iter().enumerate() {
            if Some(k) == label_idx {
                let l: usize = field.parse().map_err(|_| {
                    Error::Parse(format!("{} line {line}: label {field:?} is not a class index", path.display()))
                })?;
                labels.push(l);
                continue;
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "{} line {line}, column {:?}: {field:?} is not a number",
                    path.display(),
                    header.get(k).unwrap_or("?")
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("{} line {line}: non-finite value", path.display())));
            }
            values.push(v);
        }
        let mut x = values[..src.features].to_vec();
        if src.normalize {
            x = unit_normalize(&x).map_err(|e| Error::Parse(format!("{} line {line}: {e}", path.display())))?;
        }
        inputs.push(x);
        targets.push(values[src.features..].to_vec());
    }
    if inputs.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    if let Some(r) = src.rows {
        if inputs.len() < r {
            return Err(Error::Parse(format!(
                "{}: asked for {r} rows, file has {}",
                path.display(),
                inputs.len()
            )));
        }
    }
    match label_idx {
        None => Ok(LoadedData {
            dataset: Dataset::new(inputs, targets)?,
            labels: None,
        }),
        Some(_) => {
            let classes = match src.classes {
                Some(c) => c,
                None => labels.iter().max().map_or(1, |m| m + 1),
            };
            let y = one_hot_targets(&labels, classes, src.coding)?;
            Ok(LoadedData {
                dataset: Dataset::new(inputs, y)?,
                labels: Some(labels),
            })
        }
    }
}

/// Write `data` with header `x0..x{m−1}, y0..y{n−1}`.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = (0..data.input_dim())
        .map(|j| format!("x{j}"))
        .chain((0..data.output_dim()).map(|k| format!("y{k}")))
        .collect();
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (x, y) in data.inputs().iter().zip(data.targets()) {
        let row: Vec<String> = x.iter().chain(y).map(|v| format!("{v:?}")).collect();
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(Error::io(path))
}

/// Read a JSON array of masks.
pub fn load_masks(path: &Path) -> Result<Vec<FeatureMask>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let masks: Vec<FeatureMask> =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok(masks)
}

/// The mask called `name` in `path`, validated against input dimension `dim`.
pub fn load_mask(path: &Path, name: &str, dim: usize) -> Result<FeatureMask> {
    let mask = load_masks(path)?
        .into_iter()
        .find(|m| m.name == name)
        .ok_or_else(|| Error::input(format!("{}: no mask named {name:?}", path.display())))?;
    mask.validate(dim)?;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nngp::OneHotCoding;
    use std::io::Write;

    fn source(path: &Path) -> CsvSource {
        CsvSource {
            path: path.to_path_buf(),
            features: 2,
            targets: Some(1),
            label_column: None,
            classes: None,
            coding: OneHotCoding::ZeroOne,
            normalize: false,
            rows: None,
        }
    }

    #[test]
    fn regression_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = Dataset::scalar(vec![vec![0.1, -2.0], vec![1.0 / 3.0, 5.0]], vec![0.7, -1e-9]).unwrap();
        write_dataset_csv(&path, &data).unwrap();
        let back = load_csv(&source(&path)).unwrap();
        assert_eq!(back.dataset, data);
        assert!(back.labels.is_none());
    }

    #[test]
    fn schema_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "a,b,y\n1,2,3\n4,oops,6").unwrap();
        let err = load_csv(&source(&path)).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let mut s = source(&path);
        s.targets = Some(2);
        assert!(load_csv(&s).unwrap_err().to_string().contains("header has 3 columns"));
    }

    #[test]
    fn labelled_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        std::fs::write(&path, "p0,p1,label\n3,4,1\n0,2,0\n1,1,2\n").unwrap();
        let src = CsvSource {
            targets: None,
            label_column: Some("label".into()),
            classes: Some(3),
            normalize: true,
            rows: Some(2),
            ..source(&path)
        };
        let d = load_csv(&src).unwrap();
        assert_eq!(d.labels, Some(vec![1, 0]));
        assert_eq!(d.dataset.inputs()[0], vec![0.6, 0.8]);
        assert_eq!(d.dataset.targets()[0], vec![0.0, 1.0, 0.0]);
        assert!(load_csv(&CsvSource { rows: Some(9), ..src }).is_err());
    }

    #[test]
    fn masks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, r#"[{"name": "top", "pixels": [0, 3], "gamma": 0.15}]"#).unwrap();
        let m = load_mask(&path, "top", 4).unwrap();
        assert_eq!(m.pixels, vec![0, 3]);
        assert!(load_mask(&path, "top", 3).is_err());
        assert!(load_mask(&path, "other", 4).is_err());
    }
}
