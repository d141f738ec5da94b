use std::path::{Path, PathBuf};

use gpcert::certificate::{certificate_sweep, Mode, Target};
use gpcert::gp::{hyper_grid_search, TrainedGP};
use gpcert::io::config::{region_for, CertifySection, DatasetSource, MaskRef, RunConfig};
use gpcert::io::data::{load_dataset, load_mask, write_dataset_csv};
use gpcert::io::model::{read_model, write_model};
use gpcert::io::report::{baseline_file, build_report, sweep_file, FitSummary, FIT_SUMMARY, REPORT, VARIANCE_TABLE};
use gpcert::io::tables::{write_baseline, write_sweep, write_variance, BaselineRow, SweepRow, VarianceRow};
use gpcert::nngp::{accuracy, depth_width_sweep, FeatureMask, ReluPrior};
use gpcert::sampling::{draw_statistics, grid_points};
use gpcert::{Certificate, Error, Result};
use log::{info, warn};
use serde::Serialize;

fn load_config(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<RunConfig> {
    let path = config
        .as_ref()
        .ok_or_else(|| Error::Input("this command needs --config <path>".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(o) = out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|source| Error::Io {
        path: cfg.out_dir.clone(),
        source,
    })?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T> {
    s.as_ref()
        .ok_or_else(|| Error::Input(format!("the configuration has no {name:?} section")))
}

fn mask(m: &Option<MaskRef>, dim: usize) -> Result<Option<FeatureMask>> {
    m.as_ref().map(|m| load_mask(&m.file, &m.name, dim)).transpose()
}

fn check_points(c: &CertifySection, gp: &TrainedGP) -> Result<()> {
    for p in &c.points {
        if p.x.len() != gp.input_dim() {
            return Err(Error::Input(format!(
                "point {:?} has {} coordinates, the model takes {}",
                p.name,
                p.x.len(),
                gp.input_dim()
            )));
        }
    }
    if c.output >= gp.output_dim() {
        return Err(Error::Input(format!(
            "output {} out of range for a model with {} outputs",
            c.output,
            gp.output_dim()
        )));
    }
    Ok(())
}

pub fn fit(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config, out)?;
    let source = section(&cfg.dataset, "dataset")?;
    let template = section(&cfg.kernel, "kernel")?;
    let data = load_dataset(source)?.dataset;
    info!("loaded {} rows with {} inputs and {} outputs", data.len(), data.input_dim(), data.output_dim());
    let (spec, jitter) = if cfg.hyper_grid.is_empty() {
        (template.clone(), cfg.jitter)
    } else {
        let best = hyper_grid_search(template, &data, &cfg.hyper_grid, cfg.jitter)?;
        info!("grid search picked {:?} with jitter {}", best.spec, best.jitter);
        (best.spec, best.jitter)
    };
    let prior = cfg.prior_mean.clone().unwrap_or_else(|| vec![0.0; data.output_dim()]);
    let gp = TrainedGP::fit_with_prior_mean(spec, &data, jitter, prior)?;
    if gp.clamp_count() > 0 {
        warn!("{} negative posterior variances were clamped to zero", gp.clamp_count());
    }
    let header = write_model(&cfg.model_path(), &gp)?;
    let mut summary = FitSummary {
        kernel: header.kernel,
        jitter: header.jitter,
        n_train: header.n_train,
        fingerprint: header.fingerprint,
        log_marginal_likelihood: header.log_marginal_likelihood,
        accuracy: None,
        n_evaluated: None,
    };
    println!("log marginal likelihood: {}", summary.log_marginal_likelihood);
    if let Some(eval) = &cfg.evaluation {
        let loaded = load_dataset(eval)?;
        let labels = loaded
            .labels
            .ok_or_else(|| Error::Input("evaluation rows need a label_column".into()))?;
        let acc = accuracy(&gp, loaded.dataset.inputs(), &labels)?;
        println!("held-out accuracy: {acc} on {} rows", labels.len());
        summary.accuracy = Some(acc);
        summary.n_evaluated = Some(labels.len());
    }
    if matches!(source, DatasetSource::Quadratic(_)) {
        write_dataset_csv(&cfg.out_dir.join("dataset.csv"), &data)?;
    }
    write_json(&cfg.out_dir.join(FIT_SUMMARY), &summary)
}

#[derive(Serialize)]
struct CertificateRecord<'a> {
    point: &'a str,
    gamma: f64,
    delta: f64,
    mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn target(mode: Mode, output: usize) -> Target {
    match mode {
        Mode::Phi1 => Target::Component(output),
        Mode::Phi2 => Target::L1,
    }
}

pub fn certify(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config, out)?;
    let c = section(&cfg.certify, "certify")?;
    let (gp, _) = read_model(&cfg.model_path())?;
    check_points(c, &gp)?;
    let mask = mask(&c.mask, gp.input_dim())?;
    let mut records = Vec::new();
    let (mut cells, mut failed) = (0, 0);
    for p in &c.points {
        let mut rows = Vec::new();
        for &mode in &c.modes {
            info!("certifying {} ({})", p.name, mode.as_str());
            let sweep = certificate_sweep(
                &gp,
                &p.x,
                &c.gammas,
                |g| region_for(&p.x, g, mask.as_ref(), c.clip),
                &c.deltas,
                target(mode, c.output),
                cfg.quad_tol,
                &cfg.bnb,
            )?;
            for cell in sweep {
                cells += 1;
                let (row, certificate, error) = match cell.result {
                    Ok(cert) => (SweepRow::from_certificate(cell.gamma, &cert), Some(cert), None),
                    Err(e) => {
                        failed += 1;
                        warn!("{} gamma {} delta {}: {e}", p.name, cell.gamma, cell.delta);
                        (SweepRow::failed(cell.gamma, cell.delta, mode, e.clone()), None, Some(e))
                    }
                };
                rows.push(row);
                records.push(CertificateRecord {
                    point: &p.name,
                    gamma: cell.gamma,
                    delta: cell.delta,
                    mode,
                    certificate,
                    error,
                });
            }
        }
        write_sweep(&cfg.out_dir.join(sweep_file(&p.name)), &rows)?;
        let vacuous = rows.iter().filter(|r| r.error.is_none() && r.vacuous).count();
        println!("{}: {} certificates, {vacuous} vacuous", p.name, rows.len());
    }
    write_json(&cfg.out_dir.join("certificates.json"), &records)?;
    if failed == cells {
        return Err(Error::Numerical(format!("all {cells} certificates failed")));
    }
    Ok(())
}

pub fn baseline(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config, out)?;
    let c = section(&cfg.certify, "certify")?;
    let b = cfg.baseline.clone().unwrap_or_default();
    let gammas = b
        .gammas
        .clone()
        .unwrap_or_else(|| c.gammas.iter().copied().filter(|g| *g > 0.0).collect());
    if gammas.is_empty() {
        return Err(Error::Input("no positive gammas to sample".into()));
    }
    let deltas = b.deltas.clone().unwrap_or_else(|| c.deltas.clone());
    let (gp, _) = read_model(&cfg.model_path())?;
    check_points(c, &gp)?;
    let mask = mask(&c.mask, gp.input_dim())?;
    for p in &c.points {
        let mut stats = Vec::with_capacity(gammas.len());
        for &g in &gammas {
            let region = region_for(&p.x, g, mask.as_ref(), c.clip)?;
            let grid = grid_points(&region, b.per_dim)?;
            info!("sampling {} at gamma {g}: {} draws on {} points", p.name, b.n_samples, grid.len());
            stats.push(draw_statistics(&gp, &p.x, &grid, c.output, b.n_samples, b.seed)?);
        }
        let mut rows = Vec::new();
        for &mode in &c.modes {
            for (&g, s) in gammas.iter().zip(&stats) {
                for &d in &deltas {
                    let e = s.estimate(mode, d);
                    rows.push(BaselineRow {
                        gamma: g,
                        delta: d,
                        mode,
                        phi_hat: e.estimate,
                        std_error: e.std_error,
                        n_samples: e.n_samples,
                        n_grid: e.n_grid,
                        seed: e.seed,
                    });
                }
            }
        }
        write_baseline(&cfg.out_dir.join(baseline_file(&p.name)), &rows)?;
        println!("{}: {} estimates", p.name, rows.len());
    }
    Ok(())
}

pub fn variance(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let cfg = load_config(config, out)?;
    let v = section(&cfg.variance, "variance")?;
    let pool = load_dataset(&v.pool)?.dataset;
    let test = load_dataset(&v.test)?.dataset;
    if test.input_dim() != pool.input_dim() {
        return Err(Error::Input("pool and test rows have different widths".into()));
    }
    let x_stars = v
        .points
        .iter()
        .map(|&i| {
            test.inputs()
                .get(i)
                .cloned()
                .ok_or_else(|| Error::Input(format!("test row {i} out of range ({} rows)", test.len())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mask = load_mask(&v.mask.file, &v.mask.name, pool.input_dim())?;
    if let Some(g) = v.gamma {
        mask = mask.with_gamma(g);
        mask.validate(pool.input_dim())?;
    }
    let prior = ReluPrior {
        weight_variance: v.weight_variance,
        bias_variance: v.bias_variance,
    };
    let cells = depth_width_sweep(
        &pool,
        &v.layers,
        &v.sizes,
        prior,
        cfg.jitter,
        &mask,
        v.clip.map(|[lo, hi]| (lo, hi)),
        &x_stars,
        &cfg.bnb,
    )?;
    let rows: Vec<VarianceRow> = cells
        .iter()
        .map(|c| VarianceRow {
            layers: c.layers,
            n_train: c.n_train,
            point_id: v.points[c.point_id],
            sigma_bar_sq: match &c.sigma_bar_sq {
                Ok(s) => *s,
                Err(e) => {
                    warn!("L={} N={} point {}: {e}", c.layers, c.n_train, v.points[c.point_id]);
                    f64::NAN
                }
            },
        })
        .collect();
    write_variance(&cfg.out_dir.join(VARIANCE_TABLE), &rows)?;
    let failed = rows.iter().filter(|r| r.sigma_bar_sq.is_nan()).count();
    println!("{} cells, {failed} failed", rows.len());
    if failed == rows.len() {
        return Err(Error::Numerical(format!("all {failed} cells failed")));
    }
    Ok(())
}

pub fn report(config: &Option<PathBuf>, out: &Option<PathBuf>) -> Result<()> {
    let dir = match (config, out) {
        (_, Some(o)) => o.clone(),
        (Some(_), None) => load_config(config, out)?.out_dir,
        (None, None) => return Err(Error::Input("report needs --config <path> or --out <dir>".into())),
    };
    let report = build_report(&dir)?;
    let text = report.render();
    print!("{text}");
    if dir.is_dir() {
        std::fs::write(dir.join(REPORT), &text).map_err(|source| Error::Io {
            path: dir.join(REPORT),
            source,
        })?;
    }
    Ok(())
}
