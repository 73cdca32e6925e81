//! Orchestration of the full workflow: generate, fit, train, sweep, report.
//!
//! Every stage persists its artifact under the experiment's output directory
//! and later stages reload rather than recompute. Sweep cells `(method, N)`
//! are independent and resumable; the assembled tables are written in a fixed
//! order so that reruns with the same seed are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use pme_lab_core::dae::{train_dae, DaeModel};
use pme_lab_core::dataset::{self, build_dataset, Dataset};
use pme_lab_core::error::{Error, Result};
use pme_lab_core::metrics::{
    self, error_pdf, per_point_error, per_sample_nse, representative_sample, threshold_dimension,
    SweepCurve,
};
use pme_lab_core::nlpme::{train_nlpme, NlpmeModel, ReconstructionPath};
use pme_lab_core::pme::{fit_pme, PmeModel, PmeWeights};
use pme_lab_core::shapegen::Generator;
use pme_lab_core::surrogate::{train_surrogate, SurrogateModel};

use crate::config::ExperimentConfig;
use crate::svg::{HistogramChart, LineChart, Series};

pub const THRESHOLDS: [f64; 2] = [0.05, 0.01];
const METHODS: [&str; 3] = ["pme", "nlpme", "dae"];

/// Builds the dataset and saves it. Idempotent given the config.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let generator = Generator::new(cfg.generator.clone())?;
    let ds = build_dataset(&generator, cfg.sample_count, cfg.sobol_skip)?;
    let dir = cfg.dataset_dir();
    dataset::save(&ds, &dir)?;
    println!(
        "dataset: S={} (requested {}, dropped {}) M={} n_g={} -> {}",
        ds.s(),
        cfg.sample_count,
        ds.manifest.dropped,
        ds.m(),
        ds.n_g(),
        dir.display()
    );
    Ok(dir)
}

fn require_dataset(cfg: &ExperimentConfig) -> Result<(Generator, Dataset)> {
    let dir = cfg.dataset_dir();
    if !dir.join("manifest.txt").exists() {
        return Err(Error::Contract(format!(
            "dataset not found at {}; run `pme-lab generate` first",
            dir.display()
        )));
    }
    let generator = Generator::new(cfg.generator.clone())?;
    let ds = dataset::load(&dir, Some(&cfg.generator))?;
    Ok((generator, ds))
}

fn require_surrogate(cfg: &ExperimentConfig) -> Result<SurrogateModel> {
    let dir = cfg.models_dir().join("surrogate");
    if !dir.join("manifest.txt").exists() {
        return Err(Error::Contract(format!(
            "surrogate bundle not found at {}; run `pme-lab train-surrogate` first",
            dir.display()
        )));
    }
    let model = SurrogateModel::load(&dir)?;
    if !model.frozen {
        return Err(Error::Contract(format!(
            "surrogate bundle at {} is not frozen",
            dir.display()
        )));
    }
    Ok(model)
}

pub fn cmd_fit_pme(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let (_, ds) = require_dataset(cfg)?;
    let model = fit_pme(&ds, PmeWeights::identity(ds.n_g()))?;
    let dir = cfg.models_dir().join("pme");
    model.save(&dir)?;
    let n_report = model.rank().min(*cfg.sweep_n.last().unwrap());
    let eps = pme_epsilon(&model, &ds, n_report)?;
    println!(
        "pme: rank={} eps(N={})={eps:.6} -> {}",
        model.rank(),
        n_report,
        dir.display()
    );
    Ok(dir)
}

pub fn cmd_train_surrogate(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let (_, ds) = require_dataset(cfg)?;
    let mut train = cfg.surrogate.train.clone();
    train.seed = cfg.cell_seed("surrogate", 0);
    let model = train_surrogate(&ds, &cfg.surrogate.hidden, &train)?;
    let pred = model.predict_raw(&ds.u)?;
    let eps = metrics::nmse(&ds.d, &pred)?;
    let dir = cfg.models_dir().join("surrogate");
    model.save(&dir)?;
    println!(
        "surrogate: val_loss={:.6e} training NMSE={eps:.6} epochs={} frozen=true -> {}",
        model.val_loss,
        model.history.records.len(),
        dir.display()
    );
    Ok(dir)
}

pub fn cmd_train_nlpme(cfg: &ExperimentConfig, n: usize) -> Result<PathBuf> {
    let (_, ds) = require_dataset(cfg)?;
    let surrogate = require_surrogate(cfg)?;
    let mut train = cfg.nlpme_train.clone();
    train.seed = cfg.cell_seed("nlpme", n);
    let model = train_nlpme(
        &ds,
        &surrogate,
        n,
        &cfg.encoder_hidden,
        &cfg.nlpme_decoder_hidden,
        &train,
    )?;
    let eps = nlpme_epsilon(&model, &ds)?;
    let dir = cfg.models_dir().join(format!("nlpme_n{n:02}"));
    model.save(&dir)?;
    let last = model.history.records.last().map(|r| r.train_loss).unwrap_or(f64::NAN);
    println!(
        "nlpme N={n}: final loss={last:.6e} training NMSE={eps:.6} epochs={} -> {}",
        model.history.records.len(),
        dir.display()
    );
    Ok(dir)
}

pub fn cmd_train_dae(cfg: &ExperimentConfig, n: usize) -> Result<PathBuf> {
    let (_, ds) = require_dataset(cfg)?;
    let mut train = cfg.dae_train.clone();
    train.seed = cfg.cell_seed("dae", n);
    let model = train_dae(&ds, n, &cfg.encoder_hidden, &cfg.dae_decoder_hidden, &train)?;
    let eps = dae_epsilon(&model, &ds)?;
    let dir = cfg.models_dir().join(format!("dae_n{n:02}"));
    model.save(&dir)?;
    let last = model.history.records.last().map(|r| r.train_loss).unwrap_or(f64::NAN);
    println!(
        "dae N={n}: final loss={last:.6e} training NMSE={eps:.6} epochs={} -> {}",
        model.history.records.len(),
        dir.display()
    );
    Ok(dir)
}

fn pme_epsilon(model: &PmeModel, ds: &Dataset, n: usize) -> Result<f64> {
    let n = n.min(model.rank());
    let alpha = model.encode_batch(&ds.d, n)?;
    metrics::nmse(&ds.d, &model.reconstruct_batch(&alpha)?)
}

fn nlpme_epsilon(model: &NlpmeModel, ds: &Dataset) -> Result<f64> {
    let d_hat = model.reconstruct(&ds.d, ReconstructionPath::Surrogate)?;
    metrics::nmse(&ds.d, &d_hat)
}

fn dae_epsilon(model: &DaeModel, ds: &Dataset) -> Result<f64> {
    metrics::nmse(&ds.d, &model.reconstruct(&ds.d)?)
}

fn cell_path(cfg: &ExperimentConfig, method: &str, n: usize) -> PathBuf {
    cfg.sweep_dir().join("cells").join(format!("{method}_n{n:02}.csv"))
}

fn read_cell(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    let line = text.lines().nth(1)?;
    line.split(',').nth(2)?.parse().ok()
}

fn write_cell(cfg: &ExperimentConfig, method: &str, n: usize, eps: f64) -> Result<()> {
    let path = cell_path(cfg, method, n);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(&path, format!("method,n,epsilon\n{method},{n},{eps}\n"))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Runs every `(method, N)` cell, assembles `sweep.csv`, `thresholds.csv`,
/// `reduction.csv`, and the error-decay figures. With `resume`, cells whose
/// files already exist are reused; failures are recorded per cell and the
/// sweep continues.
pub fn cmd_sweep(cfg: &ExperimentConfig, resume: bool) -> Result<PathBuf> {
    let (_, ds) = require_dataset(cfg)?;
    let surrogate = require_surrogate(cfg)?;
    let sweep_dir = cfg.sweep_dir();
    fs::create_dir_all(sweep_dir.join("cells"))
        .map_err(|e| Error::io(sweep_dir.display().to_string(), e))?;

    // one PME fit serves every N
    let pme_dir = cfg.models_dir().join("pme");
    let pme = if pme_dir.join("manifest.txt").exists() {
        PmeModel::load(&pme_dir)?
    } else {
        let model = fit_pme(&ds, PmeWeights::identity(ds.n_g()))?;
        model.save(&pme_dir)?;
        model
    };

    let mut failures = Vec::new();
    for method in METHODS {
        for &n in &cfg.sweep_n {
            let path = cell_path(cfg, method, n);
            if resume && path.exists() && read_cell(&path).is_some() {
                continue;
            }
            let outcome = run_cell(cfg, &ds, &surrogate, &pme, method, n);
            match outcome {
                Ok(eps) => {
                    write_cell(cfg, method, n, eps)?;
                    println!("cell {method} N={n}: eps={eps:.6}");
                }
                Err(err) => {
                    let fail_path = path.with_extension("failed");
                    let _ = fs::write(&fail_path, format!("{err}\n"));
                    eprintln!("cell {method} N={n} failed: {err}");
                    failures.push((method.to_string(), n));
                }
            }
        }
    }

    assemble_sweep_outputs(cfg)?;
    if !failures.is_empty() {
        eprintln!("sweep finished with {} failed cells", failures.len());
    }
    Ok(sweep_dir)
}

fn run_cell(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    surrogate: &SurrogateModel,
    pme: &PmeModel,
    method: &str,
    n: usize,
) -> Result<f64> {
    match method {
        "pme" => pme_epsilon(pme, ds, n),
        "nlpme" => {
            let mut train = cfg.nlpme_train.clone();
            train.seed = cfg.cell_seed("nlpme", n);
            let model = train_nlpme(
                ds,
                surrogate,
                n,
                &cfg.encoder_hidden,
                &cfg.nlpme_decoder_hidden,
                &train,
            )?;
            let eps = nlpme_epsilon(&model, ds)?;
            model.save(&cfg.models_dir().join(format!("nlpme_n{n:02}")))?;
            Ok(eps)
        }
        "dae" => {
            let mut train = cfg.dae_train.clone();
            train.seed = cfg.cell_seed("dae", n);
            let model = train_dae(ds, n, &cfg.encoder_hidden, &cfg.dae_decoder_hidden, &train)?;
            let eps = dae_epsilon(&model, ds)?;
            model.save(&cfg.models_dir().join(format!("dae_n{n:02}")))?;
            Ok(eps)
        }
        other => Err(Error::Config(format!("unknown method '{other}'"))),
    }
}

/// Loads the per-method curves recorded by the sweep cells.
pub fn load_curves(cfg: &ExperimentConfig) -> Result<Vec<SweepCurve>> {
    let hash = cfg.hash();
    let mut curves = Vec::new();
    for method in METHODS {
        let mut points = Vec::new();
        for &n in &cfg.sweep_n {
            if let Some(eps) = read_cell(&cell_path(cfg, method, n)) {
                points.push((n, eps));
            }
        }
        if !points.is_empty() {
            curves.push(SweepCurve::new(method, points, &hash)?);
        }
    }
    Ok(curves)
}

fn assemble_sweep_outputs(cfg: &ExperimentConfig) -> Result<()> {
    let hash = cfg.hash();
    let sweep_dir = cfg.sweep_dir();
    let curves = load_curves(cfg)?;

    let mut sweep_csv = format!("# config_hash={hash}\nmethod,n,epsilon\n");
    for curve in &curves {
        for &(n, eps) in &curve.points {
            sweep_csv.push_str(&format!("{},{n},{eps}\n", curve.method));
        }
    }
    let path = sweep_dir.join("sweep.csv");
    fs::write(&path, sweep_csv).map_err(|e| Error::io(path.display().to_string(), e))?;

    let mut thr_csv = format!("# config_hash={hash}\nmethod,tau,n_min\n");
    for curve in &curves {
        for tau in THRESHOLDS {
            let n_min = threshold_dimension(curve, tau)?;
            let cell = n_min.map(|n| n.to_string()).unwrap_or_else(|| "none".into());
            thr_csv.push_str(&format!("{},{tau},{cell}\n", curve.method));
        }
    }
    let path = sweep_dir.join("thresholds.csv");
    fs::write(&path, thr_csv).map_err(|e| Error::io(path.display().to_string(), e))?;

    let mut red_csv = format!("# config_hash={hash}\nmethod,n,reduction_pct\n");
    if let Some(pme_curve) = curves.iter().find(|c| c.method == "pme") {
        for curve in curves.iter().filter(|c| c.method != "pme") {
            if curve.points.len() == pme_curve.points.len() {
                let red = metrics::relative_reduction(curve, pme_curve)?;
                for &(n, pct) in &red.points {
                    red_csv.push_str(&format!("{},{n},{pct}\n", curve.method));
                }
                for &n in &red.skipped {
                    red_csv.push_str(&format!("{},{n},skipped\n", curve.method));
                }
            }
        }
    }
    let path = sweep_dir.join("reduction.csv");
    fs::write(&path, red_csv).map_err(|e| Error::io(path.display().to_string(), e))?;

    write_decay_figures(cfg, &curves, &sweep_dir)?;
    Ok(())
}

fn write_decay_figures(
    cfg: &ExperimentConfig,
    curves: &[SweepCurve],
    dir: &Path,
) -> Result<()> {
    let hash = cfg.hash();
    let m = cfg.generator.m();
    let eps_chart = LineChart {
        title: "Geometric reconstruction error".into(),
        x_label: "latent dimension N".into(),
        y_label: "epsilon(N)".into(),
        log_y: true,
        series: curves
            .iter()
            .map(|c| Series {
                label: c.method.clone(),
                points: c.points.iter().map(|&(n, e)| (n as f64, e)).collect(),
            })
            .collect(),
        h_rules: vec![
            (0.05, "5% target".into(), "7,4"),
            (0.01, "1% stringent".into(), "2,4"),
        ],
        comment: format!("config_hash={hash} data=eps_vs_n"),
    };
    let path = dir.join("eps_vs_n.svg");
    fs::write(&path, eps_chart.render()).map_err(|e| Error::io(path.display().to_string(), e))?;

    let pme_curve = curves.iter().find(|c| c.method == "pme");
    let mut red_series = Vec::new();
    if let Some(pme_curve) = pme_curve {
        for curve in curves.iter().filter(|c| c.method != "pme") {
            if curve.points.len() != pme_curve.points.len() {
                continue;
            }
            let red = metrics::relative_reduction(curve, pme_curve)?;
            red_series.push(Series {
                label: curve.method.clone(),
                points: red
                    .points
                    .iter()
                    .map(|&(n, pct)| (100.0 * (1.0 - n as f64 / m as f64), pct))
                    .collect(),
            });
        }
    }
    let red_chart = LineChart {
        title: "Error reduction relative to the linear embedding".into(),
        x_label: "dimensionality reduction 100(1 - N/M) [%]".into(),
        y_label: "error reduction vs pme [%]".into(),
        log_y: false,
        series: red_series,
        h_rules: vec![(0.0, "parity".into(), "3,3")],
        comment: format!("config_hash={hash} data=reduction_vs_compression"),
    };
    let path = dir.join("reduction.svg");
    fs::write(&path, red_chart.render()).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Figure/table bundle at the selected latent dimension: error-decay plots,
/// the per-sample error density, and the representative-sample per-point
/// error field.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let sweep_csv = cfg.sweep_dir().join("sweep.csv");
    if !sweep_csv.exists() {
        return Err(Error::Contract(format!(
            "sweep results not found at {}; run `pme-lab sweep` first",
            sweep_csv.display()
        )));
    }
    let curves = load_curves(cfg)?;
    let nlpme_curve = curves
        .iter()
        .find(|c| c.method == "nlpme")
        .ok_or_else(|| Error::Contract("sweep has no nlpme cells".into()))?;

    // selected N: smallest meeting the 5% target, else the best available
    let n_star = threshold_dimension(nlpme_curve, 0.05)?.unwrap_or_else(|| {
        nlpme_curve
            .points
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|&(n, _)| n)
            .unwrap()
    });

    let (generator, ds) = require_dataset(cfg)?;
    let pme = PmeModel::load(&cfg.models_dir().join("pme"))?;
    let nlpme = NlpmeModel::load(&cfg.models_dir().join(format!("nlpme_n{n_star:02}")))?;

    let report_dir = cfg.report_dir();
    fs::create_dir_all(&report_dir).map_err(|e| Error::io(report_dir.display().to_string(), e))?;
    write_decay_figures(cfg, &curves, &report_dir)?;

    // per-sample errors at the selected dimension, all three reconstruction routes
    let n_pme = n_star.min(pme.rank());
    let alpha = pme.encode_batch(&ds.d, n_pme)?;
    let pme_hat = pme.reconstruct_batch(&alpha)?;
    let eps_pme = per_sample_nse(&ds.d, &pme_hat)?;
    let via_s = nlpme.reconstruct(&ds.d, ReconstructionPath::Surrogate)?;
    let eps_s = per_sample_nse(&ds.d, &via_s)?;
    let via_g = nlpme.reconstruct(&ds.d, ReconstructionPath::Generator(&generator))?;
    let eps_g = per_sample_nse(&ds.d, &via_g)?;

    let hash = cfg.hash();
    let max_err = eps_pme
        .iter()
        .chain(eps_s.iter())
        .chain(eps_g.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    let n_bins = 50;
    let range = (0.0, max_err.max(1e-12));
    let mut hist_series = Vec::new();
    for (label, values) in [
        ("pme".to_string(), &eps_pme),
        ("nlpme (surrogate)".to_string(), &eps_s),
        ("nlpme (generator)".to_string(), &eps_g),
    ] {
        let pdf = error_pdf(values.as_slice().unwrap(), n_bins, range)?;
        hist_series.push((label, pdf.lo, pdf.hi, pdf.density));
    }
    let hist = HistogramChart {
        title: format!("Per-sample error density at N={n_star}"),
        x_label: "per-sample normalized squared error".into(),
        y_label: "density".into(),
        series: hist_series,
        comment: format!("config_hash={hash} data=error_pdf n={n_star}"),
    };
    let path = report_dir.join("error_pdf.svg");
    fs::write(&path, hist.render()).map_err(|e| Error::io(path.display().to_string(), e))?;

    // representative sample: closest to the median of the combined score
    let rep = representative_sample(eps_pme.as_slice().unwrap(), eps_s.as_slice().unwrap())?;
    let d_rep = ds.d.row(rep).to_owned();
    let per_point_pme = per_point_error(&d_rep, &pme_hat.row(rep).to_owned())?;
    let per_point_s = per_point_error(&d_rep, &via_s.row(rep).to_owned())?;
    let per_point_g = per_point_error(&d_rep, &via_g.row(rep).to_owned())?;
    let mut csv = format!(
        "# config_hash={hash} representative_sample={rep} n={n_star}\npoint,pme,nlpme_surrogate,nlpme_generator\n"
    );
    for i in 0..per_point_pme.len() {
        csv.push_str(&format!(
            "{i},{},{},{}\n",
            per_point_pme[i], per_point_s[i], per_point_g[i]
        ));
    }
    let path = report_dir.join("representative_point_error.csv");
    fs::write(&path, csv).map_err(|e| Error::io(path.display().to_string(), e))?;

    // summary table
    let mut summary = format!("# config_hash={hash}\nselected_n={n_star}\nrepresentative_sample={rep}\n");
    for curve in &curves {
        for tau in THRESHOLDS {
            let n_min = threshold_dimension(curve, tau)?;
            summary.push_str(&format!(
                "threshold {} {tau} = {}\n",
                curve.method,
                n_min.map(|n| n.to_string()).unwrap_or_else(|| "none".into())
            ));
        }
    }
    let path = report_dir.join("summary.txt");
    fs::write(&path, summary).map_err(|e| Error::io(path.display().to_string(), e))?;
    println!(
        "report: selected N={n_star}, representative sample {rep} -> {}",
        report_dir.display()
    );
    Ok(report_dir)
}

/// Convenience wrapper used by tests: dataset distances between two sweeps.
pub fn sweep_files_equal(a: &Path, b: &Path) -> Result<bool> {
    let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p.display().to_string(), e));
    Ok(read(a)? == read(b)?)
}

/// Surrogate-vs-generator fidelity on fresh Sobol points, reported like the
/// shared metric.
pub fn fidelity_on_fresh_points(
    cfg: &ExperimentConfig,
    surrogate: &SurrogateModel,
    count: usize,
) -> Result<f64> {
    let generator = Generator::new(cfg.generator.clone())?;
    let skip = cfg.sobol_skip + cfg.sample_count as u64;
    let u = pme_lab_core::sobol::sobol_points(cfg.generator.m(), count, skip)?;
    let report = pme_lab_core::surrogate::surrogate_fidelity_report(surrogate, &generator, &u)?;
    Ok(report.mean)
}

/// Used by the acceptance suite: epsilon of the stored nlpme model at `n`
/// through the exact generator.
pub fn nlpme_generator_epsilon(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    let (generator, ds) = require_dataset(cfg)?;
    let model = NlpmeModel::load(&cfg.models_dir().join(format!("nlpme_n{n:02}")))?;
    let d_hat = model.reconstruct(&ds.d, ReconstructionPath::Generator(&generator))?;
    metrics::nmse(&ds.d, &d_hat)
}

/// Used by the acceptance suite: epsilon of the stored nlpme model at `n`
/// through the surrogate.
pub fn nlpme_surrogate_epsilon(cfg: &ExperimentConfig, n: usize) -> Result<f64> {
    let (_, ds) = require_dataset(cfg)?;
    let model = NlpmeModel::load(&cfg.models_dir().join(format!("nlpme_n{n:02}")))?;
    let d_hat = model.reconstruct(&ds.d, ReconstructionPath::Surrogate)?;
    metrics::nmse(&ds.d, &d_hat)
}
