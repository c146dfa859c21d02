use std::path::{Path, PathBuf};

use serde::Serialize;

use clusterfit_core::config::ModelConfig;
use clusterfit_core::experiments::{
    block_bootstrap_ci, run_comparison, PointSource, PointSourceSet,
};
use clusterfit_core::io::svg::{bar_chart, Band, LogPlot, Series};
use clusterfit_core::io::tables::{self, TableKind};
use clusterfit_core::io::{read_image, read_to_string, with_path, write_image, ImageFile, RunConfig, ValueKind};
use clusterfit_core::model::{DoubledProfile, ForwardModel, PixelImage};
use clusterfit_core::onion::onion_baseline;
use clusterfit_core::qut::{fit_at, qut_for_image, QutResult, ZeroThresholdFn};
use clusterfit_core::solver::{FitResult, KktResiduals};
use clusterfit_core::{Error, Result};

use crate::{Command, Global, Penalties};

pub fn run(g: &Global, cmd: Command) -> Result<()> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    if let Some(t) = g.threads {
        if t == 0 {
            return Err(Error::InvalidParameter("threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&g.out).map_err(|e| with_path(&g.out, e))?;
    let out = g.out.as_path();
    match cmd {
        Command::Simulate { replicate, csv } => simulate(&cfg, out, replicate, csv),
        Command::Qut { image } => qut(&cfg, out, &image),
        Command::Fit { image, penalties } => fit(&cfg, out, &image, &penalties),
        Command::Baseline { image, mask, sources, mask_radius } => {
            baseline(&cfg, out, &image, mask.as_deref(), sources.as_deref(), mask_radius)
        }
        Command::Compare => compare(&cfg, out),
        Command::Bootstrap { image, penalties } => bootstrap(&cfg, out, &image, &penalties),
        Command::Plot { inputs, name } => plot(out, &inputs, &name),
    }
}

fn write(out: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = out.join(name);
    tables::write_text(&path, text)?;
    Ok(path)
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write(out, name, &(text + "\n"))
}

/// Model for an observed image: the image's own center unless the config
/// fixes one, background scaled by the scenario exposure.
fn model_for(cfg: &RunConfig, img: &PixelImage) -> Result<ForwardModel> {
    let mut mc: ModelConfig = cfg.model.clone();
    if mc.center.is_none() {
        let c = img.center();
        mc.center = Some([c.x, c.y]);
    }
    mc.build(img.n(), &cfg.dictionary, cfg.scenario.exposure)
}

fn load_counts(path: &Path) -> Result<PixelImage> {
    let f = read_image(path)?;
    if f.kind != ValueKind::Counts {
        return Err(Error::Format(format!("{}: expected a count image", path.display())));
    }
    Ok(f.image)
}

fn simulate(cfg: &RunConfig, out: &Path, replicate: u64, csv: bool) -> Result<()> {
    let sc = &cfg.scenario;
    let model = cfg.model.build(sc.n, &cfg.dictionary, 1.0)?;
    let truth = sc.truth(model.grid())?;
    let (sources, y) = sc.simulate(&model, &truth, replicate)?;
    let name = if csv { "image.csv" } else { "image.bin" };
    write_image(&out.join(name), &ImageFile::new(ValueKind::Counts, y.clone())?)?;
    write(out, "truth_profile.csv", &tables::profile_csv(&truth, 1.0)?)?;
    write(out, "truth_sources.csv", &tables::sources_csv(&sources.sources)?)?;
    let total: f64 = y.values().iter().sum();
    println!("simulated n={} profile={} counts={total} sources={} -> {}", sc.n, sc.profile.as_str(), sources.len(), out.join(name).display());
    Ok(())
}

#[derive(Serialize)]
struct SampleSummary {
    min: f64,
    median: f64,
    max: f64,
}

fn summarize(mut v: Vec<f64>) -> SampleSummary {
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return SampleSummary { min: f64::NAN, median: f64::NAN, max: f64::NAN };
    }
    SampleSummary { min: v[0], median: v[v.len() / 2], max: v[v.len() - 1] }
}

#[derive(Serialize)]
struct QutReport<'a> {
    m0: usize,
    lambda1_sample: SampleSummary,
    lambda2_sample: SampleSummary,
    #[serde(flatten)]
    result: &'a QutResult,
}

fn qut_report(cfg: &RunConfig, q: &QutResult) -> serde_json::Value {
    let r = QutReport {
        m0: cfg.qut.m0,
        lambda1_sample: summarize(q.samples.iter().map(|s| s.0).collect()),
        lambda2_sample: summarize(q.samples.iter().map(|s| s.1).collect()),
        result: q,
    };
    serde_json::to_value(r).expect("report is serializable")
}

fn qut(cfg: &RunConfig, out: &Path, image: &Path) -> Result<()> {
    let y = load_counts(image)?;
    let model = model_for(cfg, &y)?;
    let q = qut_for_image(y.values(), &model, &cfg.qut)?;
    write_json(out, "qut.json", &qut_report(cfg, &q))?;
    println!("lambda1={} lambda2={} alpha1={} alpha2={} dropped={}", q.lambda1, q.lambda2, q.alpha1, q.alpha2, q.dropped);
    Ok(())
}

#[derive(Serialize)]
struct FitReport {
    thresholds: &'static str,
    lambda1: f64,
    lambda2: f64,
    qut: Option<serde_json::Value>,
    zero_scene: bool,
    converged: bool,
    iterations: usize,
    restarts: usize,
    newton_steps: usize,
    alpha0: f64,
    exposure: f64,
    sources_detected: usize,
    kkt: KktResiduals,
    kkt_tolerance: KktResiduals,
    objective_trace: Vec<f64>,
}

/// Fit at the given penalties or at QUT ones.
fn penalized_fit(
    cfg: &RunConfig,
    y: &PixelImage,
    model: &ForwardModel,
    p: &Penalties,
) -> Result<(FitResult, Option<QutResult>)> {
    let ztf = ZeroThresholdFn::new(model)?;
    match (p.lambda1, p.lambda2) {
        (Some(l1), Some(l2)) => {
            if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
                return Err(Error::InvalidParameter(format!("penalties ({l1}, {l2}) must be finite and > 0")));
            }
            let a0 = match ztf.alpha0(y.values()) {
                Ok(a) => a,
                Err(Error::NotInDomain) => 0.0,
                Err(e) => return Err(e),
            };
            Ok((fit_at(y.values(), model, l1, l2, a0, &cfg.solver)?, None))
        }
        _ => {
            let a0 = ztf.alpha0(y.values())?;
            let q = clusterfit_core::qut::qut_thresholds(model, a0, &cfg.qut)?;
            let f = fit_at(y.values(), model, q.lambda1, q.lambda2, a0, &cfg.solver)?;
            Ok((f, Some(q)))
        }
    }
}

fn fit(cfg: &RunConfig, out: &Path, image: &Path, p: &Penalties) -> Result<()> {
    let y = load_counts(image)?;
    let model = model_for(cfg, &y)?;
    let (f, q) = penalized_fit(cfg, &y, &model, p)?;
    let exposure = cfg.scenario.exposure;
    let profile = model.profile_of(&f.coefficients)?;
    write(out, "profile.csv", &tables::profile_csv(&profile, exposure)?)?;
    let n = y.n();
    let detected: Vec<PointSource> = f
        .coefficients
        .sources()
        .into_iter()
        .map(|(i, v)| PointSource { x: i % n, y: i / n, amplitude: v / exposure })
        .collect();
    write(out, "sources.csv", &tables::sources_csv(&detected)?)?;
    let report = FitReport {
        thresholds: if q.is_some() { "qut" } else { "user" },
        lambda1: f.lambda1,
        lambda2: f.lambda2,
        qut: q.as_ref().map(|q| qut_report(cfg, q)),
        zero_scene: f.is_zero_scene(),
        converged: f.converged,
        iterations: f.iterations,
        restarts: f.restarts,
        newton_steps: f.newton_steps,
        alpha0: f.coefficients.alpha0(),
        exposure,
        sources_detected: detected.len(),
        kkt: f.kkt,
        kkt_tolerance: f.kkt_tolerance,
        objective_trace: f.objective_trace.clone(),
    };
    write_json(out, "fit_report.json", &report)?;
    if !f.converged {
        eprintln!("warning: fit stopped after {} iterations without meeting the KKT tolerances", f.iterations);
    }
    println!(
        "lambda1={} lambda2={} objective={} iterations={} converged={} zero_scene={} sources={}",
        f.lambda1,
        f.lambda2,
        f.objective(),
        f.iterations,
        f.converged,
        f.is_zero_scene(),
        detected.len()
    );
    Ok(())
}

fn baseline(
    cfg: &RunConfig,
    out: &Path,
    image: &Path,
    mask: Option<&Path>,
    sources: Option<&Path>,
    radius: Option<f64>,
) -> Result<()> {
    let y = load_counts(image)?;
    let model = model_for(cfg, &y)?;
    let n = y.n();
    let mut excluded = vec![false; n * n];
    if let Some(path) = mask {
        let m = read_image(path)?.image;
        if m.n() != n {
            return Err(Error::DimensionMismatch(format!("mask is {}x{0}, image {n}x{n}", m.n())));
        }
        for (e, v) in excluded.iter_mut().zip(m.values()) {
            *e |= *v != 0.0;
        }
    }
    if let Some(path) = sources {
        let list = tables::parse_sources_csv(&read_to_string(path)?)?;
        if let Some(s) = list.iter().find(|s| s.x >= n || s.y >= n) {
            return Err(Error::InvalidParameter(format!("source ({}, {}) outside the image", s.x, s.y)));
        }
        let set = PointSourceSet { n, sources: list };
        let r = radius.unwrap_or(cfg.scenario.mask_radius);
        for (e, m) in excluded.iter_mut().zip(set.mask(r)) {
            *e |= m;
        }
    }
    let mask = (mask.is_some() || sources.is_some()).then_some(excluded);
    let grid = *model.grid();
    let (_, est) =
        onion_baseline(&y, model.sensitivity(), model.background(), mask.as_deref(), &grid, cfg.scenario.onion_geometry)?;
    let half: Vec<f64> = est.emissivity.clone();
    let profile = DoubledProfile::symmetric(grid, &half)?;
    write(out, "baseline_profile.csv", &tables::profile_csv(&profile, cfg.scenario.exposure)?)?;
    let negative = est.emissivity.iter().filter(|v| **v < 0.0).count();
    println!("onion shells={} negative={negative}", grid.n_r());
    Ok(())
}

fn compare(cfg: &RunConfig, out: &Path) -> Result<()> {
    let table = run_comparison(&cfg.scenario, &cfg.model, &cfg.dictionary, &cfg.solver, &cfg.qut)?;
    write(out, "comparison.csv", &tables::comparison_csv(&table)?)?;
    write(out, "replicates.csv", &tables::replicates_csv(&table)?)?;
    for s in &table.summary {
        println!("{} mean={} se={} ok={} failed={}", s.method.as_str(), s.mean, s.std_error, s.succeeded, s.failed);
    }
    Ok(())
}

fn bootstrap(cfg: &RunConfig, out: &Path, image: &Path, p: &Penalties) -> Result<()> {
    let y = load_counts(image)?;
    let model = model_for(cfg, &y)?;
    let (f, _) = penalized_fit(cfg, &y, &model, p)?;
    let bands = block_bootstrap_ci(
        &y,
        &model,
        &f.coefficients,
        f.lambda1,
        f.lambda2,
        &cfg.solver,
        &cfg.bootstrap,
        cfg.scenario.exposure,
    )?;
    write(out, "bands.csv", &tables::bands_csv(&bands)?)?;
    let w = bands.width();
    let mean_width = w.iter().sum::<f64>() / w.len() as f64;
    println!("replicates={} failed={} mean_log_width={mean_width}", bands.replicates, bands.failed);
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn plot(out: &Path, inputs: &[PathBuf], name: &str) -> Result<()> {
    let mut profile = LogPlot {
        title: "Emissivity profile".into(),
        x_label: "radius (pixels)".into(),
        y_label: "emissivity".into(),
        ..LogPlot::default()
    };
    for path in inputs {
        let text = read_to_string(path)?;
        let label = stem(path);
        match tables::detect_table(&text) {
            Some(TableKind::Profile) => {
                let t = tables::parse_profile_csv(&text)?;
                let dashed = label.contains("truth");
                profile.series.push(Series { label, x: t.radius, y: t.mean, dashed });
            }
            Some(TableKind::Bands) => {
                let t = tables::parse_bands_csv(&text)?;
                let exp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
                profile.bands.push(Band { label: format!("{label} band"), x: t.radius.clone(), lo: exp(&t.lo), hi: exp(&t.hi) });
                profile.series.push(Series { label: format!("{label} estimate"), x: t.radius, y: exp(&t.estimate), dashed: false });
            }
            Some(TableKind::Comparison) => {
                let rows = tables::parse_comparison_csv(&text)?;
                let svg = bar_chart("Mean log-profile error (x100)", "MSE x 100", &rows);
                let p = write(out, &format!("{label}.svg"), &svg)?;
                println!("wrote {}", p.display());
            }
            _ => {
                return Err(Error::Format(format!("{}: not a profile, bands or comparison table", path.display())));
            }
        }
    }
    if !profile.series.is_empty() {
        let p = write(out, name, &profile.render())?;
        println!("wrote {}", p.display());
    }
    Ok(())
}
