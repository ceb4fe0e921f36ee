use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assl::AsslConfig;
use crate::data::{generate_synthetic, load_csv, save_csv, Dataset, MissingPolicy, SynthConfig};
use crate::eval::{aggregate_runs, AggregateReport, MetricsReport};
use crate::nn::{argmax, Matrix};
use crate::persist::{BundledModel, ModelBundle};
use crate::pipeline::{evaluate_assl, evaluate_plain, phase_one, phase_two, prepare_split, PreparedSplit};

use super::{CliError, RunConfig};

/// Variants compared by `ablate`, in table order.
pub const ABLATION_VARIANTS: [&str; 4] = ["prm", "supervised_mlp", "assl_no_adv", "assl"];

/// Artifacts and timings of one seed. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub seed: u64,
    pub artifacts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub config: RunConfig,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub seeds: Vec<SeedRecord>,
    pub artifacts: BTreeMap<String, String>,
    pub total_ms: f64,
}

/// One cell row of the ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub report: MetricsReport,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

struct ArtifactDir<'a> {
    root: &'a Path,
    rel: PathBuf,
    written: BTreeMap<String, String>,
}

impl<'a> ArtifactDir<'a> {
    fn create(root: &'a Path, rel: impl Into<PathBuf>) -> Result<Self, CliError> {
        let rel = rel.into();
        let dir = root.join(&rel);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(dir.display(), e))?;
        Ok(Self {
            root,
            rel,
            written: BTreeMap::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(&self.rel).join(name)
    }

    fn record(&mut self, key: &str, name: &str) {
        let rel = self.rel.join(name);
        self.written.insert(key.into(), rel.to_string_lossy().into_owned());
    }

    fn text(&mut self, key: &str, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::io(p.display(), e))?;
        self.record(key, name);
        Ok(())
    }

    fn bundle(&mut self, key: &str, name: &str, b: &ModelBundle) -> Result<(), CliError> {
        self.text(key, name, &b.to_json())
    }

    fn dataset(&mut self, key: &str, name: &str, ds: &Dataset) -> Result<(), CliError> {
        let p = self.path(name);
        save_csv(ds, &p).map_err(|e| CliError::io(p.display(), e))?;
        self.record(key, name);
        Ok(())
    }
}

/// `rating,p_<class>...` followed by one line per row. Probabilities use
/// shortest round-trip formatting.
pub fn format_predictions(probs: &Matrix, label_names: &[String]) -> String {
    let mut s = String::from("rating");
    for name in label_names {
        let _ = write!(s, ",p_{name}");
    }
    s.push('\n');
    for row in probs.iter_rows() {
        s.push_str(&label_names[argmax(row)]);
        for p in row {
            let _ = write!(s, ",{p}");
        }
        s.push('\n');
    }
    s
}

fn load_data(cfg: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    if let Some(s) = &cfg.data.synth {
        let d = generate_synthetic(s)?;
        return Ok((d.labeled, d.unlabeled));
    }
    let schema = Arc::new(cfg.data.schema()?);
    let path = cfg.data.labeled_csv.as_ref().expect("validated config has a data source");
    let labeled = load_csv(path, schema.clone(), cfg.data.missing)?;
    labeled.require_labels("labeled CSV")?;
    let unlabeled = match &cfg.data.unlabeled_csv {
        Some(p) => load_csv(p, schema.clone(), cfg.data.missing)?.without_labels(),
        None => Dataset::empty(schema, false),
    };
    Ok((labeled, unlabeled))
}

/// Creates the output directory, runs `body` and writes the manifest
/// whether or not `body` succeeded.
fn with_manifest(
    dir: &Path,
    command: &str,
    cfg: &RunConfig,
    body: impl FnOnce(&mut RunManifest) -> Result<(), CliError>,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    let start = Instant::now();
    let mut man = RunManifest {
        command: command.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        status: "ok".into(),
        error: None,
        seeds: Vec::new(),
        artifacts: BTreeMap::new(),
        total_ms: 0.0,
    };
    let res = body(&mut man);
    if let Err(e) = &res {
        man.status = "failed".into();
        man.error = Some(e.diagnostic());
    }
    man.total_ms = ms(start);
    let p = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&man).expect("manifest serializes");
    fs::write(&p, json).map_err(|e| CliError::io(p.display(), e))?;
    res
}

fn seeded(cfg: &AsslConfig, seed: u64) -> AsslConfig {
    AsslConfig { seed, ..cfg.clone() }
}

fn aggregate_text(named: &[(&str, &AggregateReport)]) -> String {
    let mut s = format!("{:<20}", "metric");
    for (name, _) in named {
        let _ = write!(s, "  {:>22}", format!("{name} mean±std"));
    }
    s.push('\n');
    let metrics: Vec<&String> = named[0].1.metrics.keys().collect();
    for m in metrics {
        let _ = write!(s, "{m:<20}");
        for (_, agg) in named {
            let v = agg.metrics[m];
            let _ = write!(s, "  {:>22}", format!("{:.5} ± {:.5}", v.mean, v.std));
        }
        s.push('\n');
    }
    s
}

fn run_seed(
    cfg: &RunConfig,
    labeled: &Dataset,
    unlabeled: &Dataset,
    index: usize,
    seed: u64,
    root: &Path,
) -> Result<(SeedRecord, MetricsReport, MetricsReport), CliError> {
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let split = prepare_split(labeled, unlabeled, cfg.split, seed)?;
    timings.insert("split".into(), ms(t));

    let t = Instant::now();
    let (prm, pseudo) = phase_one(&split, &cfg.prm)?;
    timings.insert("phase_one".into(), ms(t));
    log::info!("seed {seed}: {} pseudo-labeled rows", pseudo.len());

    let t = Instant::now();
    let assl_cfg = seeded(&cfg.effective_assl(), seed);
    let (model, history) = phase_two(&split, &pseudo, &assl_cfg)?;
    timings.insert("phase_two".into(), ms(t));

    let t = Instant::now();
    let (probs, report) = evaluate_assl(&model, &assl_cfg, &split)?;
    let (_, prm_report) = evaluate_plain(&prm, &split)?;
    timings.insert("evaluate".into(), ms(t));
    log::info!(
        "seed {seed}: test macro-F1 {:.5} (plain model {:.5})",
        report.macro_f1,
        prm_report.macro_f1
    );

    let t = Instant::now();
    let schema = split.train.schema().as_ref().clone();
    let mut dir = ArtifactDir::create(root, format!("run-{index:02}-seed-{seed}"))?;
    let assl_bundle = ModelBundle::new(
        schema.clone(),
        split.normalizer.clone(),
        BundledModel::Assl {
            model,
            config: assl_cfg,
        },
    )?;
    dir.bundle("model", "model.json", &assl_bundle)?;
    let prm_bundle = ModelBundle::new(schema.clone(), split.normalizer.clone(), BundledModel::Plain { model: prm })?;
    dir.bundle("prm_model", "prm_model.json", &prm_bundle)?;
    dir.text("history", "history.csv", &history.to_csv())?;
    dir.text("report", "report.json", &report.to_json())?;
    dir.text("report_text", "report.txt", &report.render_table(schema.label_names()))?;
    dir.text("prm_report", "prm_report.json", &prm_report.to_json())?;
    dir.dataset("test_split", "test_split.csv", &split.test)?;
    dir.text(
        "test_predictions",
        "test_predictions.csv",
        &format_predictions(&probs, schema.label_names()),
    )?;
    timings.insert("write".into(), ms(t));

    let rec = SeedRecord {
        seed,
        artifacts: dir.written,
        timings_ms: timings,
    };
    Ok((rec, report, prm_report))
}

/// Full pipeline for every seed. Returns the content-addressed output
/// directory holding `manifest.json`.
pub fn cmd_run(cfg: &RunConfig, out: Option<&Path>) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let dir = cfg.out_root(out).join(cfg.hash());
    with_manifest(&dir, "run", cfg, |man| {
        let (labeled, unlabeled) = load_data(cfg)?;
        let mut per_seed = Vec::new();
        for (i, &seed) in cfg.seeds.iter().enumerate() {
            let (rec, r, p) = run_seed(cfg, &labeled, &unlabeled, i, seed, &dir)?;
            man.seeds.push(rec);
            per_seed.push((seed, r, p));
        }
        per_seed.sort_by_key(|(seed, _, _)| *seed);
        let (reports, prm_reports): (Vec<_>, Vec<_>) = per_seed.into_iter().map(|(_, r, p)| (r, p)).unzip();
        if reports.len() >= 2 {
            let assl = aggregate_runs(&reports).map_err(|e| CliError::Data(e.to_string()))?;
            let prm = aggregate_runs(&prm_reports).map_err(|e| CliError::Data(e.to_string()))?;
            let mut top = ArtifactDir::create(&dir, "")?;
            let json: BTreeMap<&str, &AggregateReport> = [("assl", &assl), ("prm", &prm)].into();
            top.text(
                "aggregate",
                "aggregate.json",
                &serde_json::to_string_pretty(&json).expect("aggregate serializes"),
            )?;
            top.text("aggregate_text", "aggregate.txt", &aggregate_text(&[("assl", &assl), ("prm", &prm)]))?;
            man.artifacts = top.written;
        }
        Ok(())
    })?;
    Ok(dir)
}

fn ablation_tables(rows: &[AblationRow]) -> (String, String) {
    let names: Vec<&str> = rows.first().map(|r| r.report.summary().iter().map(|(k, _)| *k).collect()).unwrap_or_default();
    let mut csv = String::from("variant,seed");
    let mut txt = format!("{:<16}  {:>6}", "variant", "seed");
    for n in &names {
        let _ = write!(csv, ",{n}");
        let _ = write!(txt, "  {n:>18}");
    }
    csv.push('\n');
    txt.push('\n');
    for r in rows {
        let _ = write!(csv, "{},{}", r.variant, r.seed);
        let _ = write!(txt, "{:<16}  {:>6}", r.variant, r.seed);
        for (_, v) in r.report.summary() {
            let _ = write!(csv, ",{v}");
            let _ = write!(txt, "  {v:>18.5}");
        }
        csv.push('\n');
        txt.push('\n');
    }
    (csv, txt)
}

fn ablate_seed(
    cfg: &RunConfig,
    split: &PreparedSplit,
    seed: u64,
    root: &Path,
) -> Result<(SeedRecord, Vec<AblationRow>), CliError> {
    let mut timings = BTreeMap::new();
    let mut artifacts = BTreeMap::new();
    let mut rows = Vec::new();

    let t = Instant::now();
    let (prm, pseudo) = phase_one(split, &cfg.prm)?;
    let (_, report) = evaluate_plain(&prm, split)?;
    timings.insert("prm".to_string(), ms(t));
    let mut dir = ArtifactDir::create(root, format!("seed-{seed}/prm"))?;
    dir.text("report", "report.json", &report.to_json())?;
    artifacts.extend(dir.written.into_iter().map(|(k, v)| (format!("prm/{k}"), v)));
    rows.push(AblationRow {
        variant: "prm".into(),
        seed,
        report,
    });

    let base = seeded(&cfg.assl, seed);
    for (variant, vcfg) in [
        ("supervised_mlp", base.supervised_only()),
        ("assl_no_adv", base.without_adversarial()),
        ("assl", base.clone()),
    ] {
        let t = Instant::now();
        let (model, history) = phase_two(split, &pseudo, &vcfg)?;
        let (_, report) = evaluate_assl(&model, &vcfg, split)?;
        timings.insert(variant.to_string(), ms(t));
        log::info!("seed {seed}: {variant} test macro-F1 {:.5}", report.macro_f1);
        let mut dir = ArtifactDir::create(root, format!("seed-{seed}/{variant}"))?;
        dir.text("report", "report.json", &report.to_json())?;
        dir.text("history", "history.csv", &history.to_csv())?;
        artifacts.extend(dir.written.into_iter().map(|(k, v)| (format!("{variant}/{k}"), v)));
        rows.push(AblationRow {
            variant: variant.into(),
            seed,
            report,
        });
    }
    Ok((
        SeedRecord {
            seed,
            artifacts,
            timings_ms: timings,
        },
        rows,
    ))
}

/// Runs every variant in [`ABLATION_VARIANTS`] on the same splits. The
/// config's ablation flags are ignored. Output goes to `<hash>/ablate`.
pub fn cmd_ablate(cfg: &RunConfig, out: Option<&Path>) -> Result<(PathBuf, Vec<AblationRow>), CliError> {
    cfg.validate()?;
    let dir = cfg.out_root(out).join(cfg.hash()).join("ablate");
    let mut rows = Vec::new();
    with_manifest(&dir, "ablate", cfg, |man| {
        let (labeled, unlabeled) = load_data(cfg)?;
        for &seed in &cfg.seeds {
            let split = prepare_split(&labeled, &unlabeled, cfg.split, seed)?;
            let (rec, r) = ablate_seed(cfg, &split, seed, &dir)?;
            man.seeds.push(rec);
            rows.extend(r);
        }
        rows.sort_by_key(|r| r.seed);
        let mut top = ArtifactDir::create(&dir, "")?;
        let (csv, mut txt) = ablation_tables(&rows);
        if cfg.seeds.len() >= 2 {
            let mut aggs = BTreeMap::new();
            for v in ABLATION_VARIANTS {
                let reports: Vec<MetricsReport> = rows.iter().filter(|r| r.variant == v).map(|r| r.report.clone()).collect();
                aggs.insert(v, aggregate_runs(&reports).map_err(|e| CliError::Data(e.to_string()))?);
            }
            top.text(
                "aggregate",
                "ablation_aggregate.json",
                &serde_json::to_string_pretty(&aggs).expect("aggregate serializes"),
            )?;
            let named: Vec<(&str, &AggregateReport)> = ABLATION_VARIANTS.iter().map(|v| (*v, &aggs[v])).collect();
            txt.push('\n');
            txt.push_str(&aggregate_text(&named));
        }
        top.text("table", "ablation.csv", &csv)?;
        top.text("table_text", "ablation.txt", &txt)?;
        man.artifacts = top.written;
        Ok(())
    })?;
    Ok((dir, rows))
}

/// Loads a model bundle and prints predictions for every row of `csv`.
/// An input without rows prints nothing.
pub fn cmd_predict(model: &Path, csv: &Path, policy: MissingPolicy, out: &mut dyn Write) -> Result<(), CliError> {
    let bundle = ModelBundle::load(model)?;
    let ds = load_csv(csv, Arc::new(bundle.schema.clone()), policy)?;
    if ds.is_empty() {
        return Ok(());
    }
    let probs = bundle.predict_proba(&ds)?;
    out.write_all(format_predictions(&probs, bundle.schema.label_names()).as_bytes())
        .map_err(|e| CliError::io("stdout", e))
}

/// Writes `labeled.csv`, `unlabeled.csv` and `hidden_truth.csv` into `out`.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let data = generate_synthetic(cfg)?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out.display(), e))?;
    for (name, ds) in [("labeled.csv", &data.labeled), ("unlabeled.csv", &data.unlabeled)] {
        let p = out.join(name);
        save_csv(ds, &p).map_err(|e| CliError::io(p.display(), e))?;
    }
    let labels = data.labeled.schema().label_names();
    let mut truth = String::from("rating\n");
    for &k in &data.hidden_truth {
        truth.push_str(&labels[k]);
        truth.push('\n');
    }
    let p = out.join("hidden_truth.csv");
    fs::write(&p, truth).map_err(|e| CliError::io(p.display(), e))
}
