use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use mogan_core::dataio::{
    default_fault_specs, load_csv, make_imbalanced_dataset, stratified_split_indices, CsvSchema, ImbalanceSpec,
    LabeledDataset, Split,
};
use mogan_core::metrics::MetricsReport;
use mogan_core::mogan::{load_checkpoint, save_checkpoint, train_classifier, train_with_observer, TrainHistory, TrainedModel};
use mogan_core::resample::{apply_plan, ResamplePlan};

use crate::config::{derive_seed, DatasetSource, ExperimentConfig, RunMethod};
use crate::manifest::{indices_sha256, Manifest};
use crate::{CliError, Command, RunArgs};

pub const DATASET_FILE: &str = "dataset.csv";
pub const RESAMPLED_FILE: &str = "train_resampled.csv";
pub const TEST_FILE: &str = "test.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const COMPARISON_HEADER: &str = "run,method,seed,recall,precision,fam,bac,g_mean,auc";

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth(a) => synth(&a),
        Command::Resample(a) => resample(&a),
        Command::Train(a) => train(&a),
        Command::Eval { run, checkpoint } => eval(&run, checkpoint),
        Command::Report { runs, out } => report(&runs, out.as_deref()),
    }
}

/// Loads the config, applies CLI overrides and creates the output directory.
fn setup(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out = Some(o.clone());
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set `out` in the config".into()))?;
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    Ok((cfg, out))
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset, CliError> {
    match &cfg.dataset {
        DatasetSource::Synthetic {
            counts,
            window,
            noise,
            impulse_amplitude,
        } => {
            let all = default_fault_specs(*noise);
            if counts.len() > all.len() {
                return Err(CliError::Usage(format!(
                    "the synthetic source has {} classes, dataset.counts lists {}",
                    all.len(),
                    counts.len()
                )));
            }
            let specs: Vec<_> = all
                .into_iter()
                .take(counts.len())
                .map(|mut s| {
                    if !s.is_normal() {
                        s.impulse_amplitude = *impulse_amplitude;
                    }
                    s
                })
                .collect();
            let imb = ImbalanceSpec {
                samples_per_class: counts.clone(),
                window_len: *window,
                seed: derive_seed(cfg.seed, "dataset"),
            };
            Ok(make_imbalanced_dataset(&specs, &imb)?)
        }
        DatasetSource::Csv { path, classes } => {
            let schema = match classes {
                Some(c) => CsvSchema::Declared(c.clone()),
                None => CsvSchema::Infer,
            };
            Ok(load_csv(path, &schema)?)
        }
    }
}

fn split(cfg: &ExperimentConfig, ds: &LabeledDataset) -> Result<Split, CliError> {
    Ok(stratified_split_indices(ds, 1.0 - cfg.test_frac, derive_seed(cfg.seed, "split"))?)
}

fn write_file(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| CliError::io(&p, e))
}

fn synth(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = setup(args)?;
    let mut manifest = Manifest::start("synth", Some(&cfg));
    let ds = load_dataset(&cfg)?;
    ds.save_csv(out.join(DATASET_FILE))?;
    manifest.set("data.dataset_sha256", crate::manifest::dataset_sha256(&ds));
    manifest.set("data.rows", ds.n_samples());
    manifest.set("data.class_counts", join(&ds.class_counts()));
    manifest.record_file(&out, DATASET_FILE)?;
    manifest.finish(&out, "ok")?;
    info!("wrote {} rows to {}", ds.n_samples(), out.join(DATASET_FILE).display());
    Ok(())
}

fn resample(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = setup(args)?;
    let mut manifest = Manifest::start("resample", Some(&cfg));
    let ds = load_dataset(&cfg)?;
    let sp = split(&cfg, &ds)?;
    manifest.record_split(&ds, &sp);
    let train = ds.subset(&sp.train);
    let test = ds.subset(&sp.test);
    let plan = ResamplePlan::to_majority(&train);
    let seed = derive_seed(cfg.seed, "resample");
    let resampled = match cfg.method {
        RunMethod::Resample(m) => {
            let outcome = apply_plan(&train, &plan, m, cfg.k_neighbors, seed)?;
            for w in &outcome.warnings {
                warn!("{w}");
                manifest.add_warning(w);
            }
            outcome.dataset
        }
        RunMethod::Mogan => {
            let model = mogan_core::mogan::train(&train, &cfg.train_config())?;
            let mut out = train.clone();
            for (c, &n) in plan.counts.iter().enumerate() {
                if n > 0 {
                    let rows = model.synthesize(c, n, mogan_core::rng::sub_seed(seed, c as u64))?;
                    out.extend_rows(&rows, c)?;
                }
            }
            out
        }
    };
    resampled.save_csv(out.join(RESAMPLED_FILE))?;
    test.save_csv(out.join(TEST_FILE))?;
    manifest.set("data.resampled_class_counts", join(&resampled.class_counts()));
    manifest.record_file(&out, RESAMPLED_FILE)?;
    manifest.record_file(&out, TEST_FILE)?;
    manifest.finish(&out, "ok")?;
    info!(
        "{}: {} training rows after resampling, {} test rows",
        cfg.method.name(),
        resampled.n_samples(),
        test.n_samples()
    );
    Ok(())
}

fn train(args: &RunArgs) -> Result<(), CliError> {
    let (cfg, out) = setup(args)?;
    if cfg.method != RunMethod::Mogan {
        return Err(CliError::Usage(format!(
            "`train` fits the adversarial model; method `{}` is trained inside `eval`",
            cfg.method.name()
        )));
    }
    let mut manifest = Manifest::start("train", Some(&cfg));
    let ds = load_dataset(&cfg)?;
    let sp = split(&cfg, &ds)?;
    manifest.record_split(&ds, &sp);
    let train = ds.subset(&sp.train);

    // history is appended epoch by epoch so it survives a divergence
    let hist_path = out.join(HISTORY_FILE);
    let mut hist = File::create(&hist_path).map_err(|e| CliError::io(&hist_path, e))?;
    writeln!(hist, "{}", TrainHistory::CSV_HEADER).map_err(|e| CliError::io(&hist_path, e))?;
    let mut write_err = None;
    let result = train_with_observer(&train, &cfg.train_config(), |r| {
        info!(
            "epoch {}: d_loss {:.4} g_loss {:.4} val_g_mean {:.4} fake_rejection {:.3}",
            r.epoch, r.d_loss, r.g_loss, r.val_g_mean, r.fake_rejection
        );
        if write_err.is_none() {
            if let Err(e) = writeln!(hist, "{}", TrainHistory::csv_row(r)).and_then(|_| hist.flush()) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(CliError::io(&hist_path, e));
    }
    let model = match result {
        Ok(m) => m,
        Err(e) => {
            manifest.record_file(&out, HISTORY_FILE)?;
            manifest.finish(&out, "diverged")?;
            return Err(e.into());
        }
    };
    save_checkpoint(&model, out.join(CHECKPOINT_FILE))?;
    let c = &model.calibration;
    manifest.set("model.tau", format!("{:?}", c.tau));
    manifest.set("model.achieved_fpr", format!("{:?}", c.achieved_fpr));
    manifest.set("model.calibration_flagged", c.flagged);
    if c.flagged {
        let w = format!(
            "achieved false-positive rate {:.4} exceeds the target {:.4}",
            c.achieved_fpr, c.target_fpr
        );
        warn!("{w}");
        manifest.add_warning(&w);
    }
    manifest.record_file(&out, HISTORY_FILE)?;
    manifest.record_file(&out, CHECKPOINT_FILE)?;
    manifest.finish(&out, "ok")?;
    info!("checkpoint written to {}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

/// Verifies that `ckpt` was trained by a `train` run on exactly this
/// dataset and split.
fn check_lineage(ckpt: &Path, manifest: &mut Manifest, ds: &LabeledDataset, sp: &Split) -> Result<TrainedModel, CliError> {
    let dir = ckpt.parent().unwrap_or(Path::new("."));
    let name = ckpt
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| CliError::Usage(format!("bad checkpoint path {}", ckpt.display())))?;
    let trained = Manifest::read(dir)
        .map_err(|e| CliError::Lineage(format!("no readable training manifest next to the checkpoint ({e})")))?;
    if trained.get("run.command") != Some("train") {
        return Err(CliError::Lineage("the checkpoint's manifest is not from a `train` run".into()));
    }
    if trained.get(&format!("file.{name}")).is_none() {
        return Err(CliError::Lineage(format!("the training manifest does not list {name}")));
    }
    trained.verify_files(dir)?;
    let dh = crate::manifest::dataset_sha256(ds);
    let want = [
        ("data.dataset_sha256", dh.clone()),
        ("data.train_sha256", indices_sha256(&dh, &sp.train)),
        ("data.test_sha256", indices_sha256(&dh, &sp.test)),
    ];
    for (key, value) in &want {
        if trained.get(key) != Some(value.as_str()) {
            return Err(CliError::Lineage(format!(
                "{key} differs from the training run; the test split may overlap the data the model was trained on"
            )));
        }
    }
    manifest.set("lineage.checkpoint", ckpt.display());
    manifest.set("lineage.checkpoint_sha256", crate::manifest::file_sha256(ckpt)?);
    let model = load_checkpoint(ckpt)?;
    if model.detector.disc.width() != ds.n_features() || model.detector.disc.n_classes() != ds.n_classes() {
        return Err(CliError::Lineage("checkpoint shape does not match the dataset".into()));
    }
    Ok(model)
}

fn eval(args: &RunArgs, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let (cfg, out) = setup(args)?;
    let mut manifest = Manifest::start("eval", Some(&cfg));
    let ds = load_dataset(&cfg)?;
    let sp = split(&cfg, &ds)?;
    manifest.record_split(&ds, &sp);
    if !crate::manifest::splits_disjoint(&sp) {
        return Err(CliError::Lineage("train and test splits overlap".into()));
    }
    let test = ds.subset(&sp.test);
    let k = ds.n_classes();

    let mut predicted = Vec::with_capacity(test.n_samples());
    let mut probs = Vec::with_capacity(test.n_samples());
    let mut fault_scores = Vec::with_capacity(test.n_samples());
    match cfg.method {
        RunMethod::Mogan => {
            let ckpt = checkpoint.or_else(|| cfg.checkpoint.clone()).ok_or_else(|| {
                CliError::Usage("method `mogan` needs --checkpoint or `eval.checkpoint` in the config".into())
            })?;
            let model = check_lineage(&ckpt, &mut manifest, &ds, &sp)?;
            for row in test.rows() {
                let p = model.detector.predict(row)?;
                predicted.push(p.label.class());
                probs.push(p.class_probs());
                fault_scores.push(Some(p.fault_score.value));
            }
        }
        RunMethod::Resample(m) => {
            let train = ds.subset(&sp.train);
            let outcome = apply_plan(
                &train,
                &ResamplePlan::to_majority(&train),
                m,
                cfg.k_neighbors,
                derive_seed(cfg.seed, "resample"),
            )?;
            for w in &outcome.warnings {
                warn!("{w}");
                manifest.add_warning(w);
            }
            let (clf, _) = train_classifier(&outcome.dataset, &cfg.train_config())?;
            for row in test.rows() {
                let p = clf.class_probs(row)?;
                predicted.push(Some(clf.predict(row)?));
                probs.push(p);
                fault_scores.push(None);
            }
        }
    }

    let report = MetricsReport::compute(test.labels(), &predicted, &probs, k, cfg.metrics)?;
    let run = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let names = ds.class_names();
    write_file(&out, METRICS_FILE, &(MetricsReport::csv_header() + &report.csv_rows(&run, "test", names)))?;
    write_file(&out, CONFUSION_FILE, &report.confusion.to_csv(names))?;
    write_file(&out, SCORES_FILE, &scores_csv(&test, &predicted, &probs, &fault_scores))?;
    for f in [METRICS_FILE, CONFUSION_FILE, SCORES_FILE] {
        manifest.record_file(&out, f)?;
    }
    manifest.finish(&out, "ok")?;
    let m = &report.macro_avg;
    println!(
        "{run} ({}): g_mean {:.4} bac {:.4} auc {:.4} fam {:.4}",
        cfg.method.name(),
        m.g_mean,
        m.bac,
        m.auc,
        m.fam
    );
    Ok(())
}

fn scores_csv(test: &LabeledDataset, predicted: &[Option<usize>], probs: &[Vec<f64>], fault: &[Option<f64>]) -> String {
    let names = test.class_names();
    let mut s = String::from("index,true,predicted,fault_score");
    for n in names {
        s.push_str(&format!(",p_{n}"));
    }
    s.push('\n');
    for i in 0..test.n_samples() {
        let pred = predicted[i].map_or("fake", |c| names[c].as_str());
        let fs = fault[i].map_or(String::new(), |v| format!("{v:.9e}"));
        s.push_str(&format!("{i},{},{pred},{fs}", names[test.label(i)]));
        for p in &probs[i] {
            s.push_str(&format!(",{p:.9}"));
        }
        s.push('\n');
    }
    s
}

/// One row of `comparison.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub run: String,
    pub method: String,
    pub seed: u64,
    /// recall, precision, fam, bac, g_mean, auc as written in metrics.csv.
    pub values: [String; 6],
}

fn read_run(dir: &Path) -> Result<ComparisonRow, String> {
    let manifest = Manifest::read(dir).map_err(|e| e.to_string())?;
    if manifest.get("run.command") != Some("eval") {
        return Err("not an eval run".into());
    }
    let method = manifest.get("config.method").ok_or("manifest has no method")?.to_string();
    let seed = manifest
        .get("run.seed")
        .and_then(|s| s.parse().ok())
        .ok_or("manifest has no seed")?;
    let path = dir.join(METRICS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or("empty metrics file")?.split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or(format!("metrics file lacks `{name}`"));
    let (split_c, class_c) = (col("split")?, col("class")?);
    let wanted = ["recall", "precision", "fam", "bac", "g_mean", "auc"];
    let idx: Vec<usize> = wanted.iter().map(|w| col(w)).collect::<Result<_, _>>()?;
    let row: Vec<&str> = lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f.len() == header.len() && f[split_c] == "test" && f[class_c] == "macro")
        .ok_or("no macro test row")?;
    let run = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(ComparisonRow {
        run,
        method,
        seed,
        values: std::array::from_fn(|i| row[idx[i]].to_string()),
    })
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.run, r.method, r.seed, r.values.join(",")));
    }
    s
}

fn report(runs: &[PathBuf], out: Option<&Path>) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for dir in runs {
        match read_run(dir) {
            Ok(r) => rows.push(r),
            Err(e) => warn!("skipping {}: {e}", dir.display()),
        }
    }
    rows.sort_by(|a, b| (&a.method, a.seed, &a.run).cmp(&(&b.method, b.seed, &b.run)));
    let text = comparison_csv(&rows);
    print!("{text}");
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        write_file(out, COMPARISON_FILE, &text)?;
        let mut manifest = Manifest::start("report", None);
        for (i, d) in runs.iter().enumerate() {
            manifest.set(&format!("input.{i}"), d.display());
        }
        manifest.record_file(out, COMPARISON_FILE)?;
        manifest.finish(out, "ok")?;
    }
    Ok(())
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
