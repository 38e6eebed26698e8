//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `seed` | 0 | root seed; every other seed is derived from it |
//! | `method` | `mogan` | `none`, `random`, `smote`, `b-smote`, `adasyn` or `mogan` |
//! | `out` | none | output directory (overridden by `--out`) |
//! | `dataset.path` | none | CSV file (relative to the config file) |
//! | `dataset.classes` | inferred | comma separated class names for CSV input |
//! | `dataset.counts` | none | synthetic samples per class, normal first |
//! | `dataset.window` | 256 | synthetic window length |
//! | `dataset.noise` | 0.5 | synthetic noise standard deviation |
//! | `dataset.impulse_amplitude` | 1.5 | synthetic fault impulse amplitude |
//! | `dataset.test_frac` | 0.3 | stratified test share |
//! | `resample.k` | 5 | neighbours for SMOTE-family methods |
//! | `train.epochs` | 100 | |
//! | `train.batch_size` | 64 | |
//! | `train.latent_dim` | 128 | |
//! | `train.pi` | 0.5 | majority share of the minority mixture |
//! | `train.stats_refresh` | 5 | epochs between latent statistics refits |
//! | `train.lr`, `train.beta1`, `train.beta2`, `train.adam_eps` | 2e-4, 0.5, 0.999, 1e-8 | Adam |
//! | `train.density_weight` | 0 | low-density penalty weight |
//! | `train.density_quantile` | 0.95 | |
//! | `train.pretrain_epochs` | 5 | generator warm-up |
//! | `train.val_frac` | 0.15 | validation share of the training split |
//! | `train.target_fpr` | 0.05 | detector threshold target |
//! | `train.generator_hidden` | 128,256,256,256 | |
//! | `train.discriminator_hidden` | 128,64 | |
//! | `train.audit_samples` | 64 | generated samples per fake-rejection audit |
//! | `train.select_best` | true | keep the best validation epoch |
//! | `eval.alpha` | 1 | F-measure alpha |
//! | `eval.f_form` | `printed` | `printed` or `alpha_squared` |
//! | `eval.checkpoint` | none | checkpoint for `eval` with `method = mogan` |
//!
//! Exactly one of `dataset.path` and `dataset.counts` must be given.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use mogan_core::metrics::{FMeasureForm, MetricsOptions};
use mogan_core::mogan::TrainConfig;
use mogan_core::resample::{Method, DEFAULT_K};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic {
        counts: Vec<usize>,
        window: usize,
        noise: f64,
        impulse_amplitude: f64,
    },
    Csv {
        path: PathBuf,
        classes: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMethod {
    Resample(Method),
    Mogan,
}

impl RunMethod {
    pub fn name(self) -> &'static str {
        match self {
            RunMethod::Resample(m) => m.name(),
            RunMethod::Mogan => "mogan",
        }
    }
}

impl FromStr for RunMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "mogan" {
            Ok(RunMethod::Mogan)
        } else {
            s.parse::<Method>().map(RunMethod::Resample).map_err(|_| {
                format!("unknown method `{s}` (expected none, random, smote, b-smote, adasyn or mogan)")
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub method: RunMethod,
    pub out: Option<PathBuf>,
    pub dataset: DatasetSource,
    pub test_frac: f64,
    pub k_neighbors: usize,
    pub train: TrainConfig,
    pub metrics: MetricsOptions,
    pub checkpoint: Option<PathBuf>,
}

/// First 8 bytes (little endian) of `sha256(root_le || purpose)`.
pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(purpose.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("invalid value `{v}` for `{key}`"))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, String> {
    v.split(',').map(|x| parse_num(key, x.trim())).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid value `{v}` for `{key}` (expected true or false)")),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut seed = 0;
        let mut method = RunMethod::Mogan;
        let mut out = None;
        let mut path: Option<PathBuf> = None;
        let mut classes = None;
        let mut counts: Option<Vec<usize>> = None;
        let mut window = 256;
        let mut noise = 0.5;
        let mut amplitude = 1.5;
        let mut test_frac = 0.3;
        let mut k_neighbors = DEFAULT_K;
        let mut train = TrainConfig::default();
        let mut metrics = MetricsOptions::default();
        let mut checkpoint = None;

        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let usage = |m: String| CliError::Usage(format!("config line {}: {m}", no + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| usage("expected `key = value`".into()))?;
            let r: Result<(), String> = (|| {
                match key {
                    "seed" => seed = parse_num(key, value)?,
                    "method" => method = value.parse()?,
                    "out" => out = Some(base.join(value)),
                    "dataset.path" => path = Some(base.join(value)),
                    "dataset.classes" => classes = Some(value.split(',').map(|s| s.trim().to_string()).collect()),
                    "dataset.counts" => counts = Some(parse_list(key, value)?),
                    "dataset.window" => window = parse_num(key, value)?,
                    "dataset.noise" => noise = parse_num(key, value)?,
                    "dataset.impulse_amplitude" => amplitude = parse_num(key, value)?,
                    "dataset.test_frac" => test_frac = parse_num(key, value)?,
                    "resample.k" => k_neighbors = parse_num(key, value)?,
                    "train.epochs" => train.epochs = parse_num(key, value)?,
                    "train.batch_size" => train.batch_size = parse_num(key, value)?,
                    "train.latent_dim" => train.latent_dim = parse_num(key, value)?,
                    "train.pi" => train.pi = parse_num(key, value)?,
                    "train.stats_refresh" => train.stats_refresh = parse_num(key, value)?,
                    "train.lr" => train.adam.lr = parse_num(key, value)?,
                    "train.beta1" => train.adam.beta1 = parse_num(key, value)?,
                    "train.beta2" => train.adam.beta2 = parse_num(key, value)?,
                    "train.adam_eps" => train.adam.eps = parse_num(key, value)?,
                    "train.density_weight" => train.density_weight = parse_num(key, value)?,
                    "train.density_quantile" => train.density_quantile = parse_num(key, value)?,
                    "train.pretrain_epochs" => train.pretrain_epochs = parse_num(key, value)?,
                    "train.val_frac" => train.val_frac = parse_num(key, value)?,
                    "train.target_fpr" => train.target_fpr = parse_num(key, value)?,
                    "train.generator_hidden" => train.generator_hidden = parse_list(key, value)?,
                    "train.discriminator_hidden" => train.discriminator_hidden = parse_list(key, value)?,
                    "train.audit_samples" => train.audit_samples = parse_num(key, value)?,
                    "train.select_best" => train.select_best = parse_bool(key, value)?,
                    "eval.alpha" => metrics.alpha = parse_num(key, value)?,
                    "eval.f_form" => {
                        metrics.f_form = match value {
                            "printed" => FMeasureForm::Printed,
                            "alpha_squared" => FMeasureForm::AlphaSquared,
                            _ => return Err(format!("unknown F-measure form `{value}`")),
                        }
                    }
                    "eval.checkpoint" => checkpoint = Some(base.join(value)),
                    _ => return Err(format!("unknown key `{key}`")),
                }
                Ok(())
            })();
            r.map_err(usage)?;
        }

        let dataset = match (path, counts) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("give either dataset.path or dataset.counts, not both".into()));
            }
            (None, None) => return Err(CliError::Usage("no dataset source: set dataset.path or dataset.counts".into())),
            (Some(path), None) => {
                if !path.is_file() {
                    return Err(CliError::Data(format!("dataset file {} does not exist", path.display())));
                }
                DatasetSource::Csv { path, classes }
            }
            (None, Some(counts)) => DatasetSource::Synthetic {
                counts,
                window,
                noise,
                impulse_amplitude: amplitude,
            },
        };
        if !(test_frac > 0.0 && test_frac < 1.0) {
            return Err(CliError::Usage("dataset.test_frac must lie in (0, 1)".into()));
        }
        if !(metrics.alpha > 0.0) {
            return Err(CliError::Usage("eval.alpha must be positive".into()));
        }
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self {
            seed,
            method,
            out,
            dataset,
            test_frac,
            k_neighbors,
            train,
            metrics,
            checkpoint,
        })
    }

    /// Canonical `key = value` echo of the effective configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, val: String| v.push((k.to_string(), val));
        put("seed", self.seed.to_string());
        put("method", self.method.name().to_string());
        match &self.dataset {
            DatasetSource::Synthetic {
                counts,
                window,
                noise,
                impulse_amplitude,
            } => {
                put("dataset.counts", join(counts));
                put("dataset.window", window.to_string());
                put("dataset.noise", format!("{noise:?}"));
                put("dataset.impulse_amplitude", format!("{impulse_amplitude:?}"));
            }
            DatasetSource::Csv { path, classes } => {
                put("dataset.path", path.display().to_string());
                if let Some(c) = classes {
                    put("dataset.classes", c.join(","));
                }
            }
        }
        put("dataset.test_frac", format!("{:?}", self.test_frac));
        put("resample.k", self.k_neighbors.to_string());
        let t = &self.train;
        put("train.epochs", t.epochs.to_string());
        put("train.batch_size", t.batch_size.to_string());
        put("train.latent_dim", t.latent_dim.to_string());
        put("train.pi", format!("{:?}", t.pi));
        put("train.stats_refresh", t.stats_refresh.to_string());
        put("train.lr", format!("{:?}", t.adam.lr));
        put("train.beta1", format!("{:?}", t.adam.beta1));
        put("train.beta2", format!("{:?}", t.adam.beta2));
        put("train.adam_eps", format!("{:?}", t.adam.eps));
        put("train.density_weight", format!("{:?}", t.density_weight));
        put("train.density_quantile", format!("{:?}", t.density_quantile));
        put("train.pretrain_epochs", t.pretrain_epochs.to_string());
        put("train.val_frac", format!("{:?}", t.val_frac));
        put("train.target_fpr", format!("{:?}", t.target_fpr));
        put("train.generator_hidden", join(&t.generator_hidden));
        put("train.discriminator_hidden", join(&t.discriminator_hidden));
        put("train.audit_samples", t.audit_samples.to_string());
        put("train.select_best", t.select_best.to_string());
        put("eval.alpha", format!("{:?}", self.metrics.alpha));
        put(
            "eval.f_form",
            match self.metrics.f_form {
                FMeasureForm::Printed => "printed",
                FMeasureForm::AlphaSquared => "alpha_squared",
            }
            .to_string(),
        );
        v
    }

    /// Training config with its seed derived from the root seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, "train"),
            ..self.train.clone()
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_synthetic() {
        let c = ExperimentConfig::parse("seed = 4\ndataset.counts = 20,5\n# comment\n", Path::new(".")).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.method, RunMethod::Mogan);
        assert!(matches!(c.dataset, DatasetSource::Synthetic { ref counts, .. } if counts == &[20, 5]));
    }

    #[test]
    fn rejects_unknown_and_missing() {
        assert!(matches!(
            ExperimentConfig::parse("dataset.counts = 1,1\nbogus = 1\n", Path::new(".")),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(ExperimentConfig::parse("seed = 1\n", Path::new(".")), Err(CliError::Usage(_))));
        assert!(matches!(
            ExperimentConfig::parse("dataset.path = /definitely/not/here.csv\n", Path::new(".")),
            Err(CliError::Data(_))
        ));
    }

    #[test]
    fn seeds_differ_by_purpose() {
        assert_ne!(derive_seed(1, "split"), derive_seed(1, "train"));
        assert_ne!(derive_seed(1, "split"), derive_seed(2, "split"));
        assert_eq!(derive_seed(9, "x"), derive_seed(9, "x"));
    }

    #[test]
    fn echo_round_trips() {
        let c = ExperimentConfig::parse(
            "seed = 3\nmethod = smote\ndataset.counts = 30,6,6\ntrain.epochs = 2\neval.f_form = alpha_squared\n",
            Path::new("."),
        )
        .unwrap();
        let text: String = c.echo().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(ExperimentConfig::parse(&text, Path::new(".")).unwrap(), c);
    }
}
