//! Labeled datasets, a synthetic vibration-window generator, CSV I/O,
//! stratified splitting and per-feature standardization.
//!
//! CSV layout: one header line `label,f0,f1,...,f{N-1}`, then one row per
//! sample with the class name in the first column and decimal floats after it.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::rng::{seeded, sub_seed};
use crate::{par, Error, Result};

/// Index of the normal (majority) class.
pub const NORMAL_CLASS: usize = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major `features` (`labels.len()` rows).
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if class_names.len() < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        if n_features == 0 {
            return Err(Error::invalid("a dataset needs at least one feature"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::invalid(format!(
                "{} feature values do not form {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::ClassOutOfRange {
                class: bad,
                classes: class_names.len(),
            });
        }
        Ok(Self {
            features,
            n_features,
            labels,
            class_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n_features = rows.first().map(Vec::len).ok_or(Error::NoSamples)?;
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::invalid("rows have differing widths"));
        }
        Self::new(rows.concat(), n_features, labels, class_names)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.n_features)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices of class `c`, ascending.
    pub fn indices_of(&self, c: usize) -> Vec<usize> {
        (0..self.n_samples()).filter(|&i| self.labels[i] == c).collect()
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            features,
            n_features: self.n_features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Appends rows with labels. Widths and labels are checked.
    pub fn extend_rows(&mut self, rows: &[Vec<f64>], label: usize) -> Result<()> {
        if label >= self.n_classes() {
            return Err(Error::ClassOutOfRange {
                class: label,
                classes: self.n_classes(),
            });
        }
        for r in rows {
            if r.len() != self.n_features {
                return Err(Error::invalid("appended row has the wrong width"));
            }
            self.features.extend_from_slice(r);
            self.labels.push(label);
        }
        Ok(())
    }

    /// Index of the class with the most samples (lowest index on ties).
    pub fn majority_class(&self) -> usize {
        let counts = self.class_counts();
        let max = counts.iter().copied().max().unwrap_or(0);
        counts.iter().position(|&c| c == max).unwrap_or(0)
    }

    /// Serializes to the CSV layout described in the module docs.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("label");
        for j in 0..self.n_features {
            let _ = write!(out, ",f{j}");
        }
        out.push('\n');
        for (row, &l) in self.rows().zip(&self.labels) {
            out.push_str(&self.class_names[l]);
            for v in row {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

/// How class names in a CSV map to label indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum CsvSchema {
    /// Names map to their position in this list; index 0 is the normal class.
    Declared(Vec<String>),
    /// `"normal"` (if present) becomes class 0, the remaining names follow in
    /// order of first appearance.
    #[default]
    Infer,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

/// Parses CSV text. Line numbers in errors are 1-based and count the header.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.get(0) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "first header column must be \"label\"".into(),
        });
    }
    let n_features = header.len() - 1;
    if n_features == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column \"f{j}\", found \"{name}\""),
            });
        }
    }

    let mut names: Vec<String> = match schema {
        CsvSchema::Declared(n) => n.clone(),
        CsvSchema::Infer => Vec::new(),
    };
    let mut raw_labels: Vec<String> = Vec::new();
    let mut features = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != n_features + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} columns, found {}", n_features + 1, record.len()),
            });
        }
        let label = record[0].trim().to_string();
        match schema {
            CsvSchema::Declared(n) => {
                if !n.contains(&label) {
                    return Err(Error::Parse {
                        line,
                        message: format!("unknown label \"{label}\""),
                    });
                }
            }
            CsvSchema::Infer => {
                if label.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty label".into(),
                    });
                }
                if !names.contains(&label) {
                    names.push(label.clone());
                }
            }
        }
        for cell in record.iter().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric value \"{cell}\""),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value \"{cell}\""),
                });
            }
            features.push(v);
        }
        raw_labels.push(label);
    }
    if raw_labels.is_empty() {
        return Err(Error::NoSamples);
    }
    if matches!(schema, CsvSchema::Infer) {
        if let Some(pos) = names.iter().position(|n| n == "normal") {
            let normal = names.remove(pos);
            names.insert(0, normal);
        }
        if names.len() < 2 {
            return Err(Error::invalid("CSV holds a single class"));
        }
    }
    let labels = raw_labels
        .iter()
        .map(|l| names.iter().position(|n| n == l).expect("validated above"))
        .collect();
    LabeledDataset::new(features, n_features, labels, names)
}

/// Signal recipe for one machine condition.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultClassSpec {
    pub name: String,
    pub sample_rate: f64,
    /// Shaft frequency in Hz.
    pub base_freq: f64,
    /// `(multiple of base_freq, amplitude)` pairs.
    pub harmonics: Vec<(f64, f64)>,
    /// Samples between defect impulses; 0 disables impulses.
    pub impulse_period: usize,
    pub impulse_amplitude: f64,
    /// Per-sample decay factor of each impulse ring-down, in (0, 1).
    pub ring_decay: f64,
    pub noise_sigma: f64,
}

impl FaultClassSpec {
    pub fn normal(name: &str, noise_sigma: f64) -> Self {
        Self {
            name: name.to_string(),
            sample_rate: 12_000.0,
            base_freq: 30.0,
            harmonics: vec![(1.0, 1.0), (2.0, 0.3), (3.0, 0.1)],
            impulse_period: 0,
            impulse_amplitude: 0.0,
            ring_decay: 0.5,
            noise_sigma,
        }
    }

    pub fn fault(name: &str, impulse_period: usize, impulse_amplitude: f64, ring_decay: f64, noise_sigma: f64) -> Self {
        Self {
            impulse_period,
            impulse_amplitude,
            ring_decay,
            ..Self::normal(name, noise_sigma)
        }
    }

    pub fn is_normal(&self) -> bool {
        self.impulse_period == 0 || self.impulse_amplitude == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.sample_rate.is_finite()
            && self.base_freq.is_finite()
            && self.impulse_amplitude.is_finite()
            && self.noise_sigma.is_finite()
            && self.harmonics.iter().all(|(m, a)| m.is_finite() && a.is_finite());
        if !finite || self.sample_rate <= 0.0 {
            return Err(Error::invalid(format!("class \"{}\": non-finite or invalid parameters", self.name)));
        }
        if !(self.ring_decay > 0.0 && self.ring_decay < 1.0) {
            return Err(Error::invalid(format!("class \"{}\": ring_decay must lie in (0, 1)", self.name)));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::invalid(format!("class \"{}\": noise_sigma must be >= 0", self.name)));
        }
        Ok(())
    }
}

/// The default four-condition bearing stand-in: normal plus inner-race,
/// outer-race and ball faults with distinct impulse periods.
pub fn default_fault_specs(noise_sigma: f64) -> Vec<FaultClassSpec> {
    vec![
        FaultClassSpec::normal("normal", noise_sigma),
        FaultClassSpec::fault("inner", 29, 1.5, 0.80, noise_sigma),
        FaultClassSpec::fault("outer", 43, 1.5, 0.85, noise_sigma),
        FaultClassSpec::fault("ball", 67, 1.5, 0.90, noise_sigma),
    ]
}

/// Harmonic, impulse and noise parts of one synthetic window.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalComponents {
    pub harmonic: Vec<f64>,
    pub impulse: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SignalComponents {
    pub fn sum(&self) -> Vec<f64> {
        self.harmonic
            .iter()
            .zip(&self.impulse)
            .zip(&self.noise)
            .map(|((h, i), n)| h + i + n)
            .collect()
    }
}

/// Generates the components of one window.
///
/// The sinusoid phase is drawn per window from the seed; impulses start at
/// sample 0 and repeat every `impulse_period` samples, each decaying as
/// `amplitude * ring_decay^k` until the end of the window.
pub fn synth_components(spec: &FaultClassSpec, window_len: usize, seed: u64) -> Result<SignalComponents> {
    if window_len < 16 {
        return Err(Error::invalid("window_len must be at least 16"));
    }
    spec.validate()?;
    let mut rng = seeded(seed);
    let phase: f64 = rng.random::<f64>() * 2.0 * PI;
    let omega = 2.0 * PI * spec.base_freq / spec.sample_rate;
    let harmonic = (0..window_len)
        .map(|t| {
            spec.harmonics
                .iter()
                .map(|&(m, a)| a * (m * (omega * t as f64 + phase)).sin())
                .sum()
        })
        .collect();

    let mut impulse = vec![0.0; window_len];
    if !spec.is_normal() {
        let mut start = 0;
        while start < window_len {
            let mut amp = spec.impulse_amplitude;
            for v in impulse.iter_mut().skip(start) {
                *v += amp;
                amp *= spec.ring_decay;
            }
            start += spec.impulse_period;
        }
    }

    let noise = if spec.noise_sigma > 0.0 {
        let dist = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
        (0..window_len).map(|_| dist.sample(&mut rng)).collect()
    } else {
        vec![0.0; window_len]
    };
    Ok(SignalComponents { harmonic, impulse, noise })
}

pub fn synth_signal(spec: &FaultClassSpec, window_len: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(synth_components(spec, window_len, seed)?.sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceSpec {
    pub samples_per_class: Vec<usize>,
    pub window_len: usize,
    pub seed: u64,
}

impl ImbalanceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 16 {
            return Err(Error::invalid("window_len must be at least 16"));
        }
        if self.samples_per_class.len() < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if let Some(c) = self.samples_per_class.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("class {c} has zero samples requested")));
        }
        let normal = self.samples_per_class[NORMAL_CLASS];
        if self.samples_per_class.iter().skip(1).any(|&n| n > normal) {
            return Err(Error::invalid("the normal class must be the majority"));
        }
        Ok(())
    }
}

/// Draws `samples_per_class[c]` windows of each class and shuffles the rows.
pub fn make_imbalanced_dataset(specs: &[FaultClassSpec], imb: &ImbalanceSpec) -> Result<LabeledDataset> {
    if specs.len() != imb.samples_per_class.len() {
        return Err(Error::invalid(format!(
            "{} class specs but {} class counts",
            specs.len(),
            imb.samples_per_class.len()
        )));
    }
    imb.validate()?;
    for s in specs {
        s.validate()?;
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (c, (spec, &count)) in specs.iter().zip(&imb.samples_per_class).enumerate() {
        let class_seed = sub_seed(imb.seed, c as u64);
        let rows = par::map_range(count, |i| synth_signal(spec, imb.window_len, sub_seed(class_seed, i as u64)));
        for r in rows {
            features.extend(r?);
            labels.push(c);
        }
    }
    let names = specs.iter().map(|s| s.name.clone()).collect();
    let ds = LabeledDataset::new(features, imb.window_len, labels, names)?;
    let mut order: Vec<usize> = (0..ds.n_samples()).collect();
    order.shuffle(&mut seeded(sub_seed(imb.seed, u64::MAX)));
    Ok(ds.subset(&order))
}

/// Row indices of a train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class stratified partition. Each class contributes
/// `round(train_frac * count)` rows to train, clamped to leave at least one
/// row on each side. Both index lists are ascending.
pub fn stratified_split_indices(ds: &LabeledDataset, train_frac: f64, seed: u64) -> Result<Split> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::invalid("train_frac must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for c in 0..ds.n_classes() {
        let mut idx = ds.indices_of(c);
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::invalid(format!(
                "class \"{}\" has fewer than 2 samples",
                ds.class_names()[c]
            )));
        }
        idx.shuffle(&mut seeded(sub_seed(seed, c as u64)));
        let n_train = ((train_frac * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

pub fn stratified_split(ds: &LabeledDataset, train_frac: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let split = stratified_split_indices(ds, train_frac, seed)?;
    Ok((ds.subset(&split.train), ds.subset(&split.test)))
}

/// Per-feature affine standardization fitted on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per feature; constant
    /// features get a unit scale.
    pub fn fit(ds: &LabeledDataset) -> Self {
        let d = ds.n_features();
        let n = ds.n_samples() as f64;
        let mut mean = vec![0.0; d];
        for row in ds.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in ds.rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub fn transform(&self, ds: &LabeledDataset) -> LabeledDataset {
        let features = ds.rows().flat_map(|r| self.transform_row(r)).collect();
        LabeledDataset {
            features,
            n_features: ds.n_features,
            labels: ds.labels.clone(),
            class_names: ds.class_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn pure_sinusoid_rms() {
        let spec = FaultClassSpec {
            name: "tone".into(),
            sample_rate: 12_000.0,
            // 10 full periods in 256 samples
            base_freq: 12_000.0 * 10.0 / 256.0,
            harmonics: vec![(1.0, 1.0)],
            impulse_period: 0,
            impulse_amplitude: 0.0,
            ring_decay: 0.5,
            noise_sigma: 0.0,
        };
        let x = synth_signal(&spec, 256, 11).unwrap();
        let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((rms - 1.0 / 2f64.sqrt()).abs() <= 1e-6, "{rms}");
    }

    #[test]
    fn normal_class_has_no_impulse_energy() {
        let spec = FaultClassSpec::normal("normal", 0.3);
        let parts = synth_components(&spec, 128, 4).unwrap();
        assert!(parts.impulse.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = &default_fault_specs(0.4)[2];
        let a = synth_signal(spec, 64, 99).unwrap();
        let b = synth_signal(spec, 64, 99).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(a, synth_signal(spec, 64, 100).unwrap());
    }

    #[test]
    fn short_windows_rejected() {
        assert!(synth_signal(&default_fault_specs(0.0)[0], 15, 0).is_err());
    }

    #[test]
    fn imbalanced_counts() {
        let imb = ImbalanceSpec {
            samples_per_class: vec![200, 10, 10, 10],
            window_len: 32,
            seed: 1,
        };
        let ds = make_imbalanced_dataset(&default_fault_specs(0.5), &imb).unwrap();
        assert_eq!(ds.n_samples(), 230);
        assert_eq!(ds.class_counts(), vec![200, 10, 10, 10]);
        // shuffled: the first rows are not all from the normal block
        assert!(ds.labels()[..230].windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn zero_count_rejected() {
        let imb = ImbalanceSpec {
            samples_per_class: vec![20, 0],
            window_len: 32,
            seed: 1,
        };
        assert!(make_imbalanced_dataset(&default_fault_specs(0.5)[..2], &imb).is_err());
    }

    #[test]
    fn csv_basic_and_errors() {
        let ds = parse_csv("label,f0,f1\nnormal,1,2\nfault,3,4\nnormal,5,6\n", &CsvSchema::Infer).unwrap();
        assert_eq!(ds.n_samples(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);

        let schema = CsvSchema::Declared(names(&["normal", "fault"]));
        match parse_csv("label,f0\nnormal,1\nweird,2\n", &schema) {
            Err(Error::Parse { line: 3, message }) => assert!(message.contains("weird")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_csv("label,f0,f1\n", &schema), Err(Error::NoSamples)));
        assert!(matches!(
            parse_csv("label,f0,f1\nnormal,1\n", &schema),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_csv("label,f0\nnormal,abc\n", &schema),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn csv_infer_puts_normal_first() {
        let ds = parse_csv("label,f0\nball,1\nnormal,2\nnormal,3\n", &CsvSchema::Infer).unwrap();
        assert_eq!(ds.class_names(), &names(&["normal", "ball"]));
        assert_eq!(ds.labels(), &[1, 0, 0]);
    }

    #[test]
    fn split_counts() {
        let mut labels = vec![0; 100];
        labels.extend(vec![1; 10]);
        let ds = LabeledDataset::new((0..110).map(f64::from).collect(), 1, labels, names(&["a", "b"])).unwrap();
        let (train, test) = stratified_split(&ds, 0.7, 3).unwrap();
        assert_eq!(train.class_counts(), vec![70, 7]);
        assert_eq!(test.class_counts(), vec![30, 3]);
        assert_eq!(stratified_split_indices(&ds, 0.7, 3).unwrap(), stratified_split_indices(&ds, 0.7, 3).unwrap());
    }

    #[test]
    fn split_rejects_singletons() {
        let ds = LabeledDataset::new(vec![0.0, 1.0, 2.0], 1, vec![0, 0, 1], names(&["a", "b"])).unwrap();
        assert!(stratified_split(&ds, 0.5, 0).is_err());
        assert!(stratified_split(&ds, 1.0, 0).is_err());
    }

    #[test]
    fn standardizer_zero_mean_unit_std() {
        let ds = LabeledDataset::new(vec![1.0, 5.0, 3.0, 5.0, 5.0, 5.0], 2, vec![0, 1, 0], names(&["a", "b"])).unwrap();
        let st = Standardizer::fit(&ds);
        let z = st.transform(&ds);
        let col0: Vec<f64> = z.rows().map(|r| r[0]).collect();
        assert!(col0.iter().sum::<f64>().abs() < 1e-12);
        assert!((col0.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        // constant column keeps unit scale
        assert_eq!(st.std[1], 1.0);
    }
}
