//! Imbalance-aware evaluation.
//!
//! Zero denominators never produce NaN: the affected rate is reported as 0
//! and a flag is raised instead. Multiclass summaries are macro averages of
//! one-vs-rest scores.

use std::fmt::Write as _;

use crate::{Error, Result};

/// `K x (K + 1)` counts, true class by predicted class; the last column
/// counts predictions of the extra "fake" label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.k
    }

    /// Count for true class `t` predicted as class `p` (`p == K` is fake).
    pub fn get(&self, t: usize, p: usize) -> usize {
        self.counts[t * (self.k + 1) + p]
    }

    pub fn fake(&self, t: usize) -> usize {
        self.get(t, self.k)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, t: usize) -> usize {
        (0..=self.k).map(|p| self.get(t, p)).sum()
    }

    pub fn has_fake_predictions(&self) -> bool {
        (0..self.k).any(|t| self.fake(t) > 0)
    }

    /// Per-class recall (diagonal over row total, 0 for empty rows).
    pub fn recalls(&self) -> Vec<f64> {
        (0..self.k)
            .map(|t| ratio(self.get(t, t), self.row_total(t)).0)
            .collect()
    }

    /// CSV with a header row `true,<class names...>,fake`.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut out = String::from("true");
        for n in class_names {
            let _ = write!(out, ",{n}");
        }
        out.push_str(",fake\n");
        for t in 0..self.k {
            out.push_str(&class_names[t]);
            for p in 0..=self.k {
                let _ = write!(out, ",{}", self.get(t, p));
            }
            out.push('\n');
        }
        out
    }
}

/// Confusion matrix over labels `< k`.
pub fn confusion(true_labels: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    let preds: Vec<Option<usize>> = predicted.iter().map(|&p| Some(p)).collect();
    confusion_with_fake(true_labels, &preds, k)
}

/// Confusion matrix where `None` predictions land in the fake column.
pub fn confusion_with_fake(true_labels: &[usize], predicted: &[Option<usize>], k: usize) -> Result<ConfusionMatrix> {
    if true_labels.is_empty() {
        return Err(Error::NoSamples);
    }
    if true_labels.len() != predicted.len() {
        return Err(Error::invalid("label lists differ in length"));
    }
    let mut counts = vec![0; k * (k + 1)];
    for (&t, &p) in true_labels.iter().zip(predicted) {
        let p = p.unwrap_or(k);
        if t >= k || p > k {
            return Err(Error::ClassOutOfRange {
                class: t.max(p),
                classes: k,
            });
        }
        counts[t * (k + 1) + p] += 1;
    }
    Ok(ConfusionMatrix { k, counts })
}

/// `num / den`, or `(0, true)` when `den == 0`.
fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RateFlags {
    pub no_positives: bool,
    pub no_negatives: bool,
    pub no_positive_predictions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryRates {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub flags: RateFlags,
}

impl BinaryRates {
    pub fn from_counts(tp: usize, fn_: usize, tn: usize, fp: usize) -> Self {
        let (sensitivity, no_positives) = ratio(tp, tp + fn_);
        let (specificity, no_negatives) = ratio(tn, tn + fp);
        let (precision, no_positive_predictions) = ratio(tp, tp + fp);
        Self {
            tp,
            fn_,
            tn,
            fp,
            sensitivity,
            specificity,
            precision,
            recall: sensitivity,
            flags: RateFlags {
                no_positives,
                no_negatives,
                no_positive_predictions,
            },
        }
    }
}

/// One-vs-rest rates with `positive` as the positive class. Fake predictions
/// count as negative predictions.
pub fn binary_rates(cm: &ConfusionMatrix, positive: usize) -> BinaryRates {
    let k = cm.n_classes();
    let mut tp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    let mut fp = 0;
    for t in 0..k {
        for p in 0..=k {
            let n = cm.get(t, p);
            match (t == positive, p == positive) {
                (true, true) => tp += n,
                (true, false) => fn_ += n,
                (false, true) => fp += n,
                (false, false) => tn += n,
            }
        }
    }
    BinaryRates::from_counts(tp, fn_, tn, fp)
}

/// Mean over classes of the one-vs-rest `sqrt(sensitivity * specificity)`.
pub fn macro_g_mean(cm: &ConfusionMatrix) -> f64 {
    let k = cm.n_classes();
    (0..k)
        .map(|c| {
            let r = binary_rates(cm, c);
            (r.sensitivity * r.specificity).sqrt()
        })
        .sum::<f64>()
        / k as f64
}

/// Which F-measure denominator to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FMeasureForm {
    /// `(1 + a^2) s p / (a s + p)`.
    #[default]
    Printed,
    /// `(1 + a^2) s p / (a^2 s + p)`.
    AlphaSquared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceScores {
    pub bac: f64,
    pub g_mean: f64,
    pub f_measure: f64,
    /// Set when the F-measure denominator was zero.
    pub f_undefined: bool,
}

/// Balanced accuracy, G-mean and F-measure from sensitivity and specificity.
pub fn imbalance_metrics(sens: f64, spec: f64, alpha: f64, form: FMeasureForm) -> Result<ImbalanceScores> {
    let unit = |v: f64| (0.0..=1.0).contains(&v);
    if !unit(sens) || !unit(spec) || !(alpha > 0.0) {
        return Err(Error::invalid(format!("rates must lie in [0, 1] and alpha > 0 (got {sens}, {spec}, {alpha})")));
    }
    let a2 = alpha * alpha;
    let den = match form {
        FMeasureForm::Printed => alpha * sens + spec,
        FMeasureForm::AlphaSquared => a2 * sens + spec,
    };
    let (f_measure, f_undefined) = if den == 0.0 {
        (0.0, true)
    } else {
        ((1.0 + a2) * sens * spec / den, false)
    };
    Ok(ImbalanceScores {
        bac: 0.5 * (sens + spec),
        g_mean: (sens * spec).sqrt(),
        f_measure,
        f_undefined,
    })
}

/// Matthews correlation coefficient; `(0, true)` when a marginal is empty.
pub fn mcc(tp: usize, fn_: usize, tn: usize, fp: usize) -> (f64, bool) {
    let (tp, fn_, tn, fp) = (tp as f64, fn_ as f64, tn as f64, fp as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        (0.0, true)
    } else {
        (((tp * tn - fp * fn_) / den).clamp(-1.0, 1.0), false)
    }
}

pub fn mcc_from_matrix(cm: &ConfusionMatrix) -> Result<(f64, bool)> {
    if cm.n_classes() != 2 {
        return Err(Error::invalid("MCC needs a 2x2 matrix"));
    }
    let r = binary_rates(cm, 1);
    Ok(mcc(r.tp, r.fn_, r.tn, r.fp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)`, from (0,0) to (1,1).
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve over all distinct score thresholds (higher score = more
/// positive) and its trapezoidal area. Tied scores form one diagonal step,
/// which matches the Mann-Whitney convention of counting ties as one half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("ROC needs both positive and negative samples"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0u128; // twice the area, in units of 1/(n_pos * n_neg)
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) as u128) * ((tp + tp0) as u128);
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// Mean of AUC, MCC and F-measure.
pub fn fam(auc: f64, mcc: f64, f_measure: f64) -> f64 {
    (auc + mcc + f_measure) / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsOptions {
    pub alpha: f64,
    pub f_form: FMeasureForm,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            f_form: FMeasureForm::Printed,
        }
    }
}

/// Scores for one class (one-vs-rest) or their macro average.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub bac: f64,
    pub g_mean: f64,
    pub f_measure: f64,
    pub mcc: f64,
    pub auc: f64,
    pub fam: f64,
    pub support: usize,
    /// Names of zero-denominator conventions that were applied.
    pub flags: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: ClassMetrics,
}

pub const REPORT_COLUMNS: [&str; 16] = [
    "run",
    "split",
    "class",
    "support",
    "sensitivity",
    "specificity",
    "precision",
    "recall",
    "bac",
    "g_mean",
    "f_measure",
    "mcc",
    "auc",
    "fam",
    "fake_predictions",
    "flags",
];

impl MetricsReport {
    /// Builds per-class and macro metrics.
    ///
    /// `predicted[i] == None` means sample `i` was rejected as fake.
    /// `class_scores[i][c]` is a score for class `c` used for the ROC/AUC
    /// (higher means more likely `c`).
    pub fn compute(
        true_labels: &[usize],
        predicted: &[Option<usize>],
        class_scores: &[Vec<f64>],
        k: usize,
        opts: MetricsOptions,
    ) -> Result<Self> {
        let cm = confusion_with_fake(true_labels, predicted, k)?;
        if class_scores.len() != true_labels.len() || class_scores.iter().any(|s| s.len() != k) {
            return Err(Error::invalid("class scores must be one length-K row per sample"));
        }
        let mut per_class = Vec::with_capacity(k);
        for c in 0..k {
            let r = binary_rates(&cm, c);
            let im = imbalance_metrics(r.sensitivity, r.specificity, opts.alpha, opts.f_form)?;
            let (m, m_flag) = mcc(r.tp, r.fn_, r.tn, r.fp);
            let scores: Vec<f64> = class_scores.iter().map(|s| s[c]).collect();
            let pos: Vec<bool> = true_labels.iter().map(|&t| t == c).collect();
            let (auc, auc_flag) = match roc_auc(&scores, &pos) {
                Ok(roc) => (roc.auc, false),
                Err(_) => (0.0, true),
            };
            let mut flags = Vec::new();
            if r.flags.no_positives {
                flags.push("no_positives");
            }
            if r.flags.no_negatives {
                flags.push("no_negatives");
            }
            if r.flags.no_positive_predictions {
                flags.push("no_positive_predictions");
            }
            if im.f_undefined {
                flags.push("f_undefined");
            }
            if m_flag {
                flags.push("mcc_undefined");
            }
            if auc_flag {
                flags.push("auc_undefined");
            }
            per_class.push(ClassMetrics {
                sensitivity: r.sensitivity,
                specificity: r.specificity,
                precision: r.precision,
                recall: r.recall,
                bac: im.bac,
                g_mean: im.g_mean,
                f_measure: im.f_measure,
                mcc: m,
                auc,
                fam: fam(auc, m, im.f_measure),
                support: r.tp + r.fn_,
                flags,
            });
        }
        let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
        let macro_avg = ClassMetrics {
            sensitivity: mean(|m| m.sensitivity),
            specificity: mean(|m| m.specificity),
            precision: mean(|m| m.precision),
            recall: mean(|m| m.recall),
            bac: mean(|m| m.bac),
            g_mean: mean(|m| m.g_mean),
            f_measure: mean(|m| m.f_measure),
            mcc: mean(|m| m.mcc),
            auc: mean(|m| m.auc),
            fam: mean(|m| m.fam),
            support: true_labels.len(),
            flags: Vec::new(),
        };
        Ok(Self {
            confusion: cm,
            per_class,
            macro_avg,
        })
    }

    /// Rows in [`REPORT_COLUMNS`] order, per class then `macro`, without a header.
    pub fn csv_rows(&self, run: &str, split: &str, class_names: &[String]) -> String {
        let mut out = String::new();
        let k = self.confusion.n_classes();
        for (c, m) in self.per_class.iter().enumerate() {
            write_row(&mut out, run, split, &class_names[c], m, self.confusion.fake(c));
        }
        let fakes = (0..k).map(|t| self.confusion.fake(t)).sum();
        write_row(&mut out, run, split, "macro", &self.macro_avg, fakes);
        out
    }

    pub fn csv_header() -> String {
        REPORT_COLUMNS.join(",") + "\n"
    }
}

fn write_row(out: &mut String, run: &str, split: &str, class: &str, m: &ClassMetrics, fakes: usize) {
    let _ = writeln!(
        out,
        "{run},{split},{class},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{fakes},{}",
        m.support,
        m.sensitivity,
        m.specificity,
        m.precision,
        m.recall,
        m.bac,
        m.g_mean,
        m.f_measure,
        m.mcc,
        m.auc,
        m.fam,
        m.flags.join("|")
    );
}
