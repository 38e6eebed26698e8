use super::latent::LatentSource;
use super::nets::{Discrimination, DiscriminatorNet, GeneratorNet};
use crate::dataio::{Standardizer, NORMAL_CLASS};
use crate::par::map_range;
use crate::rng::{seeded, sub_seed};
use crate::{Error, Result};

pub const SCORE_CLAMP: f64 = 1e12;
pub const DEFAULT_TARGET_FPR: f64 = 0.05;
pub const MIN_CALIBRATION_SCORES: usize = 20;

/// Linear interpolation between order statistics (`h = (n - 1) q`).
/// `sorted` must be ascending and non-empty.
pub fn quantile_type7(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultScore {
    pub value: f64,
    pub clamped: bool,
}

impl FaultScore {
    fn clamp(raw: f64) -> Self {
        if raw.is_finite() && raw <= SCORE_CLAMP {
            Self { value: raw, clamped: false }
        } else {
            Self {
                value: SCORE_CLAMP,
                clamped: true,
            }
        }
    }
}

/// `(1 - d) / d`.
pub fn fault_score_from_realness(d: f64) -> FaultScore {
    if d <= 0.0 {
        return FaultScore::clamp(f64::INFINITY);
    }
    FaultScore::clamp((1.0 - d) / d)
}

/// Same ratio computed from the logits, which stays accurate when `d` is close to 0 or 1.
pub fn fault_score_from_logits(class_logits: &[f64], fake_logit: f64) -> FaultScore {
    FaultScore::clamp((fake_logit - crate::ndcore::log_sum_exp(class_logits)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub tau: f64,
    pub target_fpr: f64,
    /// Share of calibration scores at or above `tau`.
    pub achieved_fpr: f64,
    pub flagged: bool,
}

/// `tau` = the `1 - target_fpr` quantile of normal-class fault scores.
pub fn calibrate_threshold(normal_scores: &[f64], target_fpr: f64) -> Result<Calibration> {
    if normal_scores.len() < MIN_CALIBRATION_SCORES {
        return Err(Error::invalid(format!(
            "calibration needs at least {MIN_CALIBRATION_SCORES} normal scores, got {}",
            normal_scores.len()
        )));
    }
    if !(target_fpr > 0.0 && target_fpr < 1.0) {
        return Err(Error::invalid(format!("target FPR must lie in (0, 1), got {target_fpr}")));
    }
    if normal_scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("calibration scores contain NaN"));
    }
    let mut sorted = normal_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tau = quantile_type7(&sorted, 1.0 - target_fpr);
    let above = sorted.iter().filter(|&&s| s >= tau).count();
    let achieved_fpr = above as f64 / sorted.len() as f64;
    Ok(Calibration {
        tau,
        target_fpr,
        achieved_fpr,
        flagged: achieved_fpr > target_fpr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Class(usize),
    Fake,
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c),
            Label::Fake => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub fault_score: FaultScore,
    pub discrimination: Discrimination,
}

impl Prediction {
    /// Softmax over the K class logits only.
    pub fn class_probs(&self) -> Vec<f64> {
        crate::ndcore::softmax(&self.discrimination.class_logits)
    }
}

/// Trained discriminator plus its calibrated threshold. Inputs are raw
/// features; the standardizer (when present) is applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultDetector {
    pub disc: DiscriminatorNet,
    pub standardizer: Option<Standardizer>,
    pub tau: f64,
    pub target_fpr: f64,
}

impl FaultDetector {
    pub fn new(disc: DiscriminatorNet, standardizer: Option<Standardizer>, tau: f64, target_fpr: f64) -> Result<Self> {
        if !tau.is_finite() {
            return Err(Error::invalid("threshold must be finite"));
        }
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(Error::invalid("target FPR must lie in (0, 1)"));
        }
        Ok(Self {
            disc,
            standardizer,
            tau,
            target_fpr,
        })
    }

    fn prepare(&self, x: &[f64]) -> Vec<f64> {
        match &self.standardizer {
            Some(s) if x.len() == s.mean.len() => s.transform_row(x),
            _ => x.to_vec(),
        }
    }

    pub fn discriminate(&self, x: &[f64]) -> Result<Discrimination> {
        self.disc.discriminate(&self.prepare(x))
    }

    /// Decision on an already-standardized input.
    pub fn predict_prepared(&self, x: &[f64]) -> Result<Prediction> {
        let d = self.disc.discriminate(x)?;
        let score = fault_score_from_logits(&d.class_logits, d.fake_logit);
        let best = d.best_class();
        let label = if score.value > self.tau && d.class_logits[best] < d.fake_logit {
            Label::Fake
        } else {
            Label::Class(best)
        };
        Ok(Prediction {
            label,
            fault_score: score,
            discrimination: d,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.predict_prepared(&self.prepare(x))
    }
}

pub fn fault_score(det: &FaultDetector, x: &[f64]) -> Result<FaultScore> {
    let d = det.discriminate(x)?;
    Ok(fault_score_from_logits(&d.class_logits, d.fake_logit))
}

pub fn classify(det: &FaultDetector, x: &[f64]) -> Result<Label> {
    det.predict(x).map(|p| p.label)
}

/// Share of generated samples (cycling over the fault classes) that the
/// detector labels fake. Generated samples live in standardized space.
pub fn fake_rejection_rate(det: &FaultDetector, gen: &GeneratorNet, latent: &LatentSource, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("fake rejection rate needs at least one sample"));
    }
    let k = gen.n_classes();
    let faults: Vec<usize> = (0..k).filter(|&c| c != NORMAL_CLASS).collect();
    let classes = if faults.is_empty() { vec![NORMAL_CLASS] } else { faults };
    let rejected = map_range(n, |i| -> Result<bool> {
        let c = classes[i % classes.len()];
        let z = latent.sample(c, &mut seeded(sub_seed(seed, i as u64)))?;
        let x = gen.generate(&z, c)?;
        Ok(det.predict_prepared(&x)?.label == Label::Fake)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(rejected.iter().filter(|&&r| r).count() as f64 / n as f64)
}
