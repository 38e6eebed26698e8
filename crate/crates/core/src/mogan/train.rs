use std::fmt::Write as _;

use rand::Rng as _;

use super::detector::{
    calibrate_threshold, fake_rejection_rate, fault_score_from_logits, quantile_type7, Calibration, FaultDetector, DEFAULT_TARGET_FPR,
    MIN_CALIBRATION_SCORES,
};
use super::latent::{fit_latent_stats, LatentSource, Projection};
use super::losses::{generator_objective, DensityPenalty};
use super::nets::{
    DiscGradients, DiscriminatorNet, GeneratorNet, DEFAULT_DISCRIMINATOR_HIDDEN, DEFAULT_GENERATOR_HIDDEN, DEFAULT_LATENT_DIM,
};
use super::mixture::DEFAULT_PI;
use crate::dataio::{stratified_split_indices, LabeledDataset, Standardizer, NORMAL_CLASS};
use crate::metrics::{confusion, confusion_with_fake, macro_g_mean};
use crate::ndcore::{adam_step, AdamConfig, AdamState, Network};
use crate::par::{chunked_reduce, map_range};
use crate::rng::{seeded, sub_seed, Rng};
use crate::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 100;
pub const DEFAULT_BATCH: usize = 64;
pub const DEFAULT_REFRESH: usize = 5;
pub const DEFAULT_PRETRAIN_EPOCHS: usize = 5;
pub const DEFAULT_VAL_FRAC: f64 = 0.15;

// sub-seed tags
const TAG_SPLIT: u64 = 1;
const TAG_GEN_INIT: u64 = 2;
const TAG_DISC_INIT: u64 = 3;
const TAG_PROJECTION: u64 = 4;
const TAG_BATCHES: u64 = 5;
const TAG_AUDIT: u64 = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub pi: f64,
    /// Latent statistics are refit every this many epochs.
    pub stats_refresh: usize,
    pub adam: AdamConfig,
    /// Weight of the low-density penalty; 0 disables it.
    pub density_weight: f64,
    pub density_quantile: f64,
    pub pretrain_epochs: usize,
    /// Share of each class held out for validation and threshold calibration.
    pub val_frac: f64,
    pub target_fpr: f64,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    /// Generated samples per epoch for the fake-rejection diagnostic.
    pub audit_samples: usize,
    /// Keep the networks from the epoch with the best validation G-mean
    /// (earliest on ties) instead of the last epoch.
    pub select_best: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH,
            latent_dim: DEFAULT_LATENT_DIM,
            pi: DEFAULT_PI,
            stats_refresh: DEFAULT_REFRESH,
            adam: AdamConfig::default(),
            density_weight: 0.0,
            density_quantile: 0.95,
            pretrain_epochs: DEFAULT_PRETRAIN_EPOCHS,
            val_frac: DEFAULT_VAL_FRAC,
            target_fpr: DEFAULT_TARGET_FPR,
            generator_hidden: DEFAULT_GENERATOR_HIDDEN.to_vec(),
            discriminator_hidden: DEFAULT_DISCRIMINATOR_HIDDEN.to_vec(),
            audit_samples: 64,
            select_best: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 2 {
            return bad("batch size must be at least 2");
        }
        if self.stats_refresh == 0 {
            return bad("stats refresh interval must be at least 1");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be positive");
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return bad("pi must lie in [0, 1]");
        }
        if !(self.density_weight >= 0.0) || !self.density_weight.is_finite() {
            return bad("density weight must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.density_quantile) {
            return bad("density quantile must lie in [0, 1]");
        }
        if !(self.val_frac >= 0.0 && self.val_frac < 1.0) {
            return bad("validation fraction must lie in [0, 1)");
        }
        if !(self.target_fpr > 0.0 && self.target_fpr < 1.0) {
            return bad("target FPR must lie in (0, 1)");
        }
        if self.discriminator_hidden.is_empty() || self.discriminator_hidden.contains(&0) || self.generator_hidden.contains(&0) {
            return bad("hidden widths must be positive and the discriminator needs at least one");
        }
        self.adam.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub val_g_mean: f64,
    pub fake_rejection: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,d_loss,g_loss,val_g_mean,fake_rejection";

    pub fn csv_row(r: &EpochRecord) -> String {
        format!(
            "{},{:.9},{:.9},{:.6},{:.6}",
            r.epoch, r.d_loss, r.g_loss, r.val_g_mean, r.fake_rejection
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{}", Self::csv_row(r));
        }
        out
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub detector: FaultDetector,
    pub generator: GeneratorNet,
    pub latent: LatentSource,
    pub projection: Projection,
    /// Per-class realness level at the target FPR quantile of the validation samples.
    pub deltas: Vec<f64>,
    pub calibration: Calibration,
    pub history: TrainHistory,
    pub config: TrainConfig,
}

impl TrainedModel {
    /// `n` generated rows for class `c` in raw feature space.
    pub fn synthesize(&self, c: usize, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = seeded(seed);
        (0..n)
            .map(|_| {
                let z = self.latent.sample(c, &mut rng)?;
                let x = self.generator.generate(&z, c)?;
                Ok(match &self.detector.standardizer {
                    Some(s) => s.inverse_row(&x),
                    None => x,
                })
            })
            .collect()
    }
}

/// Standardized fit and validation parts of a training set.
pub(crate) struct Prepared {
    pub fit: LabeledDataset,
    pub val: LabeledDataset,
    pub standardizer: Standardizer,
}

/// Holds out `val_frac` of every class when each class has at least three
/// samples; otherwise validation reuses the fit set.
pub(crate) fn prepare(ds: &LabeledDataset, val_frac: f64, seed: u64) -> Result<Prepared> {
    let counts = ds.class_counts();
    let (fit, val) = if val_frac > 0.0 && counts.iter().all(|&n| n >= 3) {
        let split = stratified_split_indices(ds, 1.0 - val_frac, sub_seed(seed, TAG_SPLIT))?;
        (ds.subset(&split.train), ds.subset(&split.test))
    } else {
        (ds.clone(), ds.clone())
    };
    let standardizer = Standardizer::fit(&fit);
    Ok(Prepared {
        fit: standardizer.transform(&fit),
        val: standardizer.transform(&val),
        standardizer,
    })
}

fn check_training_set(ds: &LabeledDataset) -> Result<()> {
    let counts = ds.class_counts();
    if counts[NORMAL_CLASS] == 0 {
        return Err(Error::invalid("training set has no normal samples"));
    }
    if counts.iter().skip(1).all(|&n| n == 0) {
        return Err(Error::invalid("training set needs at least one fault class"));
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::invalid(format!("class {c} needs at least 2 training samples")));
    }
    Ok(())
}

enum DInput {
    Row(usize),
    Generated(Vec<f64>, usize),
}

struct DItem {
    input: DInput,
    target: usize,
}

fn disc_step(disc: &DiscriminatorNet, gen: &GeneratorNet, fit: &LabeledDataset, items: &[DItem]) -> Result<(f64, DiscGradients)> {
    let (loss, mut grads) = chunked_reduce(
        items.len(),
        || Ok((0.0, DiscGradients::zeros_like(disc))),
        |acc: &mut Result<(f64, DiscGradients)>, i| {
            let Ok((l, g)) = acc else { return };
            let item = &items[i];
            let r = match &item.input {
                DInput::Row(r) => disc.cross_entropy_grad(fit.row(*r), item.target, g),
                DInput::Generated(z, c) => gen
                    .generate(z, *c)
                    .and_then(|x| disc.cross_entropy_grad(&x, item.target, g)),
            };
            match r {
                Ok(v) => *l += v,
                Err(e) => *acc = Err(e),
            }
        },
        |a, b| match (a.as_mut(), b) {
            (Ok((la, ga)), Ok((lb, gb))) => {
                *la += lb;
                ga.add_assign(&gb);
            }
            (Ok(_), Err(e)) => *a = Err(e),
            _ => {}
        },
    )?;
    let n = items.len() as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, grads))
}

pub(crate) fn apply(net: &mut Network, grads: &crate::ndcore::Gradients, state: &mut AdamState, epoch: usize) -> Result<()> {
    net.zero_grad();
    net.accumulate(grads);
    adam_step(net, state).map_err(|e| match e {
        Error::NonFiniteGradient { .. } => Error::Diverged { epoch },
        other => other,
    })
}

fn pick<T: Copy>(rng: &mut Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

/// Macro G-mean of argmax class predictions.
pub(crate) fn validation_g_mean(disc: &DiscriminatorNet, val: &LabeledDataset) -> Result<f64> {
    let preds = map_range(val.n_samples(), |i| disc.discriminate(val.row(i)).map(|d| d.best_class()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(macro_g_mean(&confusion(val.labels(), &preds, val.n_classes())?))
}

/// Normal-class fault scores on the validation split, or on every normal
/// sample of both splits when validation alone has too few.
fn calibration_scores(disc: &DiscriminatorNet, fit: &LabeledDataset, val: &LabeledDataset) -> Result<Vec<f64>> {
    let score = |x: &[f64]| disc.discriminate(x).map(|d| fault_score_from_logits(&d.class_logits, d.fake_logit).value);
    let rows = val.indices_of(NORMAL_CLASS);
    let mut scores = map_range(rows.len(), |j| score(val.row(rows[j]))).into_iter().collect::<Result<Vec<_>>>()?;
    if scores.len() < MIN_CALIBRATION_SCORES {
        let extra = fit.indices_of(NORMAL_CLASS);
        scores.extend(map_range(extra.len(), |j| score(fit.row(extra[j]))).into_iter().collect::<Result<Vec<_>>>()?);
    }
    Ok(scores)
}

fn calibrate(disc: &DiscriminatorNet, fit: &LabeledDataset, val: &LabeledDataset, target_fpr: f64) -> Result<Calibration> {
    let scores = calibration_scores(disc, fit, val)?;
    if scores.len() >= MIN_CALIBRATION_SCORES {
        return calibrate_threshold(&scores, target_fpr);
    }
    // too few normal samples: fall back to the p_r = p_g indifference point
    Ok(Calibration {
        tau: 1.0,
        target_fpr,
        achieved_fpr: f64::NAN,
        flagged: true,
    })
}

/// Macro G-mean of the full detector decision (fake predictions count as misses).
fn detector_g_mean(disc: &DiscriminatorNet, fit: &LabeledDataset, val: &LabeledDataset, target_fpr: f64) -> Result<f64> {
    let tau = calibrate(disc, fit, val, target_fpr)?.tau;
    let det = FaultDetector::new(disc.clone(), None, tau, target_fpr)?;
    let preds = map_range(val.n_samples(), |i| det.predict_prepared(val.row(i)).map(|p| p.label.class()))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(macro_g_mean(&confusion_with_fake(val.labels(), &preds, val.n_classes())?))
}

pub fn train(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with_observer(ds, cfg, |_| {})
}

/// [`train`] that reports every finished epoch to `observer` as it happens,
/// so callers keep the partial history when a later epoch diverges.
pub fn train_with_observer(ds: &LabeledDataset, cfg: &TrainConfig, mut observer: impl FnMut(&EpochRecord)) -> Result<TrainedModel> {
    cfg.validate()?;
    check_training_set(ds)?;
    let Prepared { fit, val, standardizer } = prepare(ds, cfg.val_frac, cfg.seed)?;
    let k = ds.n_classes();
    let width = ds.n_features();

    let mut gen = GeneratorNet::for_width(
        cfg.latent_dim,
        k,
        width,
        &cfg.generator_hidden,
        &mut seeded(sub_seed(cfg.seed, TAG_GEN_INIT)),
    )?;
    let mut disc = DiscriminatorNet::mlp(width, k, &cfg.discriminator_hidden, &mut seeded(sub_seed(cfg.seed, TAG_DISC_INIT)))?;
    let projection = Projection::random(disc.embed_dim(), cfg.latent_dim, sub_seed(cfg.seed, TAG_PROJECTION))?;
    let mut st_gen = AdamState::new(gen.network(), cfg.adam)?;
    let mut st_body = AdamState::new(disc.body(), cfg.adam)?;
    let mut st_head = AdamState::new(disc.head(), cfg.adam)?;
    let mut latent = LatentSource::StandardNormal { dim: cfg.latent_dim };
    let mut density: Option<DensityPenalty> = None;
    let mut rng = seeded(sub_seed(cfg.seed, TAG_BATCHES));

    let by_class: Vec<Vec<usize>> = (0..k).map(|c| fit.indices_of(c)).collect();
    let faults: Vec<usize> = (0..k).filter(|&c| c != NORMAL_CLASS && !by_class[c].is_empty()).collect();
    let per_class = (cfg.batch_size / faults.len()).max(2);
    // the fake target gets one class's share of the discriminator batch
    let mixture_len = (cfg.batch_size / k).max(1);

    // generator warm-up against real fault samples
    let fault_total: usize = faults.iter().map(|&c| by_class[c].len()).sum();
    for _ in 0..cfg.pretrain_epochs {
        for _ in 0..fault_total.div_ceil(cfg.batch_size) {
            let mut total = crate::ndcore::Gradients::zeros_like(gen.network());
            for &c in &faults {
                let real: Vec<&[f64]> = (0..per_class).map(|_| fit.row(pick(&mut rng, &by_class[c]))).collect();
                let latents = (0..per_class)
                    .map(|_| latent.sample(c, &mut rng).map(|z| (z, c)))
                    .collect::<Result<Vec<_>>>()?;
                let obj = generator_objective(&gen, &disc, &real, &latents, None)?;
                total.add_assign(&obj.grads);
            }
            total.scale(1.0 / faults.len() as f64);
            apply(gen.network_mut(), &total, &mut st_gen, 0)?;
        }
    }

    let mut history = TrainHistory::default();
    let mut best: Option<(f64, DiscriminatorNet, GeneratorNet, LatentSource)> = None;
    let iters = fit.n_samples().div_ceil(cfg.batch_size);
    let classes: Vec<usize> = (0..k).filter(|&c| !by_class[c].is_empty()).collect();
    for epoch in 1..=cfg.epochs {
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        for _ in 0..iters {
            // discriminator: class-balanced real batch plus a mixture batch
            let mut items = Vec::with_capacity(2 * cfg.batch_size);
            for _ in 0..cfg.batch_size {
                let c = pick(&mut rng, &classes);
                items.push(DItem {
                    input: DInput::Row(pick(&mut rng, &by_class[c])),
                    target: c,
                });
            }
            for i in 0..mixture_len {
                let c = faults[i % faults.len()];
                if rng.random::<f64>() < cfg.pi {
                    items.push(DItem {
                        input: DInput::Row(pick(&mut rng, &by_class[NORMAL_CLASS])),
                        target: NORMAL_CLASS,
                    });
                } else {
                    items.push(DItem {
                        input: DInput::Generated(latent.sample(c, &mut rng)?, c),
                        target: disc.fake_index(),
                    });
                }
            }
            let (d_loss, d_grads) = disc_step(&disc, &gen, &fit, &items)?;
            if !d_loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            apply(disc.body_mut(), &d_grads.body, &mut st_body, epoch)?;
            apply(disc.head_mut(), &d_grads.head, &mut st_head, epoch)?;
            d_sum += d_loss;

            // generator: per fault class, match real class + majority draws
            let mut total = crate::ndcore::Gradients::zeros_like(gen.network());
            let mut g_loss = 0.0;
            let mut used = 0;
            for &c in &faults {
                let mut real: Vec<&[f64]> = (0..per_class).map(|_| fit.row(pick(&mut rng, &by_class[c]))).collect();
                let mut latents = Vec::new();
                for _ in 0..per_class {
                    if rng.random::<f64>() < cfg.pi {
                        real.push(fit.row(pick(&mut rng, &by_class[NORMAL_CLASS])));
                    } else {
                        latents.push((latent.sample(c, &mut rng)?, c));
                    }
                }
                if latents.is_empty() {
                    continue;
                }
                let pen = density.as_ref().map(|p| (p, cfg.density_weight));
                let obj = generator_objective(&gen, &disc, &real, &latents, pen)?;
                g_loss += obj.loss;
                total.add_assign(&obj.grads);
                used += 1;
            }
            if used > 0 {
                if !g_loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                total.scale(1.0 / used as f64);
                apply(gen.network_mut(), &total, &mut st_gen, epoch)?;
                g_sum += g_loss / used as f64;
            }
        }

        if epoch % cfg.stats_refresh == 0 {
            let embs = map_range(fit.n_samples(), |i| disc.embed(fit.row(i)))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            if embs.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            let grouped: Vec<Vec<Vec<f64>>> = by_class
                .iter()
                .map(|rows| rows.iter().map(|&r| projection.apply(&embs[r])).collect())
                .collect();
            latent = LatentSource::Fitted(fit_latent_stats(&grouped)?);
            if cfg.density_weight > 0.0 {
                let majority: Vec<Vec<f64>> = by_class[NORMAL_CLASS].iter().map(|&r| embs[r].clone()).collect();
                density = Some(DensityPenalty::fit(&majority, cfg.density_quantile)?);
            }
        }

        let audit = FaultDetector::new(disc.clone(), None, 0.0, cfg.target_fpr)?;
        let record = EpochRecord {
            epoch,
            d_loss: d_sum / iters as f64,
            g_loss: g_sum / iters as f64,
            val_g_mean: detector_g_mean(&disc, &fit, &val, cfg.target_fpr)?,
            fake_rejection: if cfg.audit_samples > 0 {
                fake_rejection_rate(&audit, &gen, &latent, cfg.audit_samples, sub_seed(cfg.seed, TAG_AUDIT ^ ((epoch as u64) << 8)))?
            } else {
                0.0
            },
        };
        if !cfg.select_best || best.as_ref().is_none_or(|b| record.val_g_mean > b.0) {
            best = Some((record.val_g_mean, disc.clone(), gen.clone(), latent.clone()));
        }
        observer(&record);
        history.records.push(record);
    }
    let (_, disc, gen, latent) = best.expect("at least one epoch");

    let preds = map_range(val.n_samples(), |i| disc.discriminate(val.row(i)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let calibration = calibrate(&disc, &fit, &val, cfg.target_fpr)?;
    if calibration.flagged {
        log::warn!(
            "threshold calibration flagged: achieved FPR {} for target {}",
            calibration.achieved_fpr,
            cfg.target_fpr
        );
    }
    let deltas = (0..k)
        .map(|c| {
            let mut d: Vec<f64> = preds
                .iter()
                .zip(val.labels())
                .filter(|(_, &y)| y == c)
                .map(|(p, _)| p.realness)
                .collect();
            if d.is_empty() {
                return 0.5;
            }
            d.sort_by(f64::total_cmp);
            quantile_type7(&d, cfg.target_fpr)
        })
        .collect();
    Ok(TrainedModel {
        detector: FaultDetector::new(disc, Some(standardizer), calibration.tau, cfg.target_fpr)?,
        generator: gen,
        latent,
        projection,
        deltas,
        calibration,
        history,
        config: cfg.clone(),
    })
}
