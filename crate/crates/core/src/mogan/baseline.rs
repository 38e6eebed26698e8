use rand::seq::SliceRandom;

use super::nets::DiscriminatorNet;
use super::train::{apply, prepare, validation_g_mean, TrainConfig};
use crate::dataio::{LabeledDataset, Standardizer};
use crate::ndcore::{softmax, AdamState};
use crate::par::chunked_reduce;
use crate::rng::{seeded, sub_seed};
use crate::{Error, Result};

const TAG_INIT: u64 = 3;
const TAG_ORDER: u64 = 15;

/// Plain K-way classifier with the discriminator architecture, trained by
/// cross-entropy on the data as given (no fake class is ever targeted).
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub net: DiscriminatorNet,
    pub standardizer: Standardizer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub val_g_mean: f64,
}

impl Classifier {
    /// Softmax over the K class logits.
    pub fn class_probs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.net.discriminate(&self.standardizer.transform_row(x))?;
        Ok(softmax(&d.class_logits))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.net.discriminate(&self.standardizer.transform_row(x))?.best_class())
    }
}

/// Trains on shuffled passes over `ds` with the same epochs, batch size,
/// optimizer and validation hold-out as the adversarial model.
pub fn train_classifier(ds: &LabeledDataset, cfg: &TrainConfig) -> Result<(Classifier, Vec<ClassifierEpoch>)> {
    cfg.validate()?;
    let prep = prepare(ds, cfg.val_frac, cfg.seed)?;
    let fit = &prep.fit;
    let k = ds.n_classes();
    let mut net = DiscriminatorNet::mlp(ds.n_features(), k, &cfg.discriminator_hidden, &mut seeded(sub_seed(cfg.seed, TAG_INIT)))?;
    let mut st_body = AdamState::new(net.body(), cfg.adam)?;
    let mut st_head = AdamState::new(net.head(), cfg.adam)?;
    let mut rng = seeded(sub_seed(cfg.seed, TAG_ORDER));
    let mut order: Vec<usize> = (0..fit.n_samples()).collect();
    let mut history: Vec<ClassifierEpoch> = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, DiscriminatorNet)> = None;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let batches = order.chunks(cfg.batch_size).count();
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grads) = chunked_reduce(
                batch.len(),
                || Ok((0.0, super::nets::DiscGradients::zeros_like(&net))),
                |acc: &mut Result<(f64, super::nets::DiscGradients)>, i| {
                    let Ok((l, g)) = acc else { return };
                    let r = batch[i];
                    match net.cross_entropy_grad(fit.row(r), fit.label(r), g) {
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
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            grads.scale(1.0 / batch.len() as f64);
            apply(net.body_mut(), &grads.body, &mut st_body, epoch)?;
            apply(net.head_mut(), &grads.head, &mut st_head, epoch)?;
            loss_sum += loss / batch.len() as f64;
        }
        let val_g_mean = validation_g_mean(&net, &prep.val)?;
        if !cfg.select_best || best.as_ref().is_none_or(|b| val_g_mean > b.0) {
            best = Some((val_g_mean, net.clone()));
        }
        history.push(ClassifierEpoch {
            epoch,
            loss: loss_sum / batches as f64,
            val_g_mean,
        });
    }
    let (_, net) = best.expect("at least one epoch");
    Ok((
        Classifier {
            net,
            standardizer: prep.standardizer,
        },
        history,
    ))
}
