use rand::Rng;

use super::latent::LatentSource;
use super::nets::GeneratorNet;
use crate::dataio::{LabeledDataset, NORMAL_CLASS};
use crate::rng::seeded;
use crate::{Error, Result};

pub const DEFAULT_PI: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureConfig {
    /// Probability that a minority batch element is a real majority sample.
    pub pi: f64,
    /// Per-class realness thresholds.
    pub deltas: Vec<f64>,
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            pi: DEFAULT_PI,
            deltas: Vec::new(),
        }
    }
}

impl MixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(Error::invalid(format!("pi must lie in [0, 1], got {}", self.pi)));
        }
        if self.deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
            return Err(Error::invalid("every delta must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Origin of one mixture element before it is materialized.
#[derive(Debug, Clone, PartialEq)]
pub enum Draw {
    /// Row index into the dataset (a majority-class sample).
    Majority(usize),
    /// Latent vector for the generator.
    Generated(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    RealMajority,
    Generated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureItem {
    pub features: Vec<f64>,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBatch {
    pub class: usize,
    pub items: Vec<MixtureItem>,
}

impl MixtureBatch {
    pub fn count(&self, origin: Origin) -> usize {
        self.items.iter().filter(|i| i.origin == origin).count()
    }
}

/// Draws the origins of `n` mixture elements for fault class `c`.
pub fn mixture_draws<R: Rng + ?Sized>(
    majority_rows: &[usize],
    latent: &LatentSource,
    pi: f64,
    c: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Draw>> {
    if majority_rows.is_empty() {
        return Err(Error::invalid("majority class is empty"));
    }
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < pi {
                Ok(Draw::Majority(majority_rows[rng.random_range(0..majority_rows.len())]))
            } else {
                latent.sample(c, rng).map(Draw::Generated)
            }
        })
        .collect()
}

/// Minority batch from `pi * f_majority + (1 - pi) * G(., c)`.
pub fn mixture_minority_batch(
    ds: &LabeledDataset,
    gen: &GeneratorNet,
    latent: &LatentSource,
    cfg: &MixtureConfig,
    c: usize,
    n: usize,
    seed: u64,
) -> Result<MixtureBatch> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::invalid("mixture batch size must be at least 1"));
    }
    if c == NORMAL_CLASS || c >= ds.n_classes() {
        return Err(Error::invalid(format!("class {c} is not a fault class")));
    }
    let draws = mixture_draws(&ds.indices_of(NORMAL_CLASS), latent, cfg.pi, c, n, &mut seeded(seed))?;
    let items = draws
        .into_iter()
        .map(|d| match d {
            Draw::Majority(i) => Ok(MixtureItem {
                features: ds.row(i).to_vec(),
                origin: Origin::RealMajority,
            }),
            Draw::Generated(z) => Ok(MixtureItem {
                features: gen.generate(&z, c)?,
                origin: Origin::Generated,
            }),
        })
        .collect::<Result<_>>()?;
    Ok(MixtureBatch { class: c, items })
}
