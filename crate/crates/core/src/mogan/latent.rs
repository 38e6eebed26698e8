use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::seeded;
use crate::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Per-class diagonal Gaussian over the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassLatent {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentStats {
    classes: Vec<ClassLatent>,
}

impl LatentStats {
    pub fn from_parts(classes: Vec<ClassLatent>) -> Result<Self> {
        let dim = classes.first().map(|c| c.mean.len()).ok_or(Error::NoSamples)?;
        for c in &classes {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(Error::invalid("latent statistics have inconsistent dimensions"));
            }
            if c.var.iter().any(|&v| !(v >= VARIANCE_FLOOR) || !v.is_finite()) || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::invalid("latent variances must be finite and at least the floor"));
            }
        }
        Ok(Self { classes })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn dim(&self) -> usize {
        self.classes[0].mean.len()
    }

    pub fn class(&self, c: usize) -> Result<&ClassLatent> {
        self.classes.get(c).ok_or(Error::ClassOutOfRange {
            class: c,
            classes: self.classes.len(),
        })
    }

    pub fn classes(&self) -> &[ClassLatent] {
        &self.classes
    }

    /// `mu_c + sqrt(sigma_c) * noise` for a given standard-normal vector.
    pub fn transform(&self, c: usize, noise: &[f64]) -> Result<Vec<f64>> {
        let s = self.class(c)?;
        if noise.len() != s.mean.len() {
            return Err(Error::invalid("noise vector has the wrong dimension"));
        }
        Ok(s.mean.iter().zip(&s.var).zip(noise).map(|((m, v), n)| m + v.sqrt() * n).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Result<Vec<f64>> {
        let noise = standard_normal(self.class(c)?.mean.len(), rng);
        self.transform(c, &noise)
    }
}

pub(crate) fn standard_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Per-class mean and floored population variance. `embeddings_by_class[c]`
/// holds the (already projected) vectors of class `c`.
pub fn fit_latent_stats(embeddings_by_class: &[Vec<Vec<f64>>]) -> Result<LatentStats> {
    let mut classes = Vec::with_capacity(embeddings_by_class.len());
    for (c, rows) in embeddings_by_class.iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::invalid(format!(
                "class {c} has {} embedding(s); at least 2 are needed",
                rows.len()
            )));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::invalid(format!("class {c} embeddings differ in length")));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s = (*s / n).max(VARIANCE_FLOOR));
        classes.push(ClassLatent { mean, var });
    }
    LatentStats::from_parts(classes)
}

/// One latent draw for class `c`, fully determined by `seed`.
pub fn sample_latent(stats: &LatentStats, c: usize, seed: u64) -> Result<Vec<f64>> {
    stats.sample(c, &mut seeded(seed))
}

/// Where generator latents come from: standard normal until statistics have
/// been fitted, then the per-class Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentSource {
    StandardNormal { dim: usize },
    Fitted(LatentStats),
}

impl LatentSource {
    pub fn dim(&self) -> usize {
        match self {
            LatentSource::StandardNormal { dim } => *dim,
            LatentSource::Fitted(s) => s.dim(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, c: usize, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            LatentSource::StandardNormal { dim } => Ok(standard_normal(*dim, rng)),
            LatentSource::Fitted(s) => s.sample(c, rng),
        }
    }
}

/// Fixed random linear map from embedding space to latent space, entries
/// N(0, 1/embed_dim).
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl Projection {
    pub fn random(embed_dim: usize, latent_dim: usize, seed: u64) -> Result<Self> {
        if embed_dim == 0 || latent_dim == 0 {
            return Err(Error::invalid("projection dimensions must be positive"));
        }
        let mut rng = seeded(seed);
        let scale = 1.0 / (embed_dim as f64).sqrt();
        let weights = standard_normal(embed_dim * latent_dim, &mut rng).into_iter().map(|w| w * scale).collect();
        Ok(Self {
            rows: latent_dim,
            cols: embed_dim,
            weights,
        })
    }

    pub fn from_parts(latent_dim: usize, embed_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != latent_dim * embed_dim || weights.is_empty() {
            return Err(Error::invalid("projection weight count does not match its shape"));
        }
        Ok(Self {
            rows: latent_dim,
            cols: embed_dim,
            weights,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.rows
    }

    pub fn embed_dim(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, e: &[f64]) -> Vec<f64> {
        self.weights.chunks(self.cols).map(|row| crate::ndcore::dot(row, e)).collect()
    }
}
