use super::detector::quantile_type7;
use super::nets::{DiscriminatorNet, GeneratorNet};
use crate::ndcore::{Gradients, Tape, Tensor};
use crate::par::{chunked_reduce, map_range};
use crate::{Error, Result};

fn mean_embedding(disc: &DiscriminatorNet, batch: &[&[f64]]) -> Result<Vec<f64>> {
    let dim = disc.embed_dim();
    let sum = chunked_reduce(
        batch.len(),
        || Ok(vec![0.0; dim]),
        |acc: &mut Result<Vec<f64>>, i| {
            if let Ok(a) = acc {
                match disc.embed(batch[i]) {
                    Ok(e) => a.iter_mut().zip(e).for_each(|(s, v)| *s += v),
                    Err(err) => *acc = Err(err),
                }
            }
        },
        merge_vec,
    )?;
    let n = batch.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn merge_vec(a: &mut Result<Vec<f64>>, b: Result<Vec<f64>>) {
    match (a.as_mut(), b) {
        (Ok(x), Ok(y)) => x.iter_mut().zip(y).for_each(|(s, v)| *s += v),
        (Ok(_), Err(e)) => *a = Err(e),
        _ => {}
    }
}

fn check_batches(real: usize, fake: usize) -> Result<()> {
    if real == 0 || fake == 0 {
        return Err(Error::invalid("feature matching needs non-empty real and fake batches"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatching {
    pub loss: f64,
    /// d loss / d x for every fake input.
    pub fake_input_grads: Vec<Vec<f64>>,
}

/// `|| mean f(real) - mean f(fake) ||^2` over discriminator embeddings, with
/// gradients for the fake inputs only.
pub fn feature_matching_loss(disc: &DiscriminatorNet, real: &[&[f64]], fake: &[&[f64]]) -> Result<FeatureMatching> {
    check_batches(real.len(), fake.len())?;
    let m_real = mean_embedding(disc, real)?;
    let tapes = map_range(fake.len(), |j| disc.body_tape(fake[j])).into_iter().collect::<Result<Vec<_>>>()?;
    let m_fake = tape_mean(&tapes, |t| t);
    let (loss, up) = fm_upstream(&m_real, &m_fake, fake.len());
    let fake_input_grads = map_range(tapes.len(), |j| disc.embedding_input_grad(&tapes[j], &up))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(FeatureMatching { loss, fake_input_grads })
}

fn tape_mean<T>(items: &[T], tape: impl Fn(&T) -> &Tape) -> Vec<f64> {
    let mut m = vec![0.0; tape(&items[0]).output().len()];
    for it in items {
        m.iter_mut().zip(tape(it).output().data()).for_each(|(s, v)| *s += v);
    }
    let n = items.len() as f64;
    m.iter_mut().for_each(|s| *s /= n);
    m
}

/// Loss and the per-fake embedding gradient `2 (m_fake - m_real) / n_fake`.
fn fm_upstream(m_real: &[f64], m_fake: &[f64], n_fake: usize) -> (f64, Vec<f64>) {
    let diff: Vec<f64> = m_fake.iter().zip(m_real).map(|(f, r)| f - r).collect();
    let loss = diff.iter().map(|d| d * d).sum();
    let scale = 2.0 / n_fake as f64;
    (loss, diff.into_iter().map(|d| d * scale).collect())
}

/// Result of one generator objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorObjective {
    pub fm_loss: f64,
    pub penalty: f64,
    /// Total loss: `fm_loss + weight * penalty`.
    pub loss: f64,
    pub grads: Gradients,
}

/// Feature matching between `real` and `G(z_j, c_j)` (plus an optional weighted
/// low-density penalty on the fake embeddings), differentiated through the
/// discriminator body into the generator parameters only.
pub fn generator_objective(
    gen: &GeneratorNet,
    disc: &DiscriminatorNet,
    real: &[&[f64]],
    latents: &[(Vec<f64>, usize)],
    penalty: Option<(&DensityPenalty, f64)>,
) -> Result<GeneratorObjective> {
    check_batches(real.len(), latents.len())?;
    let m_real = mean_embedding(disc, real)?;
    let tapes = map_range(latents.len(), |j| {
        let (z, c) = &latents[j];
        let g = gen.generate_tape(z, *c)?;
        let b = disc.body_tape(g.output().data())?;
        Ok((g, b))
    })
    .into_iter()
    .collect::<Result<Vec<(Tape, Tape)>>>()?;
    let n = latents.len();
    let m_fake = tape_mean(&tapes, |t| &t.1);
    let (fm_loss, up) = fm_upstream(&m_real, &m_fake, n);
    let mut pen_value = 0.0;
    let mut pen_grads: Option<Vec<Vec<f64>>> = None;
    if let Some((p, w)) = penalty {
        if w != 0.0 {
            let embs: Vec<&[f64]> = tapes.iter().map(|t| t.1.output().data()).collect();
            let (v, g) = p.value_and_grads(&embs)?;
            pen_value = v;
            pen_grads = Some(g.into_iter().map(|row| row.into_iter().map(|x| x * w).collect()).collect());
        }
    }
    let weight = penalty.map_or(0.0, |(_, w)| w);
    let grads = chunked_reduce(
        n,
        || Ok(Gradients::zeros_like(gen.network())),
        |acc: &mut Result<Gradients>, j| {
            let Ok(g) = acc else { return };
            let mut upstream = up.clone();
            if let Some(pg) = &pen_grads {
                upstream.iter_mut().zip(&pg[j]).for_each(|(u, p)| *u += p);
            }
            let step = disc.embedding_input_grad(&tapes[j].1, &upstream).and_then(|dx| {
                let dx = Tensor::new(tapes[j].0.output().shape().to_vec(), dx)?;
                gen.network().backward_tape(&tapes[j].0, &dx, Some(g))
            });
            if let Err(e) = step {
                *acc = Err(e);
            }
        },
        |a, b| match (a.as_mut(), b) {
            (Ok(x), Ok(y)) => x.add_assign(&y),
            (Ok(_), Err(e)) => *a = Err(e),
            _ => {}
        },
    )?;
    Ok(GeneratorObjective {
        fm_loss,
        penalty: pen_value,
        loss: fm_loss + weight * pen_value,
        grads,
    })
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagGaussian {
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((m, v), xi) in self.mean.iter().zip(&self.var).zip(x) {
            let d = xi - m;
            acc += LN_2PI + v.ln() + d * d / v;
        }
        -0.5 * acc
    }

    /// Gradient of the log density.
    pub fn log_density_grad(&self, x: &[f64]) -> Vec<f64> {
        self.mean.iter().zip(&self.var).zip(x).map(|((m, v), xi)| -(xi - m) / v).collect()
    }
}

/// Gaussian components over embeddings with a hard (argmax-density) readout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianEmbeddingModel {
    components: Vec<DiagGaussian>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingScore {
    pub component: usize,
    pub log_density: f64,
    pub density: f64,
}

impl GaussianEmbeddingModel {
    /// One component per group, population variance floored at 1e-6.
    pub fn fit(groups: &[Vec<Vec<f64>>]) -> Result<Self> {
        let stats = super::latent::fit_latent_stats(groups)?;
        Ok(Self {
            components: stats
                .classes()
                .iter()
                .map(|c| DiagGaussian {
                    mean: c.mean.clone(),
                    var: c.var.clone(),
                })
                .collect(),
        })
    }

    pub fn from_components(components: Vec<DiagGaussian>) -> Self {
        Self { components }
    }

    pub fn components(&self) -> &[DiagGaussian] {
        &self.components
    }

    pub fn is_fitted(&self) -> bool {
        !self.components.is_empty()
    }
}

/// Picks the component with the highest density (lowest index on ties).
pub fn gaussian_embedding_score(model: &GaussianEmbeddingModel, e: &[f64]) -> Result<EmbeddingScore> {
    if !model.is_fitted() {
        return Err(Error::NotFitted);
    }
    let mut best = EmbeddingScore {
        component: 0,
        log_density: f64::NEG_INFINITY,
        density: 0.0,
    };
    for (i, c) in model.components.iter().enumerate() {
        if c.mean.len() != e.len() {
            return Err(Error::invalid("embedding dimension does not match the model"));
        }
        let ld = c.log_density(e);
        if i == 0 || ld > best.log_density {
            best = EmbeddingScore {
                component: i,
                log_density: ld,
                density: ld.exp(),
            };
        }
    }
    Ok(best)
}

/// Majority-density model plus the log threshold `log delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPenalty {
    pub model: GaussianEmbeddingModel,
    pub log_delta: f64,
}

impl DensityPenalty {
    /// Fits one Gaussian on `majority` and sets `delta` to the `quantile`
    /// level of the real majority densities.
    pub fn fit(majority: &[Vec<f64>], quantile: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&quantile) {
            return Err(Error::invalid("density quantile must lie in [0, 1]"));
        }
        let model = GaussianEmbeddingModel::fit(&[majority.to_vec()])?;
        let mut lds: Vec<f64> = majority.iter().map(|e| model.components[0].log_density(e)).collect();
        lds.sort_by(f64::total_cmp);
        Ok(Self {
            model,
            log_delta: quantile_type7(&lds, quantile),
        })
    }

    /// Mean of `max(0, log p(e) - log delta)` and its gradient per embedding.
    pub fn value_and_grads(&self, embeddings: &[&[f64]]) -> Result<(f64, Vec<Vec<f64>>)> {
        if embeddings.is_empty() {
            return Err(Error::NoSamples);
        }
        let n = embeddings.len() as f64;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            let s = gaussian_embedding_score(&self.model, e)?;
            let excess = s.log_density - self.log_delta;
            if excess > 0.0 {
                total += excess;
                let g = self.model.components[s.component].log_density_grad(e);
                grads.push(g.into_iter().map(|v| v / n).collect());
            } else {
                grads.push(vec![0.0; e.len()]);
            }
        }
        Ok((total / n, grads))
    }
}

pub fn low_density_penalty(penalty: &DensityPenalty, fake_embeddings: &[&[f64]]) -> Result<f64> {
    penalty.value_and_grads(fake_embeddings).map(|(v, _)| v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn disc() -> DiscriminatorNet {
        DiscriminatorNet::mlp(5, 2, &[6, 4], &mut seeded(3)).unwrap()
    }

    fn rows(seed: u64, n: usize) -> Vec<Vec<f64>> {
        let mut rng = seeded(seed);
        (0..n).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn fm_zero_for_same_batch() {
        let d = disc();
        let r = rows(1, 6);
        let fm = feature_matching_loss(&d, &refs(&r), &refs(&r)).unwrap();
        assert!(fm.loss.abs() < 1e-24);
        assert!(feature_matching_loss(&d, &[], &refs(&r)).is_err());
    }

    #[test]
    fn fm_symmetric() {
        let d = disc();
        let (a, b) = (rows(1, 5), rows(2, 7));
        let ab = feature_matching_loss(&d, &refs(&a), &refs(&b)).unwrap().loss;
        let ba = feature_matching_loss(&d, &refs(&b), &refs(&a)).unwrap().loss;
        assert!(ab > 0.0);
        assert!((ab - ba).abs() <= 1e-15 * ab.max(1.0));
    }

    #[test]
    fn fm_constant_offset() {
        let m_real = vec![1.0, 2.0, -1.0];
        let v = [0.5, -0.25, 2.0];
        let m_fake: Vec<f64> = m_real.iter().zip(v).map(|(a, b)| a + b).collect();
        let (loss, _) = fm_upstream(&m_real, &m_fake, 3);
        assert!((loss - v.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_score_picks_component() {
        let m = GaussianEmbeddingModel::fit(&[
            vec![vec![0.0, 0.0], vec![0.2, -0.2], vec![-0.2, 0.2]],
            vec![vec![10.0, 10.0], vec![10.2, 9.8], vec![9.8, 10.2]],
        ])
        .unwrap();
        let s = gaussian_embedding_score(&m, &[0.0, 0.0]).unwrap();
        assert_eq!(s.component, 0);
        assert!(s.density > 0.0 && s.density.is_finite());
        assert_eq!(gaussian_embedding_score(&m, &[10.0, 10.0]).unwrap().component, 1);
        let sym = GaussianEmbeddingModel::from_components(vec![
            DiagGaussian { mean: vec![-1.0], var: vec![1.0] },
            DiagGaussian { mean: vec![1.0], var: vec![1.0] },
        ]);
        assert_eq!(gaussian_embedding_score(&sym, &[0.0]).unwrap().component, 0);
        assert!(matches!(
            gaussian_embedding_score(&GaussianEmbeddingModel::default(), &[0.0]),
            Err(Error::NotFitted)
        ));
    }

    #[test]
    fn penalty_at_mode_and_far_away() {
        let maj = rows(5, 200);
        let p = DensityPenalty::fit(&maj, 0.95).unwrap();
        let mode = p.model.components()[0].mean.clone();
        assert!(low_density_penalty(&p, &[&mode]).unwrap() > 0.0);
        let far = vec![50.0; 5];
        assert_eq!(low_density_penalty(&p, &[&far, &far]).unwrap(), 0.0);
    }
}
