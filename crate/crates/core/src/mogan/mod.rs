//! Class-conditioned GAN with a K+1-way discriminator used as a fault detector.

mod baseline;
mod checkpoint;
mod detector;
mod latent;
mod losses;
mod mixture;
mod nets;
mod train;

pub use baseline::{train_classifier, Classifier, ClassifierEpoch};
pub use checkpoint::{load_checkpoint, parse_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use detector::{
    calibrate_threshold, classify, fake_rejection_rate, fault_score, fault_score_from_logits, fault_score_from_realness,
    quantile_type7, Calibration, FaultDetector, FaultScore, Label, Prediction, DEFAULT_TARGET_FPR, MIN_CALIBRATION_SCORES,
    SCORE_CLAMP,
};
pub use latent::{fit_latent_stats, sample_latent, ClassLatent, LatentSource, LatentStats, Projection, VARIANCE_FLOOR};
pub use losses::{
    feature_matching_loss, gaussian_embedding_score, generator_objective, low_density_penalty, DensityPenalty, DiagGaussian,
    EmbeddingScore, FeatureMatching, GaussianEmbeddingModel, GeneratorObjective,
};
pub use mixture::{mixture_draws, mixture_minority_batch, Draw, MixtureBatch, MixtureConfig, MixtureItem, Origin, DEFAULT_PI};
pub use nets::{
    DiscGradients, Discrimination, DiscriminatorNet, GeneratorNet, CONV_BODY_MIN_WIDTH, DEFAULT_DISCRIMINATOR_HIDDEN,
    DEFAULT_GENERATOR_HIDDEN, DEFAULT_LATENT_DIM,
};
pub use train::{train, train_with_observer, EpochRecord, TrainConfig, TrainHistory, TrainedModel};
