//! Class-conditioned adversarial oversampling for imbalanced machine-fault
//! diagnosis.
//!
//! The crate is organized as
//!
//! - [`ndcore`]: tensors, layers, losses, Adam and gradient checking;
//! - [`dataio`]: datasets, the synthetic vibration generator, CSV I/O and splits;
//! - [`resample`]: random oversampling, SMOTE, Borderline-SMOTE and ADASYN;
//! - [`mogan`]: the K+1-class discriminator, conditional generator, mixture
//!   sampling, feature-matching training and fault-detector calibration;
//! - [`metrics`]: confusion matrices and imbalance-aware scores.
//!
//! Batch loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise.

pub mod dataio;
pub mod metrics;
pub mod mogan;
pub mod ndcore;
pub mod par;
pub mod resample;
pub mod rng;

mod error;

pub use error::{Error, Result};
