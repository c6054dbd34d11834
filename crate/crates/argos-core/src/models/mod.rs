//! The four unsupervised anomaly models (autoencoder, denoising
//! autoencoder, variational autoencoder, isolation forest) plus the
//! shared scoring and percentile-threshold machinery.

mod blob;
mod dense;
mod forest;

pub use blob::{load_model, read_model, save_model, write_model, BlobError, ModelBundle};
pub use dense::{
    recon_loss_grad, train_ae, train_dae, train_vae, vae_encode, vae_loss_grad, DenseNetwork,
    TrainConfig, TrainStats, VaeHead,
};
pub use forest::{c_factor, train_iforest, IsolationForest};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Hidden width of the default [D, 64, 16, 64, D] architecture.
pub const DEFAULT_HIDDEN: usize = 64;
/// Latent width of the default architecture.
pub const DEFAULT_LATENT: usize = 16;
/// Gaussian corruption scale for the denoising autoencoder, in
/// normalized feature units.
pub const DEFAULT_DAE_SIGMA: f64 = 0.05;
/// Weight of the KL term in the VAE objective.
pub const DEFAULT_VAE_BETA: f64 = 1e-3;
pub const DEFAULT_TREE_COUNT: usize = 100;
pub const DEFAULT_SUBSAMPLE: usize = 256;
/// Detection thresholds sit at this percentile of training scores.
pub const THRESHOLD_PERCENTILE: f64 = 99.9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training data is empty")]
    EmptyTrainingData,
    #[error("training data has inconsistent widths: {0} vs {1}")]
    RaggedTrainingData(usize, usize),
    #[error("non-finite loss {loss} at epoch {epoch}; aborting training")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
}

/// Which of the four detectors to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ae,
    Dae,
    Vae,
    IForest,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Ae => write!(f, "ae"),
            ModelKind::Dae => write!(f, "dae"),
            ModelKind::Vae => write!(f, "vae"),
            ModelKind::IForest => write!(f, "iforest"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ae" => Ok(ModelKind::Ae),
            "dae" => Ok(ModelKind::Dae),
            "vae" => Ok(ModelKind::Vae),
            "iforest" => Ok(ModelKind::IForest),
            other => Err(ModelError::UnknownKind(other.into())),
        }
    }
}

/// A trained detector. Immutable once built; scoring is pure.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ae(DenseNetwork),
    Dae(DenseNetwork),
    Vae(DenseNetwork, VaeHead),
    IForest(IsolationForest),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Ae(_) => ModelKind::Ae,
            Model::Dae(_) => ModelKind::Dae,
            Model::Vae(..) => ModelKind::Vae,
            Model::IForest(_) => ModelKind::IForest,
        }
    }

    pub fn input_width(&self) -> usize {
        match self {
            Model::Ae(net) | Model::Dae(net) | Model::Vae(net, _) => net.input_width(),
            Model::IForest(f) => f.dim(),
        }
    }

    /// Anomaly score for one feature vector: reconstruction MSE for the
    /// autoencoder family (VAE scored at the latent mean, no sampling),
    /// the path-length score for the isolation forest.
    pub fn score(&self, features: &[f64]) -> Result<f64, ModelError> {
        if features.len() != self.input_width() {
            return Err(ModelError::WidthMismatch {
                expected: self.input_width(),
                got: features.len(),
            });
        }
        match self {
            Model::Ae(net) | Model::Dae(net) | Model::Vae(net, _) => {
                let xhat = net.reconstruct(features);
                mse(features, &xhat)
            }
            Model::IForest(f) => Ok(f.score(features)),
        }
    }
}

/// Trains a detector of the requested kind with the pipeline defaults.
pub fn train_model(
    kind: ModelKind,
    data: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(Model, TrainStats), ModelError> {
    match kind {
        ModelKind::Ae => {
            let (net, stats) = train_ae(data, cfg)?;
            Ok((Model::Ae(net), stats))
        }
        ModelKind::Dae => {
            let (net, stats) = train_dae(data, cfg, DEFAULT_DAE_SIGMA)?;
            Ok((Model::Dae(net), stats))
        }
        ModelKind::Vae => {
            let (net, head, stats) = train_vae(data, cfg, DEFAULT_VAE_BETA)?;
            Ok((Model::Vae(net, head), stats))
        }
        ModelKind::IForest => {
            let forest = train_iforest(data, DEFAULT_TREE_COUNT, DEFAULT_SUBSAMPLE, cfg.seed)?;
            let stats = TrainStats {
                initial_loss: 0.0,
                final_loss: 0.0,
            };
            Ok((Model::IForest(forest), stats))
        }
    }
}

/// Mean squared error over equal-length vectors.
pub fn mse(x: &[f64], x_hat: &[f64]) -> Result<f64, ModelError> {
    if x.len() != x_hat.len() {
        return Err(ModelError::LengthMismatch {
            left: x.len(),
            right: x_hat.len(),
        });
    }
    let n = x.len().max(1) as f64;
    Ok(x.iter()
        .zip(x_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// KL divergence of a diagonal Gaussian N(mu, exp(logvar)) from the
/// standard normal prior, summed over dimensions.
pub fn kl_gaussian(mu: &[f64], logvar: &[f64]) -> f64 {
    debug_assert_eq!(mu.len(), logvar.len());
    mu.iter()
        .zip(logvar)
        .map(|(&m, &lv)| -0.5 * (1.0 + lv - m * m - lv.exp()))
        .sum()
}

/// MSE cutoff fitted as a high percentile of training scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub tau: f64,
    pub percentile: f64,
    pub fitted_on: usize,
}

/// Percentile with linear interpolation between order statistics
/// (rank r = p/100 · (n−1) over the sorted sample).
pub fn percentile(scores: &[f64], p: f64) -> f64 {
    assert!(!scores.is_empty(), "percentile of an empty sample");
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let r = (p / 100.0) * (sorted.len() - 1) as f64;
    let k = r.floor() as usize;
    let frac = r - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] + frac * (sorted[k + 1] - sorted[k])
    } else {
        sorted[k]
    }
}

/// Scores the training set and fixes the detection threshold at the
/// 99.9th percentile of those scores.
pub fn fit_threshold(model: &Model, data: &[Vec<f64>]) -> Result<Threshold, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyTrainingData);
    }
    let mut scores = Vec::with_capacity(data.len());
    for x in data {
        scores.push(model.score(x)?);
    }
    Ok(Threshold {
        tau: percentile(&scores, THRESHOLD_PERCENTILE),
        percentile: THRESHOLD_PERCENTILE,
        fitted_on: data.len(),
    })
}

pub(crate) fn validate_training_data(data: &[Vec<f64>]) -> Result<usize, ModelError> {
    let first = data.first().ok_or(ModelError::EmptyTrainingData)?;
    for v in data {
        if v.len() != first.len() {
            return Err(ModelError::RaggedTrainingData(first.len(), v.len()));
        }
    }
    if first.is_empty() {
        return Err(ModelError::EmptyTrainingData);
    }
    Ok(first.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_known_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        // (0 + 1 + 4) / 3
        assert!((mse(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap() - 5.0 / 3.0).abs() < 1e-15);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_known_values() {
        assert_eq!(kl_gaussian(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((kl_gaussian(&[1.0], &[0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn percentile_linear_interpolation() {
        let scores: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert!((percentile(&scores, 99.9) - 999.001).abs() < 1e-9);
        assert_eq!(percentile(&[5.0, 5.0, 5.0], 99.9), 5.0);
        assert_eq!(percentile(&[3.0], 99.9), 3.0);
        assert_eq!(percentile(&[1.0, 2.0], 50.0), 1.5);
        assert_eq!(percentile(&[2.0, 1.0], 100.0), 2.0);
    }

    #[test]
    fn model_kind_parses() {
        for (s, k) in [
            ("ae", ModelKind::Ae),
            ("dae", ModelKind::Dae),
            ("vae", ModelKind::Vae),
            ("iforest", ModelKind::IForest),
        ] {
            assert_eq!(s.parse::<ModelKind>().unwrap(), k);
            assert_eq!(k.to_string(), s);
        }
        assert!("forest".parse::<ModelKind>().is_err());
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            mu in proptest::collection::vec(-5.0f64..5.0, 1..8),
            lv in proptest::collection::vec(-10.0f64..10.0, 1..8),
        ) {
            let n = mu.len().min(lv.len());
            prop_assert!(kl_gaussian(&mu[..n], &lv[..n]) >= -1e-12);
        }

        #[test]
        fn percentile_brackets_sample(
            scores in proptest::collection::vec(0.0f64..100.0, 1..50),
            p in 0.0f64..100.0,
        ) {
            let v = percentile(&scores, p);
            let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(v >= lo && v <= hi);
        }
    }
}
