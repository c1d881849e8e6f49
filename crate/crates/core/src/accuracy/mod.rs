//! Accuracy ground truth, training data, and the learned estimator.

pub mod dataset;
pub mod mlp;
pub mod oracle;

pub use dataset::{features, generate_instances, generate_training_set, LabelledInstance};
pub use mlp::{
    error_metrics, eval_metrics, train_mlp, train_mlp_with_history, ErrorMetrics, MlpModel,
    TrainConfig, TrainingSample,
};
pub use oracle::{oracle_accuracy, oracle_from_indicator, OracleParams};

use crate::error::{Error, Result};
use crate::quality::QualityIndicator;
use crate::scene::BoundingBox;

/// Anything that maps a fused indicator and box to an accuracy in `[0, 1]`.
pub trait AccuracyEstimator: Sync {
    fn estimate(&self, indicator: &QualityIndicator, bbox: &BoundingBox) -> Result<f64>;
}

/// Estimated accuracy `f(Z, lx, ly, lz)` from the trained model.
pub fn predict_accuracy(
    model: &MlpModel,
    indicator: &QualityIndicator,
    bbox: &BoundingBox,
) -> Result<f64> {
    let expected = model.input_dim();
    let got = dataset::feature_len(indicator.resolution());
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    model.predict(&features(indicator, bbox))
}

impl AccuracyEstimator for MlpModel {
    fn estimate(&self, indicator: &QualityIndicator, bbox: &BoundingBox) -> Result<f64> {
        predict_accuracy(self, indicator, bbox)
    }
}

/// Uses the oracle formula directly; the indicators must be binned at the
/// oracle's resolution.
impl AccuracyEstimator for OracleParams {
    fn estimate(&self, indicator: &QualityIndicator, bbox: &BoundingBox) -> Result<f64> {
        oracle_from_indicator(indicator, bbox, self)
    }
}
