//! Resume quality scoring.
//!
//! A resume's skill and work-experience embeddings are pooled (cascaded
//! attention or a mean), their cosine gives a consistency score, and a small
//! network maps consistency plus seven scalar features to a score in
//! (-1, 1). Training supports least squares, contrastive pairs, triplets,
//! and a kNN manifold penalty over unlabeled resumes, evaluated by repeated
//! 5-fold cross-validation with ROC/AUC, F1 and average precision.
//!
//! Numeric code is generic over [`Scalar`] (`f32`, `f64`); the aliases
//! below fix it to `f64`, which is what the training protocol uses.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod features;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod model_file;
pub mod sampling;
pub mod scalar;
pub mod trainer;

pub use corpus::{generate_synthetic, load_corpus, plan_folds, Corpus, FoldPlan, Label, Resume};
pub use error::{Error, ErrorClass, Result};
pub use losses::{LossConfig, LossVariant};
pub use model::AggregationMode;
pub use scalar::Scalar;
pub use trainer::{cross_validate, train, TrainConfig};

pub type Real = f64;

pub type EmbeddingVector = embedding::EmbeddingVector<Real>;
pub type EmbeddingTable = embedding::EmbeddingTable<Real>;
pub type FeaturePack = features::FeaturePack<Real>;
pub type NormalizationStats = features::NormalizationStats<Real>;
pub type SimilarityVector = features::SimilarityVector<Real>;
pub type ModelParams = model::ModelParams<Real>;
pub type Gradients = model::Gradients<Real>;
pub type PreparedResume = model::PreparedResume<Real>;
pub type ModelFile = model_file::ModelFile<Real>;
pub type Dataset = trainer::Dataset<Real>;
pub type CvReport = trainer::CvReport<Real>;
pub type ScoredSet = metrics::ScoredSet<Real>;
pub type MetricsReport = metrics::MetricsReport<Real>;

/// Single-precision variants for memory-bound scoring.
pub mod f32 {
    pub type EmbeddingTable = crate::embedding::EmbeddingTable<f32>;
    pub type ModelParams = crate::model::ModelParams<f32>;
    pub type ModelFile = crate::model_file::ModelFile<f32>;
    pub type Dataset = crate::trainer::Dataset<f32>;
}
