//! Scalar resume features, their z-score normalization, and the similarity
//! vector used to build the labeled-to-unlabeled neighbor graph.

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EducationLevel, Resume};
use crate::embedding::{cosine_similarity, EmbeddingTable, EmbeddingVector};
use crate::error::{Error, Result};
use crate::linalg::mean_of;
use crate::scalar::Scalar;

pub const NUM_FEATURES: usize = 7;
/// Consistency plus the seven features.
pub const SIMILARITY_DIM: usize = NUM_FEATURES + 1;

const STD_FLOOR: f64 = 1e-8;

/// The seven hand-crafted scalar features of a resume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeaturePack<T> {
    pub num_entries: T,
    pub education_level: T,
    pub university_rank_score: T,
    pub years_working: T,
    pub num_awards: T,
    pub num_skills: T,
    pub num_positions: T,
}

impl<T: Scalar> FeaturePack<T> {
    pub fn to_array(&self) -> [T; NUM_FEATURES] {
        [
            self.num_entries,
            self.education_level,
            self.university_rank_score,
            self.years_working,
            self.num_awards,
            self.num_skills,
            self.num_positions,
        ]
    }
}

/// Education is encoded 1..=4; the university score is `1/rank` when a rank
/// is given and the education level is bachelor or higher, otherwise 0.
pub fn extract_features<T: Scalar>(resume: &Resume) -> FeaturePack<T> {
    let rank_score = match resume.university_rank {
        Some(rank) if resume.education_level >= EducationLevel::Bachelor && rank >= 1 => {
            1.0 / f64::from(rank)
        }
        _ => 0.0,
    };
    FeaturePack {
        num_entries: T::lit(f64::from(resume.num_entries)),
        education_level: T::lit(f64::from(resume.education_level.ordinal())),
        university_rank_score: T::lit(rank_score),
        years_working: T::lit(resume.years_working),
        num_awards: T::lit(f64::from(resume.num_awards)),
        num_skills: T::lit(resume.skills.len() as f64),
        num_positions: T::lit(f64::from(resume.num_positions)),
    }
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormalizationStats<T> {
    pub mean: [T; NUM_FEATURES],
    pub std: [T; NUM_FEATURES],
}

impl<T: Scalar> NormalizationStats<T> {
    /// Identity transform; used when no corpus statistics are available.
    pub fn identity() -> Self {
        Self {
            mean: [T::zero(); NUM_FEATURES],
            std: [T::one(); NUM_FEATURES],
        }
    }

    pub fn apply(&self, pack: &FeaturePack<T>) -> [T; NUM_FEATURES] {
        let raw = pack.to_array();
        std::array::from_fn(|i| (raw[i] - self.mean[i]) / self.std[i])
    }
}

/// Fit z-score statistics over every resume in the corpus, labeled or not.
pub fn fit_normalizer<T: Scalar>(corpus: &Corpus) -> Result<NormalizationStats<T>> {
    if corpus.is_empty() {
        return Err(Error::Degenerate("cannot fit normalizer on an empty corpus".into()));
    }
    let rows: Vec<[f64; NUM_FEATURES]> = corpus
        .resumes()
        .iter()
        .map(|r| extract_features::<f64>(r).to_array())
        .collect();
    let n = rows.len() as f64;
    let mean: [f64; NUM_FEATURES] =
        std::array::from_fn(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n);
    let std: [f64; NUM_FEATURES] = std::array::from_fn(|j| {
        let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
        var.sqrt().max(STD_FLOOR)
    });
    Ok(NormalizationStats {
        mean: mean.map(T::lit),
        std: std.map(T::lit),
    })
}

/// Consistency proxy followed by the normalized features.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector<T> {
    pub values: [T; SIMILARITY_DIM],
    /// Set when the resume lacks skills or work experiences (or their mean
    /// embedding vanishes); `values[0]` is 0 in that case.
    pub degenerate: bool,
}

impl<T: Scalar> SimilarityVector<T> {
    pub fn squared_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }
}

/// Cosine between two mean embeddings; `None` when either side is empty or
/// has zero mean.
pub fn mean_consistency<T: Scalar>(
    skills: &[EmbeddingVector<T>],
    experiences: &[EmbeddingVector<T>],
) -> Option<T> {
    let s = mean_of(skills)?;
    let w = mean_of(experiences)?;
    cosine_similarity(&s, &w).ok()
}

pub fn similarity_vector<T: Scalar>(
    resume: &Resume,
    table: &EmbeddingTable<T>,
    stats: &NormalizationStats<T>,
) -> SimilarityVector<T> {
    let skills: Vec<_> = resume.skills.iter().map(|t| table.lookup(t)).collect();
    let work: Vec<_> = resume.work_experiences.iter().map(|t| table.lookup(t)).collect();
    assemble_similarity(mean_consistency(&skills, &work), stats.apply(&extract_features(resume)))
}

pub(crate) fn assemble_similarity<T: Scalar>(
    consistency: Option<T>,
    normalized: [T; NUM_FEATURES],
) -> SimilarityVector<T> {
    let mut values = [T::zero(); SIMILARITY_DIM];
    values[0] = consistency.unwrap_or_else(T::zero);
    values[1..].copy_from_slice(&normalized);
    SimilarityVector {
        values,
        degenerate: consistency.is_none(),
    }
}
