//! The scoring network.
//!
//! Skill embeddings are pooled by two cascaded attention blocks (or a plain
//! mean), work experiences by a mean. The cosine between the two pooled
//! vectors is the consistency score; it is concatenated with the seven
//! normalized features and passed through `tanh(w2 · relu(W1 x + b1) + b2)`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::Resume;
use crate::embedding::{cosine_similarity, EmbeddingTable, EmbeddingVector};
use crate::error::{Error, Result};
use crate::features::{
    assemble_similarity, extract_features, mean_consistency, NormalizationStats, SimilarityVector,
    SIMILARITY_DIM,
};
use crate::linalg::{axpy, dot, mean_of, norm, Matrix};
use crate::scalar::Scalar;

pub const DEFAULT_HIDDEN: usize = 128;
/// Head input: consistency plus seven features.
pub const INPUT_DIM: usize = SIMILARITY_DIM;

const INIT_STD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    Average,
    Attention,
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationMode::Average => "average",
            AggregationMode::Attention => "attention",
        })
    }
}

impl FromStr for AggregationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(AggregationMode::Average),
            "attention" => Ok(AggregationMode::Attention),
            other => Err(Error::Config(format!("unknown aggregation mode {other:?}"))),
        }
    }
}

/// Kernel of the first attention block and the affine map producing the
/// second block's kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AttentionParams<T> {
    pub q: Vec<T>,
    pub w_a: Matrix<T>,
    pub b_a: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelParams<T> {
    pub mode: AggregationMode,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    pub attention: Option<AttentionParams<T>>,
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

/// Parameter-shaped container of partial derivatives.
pub type Gradients<T> = ModelParams<T>;

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(mode: AggregationMode, embedding_dim: usize, hidden_dim: usize) -> Self {
        let attention = match mode {
            AggregationMode::Average => None,
            AggregationMode::Attention => Some(AttentionParams {
                q: vec![T::zero(); embedding_dim],
                w_a: Matrix::zeros(embedding_dim, embedding_dim),
                b_a: vec![T::zero(); embedding_dim],
            }),
        };
        Self {
            mode,
            embedding_dim,
            hidden_dim,
            attention,
            w1: Matrix::zeros(hidden_dim, INPUT_DIM),
            b1: vec![T::zero(); hidden_dim],
            w2: vec![T::zero(); hidden_dim],
            b2: T::zero(),
        }
    }

    /// Weights (including the attention kernel) drawn from N(0, 0.5²)
    /// truncated to [-1, 1]; biases start at zero.
    pub fn init(mode: AggregationMode, embedding_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let mut draw = move || loop {
            let v: f64 = normal.sample(&mut rng);
            if (-1.0..=1.0).contains(&v) {
                return T::lit(v);
            }
        };
        let mut p = Self::zeros(mode, embedding_dim, hidden_dim);
        if let Some(att) = p.attention.as_mut() {
            att.q.iter_mut().for_each(|v| *v = draw());
            att.w_a.data.iter_mut().for_each(|v| *v = draw());
        }
        p.w1.data.iter_mut().for_each(|v| *v = draw());
        p.w2.iter_mut().for_each(|v| *v = draw());
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.mode, self.embedding_dim, self.hidden_dim)
    }

    /// Every trainable value in a fixed order: q, W_a, b_a, W1, b1, w2, b2.
    pub fn values(&self) -> impl Iterator<Item = &T> + '_ {
        let att = self
            .attention
            .iter()
            .flat_map(|a| a.q.iter().chain(&a.w_a.data).chain(&a.b_a));
        att.chain(&self.w1.data)
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(std::iter::once(&self.b2))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        let att = self
            .attention
            .iter_mut()
            .flat_map(|a| a.q.iter_mut().chain(&mut a.w_a.data).chain(&mut a.b_a));
        att.chain(&mut self.w1.data)
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(std::iter::once(&mut self.b2))
    }

    pub fn num_values(&self) -> usize {
        self.values().count()
    }

    pub fn is_finite(&self) -> bool {
        let all = |v: &[T]| v.iter().all(|x| x.is_finite());
        let att = self
            .attention
            .as_ref()
            .is_none_or(|a| all(&a.q) && all(&a.w_a.data) && all(&a.b_a));
        att && all(&self.w1.data) && all(&self.b1) && all(&self.w2) && self.b2.is_finite()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.embedding_dim == other.embedding_dim
            && self.hidden_dim == other.hidden_dim
            && self.attention.is_some() == other.attention.is_some()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: T, other: &Self) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::Shape("parameter blocks differ in shape".into()));
        }
        fn axpy<T: Scalar>(a: &mut [T], alpha: T, b: &[T]) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + alpha * y;
            }
        }
        if let (Some(a), Some(b)) = (self.attention.as_mut(), other.attention.as_ref()) {
            axpy(&mut a.q, alpha, &b.q);
            axpy(&mut a.w_a.data, alpha, &b.w_a.data);
            axpy(&mut a.b_a, alpha, &b.b_a);
        }
        axpy(&mut self.w1.data, alpha, &other.w1.data);
        axpy(&mut self.b1, alpha, &other.b1);
        axpy(&mut self.w2, alpha, &other.w2);
        self.b2 = self.b2 + alpha * other.b2;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_dim;
        let d = self.embedding_dim;
        let mut ok = self.w1.shape() == (h, INPUT_DIM) && self.b1.len() == h && self.w2.len() == h;
        ok &= match (self.mode, &self.attention) {
            (AggregationMode::Average, None) => true,
            (AggregationMode::Attention, Some(a)) => {
                a.q.len() == d && a.w_a.shape() == (d, d) && a.b_a.len() == d
            }
            _ => false,
        };
        if !ok {
            return Err(Error::Shape("model parameters inconsistent with declared dims".into()));
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("model parameters contain NaN or infinity".into()));
        }
        Ok(())
    }
}

/// Numerically stable softmax; invariant to adding a constant to every logit.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&b| (b - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Intermediate values of one attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock<T> {
    pub logits: Vec<T>,
    pub weights: Vec<T>,
    pub output: Vec<T>,
}

fn attend<T: Scalar>(embeddings: &[EmbeddingVector<T>], kernel: &[T]) -> AttentionBlock<T> {
    let logits: Vec<T> = embeddings.iter().map(|e| dot(kernel, e.as_slice())).collect();
    let weights = softmax(&logits);
    let mut output = vec![T::zero(); kernel.len()];
    for (w, e) in weights.iter().zip(embeddings) {
        axpy(*w, e.as_slice(), &mut output);
    }
    AttentionBlock {
        logits,
        weights,
        output,
    }
}

/// Both blocks of the cascaded attention plus the derived second kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace<T> {
    pub first: AttentionBlock<T>,
    pub second_kernel: Vec<T>,
    pub second: AttentionBlock<T>,
}

impl<T: Scalar> AttentionTrace<T> {
    pub fn output(&self) -> &[T] {
        &self.second.output
    }
}

/// Cascaded attention pooling: block one uses the learned kernel `q`, block
/// two the kernel `tanh(W_a e¹ + b_a)` computed from block one's output.
pub fn attention_aggregate<T: Scalar>(
    embeddings: &[EmbeddingVector<T>],
    params: &AttentionParams<T>,
) -> Result<AttentionTrace<T>> {
    if embeddings.is_empty() {
        return Err(Error::Degenerate("attention over an empty list".into()));
    }
    if embeddings.iter().any(|e| e.dim() != params.q.len()) {
        return Err(Error::Shape("embedding and kernel dimensions differ".into()));
    }
    let first = attend(embeddings, &params.q);
    let second_kernel: Vec<T> = params
        .w_a
        .affine(&first.output, &params.b_a)
        .into_iter()
        .map(T::tanh)
        .collect();
    let second = attend(embeddings, &second_kernel);
    Ok(AttentionTrace {
        first,
        second_kernel,
        second,
    })
}

pub fn average_aggregate<T: Scalar>(embeddings: &[EmbeddingVector<T>]) -> Result<Vec<T>> {
    mean_of(embeddings).ok_or_else(|| Error::Degenerate("average over an empty list".into()))
}

/// Mean pairwise cosine across parts. Returns `(0, true)` when any part is a
/// zero vector; fewer than two parts or unequal lengths are errors.
pub fn consistency<T: Scalar>(parts: &[&[T]]) -> Result<(T, bool)> {
    if parts.len() < 2 {
        return Err(Error::Argument("consistency needs at least two parts".into()));
    }
    let mut total = T::zero();
    let mut pairs = 0usize;
    for (i, a) in parts.iter().enumerate() {
        for b in &parts[i + 1..] {
            match cosine_similarity(a, b) {
                Ok(c) => total = total + c,
                Err(Error::Degenerate(_)) => return Ok((T::zero(), true)),
                Err(e) => return Err(e),
            }
            pairs += 1;
        }
    }
    Ok((total / T::from_usize(pairs).unwrap(), false))
}

/// A resume with embeddings looked up and features normalized, ready for
/// repeated forward passes.
#[derive(Debug, Clone)]
pub struct PreparedResume<T> {
    pub id: String,
    pub skills: Vec<EmbeddingVector<T>>,
    pub experience_mean: Option<Vec<T>>,
    /// Mean-pooled consistency followed by the normalized features.
    pub similarity: SimilarityVector<T>,
}

impl<T: Scalar> PreparedResume<T> {
    pub fn new(resume: &Resume, table: &EmbeddingTable<T>, stats: &NormalizationStats<T>) -> Self {
        let skills: Vec<_> = resume.skills.iter().map(|t| table.lookup(t)).collect();
        let work: Vec<_> = resume.work_experiences.iter().map(|t| table.lookup(t)).collect();
        let similarity = assemble_similarity(
            mean_consistency(&skills, &work),
            stats.apply(&extract_features(resume)),
        );
        Self {
            id: resume.id.clone(),
            skills,
            experience_mean: mean_of(&work),
            similarity,
        }
    }

    pub fn embedding_dim(&self) -> Option<usize> {
        self.skills
            .first()
            .map(EmbeddingVector::dim)
            .or(self.experience_mean.as_ref().map(Vec::len))
    }
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<'a, T> {
    pub skills: &'a [EmbeddingVector<T>],
    pub attention: Option<AttentionTrace<T>>,
    pub skill_aggregate: Option<Vec<T>>,
    pub experience_mean: Option<&'a [T]>,
    pub consistency: T,
    pub degenerate: bool,
    pub input: [T; INPUT_DIM],
    pub hidden_pre: Vec<T>,
    pub hidden: Vec<T>,
    pub output_pre: T,
    pub score: T,
}

pub fn forward<'a, T: Scalar>(
    resume: &'a PreparedResume<T>,
    params: &ModelParams<T>,
) -> Result<ForwardTrace<'a, T>> {
    if let Some(d) = resume.embedding_dim() {
        if d != params.embedding_dim {
            return Err(Error::Shape(format!(
                "resume {} has {d}-dim embeddings, model expects {}",
                resume.id, params.embedding_dim
            )));
        }
    }
    let experience_mean = resume.experience_mean.as_deref();
    let (attention, skill_aggregate, consistency_value, degenerate) = match &params.attention {
        None => {
            let s = &resume.similarity;
            (None, None, s.values[0], s.degenerate)
        }
        Some(att) if !resume.skills.is_empty() => {
            let trace = attention_aggregate(&resume.skills, att)?;
            let pooled = trace.output().to_vec();
            let (c, degenerate) = match experience_mean {
                Some(w) => consistency(&[&pooled, w])?,
                None => (T::zero(), true),
            };
            (Some(trace), Some(pooled), c, degenerate)
        }
        Some(_) => (None, None, T::zero(), true),
    };

    let mut input = resume.similarity.values;
    input[0] = consistency_value;
    let hidden_pre = params.w1.affine(&input, &params.b1);
    let hidden: Vec<T> = hidden_pre.iter().map(|&v| v.max(T::zero())).collect();
    let output_pre = dot(&params.w2, &hidden) + params.b2;
    let score = output_pre.tanh();
    Ok(ForwardTrace {
        skills: &resume.skills,
        attention,
        skill_aggregate,
        experience_mean,
        consistency: consistency_value,
        degenerate,
        input,
        hidden_pre,
        hidden,
        output_pre,
        score,
    })
}

/// Score in (-1, 1) for one prepared resume.
pub fn score<T: Scalar>(resume: &PreparedResume<T>, params: &ModelParams<T>) -> Result<T> {
    forward(resume, params).map(|t| t.score)
}

/// Gradient with respect to a block's kernel given the gradient at its
/// pooled output: softmax backward, then `Σ_k g_β_k e_k`.
fn attention_block_backward<T: Scalar>(
    block: &AttentionBlock<T>,
    skills: &[EmbeddingVector<T>],
    upstream: &[T],
) -> Vec<T> {
    let g_weights: Vec<T> = skills.iter().map(|e| dot(e.as_slice(), upstream)).collect();
    let mean_g = dot(&block.weights, &g_weights);
    let mut g_kernel = vec![T::zero(); upstream.len()];
    for ((a, g), e) in block.weights.iter().zip(&g_weights).zip(skills) {
        let g_logit = *a * (*g - mean_g);
        axpy(g_logit, e.as_slice(), &mut g_kernel);
    }
    g_kernel
}

/// Gradient of `upstream * score` with respect to every parameter.
pub fn backward<T: Scalar>(
    trace: &ForwardTrace<'_, T>,
    upstream: T,
    params: &ModelParams<T>,
) -> Result<Gradients<T>> {
    let mut grads = params.zeros_like();
    backward_into(trace, upstream, params, &mut grads)?;
    Ok(grads)
}

/// [`backward`] accumulated into `grads` instead of a fresh buffer.
pub fn backward_into<T: Scalar>(
    trace: &ForwardTrace<'_, T>,
    upstream: T,
    params: &ModelParams<T>,
    grads: &mut Gradients<T>,
) -> Result<()> {
    if trace.hidden.len() != params.hidden_dim
        || (trace.attention.is_some() && params.attention.is_none())
        || !grads.same_shape(params)
    {
        return Err(Error::Shape("trace does not match parameters".into()));
    }
    let g_out = upstream * (T::one() - trace.score * trace.score);
    if g_out == T::zero() {
        return Ok(());
    }

    grads.b2 = grads.b2 + g_out;
    let mut g_hidden_pre = vec![T::zero(); params.hidden_dim];
    axpy(g_out, &trace.hidden, &mut grads.w2);
    for ((g, &pre), &w) in g_hidden_pre.iter_mut().zip(&trace.hidden_pre).zip(&params.w2) {
        if pre > T::zero() {
            *g = g_out * w;
        }
    }
    grads.w1.add_outer(T::one(), &g_hidden_pre, &trace.input);
    axpy(T::one(), &g_hidden_pre, &mut grads.b1);

    let (Some(att), Some(att_trace), Some(pooled), Some(work)) = (
        params.attention.as_ref(),
        trace.attention.as_ref(),
        trace.skill_aggregate.as_ref(),
        trace.experience_mean,
    ) else {
        return Ok(());
    };
    if trace.degenerate {
        return Ok(());
    }
    let g_consistency: T = (0..params.hidden_dim)
        .map(|r| params.w1.get(r, 0) * g_hidden_pre[r])
        .sum();
    if g_consistency == T::zero() {
        return Ok(());
    }

    // d cos(a, b) / da = b / (|a||b|) - cos * a / |a|²
    let na = norm(pooled);
    let nb = norm(work);
    let c = trace.consistency;
    let g_pooled: Vec<T> = pooled
        .iter()
        .zip(work)
        .map(|(&a, &b)| g_consistency * (b / (na * nb) - c * a / (na * na)))
        .collect();

    let g_kernel2 = attention_block_backward(&att_trace.second, trace.skills, &g_pooled);
    let g_affine: Vec<T> = g_kernel2
        .iter()
        .zip(&att_trace.second_kernel)
        .map(|(&g, &k)| g * (T::one() - k * k))
        .collect();
    let g_first = att.w_a.transpose_mul(&g_affine);
    let g_q = attention_block_backward(&att_trace.first, trace.skills, &g_first);

    let ga = grads.attention.as_mut().expect("attention grads allocated");
    ga.w_a.add_outer(T::one(), &g_affine, &att_trace.first.output);
    axpy(T::one(), &g_affine, &mut ga.b_a);
    axpy(T::one(), &g_q, &mut ga.q);
    Ok(())
}
