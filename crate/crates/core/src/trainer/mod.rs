//! Per-datum SGD, early stopping on validation AUC, and the repeated
//! k-fold protocol with grid search.

mod config;
mod cv;

use std::collections::HashMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{Grids, TrainConfig};
pub use cv::{cross_validate, cross_validate_dataset, CellReport, CvReport, HyperParams, MetricSummary, ShuffleBlock};

use crate::corpus::{Corpus, Label};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::NormalizationStats;
use crate::losses::{
    contrastive_loss, frobenius_reg, l2_loss, mr_penalty, triplet_loss, LossConfig, LossVariant,
};
use crate::metrics::{roc_auc, ScoredSet};
use crate::model::{backward_into, forward, ForwardTrace, Gradients, ModelParams, PreparedResume};
use crate::sampling::{build_knn_graph, make_pairs, make_triplets};
use crate::scalar::Scalar;

/// SplitMix64 finalizer; derives independent stream seeds from a base seed.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A corpus with every resume prepared for the model.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub resumes: Vec<PreparedResume<T>>,
    pub labels: Vec<Label>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(corpus: &Corpus, table: &EmbeddingTable<T>, stats: &NormalizationStats<T>) -> Self {
        let resumes: Vec<_> = corpus
            .resumes()
            .iter()
            .map(|r| PreparedResume::new(r, table, stats))
            .collect();
        let labels = corpus.resumes().iter().map(|r| r.label).collect();
        let index = corpus
            .resumes()
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        Self {
            resumes,
            labels,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.resumes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resumes.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.resumes[i].id
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] == Label::Unlabeled)
            .collect()
    }

    /// Resolve ids to indices; unknown ids are a validation error.
    pub fn positions<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                self.position(id.as_ref())
                    .ok_or_else(|| Error::Validation(format!("unknown resume id {:?}", id.as_ref())))
            })
            .collect()
    }

    pub fn scores(&self, params: &ModelParams<T>, which: &[usize]) -> Result<Vec<T>> {
        which
            .iter()
            .map(|&i| forward(&self.resumes[i], params).map(|t| t.score))
            .collect()
    }

    /// AUC of `params` on the labeled indices in `which`.
    pub fn auc(&self, params: &ModelParams<T>, which: &[usize]) -> Result<T> {
        let scores = self.scores(params, which)?;
        let set = ScoredSet::from_tuples(which.iter().zip(scores).map(|(&i, s)| {
            (self.id(i).to_string(), s, self.labels[i] == Label::Positive)
        }))?;
        Ok(roc_auc(&set)?.auc)
    }
}

/// Index sets of one training run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

/// One SGD step's worth of data; indices point into a [`Dataset`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Datum<T> {
    Single { sample: usize, positive: bool },
    Pair { first: usize, second: usize, same: bool },
    Triplet { anchor: usize, positive: usize, negative: usize },
    Manifold { labeled: usize, unlabeled: usize, weight: T },
}

/// Supervised data for the configured loss, followed by the manifold edges
/// when `gamma_i > 0`.
pub fn build_data<T: Scalar>(
    data: &Dataset<T>,
    split: &Split,
    loss: &LossConfig,
) -> Result<Vec<Datum<T>>> {
    let pos: Vec<usize> = split
        .train
        .iter()
        .copied()
        .filter(|&i| data.labels[i] == Label::Positive)
        .collect();
    let neg: Vec<usize> = split
        .train
        .iter()
        .copied()
        .filter(|&i| data.labels[i] == Label::Negative)
        .collect();
    if pos.len() + neg.len() != split.train.len() {
        return Err(Error::Validation("training split contains unlabeled resumes".into()));
    }
    let mut out: Vec<Datum<T>> = match loss.variant {
        LossVariant::L2 => split
            .train
            .iter()
            .map(|&i| Datum::Single {
                sample: i,
                positive: data.labels[i] == Label::Positive,
            })
            .collect(),
        LossVariant::Contrastive => {
            let pairs = make_pairs(&pos, &neg)?;
            let same = pairs.positive_pairs.iter().map(|&(a, b)| Datum::Pair {
                first: a,
                second: b,
                same: true,
            });
            let cross = pairs.negative_pairs.iter().map(|&(a, b)| Datum::Pair {
                first: a,
                second: b,
                same: false,
            });
            same.chain(cross).collect()
        }
        LossVariant::Triplet => make_triplets(&pos, &neg)?
            .into_iter()
            .map(|t| Datum::Triplet {
                anchor: t.anchor,
                positive: t.positive,
                negative: t.negative,
            })
            .collect(),
    };
    if out.is_empty() {
        return Err(Error::Config(format!(
            "no {} training data from {} positive / {} negative samples",
            loss.variant,
            pos.len(),
            neg.len()
        )));
    }
    if loss.uses_manifold() {
        let key = |i: usize| (data.id(i), i);
        let labeled: Vec<_> = split
            .train
            .iter()
            .map(|&i| (key(i), &data.resumes[i].similarity))
            .collect();
        let unlabeled: Vec<_> = split
            .unlabeled
            .iter()
            .map(|&i| (key(i), &data.resumes[i].similarity))
            .collect();
        let graph = build_knn_graph(&labeled, &unlabeled, loss.k, T::lit(loss.sigma))?;
        out.extend(graph.edges.into_iter().map(|e| Datum::Manifold {
            labeled: e.labeled.1,
            unlabeled: e.unlabeled.1,
            weight: e.weight,
        }));
    }
    Ok(out)
}

/// Objective of one datum (criterion plus Frobenius term) and its gradient.
pub fn datum_objective<T: Scalar>(
    params: &ModelParams<T>,
    data: &Dataset<T>,
    datum: &Datum<T>,
    loss: &LossConfig,
) -> Result<(T, Gradients<T>)> {
    let (reg, mut grads) = frobenius_reg(params, T::lit(loss.gamma));
    let trace = |idx: usize| forward(&data.resumes[idx], params);
    let mut accumulate = |trace: &ForwardTrace<T>, coef: T| -> Result<()> {
        if coef == T::zero() {
            return Ok(());
        }
        backward_into(trace, coef, params, &mut grads)
    };

    let value = match *datum {
        Datum::Single { sample, positive } => {
            let t = trace(sample)?;
            let y = if positive { T::one() } else { -T::one() };
            let (v, d) = l2_loss(t.score, y)?;
            accumulate(&t, d)?;
            v
        }
        Datum::Pair { first, second, same } => {
            let (t1, t2) = (trace(first)?, trace(second)?);
            let (v, d1, d2) = contrastive_loss(t1.score, t2.score, same, T::lit(loss.eta))?;
            accumulate(&t1, d1)?;
            accumulate(&t2, d2)?;
            v
        }
        Datum::Triplet {
            anchor,
            positive,
            negative,
        } => {
            let (ta, tp, tn) = (trace(anchor)?, trace(positive)?, trace(negative)?);
            let (v, da, dp, dn) = triplet_loss(ta.score, tp.score, tn.score, T::lit(loss.mu));
            accumulate(&ta, da)?;
            accumulate(&tp, dp)?;
            accumulate(&tn, dn)?;
            v
        }
        Datum::Manifold {
            labeled,
            unlabeled,
            weight,
        } => {
            let (tl, tu) = (trace(labeled)?, trace(unlabeled)?);
            let (v, dl, du) = mr_penalty(tl.score, tu.score, weight, T::lit(loss.gamma_i));
            accumulate(&tl, dl)?;
            accumulate(&tu, du)?;
            v
        }
    };
    Ok((value + reg, grads))
}

/// `θ ← θ − λ·g`
pub fn apply_update<T: Scalar>(params: &mut ModelParams<T>, grads: &Gradients<T>, learning_rate: T) -> Result<()> {
    params.add_scaled(-learning_rate, grads)
}

/// One SGD update on a single datum; returns the objective before the step.
pub fn sgd_step<T: Scalar>(
    params: &mut ModelParams<T>,
    data: &Dataset<T>,
    datum: &Datum<T>,
    config: &TrainConfig,
) -> Result<T> {
    let (value, grads) = datum_objective(params, data, datum, &config.loss)?;
    if !value.is_finite() || !grads.is_finite() {
        return Err(Error::NonFinite(format!("objective or gradient at {datum:?}")));
    }
    apply_update(params, &grads, T::lit(config.learning_rate))?;
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub train_loss: T,
    pub val_auc: Option<T>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord<T>>,
    /// Epoch (1-based) whose parameters were returned.
    pub best_epoch: usize,
    pub best_val_auc: Option<T>,
    pub updates_per_epoch: usize,
}

/// `epoch,train_loss,val_auc` rows with a header; empty AUC when no
/// validation set was given.
pub fn history_csv<T: Scalar>(history: &[EpochRecord<T>]) -> String {
    let mut out = String::from("epoch,train_loss,val_auc\n");
    for h in history {
        let auc = h.val_auc.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", h.epoch, h.train_loss, auc));
    }
    out
}

/// SGD with one datum per step over seeded shuffles of the datum list.
/// After each epoch the validation AUC is measured; the best-AUC parameters
/// are kept and training stops after `patience` epochs without a strict
/// improvement. Without a validation set, or when it holds a single class,
/// all `max_epochs` run and the last parameters are returned.
pub fn train<T: Scalar>(data: &Dataset<T>, split: &Split, config: &TrainConfig) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if let Some(d) = data.resumes.iter().find_map(|r| r.embedding_dim()) {
        if d != config.embedding_dim {
            return Err(Error::Shape(format!(
                "embeddings have dimension {d}, config expects {}",
                config.embedding_dim
            )));
        }
    }
    let items = build_data(data, split, &config.loss)?;
    let mut params = ModelParams::init(
        config.aggregation,
        config.embedding_dim,
        config.hidden_dim,
        derive_seed(config.seed, 1),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2));
    let validate = {
        let pos = split.validation.iter().filter(|&&i| data.labels[i] == Label::Positive).count();
        let neg = split.validation.len() - pos;
        if !split.validation.is_empty() && (pos == 0 || neg == 0) {
            warn!("validation split holds a single class; early stopping disabled");
        }
        pos > 0 && neg > 0
    };
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(T, usize, ModelParams<T>)> = None;
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut total = T::zero();
        for &i in &order {
            total = total + sgd_step(&mut params, data, &items[i], config)?;
        }
        let train_loss = total / T::from_usize(items.len()).unwrap();
        let val_auc = if validate {
            Some(data.auc(&params, &split.validation)?)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_auc,
        });
        let Some(auc) = val_auc else { continue };
        match &best {
            Some((b, _, _)) if auc <= *b => {
                stale += 1;
                if stale >= config.patience {
                    break;
                }
            }
            _ => {
                best = Some((auc, epoch, params.clone()));
                stale = 0;
            }
        }
    }

    let (params, best_epoch, best_val_auc) = match best {
        Some((auc, epoch, p)) => (p, epoch, Some(auc)),
        None => (params, history.len(), None),
    };
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_val_auc,
        updates_per_epoch: items.len(),
    })
}
