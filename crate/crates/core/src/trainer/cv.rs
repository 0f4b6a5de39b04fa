use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{derive_seed, train, Dataset, Split, TrainConfig, TrainOutcome};
use crate::corpus::{plan_folds, Corpus, FoldPlan, Label};
use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::features::fit_normalizer;
use crate::losses::LossVariant;
use crate::metrics::{evaluate, MetricsReport, ScoredSet};
use crate::scalar::Scalar;

pub const N_FOLDS: usize = 5;

/// Hyperparameters chosen for one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HyperParams {
    pub gamma: f64,
    pub gamma_i: f64,
    pub k: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CellReport<T> {
    pub test_fold: usize,
    pub validation_fold: usize,
    pub hyperparameters: HyperParams,
    pub validation_auc: Option<T>,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// `None` when the test fold holds a single class.
    pub test_metrics: Option<MetricsReport<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct ShuffleBlock<T> {
    pub shuffle: usize,
    pub shuffle_seed: u64,
    pub cells: Vec<CellReport<T>>,
    /// Test-fold score of every labeled resume.
    pub scores: BTreeMap<String, T>,
    pub metrics: MetricsReport<T>,
    #[serde(skip)]
    pub roc: Vec<(T, T)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct MetricSummary<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Scalar> MetricSummary<T> {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[T]) -> Self {
        let n = T::from_usize(values.len().max(1)).unwrap();
        let mean = values.iter().copied().sum::<T>() / n;
        let std = if values.len() < 2 {
            T::zero()
        } else {
            let ss: T = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
            (ss / T::from_usize(values.len() - 1).unwrap()).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Summary<T> {
    pub auc: MetricSummary<T>,
    pub f1: MetricSummary<T>,
    pub precision: MetricSummary<T>,
    pub recall: MetricSummary<T>,
    pub ap: MetricSummary<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct CvReport<T> {
    pub n_folds: usize,
    pub config: TrainConfig,
    pub shuffles: Vec<ShuffleBlock<T>>,
    pub summary: Summary<T>,
}

impl<T: Scalar> CvReport<T> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Grid points searched for a configuration: `gamma` always, `mu` for the
/// triplet loss, `(gamma_i, k)` when the manifold term is enabled.
pub fn grid_points(config: &TrainConfig) -> Vec<HyperParams> {
    let g = &config.grids;
    let loss = &config.loss;
    let mus = if loss.variant == LossVariant::Triplet {
        g.mu.clone()
    } else {
        vec![loss.mu]
    };
    let manifold: Vec<(f64, usize)> = if loss.uses_manifold() {
        g.gamma_i
            .iter()
            .flat_map(|&gi| g.k.iter().map(move |&k| (gi, k)))
            .collect()
    } else {
        vec![(0.0, loss.k)]
    };
    let mut out = Vec::new();
    for &gamma in &g.gamma {
        for &mu in &mus {
            for &(gamma_i, k) in &manifold {
                out.push(HyperParams {
                    gamma,
                    gamma_i,
                    k,
                    mu,
                });
            }
        }
    }
    out
}

struct CellResult<T> {
    shuffle: usize,
    report: CellReport<T>,
    test_scores: Vec<(String, T)>,
}

fn split_for(plan: &FoldPlan, data: &Dataset<impl Scalar>, test: usize) -> Result<(Split, Vec<usize>)> {
    let roles = &plan.schedule[test];
    let ids_in = |folds: &[usize]| -> Result<Vec<usize>> {
        let ids: Vec<&str> = folds.iter().flat_map(|&f| plan.fold_ids(f)).collect();
        data.positions(&ids)
    };
    let split = Split {
        train: ids_in(&roles.training)?,
        validation: ids_in(&[roles.validation])?,
        unlabeled: data.unlabeled(),
    };
    Ok((split, ids_in(&[roles.test])?))
}

fn run_cell<T: Scalar>(
    data: &Dataset<T>,
    plan: &FoldPlan,
    base: &TrainConfig,
    shuffle: usize,
    test: usize,
) -> Result<CellResult<T>> {
    let (split, test_idx) = split_for(plan, data, test)?;
    let seed = derive_seed(derive_seed(base.seed, shuffle as u64 + 1), test as u64 + 1);
    let mut best: Option<(HyperParams, TrainOutcome<T>)> = None;
    for hp in grid_points(base) {
        let mut cfg = base.clone();
        cfg.seed = seed;
        cfg.loss.gamma = hp.gamma;
        cfg.loss.gamma_i = hp.gamma_i;
        cfg.loss.k = hp.k;
        cfg.loss.mu = hp.mu;
        let outcome = train(data, &split, &cfg)?;
        let better = match &best {
            None => true,
            Some((_, b)) => outcome.best_val_auc > b.best_val_auc,
        };
        if better {
            best = Some((hp, outcome));
        }
    }
    let (hp, outcome) = best.expect("grid is non-empty");
    let scores = data.scores(&outcome.params, &test_idx)?;
    let test_scores: Vec<(String, T)> = test_idx
        .iter()
        .zip(scores)
        .map(|(&i, s)| (data.id(i).to_string(), s))
        .collect();
    let test_set = ScoredSet::from_tuples(
        test_idx
            .iter()
            .zip(&test_scores)
            .map(|(&i, (id, s))| (id.clone(), *s, data.labels[i] == Label::Positive)),
    )?;
    Ok(CellResult {
        shuffle,
        report: CellReport {
            test_fold: test,
            validation_fold: plan.schedule[test].validation,
            hyperparameters: hp,
            validation_auc: outcome.best_val_auc,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.history.len(),
            test_metrics: evaluate(&test_set).ok().map(|(m, _)| m),
        },
        test_scores,
    })
}

/// Repeated k-fold evaluation on a prepared dataset. Each shuffle deals the
/// labeled resumes into five folds; every fold is tested once after a grid
/// search that trains on three folds and selects by AUC on the fourth.
/// Cells run in parallel on the current rayon pool; the report does not
/// depend on scheduling.
pub fn cross_validate_dataset<T: Scalar>(
    corpus: &Corpus,
    data: &Dataset<T>,
    config: &TrainConfig,
    n_shuffles: usize,
) -> Result<CvReport<T>> {
    config.validate()?;
    if n_shuffles == 0 {
        return Err(Error::Config("need at least one shuffle".into()));
    }
    let plans: Vec<FoldPlan> = (0..n_shuffles)
        .map(|s| plan_folds(corpus, N_FOLDS, derive_seed(config.seed, 1000 + s as u64)))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..n_shuffles)
        .flat_map(|s| (0..N_FOLDS).map(move |t| (s, t)))
        .collect();
    let results: Vec<CellResult<T>> = cells
        .par_iter()
        .map(|&(s, t)| run_cell(data, &plans[s], config, s, t))
        .collect::<Result<_>>()?;

    let mut shuffles = Vec::with_capacity(n_shuffles);
    let mut grouped: Vec<Vec<CellResult<T>>> = (0..n_shuffles).map(|_| Vec::new()).collect();
    for r in results {
        grouped[r.shuffle].push(r);
    }
    for (s, cells) in grouped.into_iter().enumerate() {
        let mut scores = BTreeMap::new();
        let mut reports = Vec::with_capacity(cells.len());
        for c in cells {
            for (id, score) in c.test_scores {
                if scores.insert(id.clone(), score).is_some() {
                    return Err(Error::Protocol(format!("{id} tested twice in one shuffle")));
                }
            }
            reports.push(c.report);
        }
        let set = ScoredSet::from_tuples(scores.iter().map(|(id, &sc)| {
            let positive = corpus.get(id).map(|r| r.label) == Some(Label::Positive);
            (id.clone(), sc, positive)
        }))?;
        let (metrics, roc) = evaluate(&set)?;
        shuffles.push(ShuffleBlock {
            shuffle: s,
            shuffle_seed: plans[s].shuffle_seed,
            cells: reports,
            scores,
            metrics,
            roc: roc.points,
        });
    }
    let pick = |f: fn(&MetricsReport<T>) -> T| {
        MetricSummary::of(&shuffles.iter().map(|b| f(&b.metrics)).collect::<Vec<_>>())
    };
    let summary = Summary {
        auc: pick(|m| m.auc),
        f1: pick(|m| m.f1),
        precision: pick(|m| m.precision),
        recall: pick(|m| m.recall),
        ap: pick(|m| m.ap),
    };
    Ok(CvReport {
        n_folds: N_FOLDS,
        config: config.clone(),
        shuffles,
        summary,
    })
}

/// [`cross_validate_dataset`] with normalization fit on the whole corpus.
pub fn cross_validate<T: Scalar>(
    corpus: &Corpus,
    table: &EmbeddingTable<T>,
    config: &TrainConfig,
    n_shuffles: usize,
) -> Result<CvReport<T>> {
    if corpus.counts().labeled() < N_FOLDS {
        return Err(Error::Protocol(format!(
            "{} labeled resumes cannot fill {N_FOLDS} folds",
            corpus.counts().labeled()
        )));
    }
    let stats = fit_normalizer(corpus)?;
    let data = Dataset::new(corpus, table, &stats);
    cross_validate_dataset(corpus, &data, config, n_shuffles)
}
