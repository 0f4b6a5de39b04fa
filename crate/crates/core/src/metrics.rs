//! ROC/AUC, F1 at threshold zero, and average precision.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem<T> {
    pub id: String,
    pub score: T,
    pub positive: bool,
}

/// Scored, labeled items with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet<T> {
    items: Vec<ScoredItem<T>>,
}

impl<T: Scalar> ScoredSet<T> {
    pub fn new(items: Vec<ScoredItem<T>>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(items.len());
        for it in &items {
            if !seen.insert(it.id.as_str()) {
                return Err(Error::Validation(format!("duplicate scored id {:?}", it.id)));
            }
            if !it.score.is_finite() {
                return Err(Error::NonFinite(format!("score of {:?}", it.id)));
            }
        }
        Ok(Self { items })
    }

    /// Build from parallel `(id, score, label)` tuples.
    pub fn from_tuples<S: Into<String>>(rows: impl IntoIterator<Item = (S, T, bool)>) -> Result<Self> {
        Self::new(
            rows.into_iter()
                .map(|(id, score, positive)| ScoredItem {
                    id: id.into(),
                    score,
                    positive,
                })
                .collect(),
        )
    }

    pub fn items(&self) -> &[ScoredItem<T>] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.items.iter().filter(|i| i.positive).count()
    }

    pub fn n_negative(&self) -> usize {
        self.items.len() - self.n_positive()
    }

    /// Indices sorted by descending score, ties by ascending id.
    fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.items.len()).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (&self.items[a], &self.items[b]);
            y.score
                .partial_cmp(&x.score)
                .unwrap_or(Ordering::Equal)
                .then_with(|| x.id.cmp(&y.id))
        });
        order
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<T> {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(T, T)>,
    pub auc: T,
}

impl<T: Scalar> RocCurve<T> {
    pub fn to_csv(&self) -> String {
        self.points
            .iter()
            .map(|(f, t)| format!("{f},{t}\n"))
            .collect()
    }
}

/// ROC curve over descending distinct thresholds. The area counts each tied
/// positive/negative pair as one half, so it equals the Mann–Whitney
/// statistic exactly.
pub fn roc_auc<T: Scalar>(set: &ScoredSet<T>) -> Result<RocCurve<T>> {
    let n_pos = set.n_positive();
    let n_neg = set.n_negative();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "ROC needs at least one positive and one negative".into(),
        ));
    }
    let order = set.ranking();
    let items = set.items();
    let (p, n) = (T::from_usize(n_pos).unwrap(), T::from_usize(n_neg).unwrap());
    let mut points = vec![(T::zero(), T::zero())];
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the concordance count: 2·#concordant + #tied.
    let mut doubled = 0u64;
    let mut i = 0;
    while i < order.len() {
        let threshold = items[order[i]].score;
        let (mut gp, mut gn) = (0u64, 0u64);
        while i < order.len() && items[order[i]].score == threshold {
            if items[order[i]].positive {
                gp += 1;
            } else {
                gn += 1;
            }
            i += 1;
        }
        doubled += gn * (2 * tp + gp);
        tp += gp;
        fp += gn;
        points.push((T::from_u64(fp).unwrap() / n, T::from_u64(tp).unwrap() / p));
    }
    let denom = 2.0 * n_pos as f64 * n_neg as f64;
    Ok(RocCurve {
        points,
        auc: T::lit(doubled as f64 / denom),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct F1Report<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// Classify `score > 0` as positive (0 itself counts as negative).
pub fn f1_at_zero<T: Scalar>(set: &ScoredSet<T>) -> F1Report<T> {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for it in set.items() {
        match (it.score > T::zero(), it.positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| {
        if b == 0 {
            T::zero()
        } else {
            T::from_usize(a).unwrap() / T::from_usize(b).unwrap()
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if tp == 0 {
        T::zero()
    } else {
        T::lit(2.0) * precision * recall / (precision + recall)
    };
    F1Report {
        precision,
        recall,
        f1,
    }
}

/// Mean of precision@k over the ranks of the positives.
pub fn average_precision<T: Scalar>(set: &ScoredSet<T>) -> Result<T> {
    let n_pos = set.n_positive();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("average precision needs a positive".into()));
    }
    let mut hits = 0usize;
    let mut total = T::zero();
    for (rank, &idx) in set.ranking().iter().enumerate() {
        if set.items()[idx].positive {
            hits += 1;
            total = total + T::from_usize(hits).unwrap() / T::from_usize(rank + 1).unwrap();
        }
    }
    Ok(total / T::from_usize(n_pos).unwrap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetricsReport<T> {
    pub auc: T,
    pub f1: T,
    pub precision: T,
    pub recall: T,
    pub ap: T,
}

/// All three criteria at once; fails when either class is missing.
pub fn evaluate<T: Scalar>(set: &ScoredSet<T>) -> Result<(MetricsReport<T>, RocCurve<T>)> {
    let roc = roc_auc(set)?;
    let f1 = f1_at_zero(set);
    let ap = average_precision(set)?;
    Ok((
        MetricsReport {
            auc: roc.auc,
            f1: f1.f1,
            precision: f1.precision,
            recall: f1.recall,
            ap,
        },
        roc,
    ))
}
