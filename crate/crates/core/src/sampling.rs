//! Training tuples built from a labeled split: same/different-class pairs,
//! (anchor, positive, negative) triplets, and labeled-to-unlabeled kNN edges.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::hash::Hash;

use log::warn;

use crate::error::{Error, Result};
use crate::features::SimilarityVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet<I> {
    /// Same-class pairs (y = 1), each unordered pair once.
    pub positive_pairs: Vec<(I, I)>,
    /// Cross-class pairs (y = 0), positive sample first.
    pub negative_pairs: Vec<(I, I)>,
}

impl<I> PairSet<I> {
    pub fn len(&self) -> usize {
        self.positive_pairs.len() + self.negative_pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triplet<I> {
    pub anchor: I,
    pub positive: I,
    pub negative: I,
}

fn check_disjoint<I: Eq + Hash>(pos: &[I], neg: &[I]) -> Result<()> {
    let pos_set: HashSet<&I> = pos.iter().collect();
    if pos_set.len() != pos.len() || neg.iter().collect::<HashSet<_>>().len() != neg.len() {
        return Err(Error::Validation("duplicate id within a class".into()));
    }
    if neg.iter().any(|n| pos_set.contains(n)) {
        return Err(Error::Validation("an id appears in both classes".into()));
    }
    Ok(())
}

fn unordered_pairs<I: Clone>(ids: &[I]) -> impl Iterator<Item = (I, I)> + '_ {
    ids.iter()
        .enumerate()
        .flat_map(move |(i, a)| ids[i + 1..].iter().map(move |b| (a.clone(), b.clone())))
}

/// `½(N₊(N₊−1) + N₋(N₋−1))` same-class pairs and `N₊N₋` cross pairs.
pub fn make_pairs<I: Clone + Eq + Hash>(pos: &[I], neg: &[I]) -> Result<PairSet<I>> {
    check_disjoint(pos, neg)?;
    let positive_pairs = unordered_pairs(pos).chain(unordered_pairs(neg)).collect();
    let negative_pairs = pos
        .iter()
        .flat_map(|p| neg.iter().map(move |n| (p.clone(), n.clone())))
        .collect();
    Ok(PairSet {
        positive_pairs,
        negative_pairs,
    })
}

/// Each unordered positive pair, oriented by list order, crossed with every
/// negative: `½N₊N₋(N₊−1)` triplets.
pub fn make_triplets<I: Clone + Eq + Hash>(pos: &[I], neg: &[I]) -> Result<Vec<Triplet<I>>> {
    check_disjoint(pos, neg)?;
    Ok(unordered_pairs(pos)
        .flat_map(|(anchor, positive)| {
            neg.iter().map(move |n| Triplet {
                anchor: anchor.clone(),
                positive: positive.clone(),
                negative: n.clone(),
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge<I, T> {
    pub labeled: I,
    pub unlabeled: I,
    pub weight: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph<I, T> {
    pub edges: Vec<Edge<I, T>>,
    pub k: usize,
    pub sigma: T,
}

/// Gaussian edge weight `exp(−d²/(2σ²))` from a squared distance.
pub fn gaussian_weight<T: Scalar>(squared_distance: T, sigma: T) -> T {
    (-squared_distance / (T::lit(2.0) * sigma * sigma)).exp()
}

/// Connect each labeled sample to its `k` nearest unlabeled samples
/// (Euclidean, ties by ascending id).
pub fn build_knn_graph<I: Clone + Ord, T: Scalar>(
    labeled: &[(I, &SimilarityVector<T>)],
    unlabeled: &[(I, &SimilarityVector<T>)],
    k: usize,
    sigma: T,
) -> Result<NeighborGraph<I, T>> {
    if k == 0 {
        return Err(Error::Argument("k must be >= 1".into()));
    }
    if sigma.is_nan() || sigma <= T::zero() {
        return Err(Error::Argument("sigma must be > 0".into()));
    }
    if unlabeled.is_empty() {
        return Err(Error::Argument("neighbor graph needs unlabeled samples".into()));
    }
    if unlabeled.len() < k {
        warn!(
            "only {} unlabeled samples for k = {k}; connecting to all of them",
            unlabeled.len()
        );
    }
    let take = k.min(unlabeled.len());
    let mut edges = Vec::with_capacity(labeled.len() * take);
    let mut scratch: Vec<(T, usize)> = Vec::with_capacity(unlabeled.len());
    for (lid, lv) in labeled {
        scratch.clear();
        scratch.extend(
            unlabeled
                .iter()
                .enumerate()
                .map(|(j, (_, uv))| (lv.squared_distance(uv), j)),
        );
        let by_distance_then_id = |a: &(T, usize), b: &(T, usize)| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| unlabeled[a.1].0.cmp(&unlabeled[b.1].0))
        };
        if take < scratch.len() {
            scratch.select_nth_unstable_by(take - 1, by_distance_then_id);
            scratch.truncate(take);
        }
        scratch.sort_by(by_distance_then_id);
        edges.extend(scratch.iter().map(|&(d2, j)| Edge {
            labeled: lid.clone(),
            unlabeled: unlabeled[j].0.clone(),
            weight: gaussian_weight(d2, sigma),
        }));
    }
    Ok(NeighborGraph { edges, k, sigma })
}
