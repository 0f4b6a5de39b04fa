//! Brute-force reference implementations used to cross-check the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(id, score, positive)`
pub type Row = (String, f64, bool);

/// Pairwise concordance over every (positive, negative) pair.
pub fn auc(rows: &[Row]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (_, sp, p) in rows {
        for (_, sn, n) in rows {
            if *p && !*n {
                pairs += 1;
                total += if sp > sn {
                    1.0
                } else if sp == sn {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    total / pairs as f64
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// `(precision, recall, f1)` with score > 0 predicted positive.
pub fn f1(rows: &[Row]) -> (f64, f64, f64) {
    let tp = rows.iter().filter(|r| r.2 && r.1 > 0.0).count() as f64;
    let fp = rows.iter().filter(|r| !r.2 && r.1 > 0.0).count() as f64;
    let fneg = rows.iter().filter(|r| r.2 && r.1 <= 0.0).count() as f64;
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let f = if tp == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Mean precision at the rank of each positive. The rank of an item counts
/// every item with a higher score, or an equal score and a smaller id.
pub fn average_precision(rows: &[Row]) -> f64 {
    let ahead = |a: &Row, b: &Row| a.1 > b.1 || (a.1 == b.1 && a.0 < b.0);
    let mut sum = 0.0;
    let mut positives = 0usize;
    for item in rows.iter().filter(|r| r.2) {
        positives += 1;
        let rank = 1 + rows.iter().filter(|o| ahead(o, item)).count();
        let hits = 1 + rows.iter().filter(|o| o.2 && ahead(o, item)).count();
        sum += hits as f64 / rank as f64;
    }
    sum / positives as f64
}

/// Random labeled rows with both classes present. Scores sit on a coarse
/// grid so ties are common.
pub fn random_rows(rng: &mut ChaCha8Rng, max_len: usize) -> Vec<Row> {
    let n = rng.random_range(2..=max_len);
    let levels = rng.random_range(2..=20) as f64;
    let mut rows: Vec<Row> = (0..n)
        .map(|i| {
            let score = (rng.random_range(-1.0..1.0f64) * levels).round() / levels;
            (format!("s{:03}", rng.random_range(0..1000) * 100 + i), score, rng.random_bool(0.4))
        })
        .collect();
    rows[0].2 = true;
    rows[1].2 = false;
    rows
}

pub fn rows_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type IndexPairs = Vec<(usize, usize)>;

/// Same-class unordered pairs and (positive, negative) pairs, by index.
pub fn pairs(n_pos: usize, n_neg: usize) -> (IndexPairs, IndexPairs) {
    let ids = |base: usize, n: usize| (base..base + n).collect::<Vec<_>>();
    let (pos, neg) = (ids(0, n_pos), ids(100, n_neg));
    let mut same = Vec::new();
    for class in [&pos, &neg] {
        for &a in class.iter() {
            for &b in class.iter() {
                if a < b {
                    same.push((a, b));
                }
            }
        }
    }
    let mut cross = Vec::new();
    for &p in &pos {
        for &n in &neg {
            cross.push((p, n));
        }
    }
    (same, cross)
}

/// Every `(a, p, n)` with `a < p` positives and `n` negative.
pub fn triplets(n_pos: usize, n_neg: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 0..n_pos {
        for p in 0..n_pos {
            for n in 100..100 + n_neg {
                if a < p {
                    out.push((a, p, n));
                }
            }
        }
    }
    out
}

/// The `k` nearest points by squared distance, ties by ascending id,
/// found by fully sorting.
pub fn nearest(query: &[f64], points: &[(String, Vec<f64>)], k: usize) -> Vec<String> {
    let mut d: Vec<(f64, &String)> = points
        .iter()
        .map(|(id, v)| (query.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum(), id))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)));
    d.into_iter().take(k).map(|(_, id)| id.clone()).collect()
}
