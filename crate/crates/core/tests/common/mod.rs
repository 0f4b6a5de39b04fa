#![allow(dead_code)]

pub mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rqa_core::corpus::{generate_synthetic, Label};
use rqa_core::embedding::EmbeddingTable;
use rqa_core::features::fit_normalizer;
use rqa_core::losses::{frobenius_reg, LossConfig, LossVariant};
use rqa_core::model::{forward, AggregationMode, ModelParams};
use rqa_core::trainer::{datum_objective, Dataset, Datum};

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_REL_TOL: f64 = 1e-4;
pub const GRAD_EXEMPT: f64 = 1e-8;
pub const KINK_GUARD: f64 = 1e-3;

pub const GRAD_DIM: usize = 6;
pub const GRAD_HIDDEN: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    L2,
    Contrastive,
    Triplet,
    L2Manifold,
}

pub const CRITERIA: [Criterion; 4] = [
    Criterion::L2,
    Criterion::Contrastive,
    Criterion::Triplet,
    Criterion::L2Manifold,
];

pub fn small_dataset(seed: u64) -> Dataset<f64> {
    let corpus = generate_synthetic(4, 4, 6, seed);
    let stats = fit_normalizer(&corpus).unwrap();
    Dataset::new(&corpus, &EmbeddingTable::empty(GRAD_DIM), &stats)
}

/// Random parameters with every block, biases included, away from zero.
pub fn random_params(mode: AggregationMode, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let mut p = ModelParams::init(mode, GRAD_DIM, GRAD_HIDDEN, rng.random());
    for v in p.values_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    p
}

pub fn random_datum(
    criterion: Criterion,
    data: &Dataset<f64>,
    rng: &mut ChaCha8Rng,
) -> (Datum<f64>, LossConfig) {
    let pos: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == Label::Positive).collect();
    let neg: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == Label::Negative).collect();
    let unl: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == Label::Unlabeled).collect();
    let pick = |v: &[usize], rng: &mut ChaCha8Rng| v[rng.random_range(0..v.len())];
    let mut loss = LossConfig {
        gamma: rng.random_range(0.01..1.0),
        mu: rng.random_range(0.1..1.0),
        ..LossConfig::default()
    };
    let datum = match criterion {
        Criterion::L2 => {
            let positive = rng.random_bool(0.5);
            let sample = if positive { pick(&pos, rng) } else { pick(&neg, rng) };
            loss.variant = LossVariant::L2;
            Datum::Single { sample, positive }
        }
        Criterion::Contrastive => {
            loss.variant = LossVariant::Contrastive;
            let same = rng.random_bool(0.5);
            if same {
                let a = pick(&pos, rng);
                let b = loop {
                    let b = pick(&pos, rng);
                    if b != a {
                        break b;
                    }
                };
                Datum::Pair { first: a, second: b, same }
            } else {
                Datum::Pair {
                    first: pick(&pos, rng),
                    second: pick(&neg, rng),
                    same,
                }
            }
        }
        Criterion::Triplet => {
            loss.variant = LossVariant::Triplet;
            let anchor = pick(&pos, rng);
            let positive = loop {
                let b = pick(&pos, rng);
                if b != anchor {
                    break b;
                }
            };
            Datum::Triplet {
                anchor,
                positive,
                negative: pick(&neg, rng),
            }
        }
        Criterion::L2Manifold => {
            loss.variant = LossVariant::L2;
            loss.gamma_i = rng.random_range(0.1..2.0);
            Datum::Manifold {
                labeled: pick(&pos, rng),
                unlabeled: pick(&unl, rng),
                weight: rng.random_range(0.05..1.0),
            }
        }
    };
    (datum, loss)
}

fn members(datum: &Datum<f64>) -> Vec<usize> {
    match *datum {
        Datum::Single { sample, .. } => vec![sample],
        Datum::Pair { first, second, .. } => vec![first, second],
        Datum::Triplet { anchor, positive, negative } => vec![anchor, positive, negative],
        Datum::Manifold { labeled, unlabeled, .. } => vec![labeled, unlabeled],
    }
}

/// True when no relu pre-activation or triplet hinge sits within
/// `KINK_GUARD` of its breakpoint, so central differences are valid.
pub fn kink_free(params: &ModelParams<f64>, data: &Dataset<f64>, datum: &Datum<f64>, loss: &LossConfig) -> bool {
    let mut scores = Vec::new();
    for i in members(datum) {
        let t = forward(&data.resumes[i], params).unwrap();
        if t.hidden_pre.iter().any(|h| h.abs() < KINK_GUARD) {
            return false;
        }
        scores.push(t.score);
    }
    if let Datum::Triplet { .. } = datum {
        let (fa, fp, fn_) = (scores[0], scores[1], scores[2]);
        let hinge = (fa - fp).abs() - (fa - fn_) + loss.mu;
        if hinge.abs() < KINK_GUARD || (fa - fp).abs() < KINK_GUARD {
            return false;
        }
    }
    true
}

/// Central-difference gradient of the datum objective, one parameter at a
/// time. The criterion and the weight-decay term are differenced
/// separately and summed, which keeps the large decay value from swamping
/// small partials in cancellation error.
pub fn numeric_gradient(
    params: &ModelParams<f64>,
    data: &Dataset<f64>,
    datum: &Datum<f64>,
    loss: &LossConfig,
) -> Vec<f64> {
    let unregularized = LossConfig {
        gamma: 0.0,
        ..loss.clone()
    };
    let criterion = |p: &ModelParams<f64>| datum_objective(p, data, datum, &unregularized).unwrap().0;
    let decay = |p: &ModelParams<f64>| frobenius_reg(p, loss.gamma).0;
    let n = params.num_values();
    let mut out = Vec::with_capacity(n);
    let mut p = params.clone();
    for j in 0..n {
        let orig = *params.values().nth(j).unwrap();
        *p.values_mut().nth(j).unwrap() = orig + FD_STEP;
        let (c_plus, r_plus) = (criterion(&p), decay(&p));
        *p.values_mut().nth(j).unwrap() = orig - FD_STEP;
        let (c_minus, r_minus) = (criterion(&p), decay(&p));
        *p.values_mut().nth(j).unwrap() = orig;
        out.push((c_plus - c_minus) / (2.0 * FD_STEP) + (r_plus - r_minus) / (2.0 * FD_STEP));
    }
    out
}

/// Largest relative error between analytic and numeric partials, skipping
/// pairs where both magnitudes are below `GRAD_EXEMPT`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .filter(|(a, n)| a.abs() >= GRAD_EXEMPT || n.abs() >= GRAD_EXEMPT)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()))
        .fold(0.0, f64::max)
}

pub struct GradientCase {
    pub mode: AggregationMode,
    pub criterion: Criterion,
    pub seed: u64,
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Run the finite-difference oracle for one (mode, criterion, seed).
pub fn gradient_case(mode: AggregationMode, criterion: Criterion, seed: u64) -> GradientCase {
    let data = small_dataset(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(7919).wrapping_add(criterion as u64));
    let (params, datum, loss) = loop {
        let params = random_params(mode, &mut rng);
        let (datum, loss) = random_datum(criterion, &data, &mut rng);
        if kink_free(&params, &data, &datum, &loss) {
            break (params, datum, loss);
        }
    };
    let (_, grads) = datum_objective(&params, &data, &datum, &loss).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();
    let numeric = numeric_gradient(&params, &data, &datum, &loss);
    assert_eq!(analytic.len(), numeric.len());
    GradientCase {
        mode,
        criterion,
        seed,
        max_rel_error: max_relative_error(&analytic, &numeric),
        checked: analytic.len(),
    }
}
