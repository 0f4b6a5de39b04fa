//! Training criteria on model scores: least squares, contrastive, triplet,
//! the manifold penalty, and Frobenius weight decay.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelParams};
use crate::scalar::Scalar;

/// Exponent constant of the dissimilar-pair term, kept as printed.
pub const CONTRASTIVE_DECAY: f64 = 2.77;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    L2,
    Contrastive,
    Triplet,
}

impl fmt::Display for LossVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossVariant::L2 => "l2",
            LossVariant::Contrastive => "contrastive",
            LossVariant::Triplet => "triplet",
        })
    }
}

impl FromStr for LossVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(LossVariant::L2),
            "contrastive" => Ok(LossVariant::Contrastive),
            "triplet" => Ok(LossVariant::Triplet),
            other => Err(Error::Config(format!("unknown loss {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub variant: LossVariant,
    /// Contrastive scale; also the largest possible score gap.
    pub eta: f64,
    /// Triplet margin.
    pub mu: f64,
    /// Frobenius weight.
    pub gamma: f64,
    /// Manifold penalty weight; 0 disables the unlabeled term.
    pub gamma_i: f64,
    /// Gaussian kernel bandwidth.
    pub sigma: f64,
    /// Unlabeled neighbors per labeled sample.
    pub k: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            variant: LossVariant::L2,
            eta: 2.0,
            mu: 0.5,
            gamma: 2f64.powi(-5),
            gamma_i: 0.0,
            sigma: 1.0,
            k: 10,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(what.to_string()))
            }
        };
        check(self.eta > 0.0 && self.eta.is_finite(), "eta must be > 0")?;
        check(self.mu >= 0.0 && self.mu.is_finite(), "mu must be >= 0")?;
        check(self.gamma >= 0.0 && self.gamma.is_finite(), "gamma must be >= 0")?;
        check(self.gamma_i >= 0.0 && self.gamma_i.is_finite(), "gamma_i must be >= 0")?;
        check(self.sigma > 0.0 && self.sigma.is_finite(), "sigma must be > 0")?;
        check(self.k >= 1, "k must be >= 1")
    }

    pub fn uses_manifold(&self) -> bool {
        self.gamma_i > 0.0
    }
}

/// `½(f − y)²` and its derivative `f − y`.
pub fn l2_loss<T: Scalar>(f: T, y: T) -> Result<(T, T)> {
    if y != T::one() && y != -T::one() {
        return Err(Error::Argument(format!("l2 target must be ±1, got {y}")));
    }
    let d = f - y;
    Ok((T::lit(0.5) * d * d, d))
}

/// Pair loss on `δ = f1 − f2`. `same = true` pulls δ toward 0 with
/// `(2/η)δ²`; `same = false` expects `f1` to be the positive member and
/// pushes δ up with `2η·exp(−2.77δ/η)`.
pub fn contrastive_loss<T: Scalar>(f1: T, f2: T, same: bool, eta: T) -> Result<(T, T, T)> {
    if eta.is_nan() || eta <= T::zero() {
        return Err(Error::Argument(format!("eta must be > 0, got {eta}")));
    }
    let two = T::lit(2.0);
    let delta = f1 - f2;
    let (value, d_delta) = if same {
        (two / eta * delta * delta, two * two / eta * delta)
    } else {
        let rate = T::lit(CONTRASTIVE_DECAY) / eta;
        let v = two * eta * (-rate * delta).exp();
        (v, -rate * v)
    };
    Ok((value, d_delta, -d_delta))
}

/// `max(0, |fa − fp| − (fa − fn) + μ)` with subgradient 0 at both kinks.
pub fn triplet_loss<T: Scalar>(fa: T, fp: T, fn_: T, mu: T) -> (T, T, T, T) {
    let ap = fa - fp;
    let hinge = ap.abs() - (fa - fn_) + mu;
    if hinge <= T::zero() {
        return (T::zero(), T::zero(), T::zero(), T::zero());
    }
    let s = if ap > T::zero() {
        T::one()
    } else if ap < T::zero() {
        -T::one()
    } else {
        T::zero()
    };
    // ∂/∂fa = s − 1, ∂/∂fp = −s, ∂/∂fn = 1
    (hinge, s - T::one(), -s, T::one())
}

/// `γ_I·ω·(f_l − f_u)²` tying a labeled score to an unlabeled neighbor.
pub fn mr_penalty<T: Scalar>(f_labeled: T, f_unlabeled: T, omega: T, gamma_i: T) -> (T, T, T) {
    let d = f_labeled - f_unlabeled;
    let w = gamma_i * omega;
    let g = T::lit(2.0) * w * d;
    (w * d * d, g, -g)
}

/// `(γ/2)·Σ‖W‖²_F` over `W_a`, `W1`, `w2`. Biases and `q` are not penalized.
pub fn frobenius_reg<T: Scalar>(params: &ModelParams<T>, gamma: T) -> (T, Gradients<T>) {
    let mut grads = params.zeros_like();
    if gamma == T::zero() {
        return (T::zero(), grads);
    }
    let mut sq = T::zero();
    let mut decay = |w: &[T], g: &mut [T]| {
        for (gi, &wi) in g.iter_mut().zip(w) {
            sq = sq + wi * wi;
            *gi = gamma * wi;
        }
    };
    if let (Some(a), Some(ga)) = (params.attention.as_ref(), grads.attention.as_mut()) {
        decay(&a.w_a.data, &mut ga.w_a.data);
    }
    decay(&params.w1.data, &mut grads.w1.data);
    decay(&params.w2, &mut grads.w2);
    (T::lit(0.5) * gamma * sq, grads)
}
