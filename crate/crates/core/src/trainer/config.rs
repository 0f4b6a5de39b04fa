use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossVariant};
use crate::model::{AggregationMode, DEFAULT_HIDDEN};
use crate::embedding::DEFAULT_DIM;

/// Hyperparameter values searched on the validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub gamma: Vec<f64>,
    pub gamma_i: Vec<f64>,
    pub k: Vec<usize>,
    pub mu: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            gamma: (-5..=5).map(|i| 2f64.powi(i)).collect(),
            gamma_i: [-8, -6, -4, -2, 0, 2, 4].iter().map(|&i| 2f64.powi(i)).collect(),
            k: vec![5, 10, 15, 20, 30],
            mu: vec![0.1, 0.2, 0.5, 1.0],
        }
    }
}

impl Grids {
    /// Grids holding only the values already set in `loss`.
    pub fn fixed(loss: &LossConfig) -> Self {
        Self {
            gamma: vec![loss.gamma],
            gamma_i: vec![loss.gamma_i],
            k: vec![loss.k],
            mu: vec![loss.mu],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub aggregation: AggregationMode,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a validation AUC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub grids: Grids,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossConfig::default(),
            aggregation: AggregationMode::Average,
            learning_rate: 0.01,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            hidden_dim: DEFAULT_HIDDEN,
            embedding_dim: DEFAULT_DIM,
            grids: Grids::default(),
        }
    }
}

/// Flat key-value layout of the config file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    loss: Option<LossVariant>,
    aggregation: Option<AggregationMode>,
    gamma: Option<f64>,
    gamma_i: Option<f64>,
    k: Option<usize>,
    mu: Option<f64>,
    eta: Option<f64>,
    sigma: Option<f64>,
    learning_rate: Option<f64>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    seed: Option<u64>,
    hidden_dim: Option<usize>,
    embedding_dim: Option<usize>,
    grids: Option<Grids>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be > 0");
        }
        if self.max_epochs == 0 || self.patience == 0 {
            return fail("max_epochs and patience must be positive");
        }
        if self.hidden_dim == 0 || self.embedding_dim == 0 {
            return fail("hidden_dim and embedding_dim must be positive");
        }
        let g = &self.grids;
        if g.gamma.is_empty() || g.gamma_i.is_empty() || g.k.is_empty() || g.mu.is_empty() {
            return fail("hyperparameter grids must be non-empty");
        }
        if g.gamma.iter().chain(&g.gamma_i).chain(&g.mu).any(|v| !v.is_finite() || *v < 0.0)
            || g.k.contains(&0)
        {
            return fail("grid values must be finite and non-negative, k >= 1");
        }
        Ok(())
    }

    /// Parse the TOML config file. Absent keys keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let mut c = TrainConfig::default();
        macro_rules! take {
            ($($src:ident => $($dst:ident).+),* $(,)?) => {
                $(if let Some(v) = file.$src { c.$($dst).+ = v; })*
            };
        }
        take!(
            loss => loss.variant,
            aggregation => aggregation,
            gamma => loss.gamma,
            gamma_i => loss.gamma_i,
            k => loss.k,
            mu => loss.mu,
            eta => loss.eta,
            sigma => loss.sigma,
            learning_rate => learning_rate,
            max_epochs => max_epochs,
            patience => patience,
            seed => seed,
            hidden_dim => hidden_dim,
            embedding_dim => embedding_dim,
            grids => grids,
        );
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        let file = ConfigFile {
            loss: Some(self.loss.variant),
            aggregation: Some(self.aggregation),
            gamma: Some(self.loss.gamma),
            gamma_i: Some(self.loss.gamma_i),
            k: Some(self.loss.k),
            mu: Some(self.loss.mu),
            eta: Some(self.loss.eta),
            sigma: Some(self.loss.sigma),
            learning_rate: Some(self.learning_rate),
            max_epochs: Some(self.max_epochs),
            patience: Some(self.patience),
            seed: Some(self.seed),
            hidden_dim: Some(self.hidden_dim),
            embedding_dim: Some(self.embedding_dim),
            grids: Some(self.grids.clone()),
        };
        toml::to_string(&file).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.grids.gamma.len(), 11);
        assert_eq!(c.grids.gamma[0], 1.0 / 32.0);
        assert_eq!(c.grids.gamma_i[0], 1.0 / 256.0);
        assert_eq!(c.grids.gamma_i.last(), Some(&16.0));
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let mut c = TrainConfig::default();
        c.loss.variant = LossVariant::Triplet;
        c.loss.gamma_i = 0.25;
        c.grids.k = vec![3];
        assert_eq!(TrainConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);

        let partial = TrainConfig::from_toml_str("loss = \"contrastive\"\nseed = 9\n").unwrap();
        assert_eq!(partial.loss.variant, LossVariant::Contrastive);
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.max_epochs, 100);
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "loss = \"hinge\"",
            "learning_rate = 0.0",
            "bogus = 1",
            "[grids]\ngamma = []",
            "sigma = -1.0",
        ] {
            assert!(
                matches!(TrainConfig::from_toml_str(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
