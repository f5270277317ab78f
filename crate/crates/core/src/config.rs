//! Run configuration: one TOML document with `[policy]`, `[gate]`,
//! `[feasibility]`, `[aesthetics]`, `[grpo]` and optional `[assets]` sections.
//! Every field has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aesthetics::{AestheticWeights, AttributeEmbedder, EmbeddingProvider, HarmonyTemplates, Lexicon, RemoteEmbedder};
use crate::error::{Error, Result};
use crate::feasibility::FeasibilityWeights;
use crate::gate::GateConfig;
use crate::policy::codec::hex_digest;
use crate::policy::PolicyConfig;
use crate::scene::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

/// Scale of the trajectory value fed to the group advantage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueScale {
    /// `TruncMean(S·w)`. With weights summing to 1 this is about `S/T`, which
    /// favors long sequences whenever `S < 0`.
    PerToken,
    /// `T·TruncMean(S·w)`, about `S` for any length.
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_epsilon: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    /// Fraction trimmed from each tail by the truncated mean.
    pub trunc_alpha: f64,
    pub eps_std: f64,
    pub max_steps: u64,
    pub temperature: f64,
    pub rng_seed: u64,
    /// Briefs per step, cycled in order; 0 means all briefs every step.
    pub briefs_per_step: usize,
    /// Checkpoint period in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
    /// Raster cell size (m) for the aesthetic critic during training.
    pub critic_cell_size: f64,
    pub value_scale: ValueScale,
    /// Trust-region guard: an update whose mean token KL against the
    /// sampling snapshot exceeds this is halved until it does not (at most
    /// `max_backtracks` times). 0 disables the guard.
    pub max_kl: f64,
    pub max_backtracks: u32,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_epsilon: 0.2,
            kl_beta: 0.02,
            learning_rate: 5e-3,
            optimizer: Optimizer::Adam,
            trunc_alpha: 0.1,
            eps_std: 1e-8,
            max_steps: 3000,
            temperature: 1.0,
            rng_seed: 0,
            briefs_per_step: 0,
            checkpoint_every: 0,
            critic_cell_size: 0.1,
            value_scale: ValueScale::Sequence,
            max_kl: 0.01,
            max_backtracks: 8,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("grpo.{m}")));
        if self.group_size < 2 {
            return fail("group_size must be >= 2");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return fail("clip_epsilon must be in (0, 1)");
        }
        if !(self.kl_beta >= 0.0) {
            return fail("kl_beta must be >= 0");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and >= 0");
        }
        if !(0.0..=0.25).contains(&self.trunc_alpha) {
            return fail("trunc_alpha must be in [0, 0.25]");
        }
        if !(self.eps_std > 0.0) {
            return fail("eps_std must be > 0");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be finite and > 0");
        }
        if !(self.max_kl >= 0.0 && self.max_kl.is_finite()) {
            return fail("max_kl must be finite and >= 0");
        }
        if !(self.critic_cell_size >= crate::schematic::MIN_CELL
            && self.critic_cell_size <= crate::schematic::MAX_CELL)
        {
            return fail("critic_cell_size must be in [0.01, 0.2]");
        }
        Ok(())
    }
}

/// Asset overrides; absent entries use the shipped defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssetsConfig {
    pub catalog: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub harmony_templates: Option<PathBuf>,
    /// Base URL of a remote `/embed` service; the built-in embedder otherwise.
    pub embedder_url: Option<String>,
    pub embedder_dimension: usize,
    pub embedder_timeout_secs: u64,
}

impl Default for AssetsConfig {
    fn default() -> Self {
        Self {
            catalog: None,
            lexicon: None,
            harmony_templates: None,
            embedder_url: None,
            embedder_dimension: crate::aesthetics::embedding::BUILTIN_DIM,
            embedder_timeout_secs: 30,
        }
    }
}

/// Catalog, lexicon, templates and embedding provider resolved from [`AssetsConfig`].
pub struct Assets {
    pub catalog: Catalog,
    pub lexicon: Lexicon,
    pub templates: HarmonyTemplates,
    pub provider: Box<dyn EmbeddingProvider>,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

impl AssetsConfig {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<Assets> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let catalog = match &self.catalog {
            Some(p) => Catalog::from_toml(&read(&resolve(p))?)?,
            None => Catalog::default(),
        };
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::from_toml(&read(&resolve(p))?)?,
            None => Lexicon::default(),
        };
        let templates = match &self.harmony_templates {
            Some(p) => HarmonyTemplates::from_toml(&read(&resolve(p))?)?,
            None => HarmonyTemplates::default(),
        };
        let provider: Box<dyn EmbeddingProvider> = match &self.embedder_url {
            Some(url) => Box::new(RemoteEmbedder::new(
                url.clone(),
                self.embedder_dimension,
                Duration::from_secs(self.embedder_timeout_secs),
            )),
            None => Box::new(AttributeEmbedder::new(catalog.clone(), lexicon.clone())),
        };
        Ok(Assets {
            catalog,
            lexicon,
            templates,
            provider,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub policy: PolicyConfig,
    pub gate: GateConfig,
    pub feasibility: FeasibilityWeights,
    pub aesthetics: AestheticWeights,
    pub grpo: GrpoConfig,
    pub assets: AssetsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        self.feasibility.validate()?;
        self.aesthetics.validate()?;
        self.grpo.validate()
    }

    /// Fully resolved TOML, every default spelled out.
    pub fn resolved(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn hash(&self) -> String {
        hex_digest(self.resolved().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn resolved_round_trips() {
        let mut c = RunConfig::default();
        c.gate.lambda_aes = 0.5;
        c.grpo.group_size = 4;
        let back = RunConfig::from_toml(&c.resolved()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn rejects_invalid_values() {
        assert!(RunConfig::from_toml("[grpo]\ngroup_size = 1\n").is_err());
        assert!(RunConfig::from_toml("[gate]\npsi_penalty = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[bogus]\nx = 1\n").is_err());
    }
}
