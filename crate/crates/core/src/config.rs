//! Run configuration, one JSON object with a section per component.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::LabelMap;
use crate::emotion::FitConfig;
use crate::error::{Error, Result};
use crate::ontology::{GoalConfig, PersonaConfig};
use crate::rl::{PPOConfig, RewardSpec};
use crate::system::{NoiseConfig, RulePolicyConfig};
use crate::user_sim::{AgendaConfig, SimulatorVariant, UserSimConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ontology: OntologySection,
    pub goal: GoalConfig,
    pub persona: PersonaConfig,
    pub emotion: EmotionSection,
    pub nlg: NlgSection,
    pub system: SystemSection,
    pub user: AgendaConfig,
    pub ppo: PPOConfig,
    pub reward: RewardSpec,
    pub probe: ProbeSection,
    pub corpus: CorpusSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OntologySection {
    pub path: Option<PathBuf>,
    pub database: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmotionSection {
    pub weights: Option<PathBuf>,
    pub w_neutral: f64,
    pub fit: FitConfig,
}

impl Default for EmotionSection {
    fn default() -> Self {
        Self {
            weights: None,
            w_neutral: 1.0,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlgSection {
    pub user_templates: Option<PathBuf>,
    pub system_templates: Option<PathBuf>,
    pub apology_prefix: Option<String>,
}

/// How the system hears the user.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    /// User actions are consumed directly.
    #[default]
    Semantic,
    /// User text is parsed back into actions.
    Language,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub rule: RulePolicyConfig,
    pub channel: Channel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub episodes: usize,
    pub variant: SimulatorVariant,
    pub noise: NoiseConfig,
    /// Turn indices with fewer episodes than this are left out of curve comparisons.
    pub min_samples: usize,
    /// Dialogues per cross-evaluation cell and seed.
    pub eval_dialogues: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            episodes: 1000,
            variant: SimulatorVariant::Emous,
            noise: NoiseConfig {
                neglect: 0.2,
                repeat: 0.1,
                miss_info: 0.1,
            },
            min_samples: 30,
            eval_dialogues: 50,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub label_map: LabelMap,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.ontology.path,
            &mut self.ontology.database,
            &mut self.emotion.weights,
            &mut self.nlg.user_templates,
            &mut self.nlg.system_templates,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.persona.validate()?;
        self.user.validate()?;
        self.system.rule.validate()?;
        self.probe.noise.validate()?;
        self.ppo.validate()?;
        self.reward.validate()?;
        self.corpus.label_map.validate()?;
        if self.emotion.w_neutral.is_nan() || self.emotion.w_neutral < 0.0 {
            return Err(Error::NegativeWeight(self.emotion.w_neutral));
        }
        Ok(())
    }

    /// Training and evaluation sizes of the full protocol: 200 epochs of 1000
    /// turns on 5 seeds, 400 evaluation dialogues per pair.
    pub fn paper_scale(mut self) -> Self {
        self.ppo = self.ppo.paper_scale();
        self.probe.eval_dialogues = 400;
        self
    }

    pub fn user_sim(&self, variant: SimulatorVariant) -> UserSimConfig {
        UserSimConfig {
            variant,
            w_neutral: self.emotion.w_neutral,
            goal: self.goal.clone(),
            persona: self.persona.clone(),
            agenda: self.user.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
    }

    #[test]
    fn unknown_section_is_rejected() {
        assert!(Config::from_json(r#"{"planner": {}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = Config::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(Config::from_json(&text).unwrap(), c);
    }

    #[test]
    fn paper_scale_sizes() {
        let c = Config::default().paper_scale();
        assert_eq!((c.ppo.epochs, c.ppo.turns_per_epoch, c.ppo.seeds), (200, 1000, 5));
        assert_eq!(c.probe.eval_dialogues, 400);
    }

    #[test]
    fn relative_paths_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"emotion": {"weights": "w.json"}}"#).unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.emotion.weights, Some(dir.path().join("w.json")));
    }
}
