//! Static resources shared by every episode.

use crate::config::Config;
use crate::emotion::EmotionWeights;
use crate::error::Result;
use crate::lang::{Side, TemplateSet};
use crate::ontology::Ontology;
use crate::system::Database;

#[derive(Clone, Debug)]
pub struct World {
    pub ontology: Ontology,
    pub db: Database,
    pub user_templates: TemplateSet,
    pub system_templates: TemplateSet,
    pub weights: EmotionWeights,
}

impl World {
    pub fn bundled() -> Self {
        Self {
            ontology: Ontology::bundled(),
            db: Database::bundled(),
            user_templates: TemplateSet::user_bundled(),
            system_templates: TemplateSet::system_bundled(),
            weights: EmotionWeights::bundled(),
        }
    }

    /// Loads whatever the config overrides, bundled data otherwise.
    pub fn from_config(config: &Config) -> Result<Self> {
        let ontology = match &config.ontology.path {
            Some(p) => Ontology::load(p)?,
            None => Ontology::bundled(),
        };
        let db = match &config.ontology.database {
            Some(p) => Database::load(p, &ontology)?,
            None => Database::bundled(),
        };
        let mut user_templates = match &config.nlg.user_templates {
            Some(p) => TemplateSet::load(p, Side::User)?,
            None => TemplateSet::user_bundled(),
        };
        if let Some(prefix) = &config.nlg.apology_prefix {
            user_templates = user_templates.with_apology_prefix(prefix.clone());
        }
        let system_templates = match &config.nlg.system_templates {
            Some(p) => TemplateSet::load(p, Side::System)?,
            None => TemplateSet::system_bundled(),
        };
        let weights = match &config.emotion.weights {
            Some(p) => EmotionWeights::load(p)?,
            None => EmotionWeights::bundled(),
        };
        Ok(Self {
            ontology,
            db,
            user_templates,
            system_templates,
            weights,
        })
    }

    pub fn with_weights(mut self, weights: EmotionWeights) -> Self {
        self.weights = weights;
        self
    }
}
