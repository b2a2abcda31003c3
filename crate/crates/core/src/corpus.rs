//! Emotion-annotated dialogue corpora: loading, synthetic generation, persona
//! derivation, feature reconstruction and emotion-prediction scoring.
//!
//! File layout: `{"dialogues": [{"turns": [{"speaker": "user" | "system",
//! "text": ..., "actions": [[i, d, s, v], ...], "emotion": int}]}]}` where
//! `actions` and `emotion` are optional and only user turns carry emotions.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::emotion::{
    distribution_of, encode, extract_features, fit_weights, reweight_neutral, sentiment_of, Emotion, EmotionWeights,
    FeatureView, FitConfig, FitReport, LabeledExample, ProgressSummary, Sentiment,
};
use crate::error::{Error, Result};
use crate::lang::parse_utterance;
use crate::metrics::macro_f1;
use crate::ontology::{Conduct, EventEmotion, Persona, PersonaConfig, SemanticAction, GENERAL};
use crate::rl::{simulate, RewardSpec, SystemAgent, SystemSetup};
use crate::seed;
use crate::system::{NoiseConfig, RulePolicyConfig};
use crate::user_sim::{UserSimConfig, HISTORY_WINDOW};
use crate::world::World;

/// Integer label → emotion, persisted as the list of labels in index order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelMap(pub Vec<Emotion>);

impl Default for LabelMap {
    /// The EmoWOZ order.
    fn default() -> Self {
        use Emotion::*;
        Self(vec![Neutral, Fearful, Dissatisfied, Apologetic, Abusive, Excited, Satisfied])
    }
}

impl LabelMap {
    pub fn validate(&self) -> Result<()> {
        let bijective = self.0.len() == Emotion::ALL.len() && Emotion::ALL.iter().all(|e| self.0.contains(e));
        if bijective {
            Ok(())
        } else {
            Err(Error::Config("label map must list each of the seven emotions once".into()))
        }
    }

    pub fn emotion(&self, index: i64) -> Result<Emotion> {
        usize::try_from(index)
            .ok()
            .and_then(|i| self.0.get(i).copied())
            .ok_or(Error::UnmappedLabel(index))
    }

    pub fn index(&self, emotion: Emotion) -> i64 {
        self.0.iter().position(|e| *e == emotion).expect("label map is bijective") as i64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusTurn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<SemanticAction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emotion: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dialogue {
    pub turns: Vec<CorpusTurn>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Corpus {
    pub dialogues: Vec<Dialogue>,
}

impl Corpus {
    pub fn from_json(text: &str, labels: &LabelMap) -> Result<Self> {
        let corpus: Corpus = serde_json::from_str(text)?;
        corpus.validate(labels)?;
        Ok(corpus)
    }

    pub fn validate(&self, labels: &LabelMap) -> Result<()> {
        labels.validate()?;
        for (i, d) in self.dialogues.iter().enumerate() {
            for (j, t) in d.turns.iter().enumerate() {
                if let Some(e) = t.emotion {
                    if t.speaker == Speaker::System {
                        return Err(Error::schema(
                            format!("dialogues[{i}].turns[{j}].emotion"),
                            "system turns carry no emotion",
                        ));
                    }
                    labels.emotion(e)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes") + "\n"
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Small synthetic corpus shipped with the crate.
    pub fn bundled_mini() -> Self {
        Self::from_json(include_str!("../data/mini_corpus.json"), &LabelMap::default())
            .expect("bundled corpus is valid")
    }

    pub fn user_turns(&self) -> impl Iterator<Item = &CorpusTurn> {
        self.dialogues
            .iter()
            .flat_map(|d| &d.turns)
            .filter(|t| t.speaker == Speaker::User)
    }
}

pub fn load_corpus(path: impl AsRef<Path>, labels: &LabelMap) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_json(&text, labels)
}

/// Settings for simulator-generated corpora.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub episodes: usize,
    pub user_sim: UserSimConfig,
    pub rule: RulePolicyConfig,
    pub noise: NoiseConfig,
    pub max_turns: usize,
}

impl SyntheticConfig {
    pub fn new(user_sim: UserSimConfig, episodes: usize) -> Self {
        Self {
            episodes,
            user_sim,
            rule: RulePolicyConfig::default(),
            noise: NoiseConfig::default(),
            max_turns: 20,
        }
    }
}

/// Simulated dialogues against the rule system, with ground-truth actions and
/// emotions. Every episode opens with the system greeting.
pub fn generate_synthetic_corpus(
    world: &World,
    config: &SyntheticConfig,
    labels: &LabelMap,
    seed: u64,
) -> Result<Corpus> {
    labels.validate()?;
    let system = SystemSetup::new(SystemAgent::Rule(&config.rule)).with_noise(&config.noise);
    let logs = simulate(
        world,
        system,
        &config.user_sim,
        &RewardSpec::default(),
        config.max_turns,
        config.episodes,
        seed,
    )?;
    let dialogues = logs
        .into_iter()
        .map(|l| Dialogue {
            turns: l
                .turns
                .into_iter()
                .flat_map(|t| {
                    [
                        CorpusTurn {
                            speaker: Speaker::System,
                            text: t.system_utterance,
                            actions: Some(t.system_actions),
                            emotion: None,
                        },
                        CorpusTurn {
                            speaker: Speaker::User,
                            text: t.user_utterance,
                            actions: Some(t.user_actions),
                            emotion: Some(labels.index(t.emotion)),
                        },
                    ]
                })
                .collect(),
        })
        .collect();
    Ok(Corpus { dialogues })
}

fn turn_actions(turn: &CorpusTurn, world: &World) -> Vec<SemanticAction> {
    match &turn.actions {
        Some(a) => a.clone(),
        None => {
            let templates = match turn.speaker {
                Speaker::User => &world.user_templates,
                Speaker::System => &world.system_templates,
            };
            parse_utterance(&turn.text, templates, &world.ontology)
        }
    }
}

fn domains_of(actions: &[SemanticAction]) -> impl Iterator<Item = &str> {
    actions.iter().filter(|a| a.domain != GENERAL).map(|a| a.domain.as_str())
}

/// Persona per dialogue: impolite iff an abusive label occurs; each domain the
/// user mentions takes the more frequent of excited and fearful among its
/// labelled turns (excited on ties), neutral when neither occurs.
pub fn derive_personas(corpus: &Corpus, labels: &LabelMap, world: &World) -> Result<Vec<Persona>> {
    corpus
        .dialogues
        .iter()
        .map(|d| {
            let mut conduct = Conduct::Polite;
            let mut tallies: IndexMap<String, (usize, usize)> = IndexMap::new();
            for t in d.turns.iter().filter(|t| t.speaker == Speaker::User) {
                let emotion = t.emotion.map(|e| labels.emotion(e)).transpose()?;
                if emotion == Some(Emotion::Abusive) {
                    conduct = Conduct::Impolite;
                }
                let actions = turn_actions(t, world);
                for dom in domains_of(&actions) {
                    let e = tallies.entry(dom.to_string()).or_default();
                    match emotion {
                        Some(Emotion::Excited) => e.0 += 1,
                        Some(Emotion::Fearful) => e.1 += 1,
                        _ => {}
                    }
                }
            }
            let events = tallies
                .into_iter()
                .map(|(dom, (x, f))| {
                    let ev = if x == 0 && f == 0 {
                        EventEmotion::Neutral
                    } else if x >= f {
                        EventEmotion::Excited
                    } else {
                        EventEmotion::Fearful
                    };
                    (dom, ev)
                })
                .collect();
            Ok(Persona { conduct, events })
        })
        .collect()
}

/// Rebuilds elicitor features for every labelled user turn. The user-error
/// flag is not observable in a corpus and is left off.
pub fn corpus_examples(
    corpus: &Corpus,
    labels: &LabelMap,
    world: &World,
    view: FeatureView,
) -> Result<Vec<LabeledExample>> {
    let personas = derive_personas(corpus, labels, world)?;
    let mut out = Vec::new();
    for (d, persona) in corpus.dialogues.iter().zip(&personas) {
        let mut current_system: Vec<SemanticAction> = Vec::new();
        let mut previous_system: Vec<SemanticAction> = Vec::new();
        let mut history: Vec<Vec<SemanticAction>> = Vec::new();
        let mut failures = 0;
        let mut user_turn = 0;
        let mut active: Option<String> = None;
        for t in &d.turns {
            let actions = turn_actions(t, world);
            match t.speaker {
                Speaker::System => {
                    previous_system = std::mem::replace(&mut current_system, actions);
                }
                Speaker::User => {
                    failures = ProgressSummary::next_failures(failures, &current_system);
                    let progress = ProgressSummary {
                        delta: ProgressSummary::delta_of(
                            &current_system,
                            history.last().map_or(&[], Vec::as_slice),
                        ),
                        failures,
                        user_error: false,
                    };
                    if let Some(dom) = domains_of(&actions).chain(domains_of(&current_system)).next() {
                        active = Some(dom.to_string());
                    }
                    let event = active.as_deref().map_or(EventEmotion::Neutral, |a| persona.event(a));
                    let features = extract_features(
                        &current_system,
                        &history,
                        &previous_system,
                        progress,
                        event,
                        persona.conduct,
                        user_turn,
                    );
                    if let Some(e) = t.emotion {
                        out.push(LabeledExample {
                            features: encode(&features, view),
                            label: labels.emotion(e)?,
                        });
                    }
                    history.push(actions);
                    if history.len() > HISTORY_WINDOW {
                        history.remove(0);
                    }
                    previous_system = current_system.clone();
                    user_turn += 1;
                }
            }
        }
    }
    Ok(out)
}

pub fn fit_on_corpus(
    corpus: &Corpus,
    labels: &LabelMap,
    world: &World,
    view: FeatureView,
    config: &FitConfig,
) -> Result<FitReport> {
    fit_weights(&corpus_examples(corpus, labels, world, view)?, config)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    pub sentiment_f1: f64,
    pub emotion_f1: f64,
}

/// Argmax predictions after neutral reweighting, scored by macro-F1.
pub fn evaluate_emotion_prediction(
    weights: &EmotionWeights,
    corpus: &Corpus,
    labels: &LabelMap,
    world: &World,
    w_neutral: f64,
    view: FeatureView,
) -> Result<EmotionScores> {
    let examples = corpus_examples(corpus, labels, world, view)?;
    if examples.is_empty() {
        return Err(Error::Empty("labelled user turns"));
    }
    let mut preds = Vec::with_capacity(examples.len());
    for x in &examples {
        preds.push(reweight_neutral(&distribution_of(&x.features, weights)?, w_neutral)?.argmax());
    }
    let refs: Vec<Emotion> = examples.iter().map(|x| x.label).collect();
    let sp: Vec<Sentiment> = preds.iter().map(|e| sentiment_of(*e)).collect();
    let sr: Vec<Sentiment> = refs.iter().map(|e| sentiment_of(*e)).collect();
    Ok(EmotionScores {
        sentiment_f1: macro_f1(&sp, &sr, &Sentiment::ALL)?,
        emotion_f1: macro_f1(&preds, &refs, &Emotion::ALL)?,
    })
}

/// Teacher weights and persona distribution under which event emotions
/// depend strongly on the persona.
pub fn persona_dependent_setup(world: &World) -> (EmotionWeights, UserSimConfig) {
    let mut w = world.weights.clone();
    w.set(Emotion::Excited, "event_excited", 4.5);
    w.set(Emotion::Fearful, "event_fearful", 4.5);
    let mut sim = UserSimConfig::new(crate::user_sim::SimulatorVariant::Emous);
    sim.persona = PersonaConfig {
        polite_probability: 0.8,
        event: [
            (EventEmotion::Neutral, 0.4),
            (EventEmotion::Excited, 0.3),
            (EventEmotion::Fearful, 0.3),
        ]
        .into_iter()
        .collect(),
    };
    (w, sim)
}

/// Emotion scores of models fitted with and without persona features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationScores {
    pub full: EmotionScores,
    pub no_persona: EmotionScores,
}

/// Fits both feature views on a synthetic corpus drawn from `teacher` and
/// scores them on a held-out corpus from the same source.
pub fn persona_ablation(
    world: &World,
    synthetic: &SyntheticConfig,
    labels: &LabelMap,
    fit: &FitConfig,
    seed: u64,
) -> Result<AblationScores> {
    let train = generate_synthetic_corpus(world, synthetic, labels, seed::derive(seed, 0))?;
    let test = generate_synthetic_corpus(world, synthetic, labels, seed::derive(seed, 1))?;
    let score = |view| -> Result<EmotionScores> {
        let w = fit_on_corpus(&train, labels, world, view, fit)?.weights;
        evaluate_emotion_prediction(&w, &test, labels, world, 1.0, view)
    };
    Ok(AblationScores {
        full: score(FeatureView::Full)?,
        no_persona: score(FeatureView::NoPersona)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::user_sim::SimulatorVariant;

    #[test]
    fn bundled_mini_loads() {
        let c = Corpus::bundled_mini();
        assert!(!c.dialogues.is_empty());
    }

    #[test]
    fn unmapped_label_is_rejected() {
        let text = r#"{"dialogues": [{"turns": [{"speaker": "user", "text": "hi", "emotion": 9}]}]}"#;
        assert!(matches!(
            Corpus::from_json(text, &LabelMap::default()),
            Err(Error::UnmappedLabel(9))
        ));
    }

    #[test]
    fn empty_dialogue_list_is_valid() {
        let c = Corpus::from_json(r#"{"dialogues": []}"#, &LabelMap::default()).unwrap();
        assert!(c.dialogues.is_empty());
    }

    #[test]
    fn non_bijective_label_map_is_rejected() {
        assert!(LabelMap(vec![Emotion::Neutral; 7]).validate().is_err());
    }

    fn user(text: &str, actions: Vec<SemanticAction>, emotion: Emotion) -> CorpusTurn {
        CorpusTurn {
            speaker: Speaker::User,
            text: text.into(),
            actions: Some(actions),
            emotion: Some(LabelMap::default().index(emotion)),
        }
    }

    #[test]
    fn abusive_turn_makes_impolite() {
        let c = Corpus {
            dialogues: vec![Dialogue {
                turns: vec![user("x", vec![], Emotion::Abusive)],
            }],
        };
        let p = derive_personas(&c, &LabelMap::default(), &World::bundled()).unwrap();
        assert_eq!(p[0].conduct, Conduct::Impolite);
    }

    #[test]
    fn excited_majority_sets_event() {
        let a = vec![SemanticAction::new("inform", "attraction", "area", "north")];
        let n = vec![SemanticAction::new("inform", "hotel", "area", "north")];
        let c = Corpus {
            dialogues: vec![Dialogue {
                turns: vec![
                    user("a", a.clone(), Emotion::Excited),
                    user("b", a, Emotion::Excited),
                    user("c", n, Emotion::Neutral),
                ],
            }],
        };
        let p = &derive_personas(&c, &LabelMap::default(), &World::bundled()).unwrap()[0];
        assert_eq!(p.conduct, Conduct::Polite);
        assert_eq!(p.event("attraction"), EventEmotion::Excited);
        assert_eq!(p.event("hotel"), EventEmotion::Neutral);
    }

    #[test]
    fn synthetic_corpus_size_and_determinism() {
        let w = World::bundled();
        let cfg = SyntheticConfig::new(UserSimConfig::new(SimulatorVariant::Emous), 10);
        let a = generate_synthetic_corpus(&w, &cfg, &LabelMap::default(), 5).unwrap();
        assert_eq!(a.dialogues.len(), 10);
        assert_eq!(a, generate_synthetic_corpus(&w, &cfg, &LabelMap::default(), 5).unwrap());
    }

    #[test]
    fn neutral_override_gives_neutral_labels() {
        let w = World::bundled();
        let mut sim = UserSimConfig::new(SimulatorVariant::Emous);
        sim.w_neutral = f64::INFINITY;
        let c = generate_synthetic_corpus(&w, &SyntheticConfig::new(sim, 10), &LabelMap::default(), 1).unwrap();
        let neutral = LabelMap::default().index(Emotion::Neutral);
        assert!(c.user_turns().all(|t| t.emotion == Some(neutral)));
    }

    #[test]
    fn unlabelled_corpus_cannot_be_scored() {
        let c = Corpus {
            dialogues: vec![Dialogue {
                turns: vec![CorpusTurn {
                    speaker: Speaker::User,
                    text: "hello".into(),
                    actions: None,
                    emotion: None,
                }],
            }],
        };
        let w = World::bundled();
        assert!(evaluate_emotion_prediction(&w.weights, &c, &LabelMap::default(), &w, 1.0, FeatureView::Full).is_err());
    }
}
