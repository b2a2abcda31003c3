use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::ontology::{Conduct, Ontology, SemanticAction, DONTCARE, GENERAL, NONE};

const BUNDLED_USER: &str = include_str!("../../data/user_templates.json");
const BUNDLED_SYSTEM: &str = include_str!("../../data/system_templates.json");

/// Pseudo-intent holding templates for `inform(d, s, dontcare)`.
pub const DONTCARE_INTENT: &str = "inform_dontcare";
/// System text for an empty action set.
pub const GREETING_FALLBACK: &str = "Hello, how can I help you?";
pub const DEFAULT_APOLOGY_PREFIX: &str = "Sorry, my mistake.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tone {
    Neutral,
    PolitePositive,
    PoliteNegative,
    Apologetic,
    Abusive,
    Excited,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    User,
    System,
}

/// Chooses the surface tone. Abusive tone needs an impolite user.
pub fn tone_for(emotion: Emotion, conduct: Conduct) -> Tone {
    match (emotion, conduct) {
        (Emotion::Dissatisfied | Emotion::Abusive, Conduct::Impolite) => Tone::Abusive,
        (Emotion::Apologetic, _) => Tone::Apologetic,
        (Emotion::Excited, _) => Tone::Excited,
        (Emotion::Satisfied, _) => Tone::PolitePositive,
        (Emotion::Dissatisfied | Emotion::Abusive | Emotion::Fearful, _) => Tone::PoliteNegative,
        (Emotion::Neutral, _) => Tone::Neutral,
    }
}

type ToneMap = IndexMap<Tone, Vec<String>>;
type Inventory = IndexMap<String, IndexMap<String, IndexMap<String, ToneMap>>>;

#[derive(Clone, Debug)]
pub(crate) struct Pattern {
    pub regex: Regex,
    pub intent: String,
    pub domain: String,
    pub slot: String,
    /// Set for templates that carry no placeholder but imply a value.
    pub implied_value: Option<&'static str>,
}

/// Surface templates keyed by intent, domain, slot and tone. Templates mark
/// the value position with `$value`.
#[derive(Clone, Debug)]
pub struct TemplateSet {
    side: Side,
    inventory: Inventory,
    apology_prefix: String,
    patterns: Vec<Pattern>,
}

impl TemplateSet {
    pub fn from_json(text: &str, side: Side) -> Result<Self> {
        let inventory: Inventory = serde_json::from_str(text)?;
        Self::new(inventory, side, DEFAULT_APOLOGY_PREFIX.to_string())
    }

    pub fn load(path: impl AsRef<Path>, side: Side) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, side)
    }

    pub fn user_bundled() -> Self {
        Self::from_json(BUNDLED_USER, Side::User).expect("bundled user templates are valid")
    }

    pub fn system_bundled() -> Self {
        Self::from_json(BUNDLED_SYSTEM, Side::System).expect("bundled system templates are valid")
    }

    fn new(inventory: Inventory, side: Side, apology_prefix: String) -> Result<Self> {
        let mut patterns = Vec::new();
        for (intent, domains) in &inventory {
            for (domain, slots) in domains {
                for (slot, tones) in slots {
                    let field = format!("{intent}.{domain}.{slot}");
                    if !tones.contains_key(&Tone::Neutral) {
                        return Err(Error::schema(field, "no neutral template"));
                    }
                    if side == Side::System && tones.contains_key(&Tone::Abusive) {
                        return Err(Error::schema(field, "abusive templates are user-side only"));
                    }
                    for template in tones.values().flatten() {
                        if template.trim().is_empty() {
                            return Err(Error::schema(field, "empty template"));
                        }
                        let (real_intent, implied) = if intent == DONTCARE_INTENT {
                            ("inform", Some(DONTCARE))
                        } else {
                            (intent.as_str(), None)
                        };
                        patterns.push(Pattern {
                            regex: compile(template),
                            intent: real_intent.to_string(),
                            domain: domain.clone(),
                            slot: slot.clone(),
                            implied_value: implied,
                        });
                    }
                }
            }
        }
        Ok(Self {
            side,
            inventory,
            apology_prefix,
            patterns,
        })
    }

    pub fn with_apology_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.apology_prefix = prefix.into();
        self
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn apology_prefix(&self) -> &str {
        &self.apology_prefix
    }

    pub(crate) fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    fn key_of(action: &SemanticAction) -> (&str, &str, &str) {
        let intent = if action.is("inform") && action.value == DONTCARE {
            DONTCARE_INTENT
        } else {
            action.intent.as_str()
        };
        (intent, action.domain.as_str(), action.slot.as_str())
    }

    pub fn tones(&self, action: &SemanticAction) -> Option<&ToneMap> {
        let (i, d, s) = Self::key_of(action);
        self.inventory.get(i)?.get(d)?.get(s)
    }

    pub fn covers(&self, action: &SemanticAction) -> bool {
        self.tones(action).is_some()
    }

    /// Lists every ontology action key lacking a neutral template.
    pub fn missing_coverage(&self, ontology: &Ontology) -> Vec<String> {
        let mut needed: Vec<(String, String, String)> = Vec::new();
        let general: &[&str] = match self.side {
            Side::User => &["affirm", "negate", "thank", "bye"],
            Side::System => &["reqmore", "greet", "bye"],
        };
        for (d, schema) in &ontology.domains {
            for s in schema.informable.keys() {
                needed.push(("inform".into(), d.clone(), s.clone()));
                match self.side {
                    Side::User => needed.push((DONTCARE_INTENT.into(), d.clone(), s.clone())),
                    Side::System => needed.push(("request".into(), d.clone(), s.clone())),
                }
            }
            for s in &schema.requestable {
                let intent = match self.side {
                    Side::User => "request",
                    Side::System => "inform",
                };
                needed.push((intent.into(), d.clone(), s.clone()));
            }
            if self.side == Side::System {
                needed.push(("offer".into(), d.clone(), "name".into()));
                needed.push(("nooffer".into(), d.clone(), NONE.into()));
                needed.push(("book".into(), d.clone(), NONE.into()));
            }
        }
        for g in general {
            needed.push((g.to_string(), GENERAL.into(), NONE.into()));
        }
        needed
            .into_iter()
            .filter(|(i, d, s)| {
                self.inventory
                    .get(i)
                    .and_then(|m| m.get(d))
                    .and_then(|m| m.get(s))
                    .is_none_or(|t| t.get(&Tone::Neutral).is_none_or(Vec::is_empty))
            })
            .map(|(i, d, s)| format!("{i}({d}, {s})"))
            .collect()
    }

    fn pick<R: Rng>(&self, action: &SemanticAction, tone: Tone, rng: &mut R) -> Result<String> {
        let tones = self
            .tones(action)
            .ok_or_else(|| Error::UncoveredAction(action.to_string()))?;
        let list = tones
            .get(&tone)
            .filter(|l| !l.is_empty())
            .or_else(|| tones.get(&Tone::Neutral))
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::UncoveredAction(action.to_string()))?;
        let template = list.choose(rng).expect("non-empty template list");
        Ok(template.replace("$value", &action.value))
    }
}

fn compile(template: &str) -> Regex {
    let pattern = match template.split_once("$value") {
        Some((pre, post)) => format!("^{}(.+?){}", regex::escape(pre), regex::escape(post)),
        None => format!("^{}", regex::escape(template)),
    };
    Regex::new(&pattern).expect("escaped template compiles")
}

/// Realised text with the actions and tone that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub text: String,
    pub actions: Vec<SemanticAction>,
    pub tone: Tone,
}

fn realize<R: Rng>(
    actions: &[SemanticAction],
    tone: Tone,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<Vec<String>> {
    actions.iter().map(|a| templates.pick(a, tone, rng)).collect()
}

/// One template per action in the tone chosen by (emotion, conduct); an
/// apologetic user opens with the apology prefix.
pub fn realize_user<R: Rng>(
    actions: &[SemanticAction],
    emotion: Emotion,
    conduct: Conduct,
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<Utterance> {
    let tone = tone_for(emotion, conduct);
    let mut parts = realize(actions, tone, templates, rng)?;
    if tone == Tone::Apologetic && !templates.apology_prefix.is_empty() {
        parts.insert(0, templates.apology_prefix.clone());
    }
    Ok(Utterance {
        text: parts.join(" "),
        actions: actions.to_vec(),
        tone,
    })
}

pub fn realize_system<R: Rng>(
    actions: &[SemanticAction],
    templates: &TemplateSet,
    rng: &mut R,
) -> Result<Utterance> {
    let text = if actions.is_empty() {
        GREETING_FALLBACK.to_string()
    } else {
        realize(actions, Tone::Neutral, templates, rng)?.join(" ")
    };
    Ok(Utterance {
        text,
        actions: actions.to_vec(),
        tone: Tone::Neutral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn act(i: &str, d: &str, s: &str, v: &str) -> SemanticAction {
        SemanticAction::new(i, d, s, v)
    }

    #[test]
    fn bundled_sets_cover_ontology() {
        let o = Ontology::bundled();
        assert!(TemplateSet::user_bundled().missing_coverage(&o).is_empty());
        assert!(TemplateSet::system_bundled().missing_coverage(&o).is_empty());
    }

    #[test]
    fn neutral_inform_contains_value() {
        let t = TemplateSet::user_bundled();
        let u = realize_user(
            &[act("inform", "restaurant", "area", "centre")],
            Emotion::Neutral,
            Conduct::Polite,
            &t,
            &mut seed::rng(0),
        )
        .unwrap();
        assert!(u.text.contains("centre"), "{}", u.text);
    }

    #[test]
    fn apologetic_opens_with_prefix() {
        let t = TemplateSet::user_bundled();
        let u = realize_user(
            &[act("inform", "restaurant", "area", "centre")],
            Emotion::Apologetic,
            Conduct::Polite,
            &t,
            &mut seed::rng(0),
        )
        .unwrap();
        assert!(u.text.starts_with(DEFAULT_APOLOGY_PREFIX), "{}", u.text);
    }

    #[test]
    fn realisation_is_deterministic() {
        let t = TemplateSet::user_bundled();
        let acts = [act("request", "hotel", "phone", "none"), SemanticAction::general("thank")];
        let a = realize_user(&acts, Emotion::Satisfied, Conduct::Polite, &t, &mut seed::rng(4)).unwrap();
        let b = realize_user(&acts, Emotion::Satisfied, Conduct::Polite, &t, &mut seed::rng(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polite_users_never_get_abusive_tone() {
        for e in Emotion::ALL {
            assert_ne!(tone_for(e, Conduct::Polite), Tone::Abusive);
        }
        assert_eq!(tone_for(Emotion::Dissatisfied, Conduct::Impolite), Tone::Abusive);
    }

    #[test]
    fn system_nooffer_and_greeting() {
        let t = TemplateSet::system_bundled();
        let u = realize_system(&[act("nooffer", "restaurant", "none", "none")], &t, &mut seed::rng(0)).unwrap();
        let fixtures = &t.tones(&act("nooffer", "restaurant", "none", "none")).unwrap()[&Tone::Neutral];
        assert!(fixtures.contains(&u.text));
        let g = realize_system(&[], &t, &mut seed::rng(0)).unwrap();
        assert_eq!(g.text, GREETING_FALLBACK);
    }

    #[test]
    fn value_with_spaces_survives() {
        let t = TemplateSet::system_bundled();
        let u = realize_system(&[act("inform", "restaurant", "address", "12 mill road")], &t, &mut seed::rng(2)).unwrap();
        assert!(u.text.contains("12 mill road"));
    }

    #[test]
    fn uncovered_action_errors() {
        let t = TemplateSet::user_bundled();
        let err = realize_user(&[act("inform", "spaceport", "gate", "7")], Emotion::Neutral, Conduct::Polite, &t, &mut seed::rng(0));
        assert!(matches!(err, Err(Error::UncoveredAction(_))));
    }

    #[test]
    fn system_side_rejects_abusive_templates() {
        let json = r#"{"bye": {"general": {"none": {"neutral": ["Bye."], "abusive": ["Get lost."]}}}}"#;
        assert!(TemplateSet::from_json(json, Side::System).is_err());
        assert!(TemplateSet::from_json(json, Side::User).is_ok());
    }
}
