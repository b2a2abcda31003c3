//! Ontology, user goals, semantic actions and personas.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed;

/// Sentinel for an absent slot or value.
pub const NONE: &str = "none";
/// Reserved value admissible for every informable slot.
pub const DONTCARE: &str = "dontcare";
/// Domain label for domain-independent actions (thank, bye, ...).
pub const GENERAL: &str = "general";

const BUNDLED_ONTOLOGY: &str = include_str!("../data/ontology.json");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSchema {
    pub informable: IndexMap<String, Vec<String>>,
    pub requestable: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ontology {
    pub domains: IndexMap<String, DomainSchema>,
    pub user_intents: Vec<String>,
    pub system_intents: Vec<String>,
}

impl Ontology {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ontology: Ontology = serde_json::from_str(text)?;
        ontology.validate()?;
        Ok(ontology)
    }

    /// The five-domain fixture shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_ONTOLOGY).expect("bundled ontology is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::schema("domains", "at least one domain is required"));
        }
        for (domain, schema) in &self.domains {
            if domain == GENERAL || domain == NONE {
                return Err(Error::schema(
                    format!("domains.{domain}"),
                    "reserved domain name",
                ));
            }
            for (slot, values) in &schema.informable {
                let field = format!("domains.{domain}.informable.{slot}");
                if values.is_empty() {
                    return Err(Error::schema(field, "empty value list"));
                }
                if values.iter().any(|v| v == NONE || v == DONTCARE || v.is_empty()) {
                    return Err(Error::schema(field, "reserved or empty value"));
                }
                let mut seen = values.clone();
                seen.sort();
                seen.dedup();
                if seen.len() != values.len() {
                    return Err(Error::schema(field, "duplicate value"));
                }
            }
            for (i, slot) in schema.requestable.iter().enumerate() {
                let field = format!("domains.{domain}.requestable");
                if schema.informable.contains_key(slot) {
                    return Err(Error::schema(
                        field,
                        format!("slot `{slot}` is both informable and requestable"),
                    ));
                }
                if schema.requestable[..i].contains(slot) {
                    return Err(Error::schema(field, format!("duplicate slot `{slot}`")));
                }
            }
        }
        if self.user_intents.is_empty() {
            return Err(Error::schema("user_intents", "empty intent list"));
        }
        if self.system_intents.is_empty() {
            return Err(Error::schema("system_intents", "empty intent list"));
        }
        Ok(())
    }

    pub fn domain(&self, name: &str) -> Option<&DomainSchema> {
        self.domains.get(name)
    }

    pub fn values(&self, domain: &str, slot: &str) -> Option<&[String]> {
        self.domains
            .get(domain)
            .and_then(|d| d.informable.get(slot))
            .map(Vec::as_slice)
    }

    pub fn is_informable(&self, domain: &str, slot: &str) -> bool {
        self.values(domain, slot).is_some()
    }

    pub fn is_requestable(&self, domain: &str, slot: &str) -> bool {
        self.domains
            .get(domain)
            .is_some_and(|d| d.requestable.iter().any(|s| s == slot))
    }

    /// Whether `value` may fill the informable slot, counting `dontcare`.
    pub fn admits(&self, domain: &str, slot: &str, value: &str) -> bool {
        value == DONTCARE || self.values(domain, slot).is_some_and(|vs| vs.iter().any(|v| v == value))
    }

    /// Every (domain, slot, value) triple of the informable slots, in ontology order.
    pub fn value_lexicon(&self) -> Vec<(&str, &str, &str)> {
        let mut out = Vec::new();
        for (d, schema) in &self.domains {
            for (s, values) in &schema.informable {
                for v in values {
                    out.push((d.as_str(), s.as_str(), v.as_str()));
                }
            }
        }
        out
    }
}

/// An atomic dialogue move: (intent, domain, slot, value).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[String; 4]", into = "[String; 4]")]
pub struct SemanticAction {
    pub intent: String,
    pub domain: String,
    pub slot: String,
    pub value: String,
}

impl SemanticAction {
    pub fn new(
        intent: impl Into<String>,
        domain: impl Into<String>,
        slot: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Self {
            intent: intent.into(),
            domain: domain.into(),
            slot: slot.into(),
            value: value.into(),
        }
    }

    /// A domain-independent action such as `thank` or `bye`.
    pub fn general(intent: impl Into<String>) -> Self {
        Self::new(intent, GENERAL, NONE, NONE)
    }

    pub fn is(&self, intent: &str) -> bool {
        self.intent == intent
    }

    /// Checks the action against the ontology from one side of the dialogue.
    pub fn validate(&self, ontology: &Ontology, intents: &[String]) -> Result<()> {
        if !intents.contains(&self.intent) {
            return Err(Error::schema("intent", format!("unknown intent `{}`", self.intent)));
        }
        if self.slot == NONE && self.value != NONE {
            return Err(Error::schema("value", "slot `none` requires value `none`"));
        }
        if self.domain != GENERAL && !ontology.domains.contains_key(&self.domain) {
            return Err(Error::UnknownDomain(self.domain.clone()));
        }
        Ok(())
    }
}

impl From<[String; 4]> for SemanticAction {
    fn from([intent, domain, slot, value]: [String; 4]) -> Self {
        Self {
            intent,
            domain,
            slot,
            value,
        }
    }
}

impl From<SemanticAction> for [String; 4] {
    fn from(a: SemanticAction) -> Self {
        [a.intent, a.domain, a.slot, a.value]
    }
}

impl fmt::Display for SemanticAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {}, {})", self.intent, self.domain, self.slot, self.value)
    }
}

/// One domain's share of a user goal.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainGoal {
    /// Constraints, slot → value.
    pub info: IndexMap<String, String>,
    /// Slots whose values the user wants to learn.
    pub reqt: Vec<String>,
}

/// What the user wants: per-domain constraints and requested slots.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserGoal {
    pub domains: IndexMap<String, DomainGoal>,
}

impl UserGoal {
    pub fn domain_names(&self) -> impl Iterator<Item = &str> {
        self.domains.keys().map(String::as_str)
    }

    /// Lists every way the goal fails to resolve against the ontology.
    pub fn violations(&self, ontology: &Ontology) -> Vec<String> {
        let mut out = Vec::new();
        if !self
            .domains
            .values()
            .any(|g| !g.info.is_empty() || !g.reqt.is_empty())
        {
            out.push("goal has no constraint or request".to_string());
        }
        for (d, g) in &self.domains {
            let Some(schema) = ontology.domain(d) else {
                out.push(format!("unknown domain `{d}`"));
                continue;
            };
            for (s, v) in &g.info {
                match schema.informable.get(s) {
                    None => out.push(format!("`{d}.{s}` is not informable")),
                    Some(values) if !values.contains(v) => {
                        out.push(format!("`{v}` is not a value of `{d}.{s}`"))
                    }
                    _ => {}
                }
            }
            for (i, s) in g.reqt.iter().enumerate() {
                if !schema.requestable.contains(s) {
                    out.push(format!("`{d}.{s}` is not requestable"));
                }
                if g.reqt[..i].contains(s) {
                    out.push(format!("duplicate request `{d}.{s}`"));
                }
            }
        }
        out
    }
}

/// Size bounds and domain restriction for goal sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalConfig {
    /// Admissible domains; `None` admits every ontology domain.
    pub domains: Option<Vec<String>>,
    pub min_domains: usize,
    pub max_domains: usize,
    pub min_constraints: usize,
    /// Upper bound on constraints per domain, clipped to the domain's informables.
    pub max_constraints: usize,
    pub min_requests: usize,
    pub max_requests: usize,
}

impl Default for GoalConfig {
    fn default() -> Self {
        Self {
            domains: None,
            min_domains: 1,
            max_domains: 2,
            min_constraints: 1,
            max_constraints: usize::MAX,
            min_requests: 0,
            max_requests: usize::MAX,
        }
    }
}

impl GoalConfig {
    /// Every bound pinned to one: a single domain with one constraint and one request.
    pub fn minimal() -> Self {
        Self {
            domains: None,
            min_domains: 1,
            max_domains: 1,
            min_constraints: 1,
            max_constraints: 1,
            min_requests: 1,
            max_requests: 1,
        }
    }
}

/// Samples a goal: domain count, constraint count and request count are each
/// uniform within their (clipped) bounds; slots and values are uniform.
pub fn sample_goal(ontology: &Ontology, config: &GoalConfig, seed: u64) -> Result<UserGoal> {
    if config.min_domains == 0 || config.min_constraints == 0 {
        return Err(Error::Config("goal size lower bounds must be at least 1".into()));
    }
    if config.min_domains > config.max_domains
        || config.min_constraints > config.max_constraints
        || config.min_requests > config.max_requests
    {
        return Err(Error::Config("goal size bounds are inverted".into()));
    }
    let admissible: Vec<&str> = match &config.domains {
        None => ontology.domains.keys().map(String::as_str).collect(),
        Some(list) => {
            for d in list {
                if !ontology.domains.contains_key(d) {
                    return Err(Error::UnknownDomain(d.clone()));
                }
            }
            ontology
                .domains
                .keys()
                .filter(|d| list.contains(d))
                .map(String::as_str)
                .collect()
        }
    };
    if admissible.is_empty() {
        return Err(Error::Empty("admissible goal domains"));
    }
    let mut rng = seed::rng(seed);
    let hi = config.max_domains.min(admissible.len());
    let lo = config.min_domains.min(hi);
    let n_domains = rng.gen_range(lo..=hi);
    let chosen: Vec<&str> = admissible
        .choose_multiple(&mut rng, n_domains)
        .copied()
        .collect();

    let mut goal = UserGoal::default();
    for d in chosen {
        let schema = &ontology.domains[d];
        let informables: Vec<&String> = schema.informable.keys().collect();
        let hi = config.max_constraints.min(informables.len());
        let lo = config.min_constraints.min(hi);
        let n_info = rng.gen_range(lo..=hi);
        let mut slots: Vec<&String> = informables.choose_multiple(&mut rng, n_info).copied().collect();
        slots.sort_by_key(|s| schema.informable.get_index_of(s.as_str()));
        let mut dg = DomainGoal::default();
        for s in slots {
            let v = schema.informable[s].choose(&mut rng).expect("non-empty values");
            dg.info.insert(s.clone(), v.clone());
        }
        let hi = config.max_requests.min(schema.requestable.len());
        let lo = config.min_requests.min(hi);
        let n_req = rng.gen_range(lo..=hi);
        let mut reqs: Vec<&String> = schema.requestable.choose_multiple(&mut rng, n_req).collect();
        reqs.sort_by_key(|s| schema.requestable.iter().position(|r| r == *s));
        dg.reqt = reqs.into_iter().cloned().collect();
        goal.domains.insert(d.to_string(), dg);
    }
    Ok(goal)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conduct {
    Polite,
    Impolite,
}

impl Conduct {
    pub fn as_str(self) -> &'static str {
        match self {
            Conduct::Polite => "polite",
            Conduct::Impolite => "impolite",
        }
    }
}

/// How the user feels about an event in a domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventEmotion {
    Excited,
    Fearful,
    Neutral,
}

impl EventEmotion {
    pub fn as_str(self) -> &'static str {
        match self {
            EventEmotion::Excited => "excited",
            EventEmotion::Fearful => "fearful",
            EventEmotion::Neutral => "neutral",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "excited" => Some(EventEmotion::Excited),
            "fearful" => Some(EventEmotion::Fearful),
            "neutral" => Some(EventEmotion::Neutral),
            _ => None,
        }
    }
}

/// Intrinsic user traits, serialised as `{"user": conduct, domain: event, ...}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Persona {
    pub conduct: Conduct,
    pub events: IndexMap<String, EventEmotion>,
}

impl Persona {
    /// A polite persona with neutral feelings about every goal domain.
    pub fn neutral_for(goal: &UserGoal) -> Self {
        Self {
            conduct: Conduct::Polite,
            events: goal
                .domains
                .keys()
                .map(|d| (d.clone(), EventEmotion::Neutral))
                .collect(),
        }
    }

    pub fn event(&self, domain: &str) -> EventEmotion {
        self.events.get(domain).copied().unwrap_or(EventEmotion::Neutral)
    }

    pub fn check_against(&self, goal: &UserGoal) -> Result<()> {
        let keys: Vec<&String> = self.events.keys().collect();
        let domains: Vec<&String> = goal.domains.keys().collect();
        let same = keys.len() == domains.len() && keys.iter().all(|k| goal.domains.contains_key(*k));
        if same {
            Ok(())
        } else {
            Err(Error::PersonaMismatch(format!(
                "persona domains {keys:?} vs goal domains {domains:?}"
            )))
        }
    }
}

impl Serialize for Persona {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.events.len() + 1))?;
        map.serialize_entry("user", self.conduct.as_str())?;
        for (d, e) in &self.events {
            map.serialize_entry(d, e.as_str())?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Persona {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PersonaVisitor;

        impl<'de> Visitor<'de> for PersonaVisitor {
            type Value = Persona;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a persona object with a `user` conduct entry")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Persona, A::Error> {
                let mut conduct = None;
                let mut events = IndexMap::new();
                while let Some((key, value)) = map.next_entry::<String, String>()? {
                    if key == "user" {
                        conduct = Some(match value.as_str() {
                            "polite" => Conduct::Polite,
                            "impolite" => Conduct::Impolite,
                            other => {
                                return Err(de::Error::custom(format!("unknown conduct `{other}`")))
                            }
                        });
                    } else {
                        let e = EventEmotion::parse(&value).ok_or_else(|| {
                            de::Error::custom(format!("unknown event emotion `{value}`"))
                        })?;
                        events.insert(key, e);
                    }
                }
                let conduct = conduct.ok_or_else(|| de::Error::missing_field("user"))?;
                Ok(Persona { conduct, events })
            }
        }

        deserializer.deserialize_map(PersonaVisitor)
    }
}

/// Distribution over personas used at inference time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersonaConfig {
    pub polite_probability: f64,
    /// Event-emotion distribution applied independently to each goal domain.
    pub event: IndexMap<EventEmotion, f64>,
}

impl Default for PersonaConfig {
    fn default() -> Self {
        Self {
            polite_probability: 0.95,
            event: [
                (EventEmotion::Neutral, 0.7),
                (EventEmotion::Excited, 0.2),
                (EventEmotion::Fearful, 0.1),
            ]
            .into_iter()
            .collect(),
        }
    }
}

impl PersonaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.polite_probability) {
            return Err(Error::Config(format!(
                "polite probability {} outside [0, 1]",
                self.polite_probability
            )));
        }
        if self.event.values().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("event probability outside [0, 1]".into()));
        }
        let total: f64 = self.event.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "event-emotion distribution sums to {total}, not 1"
            )));
        }
        Ok(())
    }
}

pub fn sample_persona(goal: &UserGoal, config: &PersonaConfig, seed: u64) -> Result<Persona> {
    config.validate()?;
    let mut rng = seed::rng(seed);
    let conduct = if rng.gen::<f64>() < config.polite_probability {
        Conduct::Polite
    } else {
        Conduct::Impolite
    };
    let mut events = IndexMap::new();
    for d in goal.domains.keys() {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = EventEmotion::Neutral;
        for (e, p) in &config.event {
            acc += p;
            if u < acc {
                pick = *e;
                break;
            }
        }
        events.insert(d.clone(), pick);
    }
    Ok(Persona { conduct, events })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Ontology {
        Ontology::from_json(
            r#"{"domains": {"restaurant": {"informable": {"area": ["centre"]}, "requestable": ["phone"]}},
                "user_intents": ["inform", "request"], "system_intents": ["inform"]}"#,
        )
        .unwrap()
    }

    #[test]
    fn bundled_has_five_domains() {
        let o = Ontology::bundled();
        let names: Vec<&str> = o.domains.keys().map(String::as_str).collect();
        assert_eq!(names, ["restaurant", "hotel", "attraction", "taxi", "train"]);
    }

    #[test]
    fn empty_value_list_is_schema_violation() {
        let err = Ontology::from_json(
            r#"{"domains": {"hotel": {"informable": {"area": []}, "requestable": []}},
                "user_intents": ["inform"], "system_intents": ["inform"]}"#,
        )
        .unwrap_err();
        match err {
            Error::Schema { field, .. } => assert_eq!(field, "domains.hotel.informable.area"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_parse_error() {
        assert!(matches!(Ontology::from_json(""), Err(Error::Json(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(Ontology::load("/nonexistent/ontology.json"), Err(Error::Io { .. })));
    }

    #[test]
    fn restricted_goal_mentions_only_restaurant() {
        let o = Ontology::bundled();
        let cfg = GoalConfig {
            domains: Some(vec!["restaurant".into()]),
            ..GoalConfig::default()
        };
        for seed in 0..50 {
            let g = sample_goal(&o, &cfg, seed).unwrap();
            assert_eq!(g.domain_names().collect::<Vec<_>>(), ["restaurant"]);
        }
    }

    #[test]
    fn degenerate_goal_has_no_freedom() {
        let g = sample_goal(&tiny(), &GoalConfig::minimal(), 3).unwrap();
        assert_eq!(g.domains["restaurant"].info["area"], "centre");
        assert_eq!(g.domains["restaurant"].reqt, ["phone"]);
    }

    #[test]
    fn goal_sampling_is_deterministic() {
        let o = Ontology::bundled();
        let a = sample_goal(&o, &GoalConfig::default(), 7).unwrap();
        let b = sample_goal(&o, &GoalConfig::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_admissible_set_errors() {
        let cfg = GoalConfig {
            domains: Some(vec![]),
            ..GoalConfig::default()
        };
        assert!(matches!(sample_goal(&tiny(), &cfg, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn sampled_goals_validate() {
        let o = Ontology::bundled();
        for seed in 0..1000 {
            let g = sample_goal(&o, &GoalConfig::default(), seed).unwrap();
            assert!(g.violations(&o).is_empty(), "seed {seed}: {:?}", g.violations(&o));
        }
    }

    #[test]
    fn polite_probability_one_is_always_polite() {
        let o = Ontology::bundled();
        let g = sample_goal(&o, &GoalConfig::default(), 1).unwrap();
        let cfg = PersonaConfig {
            polite_probability: 1.0,
            ..PersonaConfig::default()
        };
        for seed in 0..100 {
            assert_eq!(sample_persona(&g, &cfg, seed).unwrap().conduct, Conduct::Polite);
        }
    }

    #[test]
    fn default_polite_rate() {
        let o = Ontology::bundled();
        let g = sample_goal(&o, &GoalConfig::default(), 1).unwrap();
        let cfg = PersonaConfig::default();
        let n = 10_000;
        let polite = (0..n)
            .filter(|&s| sample_persona(&g, &cfg, s).unwrap().conduct == Conduct::Polite)
            .count();
        let rate = polite as f64 / n as f64;
        assert!((rate - 0.95).abs() <= 0.02, "rate {rate}");
    }

    #[test]
    fn persona_keys_follow_goal() {
        let mut g = UserGoal::default();
        g.domains.insert("hotel".into(), DomainGoal::default());
        g.domains.insert("taxi".into(), DomainGoal::default());
        let p = sample_persona(&g, &PersonaConfig::default(), 0).unwrap();
        assert_eq!(p.events.keys().collect::<Vec<_>>(), ["hotel", "taxi"]);
        p.check_against(&g).unwrap();
    }

    #[test]
    fn unnormalized_event_distribution_errors() {
        let cfg = PersonaConfig {
            event: [(EventEmotion::Neutral, 0.5)].into_iter().collect(),
            ..PersonaConfig::default()
        };
        assert!(sample_persona(&UserGoal::default(), &cfg, 0).is_err());
    }

    #[test]
    fn persona_json_shape() {
        let p = Persona {
            conduct: Conduct::Polite,
            events: [("attraction".to_string(), EventEmotion::Excited)].into_iter().collect(),
        };
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"user":"polite","attraction":"excited"}"#);
        let back: Persona = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn action_serialises_as_quadruple() {
        let a = SemanticAction::new("inform", "restaurant", "area", "centre");
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"["inform","restaurant","area","centre"]"#);
    }
}
