use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::belief::BeliefState;
use super::db::{Database, Record, NAME};
use crate::error::{Error, Result};
use crate::ontology::{Ontology, SemanticAction, DONTCARE, GENERAL, NONE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulePolicyConfig {
    /// Chance of echoing the slot-values the user just gave.
    pub confirm_probability: f64,
    /// Constraints a domain needs before the policy searches it.
    pub min_constraints: usize,
}

impl Default for RulePolicyConfig {
    fn default() -> Self {
        Self {
            confirm_probability: 0.5,
            min_constraints: 1,
        }
    }
}

impl RulePolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confirm_probability) {
            return Err(Error::Config(format!(
                "confirm_probability {} outside [0, 1]",
                self.confirm_probability
            )));
        }
        Ok(())
    }
}

pub(crate) fn echo_informs(belief: &BeliefState, ontology: &Ontology) -> Vec<SemanticAction> {
    belief
        .last_user_actions
        .iter()
        .filter(|a| a.is("inform") && a.value != DONTCARE && ontology.is_informable(&a.domain, &a.slot))
        .cloned()
        .collect()
}

pub(crate) fn answers(domain: &str, record: &Record, belief: &BeliefState) -> Vec<SemanticAction> {
    belief
        .requested_in(domain)
        .filter_map(|s| record.get(s).map(|v| SemanticAction::new("inform", domain, s, v)))
        .collect()
}

fn push_unique(out: &mut Vec<SemanticAction>, a: SemanticAction) {
    if !out.contains(&a) {
        out.push(a);
    }
}

/// Hand-written reference system.
///
/// Answers requests from offered entities, searches domains the user just
/// constrained (offer on a match, nooffer otherwise), asks for a missing
/// constraint below the threshold, and may echo the user's informs.
pub fn rule_policy<R: Rng>(
    belief: &BeliefState,
    db: &Database,
    ontology: &Ontology,
    config: &RulePolicyConfig,
    rng: &mut R,
) -> Vec<SemanticAction> {
    if belief.user_done {
        return vec![SemanticAction::general("bye")];
    }
    let mut out = Vec::new();
    if rng.gen::<f64>() < config.confirm_probability {
        out.extend(echo_informs(belief, ontology));
    }
    let echoed = out.len();

    let mut search: Vec<&str> = Vec::new();
    let mentioned = belief
        .last_user_actions
        .iter()
        .filter(|a| a.is("inform"))
        .map(|a| a.domain.as_str())
        .chain(belief.requested.iter().map(|(d, _)| d.as_str()));
    for d in mentioned {
        if d != GENERAL && !search.contains(&d) && !belief.offered.contains_key(d) {
            search.push(d);
        }
    }

    let mut offered = belief.offered.clone();
    for d in search {
        let Some(schema) = ontology.domain(d) else {
            continue;
        };
        let empty = Default::default();
        let constraints = belief.constraints_of(d).unwrap_or(&empty);
        if constraints.len() < config.min_constraints {
            if let Some(s) = schema.informable.keys().find(|s| !constraints.contains_key(*s)) {
                push_unique(&mut out, SemanticAction::new("request", d, s, NONE));
            }
            continue;
        }
        match db.query(d, constraints).ok().and_then(|m| m.first().copied()) {
            Some(record) => {
                push_unique(&mut out, SemanticAction::new("offer", d, NAME, &record[NAME]));
                offered.insert(d.to_string(), record[NAME].clone());
            }
            None => push_unique(&mut out, SemanticAction::new("nooffer", d, NONE, NONE)),
        }
    }

    for (d, name) in &offered {
        if let Some(record) = db.find(d, name) {
            for a in answers(d, record, belief) {
                push_unique(&mut out, a);
            }
        }
    }
    if out.len() == echoed {
        out.push(SemanticAction::general("reqmore"));
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Drop the answers to pending requests.
    pub neglect: f64,
    /// Replay the previous system turn.
    #[serde(rename = "loop")]
    pub repeat: f64,
    /// Ask again for a slot the user just gave.
    pub miss_info: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("neglect", self.neglect), ("loop", self.repeat), ("miss_info", self.miss_info)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("noise {name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.neglect == 0.0 && self.repeat == 0.0 && self.miss_info == 0.0
    }
}

/// Corrupts a system turn for behaviour probing. `belief` is the state the
/// actions were chosen in; its last system turn is the one a loop replays.
pub fn inject_misbehavior<R: Rng>(
    actions: &[SemanticAction],
    belief: &BeliefState,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<SemanticAction> {
    let (u_loop, u_neglect, u_miss): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    if u_loop < noise.repeat && !belief.last_system_actions.is_empty() {
        return belief.last_system_actions.clone();
    }
    let mut out = actions.to_vec();
    if u_neglect < noise.neglect {
        let answers_request = |a: &SemanticAction| {
            a.is("inform")
                && belief
                    .requested
                    .iter()
                    .any(|(d, s)| *d == a.domain && *s == a.slot)
        };
        let before = out.len();
        out.retain(|a| !answers_request(a));
        if out.is_empty() && before > 0 {
            out.push(SemanticAction::general("reqmore"));
        }
    }
    if u_miss < noise.miss_info {
        let given: Vec<&SemanticAction> = belief
            .last_user_actions
            .iter()
            .filter(|a| a.is("inform") && a.domain != GENERAL)
            .collect();
        if let Some(a) = given.choose(rng) {
            push_unique(&mut out, SemanticAction::new("request", &a.domain, &a.slot, NONE));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use crate::system::belief::{track, track_system};

    fn act(i: &str, d: &str, s: &str, v: &str) -> SemanticAction {
        SemanticAction::new(i, d, s, v)
    }

    fn cfg(p: f64) -> RulePolicyConfig {
        RulePolicyConfig {
            confirm_probability: p,
            min_constraints: 1,
        }
    }

    #[test]
    fn answers_from_offered_entity() {
        let (o, db) = (Ontology::bundled(), Database::bundled());
        let rec = &db.domains["restaurant"][0];
        let b = track(&BeliefState::new(), &[act("inform", "restaurant", "area", &rec["area"])], &o);
        let b = track_system(&b, &[act("offer", "restaurant", NAME, &rec[NAME])]);
        let b = track(&b, &[act("request", "restaurant", "phone", NONE)], &o);
        let out = rule_policy(&b, &db, &o, &cfg(0.0), &mut seed::rng(0));
        assert_eq!(out, vec![act("inform", "restaurant", "phone", &rec["phone"])]);
    }

    #[test]
    fn no_match_gives_nooffer() {
        let (o, db) = (Ontology::bundled(), Database::bundled());
        let mut b = BeliefState::new();
        b.constraints.entry("restaurant".into()).or_default().insert("food".into(), "thai".into());
        b.constraints.get_mut("restaurant").unwrap().insert("area".into(), "nowhere".into());
        b.last_user_actions = vec![act("inform", "restaurant", "area", "nowhere")];
        let out = rule_policy(&b, &db, &o, &cfg(0.0), &mut seed::rng(0));
        assert_eq!(out, vec![act("nooffer", "restaurant", NONE, NONE)]);
    }

    #[test]
    fn confirm_echoes_inform() {
        let (o, db) = (Ontology::bundled(), Database::bundled());
        let b = track(&BeliefState::new(), &[act("inform", "restaurant", "area", "centre")], &o);
        let out = rule_policy(&b, &db, &o, &cfg(1.0), &mut seed::rng(3));
        assert!(out.contains(&act("inform", "restaurant", "area", "centre")));
    }

    #[test]
    fn threshold_requests_missing_constraint() {
        let (o, db) = (Ontology::bundled(), Database::bundled());
        let b = track(&BeliefState::new(), &[act("request", "hotel", "phone", NONE)], &o);
        let out = rule_policy(&b, &db, &o, &cfg(0.0), &mut seed::rng(0));
        assert_eq!(out, vec![act("request", "hotel", "area", NONE)]);
    }

    #[test]
    fn user_bye_gets_bye() {
        let (o, db) = (Ontology::bundled(), Database::bundled());
        let b = track(&BeliefState::new(), &[SemanticAction::general("bye")], &o);
        assert_eq!(
            rule_policy(&b, &db, &o, &cfg(0.0), &mut seed::rng(0)),
            vec![SemanticAction::general("bye")]
        );
    }

    #[test]
    fn silent_noise_is_identity() {
        let b = BeliefState {
            last_system_actions: vec![act("reqmore", GENERAL, NONE, NONE)],
            ..BeliefState::new()
        };
        let a = vec![act("inform", "hotel", "phone", "1")];
        for s in 0..20 {
            assert_eq!(inject_misbehavior(&a, &b, &NoiseConfig::default(), &mut seed::rng(s)), a);
        }
    }

    #[test]
    fn forced_neglect_drops_answer() {
        let o = Ontology::bundled();
        let b = track(&BeliefState::new(), &[act("request", "hotel", "phone", NONE)], &o);
        let a = vec![act("inform", "hotel", "phone", "1")];
        let noise = NoiseConfig {
            neglect: 1.0,
            ..Default::default()
        };
        let out = inject_misbehavior(&a, &b, &noise, &mut seed::rng(0));
        assert!(!out.iter().any(|x| x.is("inform") && x.slot == "phone"));
    }

    #[test]
    fn forced_loop_repeats_previous() {
        let prev = vec![act("request", "hotel", "area", NONE)];
        let b = BeliefState {
            last_system_actions: prev.clone(),
            ..BeliefState::new()
        };
        let noise = NoiseConfig {
            repeat: 1.0,
            ..Default::default()
        };
        let out = inject_misbehavior(&[act("bye", GENERAL, NONE, NONE)], &b, &noise, &mut seed::rng(0));
        assert_eq!(out, prev);
    }

    #[test]
    fn forced_miss_info_requests_given_slot() {
        let o = Ontology::bundled();
        let b = track(&BeliefState::new(), &[act("inform", "hotel", "area", "north")], &o);
        let noise = NoiseConfig {
            miss_info: 1.0,
            ..Default::default()
        };
        let out = inject_misbehavior(&[], &b, &noise, &mut seed::rng(0));
        assert_eq!(out, vec![act("request", "hotel", "area", NONE)]);
    }
}
