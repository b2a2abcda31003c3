use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::ontology::{Ontology, SemanticAction, GENERAL};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    /// Constraints per domain, in order of first mention.
    pub constraints: IndexMap<String, IndexMap<String, String>>,
    /// Requested (domain, slot) pairs not yet answered.
    pub requested: Vec<(String, String)>,
    /// Name of the entity offered per domain.
    pub offered: IndexMap<String, String>,
    pub booked: BTreeSet<String>,
    pub last_user_actions: Vec<SemanticAction>,
    pub last_system_actions: Vec<SemanticAction>,
    /// Last domain the user mentioned.
    pub active_domain: Option<String>,
    pub turn: usize,
    pub user_done: bool,
}

impl BeliefState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constraints_of(&self, domain: &str) -> Option<&IndexMap<String, String>> {
        self.constraints.get(domain)
    }

    pub fn requested_in<'a>(&'a self, domain: &'a str) -> impl Iterator<Item = &'a str> {
        self.requested
            .iter()
            .filter(move |(d, _)| d == domain)
            .map(|(_, s)| s.as_str())
    }
}

/// Folds a user turn into the belief. A changed constraint withdraws the
/// current offer for that domain.
pub fn track(belief: &BeliefState, user_actions: &[SemanticAction], ontology: &Ontology) -> BeliefState {
    let mut b = belief.clone();
    for a in user_actions {
        if a.domain != GENERAL && ontology.domain(&a.domain).is_some() {
            b.active_domain = Some(a.domain.clone());
        }
        match a.intent.as_str() {
            "inform" if ontology.is_informable(&a.domain, &a.slot) => {
                let slots = b.constraints.entry(a.domain.clone()).or_default();
                let previous = slots.insert(a.slot.clone(), a.value.clone());
                if previous.as_deref() != Some(a.value.as_str()) {
                    b.offered.shift_remove(&a.domain);
                }
            }
            "request" if ontology.is_requestable(&a.domain, &a.slot) => {
                let key = (a.domain.clone(), a.slot.clone());
                if !b.requested.contains(&key) {
                    b.requested.push(key);
                }
            }
            "bye" => b.user_done = true,
            _ => {}
        }
    }
    if user_actions.iter().any(|a| a.is("negate")) {
        for a in user_actions.iter().filter(|a| a.is("inform")) {
            b.offered.shift_remove(&a.domain);
        }
    }
    b.last_user_actions = user_actions.to_vec();
    b
}

/// Records what the system just said: offers, bookings and answered requests.
pub fn track_system(belief: &BeliefState, system_actions: &[SemanticAction]) -> BeliefState {
    let mut b = belief.clone();
    for a in system_actions {
        match a.intent.as_str() {
            "offer" => {
                b.offered.insert(a.domain.clone(), a.value.clone());
            }
            "nooffer" => {
                b.offered.shift_remove(&a.domain);
            }
            "book" => {
                b.booked.insert(a.domain.clone());
            }
            "inform" => b.requested.retain(|(d, s)| !(*d == a.domain && *s == a.slot)),
            _ => {}
        }
    }
    b.last_system_actions = system_actions.to_vec();
    b.turn += 1;
    b
}
