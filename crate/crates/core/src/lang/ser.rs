use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ontology::{Ontology, SemanticAction, DONTCARE, NONE};

/// Missing, hallucinated and total value-bearing slots of one turn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerCounts {
    pub missing: usize,
    pub hallucinated: usize,
    pub total: usize,
}

impl SerCounts {
    /// `(m + h) / N`, or `None` when the turn has no value-bearing slot.
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| (self.missing + self.hallucinated) as f64 / self.total as f64)
    }
}

/// Lowercases, maps every non-alphanumeric run to one space, and pads both
/// ends with a space so whole-word lookups are plain substring searches.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    let mut gap = true;
    for c in text.chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
            gap = false;
        } else if !gap {
            out.push(' ');
            gap = true;
        }
    }
    if !gap {
        out.push(' ');
    }
    out
}

fn value_bearing(a: &SemanticAction) -> bool {
    a.slot != NONE && !a.value.is_empty() && a.value != NONE && a.value != DONTCARE
}

/// Counts slot errors of an utterance against its actions. Matching is
/// case-insensitive on whole words.
pub fn ser_counts(actions: &[SemanticAction], utterance: &str, ontology: &Ontology) -> SerCounts {
    let text = normalize_text(utterance);
    let values: BTreeSet<String> = actions
        .iter()
        .filter(|a| value_bearing(a))
        .map(|a| normalize_text(&a.value))
        .collect();
    let total = actions.iter().filter(|a| value_bearing(a)).count();
    let missing = actions
        .iter()
        .filter(|a| value_bearing(a) && !text.contains(&normalize_text(&a.value)))
        .count();
    let lexicon: BTreeSet<String> = ontology
        .value_lexicon()
        .into_iter()
        .map(|(_, _, v)| normalize_text(v))
        .collect();
    let hallucinated = lexicon
        .iter()
        .filter(|v| text.contains(v.as_str()) && !values.contains(*v))
        .count();
    SerCounts {
        missing,
        hallucinated,
        total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(i: &str, d: &str, s: &str, v: &str) -> SemanticAction {
        SemanticAction::new(i, d, s, v)
    }

    #[test]
    fn one_missing_one_hallucinated() {
        let o = Ontology::bundled();
        let acts = [
            act("inform", "restaurant", "area", "centre"),
            act("inform", "restaurant", "food", "thai"),
            act("inform", "restaurant", "pricerange", "cheap"),
            act("inform", "hotel", "stars", "4"),
        ];
        let text = "A cheap thai restaurant in the centre, and a north hotel.";
        let c = ser_counts(&acts, text, &o);
        assert_eq!(c, SerCounts { missing: 1, hallucinated: 1, total: 4 });
        assert_eq!(c.rate(), Some(0.5));
    }

    #[test]
    fn no_value_slots() {
        let o = Ontology::bundled();
        let c = ser_counts(&[act("request", "hotel", "phone", "none")], "What is the phone?", &o);
        assert_eq!(c.total, 0);
        assert_eq!(c.rate(), None);
    }

    #[test]
    fn matching_is_case_insensitive_whole_word() {
        let o = Ontology::bundled();
        let acts = [act("inform", "attraction", "type", "park")];
        assert_eq!(ser_counts(&acts, "A PARK please", &o).missing, 0);
        // "parkside" does not contain the word "park".
        assert_eq!(ser_counts(&acts, "Near parkside pools.", &o).missing, 1);
    }
}
