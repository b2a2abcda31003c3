use crate::lang::ser::normalize_text;
use crate::lang::templates::{Side, TemplateSet};
use crate::ontology::{Ontology, SemanticAction};

/// Inverts template realisation. At each position the longest template match
/// whose captured value is admissible wins; text no template matches is
/// scanned for ontology values, each read as an inform.
pub fn parse_utterance(text: &str, templates: &TemplateSet, ontology: &Ontology) -> Vec<SemanticAction> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < text.len() {
        let rest = &text[pos..];
        let trimmed = rest.trim_start();
        pos += rest.len() - trimmed.len();
        if trimmed.is_empty() {
            break;
        }
        let prefix = templates.apology_prefix();
        if !prefix.is_empty() && trimmed.starts_with(prefix) {
            pos += prefix.len();
            continue;
        }
        match best_match(trimmed, templates, ontology) {
            Some((len, action)) => {
                out.push(action);
                pos += len;
            }
            None => {
                let len = sentence_len(trimmed);
                out.extend(lexicon_informs(&trimmed[..len], ontology));
                pos += len;
            }
        }
    }
    out
}

fn best_match(text: &str, templates: &TemplateSet, ontology: &Ontology) -> Option<(usize, SemanticAction)> {
    let mut best: Option<(usize, SemanticAction)> = None;
    for p in templates.patterns() {
        let Some(caps) = p.regex.captures(text) else {
            continue;
        };
        let len = caps.get(0).map_or(0, |m| m.end());
        if best.as_ref().is_some_and(|(l, _)| *l >= len) {
            continue;
        }
        let value = match (caps.get(1), p.implied_value) {
            (Some(v), _) => v.as_str().to_string(),
            (None, Some(v)) => v.to_string(),
            (None, None) => crate::ontology::NONE.to_string(),
        };
        if caps.get(1).is_some() && !admissible(&p.intent, &p.domain, &p.slot, &value, templates.side(), ontology) {
            continue;
        }
        best = Some((len, SemanticAction::new(&p.intent, &p.domain, &p.slot, value)));
    }
    best
}

fn admissible(intent: &str, domain: &str, slot: &str, value: &str, side: Side, ontology: &Ontology) -> bool {
    if value.trim() != value || value.is_empty() {
        return false;
    }
    if ontology.is_informable(domain, slot) {
        return ontology.values(domain, slot).is_some_and(|vs| vs.iter().any(|v| v == value));
    }
    // Free values (entity names, phone numbers, ...) appear only in system informs and offers.
    side == Side::System && (intent == "inform" || intent == "offer") && !value.contains(['.', '!', '?'])
}

/// Length of the leading sentence, through its terminal punctuation.
fn sentence_len(text: &str) -> usize {
    let bytes = text.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if matches!(b, b'.' | b'!' | b'?') && (i + 1 == bytes.len() || bytes[i + 1] == b' ') {
            return i + 1;
        }
    }
    text.len()
}

fn lexicon_informs(segment: &str, ontology: &Ontology) -> Vec<SemanticAction> {
    let norm = normalize_text(segment);
    let mentioned: Vec<&str> = ontology
        .domains
        .keys()
        .filter(|d| norm.contains(&format!(" {d} ")))
        .map(String::as_str)
        .collect();
    let mut lexicon = ontology.value_lexicon();
    // Longer values first so multi-word values shadow their parts.
    lexicon.sort_by_key(|(_, _, v)| std::cmp::Reverse(v.split_whitespace().count()));
    let mut found: Vec<(usize, usize, SemanticAction)> = Vec::new();
    for (d, s, v) in lexicon {
        let needle = normalize_text(v);
        let Some(start) = norm.find(&needle) else {
            continue;
        };
        let end = start + needle.len();
        if found.iter().any(|(a, b, _)| start < *b && *a < end) {
            // Already claimed, possibly by a better-placed domain.
            continue;
        }
        let domain = mentioned
            .iter()
            .find(|m| ontology.values(m, s).is_some_and(|vs| vs.iter().any(|x| x == v)))
            .copied()
            .unwrap_or(d);
        found.push((start, end, SemanticAction::new("inform", domain, s, v)));
    }
    found.sort_by_key(|(start, _, _)| *start);
    found.into_iter().map(|(_, _, a)| a).collect()
}
