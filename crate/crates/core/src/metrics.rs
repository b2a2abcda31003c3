//! Classification, action, BLEU and slot-error metrics.
//!
//! BLEU tokenisation lowercases, splits on whitespace and makes every ASCII
//! punctuation character its own token. Corpus BLEU is unsmoothed and skips
//! n-gram orders the candidates are too short to contain; sentence BLEU inside
//! self-BLEU replaces zero match counts by 1e-9.

use std::collections::{BTreeSet, HashMap};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lang::ser_counts;
use crate::ontology::{Ontology, SemanticAction};

pub const MAX_ORDER: usize = 4;
pub const SELF_BLEU_EPSILON: f64 = 1e-9;

/// Unweighted mean of per-class F1 over `labels`. Classes absent from both
/// predictions and references are skipped; 0/0 precision or recall counts as 0.
pub fn macro_f1<T: Eq + Hash>(preds: &[T], refs: &[T], labels: &[T]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::Empty("macro-F1 input"));
    }
    if preds.len() != refs.len() {
        return Err(Error::Dimension {
            expected: refs.len(),
            got: preds.len(),
        });
    }
    let mut scores = Vec::new();
    for label in labels {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fneg = 0usize;
        for (p, r) in preds.iter().zip(refs) {
            match (p == label, r == label) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                _ => {}
            }
        }
        if tp + fp + fneg == 0 {
            continue;
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
        scores.push(if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("labels present in the data"));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionMode {
    Full,
    /// Compare only (intent, domain).
    IntentDomain,
}

fn project(actions: &[SemanticAction], mode: ActionMode) -> BTreeSet<(String, String, String, String)> {
    actions
        .iter()
        .map(|a| match mode {
            ActionMode::Full => (a.intent.clone(), a.domain.clone(), a.slot.clone(), a.value.clone()),
            ActionMode::IntentDomain => (a.intent.clone(), a.domain.clone(), String::new(), String::new()),
        })
        .collect()
}

/// Micro F1 over action tuples pooled across turns, and the fraction of turns
/// whose sets match exactly. All-empty input scores F1 = 1.
pub fn action_scores(
    preds: &[Vec<SemanticAction>],
    refs: &[Vec<SemanticAction>],
    mode: ActionMode,
) -> Result<(f64, f64)> {
    if preds.is_empty() {
        return Err(Error::Empty("action sets"));
    }
    if preds.len() != refs.len() {
        return Err(Error::Dimension {
            expected: refs.len(),
            got: preds.len(),
        });
    }
    let (mut tp, mut fp, mut fneg, mut exact) = (0usize, 0usize, 0usize, 0usize);
    for (p, r) in preds.iter().zip(refs) {
        let (p, r) = (project(p, mode), project(r, mode));
        let common = p.intersection(&r).count();
        tp += common;
        fp += p.len() - common;
        fneg += r.len() - common;
        exact += (p == r) as usize;
    }
    let denom = 2 * tp + fp + fneg;
    let f1 = if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 };
    Ok((f1, exact as f64 / preds.len() as f64))
}

pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.to_lowercase().split_whitespace() {
        let mut current = String::new();
        for c in word.chars() {
            if c.is_ascii_punctuation() {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped matches and candidate n-gram totals per order, plus lengths.
#[derive(Clone, Debug, Default, PartialEq)]
struct BleuStats {
    matches: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    cand_len: usize,
    ref_len: usize,
}

impl BleuStats {
    fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    fn score(&self, epsilon: f64) -> f64 {
        if self.cand_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0;
        for n in 0..MAX_ORDER {
            if self.totals[n] == 0 {
                continue;
            }
            let m = if self.matches[n] == 0 { epsilon } else { self.matches[n] as f64 };
            if m == 0.0 {
                return 0.0;
            }
            log_sum += (m / self.totals[n] as f64).ln();
            orders += 1;
        }
        let bp = if self.cand_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.cand_len as f64).exp()
        };
        100.0 * bp * (log_sum / orders as f64).exp()
    }
}

fn sentence_stats(candidate: &[String], references: &[Vec<String>]) -> BleuStats {
    let mut s = BleuStats {
        cand_len: candidate.len(),
        ..Default::default()
    };
    s.ref_len = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| ((r as i64 - candidate.len() as i64).abs(), r))
        .unwrap_or(0);
    for n in 1..=MAX_ORDER {
        let cand = ngram_counts(candidate, n);
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in references {
            for (g, c) in ngram_counts(r, n) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        s.totals[n - 1] = cand.values().sum();
        s.matches[n - 1] = cand
            .iter()
            .map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0)))
            .sum();
    }
    s
}

/// Corpus BLEU in [0, 100]; each candidate has its own reference list.
pub fn corpus_bleu(candidates: &[String], references: &[Vec<String>]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Empty("BLEU corpus"));
    }
    if candidates.len() != references.len() {
        return Err(Error::Dimension {
            expected: references.len(),
            got: candidates.len(),
        });
    }
    let mut total = BleuStats::default();
    for (c, refs) in candidates.iter().zip(references) {
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        total.add(&sentence_stats(&tokenize(c), &refs));
    }
    Ok(total.score(0.0))
}

/// Sentence BLEU with add-epsilon on zero match counts.
pub fn sentence_bleu(candidate: &str, references: &[String]) -> f64 {
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    sentence_stats(&tokenize(candidate), &refs).score(SELF_BLEU_EPSILON)
}

/// Mean sentence BLEU of each sentence against all the others.
pub fn self_bleu(sentences: &[String]) -> Result<f64> {
    if sentences.len() < 2 {
        return Err(Error::Empty("self-BLEU needs at least two sentences"));
    }
    let tokens: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s)).collect();
    let total: f64 = (0..tokens.len())
        .map(|i| {
            let others: Vec<Vec<String>> = tokens
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, t)| t.clone())
                .collect();
            sentence_stats(&tokens[i], &others).score(SELF_BLEU_EPSILON)
        })
        .sum();
    Ok(total / tokens.len() as f64)
}

/// `Σ(m + h) / ΣN` over turns with at least one value-bearing slot.
pub fn corpus_ser(turns: &[(Vec<SemanticAction>, String)], ontology: &Ontology) -> Result<f64> {
    let (mut errors, mut slots) = (0usize, 0usize);
    for (actions, text) in turns {
        let c = ser_counts(actions, text, ontology);
        if c.total > 0 {
            errors += c.missing + c.hallucinated;
            slots += c.total;
        }
    }
    if slots == 0 {
        return Err(Error::Empty("value-bearing slots"));
    }
    Ok(errors as f64 / slots as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn perfect_macro_f1() {
        let x = ["a", "b", "c", "a"];
        assert_eq!(macro_f1(&x, &x, &["a", "b", "c"]).unwrap(), 1.0);
    }

    #[test]
    fn constant_prediction_macro_f1() {
        let f = macro_f1(&["A"; 4], &["A", "A", "B", "B"], &["A", "B"]).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn absent_class_is_skipped() {
        assert_eq!(macro_f1(&["a"], &["a"], &["a", "z"]).unwrap(), 1.0);
    }

    #[test]
    fn empty_macro_f1_is_an_error() {
        assert!(macro_f1::<&str>(&[], &[], &["a"]).is_err());
    }

    fn act(i: &str, d: &str) -> SemanticAction {
        SemanticAction::new(i, d, "none", "none")
    }

    #[test]
    fn action_set_arithmetic() {
        let (f1, acc) = action_scores(
            &[vec![act("a", "x")]],
            &[vec![act("a", "x"), act("b", "x")]],
            ActionMode::Full,
        )
        .unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(acc, 0.0);
        let (f1, acc) = action_scores(&[vec![act("a", "x")]], &[vec![act("b", "y")]], ActionMode::Full).unwrap();
        assert_eq!((f1, acc), (0.0, 0.0));
    }

    #[test]
    fn intent_domain_mode_ignores_slots() {
        let p = vec![SemanticAction::new("inform", "hotel", "area", "north")];
        let r = vec![SemanticAction::new("inform", "hotel", "stars", "4")];
        assert_eq!(action_scores(&[p], &[r], ActionMode::IntentDomain).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Hello, World!"), s(&["hello", ",", "world", "!"]));
    }

    #[test]
    fn identical_corpus_bleu_is_100() {
        let c = s(&["the cat sat on the mat", "a b"]);
        let r: Vec<Vec<String>> = c.iter().map(|x| vec![x.clone()]).collect();
        assert_eq!(corpus_bleu(&c, &r).unwrap(), 100.0);
    }

    #[test]
    fn no_unigram_overlap_is_zero() {
        assert_eq!(corpus_bleu(&s(&["a b c"]), &[s(&["d e f"])]).unwrap(), 0.0);
    }

    #[test]
    fn short_candidate_hand_count() {
        // orders 1..3 match fully, order 4 has no candidate 4-grams; BP = exp(1 - 4/3)
        let b = corpus_bleu(&s(&["the cat sat"]), &[s(&["the cat sat down"])]).unwrap();
        assert!((b - 100.0 * (1.0f64 - 4.0 / 3.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn identical_sentences_self_bleu_is_100() {
        assert_eq!(self_bleu(&vec!["i want a cheap hotel .".to_string(); 10]).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_sentences_self_bleu_is_near_zero() {
        let b = self_bleu(&s(&["a b c", "d e f", "g h i"])).unwrap();
        assert!(b < 1e-6);
    }

    #[test]
    fn self_bleu_needs_two() {
        assert!(self_bleu(&s(&["x"])).is_err());
    }

    #[test]
    fn ser_aggregate() {
        let o = Ontology::bundled();
        let t = vec![
            (
                vec![
                    SemanticAction::new("inform", "restaurant", "area", "centre"),
                    SemanticAction::new("inform", "restaurant", "food", "thai"),
                ],
                "somewhere in the centre".to_string(),
            ),
            (
                vec![
                    SemanticAction::new("inform", "hotel", "area", "north"),
                    SemanticAction::new("inform", "hotel", "stars", "4"),
                    SemanticAction::new("inform", "hotel", "pricerange", "cheap"),
                ],
                "a cheap 4 star place in the north".to_string(),
            ),
        ];
        assert!((corpus_ser(&t, &o).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn all_missing_ser_is_one() {
        let o = Ontology::bundled();
        let t = vec![(vec![SemanticAction::new("inform", "hotel", "area", "north")], "hello".to_string())];
        assert_eq!(corpus_ser(&t, &o).unwrap(), 1.0);
    }

    #[test]
    fn no_slots_is_an_error() {
        let o = Ontology::bundled();
        assert!(corpus_ser(&[(vec![SemanticAction::general("bye")], "bye".into())], &o).is_err());
    }
}
