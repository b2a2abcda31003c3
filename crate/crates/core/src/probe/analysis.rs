use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::Behavior;
use crate::emotion::{sentiment_of, Emotion};
use crate::episode::EpisodeLog;
use crate::error::{Error, Result};

/// Emotion counts of the user turns reacting to one behaviour category.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElicitationRow {
    pub count: usize,
    /// Counts in [`Emotion::ALL`] order.
    pub emotions: [usize; 7],
}

impl ElicitationRow {
    pub fn proportion(&self, emotion: Emotion) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.emotions[emotion.index()] as f64 / self.count as f64
        }
    }

    pub fn proportions(&self) -> [f64; 7] {
        Emotion::ALL.map(|e| self.proportion(e))
    }

    /// Neutral, dissatisfied and satisfied shares.
    pub fn retained(&self) -> [f64; 3] {
        [
            self.proportion(Emotion::Neutral),
            self.proportion(Emotion::Dissatisfied),
            self.proportion(Emotion::Satisfied),
        ]
    }
}

/// Rows exist only for categories that occurred, in [`Behavior::ALL`] order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElicitationTable {
    pub rows: IndexMap<Behavior, ElicitationRow>,
}

impl ElicitationTable {
    pub fn count(&self, behavior: Behavior) -> usize {
        self.rows.get(&behavior).map_or(0, |r| r.count)
    }

    pub fn proportion(&self, behavior: Behavior, emotion: Emotion) -> f64 {
        self.rows.get(&behavior).map_or(0.0, |r| r.proportion(emotion))
    }
}

/// Tallies, per behaviour category, the emotion of the user turn that answers
/// each tagged system turn. A turn counts towards every category it carries.
pub fn elicitation_table(logs: &[EpisodeLog]) -> Result<ElicitationTable> {
    if logs.is_empty() {
        return Err(Error::Empty("episode logs"));
    }
    let mut counts: IndexMap<Behavior, ElicitationRow> = IndexMap::new();
    for turn in logs.iter().flat_map(|l| &l.turns) {
        for b in &turn.behaviors {
            let row = counts.entry(*b).or_insert(ElicitationRow {
                count: 0,
                emotions: [0; 7],
            });
            row.count += 1;
            row.emotions[turn.emotion.index()] += 1;
        }
    }
    let rows = Behavior::ALL
        .iter()
        .filter_map(|b| counts.shift_remove(b).map(|r| (*b, r)))
        .collect();
    Ok(ElicitationTable { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub turn: usize,
    pub n: usize,
    pub mean: f64,
}

/// Mean sentiment per turn index, split by dialogue outcome.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentCurve {
    pub success: Vec<CurveCell>,
    pub failure: Vec<CurveCell>,
}

impl SentimentCurve {
    /// Mean over each dialogue's last three user turns, averaged over dialogues.
    pub fn final_window(logs: &[EpisodeLog], success: bool) -> Option<f64> {
        let means: Vec<f64> = logs
            .iter()
            .filter(|l| l.success() == success && !l.turns.is_empty())
            .map(|l| {
                let tail = &l.turns[l.turns.len().saturating_sub(3)..];
                tail.iter()
                    .map(|t| sentiment_of(t.emotion).value() as f64)
                    .sum::<f64>()
                    / tail.len() as f64
            })
            .collect();
        (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
    }
}

fn curve_of<'a>(logs: impl Iterator<Item = &'a EpisodeLog>) -> Vec<CurveCell> {
    let mut sums: Vec<(i64, usize)> = Vec::new();
    for l in logs {
        for t in &l.turns {
            if sums.len() <= t.turn {
                sums.resize(t.turn + 1, (0, 0));
            }
            sums[t.turn].0 += sentiment_of(t.emotion).value() as i64;
            sums[t.turn].1 += 1;
        }
    }
    sums.into_iter()
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(turn, (s, n))| CurveCell {
            turn,
            n,
            mean: s as f64 / n as f64,
        })
        .collect()
}

pub fn sentiment_curve(logs: &[EpisodeLog]) -> SentimentCurve {
    SentimentCurve {
        success: curve_of(logs.iter().filter(|l| l.success())),
        failure: curve_of(logs.iter().filter(|l| !l.success())),
    }
}
