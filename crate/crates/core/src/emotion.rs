//! The user's emotional state.
//!
//! Emotions are drawn from a multinomial log-linear model over a fixed
//! encoding of elicitor features (system behaviour, goal progress, failures,
//! user error, turn position) and persona features (event emotion, conduct).
//! `abusive` is masked out entirely for polite users.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Conduct, EventEmotion, SemanticAction};
use crate::probe::{classify_behavior, Behavior};
use crate::seed;

const BUNDLED_WEIGHTS: &str = include_str!("../data/emotion_weights.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Neutral,
    Fearful,
    Dissatisfied,
    Apologetic,
    Abusive,
    Satisfied,
    Excited,
}

impl Emotion {
    pub const ALL: [Emotion; 7] = [
        Emotion::Neutral,
        Emotion::Fearful,
        Emotion::Dissatisfied,
        Emotion::Apologetic,
        Emotion::Abusive,
        Emotion::Satisfied,
        Emotion::Excited,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Neutral => "neutral",
            Emotion::Fearful => "fearful",
            Emotion::Dissatisfied => "dissatisfied",
            Emotion::Apologetic => "apologetic",
            Emotion::Abusive => "abusive",
            Emotion::Satisfied => "satisfied",
            Emotion::Excited => "excited",
        }
    }

    pub fn sentiment(self) -> Sentiment {
        sentiment_of(self)
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Emotion {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative = -1,
    Neutral = 0,
    Positive = 1,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    pub fn value(self) -> i32 {
        self as i32
    }
}

pub fn sentiment_of(emotion: Emotion) -> Sentiment {
    match emotion {
        Emotion::Neutral => Sentiment::Neutral,
        Emotion::Satisfied | Emotion::Excited => Sentiment::Positive,
        Emotion::Fearful | Emotion::Dissatisfied | Emotion::Apologetic | Emotion::Abusive => {
            Sentiment::Negative
        }
    }
}

/// Context features that elicit an emotion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElicitorFeatures {
    /// Behaviour tags of the current system turn; empty means "none".
    pub behaviors: BTreeSet<Behavior>,
    /// +1 when the system moved the goal forward, -1 on a failed search.
    pub progress: i8,
    pub failures: u32,
    pub user_error: bool,
    pub turn: usize,
    pub event: EventEmotion,
    pub conduct: Conduct,
}

impl ElicitorFeatures {
    pub fn initial(event: EventEmotion, conduct: Conduct) -> Self {
        Self {
            behaviors: BTreeSet::new(),
            progress: 0,
            failures: 0,
            user_error: false,
            turn: 0,
            event,
            conduct,
        }
    }
}

/// Observable goal progress of one system turn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ProgressSummary {
    pub delta: i8,
    pub failures: u32,
    pub user_error: bool,
}

impl ProgressSummary {
    /// Progress delta read off the system turn: a failed search is -1, an offer
    /// or an answer to a previous user request is +1, anything else 0.
    pub fn delta_of(system_actions: &[SemanticAction], previous_user: &[SemanticAction]) -> i8 {
        if system_actions.iter().any(|a| a.is("nooffer")) {
            return -1;
        }
        let answered = system_actions.iter().any(|a| {
            a.is("inform")
                && previous_user
                    .iter()
                    .any(|u| u.is("request") && u.domain == a.domain && u.slot == a.slot)
        });
        if answered || system_actions.iter().any(|a| a.is("offer")) {
            1
        } else {
            0
        }
    }

    /// Consecutive failed searches: a nooffer extends the run, an offer resets it.
    pub fn next_failures(previous: u32, system_actions: &[SemanticAction]) -> u32 {
        if system_actions.iter().any(|a| a.is("nooffer")) {
            previous + 1
        } else if system_actions.iter().any(|a| a.is("offer")) {
            0
        } else {
            previous
        }
    }
}

/// Builds elicitor features for the current turn. `user_history` is oldest-first
/// and covers at most the last three user turns.
pub fn extract_features(
    system_actions: &[SemanticAction],
    user_history: &[Vec<SemanticAction>],
    previous_system: &[SemanticAction],
    progress: ProgressSummary,
    event: EventEmotion,
    conduct: Conduct,
    turn: usize,
) -> ElicitorFeatures {
    let previous_user: &[SemanticAction] = user_history.last().map(Vec::as_slice).unwrap_or(&[]);
    let behaviors = if turn == 0 && system_actions.is_empty() {
        BTreeSet::new()
    } else {
        classify_behavior(system_actions, previous_user, previous_system)
    };
    ElicitorFeatures {
        behaviors,
        progress: progress.delta,
        failures: progress.failures,
        user_error: progress.user_error,
        turn,
        event,
        conduct,
    }
}

/// Names of the encoded features, in encoding order.
pub const FEATURE_NAMES: [&str; 15] = [
    "none",
    "confirm",
    "no_confirm",
    "miss_info",
    "neglect",
    "reply",
    "loop",
    "progress_up",
    "progress_down",
    "failures",
    "user_error",
    "late_turn",
    "event_excited",
    "event_fearful",
    "impolite",
];

pub const FEATURE_DIM: usize = FEATURE_NAMES.len();

/// Turns at or beyond this index set the `late_turn` feature.
pub const LATE_TURN: usize = 6;
/// The `failures` feature saturates here.
pub const FAILURE_CAP: u32 = 3;

const PERSONA_FEATURES: [usize; 3] = [12, 13, 14];

/// Which features the model sees. `NoPersona` zeroes the persona features and
/// lifts the conduct mask, since conduct is no longer observed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FeatureView {
    #[default]
    Full,
    NoPersona,
}

/// A feature vector together with the abusive-mask decision.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedFeatures {
    pub values: Vec<f64>,
    pub allow_abusive: bool,
}

pub fn encode(features: &ElicitorFeatures, view: FeatureView) -> EncodedFeatures {
    let mut x = vec![0.0; FEATURE_DIM];
    if features.behaviors.is_empty() {
        x[0] = 1.0;
    }
    for b in &features.behaviors {
        x[1 + *b as usize] = 1.0;
    }
    match features.progress.signum() {
        1 => x[7] = 1.0,
        -1 => x[8] = 1.0,
        _ => {}
    }
    x[9] = features.failures.min(FAILURE_CAP) as f64;
    x[10] = f64::from(u8::from(features.user_error));
    x[11] = f64::from(u8::from(features.turn >= LATE_TURN));
    x[12] = f64::from(u8::from(features.event == EventEmotion::Excited));
    x[13] = f64::from(u8::from(features.event == EventEmotion::Fearful));
    x[14] = f64::from(u8::from(features.conduct == Conduct::Impolite));
    let allow_abusive = match view {
        FeatureView::Full => features.conduct == Conduct::Impolite,
        FeatureView::NoPersona => {
            for i in PERSONA_FEATURES {
                x[i] = 0.0;
            }
            true
        }
    };
    EncodedFeatures {
        values: x,
        allow_abusive,
    }
}

/// Per-emotion weight rows over [`FEATURE_NAMES`] plus a bias.
#[derive(Clone, Debug, PartialEq)]
pub struct EmotionWeights {
    rows: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl EmotionWeights {
    pub fn zeros() -> Self {
        Self {
            rows: vec![vec![0.0; FEATURE_DIM]; Emotion::ALL.len()],
            bias: vec![0.0; Emotion::ALL.len()],
        }
    }

    /// Builds weights from raw rows; the feature dimension is checked at use.
    pub fn from_rows(rows: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if rows.len() != Emotion::ALL.len() || bias.len() != Emotion::ALL.len() {
            return Err(Error::Dimension {
                expected: Emotion::ALL.len(),
                got: rows.len().min(bias.len()),
            });
        }
        if rows.iter().flatten().chain(&bias).any(|w| !w.is_finite()) {
            return Err(Error::Config("emotion weights must be finite".into()));
        }
        Ok(Self { rows, bias })
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_WEIGHTS).expect("bundled emotion weights are valid")
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, emotion: Emotion) -> &[f64] {
        &self.rows[emotion.index()]
    }

    pub fn bias(&self, emotion: Emotion) -> f64 {
        self.bias[emotion.index()]
    }

    pub fn set(&mut self, emotion: Emotion, feature: &str, weight: f64) {
        let i = feature_index(feature).unwrap_or_else(|| panic!("unknown feature `{feature}`"));
        self.rows[emotion.index()][i] = weight;
    }

    pub fn set_bias(&mut self, emotion: Emotion, bias: f64) {
        self.bias[emotion.index()] = bias;
    }

    /// Flattened parameters: each emotion's row followed by its bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows.len() * (self.dim() + 1));
        for (row, b) in self.rows.iter().zip(&self.bias) {
            out.extend_from_slice(row);
            out.push(*b);
        }
        out
    }

    pub fn from_flat(flat: &[f64], dim: usize) -> Self {
        let k = Emotion::ALL.len();
        assert_eq!(flat.len(), k * (dim + 1));
        let mut rows = Vec::with_capacity(k);
        let mut bias = Vec::with_capacity(k);
        for chunk in flat.chunks(dim + 1) {
            rows.push(chunk[..dim].to_vec());
            bias.push(chunk[dim]);
        }
        Self { rows, bias }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: IndexMap<String, IndexMap<String, f64>> = serde_json::from_str(text)?;
        let mut w = Self::zeros();
        for (label, entries) in raw {
            let emotion: Emotion = label
                .parse()
                .map_err(|l| Error::schema("emotion", format!("unknown emotion `{l}`")))?;
            for (name, value) in entries {
                if !value.is_finite() {
                    return Err(Error::schema(format!("{label}.{name}"), "non-finite weight"));
                }
                if name == "bias" {
                    w.set_bias(emotion, value);
                } else {
                    let i = feature_index(&name).ok_or_else(|| {
                        Error::schema(format!("{label}.{name}"), "unknown feature name")
                    })?;
                    w.rows[emotion.index()][i] = value;
                }
            }
        }
        Ok(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut out: IndexMap<&str, IndexMap<&str, f64>> = IndexMap::new();
        for e in Emotion::ALL {
            let mut entries: IndexMap<&str, f64> = FEATURE_NAMES
                .iter()
                .zip(self.row(e))
                .map(|(n, w)| (*n, *w))
                .collect();
            entries.insert("bias", self.bias(e));
            out.insert(e.as_str(), entries);
        }
        serde_json::to_string_pretty(&out).expect("weights serialise")
    }
}

fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|n| *n == name)
}

/// Probability per emotion, indexed by [`Emotion::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmotionDistribution {
    probs: [f64; 7],
}

impl EmotionDistribution {
    pub fn new(probs: [f64; 7]) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("not a distribution: {probs:?}")));
        }
        Ok(Self { probs })
    }

    pub fn uniform() -> Self {
        Self {
            probs: [1.0 / 7.0; 7],
        }
    }

    pub fn point(emotion: Emotion) -> Self {
        let mut probs = [0.0; 7];
        probs[emotion.index()] = 1.0;
        Self { probs }
    }

    pub fn p(&self, emotion: Emotion) -> f64 {
        self.probs[emotion.index()]
    }

    pub fn probs(&self) -> &[f64; 7] {
        &self.probs
    }

    /// Most probable emotion, ties to the lower index.
    pub fn argmax(&self) -> Emotion {
        let mut best = 0;
        for i in 1..7 {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        Emotion::ALL[best]
    }
}

/// Unnormalised scores `W x + b`, with masked classes at negative infinity.
pub(crate) fn scores(x: &EncodedFeatures, weights: &EmotionWeights) -> Result<[f64; 7]> {
    if weights.dim() != x.values.len() {
        return Err(Error::Dimension {
            expected: x.values.len(),
            got: weights.dim(),
        });
    }
    let mut s = [0.0; 7];
    for e in Emotion::ALL {
        s[e.index()] = if e == Emotion::Abusive && !x.allow_abusive {
            f64::NEG_INFINITY
        } else {
            weights.bias(e) + weights.row(e).iter().zip(&x.values).map(|(w, v)| w * v).sum::<f64>()
        };
    }
    Ok(s)
}

pub(crate) fn softmax(s: &[f64; 7]) -> [f64; 7] {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; 7];
    let mut z = 0.0;
    for i in 0..7 {
        p[i] = (s[i] - max).exp();
        z += p[i];
    }
    for v in &mut p {
        *v /= z;
    }
    p
}

pub fn distribution_of(x: &EncodedFeatures, weights: &EmotionWeights) -> Result<EmotionDistribution> {
    Ok(EmotionDistribution {
        probs: softmax(&scores(x, weights)?),
    })
}

pub fn emotion_distribution(
    features: &ElicitorFeatures,
    weights: &EmotionWeights,
) -> Result<EmotionDistribution> {
    distribution_of(&encode(features, FeatureView::Full), weights)
}

/// Scales the neutral probability by `w` and renormalises. `w = ∞` yields a
/// point mass on neutral whenever neutral has positive probability.
pub fn reweight_neutral(dist: &EmotionDistribution, w: f64) -> Result<EmotionDistribution> {
    if w.is_nan() || w < 0.0 {
        return Err(Error::NegativeWeight(w));
    }
    let n = Emotion::Neutral.index();
    if w.is_infinite() {
        return if dist.probs[n] > 0.0 {
            Ok(EmotionDistribution::point(Emotion::Neutral))
        } else {
            Ok(dist.clone())
        };
    }
    let mut probs = dist.probs;
    probs[n] *= w;
    let z: f64 = probs.iter().sum();
    if z <= 0.0 {
        return Err(Error::DegenerateReweight);
    }
    for p in &mut probs {
        *p /= z;
    }
    Ok(EmotionDistribution { probs })
}

pub fn sample_emotion_with<R: Rng>(dist: &EmotionDistribution, rng: &mut R) -> Emotion {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = Emotion::Neutral;
    for e in Emotion::ALL {
        let p = dist.p(e);
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = e;
        if u < acc {
            return e;
        }
    }
    last
}

pub fn sample_emotion(dist: &EmotionDistribution, seed: u64) -> Emotion {
    sample_emotion_with(dist, &mut seed::rng(seed))
}

/// One supervised example for [`fit_weights`].
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledExample {
    pub features: EncodedFeatures,
    pub label: Emotion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            iterations: 300,
            l2: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub weights: EmotionWeights,
    /// Training objective before the first step and after every accepted step.
    pub losses: Vec<f64>,
}

/// Mean negative log-likelihood plus `l2/2 · ‖W‖²` (biases unpenalised), and
/// its gradient with respect to the flattened parameters.
pub fn loss_and_gradient(flat: &[f64], data: &[LabeledExample], l2: f64) -> (f64, Vec<f64>) {
    let dim = data[0].features.values.len();
    let stride = dim + 1;
    let mut grad = vec![0.0; flat.len()];
    let mut loss = 0.0;
    for ex in data {
        let x = &ex.features.values;
        let mut s = [0.0; 7];
        for e in Emotion::ALL {
            let k = e.index();
            s[k] = if e == Emotion::Abusive && !ex.features.allow_abusive {
                f64::NEG_INFINITY
            } else {
                let row = &flat[k * stride..k * stride + dim];
                flat[k * stride + dim] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            };
        }
        let p = softmax(&s);
        loss -= p[ex.label.index()].ln();
        for k in 0..7 {
            let coef = p[k] - f64::from(u8::from(k == ex.label.index()));
            if coef == 0.0 {
                continue;
            }
            for (j, v) in x.iter().enumerate() {
                grad[k * stride + j] += coef * v;
            }
            grad[k * stride + dim] += coef;
        }
    }
    let n = data.len() as f64;
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    for k in 0..7 {
        for j in 0..dim {
            let w = flat[k * stride + j];
            loss += 0.5 * l2 * w * w;
            grad[k * stride + j] += l2 * w;
        }
    }
    (loss, grad)
}

/// Maximum-likelihood fit by gradient descent with backtracking line search,
/// so the recorded objective never increases.
pub fn fit_weights(data: &[LabeledExample], config: &FitConfig) -> Result<FitReport> {
    let first = data.first().ok_or(Error::Empty("emotion training set"))?;
    let dim = first.features.values.len();
    if data.iter().any(|ex| ex.features.values.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: data.iter().map(|ex| ex.features.values.len()).find(|&d| d != dim).unwrap_or(dim),
        });
    }
    if let Some(bad) = data
        .iter()
        .find(|ex| ex.label == Emotion::Abusive && !ex.features.allow_abusive)
    {
        return Err(Error::InconsistentLabel(format!(
            "abusive label on a polite example: {:?}",
            bad.features.values
        )));
    }
    if config.l2 <= 0.0 {
        let present: BTreeSet<Emotion> = data.iter().map(|ex| ex.label).collect();
        if present.len() < Emotion::ALL.len() {
            return Err(Error::Config(
                "every emotion must be present when L2 strength is zero".into(),
            ));
        }
    }
    let mut flat = vec![0.0; Emotion::ALL.len() * (dim + 1)];
    let (mut loss, mut grad) = loss_and_gradient(&flat, data, config.l2);
    let mut losses = vec![loss];
    let mut step = config.learning_rate;
    for _ in 0..config.iterations {
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 < 1e-20 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = flat.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let (trial_loss, trial_grad) = loss_and_gradient(&trial, data, config.l2);
            if trial_loss.is_finite() && trial_loss <= loss - 1e-4 * step * g2 {
                flat = trial;
                loss = trial_loss;
                grad = trial_grad;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        losses.push(loss);
        step = (step * 2.0).min(config.learning_rate * 8.0);
    }
    Ok(FitReport {
        weights: EmotionWeights::from_flat(&flat, dim),
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::SemanticAction;

    fn approx_eq(a: &EmotionDistribution, b: &[f64; 7], tol: f64) {
        for i in 0..7 {
            assert!((a.probs[i] - b[i]).abs() <= tol, "{:?} vs {:?}", a.probs, b);
        }
    }

    fn neutral_satisfied(n: f64) -> EmotionDistribution {
        let mut p = [0.0; 7];
        p[Emotion::Neutral.index()] = n;
        p[Emotion::Satisfied.index()] = 1.0 - n;
        EmotionDistribution::new(p).unwrap()
    }

    #[test]
    fn sentiment_table() {
        assert_eq!(sentiment_of(Emotion::Neutral).value(), 0);
        assert_eq!(sentiment_of(Emotion::Satisfied).value(), 1);
        assert_eq!(sentiment_of(Emotion::Excited).value(), 1);
        assert_eq!(sentiment_of(Emotion::Abusive).value(), -1);
        for e in [Emotion::Fearful, Emotion::Dissatisfied, Emotion::Apologetic] {
            assert_eq!(sentiment_of(e), Sentiment::Negative);
        }
    }

    #[test]
    fn zero_weights_give_uniform_for_impolite() {
        let mut f = ElicitorFeatures::initial(EventEmotion::Neutral, Conduct::Impolite);
        f.turn = 3;
        let d = emotion_distribution(&f, &EmotionWeights::zeros()).unwrap();
        approx_eq(&d, &[1.0 / 7.0; 7], 1e-15);
    }

    #[test]
    fn polite_users_never_abusive() {
        let mut w = EmotionWeights::zeros();
        w.set_bias(Emotion::Abusive, 50.0);
        let f = ElicitorFeatures::initial(EventEmotion::Neutral, Conduct::Polite);
        let d = emotion_distribution(&f, &w).unwrap();
        assert_eq!(d.p(Emotion::Abusive), 0.0);
        approx_eq(&d, &[1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.0, 1.0 / 6.0, 1.0 / 6.0], 1e-15);
    }

    #[test]
    fn strong_bias_dominates() {
        let mut w = EmotionWeights::zeros();
        w.set_bias(Emotion::Dissatisfied, 10.0);
        let f = ElicitorFeatures::initial(EventEmotion::Neutral, Conduct::Impolite);
        let d = emotion_distribution(&f, &w).unwrap();
        // e^10 / (e^10 + 6)
        let expected = 10f64.exp() / (10f64.exp() + 6.0);
        assert!((d.p(Emotion::Dissatisfied) - expected).abs() < 1e-12);
        assert!(d.p(Emotion::Dissatisfied) > 0.99);
    }

    #[test]
    fn zero_weight_feature_is_irrelevant() {
        let mut w = EmotionWeights::zeros();
        w.set(Emotion::Satisfied, "reply", 2.0);
        let a = ElicitorFeatures::initial(EventEmotion::Neutral, Conduct::Polite);
        let mut b = a.clone();
        b.user_error = true;
        assert_eq!(emotion_distribution(&a, &w).unwrap(), emotion_distribution(&b, &w).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let w = EmotionWeights::from_rows(vec![vec![0.0; 3]; 7], vec![0.0; 7]).unwrap();
        let f = ElicitorFeatures::initial(EventEmotion::Neutral, Conduct::Polite);
        assert!(matches!(
            emotion_distribution(&f, &w),
            Err(Error::Dimension { expected: 15, got: 3 })
        ));
    }

    #[test]
    fn reweight_examples() {
        let d = reweight_neutral(&neutral_satisfied(0.5), 1.5).unwrap();
        assert!((d.p(Emotion::Neutral) - 0.6).abs() < 1e-12);
        assert!((d.p(Emotion::Satisfied) - 0.4).abs() < 1e-12);

        let base = neutral_satisfied(0.3);
        assert_eq!(reweight_neutral(&base, 1.0).unwrap(), base);

        let zero = reweight_neutral(&base, 0.0).unwrap();
        assert_eq!(zero.p(Emotion::Neutral), 0.0);
        assert!((zero.p(Emotion::Satisfied) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reweight_rejects_negative() {
        assert!(matches!(
            reweight_neutral(&EmotionDistribution::uniform(), -0.1),
            Err(Error::NegativeWeight(_))
        ));
    }

    #[test]
    fn infinite_weight_is_point_mass() {
        let d = reweight_neutral(&EmotionDistribution::uniform(), f64::INFINITY).unwrap();
        assert_eq!(d, EmotionDistribution::point(Emotion::Neutral));
    }

    #[test]
    fn sampling() {
        let point = EmotionDistribution::point(Emotion::Apologetic);
        for s in 0..20 {
            assert_eq!(sample_emotion(&point, s), Emotion::Apologetic);
        }
        let u = EmotionDistribution::uniform();
        assert_eq!(sample_emotion(&u, 9), sample_emotion(&u, 9));
        let mut rng = seed::rng(1);
        let mut counts = [0usize; 7];
        let n = 70_000;
        for _ in 0..n {
            counts[sample_emotion_with(&u, &mut rng).index()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 7.0).abs() <= 0.01, "{counts:?}");
        }
    }

    #[test]
    fn features_at_turn_zero() {
        let f = extract_features(&[], &[], &[], ProgressSummary::default(), EventEmotion::Neutral, Conduct::Polite, 0);
        assert!(f.behaviors.is_empty());
        assert_eq!(f.failures, 0);
        assert_eq!(encode(&f, FeatureView::Full).values[0], 1.0);
    }

    #[test]
    fn failure_counter_counts_consecutive_nooffers() {
        let nooffer = vec![SemanticAction::new("nooffer", "restaurant", "none", "none")];
        let one = ProgressSummary::next_failures(0, &nooffer);
        let two = ProgressSummary::next_failures(one, &nooffer);
        assert_eq!(two, 2);
        let offer = vec![SemanticAction::new("offer", "restaurant", "name", "x")];
        assert_eq!(ProgressSummary::next_failures(two, &offer), 0);
    }

    #[test]
    fn weights_json_round_trip() {
        let w = EmotionWeights::bundled();
        assert_eq!(EmotionWeights::from_json(&w.to_json()).unwrap(), w);
        assert!(EmotionWeights::from_json(r#"{"neutral": {"nonsense": 1.0}}"#).is_err());
        assert!(EmotionWeights::from_json(r#"{"ecstatic": {"bias": 1.0}}"#).is_err());
    }

    #[test]
    fn empty_dataset_errors() {
        assert!(matches!(fit_weights(&[], &FitConfig::default()), Err(Error::Empty(_))));
    }
}
