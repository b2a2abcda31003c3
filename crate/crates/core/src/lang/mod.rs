//! Template NLG for both speakers, template-inverse NLU, and slot error counting.

mod nlu;
mod ser;
mod templates;

pub use nlu::parse_utterance;
pub use ser::{normalize_text, ser_counts, SerCounts};
pub use templates::{
    realize_system, realize_user, tone_for, Side, TemplateSet, Tone, Utterance, DONTCARE_INTENT,
    GREETING_FALLBACK,
};
