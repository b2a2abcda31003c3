//! System-behaviour tagging and the analyses built on it: which emotions each
//! behaviour elicits, sentiment over turns, and cross-simulator evaluation.

mod analysis;
mod behavior;
mod cross;
mod report;
mod run;

pub use analysis::{elicitation_table, sentiment_curve, CurveCell, ElicitationRow, ElicitationTable, SentimentCurve};
pub use behavior::{classify_behavior, Behavior};
pub use cross::{cross_model, CrossEvalConfig, CrossModelMatrix};
pub use run::{behavior_probe, BehaviorProbe};
pub use report::{
    cross_csv, curve_csv, elicitation_csv, emit_report, ProbeReport, CROSS_FILE, CURVE_FILE, ELICITATION_FILE,
    SUMMARY_FILE,
};
