use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use emosim::config::Config;
use emosim::user_sim::SimulatorVariant;

mod commands;
mod io;

#[derive(Parser, Debug)]
#[command(name = "emosim", version, about = "Emotion-aware user simulation for task-oriented dialogue")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON config file; sections left out keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// 200 epochs × 1000 turns × 5 seeds, 400 evaluation dialogues per pair.
    #[arg(long, global = true)]
    paper_scale: bool,
}

impl Global {
    pub fn config(&self) -> anyhow::Result<Config> {
        let config = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        Ok(if self.paper_scale { config.paper_scale() } else { config })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SystemKind {
    Rule,
    Random,
    Policy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run dialogues and write the episode logs.
    Simulate(SimulateArgs),
    /// Train the system policy with PPO, one run per seed.
    TrainPolicy(TrainArgs),
    /// Train on each simulator and evaluate on every simulator.
    CrossEval(CrossArgs),
    /// Emotion elicitation per system behaviour and sentiment curves.
    ProbeBehavior(ProbeArgs),
    /// BLEU, self-BLEU and SER of generated utterances.
    EvalNlg(NlgArgs),
    /// Emotion prediction scores.
    EvalEmotion(EmotionArgs),
    /// Validate a corpus, derive personas and optionally fit emotion weights.
    IngestCorpus(IngestArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = SimulatorVariant::Emous)]
    pub variant: SimulatorVariant,
    #[arg(long, default_value_t = 100)]
    pub dialogues: usize,
    #[arg(long, value_enum, default_value_t = SystemKind::Rule)]
    pub system: SystemKind,
    /// Policy parameters written by `train-policy`; needed with `--system policy`.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Inject the probe's misbehaviour noise into the system.
    #[arg(long)]
    pub noise: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, default_value_t = SimulatorVariant::Emous)]
    pub variant: SimulatorVariant,
}

#[derive(Args, Debug)]
pub struct CrossArgs {
    #[arg(long, value_delimiter = ',', default_values_t = SimulatorVariant::ALL)]
    pub train: Vec<SimulatorVariant>,
    #[arg(long = "eval", value_delimiter = ',', default_values_t = SimulatorVariant::ALL)]
    pub eval: Vec<SimulatorVariant>,
    /// Evaluation dialogues per pair and seed; defaults to the config's.
    #[arg(long)]
    pub dialogues: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Defaults to the config's episode count.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Args, Debug)]
pub struct NlgArgs {
    /// JSON lines `{"pred": str, "ref": str | [str], "actions": [[i, d, s, v], ...]}`;
    /// `actions` is optional and enables SER.
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Debug)]
pub struct EmotionArgs {
    /// JSON lines `{"pred": emotion, "ref": emotion}` to score directly.
    #[arg(long, conflicts_with_all = ["corpus", "ablation_seeds"])]
    pub predictions: Option<PathBuf>,
    /// Labelled corpus to score the configured weights on; the bundled mini
    /// corpus when omitted.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Fit on this corpus first, then score on `--corpus`.
    #[arg(long)]
    pub fit_on: Option<PathBuf>,
    /// Run the persona ablation on this many synthetic seeds instead.
    #[arg(long)]
    pub ablation_seeds: Option<u64>,
    /// Synthetic dialogues per ablation corpus.
    #[arg(long, default_value_t = 200)]
    pub ablation_dialogues: usize,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Corpus file; omit to generate a synthetic one.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Synthetic dialogues when no input is given.
    #[arg(long, default_value_t = 200)]
    pub synthetic: usize,
    /// Also fit emotion weights on the corpus.
    #[arg(long)]
    pub fit: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => commands::simulate(&cli.global, a),
        Command::TrainPolicy(a) => commands::train_policy(&cli.global, a),
        Command::CrossEval(a) => commands::cross_eval(&cli.global, a),
        Command::ProbeBehavior(a) => commands::probe_behavior(&cli.global, a),
        Command::EvalNlg(a) => commands::eval_nlg(&cli.global, a),
        Command::EvalEmotion(a) => commands::eval_emotion(&cli.global, a),
        Command::IngestCorpus(a) => commands::ingest_corpus(&cli.global, a),
    };
    match result {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
