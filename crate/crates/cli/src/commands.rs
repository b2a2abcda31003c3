use std::fmt::Write as _;

use anyhow::{bail, Context, Result};
use emosim::corpus::{
    derive_personas, evaluate_emotion_prediction, fit_on_corpus, generate_synthetic_corpus, load_corpus,
    persona_ablation, persona_dependent_setup, Corpus, SyntheticConfig,
};
use emosim::emotion::{sentiment_of, Emotion, FeatureView, Sentiment};
use emosim::metrics::{corpus_bleu, corpus_ser, macro_f1, self_bleu};
use emosim::ontology::SemanticAction;
use emosim::probe::{behavior_probe, cross_model, emit_report, CrossEvalConfig, ProbeReport};
use emosim::rl::{curve_csv, evaluate, simulate as run_simulation, train_policy as run_training, SystemAgent, SystemSetup};
use emosim::system::{ActMode, PolicyParameters};
use emosim::user_sim::SimulatorVariant;
use emosim::world::World;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::io::{read_jsonl, write};
use crate::{
    CrossArgs, EmotionArgs, Global, IngestArgs, NlgArgs, ProbeArgs, SimulateArgs, SystemKind, TrainArgs,
};

fn summary_file(g: &Global, summary: &Value) -> Result<()> {
    write(&g.out, "summary.json", serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}

pub fn simulate(g: &Global, a: &SimulateArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let params;
    let agent = match a.system {
        SystemKind::Rule => SystemAgent::Rule(&cfg.system.rule),
        SystemKind::Random => SystemAgent::Random,
        SystemKind::Policy => {
            let path = a.policy.as_ref().context("--system policy needs --policy <file>")?;
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            params = PolicyParameters::from_json(&text)?;
            SystemAgent::Learned(&params, ActMode::Greedy)
        }
    };
    let mut setup = SystemSetup::new(agent).with_channel(cfg.system.channel);
    if a.noise {
        setup = setup.with_noise(&cfg.probe.noise);
    }
    let logs = run_simulation(
        &world,
        setup,
        &cfg.user_sim(a.variant),
        &cfg.reward,
        cfg.ppo.max_turns,
        a.dialogues,
        g.seed,
    )?;

    let mut lines = String::new();
    for l in &logs {
        lines.push_str(&serde_json::to_string(l)?);
        lines.push('\n');
    }
    write(&g.out, "episodes.jsonl", lines)?;

    let n = logs.len().max(1) as f64;
    let mut emotions = serde_json::Map::new();
    for e in Emotion::ALL {
        let c = logs.iter().flat_map(|l| &l.turns).filter(|t| t.emotion == e).count();
        emotions.insert(e.as_str().into(), c.into());
    }
    let summary = json!({
        "variant": a.variant,
        "dialogues": logs.len(),
        "success_rate": logs.iter().filter(|l| l.success()).count() as f64 / n,
        "mean_turns": logs.iter().map(|l| l.turns.len()).sum::<usize>() as f64 / n,
        "mean_return": logs.iter().map(|l| l.total_reward()).sum::<f64>() / n,
        "emotions": emotions,
    });
    summary_file(g, &summary)?;
    Ok(summary)
}

pub fn train_policy(g: &Global, a: &TrainArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let sim = cfg.user_sim(a.variant);
    let mut curve = String::new();
    let mut runs = Vec::new();
    for seed in cfg.ppo.seed_list(g.seed) {
        let result = run_training(&world, &sim, &cfg.ppo, &cfg.reward, seed)?;
        let body = curve_csv(&result.curve);
        if curve.is_empty() {
            curve.push_str(&body);
        } else {
            curve.extend(body.lines().skip(1).map(|l| format!("{l}\n")));
        }
        write(&g.out, &format!("policy_seed{seed}.json"), result.params.to_json())?;
        let eval = evaluate(
            &world,
            SystemSetup::new(SystemAgent::Learned(&result.params, ActMode::Greedy)),
            &sim,
            &cfg.reward,
            cfg.ppo.max_turns,
            cfg.probe.eval_dialogues,
            &[seed],
        )?;
        runs.push(json!({
            "seed": seed,
            "final_train_success": result.curve.last().map(|p| p.success_rate),
            "eval_success": eval.mean,
            "skipped_updates": result.skipped_updates,
        }));
    }
    write(&g.out, "learning_curve.csv", curve)?;
    let mean = runs.iter().filter_map(|r| r["eval_success"].as_f64()).sum::<f64>() / runs.len().max(1) as f64;
    let summary = json!({
        "variant": a.variant,
        "epochs": cfg.ppo.epochs,
        "turns_per_epoch": cfg.ppo.turns_per_epoch,
        "eval_dialogues": cfg.probe.eval_dialogues,
        "mean_eval_success": mean,
        "runs": runs,
    });
    summary_file(g, &summary)?;
    Ok(summary)
}

pub fn cross_eval(g: &Global, a: &CrossArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let config = CrossEvalConfig {
        ppo: cfg.ppo.clone(),
        reward: cfg.reward.clone(),
        dialogues: a.dialogues.unwrap_or(cfg.probe.eval_dialogues),
        seeds: cfg.ppo.seed_list(g.seed),
    };
    let matrix = cross_model(&world, &a.train, &a.eval, |v| cfg.user_sim(v), &config)?;
    let summary = serde_json::to_value(&matrix)?;
    emit_report(
        &ProbeReport {
            cross: Some(matrix),
            ..Default::default()
        },
        &g.out,
    )?;
    Ok(summary)
}

pub fn probe_behavior(g: &Global, a: &ProbeArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let probe = behavior_probe(
        &world,
        &cfg.user_sim(cfg.probe.variant),
        &cfg.system.rule,
        &cfg.probe.noise,
        &cfg.reward,
        cfg.ppo.max_turns,
        a.episodes.unwrap_or(cfg.probe.episodes),
        g.seed,
    )?;
    let n = probe.logs.len().max(1) as f64;
    let mut rows = serde_json::Map::new();
    for (b, r) in &probe.elicitation.rows {
        let [neutral, dissatisfied, satisfied] = r.retained();
        rows.insert(
            b.as_str().into(),
            json!({"count": r.count, "neutral": neutral, "dissatisfied": dissatisfied, "satisfied": satisfied}),
        );
    }
    let summary = json!({
        "episodes": probe.logs.len(),
        "success_rate": probe.logs.iter().filter(|l| l.success()).count() as f64 / n,
        "final_window_gap": probe.final_gap(),
        "elicitation": rows,
    });
    emit_report(
        &ProbeReport {
            elicitation: Some(probe.elicitation),
            curve: Some(probe.curve),
            cross: None,
        },
        &g.out,
    )?;
    Ok(summary)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum References {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct NlgRecord {
    pred: String,
    #[serde(rename = "ref")]
    reference: Option<References>,
    actions: Option<Vec<SemanticAction>>,
}

pub fn eval_nlg(g: &Global, a: &NlgArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let records: Vec<NlgRecord> = read_jsonl(&a.input)?;
    if records.is_empty() {
        bail!("{} holds no records", a.input.display());
    }
    let preds: Vec<String> = records.iter().map(|r| r.pred.clone()).collect();
    let bleu = if records.iter().all(|r| r.reference.is_some()) {
        let refs: Vec<Vec<String>> = records
            .iter()
            .map(|r| match r.reference.as_ref().expect("checked") {
                References::One(s) => vec![s.clone()],
                References::Many(v) => v.clone(),
            })
            .collect();
        Some(corpus_bleu(&preds, &refs)?)
    } else {
        None
    };
    let self_bleu = (preds.len() > 1).then(|| self_bleu(&preds)).transpose()?;
    let ser_turns: Vec<(Vec<SemanticAction>, String)> = records
        .iter()
        .filter_map(|r| r.actions.clone().map(|a| (a, r.pred.clone())))
        .collect();
    let ser = if ser_turns.is_empty() {
        None
    } else {
        Some(corpus_ser(&ser_turns, &world.ontology)?)
    };
    let summary = json!({
        "records": records.len(),
        "bleu": bleu,
        "self_bleu": self_bleu,
        "ser": ser,
    });
    summary_file(g, &summary)?;
    Ok(summary)
}

#[derive(Deserialize)]
struct EmotionRecord {
    pred: Emotion,
    #[serde(rename = "ref")]
    reference: Emotion,
}

pub fn eval_emotion(g: &Global, a: &EmotionArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let labels = &cfg.corpus.label_map;
    let summary = if let Some(path) = &a.predictions {
        let records: Vec<EmotionRecord> = read_jsonl(path)?;
        let preds: Vec<Emotion> = records.iter().map(|r| r.pred).collect();
        let refs: Vec<Emotion> = records.iter().map(|r| r.reference).collect();
        let sp: Vec<Sentiment> = preds.iter().map(|e| sentiment_of(*e)).collect();
        let sr: Vec<Sentiment> = refs.iter().map(|e| sentiment_of(*e)).collect();
        json!({
            "records": records.len(),
            "emotion_f1": macro_f1(&preds, &refs, &Emotion::ALL)?,
            "sentiment_f1": macro_f1(&sp, &sr, &Sentiment::ALL)?,
        })
    } else if let Some(n) = a.ablation_seeds {
        let (teacher, sim) = persona_dependent_setup(&world);
        let world = world.with_weights(teacher);
        let synthetic = SyntheticConfig::new(sim, a.ablation_dialogues);
        let mut runs = Vec::new();
        for seed in g.seed..g.seed + n {
            let s = persona_ablation(&world, &synthetic, labels, &cfg.emotion.fit, seed)?;
            runs.push(json!({"seed": seed, "full": s.full, "no_persona": s.no_persona}));
        }
        let wins = runs
            .iter()
            .filter(|r| r["full"]["emotion_f1"].as_f64() > r["no_persona"]["emotion_f1"].as_f64())
            .count();
        json!({"dialogues": a.ablation_dialogues, "full_wins": wins, "runs": runs})
    } else {
        let test = match &a.corpus {
            Some(p) => load_corpus(p, labels)?,
            None => Corpus::bundled_mini(),
        };
        let train = a.fit_on.as_ref().map(|p| load_corpus(p, labels)).transpose()?;
        let mut views = serde_json::Map::new();
        for (name, view) in [("full", FeatureView::Full), ("no_persona", FeatureView::NoPersona)] {
            let weights = match &train {
                Some(c) => fit_on_corpus(c, labels, &world, view, &cfg.emotion.fit)?.weights,
                None => world.weights.clone(),
            };
            let s = evaluate_emotion_prediction(&weights, &test, labels, &world, cfg.emotion.w_neutral, view)?;
            views.insert(name.into(), serde_json::to_value(s)?);
        }
        json!({"fitted": train.is_some(), "scores": views})
    };
    summary_file(g, &summary)?;
    Ok(summary)
}

pub fn ingest_corpus(g: &Global, a: &IngestArgs) -> Result<Value> {
    let cfg = g.config()?;
    let world = World::from_config(&cfg)?;
    let labels = &cfg.corpus.label_map;
    let corpus = match &a.input {
        Some(p) => load_corpus(p, labels)?,
        None => {
            let mut synthetic = SyntheticConfig::new(cfg.user_sim(SimulatorVariant::Emous), a.synthetic);
            synthetic.noise = cfg.probe.noise.clone();
            synthetic.max_turns = cfg.ppo.max_turns;
            generate_synthetic_corpus(&world, &synthetic, labels, g.seed)?
        }
    };
    write(&g.out, "corpus.json", corpus.to_json())?;

    let personas = derive_personas(&corpus, labels, &world)?;
    write(&g.out, "personas.json", serde_json::to_string_pretty(&personas)? + "\n")?;

    let mut label_counts = serde_json::Map::new();
    for e in Emotion::ALL {
        let c = corpus
            .user_turns()
            .filter_map(|t| t.emotion)
            .filter(|&i| labels.emotion(i).ok() == Some(e))
            .count();
        label_counts.insert(e.as_str().into(), c.into());
    }
    let mut summary = json!({
        "dialogues": corpus.dialogues.len(),
        "user_turns": corpus.user_turns().count(),
        "labelled_turns": corpus.user_turns().filter(|t| t.emotion.is_some()).count(),
        "labels": label_counts,
    });
    if a.fit {
        let report = fit_on_corpus(&corpus, labels, &world, FeatureView::Full, &cfg.emotion.fit)?;
        write(&g.out, "emotion_weights.json", report.weights.to_json())?;
        let mut losses = String::from("step,loss\n");
        for (i, l) in report.losses.iter().enumerate() {
            writeln!(losses, "{i},{l:.9}")?;
        }
        write(&g.out, "fit_losses.csv", losses)?;
        summary["final_loss"] = json!(report.losses.last());
    }
    summary_file(g, &summary)?;
    Ok(summary)
}
