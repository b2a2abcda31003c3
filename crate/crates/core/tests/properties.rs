use emosim::config::Config;
use emosim::emotion::Emotion;
use emosim::ontology::{sample_goal, sample_persona, GoalConfig, SemanticAction, GENERAL};
use emosim::rl::{run_dialogue, simulate, SystemAgent, SystemSetup};
use emosim::seed;
use emosim::system::{rule_policy, BeliefState, RulePolicyConfig};
use emosim::user_sim::SimulatorVariant;
use emosim::world::World;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn sampled_goals_are_valid() {
    let world = World::bundled();
    for s in 0..1000 {
        let goal = sample_goal(&world.ontology, &GoalConfig::default(), s).unwrap();
        assert!(goal.violations(&world.ontology).is_empty(), "seed {s}");
        let persona = sample_persona(&goal, &Default::default(), s).unwrap();
        persona.check_against(&goal).unwrap();
    }
}

#[test]
fn dialogues_end_within_max_turns() {
    let world = World::bundled();
    let cfg = Config::default();
    for v in SimulatorVariant::ALL {
        for max_turns in [1, 5, 20] {
            let logs = simulate(
                &world,
                SystemSetup::new(SystemAgent::Random),
                &cfg.user_sim(v),
                &cfg.reward,
                max_turns,
                50,
                7,
            )
            .unwrap();
            for l in &logs {
                assert!(l.turns.len() <= max_turns);
                assert!(l.outcome().is_some());
            }
        }
    }
}

#[test]
fn only_emous_expresses_emotion() {
    let world = World::bundled();
    let cfg = Config::default();
    let noise = cfg.probe.noise.clone();
    for v in [SimulatorVariant::GentusLike, SimulatorVariant::AbusLike] {
        for s in 0..100 {
            let log = run_dialogue(
                &world,
                SystemSetup::new(SystemAgent::Rule(&cfg.system.rule)).with_noise(&noise),
                &cfg.user_sim(v),
                &cfg.reward,
                cfg.ppo.max_turns,
                s,
            )
            .unwrap();
            assert!(log.turns.iter().all(|t| t.emotion == Emotion::Neutral), "{v} seed {s}");
        }
    }
}

#[test]
fn same_seed_same_dialogue() {
    let world = World::bundled();
    let cfg = Config::default();
    let run = || {
        simulate(
            &world,
            SystemSetup::new(SystemAgent::Rule(&cfg.system.rule)),
            &cfg.user_sim(SimulatorVariant::Emous),
            &cfg.reward,
            cfg.ppo.max_turns,
            40,
            3,
        )
        .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn rule_policy_informs_only_database_values() {
    let world = World::bundled();
    let o = &world.ontology;
    let config = RulePolicyConfig::default();
    let mut g = seed::rng(5);
    let domains: Vec<&String> = o.domains.keys().collect();
    for _ in 0..1000 {
        let mut belief = BeliefState::new();
        for _ in 0..g.gen_range(0..4) {
            let d = *domains.choose(&mut g).unwrap();
            let schema = &o.domains[d];
            let slots: Vec<_> = schema.informable.iter().collect();
            let (s, vs) = slots[g.gen_range(0..slots.len())];
            let v = vs.choose(&mut g).unwrap();
            belief.constraints.entry(d.clone()).or_default().insert(s.clone(), v.clone());
            belief.last_user_actions.push(SemanticAction::new("inform", d, s, v));
            if g.gen_bool(0.5) {
                let r = schema.requestable.choose(&mut g).unwrap();
                belief.requested.push((d.clone(), r.clone()));
            }
        }
        let actions = rule_policy(&belief, &world.db, o, &config, &mut g);
        assert!(!actions.is_empty());
        for a in actions.iter().filter(|a| a.is("inform") || a.is("offer")) {
            assert_ne!(a.domain, GENERAL);
            let supported = belief.constraints_of(&a.domain).and_then(|c| c.get(&a.slot)) == Some(&a.value)
                || world.db.domains.get(&a.domain).is_some_and(|rs| rs.iter().any(|r| r.get(&a.slot) == Some(&a.value)));
            assert!(supported, "{a:?} not grounded in belief or database");
        }
    }
}

#[test]
fn default_config_round_trips() {
    let cfg = Config::default();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(Config::from_json(&text).unwrap(), cfg);
    let scaled = cfg.paper_scale();
    assert_eq!(Config::from_json(&serde_json::to_string(&scaled).unwrap()).unwrap(), scaled);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn goal_sampling_is_deterministic(s in any::<u64>()) {
        let world = World::bundled();
        let a = sample_goal(&world.ontology, &GoalConfig::default(), s).unwrap();
        let b = sample_goal(&world.ontology, &GoalConfig::default(), s).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn episode_logs_round_trip(s in 0u64..10_000) {
        let world = World::bundled();
        let cfg = Config::default();
        let log = run_dialogue(
            &world,
            SystemSetup::new(SystemAgent::Rule(&cfg.system.rule)),
            &cfg.user_sim(SimulatorVariant::Emous),
            &cfg.reward,
            cfg.ppo.max_turns,
            s,
        )
        .unwrap();
        let back: emosim::episode::EpisodeLog = serde_json::from_str(&serde_json::to_string(&log).unwrap()).unwrap();
        prop_assert_eq!(back, log);
    }
}
