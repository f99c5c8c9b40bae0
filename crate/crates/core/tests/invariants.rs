use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shadowbench::agents::{argmax_lowest, AgentConfig, AgentKind};
use shadowbench::analysis::{agreement_percentage, decision_similarity, sym_kl};
use shadowbench::engine::{extract_features, load_level, BudgetMeter, GameId, StateFeatures, SUM_INF};
use shadowbench::policy_expr::{ucb_value, NodeContext, PolicyExpr};
use shadowbench::shadowing::{run_playthrough, PlaythroughLog};

const VARS: [&str; 4] = ["MIN_D_MOV", "MIN_D_NPC", "SUM_D_NPC", "MAX_R"];

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_map(|raw| {
        let s: f64 = raw.iter().sum();
        if s == 0.0 {
            vec![1.0 / raw.len() as f64; raw.len()]
        } else {
            raw.into_iter().map(|x| x / s).collect()
        }
    })
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|n| (simplex(n), simplex(n)))
}

fn wild() -> impl Strategy<Value = f64> {
    prop_oneof![
        Just(0.0),
        Just(-0.0),
        Just(SUM_INF),
        Just(-1e300),
        Just(1e300),
        -1e4f64..1e4,
    ]
}

fn context() -> impl Strategy<Value = NodeContext> {
    (wild(), wild(), 0u32..50, 0u32..50, wild(), wild(), wild(), 0u32..10, wild()).prop_map(
        |(max_r, mean_reward, child_visits, parent_visits, mov, npc, sum, n_npc, portal)| NodeContext {
            max_r,
            mean_reward,
            child_visits,
            parent_visits,
            features: StateFeatures {
                min_d_mov: mov,
                min_d_npc: npc,
                sum_d_npc: sum,
                n_npc,
                min_d_portal: portal,
            },
        },
    )
}

fn expression() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(&VARS[..]).prop_map(str::to_string),
        prop::sample::select(&["CHILD_VISITS", "PARENT_VISITS", "MEAN_REWARD"][..]).prop_map(str::to_string),
        (-5i32..5).prop_map(|c| c.to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(&['+', '-', '*', '/'][..]), inner.clone())
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            (prop::sample::select(&["abs", "ln", "sqrt"][..]), inner).prop_map(|(f, e)| format!("{f}({e})")),
        ]
    })
}

/// A left-associated chain of distinct variables joined by `+` / `*`.
fn chain() -> impl Strategy<Value = (Vec<&'static str>, Vec<char>)> {
    (2usize..=4).prop_flat_map(|n| {
        (
            Just(VARS[..n].to_vec()).prop_shuffle(),
            prop::collection::vec(prop::sample::select(&['+', '*'][..]), n - 1),
        )
    })
}

fn desk_logs() -> &'static [PlaythroughLog] {
    static LOGS: OnceLock<Vec<PlaythroughLog>> = OnceLock::new();
    LOGS.get_or_init(|| {
        let main = AgentConfig::simple("o", AgentKind::Osla);
        let shadow = AgentConfig::simple("r", AgentKind::Random);
        (0..6)
            .map(|seed| run_playthrough(GameId::Aliens, 0, &main, &shadow, 700, seed).unwrap())
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn kl_is_symmetric_and_nonnegative((p, q) in pair()) {
        let pq = sym_kl(&p, &q).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - sym_kl(&q, &p).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(sym_kl(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn eval_is_always_finite(text in expression(), ctx in context()) {
        let e = PolicyExpr::parse(&text).unwrap();
        prop_assert!(e.eval(&ctx).is_finite(), "{} -> {}", text, e.eval(&ctx));
        for p in e.prunings() {
            prop_assert!(p.eval(&ctx).is_finite());
        }
    }

    #[test]
    fn canonical_form_is_a_fixed_point(text in expression()) {
        let e = PolicyExpr::parse(&text).unwrap();
        let again = PolicyExpr::parse(&e.canonical()).unwrap();
        prop_assert_eq!(again.canonical(), e.canonical());
        prop_assert!(e.prunings().contains(&e));
    }

    #[test]
    fn ucb_is_monotone(
        mean in -10.0f64..10.0,
        dm in 0.001f64..5.0,
        n_a in 1u32..1000,
        n in 1u32..1000,
        alpha in 0.1f64..4.0,
    ) {
        let ctx = |mean_reward, child_visits, parent_visits| NodeContext {
            mean_reward,
            child_visits,
            parent_visits,
            ..NodeContext::default()
        };
        let base = ucb_value(&ctx(mean, n_a, n), alpha);
        prop_assert!(ucb_value(&ctx(mean + dm, n_a, n), alpha) > base);
        prop_assert!(ucb_value(&ctx(mean, n_a + 1, n), alpha) < base);
        prop_assert!(ucb_value(&ctx(mean, n_a, n + 1), alpha) >= base);
        prop_assert!(ucb_value(&ctx(mean, 0, n), alpha) > ucb_value(&ctx(1e9, n_a, n), alpha));
    }

    #[test]
    fn argmax_ignores_a_shift(values in prop::collection::vec(-1000i32..1000, 1..10), c in -100_000i32..100_000) {
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let shifted: Vec<f64> = values.iter().map(|&x| f64::from(x + c)).collect();
        let a = argmax_lowest(&v).unwrap();
        prop_assert_eq!(argmax_lowest(&shifted), Some(a));
        prop_assert!(v[..a].iter().all(|&x| x < v[a]));
    }

    #[test]
    fn deleting_a_summand_or_factor_keeps_the_rest((vars, ops) in chain()) {
        let mut text = vars[0].to_string();
        for (op, v) in ops.iter().zip(&vars[1..]) {
            text = format!("({text} {op} {v})");
        }
        let got: std::collections::BTreeSet<String> =
            PolicyExpr::parse(&text).unwrap().prunings().iter().map(PolicyExpr::canonical).collect();
        let mut expected = std::collections::BTreeSet::new();
        for mask in 1u32..(1 << vars.len()) {
            let mut acc: Option<String> = None;
            for (i, v) in vars.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    continue;
                }
                acc = Some(match acc {
                    None => v.to_string(),
                    Some(a) => format!("({a} {} {v})", ops[i - 1]),
                });
            }
            expected.insert(acc.unwrap());
        }
        prop_assert_eq!(got.len(), (1 << vars.len()) - 1);
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn decisions_are_valid(
        game in prop::sample::select(GameId::ALL.to_vec()),
        kind in prop::sample::select(vec![AgentKind::Random, AgentKind::Osla, AgentKind::Mcs, AgentKind::Mcts]),
        cap in 10u32..120,
        walk in 0u32..30,
        seed in any::<u64>(),
    ) {
        let config = match kind {
            AgentKind::Mcts => AgentConfig::mcts("a", shadowbench::policy_expr::REFERENCE_POLICY),
            k => AgentConfig::simple("a", k),
        };
        let agent = config.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = load_level(game, 0, seed).unwrap();
        for _ in 0..walk {
            if state.is_terminal() {
                break;
            }
            let legal = state.legal_actions();
            state = state.step(legal[rand::Rng::gen_range(&mut rng, 0..legal.len())], &mut rng).unwrap();
        }
        prop_assume!(!state.is_terminal());
        let mut meter = BudgetMeter::new(cap);
        let d = agent.decide(&state, &mut meter, &mut rng).unwrap();
        prop_assert_eq!(d.calls, meter.used());
        prop_assert_eq!(d.p.len(), state.legal_actions().len());
        prop_assert!(d.validate(cap).is_ok(), "{:?}", d.validate(cap));
    }

    #[test]
    fn features_are_sane(game in prop::sample::select(GameId::ALL.to_vec()), walk in 0u32..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = load_level(game, 0, seed).unwrap();
        for _ in 0..walk {
            if state.is_terminal() {
                break;
            }
            let legal = state.legal_actions();
            state = state.step(legal[rand::Rng::gen_range(&mut rng, 0..legal.len())], &mut rng).unwrap();
        }
        let f = extract_features(&state);
        let d_max = f64::from(state.width + state.height);
        prop_assert_eq!(f.n_npc as usize, state.npcs.len());
        for x in [f.min_d_mov, f.min_d_npc, f.min_d_portal] {
            prop_assert!((0.0..=d_max).contains(&x));
        }
        if f.n_npc == 0 {
            prop_assert_eq!(f.sum_d_npc, SUM_INF);
        } else {
            let dists: Vec<f64> = state.npcs.iter().map(|n| f64::from(state.avatar.manhattan(n.pos))).collect();
            prop_assert!(dists.iter().all(|&d| f.min_d_npc <= d));
            prop_assert_eq!(f.sum_d_npc, dists.iter().sum::<f64>());
        }
    }

    #[test]
    fn ap_and_ds_ignore_log_order(order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let logs = desk_logs();
        let base: Vec<&PlaythroughLog> = logs.iter().collect();
        let shuffled: Vec<&PlaythroughLog> = order.iter().map(|&i| &logs[i]).collect();
        let ap = agreement_percentage(&base).unwrap();
        let ds = decision_similarity(&base).unwrap();
        prop_assert!((agreement_percentage(&shuffled).unwrap() - ap).abs() <= 1e-9);
        prop_assert!((decision_similarity(&shuffled).unwrap() - ds).abs() <= 1e-12);
    }
}
