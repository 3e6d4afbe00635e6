mod common;

use common::drive;
use proptest::prelude::*;
use slatesim::agents::RandomAgent;
use slatesim::choice::{choice_distribution, ChoiceConfig, ScoreFn, Squash};
use slatesim::envs::{ChocKaleConfig, InterestEvolutionConfig, LatentBanditConfig, UserPrior};
use slatesim::rng;
use slatesim::types::Slate;

fn choice_strategy() -> impl Strategy<Value = ChoiceConfig> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(|n| ChoiceConfig::logit().with_null(Some(n))),
        (-3.0..3.0f64).prop_map(|n| ChoiceConfig::conditional(ScoreFn::Exp).with_null(Some(n))),
        (0.05..1.0f64).prop_map(|a| ChoiceConfig::cascade(a, Squash::Logistic)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn env_choice_rows_are_distributions(
        choice in choice_strategy(),
        scale in 0.1..8.0f64,
        k in 1..5usize,
        seed in any::<u64>(),
    ) {
        let cfg = LatentBanditConfig { affinity_scale: scale, slate_size: k, choice, ..LatentBanditConfig::default() };
        let mut env = cfg.build(seed);
        env.reset(&mut rng::seeded(seed));
        let slate = Slate::new((0..k as u32).collect());
        let docs = env.slate_documents(&slate);
        let scores = env.responses.scores(env.user_state(), &docs).unwrap();
        let p = choice_distribution(&scores, env.responses.choice_config()).unwrap();
        prop_assert_eq!(p.len(), k + 1);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn interests_stay_bounded_and_budget_never_grows(
        nudge in 0.0..1.0f64,
        positive in 0.0..=1.0f64,
        bonus in 0.0..0.9f64,
        seed in any::<u64>(),
    ) {
        let cfg = InterestEvolutionConfig {
            nudge_fraction: nudge,
            positive_nudge_prob: positive,
            bonus_coefficient: bonus,
            initial_budget: 40.0,
            ..InterestEvolutionConfig::default()
        };
        let mut env = cfg.build(seed);
        let mut agent = RandomAgent::new(cfg.slate_size);
        let mut bad = None;
        drive(&mut env, &mut agent, seed, |before, after, t| {
            let bounded = after.interests.entries().iter().all(|x| (-1.0..=1.0).contains(x));
            if bad.is_none() && (!bounded || after.budget > before.budget) {
                bad = Some(t);
            }
        });
        prop_assert_eq!(bad, None);
    }

    #[test]
    fn satisfaction_stays_in_the_unit_interval(
        step in 0.0..0.5f64,
        noise in 0.0..0.5f64,
        initial in 0.0..=1.0f64,
        seed in any::<u64>(),
    ) {
        let cfg = ChocKaleConfig {
            drift_step: step,
            drift_noise: noise,
            initial_satisfaction: initial,
            episode_length: 50,
            ..ChocKaleConfig::default()
        };
        let mut env = cfg.build(seed);
        let mut agent = RandomAgent::new(cfg.slate_size);
        let mut ok = true;
        drive(&mut env, &mut agent, seed, |_, after, _| {
            ok &= (0.0..=1.0).contains(&after.satisfaction);
        });
        prop_assert!(ok);
    }

    #[test]
    fn point_mass_users_start_where_placed(x in -1.0..=1.0f64, seed in any::<u64>()) {
        let cfg = InterestEvolutionConfig {
            num_topics: 2,
            user_prior: UserPrior::PointMass { interests: vec![x, -x] },
            ..InterestEvolutionConfig::default()
        };
        let mut env = cfg.build(seed);
        env.reset(&mut rng::seeded(seed));
        prop_assert_eq!(env.user_state().interests.entries(), &[x, -x][..]);
    }
}
