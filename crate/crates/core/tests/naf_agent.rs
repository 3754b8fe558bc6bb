use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vidrate_core::env::RewardBreakdown;
use vidrate_core::naf::{FrozenHeads, Head, NafAgent, NafConfig, ReplayBuffer, Transition};

fn agent(seed: u64) -> NafAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = NafAgent::new(
        8,
        NafConfig {
            hidden: vec![32, 16],
            ..NafConfig::default()
        },
        &mut rng,
    )
    .unwrap();
    // Unit-scale weights give varied mu and curvature across states.
    for h in [Head::Mu, Head::Value, Head::Curvature] {
        a.head_params_mut(h)
            .iter_mut()
            .for_each(|p| *p = rng.random_range(-1.0..1.0));
    }
    a
}

fn obs(rng: &mut impl Rng) -> Vec<f64> {
    (0..8).map(|_| rng.random()).collect()
}

fn transition(rng: &mut impl Rng, tag: f64) -> Transition {
    Transition {
        observation: obs(rng),
        action_unit: rng.random(),
        reward_components: RewardBreakdown::from_components([0.0; 4], [1.0; 4]),
        reward: tag,
        next_observation: obs(rng),
        terminal: false,
        origin: None,
    }
}

#[test]
fn q_at_policy_is_value_and_bounded_above() {
    let a = agent(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10_000 {
        let s = obs(&mut rng);
        let mu = a.policy(&s).unwrap();
        let v = a.value(&s).unwrap();
        assert!((a.q_value(&s, mu).unwrap() - v).abs() <= 1e-12);
        let act: f64 = rng.random();
        let q = a.q_value(&s, act).unwrap();
        assert!(q <= v);
        assert!(q >= v - 0.5);
    }
}

#[test]
fn grid_argmax_matches_policy() {
    let a = agent(3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let levels = 200;
    let spacing = 1.0 / levels as f64;
    for _ in 0..1_000 {
        let s = obs(&mut rng);
        let best = (0..=levels)
            .map(|i| i as f64 * spacing)
            .max_by(|x, y| a.q_value(&s, *x).unwrap().total_cmp(&a.q_value(&s, *y).unwrap()))
            .unwrap();
        let mu = a.policy(&s).unwrap();
        assert!((best - mu).abs() <= spacing / 2.0 + 1e-12, "argmax {best} vs mu {mu}");
    }
}

#[test]
fn exploration_noise_has_requested_spread() {
    let a = agent(5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // A state whose policy sits well inside (0, 1) so clamping is rare.
    let s = (0..)
        .map(|_| obs(&mut rng))
        .find(|s| (a.policy(s).unwrap() - 0.5).abs() < 0.15)
        .unwrap();
    let mu = a.policy(&s).unwrap();
    let sigma = 0.05;
    let n = 200_000;
    let draws: Vec<f64> = (0..n).map(|_| a.select_action(&s, sigma, &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!((mean - mu).abs() < 1e-3, "{mean} vs {mu}");
    assert!((sd - sigma).abs() / sigma < 0.01, "sd {sd}");
    assert_eq!(a.select_action(&s, 0.0, &mut rng).unwrap(), mu);
    assert!(a.select_action(&s, -1.0, &mut rng).is_err());
}

#[test]
fn replay_is_fifo_with_eviction() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut buf = ReplayBuffer::new(5);
    for i in 0..12 {
        buf.push(transition(&mut rng, i as f64));
    }
    assert_eq!(buf.len(), 5);
    let tags: Vec<f64> = buf.iter().map(|t| t.reward).collect();
    assert_eq!(tags, vec![7.0, 8.0, 9.0, 10.0, 11.0]);
    let sample = buf.sample(1000, &mut rng);
    assert_eq!(sample.len(), 1000);
    assert!(sample.iter().all(|t| t.reward >= 7.0));
    assert!(ReplayBuffer::new(3).sample(4, &mut rng).is_empty());
}

#[test]
fn frozen_heads_do_not_move() {
    let mut a = agent(8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<Transition> = (0..64).map(|i| transition(&mut rng, (i % 5) as f64 * 0.1)).collect();
    let batch: Vec<&Transition> = data.iter().collect();
    a.set_frozen(FrozenHeads {
        mu: false,
        value: true,
        curvature: true,
    });
    let (v0, l0, m0) = (
        a.value_net().params().checksum(),
        a.curvature_net().params().checksum(),
        a.mu_net().params().checksum(),
    );
    for _ in 0..20 {
        a.update(&batch).unwrap();
    }
    assert_eq!(a.value_net().params().checksum(), v0);
    assert_eq!(a.curvature_net().params().checksum(), l0);
    assert_ne!(a.mu_net().params().checksum(), m0);
}

#[test]
fn target_tracks_value_by_soft_blend() {
    let mut a = agent(10);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let data: Vec<Transition> = (0..16).map(|_| transition(&mut rng, 1.0)).collect();
    let batch: Vec<&Transition> = data.iter().collect();
    let old_target = a.target_value_net().params().values().to_vec();
    a.update(&batch).unwrap();
    let online = a.value_net().params().values();
    let rate = a.config().target_rate;
    for ((t, o), n) in old_target
        .iter()
        .zip(online)
        .zip(a.target_value_net().params().values())
    {
        assert!((n - (rate * o + (1.0 - rate) * t)).abs() < 1e-15);
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let mut a = agent(12);
    a.set_frozen(FrozenHeads {
        mu: false,
        value: true,
        curvature: false,
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.ckpt");
    a.save(&path).unwrap();
    let b = NafAgent::load(&path, Some(8)).unwrap();
    assert_eq!(b.frozen(), a.frozen());
    assert_eq!(b.config(), a.config());
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let s = obs(&mut rng);
        assert_eq!(a.heads(&s).unwrap(), b.heads(&s).unwrap());
    }
    assert!(NafAgent::load(&path, Some(9)).is_err());
    std::fs::write(&path, b"nope").unwrap();
    assert!(NafAgent::load(&path, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn advantage_is_nonpositive_and_bounded(seed in 0u64..50, s in proptest::collection::vec(0.0f64..1.0, 8), act in 0.0f64..=1.0) {
        let a = agent(seed);
        let h = a.heads(&s).unwrap();
        prop_assert!(h.mu > 0.0 && h.mu < 1.0);
        prop_assert!(h.curvature > 0.0 && h.curvature < 1.0);
        let adv = a.advantage(&s, act).unwrap();
        prop_assert!(adv <= 0.0 && adv >= -0.5);
    }

    #[test]
    fn td_target_without_bootstrap_on_terminal(r in -10.0f64..10.0) {
        let a = agent(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = transition(&mut rng, r);
        t.terminal = true;
        prop_assert_eq!(a.td_target(&t).unwrap(), r);
        t.terminal = false;
        let expect = r + a.config().discount * a.target_value_net().forward(&t.next_observation).unwrap()[0];
        prop_assert!((a.td_target(&t).unwrap() - expect).abs() < 1e-12);
    }
}
