use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use vidrate_core::env::{
    cache_miss_cost, chunks_for, freeze_cost, packet_loss_cost, playback_quality, qoe_reward, sample_request,
    zipf_distribution, zipf_pmf, Exogenous, RateAction,
};
use vidrate_core::{Env, EnvConfig, SystemState};

/// What one slot should produce, computed chunk by chunk.
#[derive(Debug)]
struct Expected {
    offered: usize,
    accepted: usize,
    consumed: usize,
    components: [f64; 4],
    buffer: Vec<f64>,
}

fn reference_slot(env: &Env, state: &SystemState, bitrate: f64) -> Expected {
    let cfg = env.config();
    let dt = cfg.chunk_length;
    let offered = if bitrate > 0.0 {
        (state.capacity / bitrate + 1e-9).floor() as usize
    } else {
        0
    };
    let mut queue: Vec<f64> = state.buffer.iter().copied().filter(|&b| b > 0.0).collect();
    let start_len = queue.len();
    let start_fill: f64 = queue.iter().map(|b| b * dt).sum();
    let mut fill = start_fill;
    let mut accepted = 0;
    while accepted < offered && queue.len() < cfg.buffer_slots && fill + bitrate * dt <= cfg.buffer_capacity + 1e-9 {
        queue.push(bitrate);
        fill += bitrate * dt;
        accepted += 1;
    }
    let overflow = offered as f64 * bitrate * dt + start_fill > cfg.buffer_capacity;
    let loss = if overflow {
        (offered - accepted) as f64 * dt
    } else {
        0.0
    };
    let hit = env.is_cached(state.request);
    let size = env.content_sizes()[state.request - 1];
    let delay = if hit { 0.0 } else { size / cfg.backhaul_rate };
    let freeze = (cfg.slot_length - delay - start_len as f64 * dt - accepted as f64 * dt).max(0.0);
    let miss = if hit { 0.0 } else { size * cfg.cost_per_megabit };
    let plays = (cfg.slot_length / dt + 1e-9).floor() as usize;
    let consumed = plays.min(queue.len());
    let quality: f64 = queue[..consumed].iter().sum();
    let mut buffer = queue[consumed..].to_vec();
    buffer.resize(cfg.buffer_slots, 0.0);
    Expected {
        offered,
        accepted,
        consumed,
        components: [-miss, quality, -loss, -freeze],
        buffer,
    }
}

fn random_state(env: &Env, rng: &mut impl Rng) -> SystemState {
    let cfg = env.config();
    let occupied = rng.random_range(0..=cfg.buffer_slots);
    let mut buffer = vec![0.0; cfg.buffer_slots];
    let mut fill = 0.0;
    for slot in buffer.iter_mut().take(occupied) {
        let b = rng.random_range(cfg.rate_min..=cfg.rate_max);
        if fill + b * cfg.chunk_length > cfg.buffer_capacity {
            break;
        }
        fill += b * cfg.chunk_length;
        *slot = b;
    }
    SystemState {
        capacity: rng.random_range(cfg.capacity_min..=cfg.capacity_max),
        request: rng.random_range(1..=cfg.num_contents),
        buffer,
        bs_index: rng.random_range(1..=cfg.num_base_stations),
        sojourn_remaining: rng.random_range(0.5..200.0),
    }
}

fn random_bitrate(env: &Env, rng: &mut impl Rng) -> f64 {
    let cfg = env.config();
    if rng.random_bool(0.1) {
        0.0
    } else {
        rng.random_range(cfg.rate_min..=cfg.rate_max)
    }
}

fn exo_of(state: &SystemState) -> Exogenous {
    Exogenous {
        capacity: state.capacity,
        request: state.request,
        bs_index: state.bs_index,
        sojourn_remaining: state.sojourn_remaining,
    }
}

#[test]
fn formula_examples() {
    assert!((zipf_pmf(1, 1.0, 3).unwrap() - 6.0 / 11.0).abs() < 1e-15);
    assert_eq!(zipf_pmf(2, 0.0, 4).unwrap(), 0.25);
    let brute: f64 = (1..=100).map(|i| (i as f64).powf(-0.8)).sum();
    assert!((zipf_pmf(1, 0.8, 100).unwrap() - 1.0 / brute).abs() < 1e-14);
    assert!(zipf_pmf(0, 0.8, 10).is_err() && zipf_pmf(11, 0.8, 10).is_err());

    assert_eq!(chunks_for(10.0, 2.0), 5);
    assert_eq!(chunks_for(10.0, 3.0), 3);
    assert_eq!(chunks_for(2.0, 10.0), 0);
    assert_eq!(chunks_for(10.0, 0.0), 0);

    assert_eq!(cache_miss_cost(1, &[true], &[50.0], 0.1).unwrap(), 0.0);
    assert!((cache_miss_cost(1, &[false], &[50.0], 0.1).unwrap() - 5.0).abs() < 1e-12);
    let small = cache_miss_cost(1, &[false, false], &[30.0, 60.0], 0.1).unwrap();
    assert!(small < cache_miss_cost(2, &[false, false], &[30.0, 60.0], 0.1).unwrap());
    assert!(cache_miss_cost(3, &[false, false], &[30.0, 60.0], 0.1).is_err());

    assert_eq!(playback_quality(&[]), 0.0);
    assert_eq!(playback_quality(&[4.0, 4.0, 6.0]), 14.0);
    assert_eq!(playback_quality(&[3.5; 7]), 24.5);

    assert_eq!(packet_loss_cost(20.0, 100.0, 180.0, 10.0, 1, 1), 0.0);
    assert_eq!(packet_loss_cost(100.0, 150.0, 180.0, 10.0, 3, 5), 20.0);
    assert_eq!(packet_loss_cost(40.0, 180.0, 180.0, 10.0, 0, 4), 40.0);

    assert_eq!(freeze_cost(10.0, true, 0.0, 3.0, 1, 10.0), 0.0);
    assert_eq!(freeze_cost(10.0, false, 4.0, 0.0, 0, 10.0), 6.0);
    assert_eq!(freeze_cost(0.0, false, 4.0, 0.0, 0, 10.0), 0.0);

    assert_eq!(qoe_reward([-5.0, 20.0, 0.0, -3.0], [1.0; 4]), 12.0);
    assert_eq!(qoe_reward([-5.0, 20.0, 0.0, -3.0], [0.0; 4]), 0.0);
    let c = [-1.25, 7.0, -10.0, -2.5];
    let w = [0.3, 1.1, 0.7, 2.0];
    assert_eq!(qoe_reward(c, w.map(|x| 2.0 * x)), 2.0 * qoe_reward(c, w));
}

fn small_world() -> Env {
    Env::new(EnvConfig {
        num_contents: 4,
        cache_set: vec![1, 2],
        content_sizes: Some(vec![30.0, 40.0, 50.0, 60.0]),
        num_base_stations: 3,
        ..EnvConfig::default()
    })
    .unwrap()
}

fn state_with(env: &Env, capacity: f64, request: usize, buffer: &[f64]) -> SystemState {
    let mut b = buffer.to_vec();
    b.resize(env.config().buffer_slots, 0.0);
    SystemState {
        capacity,
        request,
        buffer: b,
        bs_index: 1,
        sojourn_remaining: 100.0,
    }
}

#[test]
fn hand_simulated_slots() {
    let env = small_world();
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Idle on an empty buffer: nothing to play for the whole slot.
    let s = state_with(&env, 10.0, 1, &[]);
    let out = env.step(&s, RateAction::IDLE, &mut rng).unwrap();
    assert_eq!((out.reward.quality, out.reward.loss), (0.0, 0.0));
    assert_eq!(out.reward.freeze, -10.0);
    assert_eq!(out.delivered_chunks, 0);

    // Five chunks offered and accepted, one played.
    let s = state_with(&env, 10.0, 1, &[]);
    let out = env.step(&s, env.action(2.0).unwrap(), &mut rng).unwrap();
    assert_eq!(
        (out.offered_chunks, out.delivered_chunks, out.consumed_chunks),
        (5, 5, 1)
    );
    assert_eq!(out.reward.quality, 2.0);
    assert_eq!((out.reward.loss, out.reward.freeze), (0.0, 0.0));
    assert_eq!(out.next_state.occupied(), 4);

    // Full buffer: every offered chunk is dropped.
    let full = state_with(&env, 10.0, 1, &[2.0; 9]);
    assert_eq!(full.buffer_fill(10.0), 180.0);
    let out = env.step(&full, env.action(2.0).unwrap(), &mut rng).unwrap();
    assert_eq!(out.delivered_chunks, 0);
    assert_eq!(out.reward.loss, -50.0);
    assert!(out.reward.loss < 0.0);
}

#[test]
fn step_matches_reference_on_random_states() {
    for cfg in [
        EnvConfig::default(),
        EnvConfig {
            buffer_capacity: 60.0,
            buffer_slots: 3,
            capacity_min: 4.0,
            capacity_max: 8.0,
            ..EnvConfig::default()
        },
        EnvConfig {
            slot_length: 20.0,
            chunk_length: 5.0,
            buffer_slots: 40,
            ..EnvConfig::default()
        },
    ] {
        let env = Env::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5_000 {
            let state = random_state(&env, &mut rng);
            let b = random_bitrate(&env, &mut rng);
            let want = reference_slot(&env, &state, b);
            let next = random_state(&env, &mut rng);
            let out = env.transition(&state, env.action(b).unwrap(), &exo_of(&next)).unwrap();
            assert_eq!(out.offered_chunks, want.offered);
            assert_eq!(out.delivered_chunks, want.accepted);
            assert_eq!(out.consumed_chunks, want.consumed);
            let got = out.reward.components();
            for i in 0..4 {
                assert!(
                    (got[i] - want.components[i]).abs() < 1e-9,
                    "{state:?} b={b}: {got:?} vs {want:?}"
                );
            }
            assert_eq!(out.next_state.buffer, want.buffer);
            assert_eq!(out.next_state.capacity, next.capacity);
            assert_eq!(out.next_state.request, next.request);
        }
    }
}

#[test]
fn long_random_walk_keeps_buffer_invariants() {
    let env = Env::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut state = env.reset(&mut rng);
    let cfg = env.config().clone();
    for _ in 0..100_000 {
        let b = random_bitrate(&env, &mut rng);
        let out = env.step(&state, env.action(b).unwrap(), &mut rng).unwrap();
        let buf = &out.next_state.buffer;
        let occ = out.next_state.occupied();
        assert!(buf[occ..].iter().all(|&x| x == 0.0), "FIFO broken: {buf:?}");
        assert!(out.next_state.buffer_fill(cfg.chunk_length) <= cfg.buffer_capacity + 1e-9);
        let r = out.reward;
        assert!((qoe_reward(r.components(), cfg.weights) - r.weighted_total).abs() < 1e-12);
        assert!(out.delivered_chunks <= out.offered_chunks);
        state = out.next_state;
    }
}

#[test]
fn zipf_sampler_chi_square() {
    let pmf = zipf_distribution(0.8, 100).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 1_000_000;
    let mut counts = vec![0u64; 100];
    for _ in 0..draws {
        counts[sample_request(&mut rng, &pmf) - 1] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&pmf)
        .map(|(&c, &p)| {
            let e = p * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let p_value = 1.0 - ChiSquared::new(99.0).unwrap().cdf(stat);
    assert!(p_value > 0.01, "chi-square {stat}, p = {p_value}");
}

#[test]
fn sampler_degenerate_and_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!((0..1000).all(|_| sample_request(&mut rng, &[1.0, 0.0, 0.0]) == 1));
    let mut counts = [0usize; 4];
    for _ in 0..1_000_000 {
        counts[sample_request(&mut rng, &[0.25; 4]) - 1] += 1;
    }
    for c in counts {
        assert!((c as f64 / 1e6 - 0.25).abs() < 0.005);
    }
}

#[test]
fn reset_contract() {
    let env = Env::new(EnvConfig::default()).unwrap();
    let a = env.reset(&mut ChaCha8Rng::seed_from_u64(8));
    let b = env.reset(&mut ChaCha8Rng::seed_from_u64(8));
    assert_eq!(a, b);
    assert!(a.buffer.iter().all(|&x| x == 0.0));
    assert_eq!(a.bs_index, 1);
    assert!(a.capacity >= 2.0 && a.capacity <= 80.0);

    let bad = EnvConfig {
        rate_min: 12.0,
        discount: 1.5,
        cache_set: vec![500],
        ..EnvConfig::default()
    };
    let msg = Env::new(bad).unwrap_err().to_string();
    assert!(
        msg.contains("rate") && msg.contains("discount") && msg.contains("cache"),
        "{msg}"
    );
}

#[test]
fn observation_examples() {
    let env = small_world();
    let empty = state_with(&env, 40.0, 2, &[]);
    let obs = env.encode_observation(&empty);
    assert_eq!(obs.len(), env.observation_dim());
    assert!(obs[3..].iter().all(|&x| x == 0.0));

    let max_slots = (180.0 / (10.0 * 10.0)) as usize;
    let at_max = state_with(&env, 40.0, 2, &vec![10.0; max_slots]);
    let obs = env.encode_observation(&at_max);
    assert!(obs[5..5 + max_slots].iter().all(|&x| x == 1.0));

    let other = SystemState {
        capacity: 20.0,
        ..empty.clone()
    };
    let (x, y) = (env.encode_observation(&empty), env.encode_observation(&other));
    let differ: Vec<usize> = (0..x.len()).filter(|&i| x[i] != y[i]).collect();
    assert_eq!(differ, vec![0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn chunks_monotone(c in 0.1f64..100.0, b in 0.5f64..20.0, dc in 0.0f64..50.0, db in 0.0f64..10.0) {
        prop_assert!(chunks_for(c, b + db) <= chunks_for(c, b));
        prop_assert!(chunks_for(c + dc, b) >= chunks_for(c, b));
    }

    #[test]
    fn zipf_sums_to_one(z in 0.0f64..3.0, n in 1usize..10_000) {
        let total: f64 = zipf_distribution(z, n).unwrap().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_is_pure_given_seed(seed in any::<u64>(), b in prop_oneof![Just(0.0), 2.0f64..10.0]) {
        let env = small_world();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&env, &mut rng);
        let a = env.step(&state, env.action(b).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        let c = env.step(&state, env.action(b).unwrap(), &mut ChaCha8Rng::seed_from_u64(seed ^ 1)).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn step_invariants(seed in any::<u64>(), b in prop_oneof![Just(0.0), 2.0f64..10.0]) {
        let env = small_world();
        let cfg = env.config().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(&env, &mut rng);
        let out = env.step(&state, env.action(b).unwrap(), &mut rng).unwrap();
        prop_assert!(out.next_state.buffer_fill(cfg.chunk_length) <= cfg.buffer_capacity + 1e-9);
        let r = out.reward;
        prop_assert!((qoe_reward(r.components(), cfg.weights) - r.weighted_total).abs() < 1e-12);
        prop_assert!(r.cache_miss <= 0.0 && r.quality >= 0.0 && r.loss <= 0.0 && r.freeze <= 0.0);
        if b == 0.0 {
            prop_assert_eq!(out.delivered_chunks, 0);
        }
        // A slot that took every offered chunk and kept data buffered cannot both drop and stall.
        if out.delivered_chunks == out.offered_chunks && out.next_state.occupied() > 0 {
            prop_assert!(!(r.loss < 0.0 && r.freeze < 0.0));
        }
        let obs = env.encode_observation(&out.next_state);
        prop_assert!(obs.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}
