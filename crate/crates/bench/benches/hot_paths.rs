use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vidrate_core::naf::{NafAgent, NafConfig, ReplayBuffer, Transition};
use vidrate_core::nn::{Mlp, OutputActivation, DEFAULT_HIDDEN};
use vidrate_core::{Env, EnvConfig};

fn env_step(c: &mut Criterion) {
    let env = Env::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut state = env.reset(&mut rng);
    let action = env.action(6.0).unwrap();
    c.bench_function("env_step", |b| {
        b.iter(|| {
            let out = env.step(&state, action, &mut rng).unwrap();
            state = out.next_state;
            black_box(out.reward.weighted_total)
        })
    });
}

fn mlp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut dims = vec![8];
    dims.extend_from_slice(&DEFAULT_HIDDEN);
    dims.push(1);
    let net = Mlp::new(&dims, OutputActivation::Sigmoid, &mut rng).unwrap();
    let x = vec![0.3; 8];
    c.bench_function("mlp_forward", |b| {
        b.iter(|| black_box(net.forward(black_box(&x)).unwrap()))
    });
    c.bench_function("mlp_backward", |b| {
        b.iter(|| black_box(net.backward(black_box(&x), &[1.0]).unwrap()))
    });
}

fn naf_update(c: &mut Criterion) {
    let env = Env::new(EnvConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agent = NafAgent::new(env.observation_dim(), NafConfig::default(), &mut rng).unwrap();
    let mut replay = ReplayBuffer::new(4096);
    let mut state = env.reset(&mut rng);
    for i in 0..1024 {
        let bitrate = 2.0 + (i % 9) as f64;
        let out = env.step(&state, env.action(bitrate).unwrap(), &mut rng).unwrap();
        replay.push(Transition {
            observation: env.encode_observation(&state),
            action_unit: (bitrate - 2.0) / 8.0,
            reward_components: out.reward.clone(),
            reward: 0.05 * out.reward.weighted_total,
            next_observation: env.encode_observation(&out.next_state),
            terminal: false,
            origin: None,
        });
        state = out.next_state;
    }
    c.bench_function("naf_update_batch64", |b| {
        b.iter(|| {
            let batch = replay.sample(64, &mut rng);
            black_box(agent.update(&batch).unwrap())
        })
    });
}

criterion_group!(benches, env_step, mlp, naf_update);
criterion_main!(benches);
