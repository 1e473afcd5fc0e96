use std::f64::consts::FRAC_PI_2;

use proptest::prelude::*;
use vrbqn_core::analysis::{
    activation_diff, classify_neurons, generate_calibration_states, neuron_trace, prune_to_active,
    pruning_bound,
};
use vrbqn_core::env::{make_env, EnvConfig, Environment, PixelEnv, ScenarioKind};
use vrbqn_core::trainer::{train, TrainConfig};
use vrbqn_core::{sample_layer, Frame, LayerSpec, RbfLayer, RbfNeuron, State};

fn spec() -> LayerSpec {
    LayerSpec {
        neurons: 48,
        width: 16,
        height: 16,
        ..LayerSpec::desk()
    }
}

fn env_cfg(kind: ScenarioKind) -> EnvConfig {
    EnvConfig {
        width: 16,
        height: 16,
        ..EnvConfig::desk(kind)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn enlarging_the_state_set_never_deactivates(seed in 0u64..1000, split in 1usize..30) {
        let layer = sample_layer(seed, &spec()).unwrap();
        let mut env = make_env(&env_cfg(ScenarioKind::Gather)).unwrap();
        let states = generate_calibration_states(env.as_mut(), 30, seed).unwrap();
        let small = classify_neurons(&layer, &states[..split], 0.01).unwrap();
        let big = classify_neurons(&layer, &states, 0.01).unwrap();
        for i in &small.active {
            prop_assert!(big.active.contains(i));
        }
        prop_assert_eq!(classify_neurons(&layer, &states, 0.01).unwrap(), big);
    }
}

#[test]
fn pruned_network_stays_within_bound() {
    let layer = sample_layer(1, &spec()).unwrap();
    let cfg = env_cfg(ScenarioKind::Shooter);
    let mut env = make_env(&cfg).unwrap();
    let tc = TrainConfig {
        total_steps: 1500,
        batch_size: 32,
        ..TrainConfig::vrbqn()
    };
    let head = train(env.as_mut(), &layer, &tc, 2).unwrap().head;
    let states = generate_calibration_states(env.as_mut(), 200, 5).unwrap();
    let c = classify_neurons(&layer, &states, 0.01).unwrap();
    assert!(!c.active.is_empty());
    let (pl, ph) = prune_to_active(&layer, &head, &c).unwrap();
    let bound = pruning_bound(&layer, &head, &c).unwrap();
    for s in &states {
        let full = head.q_values(&layer.activate_state(s).unwrap()).unwrap();
        let pruned = ph.q_values(&pl.activate_state(s).unwrap()).unwrap();
        for a in 0..full.len() {
            assert!((full[a] - pruned[a]).abs() <= bound[a] + 1e-12);
        }
    }
}

#[test]
fn changed_region_attracts_changed_neurons() {
    let layer = sample_layer(
        3,
        &LayerSpec {
            neurons: 200,
            ..spec()
        },
    )
    .unwrap();
    let base = Frame::filled(16, 16, 1, 0.5).unwrap();
    let mut patched = base.clone();
    // 4x4 patch in the upper-left quadrant, centroid at (3, 3) pixels.
    for y in 1..5 {
        for x in 1..5 {
            patched.set(x, y, 0, 1.0);
        }
    }
    let s = State::repeated(base, 2).unwrap();
    let s2 = State::repeated(patched, 2).unwrap();
    let c = classify_neurons(&layer, &[s.clone(), s2.clone()], 0.01).unwrap();
    let d = activation_diff(&layer, &s, &s2, &c).unwrap();
    let centroid = (3.0 / 16.0, 3.0 / 16.0);
    let dist = |i: usize| {
        let (x, y) = d.centers[i];
        (x - centroid.0).hypot(y - centroid.1)
    };
    let (mut moved, mut still) = (Vec::new(), Vec::new());
    for i in 0..layer.len() {
        if d.delta[i] > 0.01 {
            moved.push(dist(i));
        } else {
            still.push(dist(i));
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(!moved.is_empty() && !still.is_empty());
    assert!(
        mean(&moved) < mean(&still),
        "{} vs {}",
        mean(&moved),
        mean(&still)
    );
}

#[test]
fn wall_neuron_drops_when_target_covers_it() {
    let cfg = EnvConfig::desk(ScenarioKind::Shooter);
    let mut env = PixelEnv::shooter(cfg.clone()).unwrap();
    env.reset(0).unwrap();
    let mut s = env.sim().state().clone();
    s.agent_x = s.target_x;
    s.agent_heading = FRAC_PI_2;
    env.sim_mut().set_state(s.clone());
    let aligned = env.render();
    // Small receptive field on the screen centre, tuned to the wall shade there.
    let (cx, cy) = (16usize, 18usize);
    let wall_shade = {
        let mut turned = s.clone();
        turned.agent_heading = FRAC_PI_2 + 0.6;
        env.sim_mut().set_state(turned);
        env.render().get(cx, cy, 0)
    };
    let neuron = RbfNeuron {
        mu_x: cx as f64 / 32.0,
        mu_y: cy as f64 / 32.0,
        sigma_x: 0.02,
        sigma_y: 0.02,
        mu_z: vec![wall_shade],
        sigma_z: vec![0.1],
    };
    let layer = RbfLayer::from_neurons(vec![neuron], 32, 32, 1, 0).unwrap();
    let on_target = layer.activate_one(0, &aligned).unwrap();
    assert!(aligned.get(cx, cy, 0) < 0.1);
    assert!(on_target < 0.01);
    // Along a random trace, a flag means the centre pixel is far from the wall shade.
    let mut env = make_env(&cfg).unwrap();
    let trace = neuron_trace(&layer, env.as_mut(), 300, 0, 0.01, 4).unwrap();
    assert_eq!(trace.records.len(), 300);
    for r in &trace.records {
        assert_eq!(r.flagged, r.activation < 0.01);
    }
    assert!(trace.flagged() > 0);
}

#[test]
fn calibration_uses_zero_to_twelve_tick_repeats() {
    let mut env = make_env(&env_cfg(ScenarioKind::Shooter)).unwrap();
    let states = generate_calibration_states(env.as_mut(), 100, 8).unwrap();
    // Zero-tick repeats re-render the same frame.
    assert!(states.iter().any(|s| s.frames()[0] == s.frames()[1]));
}
