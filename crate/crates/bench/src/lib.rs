//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrbqn_core::env::{make_env, EnvConfig, ScenarioKind};
use vrbqn_core::{
    sample_layer, AdamConfig, FeatureVector, LayerSpec, QHead, RbfLayer, State, TdBatch,
};

/// A layer for `spec` and a rendered shooter state of matching geometry.
pub fn layer_and_state(spec: &LayerSpec) -> (RbfLayer, State) {
    let layer = sample_layer(7, spec).expect("valid spec");
    let env_config = EnvConfig {
        width: spec.width,
        height: spec.height,
        channels: spec.channels,
        ..EnvConfig::desk(ScenarioKind::Shooter)
    };
    let mut env = make_env(&env_config).expect("valid env");
    let state = env.reset(3).expect("reset");
    (layer, state)
}

fn features(rng: &mut ChaCha8Rng, n: usize) -> FeatureVector {
    FeatureVector::new((0..n).map(|_| rng.random::<f64>()).collect())
}

/// A head with small random weights and a random batch with a quarter terminal transitions.
pub fn head_and_batch(n_actions: usize, n_features: usize, batch: usize) -> (QHead, TdBatch) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut head = QHead::zeros(n_actions, n_features, AdamConfig::with_learning_rate(0.01))
        .expect("valid head");
    head.set_weights(
        (0..n_actions * n_features)
            .map(|_| rng.random_range(-0.1..0.1))
            .collect(),
    )
    .expect("weight count");
    let batch = TdBatch {
        features: (0..batch).map(|_| features(&mut rng, n_features)).collect(),
        actions: (0..batch).map(|_| rng.random_range(0..n_actions)).collect(),
        rewards: (0..batch).map(|_| rng.random_range(-1.0..1.0)).collect(),
        next_features: (0..batch).map(|_| features(&mut rng, n_features)).collect(),
        terminal: (0..batch).map(|i| i % 4 == 0).collect(),
    };
    (head, batch)
}
