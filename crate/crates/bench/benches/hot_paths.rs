use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use vrbqn_bench::{head_and_batch, layer_and_state};
use vrbqn_core::LayerSpec;

fn activation(c: &mut Criterion) {
    let mut group = c.benchmark_group("activate_state");
    group.sample_size(20);
    for (name, spec) in [
        ("32x32x256", LayerSpec::desk()),
        ("160x120x2001", LayerSpec::paper(1)),
    ] {
        let (layer, state) = layer_and_state(&spec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| layer.activate_state(black_box(&state)).unwrap())
        });
    }
    group.finish();
}

fn td_update(c: &mut Criterion) {
    let mut group = c.benchmark_group("td_update");
    for (actions, features) in [(8, 512), (3, 4002)] {
        let (head, batch) = head_and_batch(actions, features, 256);
        let id = format!("{actions}x{features}");
        group.bench_function(BenchmarkId::new("loss_and_gradient", &id), |b| {
            b.iter(|| {
                head.loss_and_gradient(black_box(&batch), &head, 0.99)
                    .unwrap()
            })
        });
        group.bench_function(BenchmarkId::new("train_step", &id), |b| {
            let mut live = head.clone();
            b.iter(|| {
                let target = live.clone();
                let (_, grad) = live.loss_and_gradient(&batch, &target, 0.99).unwrap();
                live.adam_step(&grad).unwrap();
            })
        });
    }
    group.finish();
}

criterion_group!(benches, activation, td_update);
criterion_main!(benches);
