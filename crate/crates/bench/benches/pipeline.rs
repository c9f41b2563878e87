use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmtl_bench::synthetic;
use mmtl_core::decoder::{beam_search, BeamConfig};
use mmtl_core::model::{Features, Model, Variant};
use mmtl_core::numerics::Tape;

fn sentence_loss(c: &mut Criterion) {
    let fx = synthetic();
    let mut group = c.benchmark_group("loss_and_backward");
    for v in [Variant::Baseline, Variant::DecInit, Variant::FusionConv] {
        let m = Model::<f32>::new(fx.model_config(v), 1).unwrap();
        let s = fx.train[0].view();
        group.bench_function(BenchmarkId::from_parameter(v), |b| {
            b.iter(|| {
                let mut t = Tape::new(m.params());
                let loss = m.loss_on_tape(&mut t, &s, None).unwrap();
                t.backward(loss).unwrap()
            })
        });
    }
    group.finish();
}

fn decoding(c: &mut Criterion) {
    let fx = synthetic();
    let m = Model::<f32>::new(fx.model_config(Variant::FusionConv), 1).unwrap();
    let s = &fx.test[0];
    let mut group = c.benchmark_group("beam_search");
    for beam in [1usize, 4, 12] {
        let cfg = BeamConfig { max_len: Some(12), ..BeamConfig::with_beam(beam) };
        group.bench_with_input(BenchmarkId::from_parameter(beam), &cfg, |b, cfg| {
            b.iter(|| beam_search(&[&m], &s.src_ids, Features::of(&s.view()), cfg).unwrap())
        });
    }
    let five = vec![&m; 5];
    let cfg = BeamConfig { max_len: Some(12), ..BeamConfig::with_beam(12) };
    group.bench_function("ensemble_of_5", |b| {
        b.iter(|| beam_search(&five, &s.src_ids, Features::of(&s.view()), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sentence_loss, decoding);
criterion_main!(benches);
