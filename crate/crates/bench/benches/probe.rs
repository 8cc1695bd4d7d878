use std::hint::black_box;
use std::io::Cursor;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use layerprobe::probe::batch_loss_and_grad;
use layerprobe::synth::PlantedBoundaries;
use layerprobe::{
    fixture_curves, parse_dump, segment, synth_generate, train_probe, LinearProbe,
    SegmentationParams, SynthConfig, TrainConfig,
};
use ndarray::Array2;

fn features(rows: usize, d: usize) -> (Array2<f32>, Vec<usize>) {
    let x = Array2::from_shape_fn((rows, d), |(i, j)| ((i * 31 + j * 17) % 97) as f32 / 97.0);
    let y = (0..rows).map(|i| i % 8).collect();
    (x, y)
}

fn bench_loss_and_grad(c: &mut Criterion) {
    let (x, y) = features(16, 4096);
    let probe = LinearProbe::zeros(1, 8, 4096);
    c.bench_function("batch_loss_and_grad 16x4096 N=8", |b| {
        b.iter(|| batch_loss_and_grad(black_box(&probe), x.view(), &y).unwrap())
    });
}

fn bench_train(c: &mut Criterion) {
    let (x, y) = features(480, 64);
    let cfg = TrainConfig {
        max_epochs: 20,
        ..TrainConfig::default()
    };
    c.bench_function("train_probe 480x64 N=8, 20 epochs", |b| {
        b.iter(|| train_probe(1, x.view(), black_box(&y), 8, &cfg).unwrap())
    });
}

fn bench_segment(c: &mut Criterion) {
    let curves = fixture_curves("llava15").unwrap();
    let params = SegmentationParams::default();
    c.bench_function("segment llava15 fixture", |b| {
        b.iter(|| segment(black_box(&curves), &params).unwrap())
    });
}

fn bench_dump(c: &mut Criterion) {
    let cfg = SynthConfig {
        num_layers: 4,
        planted: PlantedBoundaries {
            g_end: 1,
            r_start: 2,
            r_end: 3,
        },
        ..SynthConfig::default()
    };
    let bytes = synth_generate(&cfg).unwrap().to_bytes().unwrap();
    c.bench_function("parse_dump + read all blocks (L=4, d=64)", |b| {
        b.iter_batched(
            || bytes.clone(),
            |bytes| {
                let dump = parse_dump(Cursor::new(bytes)).unwrap();
                for c in 0..5 {
                    for l in 1..=4 {
                        black_box(dump.block(c, l).unwrap());
                    }
                }
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(
    benches,
    bench_loss_and_grad,
    bench_train,
    bench_segment,
    bench_dump
);
criterion_main!(benches);
