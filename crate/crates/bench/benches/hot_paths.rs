use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use binn_bench::{dataset, prediction_set, synthetic};
use binn_core::binn::BinnParams;
use binn_core::features::{fit_pca_whitening, fit_znorm, DEFAULT_EPSILON};
use binn_core::metrics::{global_average_precision, mean_average_precision, perr};
use binn_core::train::raw_features;
use binn_core::{FeatureSet, LogRegParams};

fn gradients(c: &mut Criterion) {
    let ds = synthetic(2048);
    let data = dataset(&ds);
    let indices: Vec<usize> = (0..1024).collect();
    let batch = data.batch(&indices);
    let d = data.x.cols();

    let binn = BinnParams::init(&ds.hierarchy, d, 0);
    let mut grads = binn.zeros_like();
    c.bench_function("binn_batch_loss_grad_1024", |b| {
        b.iter(|| binn.batch_loss_grad(black_box(&batch), &mut grads).unwrap())
    });

    let logreg = LogRegParams::zeros(ds.hierarchy.entity_count(), d);
    let mut lr_grads = logreg.clone();
    c.bench_function("logreg_batch_loss_grad_1024", |b| {
        b.iter(|| logreg.batch_loss_grad(black_box(&batch), &mut lr_grads).unwrap())
    });

    let x = data.x.row(0).to_vec();
    c.bench_function("binn_forward_single", |b| {
        b.iter(|| binn.forward(black_box(&x)).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let ds = synthetic(2000);
    let p = prediction_set(&ds);
    c.bench_function("map_2000x200", |b| b.iter(|| mean_average_precision(black_box(&p)).unwrap()));
    c.bench_function("perr_2000x200", |b| b.iter(|| perr(black_box(&p)).unwrap()));
    c.bench_function("gap20_2000x200", |b| {
        b.iter(|| global_average_precision(black_box(&p), 20).unwrap())
    });
}

fn normalizers(c: &mut Criterion) {
    let ds = synthetic(5000);
    let raw = raw_features(&ds.train, FeatureSet::Rgb).unwrap();
    c.bench_function("fit_znorm_5000x64", |b| {
        b.iter(|| fit_znorm(black_box(&raw), DEFAULT_EPSILON).unwrap())
    });
    let mut group = c.benchmark_group("whitening");
    group.sample_size(20);
    group.bench_function("fit_pca_whitening_5000x64", |b| {
        b.iter_batched(|| raw.clone(), |r| fit_pca_whitening(&r, DEFAULT_EPSILON).unwrap(), BatchSize::LargeInput)
    });
    group.finish();
}

criterion_group!(benches, gradients, metrics, normalizers);
criterion_main!(benches);
