use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mogan_core::mogan::{DiscGradients, DiscriminatorNet, GeneratorNet};
use mogan_core::par::{chunked_reduce, chunked_reduce_seq, map_range_seq};
use mogan_core::rng::seeded;
use rand::Rng;

const WIDTH: usize = 256;

fn batch(n: usize, width: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded(1);
    (0..n).map(|_| (0..width).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

fn disc_step(c: &mut Criterion) {
    let d = DiscriminatorNet::mlp(WIDTH, 4, &[128, 64], &mut seeded(2)).unwrap();
    let mut g = c.benchmark_group("disc_forward_backward");
    for n in [32, 128] {
        let xs = batch(n, WIDTH);
        let fold = |acc: &mut (DiscGradients, f64), i: usize| {
            acc.1 += d.cross_entropy_grad(&xs[i], i % 5, &mut acc.0).unwrap();
        };
        let merge = |a: &mut (DiscGradients, f64), b: (DiscGradients, f64)| {
            a.0.add_assign(&b.0);
            a.1 += b.1;
        };
        let init = || (DiscGradients::zeros_like(&d), 0.0);
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| black_box(chunked_reduce_seq(n, init, fold, merge)))
        });
        g.bench_with_input(BenchmarkId::new("chunked_reduce", n), &n, |b, &n| {
            b.iter(|| black_box(chunked_reduce(n, init, fold, merge)))
        });
    }
    g.finish();
}

fn generate(c: &mut Criterion) {
    let gen = GeneratorNet::mlp(128, 4, WIDTH, &[128, 256, 256, 256], &mut seeded(3)).unwrap();
    let zs = batch(64, 128);
    let mut g = c.benchmark_group("generate_64");
    g.bench_function("map_range_seq", |b| {
        b.iter(|| black_box(map_range_seq(zs.len(), |i| gen.generate(&zs[i], 1 + i % 3).unwrap())))
    });
    #[cfg(feature = "parallel")]
    g.bench_function("map_range_par", |b| {
        b.iter(|| {
            black_box(mogan_core::par::map_range_par(zs.len(), |i| gen.generate(&zs[i], 1 + i % 3).unwrap()))
        })
    });
    g.finish();
}

criterion_group!(benches, disc_step, generate);
criterion_main!(benches);
