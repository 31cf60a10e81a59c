use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use qpp_rng::entropy::EntropyReport;
use qpp_rng::sorting::{run_sorting_cycle, WorkArray};
use qpp_rng::{Generator, Mode, MonotonicClock, PrngState, ScriptedClock};
use qpp_rng_bench::{config, POINTS};

fn lcg(c: &mut Criterion) {
    let mut prng = PrngState::new(1);
    c.bench_function("lcg_next_int", |b| b.iter(|| black_box(prng.next_int(black_box(3)))));
}

fn sorting_cycle(c: &mut Criterion) {
    let mut group = c.benchmark_group("sorting_cycle");
    for len in [4usize, 5] {
        let start = WorkArray::rotated(len).unwrap();
        let mut prng = PrngState::new(1);
        let mut clock = ScriptedClock::stepping(0, 1);
        group.bench_with_input(BenchmarkId::from_parameter(len), &start, |b, start| {
            b.iter(|| run_sorting_cycle(start, 1, &mut prng, &mut clock).unwrap())
        });
    }
    group.finish();
}

fn generate_bytes(c: &mut Criterion) {
    const BYTES: usize = 4096;
    let mut group = c.benchmark_group("generate_bytes");
    group.throughput(Throughput::Bytes(BYTES as u64));
    group.sample_size(10);
    for mode in [Mode::Dqrng, Mode::Hybrid] {
        for (len, m) in POINTS {
            let id = BenchmarkId::new(mode.as_str(), format!("N{len}_m{m}"));
            group.bench_function(id, |b| {
                let mut gen = Generator::new(config(len, m, mode), MonotonicClock::new());
                let mut out = vec![0u8; BYTES];
                b.iter(|| gen.fill_bytes(&mut out).unwrap())
            });
        }
    }
    group.finish();
}

fn analyze(c: &mut Criterion) {
    let data = Generator::new(config(4, 4, Mode::Dqrng), MonotonicClock::new())
        .generate_bytes(1 << 16)
        .unwrap();
    let mut group = c.benchmark_group("analyze");
    group.throughput(Throughput::Bytes(data.len() as u64));
    group.bench_function("entropy_report", |b| {
        b.iter(|| EntropyReport::from_bytes(black_box(&data)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, lcg, sorting_cycle, generate_bytes, analyze);
criterion_main!(benches);
