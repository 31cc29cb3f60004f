//! Throughput comparison of the data-parallel fan-outs against a
//! single-thread baseline.
//!
//! With the default `parallel` feature the workloads run on rayon's global
//! pool; the `*_single_thread` variants install a 1-worker pool around the
//! same call, which is the sequential execution order. Building with
//! `--no-default-features` makes both variants run the plain-iterator
//! fallback, which is useful to check the fallback has no overhead.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use psr_core::learners::{edec_saddle, ClassContext, SaddleConfig};
use psr_core::oracles::{eluder_l2_check, random_eluder_instance};
use psr_core::psr::{brep_decodable, brep_revealing, LeftInverseMode};
use psr_core::rng::rng_for;
use psr_core::stability::certify_stability;
use psr_core::{fixtures, Caps};

fn run_certify() -> f64 {
    let caps = Caps::default();
    let m = fixtures::fix_dec2();
    let dec = fixtures::fix_dec2_decoder();
    let b = brep_decodable(&m, &dec, 2, &caps).expect("fixture brep");
    certify_stability(&b, 256, 7).lambda_hi
}

fn run_lmdp_certify() -> f64 {
    let caps = Caps::default();
    let m = fixtures::fix_lmdp();
    let b = brep_revealing(&m, 2, LeftInverseMode::PseudoInverse, &caps).expect("fixture brep");
    certify_stability(&b, 64, 11).lambda_hi
}

fn run_eluder_suite() -> f64 {
    let mut worst = f64::INFINITY;
    for seed in 0..64u64 {
        let mut rng = rng_for(seed, &[0xBE]);
        let inst = random_eluder_instance(4, 20, 3, 2, 3, &mut rng);
        worst = worst.min(eluder_l2_check(&inst, 1.0).slack);
    }
    worst
}

fn run_saddle_sweep(ctx: &ClassContext) -> f64 {
    let mu = vec![1.0 / ctx.n_models() as f64; ctx.n_models()];
    let mut total = 0.0;
    for gamma in [5.0, 20.0, 80.0] {
        total += edec_saddle(ctx, &mu, gamma, &SaddleConfig::default(), None).value;
    }
    total
}

#[cfg(feature = "parallel")]
fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("pool builds")
}

fn bench_certify(c: &mut Criterion) {
    let mut g = c.benchmark_group("certify_stability");
    g.bench_function("default_pool", |b| b.iter(|| black_box(run_certify())));
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        g.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| black_box(run_certify())))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("certify_lmdp_revealing");
    g.bench_function("default_pool", |b| b.iter(|| black_box(run_lmdp_certify())));
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        g.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| black_box(run_lmdp_certify())))
        });
    }
    g.finish();
}

fn bench_eluder(c: &mut Criterion) {
    let mut g = c.benchmark_group("eluder_suite_64");
    g.bench_function("default_pool", |b| b.iter(|| black_box(run_eluder_suite())));
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        g.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| black_box(run_eluder_suite())))
        });
    }
    g.finish();
}

fn bench_saddle(c: &mut Criterion) {
    let caps = Caps::default();
    let class = fixtures::noisy_class(&caps).expect("class");
    let ctx = ClassContext::new(class, caps).expect("context");
    let mut g = c.benchmark_group("edec_saddle_sweep");
    g.sample_size(20);
    g.bench_function("default_pool", |b| b.iter(|| black_box(run_saddle_sweep(&ctx))));
    #[cfg(feature = "parallel")]
    {
        let pool = single_thread_pool();
        g.bench_function("single_thread", |b| {
            b.iter(|| pool.install(|| black_box(run_saddle_sweep(&ctx))))
        });
    }
    g.finish();
}

criterion_group!(benches, bench_certify, bench_eluder, bench_saddle);
criterion_main!(benches);
