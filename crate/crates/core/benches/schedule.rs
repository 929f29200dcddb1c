use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ringsim::oracle::{oracle_causal_attention_with, OracleOptions};
use ringsim::sim::{account_schedule, random_inputs, simulate, Algo, Executor, SimConfig};

fn bench_executors(c: &mut Criterion) {
    let mut group = c.benchmark_group("schedule");
    group.sample_size(10);
    for algo in [Algo::Ring, Algo::Striped] {
        let base = SimConfig::new(algo, 4, 1024, 32).with_tiles(64, 64).with_seed(1);
        let variants = [
            ("threaded+rayon", Executor::Threaded, true),
            ("threaded", Executor::Threaded, false),
            ("sequential+rayon", Executor::Sequential, true),
            ("sequential", Executor::Sequential, false),
        ];
        for (label, executor, data_parallel) in variants {
            let cfg = SimConfig { executor, data_parallel, ..base.clone() };
            group.bench_with_input(BenchmarkId::new(algo.to_string(), label), &cfg, |b, cfg| {
                b.iter(|| simulate(cfg).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    let cfg = SimConfig::new(Algo::Ring, 2, 1024, 32);
    let [q, k, v] = random_inputs(&cfg).unwrap();
    for parallel in [true, false] {
        let opts = OracleOptions { scaled: false, parallel };
        let label = if parallel { "rayon" } else { "sequential" };
        group.bench_function(label, |b| b.iter(|| oracle_causal_attention_with(&q, &k, &v, &opts).unwrap()));
    }
    group.finish();
}

fn bench_accounting(c: &mut Criterion) {
    let mut group = c.benchmark_group("accounting");
    for data_parallel in [true, false] {
        let mut cfg = SimConfig::new(Algo::Striped, 8, 8 * 4096, 1).with_tiles(1, 1);
        cfg.data_parallel = data_parallel;
        let label = if data_parallel { "rayon" } else { "sequential" };
        group.bench_function(label, |b| b.iter(|| account_schedule(&cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, bench_executors, bench_oracle, bench_accounting);
criterion_main!(benches);
