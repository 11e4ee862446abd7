use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varexplore::harness::{run_experiment, ExperimentSpec};
use varexplore::par::Execution;
use varexplore::varcore::{sigma_oracle, ReturnSequence};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn oracle_batch(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let seqs: Vec<ReturnSequence> = (0..256)
        .map(|_| {
            ReturnSequence::new(
                (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect(),
                0.05,
            )
            .unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("sigma_oracle_batch");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                exec.map(seqs.iter().collect(), |s| {
                    sigma_oracle(black_box(s)).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn seeded_runs(c: &mut Criterion) {
    let spec = ExperimentSpec::parse(
        "agent = tabular-ve-combined\nseeds = 0..8\nbudget = 200\neval_every = 100\neval_episodes = 5\n".as_bytes(),
    )
    .unwrap();
    let mut group = c.benchmark_group("cartpole_seeds");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_experiment(black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle_batch, seeded_runs);
criterion_main!(benches);
