use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use fogsim::kernel::{Kernel, RngStream, SimTime};
use fogsim::placement::place;
use fogsim_bench::{prepared, Tick};

fn kernel_dispatch(c: &mut Criterion) {
    let mut group = c.benchmark_group("kernel");
    for n in [1_000u32, 100_000] {
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("schedule_and_drain", n), &n, |b, &n| {
            b.iter(|| {
                let mut rng = RngStream::named(1, "bench");
                let mut k = Kernel::new();
                for i in 0..n {
                    k.schedule(Tick(i), rng.next_unit() * 1000.0).unwrap();
                }
                let mut sum = 0u64;
                k.run_until(SimTime::new(f64::MAX).unwrap(), |_, e| {
                    sum += e.payload.0 as u64;
                    Ok::<_, std::convert::Infallible>(())
                })
                .unwrap();
                black_box(sum)
            })
        });
    }
    group.finish();
}

fn placement(c: &mut Criterion) {
    let mut group = c.benchmark_group("placement");
    for name in ["deadline_test", "cluster_demo", "healthcare"] {
        let p = prepared(name, 1, 1000.0);
        group.bench_function(name, |b| {
            b.iter(|| place(&p.policy, &p.application, &p.topology, &p.pins).unwrap())
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("run");
    group.sample_size(10);
    for (name, horizon) in [("healthcare", 10_000.0), ("deadline_test", 2_000.0), ("mobility_demo", 2_000.0)] {
        let p = prepared(name, 1, horizon);
        group.bench_function(name, |b| b.iter(|| p.run(false).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernel_dispatch, placement, full_run);
criterion_main!(benches);
