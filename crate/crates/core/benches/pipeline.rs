use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use planmap_core::mesh::{fit_wall_lines, reorient, superpixelate, SegmentationParams, WallParams};
use planmap_core::par::Execution;
use planmap_core::synthetic::{self, RoomSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn stages(c: &mut Criterion) {
    let room = synthetic::room(&RoomSpec { step: 0.05, ..RoomSpec::default() }).mesh;
    let aligned = reorient(&room, Execution::Sequential).unwrap().mesh;

    let mut g = c.benchmark_group("reorient");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| b.iter(|| reorient(&room, e).unwrap()));
    }
    g.finish();

    let mut g = c.benchmark_group("fit_wall_lines");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| fit_wall_lines(&aligned, &WallParams::default(), e).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("superpixelate");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &e| {
            b.iter(|| superpixelate(&aligned, &SegmentationParams::default(), e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, stages);
criterion_main!(benches);
