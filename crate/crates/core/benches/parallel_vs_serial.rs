use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tracelab::condense::Condensed;
use tracelab::lemma_lab::{trace_constant, SetCatalog};
use tracelab::mesh::{build_cartesian, MeshFamily, Side};
use tracelab::par::Exec;
use tracelab::seminorms::OperatorBundle;
use tracelab::space::{DegreeConfig, HybridSpace};
use tracelab::spectral::refinement_sweep;

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn space(n: usize, k: usize) -> Arc<HybridSpace> {
    let mesh = Arc::new(build_cartesian(2, n).unwrap());
    Arc::new(HybridSpace::new(mesh, DegreeConfig::uniform(k).unwrap()).unwrap())
}

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    g.sample_size(10);
    for n in [8, 16] {
        let sp = space(n, 2);
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, n), &sp, |b, sp| {
                b.iter(|| OperatorBundle::assemble(sp.clone(), exec).unwrap())
            });
        }
    }
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let mut g = c.benchmark_group("evp_sweep");
    g.sample_size(10);
    let degrees: Vec<_> = (0..4).map(|k| DegreeConfig::uniform(k).unwrap()).collect();
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| refinement_sweep(2, &[4, 8], &degrees, MeshFamily::Cartesian, exec)));
    }
    g.finish();
}

fn catalog(c: &mut Criterion) {
    let mut g = c.benchmark_group("catalog");
    g.sample_size(10);
    let mesh = build_cartesian(2, 32).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| SetCatalog::build(&mesh, Side::BOTTOM, exec).unwrap()));
    }
    g.finish();
}

fn probes(c: &mut Criterion) {
    let mut g = c.benchmark_group("trace_constant");
    g.sample_size(10);
    let bundle = OperatorBundle::assemble(space(16, 1), Exec::default()).unwrap();
    let cond = Condensed::new(&bundle, Exec::default()).unwrap();
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| trace_constant(&bundle, &cond, None, 24, 1, exec).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, assembly, sweep, catalog, probes);
criterion_main!(benches);
