//! Parallel vs sequential on the heavy kernels: counting decomposition,
//! the n = 2 Brascamp-Lieb form and a Monte Carlo density.
//!
//! Build without default features to bench the plain sequential build; with
//! `parallel` on, the `sequential` rows use the runtime switch.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ramsey_lab::convex_curves::{make_curve, CurveKind};
use ramsey_lab::counting::{decompose, ScaleLadder};
use ramsey_lab::density::{vc_density, TruncationParams};
use ramsey_lab::exec;
use ramsey_lab::gowers::HypercubeAssignment;
use ramsey_lab::kernels::narrow_gaussian;
use ramsey_lab::planar_fields::{generate, GridField, SetSpec, Window};
use ramsey_lab::sbl::{sbl_forms, SBLInstance, SGrid};
use ramsey_lab::P2;

fn modes() -> Vec<(&'static str, bool)> {
    if cfg!(feature = "parallel") {
        vec![("parallel", false), ("sequential", true)]
    } else {
        vec![("sequential", true)]
    }
}

fn bench(c: &mut Criterion) {
    let w = Window::new(P2::ZERO, 64.0, 256).unwrap();
    let a = generate(&SetSpec::Random { cell: 1.0, density: 0.5, seed: 1 }, w).unwrap();
    let b = generate(&SetSpec::Random { cell: 1.0, density: 0.5, seed: 2 }, w).unwrap();
    let circle = make_curve(CurveKind::Circle, 1024).unwrap();
    let ladder = ScaleLadder::for_window(vec![2.0, 4.0, 8.0, 16.0], 64.0).unwrap();

    let sw = Window::centered(P2::ZERO, 4.0, 16).unwrap();
    let f = GridField::from_fn(sw, narrow_gaussian).unwrap();
    let inst = SBLInstance::new(1, vec![1.0, 3.0], HypercubeAssignment::constant(2, f).unwrap(), SGrid::standard()).unwrap();

    let ow = Window::centered(P2::ZERO, 128.0, 128).unwrap();
    let ones = GridField::constant(ow, 1.0).unwrap();
    let mc = TruncationParams::geometric(1.0, 64.0, 6, vec![P2::new(-32.0, -32.0)]).unwrap().with_mc(100_000, 0);

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (name, seq) in modes() {
        exec::set_sequential(seq);
        g.bench_function(BenchmarkId::new("decompose", name), |bch| {
            bch.iter(|| decompose(a.grid(), b.grid(), &ladder, 0.25, &circle, 2048).unwrap())
        });
        g.bench_function(BenchmarkId::new("sbl_n2", name), |bch| bch.iter(|| sbl_forms(&inst).unwrap()));
        g.bench_function(BenchmarkId::new("vc_density", name), |bch| bch.iter(|| vc_density(&ones, &ones, &mc).unwrap()));
    }
    exec::set_sequential(false);
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
