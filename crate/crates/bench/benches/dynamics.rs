use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fibrenorm::complexext::julia_inverse_points;
use fibrenorm::thurston::{iterate_to_fixed_point, MarkedTriple};
use fibrenorm::unimodal::Family;
use fibrenorm::{hausdorff_distance, PrecisionContext};

fn bench_orbit(c: &mut Criterion) {
    for bits in [128u32, 256] {
        let ctx = PrecisionContext::new(bits);
        let map = Family::Quadratic.instantiate_f64(-1.8705286321, &ctx);
        c.bench_function(&format!("orbit_10k_{}bits", bits), |b| {
            b.iter(|| {
                let mut x = ctx.float(0.0);
                for _ in 0..10_000 {
                    x = map.eval(&x);
                }
                x
            })
        });
    }
}

fn bench_thurston(c: &mut Criterion) {
    let ctx = PrecisionContext::new(128);
    c.bench_function("thurston_to_1e-30", |b| {
        b.iter(|| {
            let t0 = MarkedTriple::new(ctx.float(-0.5)).unwrap();
            iterate_to_fixed_point(&t0, &ctx.float(1e-30), &ctx).unwrap()
        })
    });
}

fn bench_hausdorff(c: &mut Criterion) {
    let a = julia_inverse_points((-1.0, 0.0), 10_000, 1);
    let b = julia_inverse_points((-1.0, 0.0), 10_000, 2);
    c.bench_function("hausdorff_10k_vs_10k", |bch| {
        bch.iter_batched(
            || (a.clone(), b.clone()),
            |(a, b)| hausdorff_distance(&a, &b).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, bench_orbit, bench_thurston, bench_hausdorff);
criterion_main!(benches);
