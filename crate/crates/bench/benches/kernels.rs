use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hyplab_core::entropy::{box_dimension_default, circle_points};
use hyplab_core::flags::limit_flag;
use hyplab_core::flow::{kappa, Bump, PeriodicOrbit};
use hyplab_core::linalg::{eigen_by_modulus, C64};
use hyplab_core::rep::{bend, gap_spectrum, RepSpec};
use hyplab_core::surface::{fuchsian_reference, ClassCatalog, Word};

fn catalog(c: &mut Criterion) {
    let rep0 = fuchsian_reference().unwrap();
    c.bench_function("catalog_enumerate_r7", |b| b.iter(|| ClassCatalog::enumerate(&rep0, black_box(7.0)).unwrap()));
}

fn gaps(c: &mut Criterion) {
    let rep0 = fuchsian_reference().unwrap();
    let classes = ClassCatalog::enumerate(&rep0, 7.0).unwrap().classes;
    let iota3 = RepSpec::irreducible(3).build(&rep0).unwrap();
    let bent5 = bend(&RepSpec::irreducible(5).build(&rep0).unwrap(), &Word::separating_curve(), C64::new(0.0, 0.3)).unwrap();
    c.bench_function("gap_spectrum_iota3", |b| {
        b.iter(|| classes.iter().map(|k| gap_spectrum(&iota3, &k.rep_word).unwrap().gaps[0]).sum::<C64>())
    });
    c.bench_function("gap_spectrum_bent5", |b| {
        b.iter(|| classes.iter().map(|k| gap_spectrum(&bent5, &k.rep_word).unwrap().gaps[0]).sum::<C64>())
    });
    let m = bent5.evaluate(&classes[40].rep_word);
    c.bench_function("eigen_by_modulus_5x5", |b| b.iter(|| eigen_by_modulus(black_box(&m)).unwrap()));
}

fn flags(c: &mut Criterion) {
    let rep0 = fuchsian_reference().unwrap();
    let classes = ClassCatalog::enumerate(&rep0, 6.0).unwrap().classes;
    let rep = RepSpec::irreducible(4).build(&rep0).unwrap();
    c.bench_function("limit_flag_iota4", |b| {
        b.iter(|| {
            for k in &classes {
                black_box(limit_flag(&rep, &k.rep_word, &[1, 2, 3]).unwrap());
            }
        })
    });
}

fn flow(c: &mut Criterion) {
    let rep0 = fuchsian_reference().unwrap();
    let bump = Bump::new(&rep0, 0.5, 1.0).unwrap();
    let cat = ClassCatalog::enumerate(&rep0, 6.0).unwrap();
    let orbits: Vec<PeriodicOrbit> = cat.classes.iter().map(|k| PeriodicOrbit::new(&rep0, k).unwrap()).collect();
    c.bench_function("kappa_bump_periods", |b| {
        b.iter(|| orbits.iter().map(|o| kappa(&bump, o, o.period)).sum::<f64>())
    });
}

fn boxes(c: &mut Criterion) {
    let points = circle_points(100_000);
    c.bench_function("box_dimension_circle", |b| {
        b.iter_batched(|| points.clone(), |p| box_dimension_default(&p, 7).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = catalog, gaps, flags, flow, boxes
}
criterion_main!(benches);
