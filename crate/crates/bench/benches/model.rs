use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dressed_cavity::entanglement::assemble_reduced;
use dressed_cavity::{
    concurrence, maximize_ps1, run_scenario, steady_state, sweep, KineticModel, MaximizeOptions, ModelParams,
    PopulationSplit, PopulationVector, Scenario, ScenarioKind, SweepSpec,
};

fn steady(c: &mut Criterion) {
    for n_max in [2, 6] {
        let model = KineticModel::build(&ModelParams::closed(1.0, 1.0, 0.447).with_n_max(n_max)).unwrap();
        let p0 = PopulationVector::ground(&model.rates).unwrap();
        c.bench_function(&format!("steady_state closed n_max={n_max}"), |b| {
            b.iter(|| steady_state(black_box(&model.rates), black_box(&p0)).unwrap())
        });
    }
    let open = Scenario::new(ScenarioKind::OpenPiPulse, ModelParams::open(1.0, 0.5, 1.0, 1.0).with_n_max(3)).unwrap();
    c.bench_function("run_scenario open n_max=3", |b| b.iter(|| run_scenario(black_box(&open)).unwrap()));
    c.bench_function("build model closed n_max=4", |b| {
        b.iter(|| KineticModel::build(black_box(&ModelParams::closed(1.0, 1.0, 1.0).with_n_max(4))).unwrap())
    });
}

fn measures(c: &mut Criterion) {
    let rho = assemble_reduced(&PopulationSplit::closed(0.4, 0.3, 0.2, 0.1));
    c.bench_function("concurrence", |b| b.iter(|| concurrence(black_box(&rho)).unwrap()));
}

fn studies(c: &mut Criterion) {
    let mut group = c.benchmark_group("studies");
    group.sample_size(10);
    let s = Scenario::new(ScenarioKind::ClosedN2, ModelParams::closed(1.0, 1.0, 1.0)).unwrap();
    group.bench_function("sweep 50x50", |b| b.iter(|| sweep(black_box(&s), &SweepSpec::default()).unwrap()));
    group.bench_function("maximize_ps1", |b| {
        b.iter(|| maximize_ps1(black_box(&ModelParams::closed(1.0, 1.0, 1.0)), &MaximizeOptions::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, steady, measures, studies);
criterion_main!(benches);
