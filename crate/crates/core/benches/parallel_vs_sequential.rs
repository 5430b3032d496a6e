use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dynkin_core::mc::{evaluate_stopping_value, MCConfig, PathSimulator, PayoffFields, StartPoint, StoppingRule};
use dynkin_core::{
    Axis, DensityMode, DensitySpec, Discretization, DiffusionModel, DiffusionSpec, DriftSpec, Execution, ScalarField,
    SpaceTimeGrid,
};

fn put_model() -> DiffusionModel {
    DiffusionModel::new(
        1,
        DriftSpec::Gbm { rate: vec![0.06] },
        DiffusionSpec::Gbm { vol: vec![0.2] },
        0.06,
        DensityMode::UserSupplied(DensitySpec::Power { exponents: vec![1.0] }),
    )
    .unwrap()
}

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if Execution::parallel_available() {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn assembly(c: &mut Criterion) {
    let model = DiffusionModel::new(
        2,
        DriftSpec::Constant { b: vec![0.1, -0.05] },
        DiffusionSpec::Constant {
            a: vec![vec![0.4, 0.0], vec![0.0, 0.3]],
        },
        0.1,
        DensityMode::ClosedForm,
    )
    .unwrap();
    let axis = Axis::uniform(-1.0, 1.0, 41).unwrap();
    let grid = SpaceTimeGrid::uniform(1.0, 40, vec![axis.clone(), axis]).unwrap();
    let mut group = c.benchmark_group("assembly_2d_41");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| Discretization::with_execution(model.clone(), grid.clone(), exec).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let model = put_model();
    let grid = SpaceTimeGrid::uniform(1.0, 50, vec![Axis::uniform(0.2, 3.0, 71).unwrap()]).unwrap();
    let g = ScalarField::from_fn(&grid, |_, x| (1.0 - x[0]).max(0.0));
    let fields = PayoffFields {
        g: &g,
        h: None,
        f: None,
        data: &g,
    };
    let rule = StoppingRule::FixedTime(0.5);
    let start = StartPoint::new(0.0, &[1.0]);
    let mut group = c.benchmark_group("mc_put_10k_paths");
    group.sample_size(10);
    for (name, exec) in modes() {
        let cfg = MCConfig {
            n_paths: 10_000,
            seed: 1,
            execution: exec,
            ..MCConfig::default()
        };
        let sim = PathSimulator::new(&model, &grid, &cfg).unwrap();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(evaluate_stopping_value(&sim, &start, fields, &rule).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly, monte_carlo);
criterion_main!(benches);
