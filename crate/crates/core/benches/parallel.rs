use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ssdual::convergence::{simulate_absorption, SimulationOptions};
use ssdual::cube::{
    nearest_neighbor_walk, supermodular_order_witness, sweep, CubeWalkParams, SupermodularOptions, SweepGrid,
};
use ssdual::dual::{build_ssd, SsdOptions};
use ssdual::monotonicity::{weak_monotone, WeakOptions};
use ssdual::{Direction, Exec, Poset, Tolerances};

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn monte_carlo(c: &mut Criterion) {
    let chain = nearest_neighbor_walk(&CubeWalkParams::symmetric(3, 0.55).unwrap()).unwrap().with_point_mass(0);
    let pi = chain.stationary().unwrap();
    let zm = chain.poset().zeta_mobius().unwrap();
    let dual = build_ssd(&chain, &pi, &zm, Direction::Down, SsdOptions::default()).unwrap();
    let mut group = c.benchmark_group("simulate_absorption");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = SimulationOptions {
            samples: 100_000,
            seed: 1,
            horizon: 50,
            exec,
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| simulate_absorption(&dual, &opts).unwrap())
        });
    }
    group.finish();
}

fn supermodular(c: &mut Criterion) {
    let poset = Poset::cube(3).unwrap();
    let p1 = vec![0.125; 8];
    let mut p2 = p1.clone();
    p2[0] += 0.05;
    p2[7] += 0.05;
    p2[1] -= 0.05;
    p2[6] -= 0.05;
    let mut group = c.benchmark_group("supermodular_order_witness");
    for (name, exec) in POLICIES {
        let opts = SupermodularOptions { trials: 1000, seed: 1, exec };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| supermodular_order_witness(&poset, &p1, &p2, &opts).unwrap())
        });
    }
    group.finish();
}

fn weak_lp(c: &mut Criterion) {
    let chain = nearest_neighbor_walk(&CubeWalkParams::symmetric(5, 0.6).unwrap()).unwrap();
    let zm = chain.poset().zeta_mobius().unwrap();
    let mut group = c.benchmark_group("weak_monotone");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        let opts = WeakOptions { exec, ..WeakOptions::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| weak_monotone(&chain, &zm, Direction::Down, opts).unwrap())
        });
    }
    group.finish();
}

fn parameter_sweep(c: &mut Criterion) {
    let grid = SweepGrid {
        d: 4,
        alpha: (1..=6).map(|k| 0.02 * k as f64).collect(),
        beta: (1..=6).map(|k| 0.02 * k as f64).collect(),
        kappa: vec![0.0, 0.005, 0.01],
        tol: Tolerances::default(),
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| sweep(&grid, exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, supermodular, weak_lp, parameter_sweep);
criterion_main!(benches);
