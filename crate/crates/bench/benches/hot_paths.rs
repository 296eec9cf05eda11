use std::hint::black_box;

use chrono::NaiveDate;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pvmpi::bicop::{kendall_tau, kendall_tau_naive};
use pvmpi::data_io::{synth_generate, TruthSpec};
use pvmpi::marginals::{default_levels, QuantileCurve};
use pvmpi::mpi::build_mpi_set;
use pvmpi::pipeline::fit_copula;
use pvmpi::scenarios::generate;
use pvmpi::scoring::{energy_score, variogram_score};
use pvmpi::CopulaKind;

fn curves(dim: usize) -> Vec<QuantileCurve> {
    let day = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
    (0..dim)
        .map(|d| {
            let lv = default_levels();
            let v = lv.iter().map(|a| 0.05 + 0.8 * a * a).collect();
            QuantileCurve::from_raw(day, d, lv, v)
        })
        .collect()
}

fn tau(c: &mut Criterion) {
    let mut g = c.benchmark_group("kendall_tau");
    for n in [500usize, 5000] {
        let u = synth_generate(&TruthSpec::default_for(2), n, 3)
            .unwrap()
            .uniforms;
        let (x, y): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (u[(i, 0)], u[(i, 1)])).unzip();
        g.bench_with_input(BenchmarkId::new("merge_sort", n), &n, |b, _| {
            b.iter(|| kendall_tau(black_box(&x), black_box(&y)).unwrap())
        });
        if n <= 500 {
            g.bench_with_input(BenchmarkId::new("pairwise", n), &n, |b, _| {
                b.iter(|| kendall_tau_naive(black_box(&x), black_box(&y)).unwrap())
            });
        }
    }
    g.finish();
}

fn copulas(c: &mut Criterion) {
    let mut g = c.benchmark_group("copula");
    g.sample_size(10);
    for dim in [5usize, 11] {
        let u = synth_generate(&TruthSpec::default_for(dim), 500, 4)
            .unwrap()
            .uniforms;
        for kind in [CopulaKind::Gaussian, CopulaKind::Rvine] {
            g.bench_with_input(
                BenchmarkId::new(format!("fit_{kind}"), dim),
                &dim,
                |b, _| b.iter(|| fit_copula(kind, black_box(&u)).unwrap()),
            );
            let cop = fit_copula(kind, &u).unwrap();
            let row: Vec<f64> = (0..dim).map(|d| u[(7, d)]).collect();
            g.bench_with_input(
                BenchmarkId::new(format!("logdensity_{kind}"), dim),
                &dim,
                |b, _| b.iter(|| cop.logdensity(black_box(&row)).unwrap()),
            );
            let cs = curves(dim);
            g.bench_with_input(
                BenchmarkId::new(format!("scenarios500_{kind}"), dim),
                &dim,
                |b, _| b.iter(|| generate(&cop, black_box(&cs), 500, 11).unwrap()),
            );
        }
    }
    g.finish();
}

fn intervals_and_scores(c: &mut Criterion) {
    let dim = 11;
    let u = synth_generate(&TruthSpec::default_for(dim), 500, 5)
        .unwrap()
        .uniforms;
    let cop = fit_copula(CopulaKind::Rvine, &u).unwrap();
    let cs = curves(dim);
    let set = generate(&cop, &cs, 500, 12).unwrap();
    let obs: Vec<f64> = (0..dim).map(|d| set.values[(3, d)] * 0.9).collect();
    let alphas = default_levels();

    c.bench_function("build_mpi_set/S500_D11_19levels", |b| {
        b.iter(|| build_mpi_set(black_box(&set), &cs, &alphas).unwrap())
    });
    c.bench_function("energy_score/S500_D11", |b| {
        b.iter(|| energy_score(black_box(&obs), &set.values).unwrap())
    });
    c.bench_function("variogram_score/S500_D11", |b| {
        b.iter(|| variogram_score(black_box(&obs), &set.values, 0.5, None).unwrap())
    });
}

criterion_group!(benches, tau, copulas, intervals_and_scores);
criterion_main!(benches);
