//! Sequential vs data-parallel evaluation. Build with
//! `--no-default-features` to see the fallback (both paths then run
//! sequentially).

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use horn_core::catalog::{build, CatalogSpec};
use horn_core::derivative::{differentiate, differentiate_n};
use horn_core::eval::{evaluate_expansion_with, evaluate_with, EvalOptions};
use horn_core::{DerivativeExpansion, Execution};

const PATHS: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

/// Tight tolerance so every shell up to `max_total_order` is summed.
fn exhaustive(order: u32) -> EvalOptions {
    EvalOptions {
        max_total_order: order,
        abs_tol: f64::MIN_POSITIVE,
        rel_tol: f64::MIN_POSITIVE,
        min_shells: 1,
    }
}

fn series_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_series");
    let f4 = build(&CatalogSpec::new("F4", vec![0.3, 0.4, 1.1, 1.2], vec![0.1, 0.12])).unwrap();
    for order in [60u32, 120] {
        for (name, exec) in PATHS {
            group.bench_with_input(BenchmarkId::new(name, format!("F4/{order}")), &order, |b, &o| {
                b.iter(|| evaluate_with(black_box(&f4), &exhaustive(o), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn expansion_evaluation(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_expansion");
    group.sample_size(20);
    let h3 = build(&CatalogSpec::new("H3", vec![0.7, 0.9, 1.3], vec![0.05, 0.12])).unwrap();
    let first = differentiate(&h3, "a").unwrap();
    let second: DerivativeExpansion =
        differentiate_n(&h3, &BTreeMap::from([("a".to_string(), 1), ("c".to_string(), 1)])).unwrap();
    for (label, exp) in [("H3 d/da", &first), ("H3 d2/da dc", &second)] {
        for (name, exec) in PATHS {
            group.bench_with_input(BenchmarkId::new(name, label), exp, |b, e| {
                b.iter(|| evaluate_expansion_with(black_box(e), &exhaustive(30), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, series_evaluation, expansion_evaluation);
criterion_main!(benches);
