use std::path::Path;

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use sesscc_core::constraint::{match_abstraction, parse_constraint, Store};
use sesscc_core::encode::{encode, encode_timed, EncodingContext};
use sesscc_core::hvk::{outermost_run, parse};
use sesscc_core::utcc::Engine;
use sesscc_core::{Constraint, Term};

fn corpus(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn store_with(n: i64) -> Store {
    let mut s = Store::new();
    for i in 0..n {
        s.tell(&Constraint::atom("out", vec![Term::sym(format!("k{}", i % 7)), Term::int(i)])).unwrap();
        s.tell(&Constraint::atom("sel", vec![Term::sym(format!("k{}", i % 7)), Term::sym("go")])).unwrap();
    }
    s
}

fn constraints(c: &mut Criterion) {
    let query = parse_constraint("exists k, v. out(k, v) & sel(k, go) & v > 40", &[]).unwrap();
    let guard = parse_constraint("out(k, v) & sel(k, go)", &[]).unwrap();
    let binders = vec!["k".to_string(), "v".to_string()];
    let mut group = c.benchmark_group("constraints");
    for n in [10, 50, 200] {
        let s = store_with(n);
        group.bench_with_input(BenchmarkId::new("entails", n), &s, |b, s| b.iter(|| s.entails(black_box(&query))));
        group.bench_with_input(BenchmarkId::new("match", n), &s, |b, s| {
            b.iter(|| match_abstraction(s, black_box(&binders), &guard, &[]).len())
        });
    }
    group.finish();
}

fn runs(c: &mut Criterion) {
    let atm = parse(&corpus("atm.hvk")).unwrap();
    let atm_utcc = encode(&atm, &EncodingContext::untimed()).unwrap();
    let broker = parse(&corpus("broker2.hvk")).unwrap();
    let broker_utcc = encode_timed(&broker, &EncodingContext { counting: true, ..EncodingContext::default() }).unwrap();
    let mut group = c.benchmark_group("runs");
    group.sample_size(10);
    group.bench_function("atm hvk 30 rounds", |b| b.iter(|| outermost_run(&atm, 30, false).unwrap().len()));
    group.bench_function("atm encoded 20 units", |b| {
        b.iter(|| Engine::new(Default::default()).run(&atm_utcc, 20, &[]).unwrap().len())
    });
    group.bench_function("broker2 encoded 30 units", |b| {
        b.iter(|| Engine::new(Default::default()).run(&broker_utcc, 30, &[]).unwrap().len())
    });
    group.bench_function("encode atm", |b| b.iter(|| encode(black_box(&atm), &EncodingContext::untimed()).unwrap()));
    group.finish();
}

criterion_group!(benches, constraints, runs);
criterion_main!(benches);
