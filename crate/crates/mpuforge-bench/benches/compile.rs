use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mpuforge_core::circuit::depth_value;
use mpuforge_core::compiler::{compile_nonuniform, verify_against, CompileOptions};
use mpuforge_core::corpus;
use mpuforge_core::mpu::contract;
use mpuforge_core::sampling;

fn bench_compile_tree(c: &mut Criterion) {
    let compiler = mpuforge_bench::mcz_compiler();
    let mut group = c.benchmark_group("compile_mcz");
    for n in [8usize, 16, 32] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| {
                let res = compiler.compile(n).unwrap();
                depth_value(&res.circuit.root)
            })
        });
    }
    group.finish();
}

fn bench_contract(c: &mut Criterion) {
    let mpu = mpuforge_bench::mcz();
    c.bench_function("contract_mcz_n10", |b| {
        let chain = mpu.chain(10).unwrap();
        b.iter(|| contract(&chain, 1 << 20).unwrap())
    });
}

fn bench_simulate(c: &mut Criterion) {
    let mpu = mpuforge_bench::mcz();
    let compiler = mpuforge_bench::mcz_compiler();
    let res = compiler.compile(4).unwrap();
    let target = corpus::multicontrol_z_dense(4);
    c.bench_function("simulate_mcz_n4", |b| {
        b.iter(|| verify_against(&res, &target).unwrap())
    });
    let _ = mpu;
}

fn bench_canonicalize(c: &mut Criterion) {
    let mut rng = sampling::rng(3);
    let chain = corpus::random_unitary_chain(&mut rng, 4, 2);
    c.bench_function("canonicalize_random_n4", |b| {
        b.iter(|| mpuforge_core::mpu::choi_canonicalize(&chain, 1e-10).unwrap())
    });
    c.bench_function("compile_nonuniform_random_n4", |b| {
        b.iter(|| compile_nonuniform(&chain, &CompileOptions::default()).unwrap())
    });
}

criterion_group!(
    benches,
    bench_compile_tree,
    bench_contract,
    bench_simulate,
    bench_canonicalize
);
criterion_main!(benches);
