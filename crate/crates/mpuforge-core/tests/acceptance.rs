//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantity at its stated tolerance.

use std::time::Instant;

use mpuforge_core::compiler::{
    compile_nonuniform, compile_uniform, depth_scaling_report, verify_against, CompileOptions,
};
use mpuforge_core::corpus;
use mpuforge_core::isometry::{
    compute_caps_uniform, conditioning_nonuniform, conditioning_uniform,
};
use mpuforge_core::lcu::{lcu_decompose, lcu_decompose_compact, merge_operator, plan_padding};
use mpuforge_core::linalg::{max_abs_diff, trace_norm};
use mpuforge_core::mpu::{
    assumption1_blocking, check_assumption1, choi_canonicalize, contract, is_unitary,
    DEFAULT_DIM_CAP,
};
use mpuforge_core::sampling;
use mpuforge_core::suite::{run_lemma_suite, LemmaTag};

fn opts() -> CompileOptions {
    CompileOptions::default()
}

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "acceptance {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Uniform-bulk exactness: multi-control-Z at N in {2,3,4} against the
/// dense target, metric and leakage <= 1e-9, within 60 s at N=4.
#[test]
fn criterion_1_uniform_exactness_mcz() {
    let mpu = corpus::mpu_multicontrol_z();
    let mut detail = String::new();
    let mut pass = true;
    for n in [2usize, 3, 4] {
        let t0 = Instant::now();
        let res = compile_uniform(&mpu, n, &opts()).unwrap();
        let (metric, leak) = verify_against(&res, &corpus::multicontrol_z_dense(n)).unwrap();
        let dt = t0.elapsed();
        pass &= metric <= 1e-9 && leak <= 1e-9;
        if n == 4 {
            pass &= dt.as_secs_f64() <= 60.0;
        }
        detail.push_str(&format!(
            "N={n}: metric {metric:.2e} leak {leak:.2e} ({dt:.2?}); "
        ));
    }
    report(1, "uniform exactness, multi-control-Z", pass, &detail);
}

/// Nonuniform exactness: three chains at N <= 4 against the dense
/// contraction oracle, metric <= 1e-8.
#[test]
fn criterion_2_nonuniform_exactness() {
    let mut detail = String::new();
    let mut pass = true;

    let mut rng = sampling::rng(9001);
    let product = corpus::random_product_chain(&mut rng, 4, 2);
    let res = compile_nonuniform(&product, &opts()).unwrap();
    let target = contract(&product, DEFAULT_DIM_CAP).unwrap();
    let (metric, leak) = verify_against(&res, &target).unwrap();
    pass &= metric <= 1e-8 && leak <= 1e-9;
    detail.push_str(&format!("product N=4: {metric:.2e}; "));

    let mut rng = sampling::rng(9002);
    let u = sampling::random_unitary(&mut rng, 2);
    let perturbed = corpus::mpu_perturbed_mcz(4, 2, &u).unwrap();
    let res = compile_nonuniform(&perturbed, &opts()).unwrap();
    let target = contract(&perturbed, DEFAULT_DIM_CAP).unwrap();
    let (metric, leak) = verify_against(&res, &target).unwrap();
    pass &= metric <= 1e-8 && leak <= 1e-9;
    detail.push_str(&format!("perturbed mcZ N=4: {metric:.2e}; "));

    let mut rng = sampling::rng(9003);
    let u = sampling::random_unitary(&mut rng, 4);
    let two_site = corpus::mpu_from_two_site_unitary(&u, 2).unwrap();
    let res = compile_nonuniform(&two_site, &opts()).unwrap();
    let (metric, leak) = verify_against(&res, &u).unwrap();
    pass &= metric <= 1e-8 && leak <= 1e-9;
    detail.push_str(&format!("two-site random N=2: {metric:.2e}"));

    report(2, "nonuniform exactness", pass, &detail);
}

/// Lee-Yang: unitarity over random phases, fusion identities, compiled N=2.
#[test]
fn criterion_3_lee_yang() {
    let mut pass = true;
    let mut detail = String::new();

    let mut rng = sampling::rng(9100);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        use rand::Rng;
        let alpha: f64 = rng.gen_range(-3.15..3.15);
        let beta: f64 = rng.gen_range(-3.15..3.15);
        let open = corpus::lee_yang_open(alpha, beta).unwrap();
        for n in [2usize, 3] {
            let (_, res) = is_unitary(&open.chain(n).unwrap(), 1e-9, DEFAULT_DIM_CAP).unwrap();
            worst = worst.max(res);
        }
    }
    pass &= worst <= 1e-9;
    detail.push_str(&format!(
        "unitarity worst {worst:.2e} over 10 random phase pairs; "
    ));

    let fusion = corpus::lee_yang_fusion_mpo_check(2).unwrap();
    let idem = corpus::lee_yang_projector_check(2).unwrap();
    pass &= fusion <= 1e-9 && idem <= 1e-9;
    detail.push_str(&format!("fusion {fusion:.2e} idempotence {idem:.2e}; "));

    let open = corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let res = compile_uniform(&open, 2, &opts()).unwrap();
    let target = contract(&open.chain(2).unwrap(), DEFAULT_DIM_CAP).unwrap();
    let (metric, leak) = verify_against(&res, &target).unwrap();
    pass &= metric <= 1e-8 && leak <= 1e-8;
    detail.push_str(&format!("compiled N=2 metric {metric:.2e} leak {leak:.2e}"));

    report(3, "Lee-Yang construction", pass, &detail);
}

/// Amplification determinism: exact success amplitude for every merge of
/// every corpus compile, plus the padding identity on 1000 random C.
#[test]
fn criterion_4_amplification_determinism() {
    let mut pass = true;
    let mut worst_amp = 0.0f64;
    let mut merge_count = 0usize;

    let mut all_merges = Vec::new();
    all_merges.extend(
        compile_uniform(&corpus::mpu_identity(2), 4, &opts())
            .unwrap()
            .merges,
    );
    for n in [2usize, 3, 4] {
        all_merges.extend(
            compile_uniform(&corpus::mpu_multicontrol_z(), n, &opts())
                .unwrap()
                .merges,
        );
    }
    all_merges.extend(
        compile_uniform(
            &corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap(),
            2,
            &opts(),
        )
        .unwrap()
        .merges,
    );
    let mut rng = sampling::rng(9200);
    all_merges.extend(
        compile_nonuniform(&corpus::random_product_chain(&mut rng, 4, 2), &opts())
            .unwrap()
            .merges,
    );
    let u = sampling::random_unitary(&mut rng, 2);
    all_merges.extend(
        compile_nonuniform(&corpus::mpu_perturbed_mcz(3, 1, &u).unwrap(), &opts())
            .unwrap()
            .merges,
    );
    let u4 = sampling::random_unitary(&mut rng, 4);
    all_merges.extend(
        compile_nonuniform(&corpus::mpu_from_two_site_unitary(&u4, 2).unwrap(), &opts())
            .unwrap()
            .merges,
    );
    for m in &all_merges {
        let theta = (1.0 / m.c_padded).asin();
        let amp = ((2 * m.rotations + 1) as f64 * theta).sin();
        worst_amp = worst_amp.max((amp - 1.0).abs());
        merge_count += 1;
    }
    pass &= worst_amp <= 1e-10;

    let mut rng = sampling::rng(9201);
    let mut worst_pad = 0.0f64;
    for _ in 0..1000 {
        use rand::Rng;
        let c_total: f64 = rng.gen_range(1.0..50.0);
        let p = plan_padding(c_total).unwrap();
        worst_pad = worst_pad.max((p.success_amplitude() - 1.0).abs());
    }
    pass &= worst_pad <= 1e-12;

    report(
        4,
        "amplification determinism",
        pass,
        &format!(
            "success amplitude off by {worst_amp:.2e} across {merge_count} merges; padding identity off by {worst_pad:.2e} over 1000 random C"
        ),
    );
}

/// LCU optimality: Σc = ‖M‖₁ and exact reconstruction for 100 random
/// matrices (dim <= 16) and all corpus merge operators.
#[test]
fn criterion_5_lcu_optimality() {
    let mut pass = true;
    let mut worst_c = 0.0f64;
    let mut worst_rec = 0.0f64;
    let mut rng = sampling::rng(9300);
    for trial in 0..100 {
        use rand::Rng;
        let dim = rng.gen_range(2..=16);
        let m = sampling::random_cmatrix(&mut rng, dim, dim);
        let d = lcu_decompose(&m).unwrap();
        worst_c = worst_c.max((d.total() - trace_norm(&m)).abs());
        worst_rec = worst_rec.max(max_abs_diff(&d.reconstruct(), &m));
        let _ = trial;
    }
    // corpus merge operators through both expansions
    let mut merge_ops = Vec::new();
    let caps = compute_caps_uniform(&corpus::mpu_multicontrol_z(), 1, None, None, 1e-10).unwrap();
    merge_ops.push(merge_operator(&caps, &caps, 1e-10).unwrap());
    let caps = compute_caps_uniform(&corpus::mpu_identity(2), 1, None, None, 1e-10).unwrap();
    merge_ops.push(merge_operator(&caps, &caps, 1e-10).unwrap());
    let ly = corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let caps = compute_caps_uniform(&ly, 2, None, None, 1e-10).unwrap();
    merge_ops.push(merge_operator(&caps, &caps, 1e-10).unwrap());
    for m in &merge_ops {
        for d in [lcu_decompose(m).unwrap(), lcu_decompose_compact(m).unwrap()] {
            worst_c = worst_c.max((d.total() - trace_norm(m)).abs());
            worst_rec = worst_rec.max(max_abs_diff(&d.reconstruct(), m));
        }
    }
    pass &= worst_c <= 1e-10 && worst_rec <= 1e-10;
    report(
        5,
        "LCU optimality",
        pass,
        &format!("coefficient sum off by {worst_c:.2e}, reconstruction {worst_rec:.2e}"),
    );
}

/// Conditioning bound `q <= sqrt(D)/s_min` for every corpus MPU at N <= 5;
/// `q_unif` equals the merge-operator trace norm.
#[test]
fn criterion_6_conditioning_bound() {
    let mut pass = true;
    let mut detail = String::new();

    let uniform_corpus: Vec<(&str, mpuforge_core::mpu::UniformMpu, usize)> = vec![
        ("identity", corpus::mpu_identity(2), 1),
        ("multi-control-Z", corpus::mpu_multicontrol_z(), 1),
        (
            "lee-yang",
            corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap(),
            2,
        ),
    ];
    for (name, mpu, blocking) in &uniform_corpus {
        let max_n = 5;
        for n in 2..=max_n {
            if mpu.phys_dim().pow(n as u32) > DEFAULT_DIM_CAP {
                continue;
            }
            let chain = mpu.chain(n).unwrap();
            let data = choi_canonicalize(&chain, 1e-10).unwrap();
            let cond = conditioning_nonuniform(&data);
            let ok = cond.q <= cond.crude_bound + 1e-10 * cond.crude_bound.max(1.0);
            pass &= ok;
            if n == max_n || !ok {
                detail.push_str(&format!(
                    "{name} N={n}: q {:.4} <= bound {:.4}; ",
                    cond.q, cond.crude_bound
                ));
            }
        }
        let caps = compute_caps_uniform(mpu, *blocking, None, None, 1e-10).unwrap();
        let q = conditioning_uniform(&caps, 1e-10).unwrap();
        let tn = trace_norm(&merge_operator(&caps, &caps, 1e-10).unwrap());
        pass &= (q - tn).abs() <= 1e-10 * tn.max(1.0);
        detail.push_str(&format!(
            "{name} q_unif {q:.4} = ‖M‖₁ ± {:.1e}; ",
            (q - tn).abs()
        ));
    }
    report(6, "conditioning bound", pass, &detail);
}

/// Depth scaling over N in {4,..,64}: accounted-depth ratio spread <= 4 for
/// identity, multi-control-Z and Lee-Yang; finishes within 120 s.
#[test]
fn criterion_7_depth_scaling() {
    let t0 = Instant::now();
    let n_list = [4usize, 8, 16, 32, 64];
    let mut pass = true;
    let mut detail = String::new();
    for (name, mpu) in [
        ("identity", corpus::mpu_identity(2)),
        ("multi-control-Z", corpus::mpu_multicontrol_z()),
        (
            "lee-yang",
            corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap(),
        ),
    ] {
        let rep = depth_scaling_report(&mpu, &n_list, &opts(), 4.0).unwrap();
        pass &= rep.bounded;
        detail.push_str(&format!(
            "{name}: q_used {:.3} spread {:.2} exponent {:.2}; ",
            rep.q_used, rep.ratio_spread, rep.fitted_exponent
        ));
    }
    let dt = t0.elapsed();
    pass &= dt.as_secs_f64() <= 120.0;
    detail.push_str(&format!("({dt:.2?})"));
    report(7, "depth scaling", pass, &detail);
}

/// Isometry lemma suites S1 and S6 at 1e-9 plus q_k gauge invariance at 1e-10.
#[test]
fn criterion_8_isometry_suites() {
    let mut pass = true;
    let mut detail = String::new();
    for tag in [LemmaTag::S1, LemmaTag::S6] {
        let rep = run_lemma_suite(tag);
        pass &= rep.passed;
        detail.push_str(&format!("{:?}: {} cases; ", tag, rep.cases.len()));
    }
    // gauge invariance of q_k at 1e-10
    let mut rng = sampling::rng(9400);
    let chain = corpus::random_unitary_chain(&mut rng, 3, 2);
    let q0 = conditioning_nonuniform(&choi_canonicalize(&chain, 1e-10).unwrap());
    let x = sampling::random_invertible(&mut rng, chain.tensors[0].d_right);
    let xi = x.clone().try_inverse().unwrap();
    let mut gauged = chain.clone();
    gauged.tensors[0] = gauged.tensors[0].gauge(
        &mpuforge_core::linalg::identity(gauged.tensors[0].d_left),
        &x,
    );
    gauged.tensors[1] = gauged.tensors[1].gauge(
        &xi,
        &mpuforge_core::linalg::identity(gauged.tensors[1].d_right),
    );
    let q1 = conditioning_nonuniform(&choi_canonicalize(&gauged, 1e-10).unwrap());
    let mut worst = 0.0f64;
    for (a, b) in q0.per_cut.iter().zip(&q1.per_cut) {
        worst = worst.max((a - b).abs());
    }
    pass &= worst <= 1e-10;
    detail.push_str(&format!("q_k gauge drift {worst:.2e}"));
    report(8, "isometry lemma suites", pass, &detail);
}

/// Bond-rank discrimination: passes multi-control-Z and Lee-Yang, rejects
/// the redundant-bond construction through the unsupported-MPU error path.
#[test]
fn criterion_9_assumption_discrimination() {
    let mut pass = true;
    let mut detail = String::new();

    let mcz = corpus::mpu_multicontrol_z();
    let ok = check_assumption1(&mcz, 1e-10).unwrap();
    pass &= ok;
    detail.push_str(&format!("mcZ single-site rank check: {ok}; "));

    let ly = corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let m = assumption1_blocking(&ly, 1e-10, 3).unwrap();
    pass &= m == Some(2);
    detail.push_str(&format!("lee-yang full rank at window m={m:?}; "));

    let bad = corpus::mpu_multicontrol_z_redundant();
    let m = assumption1_blocking(&bad, 1e-10, 3).unwrap();
    pass &= m.is_none();
    let err = compile_uniform(&bad, 3, &opts()).unwrap_err();
    pass &= err.exit_code() == 4;
    detail.push_str(&format!(
        "redundant bond rejected with exit code {}",
        err.exit_code()
    ));
    report(9, "bond-rank discrimination", pass, &detail);
}
