//! Cross-module randomized and oracle-equivalence harness. Each tag bundles
//! replayable cases (descriptor + seed); failures carry a JSON counterexample
//! dump so CI output is self-contained.

use serde::Serialize;

use crate::compiler::{compile_nonuniform, compile_uniform, verify_against, CompileOptions};
use crate::corpus;
use crate::isometry::{build_isometry, compute_caps_nonuniform, compute_caps_uniform};
use crate::lcu::{lcu_decompose, lcu_decompose_compact, merge_operator, plan_padding};
use crate::linalg::{identity, max_abs_diff, trace_norm};
use crate::mpu::{choi_canonicalize, contract, DEFAULT_DIM_CAP};
use crate::sampling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LemmaTag {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    Thm1,
    Thm1Prime,
    Thm2,
}

impl LemmaTag {
    pub fn all() -> &'static [LemmaTag] {
        &[
            LemmaTag::S1,
            LemmaTag::S2,
            LemmaTag::S3,
            LemmaTag::S4,
            LemmaTag::S5,
            LemmaTag::S6,
            LemmaTag::Thm1,
            LemmaTag::Thm1Prime,
            LemmaTag::Thm2,
        ]
    }

    pub fn parse(s: &str) -> Option<LemmaTag> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Some(LemmaTag::S1),
            "s2" => Some(LemmaTag::S2),
            "s3" => Some(LemmaTag::S3),
            "s4" => Some(LemmaTag::S4),
            "s5" => Some(LemmaTag::S5),
            "s6" => Some(LemmaTag::S6),
            "thm1" => Some(LemmaTag::Thm1),
            "thm1prime" | "thm1'" => Some(LemmaTag::Thm1Prime),
            "thm2" => Some(LemmaTag::Thm2),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseResult {
    pub descriptor: String,
    pub seed: u64,
    pub tolerance: f64,
    pub observed: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub tag: LemmaTag,
    pub cases: Vec<CaseResult>,
    pub passed: bool,
}

fn case(descriptor: &str, seed: u64, tolerance: f64, observed: f64) -> CaseResult {
    let passed = observed <= tolerance;
    CaseResult {
        descriptor: descriptor.into(),
        seed,
        tolerance,
        observed,
        passed,
        counterexample: if passed {
            None
        } else {
            Some(format!(
                "{{\"descriptor\":\"{descriptor}\",\"seed\":{seed},\"observed\":{observed}}}"
            ))
        },
    }
}

fn iso_residual(v: &crate::CMatrix) -> f64 {
    max_abs_diff(&(v.adjoint() * v), &identity(v.ncols()))
}

pub fn run_lemma_suite(tag: LemmaTag) -> SuiteReport {
    let cases = match tag {
        LemmaTag::S1 => s1_cases(),
        LemmaTag::S2 => s2_cases(),
        LemmaTag::S3 => s3_cases(),
        LemmaTag::S4 => s4_cases(),
        LemmaTag::S5 => s5_cases(),
        LemmaTag::S6 => s6_cases(),
        LemmaTag::Thm1 => thm1_cases(),
        LemmaTag::Thm1Prime => thm1prime_cases(),
        LemmaTag::Thm2 => thm2_cases(),
    };
    let passed = cases.iter().all(|c| c.passed);
    SuiteReport { tag, cases, passed }
}

/// Nonuniform local isometries: `V_{jk}† V_{jk} = 1`.
fn s1_cases() -> Vec<CaseResult> {
    let tol = 1e-9;
    let mut out = Vec::new();
    // trivial: product chain, every cut
    let mut rng = sampling::rng(100);
    let chain = corpus::random_product_chain(&mut rng, 4, 2);
    let mut worst = 0.0f64;
    for k in 1..4 {
        let caps = compute_caps_nonuniform(&chain, 1, k, None, None, 1e-10).unwrap();
        let v = build_isometry(&chain, 1, k, None, Some(&caps.right), DEFAULT_DIM_CAP).unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
    }
    out.push(case("S1 product chain, all cuts", 100, tol, worst));

    // mcZ at N=4, cuts 1..3 on the canonical chain
    let chain = corpus::mpu_multicontrol_z().chain(4).unwrap();
    let data = choi_canonicalize(&chain, 1e-10).unwrap();
    let mut worst = 0.0f64;
    for k in 1..4 {
        let caps =
            compute_caps_nonuniform(&data.canonical_tensors, 1, k, None, None, 1e-10).unwrap();
        let v = build_isometry(
            &data.canonical_tensors,
            1,
            k,
            None,
            Some(&caps.right),
            DEFAULT_DIM_CAP,
        )
        .unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
    }
    out.push(case("S1 multi-control-Z N=4, cuts 1..3", 0, tol, worst));

    // random product-times-two-site chain, interior segment
    let mut worst = 0.0f64;
    for seed in [7u64, 8] {
        let mut rng = sampling::rng(seed);
        let chain = corpus::random_unitary_chain(&mut rng, 3, 2);
        let caps = compute_caps_nonuniform(&chain, 2, 3, None, None, 1e-10).unwrap();
        let v = build_isometry(&chain, 2, 3, Some(&caps.left), None, DEFAULT_DIM_CAP).unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
    }
    out.push(case(
        "S1 random unitary chains, segment [2..3]",
        7,
        tol,
        worst,
    ));
    out
}

/// LCU existence with `Σ c_i = ‖M‖₁`.
fn s2_cases() -> Vec<CaseResult> {
    let tol = 1e-10;
    let mut out = Vec::new();
    let l = lcu_decompose(&identity(4)).unwrap();
    out.push(case(
        "S2 identity short-circuit",
        0,
        tol,
        max_abs_diff(&l.reconstruct(), &identity(4)),
    ));
    let mut worst = 0.0f64;
    for seed in 0..8u64 {
        let mut rng = sampling::rng(200 + seed);
        let m = sampling::random_cmatrix(&mut rng, 6, 6);
        for d in [
            lcu_decompose(&m).unwrap(),
            lcu_decompose_compact(&m).unwrap(),
        ] {
            worst = worst.max(max_abs_diff(&d.reconstruct(), &m));
            worst = worst.max((d.total() - trace_norm(&m)).abs());
        }
    }
    out.push(case("S2 random 6x6, both expansions", 200, tol, worst));
    let caps = compute_caps_uniform(&corpus::mpu_multicontrol_z(), 1, None, None, 1e-10).unwrap();
    let m = merge_operator(&caps, &caps, 1e-10).unwrap();
    let d = lcu_decompose(&m).unwrap();
    let obs = max_abs_diff(&d.reconstruct(), &m).max((d.total() - trace_norm(&m)).abs());
    out.push(case("S2 multi-control-Z merge operator", 0, tol, obs));
    out
}

/// Reflection properties of R_Φ and R_Ψ.
fn s3_cases() -> Vec<CaseResult> {
    use crate::amplification::*;
    let tol = 1e-10;
    let mut out = Vec::new();

    // trivial: S = full space => R_Ψ = R_Φ
    let mut rng = sampling::rng(300);
    let w = sampling::random_unitary(&mut rng, 2);
    let lcu = crate::lcu::LcuDecomposition {
        unitaries: vec![w.clone(), w],
        coefficients: vec![0.5, 0.5],
    };
    let padding = plan_padding(1.0).unwrap();
    let plan = build_merge_plan(&lcu, &padding, &identity(2), &[0, 1], 2).unwrap();
    out.push(case(
        "S3 full-space subspace: R_Psi = R_Phi",
        300,
        tol,
        max_abs_diff(&plan.r_psi(), &plan.r_phi()),
    ));

    // mcZ merge: R_Φ fixes |Φ>, flips |Φ⊥>; R_Ψ fixes |Ψ>, flips |Ψ⊥>
    let fx = mcz_plan();
    let u = fx.u_matrix();
    let a = fx.ancilla_dim;
    let s_dim = fx.s1_dim * fx.s2_dim;
    let mut rng = sampling::rng(301);
    let coeffs = sampling::random_state(&mut rng, fx.input_positions.len());
    let mut psi = crate::CVector::zeros(s_dim);
    for (k, &pos) in fx.input_positions.iter().enumerate() {
        for r in 0..s_dim {
            psi[r] += fx.vtilde[(r, pos)] * coeffs[k];
        }
    }
    let mut big_psi = crate::CVector::zeros(s_dim * a);
    for s in 0..s_dim {
        big_psi[s * a] = psi[s];
    }
    let out_state = &u * &big_psi;
    let sin_t = 1.0 / fx.padding.padded_c;
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    let mut phi = crate::CVector::zeros(s_dim * a);
    for s in 0..s_dim {
        phi[s * a] = out_state[s * a];
    }
    let phi = phi.scale(1.0 / sin_t);
    let phi_perp = (&out_state - phi.scale(sin_t)).scale(1.0 / cos_t);
    let r_phi = fx.r_phi();
    let mut obs = (&r_phi * &phi - &phi).norm();
    obs = obs.max((&r_phi * &phi_perp + &phi_perp).norm());
    out.push(case(
        "S3(b) R_Phi reflects along Phi (mcZ merge)",
        301,
        tol,
        obs,
    ));

    let r_psi = fx.r_psi();
    let psi_perp = u.adjoint() * (phi.scale(cos_t) - phi_perp.scale(sin_t));
    let mut obs = (&r_psi * &big_psi - &big_psi).norm();
    obs = obs.max((&r_psi * &psi_perp + &psi_perp).norm());
    out.push(case(
        "S3(b) R_Psi reflects along Psi (mcZ merge)",
        301,
        tol,
        obs,
    ));

    // S3(a): <ψ'|<0|Ψ⊥> = 0
    let mut overlap: f64 = 0.0;
    let p_s = fx.subspace_projector();
    for s in 0..s_dim {
        let mut acc = num_complex::Complex64::ZERO;
        for s2 in 0..s_dim {
            acc += p_s[(s, s2)] * psi_perp[s2 * a];
        }
        overlap += acc.norm_sqr();
    }
    out.push(case(
        "S3(a) orthogonality of Psi-perp",
        301,
        tol,
        overlap.sqrt(),
    ));
    out
}

fn mcz_plan() -> crate::amplification::MergePlan {
    use crate::amplification::build_merge_plan;
    let mpu = corpus::mpu_multicontrol_z();
    let caps = compute_caps_uniform(&mpu, 1, None, None, 1e-10).unwrap();
    let chain = mpu.chain(2).unwrap();
    let d = 2usize;
    let dd = 2usize;
    let vl = build_isometry(&chain, 1, 1, None, Some(&caps.right), DEFAULT_DIM_CAP)
        .unwrap()
        .dense_v;
    let vr = build_isometry(&chain, 2, 2, Some(&caps.left), None, DEFAULT_DIM_CAP)
        .unwrap()
        .dense_v;
    let s_dim = dd * dd * d * d;
    let mut v = crate::CMatrix::zeros(s_dim, d * d);
    for i1 in 0..d {
        for m in 0..dd {
            for ml in 0..dd {
                for i2 in 0..d {
                    for j1 in 0..d {
                        for j2 in 0..d {
                            let val = vl[(i1 * dd + m, j1)] * vr[(ml * d + i2, j2)];
                            let row = ((m * dd + ml) * d + i1) * d + i2;
                            v[(row, j1 * d + j2)] = val;
                        }
                    }
                }
            }
        }
    }
    let positions: Vec<usize> = (0..d * d).collect();
    let vtilde = crate::linalg::unitary_completion(&v, &positions).unwrap();
    let m = merge_operator(&caps, &caps, 1e-10).unwrap();
    let lcu = lcu_decompose_compact(&m).unwrap();
    let padding = plan_padding(lcu.total()).unwrap();
    let padded = lcu.pad(&padding.pad_phases);
    build_merge_plan(&padded, &padding, &vtilde, &positions, dd * dd).unwrap()
}

/// Corollary: `G^ℓ U` is deterministic.
fn s4_cases() -> Vec<CaseResult> {
    use crate::amplification::*;
    let tol = 1e-10;
    let mut out = Vec::new();

    // trivial: C = 1 applies M directly
    let mut rng = sampling::rng(400);
    let w = sampling::random_unitary(&mut rng, 4);
    let lcu = lcu_decompose(&w).unwrap();
    let padding = plan_padding(lcu.total()).unwrap();
    let plan = build_merge_plan(&lcu, &padding, &identity(4), &[0, 1, 2, 3], 4).unwrap();
    let psi = sampling::random_state(&mut rng, 4);
    let got = deterministic_merge(&plan, &psi).unwrap();
    let want = &w * &psi;
    let mut obs = 0.0f64;
    for s in 0..4 {
        obs = obs.max((got[s] - want[s]).norm());
    }
    out.push(case("S4 trivial C=1 merge", 400, tol, obs));

    // mcZ N=2 merge determinism: ancilla leakage after G^ℓ U
    let fx = mcz_plan();
    let mut worst = 0.0f64;
    for j in 0..4usize {
        let psi = fx.vtilde.column(j).into_owned();
        let outv = deterministic_merge(&fx, &psi).unwrap();
        let a = fx.ancilla_dim;
        let mut leak = 0.0f64;
        for (idx, amp) in outv.iter().enumerate() {
            if idx % a != 0 {
                leak += amp.norm_sqr();
            }
        }
        worst = worst.max(leak);
    }
    out.push(case("S4 mcZ merge ancilla leakage", 0, tol, worst));

    // padding identity over random C
    let mut worst = 0.0f64;
    let mut rng = sampling::rng(401);
    for _ in 0..200 {
        use rand::Rng;
        let c_total: f64 = rng.gen_range(1.0..50.0);
        let p = plan_padding(c_total).unwrap();
        worst = worst.max((p.success_amplitude() - 1.0).abs());
    }
    out.push(case(
        "S4 padding identity, 200 random C in [1,50]",
        401,
        1e-12,
        worst,
    ));
    out
}

/// Merge depth inequality on counted IR:
/// `T(V_jl) <= ceil(q_k) (2 T_child + c (l - j) + c')` with c = 1, c' = 12.
fn s5_cases() -> Vec<CaseResult> {
    let mut out = Vec::new();
    let opts = CompileOptions::default();
    let check = |descriptor: &str, merges: &[crate::compiler::MergeInfo]| -> CaseResult {
        let mut worst = f64::MIN;
        for m in merges {
            let q = m.c_raw.max(1.0).ceil();
            let bound = q * (2.0 * m.depth_child as f64 + m.span as f64 + 12.0);
            worst = worst.max(m.depth_merged as f64 - bound);
        }
        case(descriptor, 0, 0.0, worst.max(0.0))
    };
    let mut rng = sampling::rng(500);
    let prod = corpus::random_product_chain(&mut rng, 4, 2);
    let res = compile_nonuniform(&prod, &opts).unwrap();
    out.push(check("S5 product chain N=4 (trivial merges)", &res.merges));
    let res = compile_uniform(&corpus::mpu_multicontrol_z(), 8, &opts).unwrap();
    out.push(check("S5 multi-control-Z N=8 merges", &res.merges));
    let mut rng = sampling::rng(501);
    let chain = corpus::random_unitary_chain(&mut rng, 4, 2);
    let res = compile_nonuniform(&chain, &opts).unwrap();
    out.push(check("S5 random unitary chain N=4", &res.merges));
    out
}

/// Uniform local isometries for all n and boundary variants.
fn s6_cases() -> Vec<CaseResult> {
    let tol = 1e-9;
    let mut out = Vec::new();
    let id = corpus::mpu_identity(2);
    let caps = compute_caps_uniform(&id, 1, None, None, 1e-10).unwrap();
    let chain = id.chain(4).unwrap();
    let v = build_isometry(
        &chain,
        2,
        3,
        Some(&caps.left),
        Some(&caps.right),
        DEFAULT_DIM_CAP,
    )
    .unwrap();
    out.push(case(
        "S6 identity bulk segment",
        0,
        tol,
        iso_residual(&v.dense_v),
    ));

    let mpu = corpus::mpu_multicontrol_z();
    let caps = compute_caps_uniform(&mpu, 1, None, None, 1e-10).unwrap();
    let chain = mpu.chain(5).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        let v = build_isometry(
            &chain,
            2,
            1 + n,
            Some(&caps.left),
            Some(&caps.right),
            DEFAULT_DIM_CAP,
        )
        .unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
        let v = build_isometry(&chain, 1, n, None, Some(&caps.right), DEFAULT_DIM_CAP).unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
        let v = build_isometry(
            &chain,
            5 - n + 1,
            5,
            Some(&caps.left),
            None,
            DEFAULT_DIM_CAP,
        )
        .unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
    }
    out.push(case(
        "S6 multi-control-Z n in 1..3, all cap variants",
        0,
        tol,
        worst,
    ));

    let ly = corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let caps = compute_caps_uniform(&ly, 2, None, None, 1e-10).unwrap();
    let chain = ly.chain(3).unwrap();
    let mut worst = 0.0f64;
    for n in 1..=2usize {
        let v = build_isometry(
            &chain,
            2,
            1 + n,
            Some(&caps.left),
            Some(&caps.right),
            usize::MAX,
        )
        .unwrap();
        worst = worst.max(iso_residual(&v.dense_v));
    }
    out.push(case("S6 Lee-Yang blocked caps, n in 1..2", 0, tol, worst));
    out
}

/// Uniform end-to-end exactness at desk scale.
fn thm1_cases() -> Vec<CaseResult> {
    let tol = 1e-9;
    let opts = CompileOptions::default();
    let mut out = Vec::new();
    let res = compile_uniform(&corpus::mpu_identity(2), 4, &opts).unwrap();
    let (metric, _) = verify_against(&res, &identity(16)).unwrap();
    out.push(case("Thm1 identity N=4", 0, tol, metric));
    for n in [2usize, 3] {
        let res = compile_uniform(&corpus::mpu_multicontrol_z(), n, &opts).unwrap();
        let (metric, leak) = verify_against(&res, &corpus::multicontrol_z_dense(n)).unwrap();
        out.push(case(
            &format!("Thm1 multi-control-Z N={n}"),
            0,
            tol,
            metric.max(leak),
        ));
    }
    out
}

/// Depth scaling stays within the N^{1+log2 q} envelope.
fn thm1prime_cases() -> Vec<CaseResult> {
    let opts = CompileOptions::default();
    let mut out = Vec::new();
    let rep = crate::compiler::depth_scaling_report(
        &corpus::mpu_identity(2),
        &[4, 8, 16, 32],
        &opts,
        4.0,
    )
    .unwrap();
    out.push(case(
        "Thm1' identity ratio spread",
        0,
        4.0,
        rep.ratio_spread,
    ));
    let rep = crate::compiler::depth_scaling_report(
        &corpus::mpu_multicontrol_z(),
        &[4, 8, 16, 32],
        &opts,
        4.0,
    )
    .unwrap();
    out.push(case(
        "Thm1' multi-control-Z ratio spread",
        0,
        4.0,
        rep.ratio_spread,
    ));
    let rep = crate::compiler::depth_scaling_report(
        &corpus::mpu_multicontrol_z(),
        &[4, 8, 16],
        &opts,
        4.0,
    )
    .unwrap();
    out.push(case(
        "Thm1' multi-control-Z short list",
        0,
        4.0,
        rep.ratio_spread,
    ));
    out
}

/// Nonuniform end-to-end exactness.
fn thm2_cases() -> Vec<CaseResult> {
    let tol = 1e-8;
    let opts = CompileOptions::default();
    let mut out = Vec::new();
    let mut rng = sampling::rng(700);
    let prod = corpus::random_product_chain(&mut rng, 4, 2);
    let res = compile_nonuniform(&prod, &opts).unwrap();
    let target = contract(&prod, DEFAULT_DIM_CAP).unwrap();
    let (metric, leak) = verify_against(&res, &target).unwrap();
    out.push(case("Thm2 product chain N=4", 700, tol, metric.max(leak)));

    let mut rng = sampling::rng(701);
    let u = sampling::random_unitary(&mut rng, 2);
    let chain = corpus::mpu_perturbed_mcz(3, 1, &u).unwrap();
    let res = compile_nonuniform(&chain, &opts).unwrap();
    let target = contract(&chain, DEFAULT_DIM_CAP).unwrap();
    let (metric, leak) = verify_against(&res, &target).unwrap();
    out.push(case(
        "Thm2 perturbed multi-control-Z N=3",
        701,
        tol,
        metric.max(leak),
    ));

    let mut rng = sampling::rng(702);
    let u = sampling::random_unitary(&mut rng, 4);
    let chain = corpus::mpu_from_two_site_unitary(&u, 2).unwrap();
    let res = compile_nonuniform(&chain, &opts).unwrap();
    let (metric, leak) = verify_against(&res, &u).unwrap();
    out.push(case(
        "Thm2 two-site random unitary (D=4)",
        702,
        tol,
        metric.max(leak),
    ));
    out
}
