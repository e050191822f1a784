use proptest::prelude::*;

use crate::corpus;
use crate::isometry::*;
use crate::linalg::{identity, max_abs_diff, numerical_rank, trace_norm, unitarity_residual};
use crate::mpu::{choi_canonicalize, DEFAULT_DIM_CAP};
use crate::sampling;

const TOL: f64 = 1e-10;
const CAP: usize = DEFAULT_DIM_CAP;

fn iso_residual(v: &crate::CMatrix) -> f64 {
    max_abs_diff(&(v.adjoint() * v), &identity(v.ncols()))
}

#[test]
fn identity_caps_are_scalar_one() {
    let mpu = corpus::mpu_identity(2);
    let caps = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    assert_eq!(caps.bond_dims(), (1, 1));
    assert!((caps.left[(0, 0)].re - 1.0).abs() < 1e-12);
    assert!((caps.right[(0, 0)].re - 1.0).abs() < 1e-12);
    assert!(caps.full_rank);
}

#[test]
fn mcz_caps_full_rank_and_isometric() {
    let mpu = corpus::mpu_multicontrol_z();
    let caps = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    assert!(caps.full_rank);
    let chain = mpu.chain(4).unwrap();
    for n in 1..=3 {
        let block =
            build_isometry(&chain, 2, 1 + n, Some(&caps.left), Some(&caps.right), CAP).unwrap();
        assert!(iso_residual(&block.dense_v) < 1e-12, "n={n}");
    }
    // boundary variants
    let b = build_isometry(&chain, 1, 1, None, Some(&caps.right), CAP).unwrap();
    assert!(iso_residual(&b.dense_v) < 1e-12);
    let b = build_isometry(&chain, 4, 4, Some(&caps.left), None, CAP).unwrap();
    assert!(iso_residual(&b.dense_v) < 1e-12);
}

#[test]
fn redundant_bond_mpu_has_rank_deficient_caps() {
    let mpu = corpus::mpu_multicontrol_z_redundant();
    let caps = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    assert!(!caps.full_rank);
    assert!(caps.right_inverse_for_merge(TOL).is_err());
}

#[test]
fn lee_yang_caps_need_blocking_two() {
    let mpu = corpus::lee_yang_open(std::f64::consts::FRAC_PI_2, 0.0).unwrap();
    let caps1 = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    assert!(!caps1.full_rank);
    let caps2 = compute_caps_uniform(&mpu, 2, None, None, TOL).unwrap();
    assert!(caps2.full_rank);
    let chain = mpu.chain(3).unwrap();
    let block = build_isometry(&chain, 2, 2, Some(&caps2.left), Some(&caps2.right), CAP).unwrap();
    assert!(iso_residual(&block.dense_v) < 1e-9);
    let block = build_isometry(&chain, 1, 1, None, Some(&caps2.right), CAP).unwrap();
    assert!(iso_residual(&block.dense_v) < 1e-9);
}

#[test]
fn conditioning_uniform_matches_merge_trace_norm() {
    let mpu = corpus::mpu_multicontrol_z();
    let caps = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    let q = conditioning_uniform(&caps, TOL).unwrap();
    assert!((q - 2.0).abs() < 1e-10, "mcz q_unif = {q}");
    let m = crate::lcu::merge_operator(&caps, &caps, TOL).unwrap();
    assert!((q - trace_norm(&m)).abs() < 1e-10);

    // scalar caps give q = 1; identity caps of dim D give q = sqrt(tr 1) = sqrt(D),
    // matching the trace norm of |00><vec(1)|
    let id_caps = CapPair {
        left: identity(3),
        right: identity(3),
        full_rank: true,
        source: CapSource::Uniform { blocking: 1 },
    };
    assert!((conditioning_uniform(&id_caps, TOL).unwrap() - 3.0f64.sqrt()).abs() < 1e-12);
    let scalar_caps = CapPair {
        left: identity(1),
        right: identity(1),
        full_rank: true,
        source: CapSource::Uniform { blocking: 1 },
    };
    assert!((conditioning_uniform(&scalar_caps, TOL).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn nonuniform_caps_on_canonical_chain_match_schmidt_spectrum() {
    let chain = corpus::mpu_multicontrol_z().chain(4).unwrap();
    let data = choi_canonicalize(&chain, TOL).unwrap();
    for k in 1..4usize {
        let caps = compute_caps_nonuniform(&data.canonical_tensors, 1, k, None, None, TOL).unwrap();
        // L_k = 1 up to unitary gauge (here: exactly, left-canonical sweep)
        assert!(
            max_abs_diff(&caps.left, &identity(caps.left.nrows())) < 1e-9,
            "cut {k}"
        );
        // R_k spectrum = Schmidt values
        let (vals, _) = crate::linalg::hermitian_eigen(&caps.right);
        let s = &data.per_cut[k - 1];
        assert_eq!(vals.len(), s.len());
        for (a, b) in vals.iter().zip(s.iter()) {
            assert!((a - b).abs() < 1e-9, "cut {k}: {a} vs {b}");
        }
    }
}

#[test]
fn nonuniform_isometry_on_product_times_cz_chain() {
    let mut rng = sampling::rng(23);
    let chain = corpus::random_unitary_chain(&mut rng, 3, 2);
    let data = choi_canonicalize(&chain, TOL).unwrap();
    let canon = &data.canonical_tensors;
    for k in 1..3usize {
        let caps = compute_caps_nonuniform(canon, 1, k, None, None, TOL).unwrap();
        let block = build_isometry(canon, 1, k, None, Some(&caps.right), CAP).unwrap();
        assert!(iso_residual(&block.dense_v) < 1e-10, "cut {k}");
    }
    // two-site interior block with caps on both sides
    let caps_l = compute_caps_nonuniform(canon, 2, 3, None, None, TOL).unwrap();
    let block = build_isometry(canon, 2, 3, Some(&caps_l.left), None, CAP).unwrap();
    assert!(iso_residual(&block.dense_v) < 1e-10);
}

#[test]
fn product_chain_conditioning_is_one() {
    let mut rng = sampling::rng(5);
    let chain = corpus::random_product_chain(&mut rng, 4, 2);
    let data = choi_canonicalize(&chain, TOL).unwrap();
    let cond = conditioning_nonuniform(&data);
    assert!((cond.q - 1.0).abs() < 1e-12);
    let id = corpus::mpu_identity(2).chain(3).unwrap();
    let cond = conditioning_nonuniform(&choi_canonicalize(&id, TOL).unwrap());
    assert!((cond.q - 1.0).abs() < 1e-12);
}

#[test]
fn mcz_nonuniform_conditioning_within_bound() {
    let chain = corpus::mpu_multicontrol_z().chain(4).unwrap();
    let data = choi_canonicalize(&chain, TOL).unwrap();
    let cond = conditioning_nonuniform(&data);
    for (k, qk) in cond.per_cut.iter().enumerate() {
        let dk = data.per_cut[k].len() as f64;
        assert!(*qk <= dk.sqrt() / data.s_min + 1e-10);
    }
    assert!(cond.q <= cond.crude_bound + 1e-10);
}

#[test]
fn mixed_sigma_maximizes_cap_rank() {
    // rank(L(σ)) <= rank(L(1)) on random draws
    let mpu = corpus::mpu_multicontrol_z();
    let mixed = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    let rank_mixed = numerical_rank(&mixed.left, TOL);
    let mut rng = sampling::rng(77);
    for _ in 0..20 {
        let sigma = sampling::random_density(&mut rng, 2);
        let tau = sampling::random_density(&mut rng, 2);
        let caps = compute_caps_uniform(&mpu, 1, Some(&sigma), Some(&tau), TOL).unwrap();
        assert!(numerical_rank(&caps.left, TOL) <= rank_mixed);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// q_k is gauge invariant: random bond gauges leave the per-cut
    /// conditioning (computed through canonical form) unchanged.
    #[test]
    fn qk_gauge_invariance(seed in 0u64..100) {
        let mut rng = sampling::rng(seed);
        let chain = corpus::random_unitary_chain(&mut rng, 3, 2);
        let data = choi_canonicalize(&chain, TOL).unwrap();
        let q0 = conditioning_nonuniform(&data);

        let mut gauged = chain.clone();
        let x = sampling::random_invertible(&mut rng, gauged.tensors[0].d_right);
        let xi = x.clone().try_inverse().unwrap();
        gauged.tensors[0] = gauged.tensors[0].gauge(&identity(gauged.tensors[0].d_left), &x);
        gauged.tensors[1] = gauged.tensors[1].gauge(&xi, &identity(gauged.tensors[1].d_right));
        let data_g = choi_canonicalize(&gauged, TOL).unwrap();
        let q1 = conditioning_nonuniform(&data_g);
        prop_assert_eq!(q0.per_cut.len(), q1.per_cut.len());
        for (a, b) in q0.per_cut.iter().zip(&q1.per_cut) {
            prop_assert!((a - b).abs() < 1e-10, "q_k {} vs {}", a, b);
        }
    }

    /// Isometry property for random σ, τ choices (uniform case, mcZ).
    #[test]
    fn uniform_isometry_any_density(seed in 0u64..100, n in 1usize..4) {
        let mut rng = sampling::rng(seed);
        let mpu = corpus::mpu_multicontrol_z();
        let sigma = sampling::random_density(&mut rng, 2);
        let tau = sampling::random_density(&mut rng, 2);
        let caps = compute_caps_uniform(&mpu, 1, Some(&sigma), Some(&tau), TOL).unwrap();
        let chain = mpu.chain(n + 2).unwrap();
        let block = build_isometry(&chain, 2, 1 + n, Some(&caps.left), Some(&caps.right), CAP).unwrap();
        prop_assert!(iso_residual(&block.dense_v) < 1e-9);
    }
}

#[test]
fn unitary_completion_of_leaf_is_unitary() {
    let mpu = corpus::mpu_multicontrol_z();
    let caps = compute_caps_uniform(&mpu, 1, None, None, TOL).unwrap();
    let chain = mpu.chain(3).unwrap();
    let block = build_isometry(&chain, 2, 2, Some(&caps.left), Some(&caps.right), CAP).unwrap();
    // columns indexed by (mL=0, j, mR=0): positions j * dR with dR = 2
    let positions: Vec<usize> = (0..2).map(|j| j * 2).collect();
    let u = crate::linalg::unitary_completion(&block.dense_v, &positions).unwrap();
    assert!(unitarity_residual(&u) < 1e-12);
}
