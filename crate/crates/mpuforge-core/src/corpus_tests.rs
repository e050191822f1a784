use proptest::prelude::*;

use crate::corpus::*;
use crate::linalg::{c, max_abs_diff};
use crate::mpu::{contract, is_unitary, DEFAULT_DIM_CAP};

#[test]
fn zeta_defining_relation() {
    let z = zeta();
    assert!((z.powi(4) + z.powi(2) - 1.0).abs() < 1e-15);
}

#[test]
fn fusion_rules_hold() {
    let e = FusionElement::new(c(1.0, 0.0), c(0.0, 0.0));
    let s = FusionElement::new(c(0.0, 0.0), c(1.0, 0.0));
    assert!(e.mul(&e).approx_eq(&e, 1e-15));
    assert!(e.mul(&s).approx_eq(&s, 1e-15));
    // τ_σ² = τ_e + τ_σ
    assert!(s
        .mul(&s)
        .approx_eq(&FusionElement::new(c(1.0, 0.0), c(1.0, 0.0)), 1e-15));
}

#[test]
fn projector_p_is_idempotent() {
    let p = FusionElement::projector_p();
    assert!(p.mul(&p).approx_eq(&p, 1e-15));
    assert!(p.star().approx_eq(&p, 1e-15));
    let q = FusionElement::projector_q();
    assert!(q.mul(&q).approx_eq(&q, 1e-15));
    let zero = FusionElement::new(c(0.0, 0.0), c(0.0, 0.0));
    assert!(p.mul(&q).approx_eq(&zero, 1e-15));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `u* u = u u* = τ_e` for the unitary element at any phases.
    #[test]
    fn unitary_element_property(alpha in -3.2f64..3.2, beta in -3.2f64..3.2) {
        let u = FusionElement::unitary(alpha, beta);
        let lhs = u.star().mul(&u);
        let rhs = u.mul(&u.star());
        prop_assert!(lhs.approx_eq(&FusionElement::one(), 1e-12));
        prop_assert!(rhs.approx_eq(&FusionElement::one(), 1e-12));
    }

    /// Lee-Yang MPU is unitary at N=2 for random phase pairs.
    #[test]
    fn lee_yang_unitary_random_phases(alpha in -3.2f64..3.2, beta in -3.2f64..3.2) {
        let open = lee_yang_open(alpha, beta).unwrap();
        let (ok, res) = is_unitary(&open.chain(2).unwrap(), 1e-9, DEFAULT_DIM_CAP).unwrap();
        prop_assert!(ok, "residual {res}");
    }
}

#[test]
fn equal_phases_give_scalar_mpu() {
    // α = β: u_σ = 0, u_e = e^{iα}, so U = e^{iα}-weighted blend that stays unitary
    let (ue, us) = lee_yang_coeffs(0.7, 0.7);
    assert!(us.norm() < 1e-15);
    assert!((ue - num_complex::Complex64::from_polar(1.0, 0.7)).norm() < 1e-15);
    let open = lee_yang_open(0.7, 0.7).unwrap();
    let (ok, res) = is_unitary(&open.chain(2).unwrap(), 1e-9, DEFAULT_DIM_CAP).unwrap();
    assert!(ok, "residual {res}");
}

#[test]
fn fusion_mpo_identities() {
    for n in [2usize, 3] {
        assert!(lee_yang_fusion_mpo_check(n).unwrap() < 1e-9, "N={n}");
    }
    assert!(lee_yang_projector_check(2).unwrap() < 1e-9);
}

#[test]
fn fusion_projector_closed_form() {
    // p = (ζ² τ_e + τ_σ)/√5 must square to itself through the ζ⁴+ζ²=1 identity
    let z2 = zeta() * zeta();
    let s5 = 5.0f64.sqrt();
    let p = FusionElement::new(c(z2 / s5, 0.0), c(1.0 / s5, 0.0));
    assert!(p.mul(&p).approx_eq(&p, 1e-14));
}

#[test]
fn perturbed_mcz_is_unitary_and_matches_dense() {
    let mut rng = crate::sampling::rng(17);
    let u = crate::sampling::random_unitary(&mut rng, 2);
    let chain = mpu_perturbed_mcz(3, 1, &u).unwrap();
    let got = contract(&chain, DEFAULT_DIM_CAP).unwrap();
    // dense oracle: (1 ⊗ u ⊗ 1) U_mcz (1 ⊗ u† ⊗ 1)
    let mcz = multicontrol_z_dense(3);
    let big_u = crate::linalg::kron(
        &crate::linalg::kron(&crate::linalg::identity(2), &u),
        &crate::linalg::identity(2),
    );
    let want = &big_u * mcz * big_u.adjoint();
    assert!(max_abs_diff(&got, &want) < 1e-12);
}

#[test]
fn compose_chains_matches_operator_product() {
    let mut rng = crate::sampling::rng(31);
    let a = random_product_chain(&mut rng, 3, 2);
    let b = mpu_multicontrol_z().chain(3).unwrap();
    let composed = compose_chains(&a, &b).unwrap();
    let ua = contract(&a, DEFAULT_DIM_CAP).unwrap();
    let ub = contract(&b, DEFAULT_DIM_CAP).unwrap();
    let uc = contract(&composed, DEFAULT_DIM_CAP).unwrap();
    assert!(max_abs_diff(&uc, &(&ua * &ub)) < 1e-12);
}
