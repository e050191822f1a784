//! Generator MPUs with known dense targets, plus the Lee-Yang weak-Hopf
//! construction and its fusion arithmetic.
//!
//! Two coefficients of the Lee-Yang sigma tensor are printed with
//! `zeta^{-2}` in the source material; the duality relations between the two
//! matrix-unit bases force `zeta^{2}` there, and only that choice passes the
//! fusion and unitarity checks below. We use the corrected values.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, identity, is_unitary_matrix, CMatrix, CVector};
use crate::mpu::{block_tensors, boundary_to_open_blocked, MpoChain, MpoTensor, UniformMpu};
use crate::sampling;

/// Identity MPU on qudits of dimension `d` (bond dimension 1).
pub fn mpu_identity(d: usize) -> UniformMpu {
    assert!(d >= 2);
    let mut t = MpoTensor::zeros(d, d, 1, 1);
    for i in 0..d {
        t.set(i, i, 0, 0, c(1.0, 0.0));
    }
    UniformMpu::open(
        t,
        CVector::from_vec(vec![c(1.0, 0.0)]),
        CVector::from_vec(vec![c(1.0, 0.0)]),
    )
    .expect("identity mpu")
}

/// Product chain of single-site unitaries (all bond dimensions 1).
pub fn mpu_product(units: &[CMatrix]) -> Result<MpoChain> {
    if units.is_empty() {
        return Err(Error::Shape("mpu_product: empty list".into()));
    }
    let mut tensors = Vec::with_capacity(units.len());
    for u in units {
        if !is_unitary_matrix(u, 1e-10) {
            return Err(Error::Validation("mpu_product: non-unitary factor".into()));
        }
        let d = u.nrows();
        let mut t = MpoTensor::zeros(d, d, 1, 1);
        for i in 0..d {
            for j in 0..d {
                t.set(i, j, 0, 0, u[(i, j)]);
            }
        }
        tensors.push(t);
    }
    MpoChain::new(
        tensors,
        CVector::from_vec(vec![c(1.0, 0.0)]),
        CVector::from_vec(vec![c(1.0, 0.0)]),
    )
}

/// Multi-control Z: `U_N = 1 - 2 (|0><0|)^{⊗N}` as a uniform-bulk MPU with
/// `d = 2`, `D = 2`, `A^{ij} = diag(δ_ij, δ_ij δ_{i0})`, `l = (1, -2)`,
/// `r = (1, 1)`.
pub fn mpu_multicontrol_z() -> UniformMpu {
    let mut t = MpoTensor::zeros(2, 2, 2, 2);
    t.set(0, 0, 0, 0, c(1.0, 0.0));
    t.set(1, 1, 0, 0, c(1.0, 0.0));
    t.set(0, 0, 1, 1, c(1.0, 0.0));
    let l = CVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]);
    let r = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    UniformMpu::open(t, l, r).expect("mcz mpu")
}

/// Multi-control Z padded with an unreachable third bond state: contraction
/// is unchanged but the capped tensors have rank 2 < 3, so the bond-rank
/// check must reject it.
pub fn mpu_multicontrol_z_redundant() -> UniformMpu {
    let base = mpu_multicontrol_z();
    let mut t = MpoTensor::zeros(2, 2, 3, 3);
    for i in 0..2 {
        for j in 0..2 {
            for m in 0..2 {
                for n in 0..2 {
                    t.set(i, j, m, n, base.bulk.get(i, j, m, n));
                }
            }
            t.set(i, j, 2, 2, if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        }
    }
    let l = CVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 0.0)]);
    let r = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    UniformMpu::open(t, l, r).expect("redundant mcz")
}

/// Dense target `1 - 2 |0..0><0..0|` for checking the multi-control Z.
pub fn multicontrol_z_dense(n: usize) -> CMatrix {
    let dim = 1usize << n;
    let mut m = identity(dim);
    m[(0, 0)] = c(-1.0, 0.0);
    m
}

// ---------------------------------------------------------------------------
// Lee-Yang weak Hopf algebra
// ---------------------------------------------------------------------------

/// `zeta^2 = (sqrt(5) - 1)/2`; the defining relation is `zeta^4 + zeta^2 = 1`.
pub fn zeta() -> f64 {
    (((5.0f64).sqrt() - 1.0) / 2.0).sqrt()
}

/// Element `x = coeff_e τ_e + coeff_σ τ_σ` of the fusion algebra with
/// `τ_e² = τ_e`, `τ_e τ_σ = τ_σ τ_e = τ_σ`, `τ_σ² = τ_e + τ_σ` and both
/// generators self-adjoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionElement {
    pub coeff_e: Complex64,
    pub coeff_sigma: Complex64,
}

impl FusionElement {
    pub fn new(coeff_e: Complex64, coeff_sigma: Complex64) -> Self {
        Self {
            coeff_e,
            coeff_sigma,
        }
    }

    /// The identity element of the fusion algebra (τ_e).
    pub fn one() -> Self {
        Self::new(c(1.0, 0.0), c(0.0, 0.0))
    }

    pub fn mul(&self, other: &FusionElement) -> FusionElement {
        // (a τ_e + b τ_σ)(c τ_e + d τ_σ) = (ac + bd) τ_e + (ad + bc + bd) τ_σ
        let (a, b) = (self.coeff_e, self.coeff_sigma);
        let (cc, d) = (other.coeff_e, other.coeff_sigma);
        FusionElement::new(a * cc + b * d, a * d + b * cc + b * d)
    }

    pub fn star(&self) -> FusionElement {
        FusionElement::new(self.coeff_e.conj(), self.coeff_sigma.conj())
    }

    pub fn approx_eq(&self, other: &FusionElement, tol: f64) -> bool {
        (self.coeff_e - other.coeff_e).norm() <= tol
            && (self.coeff_sigma - other.coeff_sigma).norm() <= tol
    }

    /// The projector `p = (ζ² τ_e + τ_σ)/√5`.
    pub fn projector_p() -> Self {
        let z2 = zeta() * zeta();
        let s5 = 5.0f64.sqrt();
        Self::new(c(z2 / s5, 0.0), c(1.0 / s5, 0.0))
    }

    /// The complementary projector `q = τ_e - p`.
    pub fn projector_q() -> Self {
        let p = Self::projector_p();
        Self::new(c(1.0, 0.0) - p.coeff_e, -p.coeff_sigma)
    }

    /// The unitary element `u = e^{iα} p + e^{iβ} q`.
    pub fn unitary(alpha: f64, beta: f64) -> Self {
        let ea = Complex64::from_polar(1.0, alpha);
        let eb = Complex64::from_polar(1.0, beta);
        let p = Self::projector_p();
        let q = Self::projector_q();
        Self::new(
            ea * p.coeff_e + eb * q.coeff_e,
            ea * p.coeff_sigma + eb * q.coeff_sigma,
        )
    }
}

fn ket_bra(i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(5, 5);
    m[(i - 1, j - 1)] = c(1.0, 0.0);
    m
}

/// The e-sector MPO tensor (physical dimension 5, bond dimension 2).
pub fn lee_yang_tensor_e() -> MpoTensor {
    let mut t = MpoTensor::zeros(5, 5, 2, 2);
    let put = |t: &mut MpoTensor, m: usize, n: usize, op: CMatrix| {
        for i in 0..5 {
            for j in 0..5 {
                if op[(i, j)] != Complex64::ZERO {
                    t.set(i, j, m, n, op[(i, j)]);
                }
            }
        }
    };
    put(&mut t, 0, 0, ket_bra(1, 1));
    put(&mut t, 1, 1, ket_bra(2, 2) + ket_bra(5, 5));
    put(&mut t, 0, 1, ket_bra(3, 3));
    put(&mut t, 1, 0, ket_bra(4, 4));
    t
}

/// The σ-sector MPO tensor (physical dimension 5, bond dimension 3).
pub fn lee_yang_tensor_sigma() -> MpoTensor {
    let z = zeta();
    let z2 = z * z;
    let mut t = MpoTensor::zeros(5, 5, 3, 3);
    let put = |t: &mut MpoTensor, m: usize, n: usize, op: CMatrix| {
        for i in 0..5 {
            for j in 0..5 {
                if op[(i, j)] != Complex64::ZERO {
                    t.set(i, j, m, n, op[(i, j)]);
                }
            }
        }
    };
    put(&mut t, 0, 0, ket_bra(1, 2));
    put(&mut t, 1, 1, ket_bra(2, 1));
    put(&mut t, 0, 1, ket_bra(3, 4));
    put(&mut t, 1, 0, ket_bra(4, 3).scale(z2)); // corrected from ζ^{-2}
    put(&mut t, 0, 2, ket_bra(3, 5));
    put(&mut t, 2, 0, ket_bra(4, 5).scale(z));
    put(&mut t, 1, 2, ket_bra(5, 3).scale(z));
    put(&mut t, 2, 1, ket_bra(5, 4));
    put(&mut t, 2, 2, ket_bra(2, 2) - ket_bra(5, 5).scale(z2)); // corrected from ζ^{-2}
    t
}

/// Lee-Yang MPU in traced (A, b) form with `d = 5`, `D = 6`:
/// `A = δ ⊕ A_e ⊕ A_σ`, `b = diag(1, (u_e-1) 1_2, u_σ 1_3)`.
#[derive(Clone, Debug)]
pub struct LeeYangMpu {
    pub alpha: f64,
    pub beta: f64,
    pub u_e: Complex64,
    pub u_sigma: Complex64,
    pub mpu: UniformMpu,
}

/// Coefficients of `u = e^{iα} p + e^{iβ} q` over the cocentral basis:
/// `u_e = (ζ² e^{iα} + (√5 - ζ²) e^{iβ})/√5`, `u_σ = (e^{iα} - e^{iβ})/√5`.
pub fn lee_yang_coeffs(alpha: f64, beta: f64) -> (Complex64, Complex64) {
    let u = FusionElement::unitary(alpha, beta);
    (u.coeff_e, u.coeff_sigma)
}

pub fn lee_yang_mpu(alpha: f64, beta: f64) -> LeeYangMpu {
    let (u_e, u_sigma) = lee_yang_coeffs(alpha, beta);
    let ae = lee_yang_tensor_e();
    let asig = lee_yang_tensor_sigma();
    let mut bulk = MpoTensor::zeros(5, 5, 6, 6);
    for i in 0..5 {
        bulk.set(i, i, 0, 0, c(1.0, 0.0));
        for j in 0..5 {
            for m in 0..2 {
                for n in 0..2 {
                    bulk.set(i, j, 1 + m, 1 + n, ae.get(i, j, m, n));
                }
            }
            for m in 0..3 {
                for n in 0..3 {
                    bulk.set(i, j, 3 + m, 3 + n, asig.get(i, j, m, n));
                }
            }
        }
    }
    let mut b = CMatrix::zeros(6, 6);
    b[(0, 0)] = c(1.0, 0.0);
    for k in 1..3 {
        b[(k, k)] = u_e - c(1.0, 0.0);
    }
    for k in 3..6 {
        b[(k, k)] = u_sigma;
    }
    LeeYangMpu {
        alpha,
        beta,
        u_e,
        u_sigma,
        mpu: UniformMpu::traced(bulk, b).expect("lee-yang mpu"),
    }
}

/// Block-wise open-boundary form of the Lee-Yang MPU (bond dimension
/// `1 + 4 + 9 = 14`), the form the uniform compiler consumes.
pub fn lee_yang_open(alpha: f64, beta: f64) -> Result<UniformMpu> {
    let ly = lee_yang_mpu(alpha, beta);
    let mut delta = MpoTensor::zeros(5, 5, 1, 1);
    for i in 0..5 {
        delta.set(i, i, 0, 0, c(1.0, 0.0));
    }
    let b1 = CMatrix::from_row_slice(1, 1, &[c(1.0, 0.0)]);
    let b2 = identity(2).scale_mut_owned(ly.u_e - c(1.0, 0.0));
    let b3 = identity(3).scale_mut_owned(ly.u_sigma);
    boundary_to_open_blocked(
        &[delta, lee_yang_tensor_e(), lee_yang_tensor_sigma()],
        &[b1, b2, b3],
    )
}

trait ScaleOwned {
    fn scale_mut_owned(self, s: Complex64) -> CMatrix;
}
impl ScaleOwned for CMatrix {
    fn scale_mut_owned(self, s: Complex64) -> CMatrix {
        self.map(|v| v * s)
    }
}

/// Periodic-boundary MPO `O_a` contraction (boundary operator = identity).
pub fn lee_yang_fusion_mpo(tensor: &MpoTensor, n: usize) -> Result<CMatrix> {
    let mpu = UniformMpu::traced(tensor.clone(), identity(tensor.d_left))?;
    mpu.contract_traced(n, crate::mpu::DEFAULT_DIM_CAP)
}

/// Residual of the fusion identity `O_σ² = O_e + O_σ` at size `n`.
pub fn lee_yang_fusion_mpo_check(n: usize) -> Result<f64> {
    let oe = lee_yang_fusion_mpo(&lee_yang_tensor_e(), n)?;
    let os = lee_yang_fusion_mpo(&lee_yang_tensor_sigma(), n)?;
    let lhs = &os * &os;
    let rhs = &oe + &os;
    Ok(crate::linalg::max_abs_diff(&lhs, &rhs))
}

/// Residual of `O_e² = O_e` at size `n`.
pub fn lee_yang_projector_check(n: usize) -> Result<f64> {
    let oe = lee_yang_fusion_mpo(&lee_yang_tensor_e(), n)?;
    Ok(crate::linalg::max_abs_diff(&(&oe * &oe), &oe))
}

// ---------------------------------------------------------------------------
// Derived generators for the nonuniform path
// ---------------------------------------------------------------------------

/// Exact N=2 chain of a two-site unitary via SVD across the cut.
pub fn mpu_from_two_site_unitary(u: &CMatrix, d: usize) -> Result<MpoChain> {
    if u.nrows() != d * d || !u.is_square() {
        return Err(Error::Shape("expected a d^2 x d^2 matrix".into()));
    }
    if !is_unitary_matrix(u, 1e-10) {
        return Err(Error::Validation(
            "mpu_from_two_site_unitary: input not unitary".into(),
        ));
    }
    // reshape u[(i1 i2),(j1 j2)] -> T[(i1 j1),(i2 j2)] and SVD
    let mut t = CMatrix::zeros(d * d, d * d);
    for i1 in 0..d {
        for i2 in 0..d {
            for j1 in 0..d {
                for j2 in 0..d {
                    t[(i1 * d + j1, i2 * d + j2)] = u[(i1 * d + i2, j1 * d + j2)];
                }
            }
        }
    }
    let dec = crate::linalg::svd(&t)?;
    let smax = dec.singular_values[0];
    let rank = dec
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * smax)
        .count()
        .max(1);
    let mut t1 = MpoTensor::zeros(d, d, 1, rank);
    let mut t2 = MpoTensor::zeros(d, d, rank, 1);
    for a in 0..rank {
        let root = dec.singular_values[a].sqrt();
        for i in 0..d {
            for j in 0..d {
                t1.set(i, j, 0, a, dec.u[(i * d + j, a)] * c(root, 0.0));
                t2.set(i, j, a, 0, dec.v[(i * d + j, a)].conj() * c(root, 0.0));
            }
        }
    }
    MpoChain::new(
        vec![t1, t2],
        CVector::from_vec(vec![c(1.0, 0.0)]),
        CVector::from_vec(vec![c(1.0, 0.0)]),
    )
}

/// Multi-control Z chain with one site conjugated by a single-site unitary,
/// i.e. `(1 ⊗ .. u .. ⊗ 1) U_mcz (1 ⊗ .. u† .. ⊗ 1)` — unitary, nonuniform.
pub fn mpu_perturbed_mcz(n: usize, site: usize, u: &CMatrix) -> Result<MpoChain> {
    if site >= n {
        return Err(Error::Shape("site index out of range".into()));
    }
    let mcz = mpu_multicontrol_z();
    let mut tensors = vec![mcz.bulk.clone(); n];
    tensors[site] = tensors[site].conjugate_physical(u);
    let (l, r) = match &mcz.boundary {
        crate::mpu::UniformBoundary::Vectors { l, r } => (l.clone(), r.clone()),
        _ => unreachable!(),
    };
    MpoChain::new(tensors, l, r)
}

/// Site-wise product of two chains: contraction equals `U_a * U_b`
/// (a applied after b). Bond dimensions multiply.
pub fn compose_chains(a: &MpoChain, b: &MpoChain) -> Result<MpoChain> {
    if a.len() != b.len() {
        return Err(Error::Shape("compose_chains: length mismatch".into()));
    }
    let mut tensors = Vec::with_capacity(a.len());
    for (ta, tb) in a.tensors.iter().zip(&b.tensors) {
        if ta.d_in != tb.d_out {
            return Err(Error::Shape(
                "compose_chains: physical dims mismatch".into(),
            ));
        }
        let mut t = MpoTensor::zeros(
            ta.d_out,
            tb.d_in,
            ta.d_left * tb.d_left,
            ta.d_right * tb.d_right,
        );
        for i in 0..ta.d_out {
            for j in 0..tb.d_in {
                for s in 0..ta.d_in {
                    for m1 in 0..ta.d_left {
                        for n1 in 0..ta.d_right {
                            let va = ta.get(i, s, m1, n1);
                            if va == Complex64::ZERO {
                                continue;
                            }
                            for m2 in 0..tb.d_left {
                                for n2 in 0..tb.d_right {
                                    let vb = tb.get(s, j, m2, n2);
                                    if vb == Complex64::ZERO {
                                        continue;
                                    }
                                    let m = m1 * tb.d_left + m2;
                                    let nn = n1 * tb.d_right + n2;
                                    let prev = t.get(i, j, m, nn);
                                    t.set(i, j, m, nn, prev + va * vb);
                                }
                            }
                        }
                    }
                }
            }
        }
        tensors.push(t);
    }
    let mut l = CVector::zeros(a.left_boundary.len() * b.left_boundary.len());
    for m1 in 0..a.left_boundary.len() {
        for m2 in 0..b.left_boundary.len() {
            l[m1 * b.left_boundary.len() + m2] = a.left_boundary[m1] * b.left_boundary[m2];
        }
    }
    let mut r = CVector::zeros(a.right_boundary.len() * b.right_boundary.len());
    for n1 in 0..a.right_boundary.len() {
        for n2 in 0..b.right_boundary.len() {
            r[n1 * b.right_boundary.len() + n2] = a.right_boundary[n1] * b.right_boundary[n2];
        }
    }
    MpoChain::new(tensors, l, r)
}

/// Random product chain of `n` qudit unitaries (dimension `d`).
pub fn random_product_chain(rng: &mut ChaCha8Rng, n: usize, d: usize) -> MpoChain {
    let units: Vec<CMatrix> = (0..n).map(|_| sampling::random_unitary(rng, d)).collect();
    mpu_product(&units).expect("random product chain")
}

/// Random nonuniform unitary chain: a product chain composed with exact
/// two-site unitary blocks, so unitarity is exact by construction.
pub fn random_unitary_chain(rng: &mut ChaCha8Rng, n: usize, d: usize) -> MpoChain {
    let mut chain = random_product_chain(rng, n, d);
    if n >= 2 {
        let pos = if n == 2 { 0 } else { rng_usize(rng, n - 1) };
        let u2 = sampling::random_unitary(rng, d * d);
        let two = mpu_from_two_site_unitary(&u2, d).expect("two-site block");
        let mut blocks: Vec<MpoTensor> = Vec::with_capacity(n);
        for (k, t) in chain.tensors.iter().enumerate() {
            if k == pos {
                blocks.push(two.tensors[0].clone());
            } else if k == pos + 1 {
                blocks.push(two.tensors[1].clone());
            } else {
                blocks.push(identity_site(t.d_out));
            }
        }
        let lb = CVector::from_vec(vec![c(1.0, 0.0)]);
        let rb = CVector::from_vec(vec![c(1.0, 0.0)]);
        let overlay = MpoChain::new(blocks, lb, rb).expect("overlay chain");
        chain = compose_chains(&overlay, &chain).expect("compose");
    }
    chain
}

fn identity_site(d: usize) -> MpoTensor {
    let mut t = MpoTensor::zeros(d, d, 1, 1);
    for i in 0..d {
        t.set(i, i, 0, 0, c(1.0, 0.0));
    }
    t
}

fn rng_usize(rng: &mut ChaCha8Rng, n: usize) -> usize {
    use rand::Rng;
    rng.gen_range(0..n)
}

/// Uniform `m`-fold blocked bulk tensor (physical dimension `d^m`).
pub fn blocked_bulk(t: &MpoTensor, m: usize) -> MpoTensor {
    let mut out = t.clone();
    for _ in 1..m {
        out = block_tensors(&out, t);
    }
    out
}
