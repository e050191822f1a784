//! Dense reference implementation of the deterministic merge unitary
//! `G^ℓ U`: prepare/select LCU plus the two subspace reflections. Everything
//! here materializes matrices, so it is meant for desk-scale dimensions; the
//! compiler emits the same construction as circuit gates instead.
//!
//! Space layout: the system is `S = S₁ ⊗ S₂` with the merge operator (LCU)
//! acting on `S₁` (merged bond legs plus pad qubits) and the rest of the
//! blocks on `S₂`; the LCU ancilla `A` is last, so the full space is
//! `S₁ ⊗ S₂ ⊗ A`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lcu::{LcuDecomposition, PaddingPlan};
use crate::linalg::{self, c, identity, kron, CMatrix, CVector};

/// Unitary with `B|0> = Σ sqrt(c_i / C) |i>` via a Householder reflection.
pub fn prepare_unitary(coefficients: &[f64]) -> Result<CMatrix> {
    let h = coefficients.len();
    if h == 0 {
        return Err(Error::Degenerate("no LCU coefficients".into()));
    }
    let total: f64 = coefficients.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("non-positive coefficient sum".into()));
    }
    let target = CVector::from_vec(
        coefficients
            .iter()
            .map(|&ci| c((ci / total).sqrt(), 0.0))
            .collect(),
    );
    let mut e0 = CVector::zeros(h);
    e0[0] = c(1.0, 0.0);
    let w = &e0 - &target;
    let norm_sq = w.norm_squared();
    if norm_sq < 1e-30 {
        return Ok(identity(h));
    }
    let mut b = identity(h);
    for r in 0..h {
        for cc in 0..h {
            b[(r, cc)] -= w[r] * w[cc].conj() * c(2.0 / norm_sq, 0.0);
        }
    }
    Ok(b)
}

/// A fully materialized merge plan.
#[derive(Clone, Debug)]
pub struct MergePlan {
    pub s1_dim: usize,
    pub s2_dim: usize,
    pub ancilla_dim: usize,
    /// `B` on the ancilla.
    pub prepare: CMatrix,
    /// The select blocks `W_i` on `S₁`.
    pub select: Vec<CMatrix>,
    /// Dilation of the child isometry on `S = S₁ ⊗ S₂`.
    pub vtilde: CMatrix,
    /// Basis indices of `S` spanning the dilation inputs (all ancillas of
    /// the children read zero there); its Ṽ-image is the subspace `𝒮`.
    pub input_positions: Vec<usize>,
    pub rotations: usize,
    pub padding: PaddingPlan,
}

impl MergePlan {
    pub fn total_dim(&self) -> usize {
        self.s1_dim * self.s2_dim * self.ancilla_dim
    }

    fn b_full(&self) -> CMatrix {
        kron(&identity(self.s1_dim * self.s2_dim), &self.prepare)
    }

    fn w_ctrl_full(&self) -> CMatrix {
        let dim = self.total_dim();
        let mut out = CMatrix::zeros(dim, dim);
        let a = self.ancilla_dim;
        for (i, w) in self.select.iter().enumerate() {
            // (W_i ⊗ 1_{S2}) ⊗ |i><i|
            let ws = kron(w, &identity(self.s2_dim));
            for r in 0..ws.nrows() {
                for cc in 0..ws.ncols() {
                    let v = ws[(r, cc)];
                    if v != Complex64::ZERO {
                        out[(r * a + i, cc * a + i)] = v;
                    }
                }
            }
        }
        out
    }

    /// `U = B† W^ctrl B`.
    pub fn u_matrix(&self) -> CMatrix {
        let b = self.b_full();
        b.adjoint() * self.w_ctrl_full() * b
    }

    /// `R_Φ = 1_S ⊗ (2|0><0| - 1)_A`.
    pub fn r_phi(&self) -> CMatrix {
        let dim = self.total_dim();
        let a = self.ancilla_dim;
        CMatrix::from_fn(dim, dim, |r, cc| {
            if r != cc {
                Complex64::ZERO
            } else if r % a == 0 {
                c(1.0, 0.0)
            } else {
                c(-1.0, 0.0)
            }
        })
    }

    /// The reflection `1 - P_{𝒮⊥} ⊗ 2|0><0|_A`, realized as `Ṽ F Ṽ†`.
    pub fn subspace_reflection(&self) -> CMatrix {
        let s_dim = self.s1_dim * self.s2_dim;
        let a = self.ancilla_dim;
        let inputs: std::collections::HashSet<usize> =
            self.input_positions.iter().cloned().collect();
        let f = CMatrix::from_fn(s_dim * a, s_dim * a, |r, cc| {
            if r != cc {
                return Complex64::ZERO;
            }
            let s_idx = r / a;
            let a_idx = r % a;
            if a_idx == 0 && !inputs.contains(&s_idx) {
                c(-1.0, 0.0)
            } else {
                c(1.0, 0.0)
            }
        });
        let v_full = kron(&self.vtilde, &identity(a));
        &v_full * f * v_full.adjoint()
    }

    /// `R_Ψ = R_Φ (1 - P_{𝒮⊥} ⊗ 2|0><0|)`.
    pub fn r_psi(&self) -> CMatrix {
        self.r_phi() * self.subspace_reflection()
    }

    /// Projector onto `𝒮` inside `H_S`.
    pub fn subspace_projector(&self) -> CMatrix {
        let s_dim = self.s1_dim * self.s2_dim;
        let mut p = CMatrix::zeros(s_dim, s_dim);
        for &pos in &self.input_positions {
            let col = self.vtilde.column(pos);
            for r in 0..s_dim {
                for cc in 0..s_dim {
                    p[(r, cc)] += col[r] * col[cc].conj();
                }
            }
        }
        p
    }
}

/// Assemble a merge plan from a padded LCU, its padding plan and the child
/// dilation. `lcu` must act on `S₁` exactly.
pub fn build_merge_plan(
    lcu: &LcuDecomposition,
    padding: &PaddingPlan,
    vtilde: &CMatrix,
    input_positions: &[usize],
    s1_dim: usize,
) -> Result<MergePlan> {
    if lcu.dim() != s1_dim {
        return Err(Error::Shape("LCU dimension != S1 dimension".into()));
    }
    let s_dim = vtilde.nrows();
    if !s_dim.is_multiple_of(s1_dim) {
        return Err(Error::Shape(
            "S1 does not divide the system dimension".into(),
        ));
    }
    if linalg::unitarity_residual(vtilde) > 1e-9 {
        return Err(Error::Validation("child dilation is not unitary".into()));
    }
    let s2_dim = s_dim / s1_dim;
    let prepare = prepare_unitary(&lcu.coefficients)?;
    Ok(MergePlan {
        s1_dim,
        s2_dim,
        ancilla_dim: lcu.len(),
        prepare,
        select: lcu.unitaries.clone(),
        vtilde: vtilde.clone(),
        input_positions: input_positions.to_vec(),
        rotations: padding.rotations,
        padding: padding.clone(),
    })
}

/// `G = -U R_Ψ U† R_Φ`.
pub fn grover_step(plan: &MergePlan) -> CMatrix {
    let u = plan.u_matrix();
    (&u * plan.r_psi() * u.adjoint() * plan.r_phi()).scale(-1.0)
}

/// The full merge unitary `G^ℓ U`.
pub fn merge_unitary(plan: &MergePlan) -> CMatrix {
    let u = plan.u_matrix();
    let g = grover_step(plan);
    let mut out = u;
    for _ in 0..plan.rotations {
        out = &g * out;
    }
    out
}

/// Apply the deterministic merge to `|ψ>_S |0>_A`. The input must lie in
/// `𝒮` within tolerance; the output equals `(M|ψ>)|0>_A` up to the padding
/// phase, with the ancilla back at `|0>`.
pub fn deterministic_merge(plan: &MergePlan, psi: &CVector) -> Result<CVector> {
    let s_dim = plan.s1_dim * plan.s2_dim;
    if psi.len() != s_dim {
        return Err(Error::Shape("input state dimension != system".into()));
    }
    let p = plan.subspace_projector();
    let off = (psi - &p * psi).norm();
    if off > 1e-8 {
        return Err(Error::Validation(format!(
            "input leaves the merge subspace (overlap with complement {off:.3e}); upstream merge bug"
        )));
    }
    let a = plan.ancilla_dim;
    let mut full = CVector::zeros(s_dim * a);
    for s in 0..s_dim {
        full[s * a] = psi[s];
    }
    let m = merge_unitary(plan);
    Ok(&m * full)
}

/// Overlap of `U|ψ>_S|0>_A` with the ancilla-zero sector; equals `1/C'`.
pub fn initial_amplitude(plan: &MergePlan, psi: &CVector) -> Result<f64> {
    let s_dim = plan.s1_dim * plan.s2_dim;
    let a = plan.ancilla_dim;
    let mut full = CVector::zeros(s_dim * a);
    for s in 0..s_dim {
        full[s * a] = psi[s];
    }
    let out = plan.u_matrix() * full;
    let mut good = 0.0f64;
    for s in 0..s_dim {
        good += out[s * a].norm_sqr();
    }
    Ok(good.sqrt())
}
