//! Exact decomposition of the merge operator into a positive combination of
//! unitaries with `Σ c_i = ‖M‖₁`, and the integer-rotation phase padding.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::isometry::CapPair;
use crate::linalg::{self, c, max_abs, svd, trace_norm, CMatrix};

/// `M = Σ_i c_i W_i` with unitary `W_i` and positive `c_i`.
#[derive(Clone, Debug)]
pub struct LcuDecomposition {
    pub unitaries: Vec<CMatrix>,
    pub coefficients: Vec<f64>,
}

impl LcuDecomposition {
    pub fn total(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.unitaries.first().map(|w| w.nrows()).unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let dim = self.dim();
        let mut m = CMatrix::zeros(dim, dim);
        for (w, &ci) in self.unitaries.iter().zip(&self.coefficients) {
            m += w.scale(ci);
        }
        m
    }

    pub fn validate(&self, target: &CMatrix, tol: f64) -> Result<()> {
        if self.unitaries.len() != self.coefficients.len() || self.is_empty() {
            return Err(Error::Validation("LCU term count mismatch".into()));
        }
        for w in &self.unitaries {
            if linalg::unitarity_residual(w) > 1e-12 {
                return Err(Error::Validation("LCU factor not unitary".into()));
            }
        }
        if self.coefficients.iter().any(|&ci| ci <= 0.0) {
            return Err(Error::Validation("LCU coefficient not positive".into()));
        }
        let res = linalg::max_abs_diff(&self.reconstruct(), target);
        if res > tol * max_abs(target).max(1.0) {
            return Err(Error::Validation(format!(
                "LCU reconstruction residual {res:.3e}"
            )));
        }
        Ok(())
    }

    /// Tensor every factor with `cosφ 1 + i sinφ Z` per padding phase. Each
    /// phase splits every term into a `cosφ`-weighted identity part and a
    /// `sinφ`-weighted `iZ` part, inflating the coefficient sum by
    /// `Π (cosφ + sinφ)` without changing the reconstructed operator's
    /// action on pad-zero states.
    pub fn pad(&self, phases: &[f64]) -> LcuDecomposition {
        let mut out = self.clone();
        for &phi in phases {
            let (s, co) = phi.sin_cos();
            let eye = linalg::identity(2);
            let iz =
                CMatrix::from_diagonal(&crate::CVector::from_vec(vec![c(0.0, 1.0), c(0.0, -1.0)]));
            let mut ws = Vec::with_capacity(out.len() * 2);
            let mut cs = Vec::with_capacity(out.len() * 2);
            for (w, &ci) in out.unitaries.iter().zip(&out.coefficients) {
                if co.abs() > 1e-15 {
                    ws.push(linalg::kron(w, &eye));
                    cs.push(ci * co);
                }
                if s.abs() > 1e-15 {
                    ws.push(linalg::kron(w, &iz));
                    cs.push(ci * s);
                }
            }
            out = LcuDecomposition {
                unitaries: ws,
                coefficients: cs,
            };
        }
        out
    }
}

/// The rank-1 merge operator `M = |00><1| (R^{-1} ⊗ L^{-1})` fusing the
/// right cap of the left block with the left cap of the right block.
/// Row `(0,0)`, entries `M[(0,0),(a,b)] = Σ_m R^{-1}[m,a] L^{-1}[m,b]`.
pub fn merge_operator(
    left_block_caps: &CapPair,
    right_block_caps: &CapPair,
    tol: f64,
) -> Result<CMatrix> {
    let rinv = left_block_caps.right_inverse_for_merge(tol)?;
    let linv = right_block_caps.left_inverse_for_merge(tol)?;
    let dr = rinv.nrows();
    let dl = linv.nrows();
    if dr != rinv.ncols() || dl != linv.ncols() {
        return Err(Error::Shape("cap inverses must be square".into()));
    }
    let mut m = CMatrix::zeros(dr * dl, dr * dl);
    for a in 0..dr {
        for b in 0..dl {
            let mut acc = Complex64::ZERO;
            for k in 0..dr.min(dl) {
                acc += rinv[(k, a)] * linv[(k, b)];
            }
            m[(0, a * dl + b)] = acc;
        }
    }
    Ok(m)
}

/// Merge operator embedded into enlarged bond registers (row/column index 0
/// of each register carries the true bond; padding directions map to zero).
pub fn merge_operator_embedded(
    left_block_caps: &CapPair,
    right_block_caps: &CapPair,
    dim_r: usize,
    dim_l: usize,
    tol: f64,
) -> Result<CMatrix> {
    let m = merge_operator(left_block_caps, right_block_caps, tol)?;
    let dr = left_block_caps.right.nrows();
    let dl = right_block_caps.left.nrows();
    if dim_r < dr || dim_l < dl {
        return Err(Error::Shape("embedding dims smaller than caps".into()));
    }
    if dim_r == dr && dim_l == dl {
        return Ok(m);
    }
    let mut out = CMatrix::zeros(dim_r * dim_l, dim_r * dim_l);
    for a in 0..dr {
        for b in 0..dl {
            out[(0, a * dim_l + b)] = m[(0, a * dl + b)];
        }
    }
    Ok(out)
}

/// Constructive LCU via SVD and the roots-of-unity expansion of
/// `diag(1,0,..,0)`: `H = dim * rank` terms with `Σ c_i = ‖m‖₁`. Unitary
/// inputs short-circuit to a single term.
pub fn lcu_decompose(m: &CMatrix) -> Result<LcuDecomposition> {
    decompose_impl(m, false)
}

/// Same contract, but rank-1 terms expand through
/// `diag(1,0,..,0) = (1 + diag(1,-1,..,-1))/2`, giving `H = 2 * rank` terms.
/// Still exact with `Σ c_i = ‖m‖₁`; this is what the compiler uses so the
/// LCU ancilla stays small for large merge dimensions.
pub fn lcu_decompose_compact(m: &CMatrix) -> Result<LcuDecomposition> {
    decompose_impl(m, true)
}

fn decompose_impl(m: &CMatrix, compact: bool) -> Result<LcuDecomposition> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(
            "lcu_decompose requires a square matrix".into(),
        ));
    }
    let dim = m.nrows();
    if dim == 0 || max_abs(m) == 0.0 {
        return Err(Error::Degenerate("lcu_decompose: zero matrix".into()));
    }
    if linalg::unitarity_residual(m) <= 1e-12 {
        return Ok(LcuDecomposition {
            unitaries: vec![m.clone()],
            coefficients: vec![1.0],
        });
    }
    let dec = svd(m)?;
    let smax = dec.singular_values[0];
    let rank = dec
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * smax)
        .count();
    let mut unitaries = Vec::new();
    let mut coefficients = Vec::new();
    if compact {
        // |u_i><v_i| = U diag(e_i) V†, diag(e_i) = (1 + Z_i)/2 with
        // Z_i = diag(.., +1 at i, .., -1 elsewhere)
        for i in 0..rank {
            let si = dec.singular_values[i];
            for sign_case in 0..2 {
                let mut diag = Vec::with_capacity(dim);
                for j in 0..dim {
                    let z = if j == i { 1.0 } else { -1.0 };
                    diag.push(if sign_case == 0 {
                        c(1.0, 0.0)
                    } else {
                        c(z, 0.0)
                    });
                }
                let d = CMatrix::from_diagonal(&crate::CVector::from_vec(diag));
                unitaries.push(&dec.u * d * dec.v.adjoint());
                coefficients.push(si / 2.0);
            }
        }
    } else {
        let omega = Complex64::from_polar(1.0, std::f64::consts::TAU / dim as f64);
        for i in 0..rank {
            let si = dec.singular_values[i];
            for k in 0..dim {
                let diag: Vec<Complex64> = (0..dim)
                    .map(|j| omega.powi(((j as i64 - i as i64) * k as i64) as i32))
                    .collect();
                let d = CMatrix::from_diagonal(&crate::CVector::from_vec(diag));
                unitaries.push(&dec.u * d * dec.v.adjoint());
                coefficients.push(si / dim as f64);
            }
        }
    }
    Ok(LcuDecomposition {
        unitaries,
        coefficients,
    })
}

/// Rotation count and pad phases making the amplification angle exact:
/// smallest `ℓ >= 0` with `padded_C = 1/sin(π/(2(2ℓ+1))) >= C`, plus the
/// fewest pad phases with `padded_C = C Π (cosφ_j + sinφ_j)`.
#[derive(Clone, Debug)]
pub struct PaddingPlan {
    pub pad_phases: Vec<f64>,
    pub padded_c: f64,
    pub rotations: usize,
}

impl PaddingPlan {
    pub fn theta(&self) -> f64 {
        (1.0 / self.padded_c).asin()
    }

    /// `sin((2ℓ+1) θ)`, equal to 1 by construction.
    pub fn success_amplitude(&self) -> f64 {
        (((2 * self.rotations + 1) as f64) * self.theta()).sin()
    }
}

pub fn plan_padding(c_total: f64) -> Result<PaddingPlan> {
    if c_total.is_nan() || c_total < 1.0 - 1e-12 {
        return Err(Error::Validation(format!(
            "plan_padding: C = {c_total} < 1; the merge operator acts isometrically so its 1-norm is >= 1"
        )));
    }
    let c_total = c_total.max(1.0);
    let mut rotations = 0usize;
    let mut padded_c;
    loop {
        padded_c = 1.0 / (std::f64::consts::PI / (2.0 * (2 * rotations + 1) as f64)).sin();
        if padded_c >= c_total - 1e-12 * c_total {
            break;
        }
        rotations += 1;
        if rotations > 1_000_000 {
            return Err(Error::Numerical(
                "plan_padding: rotation search diverged".into(),
            ));
        }
    }
    let ratio = (padded_c / c_total).max(1.0);
    let mut pad_phases = Vec::new();
    if ratio > 1.0 + 1e-12 {
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut k = 1usize;
        while sqrt2.powi(k as i32) < ratio * (1.0 - 1e-15) {
            k += 1;
        }
        let mut rem = ratio;
        pad_phases.extend(std::iter::repeat_n(std::f64::consts::FRAC_PI_4, k - 1));
        rem /= sqrt2.powi(k as i32 - 1);
        // cosφ + sinφ = rem  =>  φ = arcsin(rem/√2) - π/4, rem in [1, √2]
        let phi = (rem / sqrt2).asin() - std::f64::consts::FRAC_PI_4;
        pad_phases.push(phi.max(0.0));
    }
    let achieved = c_total
        * pad_phases
            .iter()
            .map(|&p| p.cos() + p.sin())
            .product::<f64>();
    if (achieved - padded_c).abs() > 1e-9 * padded_c {
        return Err(Error::Numerical(format!(
            "plan_padding: phase product {achieved} misses target {padded_c}"
        )));
    }
    Ok(PaddingPlan {
        pad_phases,
        padded_c,
        rotations,
    })
}

/// `Σ c_i` must equal the trace norm for both constructions; convenience
/// check used across the test suites.
pub fn coefficient_optimality_residual(m: &CMatrix, lcu: &LcuDecomposition) -> f64 {
    (lcu.total() - trace_norm(m)).abs()
}
