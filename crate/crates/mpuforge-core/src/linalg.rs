//! Dense complex-matrix primitives shared by the whole stack.
//!
//! Everything downstream works on `CMatrix = DMatrix<Complex64>` in the usual
//! row-major logical indexing. Tolerances are relative unless stated
//! otherwise; the repo-wide default is [`DEFAULT_TOL`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default relative tolerance for rank / PSD / Hermiticity decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest entry magnitude; zero for empty matrices.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff on mismatched shapes");
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn validate_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation("matrix contains NaN or Inf".into()))
    }
}

/// Kronecker product with `a` on the slow (major) index.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Complex64::ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Thin SVD with descending singular values and isometric-column factors,
/// i.e. `m = u * diag(s) * v†`.
pub struct SvdResult {
    pub u: CMatrix,
    pub singular_values: DVector<f64>,
    pub v: CMatrix,
}

pub fn svd(m: &CMatrix) -> Result<SvdResult> {
    validate_finite(m)?;
    let (u, s, v) = crate::jacobi::svd_jacobi(m)?;
    Ok(SvdResult {
        u,
        singular_values: DVector::from_vec(s),
        v,
    })
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> f64 {
    crate::jacobi::svd_jacobi(m)
        .map(|(_, s, _)| s.iter().sum())
        .unwrap_or(f64::NAN)
}

/// Number of singular values above `rel_tol * s_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = match crate::jacobi::svd_jacobi(m) {
        Ok((_, s, _)) => s,
        Err(_) => return 0,
    };
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Hermitian eigendecomposition with eigenvalues sorted descending.
/// The input is symmetrised first; callers must have checked Hermiticity.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    crate::jacobi::hermitian_eigen_jacobi(m).expect("hermitian eigen convergence")
}

fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

/// Hermitian PSD square root. Eigenvalues in `[-tol_abs, 0)` are clamped to
/// zero, where `tol_abs = tol * max(lambda_max, 1)`.
pub fn sqrtm_psd(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape("sqrtm_psd requires a square matrix".into()));
    }
    validate_finite(m)?;
    let scale = max_abs(m).max(1.0);
    if hermiticity_residual(m) > tol * scale {
        return Err(Error::Shape(format!(
            "sqrtm_psd: matrix not Hermitian (residual {:.3e})",
            hermiticity_residual(m)
        )));
    }
    let (vals, vecs) = hermitian_eigen(m);
    let lmax = vals.first().cloned().unwrap_or(0.0).max(0.0);
    let tol_abs = tol * lmax.max(1.0);
    let mut root = Vec::with_capacity(vals.len());
    for &l in &vals {
        if l < -tol_abs {
            return Err(Error::Numerical(format!(
                "sqrtm_psd: eigenvalue {l:.6e} below -{tol_abs:.3e}, matrix is not PSD"
            )));
        }
        root.push(c(l.max(0.0).sqrt(), 0.0));
    }
    let d = CMatrix::from_diagonal(&CVector::from_vec(root));
    let s = &vecs * d * vecs.adjoint();
    // symmetrise away rounding from the similarity product
    Ok((&s + s.adjoint()).scale(0.5))
}

/// `(is_unitary, residual)` with `residual = max |(m† m - 1)_{ij}|`.
pub fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.ncols();
    max_abs_diff(&(m.adjoint() * m), &identity(n))
}

pub fn is_unitary_matrix(m: &CMatrix, tol: f64) -> bool {
    m.nrows() == m.ncols() && unitarity_residual(m) <= tol
}

/// Global-phase-invariant distance between equally sized unitaries:
/// `1 - |tr(a† b)| / dim`.
pub fn phase_invariant_metric(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let t = (a.adjoint() * b).trace();
    1.0 - t.norm() / a.nrows() as f64
}

/// Completes the columns of an isometry, placed at the given input indices,
/// to a full unitary. Remaining columns come from Gram-Schmidt over the
/// standard basis, so the result is deterministic.
pub fn unitary_completion(iso: &CMatrix, input_positions: &[usize]) -> Result<CMatrix> {
    let dim = iso.nrows();
    let k = iso.ncols();
    if input_positions.len() != k {
        return Err(Error::Shape(
            "unitary_completion: positions/columns mismatch".into(),
        ));
    }
    if unitarity_residual(iso) > 1e-9 {
        return Err(Error::Validation(format!(
            "unitary_completion: input columns not orthonormal (residual {:.3e})",
            unitarity_residual(iso)
        )));
    }
    let mut q = CMatrix::zeros(dim, dim);
    let mut basis: Vec<CVector> = Vec::with_capacity(dim);
    for (col, &pos) in input_positions.iter().enumerate() {
        let v = iso.column(col).into_owned();
        q.set_column(pos, &v);
        basis.push(v);
    }
    let taken: std::collections::HashSet<usize> = input_positions.iter().cloned().collect();
    let mut seed = 0usize;
    for pos in 0..dim {
        if taken.contains(&pos) {
            continue;
        }
        let mut v;
        loop {
            v = CVector::zeros(dim);
            if seed < dim {
                v[seed] = c(1.0, 0.0);
            } else {
                // standard basis exhausted by near-parallel vectors; very unlikely
                return Err(Error::Numerical(
                    "unitary_completion: basis exhausted".into(),
                ));
            }
            seed += 1;
            // two rounds of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let overlap = b.dotc(&v);
                    v -= b * overlap;
                }
            }
            let norm = v.norm();
            if norm > 1e-6 {
                v /= c(norm, 0.0);
                break;
            }
        }
        q.set_column(pos, &v);
        basis.push(v);
    }
    Ok(q)
}
