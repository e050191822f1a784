//! Jacobi kernels for the dense decompositions: cyclic two-sided Jacobi for
//! Hermitian eigendecomposition and one-sided (Hestenes) Jacobi for the SVD.
//!
//! These replace the library eigensolver: the caps and canonical-form
//! environments routinely have degenerate complex Hermitian spectra, where
//! rotation-based sweeps stay reliable. Quadratic convergence makes the
//! sweep count small at the dimensions handled here (a few hundred at most).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix};

const MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a Hermitian matrix: `m = V diag(vals) V†` with
/// real eigenvalues sorted descending and orthonormal `V`.
pub fn hermitian_eigen_jacobi(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], CMatrix::zeros(0, 0)));
    }
    let mut h = (m + m.adjoint()).scale(0.5);
    let mut v = CMatrix::identity(n, n);
    let scale = h
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.norm()))
        .max(1e-300);

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(h[(p, q)].norm());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        if sweep == MAX_SWEEPS - 1 {
            return Err(Error::Numerical(format!(
                "hermitian eigen failed to converge (off-diagonal {off:.3e})"
            )));
        }
        for p in 0..n {
            for q in p + 1..n {
                let w = h[(p, q)];
                let aw = w.norm();
                if aw <= 1e-18 * scale {
                    continue;
                }
                let a = h[(p, p)].re;
                let b = h[(q, q)].re;
                let phase = w / c(aw, 0.0);
                // diagonalize [[a, |w|], [|w|, b]]
                let tau = (b - a) / (2.0 * aw);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let co = 1.0 / (1.0 + t * t).sqrt();
                let si = t * co;
                // G = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on (p, q)
                let g_pp = c(co, 0.0);
                let g_pq = c(si, 0.0);
                let g_qp = -phase.conj() * si;
                let g_qq = phase.conj() * co;
                // H <- G† H G: columns, then rows
                for k in 0..n {
                    let hp = h[(k, p)];
                    let hq = h[(k, q)];
                    h[(k, p)] = hp * g_pp + hq * g_qp;
                    h[(k, q)] = hp * g_pq + hq * g_qq;
                }
                for k in 0..n {
                    let hp = h[(p, k)];
                    let hq = h[(q, k)];
                    h[(p, k)] = g_pp.conj() * hp + g_qp.conj() * hq;
                    h[(q, k)] = g_pq.conj() * hp + g_qq.conj() * hq;
                }
                h[(p, q)] = c(0.0, 0.0);
                h[(q, p)] = c(0.0, 0.0);
                h[(p, p)] = c(h[(p, p)].re, 0.0);
                h[(q, q)] = c(h[(q, q)].re, 0.0);
                for k in 0..n {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * g_pp + vq * g_qp;
                    v[(k, q)] = vp * g_pq + vq * g_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[(b, b)].re.partial_cmp(&h[(a, a)].re).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| h[(i, i)].re).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &v.column(i));
    }
    Ok((vals, vecs))
}

/// One-sided Jacobi SVD: `m = U diag(s) V†` with descending `s`, orthonormal
/// `U` columns (completed deterministically on the null space) and unitary V.
pub fn svd_jacobi(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let (rows, cols) = m.shape();
    if rows < cols {
        // svd of the adjoint, swapped back
        let (u, s, v) = svd_jacobi(&m.adjoint())?;
        return Ok((v, s, u));
    }
    let mut a = m.clone();
    let mut v = CMatrix::identity(cols, cols);
    let scale = a
        .iter()
        .fold(0.0f64, |acc, x| acc.max(x.norm()))
        .max(1e-300);

    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let mut alpha = 0.0f64;
                let mut beta = 0.0f64;
                let mut gamma = Complex64::ZERO;
                for k in 0..rows {
                    alpha += a[(k, p)].norm_sqr();
                    beta += a[(k, q)].norm_sqr();
                    gamma += a[(k, p)].conj() * a[(k, q)];
                }
                let ag = gamma.norm();
                // columns at roundoff scale carry no singular weight
                let floor = (1e-15 * scale) * (1e-15 * scale);
                if alpha <= floor || beta <= floor || ag <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / c(ag, 0.0);
                let tau = (beta - alpha) / (2.0 * ag);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let co = 1.0 / (1.0 + t * t).sqrt();
                let si = t * co;
                let g_pp = c(co, 0.0);
                let g_pq = c(si, 0.0);
                let g_qp = -phase.conj() * si;
                let g_qq = phase.conj() * co;
                for k in 0..rows {
                    let ap = a[(k, p)];
                    let aq = a[(k, q)];
                    a[(k, p)] = ap * g_pp + aq * g_qp;
                    a[(k, q)] = ap * g_pq + aq * g_qq;
                }
                for k in 0..cols {
                    let vp = v[(k, p)];
                    let vq = v[(k, q)];
                    v[(k, p)] = vp * g_pp + vq * g_qp;
                    v[(k, q)] = vp * g_pq + vq * g_qq;
                }
            }
        }
        if !rotated {
            break;
        }
        if sweep == MAX_SWEEPS - 1 {
            return Err(Error::Numerical("SVD failed to converge".into()));
        }
    }

    // singular values = column norms; sort descending
    let mut s: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|k| a[(k, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&x, &y| s[y].partial_cmp(&s[x]).unwrap());
    let mut u = CMatrix::zeros(rows, cols);
    let mut v_sorted = CMatrix::zeros(cols, cols);
    let smax = order.first().map(|&i| s[i]).unwrap_or(0.0);
    let mut null_cols = Vec::new();
    for (col, &i) in order.iter().enumerate() {
        v_sorted.set_column(col, &v.column(i));
        if s[i] > 1e-200 && s[i] > 1e-14 * smax {
            let inv = c(1.0 / s[i], 0.0);
            for k in 0..rows {
                u[(k, col)] = a[(k, i)] * inv;
            }
        } else {
            null_cols.push(col);
        }
    }
    s = order.iter().map(|&i| s[i]).collect();
    // deterministic completion of null-space U columns
    if !null_cols.is_empty() {
        let mut basis: Vec<crate::CVector> = (0..cols)
            .filter(|col| !null_cols.contains(col))
            .map(|col| u.column(col).into_owned())
            .collect();
        let mut seed = 0usize;
        for &col in &null_cols {
            loop {
                if seed >= rows {
                    return Err(Error::Numerical("SVD null-space completion failed".into()));
                }
                let mut w = crate::CVector::zeros(rows);
                w[seed] = c(1.0, 0.0);
                seed += 1;
                for _ in 0..2 {
                    for b in &basis {
                        let overlap = b.dotc(&w);
                        w -= b * overlap;
                    }
                }
                let norm = w.norm();
                if norm > 1e-6 {
                    w /= c(norm, 0.0);
                    u.set_column(col, &w);
                    basis.push(w);
                    break;
                }
            }
        }
    }
    Ok((u, s, v_sorted))
}
