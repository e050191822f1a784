//! Isometry caps: the PSD square roots L, R of boundary transfer
//! contractions that turn a tensor segment into an isometry, together with
//! the MPU conditioning numbers computed from them.
//!
//! Cap orientation, fixed repo-wide: with `Lsq[m_ket, m_bra]` the doubled
//! left contraction, the stored left cap is `conj(sqrt(Lsq))` and the stored
//! right cap is `sqrt(Rsq)`. Both enter the isometry on the outer side,
//! `V[(mL, i.., mR), j..] = Σ L[mL, m] chain[m, n] R[n, mR]`, which is the
//! orientation that makes `V† V = 1` follow from chain unitarity. The merge
//! operator inverts `R` through a transpose (see [`crate::lcu`]).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, hermitian_eigen, max_abs_diff, sqrtm_psd, CMatrix, CVector, DEFAULT_TOL,
};
use crate::mpu::{MpoChain, MpoTensor, SchmidtData, UniformBoundary, UniformMpu};

/// Where a cap came from (blocking length and density-operator choice).
#[derive(Clone, Debug, PartialEq)]
pub enum CapSource {
    /// Uniform caps from `m`-site windows weighted by σ (left) and τ (right).
    Uniform { blocking: usize },
    /// Nonuniform caps at a cut of a canonical chain.
    Canonical { cut: usize },
}

/// A left/right cap pair. Hermitian PSD by construction.
#[derive(Clone, Debug)]
pub struct CapPair {
    pub left: CMatrix,
    pub right: CMatrix,
    pub full_rank: bool,
    pub source: CapSource,
}

impl CapPair {
    pub fn bond_dims(&self) -> (usize, usize) {
        (self.left.nrows(), self.right.nrows())
    }

    /// Inverse of a cap by eigendecomposition with an eigenvalue floor.
    /// Directions below `tol * λ_max` mean the rank-deficiency path should
    /// have been taken; inverting through them is refused.
    fn cap_inverse(cap: &CMatrix, tol: f64) -> Result<CMatrix> {
        let (vals, vecs) = hermitian_eigen(cap);
        let lmax = vals.first().cloned().unwrap_or(0.0);
        if lmax <= 0.0 {
            return Err(Error::Numerical("cap is zero".into()));
        }
        let floor = tol * lmax;
        let mut inv = Vec::with_capacity(vals.len());
        for &v in &vals {
            if v <= floor {
                return Err(Error::Unsupported(format!(
                    "cap eigenvalue {v:.3e} below floor {floor:.3e}: rank-deficient cap cannot be inverted"
                )));
            }
            inv.push(c(1.0 / v, 0.0));
        }
        let d = CMatrix::from_diagonal(&CVector::from_vec(inv));
        Ok(&vecs * d * vecs.adjoint())
    }

    /// `R^{-1}` as used by the merge operator: inverse of the transposed
    /// right cap.
    pub fn right_inverse_for_merge(&self, tol: f64) -> Result<CMatrix> {
        Self::cap_inverse(&self.right.transpose(), tol)
    }

    /// `L^{-1}` as used by the merge operator.
    pub fn left_inverse_for_merge(&self, tol: f64) -> Result<CMatrix> {
        Self::cap_inverse(&self.left, tol)
    }
}

/// Doubled transfer contraction from the left: starting from `l l†`, push
/// through `steps` sites with the physical input legs closed by σ
/// (σ factorizes over the window when `sigma` is a product; a general σ over
/// the window is applied as one operator).
fn left_square(tensors: &[&MpoTensor], l: &CVector, sigma: &CMatrix) -> Result<CMatrix> {
    // B_{i⃗}[n, a⃗] = Σ_m l_m (A_1 .. A_k)^{i⃗ a⃗}_{m n};  Lsq = Σ_i B σ B†
    let mut d_in_total = 1usize;
    let mut d_out_total = 1usize;
    for t in tensors {
        d_in_total *= t.d_in;
        d_out_total *= t.d_out;
    }
    if sigma.nrows() != d_in_total {
        return Err(Error::Shape(
            "sigma dimension != window input dimension".into(),
        ));
    }
    // cur[(i⃗ a⃗), n] starting from l
    let mut cur: Vec<Complex64> = l.iter().cloned().collect();
    let mut phys = 1usize; // combined (i⃗ a⃗) dimension so far
    let mut bond = l.len();
    for t in tensors {
        let mut next = vec![Complex64::ZERO; phys * t.d_out * t.d_in * t.d_right];
        for p in 0..phys {
            for m in 0..bond {
                let cv = cur[p * bond + m];
                if cv == Complex64::ZERO {
                    continue;
                }
                for i in 0..t.d_out {
                    for a in 0..t.d_in {
                        for n in 0..t.d_right {
                            let av = t.get(i, a, m, n);
                            if av != Complex64::ZERO {
                                next[((p * t.d_out + i) * t.d_in + a) * t.d_right + n] += cv * av;
                            }
                        }
                    }
                }
            }
        }
        cur = next;
        phys *= t.d_out * t.d_in;
        bond = t.d_right;
    }
    // reorder (i1 a1 i2 a2 ..) -> rows i⃗, cols a⃗ per fixed n
    let dims: Vec<(usize, usize)> = tensors.iter().map(|t| (t.d_out, t.d_in)).collect();
    let mut lsq = CMatrix::zeros(bond, bond);
    let mut b_i = CMatrix::zeros(bond, d_in_total);
    for i_combined in 0..d_out_total {
        // fill B_i[n, a⃗]
        for a_combined in 0..d_in_total {
            // interleaved index of (i⃗, a⃗)
            let mut inter = 0usize;
            let mut io = i_combined;
            let mut ao = a_combined;
            let mut divs_o = d_out_total;
            let mut divs_i = d_in_total;
            for &(dd_o, dd_i) in &dims {
                divs_o /= dd_o;
                divs_i /= dd_i;
                let ik = io / divs_o;
                io %= divs_o;
                let ak = ao / divs_i;
                ao %= divs_i;
                inter = (inter * dd_o + ik) * dd_i + ak;
            }
            for n in 0..bond {
                b_i[(n, a_combined)] = cur[inter * bond + n];
            }
        }
        lsq += &b_i * sigma * b_i.adjoint();
    }
    Ok(lsq)
}

/// Mirror contraction from the right with τ.
fn right_square(tensors: &[&MpoTensor], r: &CVector, tau: &CMatrix) -> Result<CMatrix> {
    let mut d_in_total = 1usize;
    let mut d_out_total = 1usize;
    for t in tensors {
        d_in_total *= t.d_in;
        d_out_total *= t.d_out;
    }
    if tau.nrows() != d_in_total {
        return Err(Error::Shape(
            "tau dimension != window input dimension".into(),
        ));
    }
    // cur[m, (i⃗ a⃗)] accumulated right-to-left
    let mut cur: Vec<Complex64> = r.iter().cloned().collect();
    let mut phys = 1usize;
    let mut bond = r.len();
    for t in tensors.iter().rev() {
        let mut next = vec![Complex64::ZERO; t.d_left * t.d_out * t.d_in * phys];
        for p in 0..phys {
            for n in 0..bond {
                let cv = cur[n * phys + p];
                if cv == Complex64::ZERO {
                    continue;
                }
                for i in 0..t.d_out {
                    for a in 0..t.d_in {
                        for m in 0..t.d_left {
                            let av = t.get(i, a, m, n);
                            if av != Complex64::ZERO {
                                next[m * (t.d_out * t.d_in * phys)
                                    + ((i * t.d_in + a) * phys + p)] += av * cv;
                            }
                        }
                    }
                }
            }
        }
        cur = next;
        phys *= t.d_out * t.d_in;
        bond = t.d_left;
    }
    let dims: Vec<(usize, usize)> = tensors.iter().map(|t| (t.d_out, t.d_in)).collect();
    let mut rsq = CMatrix::zeros(bond, bond);
    let mut c_i = CMatrix::zeros(bond, d_in_total);
    for i_combined in 0..d_out_total {
        for a_combined in 0..d_in_total {
            let mut inter = 0usize;
            let mut io = i_combined;
            let mut ao = a_combined;
            let mut divs_o = d_out_total;
            let mut divs_i = d_in_total;
            for &(dd_o, dd_i) in &dims {
                divs_o /= dd_o;
                divs_i /= dd_i;
                let ik = io / divs_o;
                io %= divs_o;
                let ak = ao / divs_i;
                ao %= divs_i;
                inter = (inter * dd_o + ik) * dd_i + ak;
            }
            for m in 0..bond {
                c_i[(m, a_combined)] = cur[m * phys + inter];
            }
        }
        rsq += &c_i * tau * c_i.adjoint();
    }
    Ok(rsq)
}

fn caps_from_squares(lsq: CMatrix, rsq: CMatrix, tol: f64, source: CapSource) -> Result<CapPair> {
    let left = sqrtm_psd(&lsq, tol.max(1e-9))
        .map_err(|e| Error::Numerical(format!("left cap not PSD (non-unitary input?): {e}")))?
        .map(|v| v.conj()); // stored left cap is conj(sqrt(Lsq))
    let right = sqrtm_psd(&rsq, tol.max(1e-9))
        .map_err(|e| Error::Numerical(format!("right cap not PSD (non-unitary input?): {e}")))?;
    let dl = left.nrows();
    let dr = right.nrows();
    let full_rank =
        linalg::numerical_rank(&left, tol) == dl && linalg::numerical_rank(&right, tol) == dr;
    Ok(CapPair {
        left,
        right,
        full_rank,
        source,
    })
}

/// Uniform caps from `blocking`-site windows. `sigma`/`tau` default to the
/// maximally mixed state over the window.
pub fn compute_caps_uniform(
    mpu: &UniformMpu,
    blocking: usize,
    sigma: Option<&CMatrix>,
    tau: Option<&CMatrix>,
    tol: f64,
) -> Result<CapPair> {
    let (l, r) = match &mpu.boundary {
        UniformBoundary::Vectors { l, r } => (l, r),
        UniformBoundary::Operator { .. } => {
            return Err(Error::Validation(
                "compute_caps_uniform needs the open form".into(),
            ))
        }
    };
    if blocking == 0 {
        return Err(Error::Validation("blocking must be >= 1".into()));
    }
    let d = mpu.phys_dim();
    let window: Vec<&MpoTensor> = std::iter::repeat_n(&mpu.bulk, blocking).collect();
    let dwin = d.pow(blocking as u32);
    let mixed = linalg::identity(dwin).scale(1.0 / dwin as f64);
    let sigma = sigma.unwrap_or(&mixed);
    let tau = tau.unwrap_or(&mixed);
    validate_density(sigma, tol)?;
    validate_density(tau, tol)?;
    let lsq = left_square(&window, l, sigma)?;
    let rsq = right_square(&window, r, tau)?;
    let caps = caps_from_squares(lsq, rsq, tol, CapSource::Uniform { blocking })?;
    // consistency: the capped single-site doubled tensor must contract to 1_d
    let res = capped_unitarity_residual(&mpu.bulk, &caps);
    if res > 1e-6 {
        return Err(Error::Numerical(format!(
            "capped tensor does not contract to the identity (residual {res:.3e}); input is not a uniform-bulk MPU"
        )));
    }
    Ok(caps)
}

fn validate_density(rho: &CMatrix, tol: f64) -> Result<()> {
    if rho.nrows() != rho.ncols() {
        return Err(Error::Shape("density operator must be square".into()));
    }
    if max_abs_diff(rho, &rho.adjoint()) > tol.max(1e-9) {
        return Err(Error::Validation("density operator not Hermitian".into()));
    }
    if (rho.trace().re - 1.0).abs() > 1e-6 {
        return Err(Error::Validation("density operator trace != 1".into()));
    }
    Ok(())
}

/// Residual of `Σ_i conj(A^{ia}) Lsq-weighted A^{ib} Rsq-weighted = δ_{ab}`,
/// the single-site capped unitarity relation.
pub fn capped_unitarity_residual(bulk: &MpoTensor, caps: &CapPair) -> f64 {
    let d = bulk.d_in;
    let lsq = {
        // Lsq[m_ket, m_bra] = (conj(left))² entrywise reconstruction
        let lc = caps.left.map(|v| v.conj());
        &lc * &lc
    };
    let rsq = &caps.right * &caps.right;
    let mut out = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut acc = Complex64::ZERO;
            for i in 0..bulk.d_out {
                let ba = bulk.bond_matrix(i, a);
                let bb = bulk.bond_matrix(i, b);
                // Σ_{m' m n' n} Lsq[m', m] conj(A^{ia}[m, n]) A^{ib}[m', n'] Rsq[n', n]
                let prod = lsq.transpose() * bb * &rsq;
                for m in 0..bulk.d_left {
                    for n in 0..bulk.d_right {
                        acc += prod[(m, n)] * ba[(m, n)].conj();
                    }
                }
            }
            out[(a, b)] = acc;
        }
    }
    max_abs_diff(&out, &linalg::identity(d))
}

/// Nonuniform caps at cut `k` (1-based, between sites k and k+1) of a chain:
/// `Lsq` over sites `1..=j-1` and `Rsq` over `k+1..=N` with maximally mixed
/// σ, τ unless given.
pub fn compute_caps_nonuniform(
    chain: &MpoChain,
    j: usize,
    k: usize,
    sigma: Option<&CMatrix>,
    tau: Option<&CMatrix>,
    tol: f64,
) -> Result<CapPair> {
    let n = chain.len();
    if j < 1 || k < j || k > n {
        return Err(Error::Shape("invalid segment [j..k]".into()));
    }
    let left_window: Vec<&MpoTensor> = chain.tensors[..j - 1].iter().collect();
    let right_window: Vec<&MpoTensor> = chain.tensors[k..].iter().collect();
    let dl: usize = left_window.iter().map(|t| t.d_in).product();
    let dr: usize = right_window.iter().map(|t| t.d_in).product();
    let mixed_l = linalg::identity(dl).scale(1.0 / dl as f64);
    let mixed_r = linalg::identity(dr).scale(1.0 / dr as f64);
    let sigma = sigma.unwrap_or(&mixed_l);
    let tau = tau.unwrap_or(&mixed_r);
    let lsq = left_square(&left_window, &chain.left_boundary, sigma)?;
    let rsq = right_square(&right_window, &chain.right_boundary, tau)?;
    caps_from_squares(lsq, rsq, tol, CapSource::Canonical { cut: k })
}

/// A contiguous capped segment with its dense isometry.
#[derive(Clone, Debug)]
pub struct IsometryBlock {
    pub site_lo: usize,
    pub site_hi: usize,
    /// None means the boundary vector is absorbed (no outer bond leg).
    pub left_cap: Option<CMatrix>,
    pub right_cap: Option<CMatrix>,
    /// `V[(mL, i⃗, mR), j⃗]` with absent caps dropping their leg.
    pub dense_v: CMatrix,
}

/// Build the dense isometry for `chain[j..=k]` with the given caps; a `None`
/// cap contracts the corresponding boundary vector instead.
pub fn build_isometry(
    chain: &MpoChain,
    j: usize,
    k: usize,
    left_cap: Option<&CMatrix>,
    right_cap: Option<&CMatrix>,
    dim_cap: usize,
) -> Result<IsometryBlock> {
    let n = chain.len();
    if j < 1 || k < j || k > n {
        return Err(Error::Shape("invalid segment [j..k]".into()));
    }
    let seg = &chain.tensors[j - 1..k];
    let d_in: usize = seg.iter().map(|t| t.d_in).product();
    let d_out: usize = seg.iter().map(|t| t.d_out).product();
    let dl_dim = left_cap.map(|m| m.nrows()).unwrap_or(1);
    let dr_dim = right_cap.map(|m| m.nrows()).unwrap_or(1);
    let out_dim = dl_dim * d_out * dr_dim;
    if out_dim > dim_cap || d_in > dim_cap {
        return Err(Error::Resource(format!(
            "isometry dimension {out_dim} x {d_in} exceeds cap {dim_cap}"
        )));
    }
    // cur[mL, I, J, n]
    let bond0 = seg[0].d_left;
    let mut cur: Vec<Complex64> = match left_cap {
        Some(lc) => {
            if lc.ncols() != bond0 {
                return Err(Error::Shape("left cap does not match left bond".into()));
            }
            let mut v = vec![Complex64::ZERO; dl_dim * bond0];
            for x in 0..dl_dim {
                for m in 0..bond0 {
                    v[x * bond0 + m] = lc[(x, m)];
                }
            }
            v
        }
        None => {
            if j != 1 {
                return Err(Error::Shape(
                    "vector cap only valid at the chain boundary".into(),
                ));
            }
            chain.left_boundary.iter().cloned().collect()
        }
    };
    let mut dim_o = 1usize;
    let mut dim_i = 1usize;
    let mut bond = bond0;
    for t in seg {
        let mut next = vec![Complex64::ZERO; dl_dim * dim_o * t.d_out * dim_i * t.d_in * t.d_right];
        for x in 0..dl_dim {
            for io in 0..dim_o {
                for jo in 0..dim_i {
                    for m in 0..bond {
                        let cv = cur[((x * dim_o + io) * dim_i + jo) * bond + m];
                        if cv == Complex64::ZERO {
                            continue;
                        }
                        for i in 0..t.d_out {
                            for jj in 0..t.d_in {
                                for nn in 0..t.d_right {
                                    let av = t.get(i, jj, m, nn);
                                    if av != Complex64::ZERO {
                                        let ni = io * t.d_out + i;
                                        let nj = jo * t.d_in + jj;
                                        next[((x * (dim_o * t.d_out) + ni) * (dim_i * t.d_in)
                                            + nj)
                                            * t.d_right
                                            + nn] += cv * av;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cur = next;
        dim_o *= t.d_out;
        dim_i *= t.d_in;
        bond = t.d_right;
    }
    // close right side and reorder to rows (mL, I, mR)
    let mut v = CMatrix::zeros(out_dim, d_in);
    match right_cap {
        Some(rc) => {
            if rc.nrows() != bond {
                return Err(Error::Shape("right cap does not match right bond".into()));
            }
            for x in 0..dl_dim {
                for io in 0..d_out {
                    for jo in 0..d_in {
                        for y in 0..dr_dim {
                            let mut acc = Complex64::ZERO;
                            for nn in 0..bond {
                                acc +=
                                    cur[((x * dim_o + io) * dim_i + jo) * bond + nn] * rc[(nn, y)];
                            }
                            v[((x * d_out + io) * dr_dim + y, jo)] = acc;
                        }
                    }
                }
            }
        }
        None => {
            if k != n {
                return Err(Error::Shape(
                    "vector cap only valid at the chain boundary".into(),
                ));
            }
            for x in 0..dl_dim {
                for io in 0..d_out {
                    for jo in 0..d_in {
                        let mut acc = Complex64::ZERO;
                        for nn in 0..bond {
                            acc += cur[((x * dim_o + io) * dim_i + jo) * bond + nn]
                                * chain.right_boundary[nn];
                        }
                        v[(x * d_out + io, jo)] = acc;
                    }
                }
            }
        }
    }
    Ok(IsometryBlock {
        site_lo: j,
        site_hi: k,
        left_cap: left_cap.cloned(),
        right_cap: right_cap.cloned(),
        dense_v: v,
    })
}

/// `q_unif = sqrt(tr[R^{-2} (L^{-2})^T])` in the merge orientation; equals
/// the trace norm of the merge operator for full-rank caps.
pub fn conditioning_uniform(caps: &CapPair, tol: f64) -> Result<f64> {
    let rinv = caps.right_inverse_for_merge(tol)?;
    let linv = caps.left_inverse_for_merge(tol)?;
    let r2 = &rinv * &rinv;
    let l2 = &linv * &linv;
    let mut acc = Complex64::ZERO;
    for m in 0..r2.nrows() {
        for n in 0..r2.ncols() {
            acc += r2[(m, n)] * l2[(m, n)];
        }
    }
    if acc.re < 0.0 || acc.im.abs() > 1e-6 * acc.re.abs().max(1.0) {
        return Err(Error::Numerical(format!(
            "conditioning trace not positive real: {acc}"
        )));
    }
    Ok(acc.re.sqrt())
}

/// Per-cut conditioning from Schmidt data (the canonical choice `L = 1`,
/// `R = diag(s_k)`), its max, and the crude `sqrt(D)/s_min` bound.
pub struct NonuniformConditioning {
    pub per_cut: Vec<f64>,
    pub q: f64,
    pub crude_bound: f64,
}

pub fn conditioning_nonuniform(data: &SchmidtData) -> NonuniformConditioning {
    let bound = crate::mpu::schmidt_bound_q(data);
    NonuniformConditioning {
        per_cut: bound.per_cut_q,
        q: bound.q,
        crude_bound: bound.crude_bound,
    }
}

#[allow(unused)]
fn default_tol() -> f64 {
    DEFAULT_TOL
}
