//! MPO/MPU representation, dense contraction at small N, unitarity and
//! rank checks, boundary-operator conversion, and the Choi-state canonical
//! form with its Schmidt data.
//!
//! Index conventions, fixed repo-wide:
//! * `MpoTensor` entries `A^{ij}_{mn}` are stored row-major in order
//!   `(i, j, m, n)` with `i` the physical output, `j` the physical input,
//!   `m` the left bond and `n` the right bond.
//! * Chain contraction is `l · A_1^{i1 j1} · ... · A_N^{iN jN} · r` with no
//!   conjugation on the boundary vectors.
//! * The Choi vectorization pairs `(output, input)` per site, row-major,
//!   normalized by `d^{-N/2}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, hermitian_eigen, max_abs_diff, numerical_rank, CMatrix, CVector, DEFAULT_TOL,
};

/// Default cap on the dense dimension `d^N` handled by `contract`.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Site tensor `A^{ij}_{mn}`.
#[derive(Clone, Debug)]
pub struct MpoTensor {
    pub d_out: usize,
    pub d_in: usize,
    pub d_left: usize,
    pub d_right: usize,
    entries: Vec<Complex64>,
}

impl MpoTensor {
    pub fn zeros(d_out: usize, d_in: usize, d_left: usize, d_right: usize) -> Self {
        Self {
            d_out,
            d_in,
            d_left,
            d_right,
            entries: vec![Complex64::ZERO; d_out * d_in * d_left * d_right],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, m: usize, n: usize) -> usize {
        ((i * self.d_in + j) * self.d_left + m) * self.d_right + n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, m: usize, n: usize) -> Complex64 {
        self.entries[self.idx(i, j, m, n)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, m: usize, n: usize, v: Complex64) {
        let k = self.idx(i, j, m, n);
        self.entries[k] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn from_entries(
        d_out: usize,
        d_in: usize,
        d_left: usize,
        d_right: usize,
        entries: Vec<Complex64>,
    ) -> Result<Self> {
        if entries.len() != d_out * d_in * d_left * d_right {
            return Err(Error::Shape("MpoTensor entry count mismatch".into()));
        }
        Ok(Self {
            d_out,
            d_in,
            d_left,
            d_right,
            entries,
        })
    }

    /// The bond matrix `A^{ij}` for fixed physical pair `(i, j)`.
    pub fn bond_matrix(&self, i: usize, j: usize) -> CMatrix {
        CMatrix::from_fn(self.d_left, self.d_right, |m, n| self.get(i, j, m, n))
    }

    /// Apply a gauge `A^{ij} -> X_left * A^{ij} * X_right`.
    pub fn gauge(&self, x_left: &CMatrix, x_right: &CMatrix) -> MpoTensor {
        let mut out = MpoTensor::zeros(self.d_out, self.d_in, x_left.nrows(), x_right.ncols());
        for i in 0..self.d_out {
            for j in 0..self.d_in {
                let b = x_left * self.bond_matrix(i, j) * x_right;
                for m in 0..out.d_left {
                    for n in 0..out.d_right {
                        out.set(i, j, m, n, b[(m, n)]);
                    }
                }
            }
        }
        out
    }

    /// Tensor with output and input conjugated by a single-site unitary:
    /// `A^{ij} -> sum_{i'j'} u_{ii'} conj(u_{jj'}) A^{i'j'}`.
    pub fn conjugate_physical(&self, u: &CMatrix) -> MpoTensor {
        let d = self.d_out;
        let mut out = MpoTensor::zeros(d, d, self.d_left, self.d_right);
        for i in 0..d {
            for j in 0..d {
                let mut b = CMatrix::zeros(self.d_left, self.d_right);
                for ip in 0..d {
                    for jp in 0..d {
                        let coeff = u[(i, ip)] * u[(j, jp)].conj();
                        if coeff != Complex64::ZERO {
                            b += self.bond_matrix(ip, jp).scale_complex(coeff);
                        }
                    }
                }
                for m in 0..self.d_left {
                    for n in 0..self.d_right {
                        out.set(i, j, m, n, b[(m, n)]);
                    }
                }
            }
        }
        out
    }
}

trait ScaleComplex {
    fn scale_complex(self, s: Complex64) -> CMatrix;
}
impl ScaleComplex for CMatrix {
    fn scale_complex(self, s: Complex64) -> CMatrix {
        self.map(|v| v * s)
    }
}

/// Open-boundary chain of site tensors with boundary vectors.
#[derive(Clone, Debug)]
pub struct MpoChain {
    pub tensors: Vec<MpoTensor>,
    pub left_boundary: CVector,
    pub right_boundary: CVector,
}

impl MpoChain {
    pub fn new(
        tensors: Vec<MpoTensor>,
        left_boundary: CVector,
        right_boundary: CVector,
    ) -> Result<Self> {
        if tensors.is_empty() {
            return Err(Error::Shape("empty chain".into()));
        }
        if left_boundary.len() != tensors[0].d_left {
            return Err(Error::Shape(
                "left boundary length != first left bond".into(),
            ));
        }
        if right_boundary.len() != tensors.last().unwrap().d_right {
            return Err(Error::Shape(
                "right boundary length != last right bond".into(),
            ));
        }
        for w in tensors.windows(2) {
            if w[0].d_right != w[1].d_left {
                return Err(Error::Shape("adjacent bond dimensions mismatch".into()));
            }
        }
        Ok(Self {
            tensors,
            left_boundary,
            right_boundary,
        })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn phys_dims(&self) -> (usize, usize) {
        let d_out: usize = self.tensors.iter().map(|t| t.d_out).product();
        let d_in: usize = self.tensors.iter().map(|t| t.d_in).product();
        (d_out, d_in)
    }

    pub fn max_bond(&self) -> usize {
        self.tensors
            .iter()
            .flat_map(|t| [t.d_left, t.d_right])
            .max()
            .unwrap_or(1)
    }

    /// Chain with boundary vectors absorbed into the terminal tensors, so
    /// that the outer bonds have dimension 1.
    pub fn absorb_boundaries(&self) -> MpoChain {
        let mut tensors = self.tensors.clone();
        let first = &self.tensors[0];
        let mut t0 = MpoTensor::zeros(first.d_out, first.d_in, 1, first.d_right);
        for i in 0..first.d_out {
            for j in 0..first.d_in {
                for n in 0..first.d_right {
                    let mut acc = Complex64::ZERO;
                    for m in 0..first.d_left {
                        acc += self.left_boundary[m] * first.get(i, j, m, n);
                    }
                    t0.set(i, j, 0, n, acc);
                }
            }
        }
        tensors[0] = t0;
        let li = tensors.len() - 1;
        let last = &tensors[li];
        let mut tn = MpoTensor::zeros(last.d_out, last.d_in, last.d_left, 1);
        for i in 0..last.d_out {
            for j in 0..last.d_in {
                for m in 0..last.d_left {
                    let mut acc = Complex64::ZERO;
                    for n in 0..last.d_right {
                        acc += last.get(i, j, m, n) * self.right_boundary[n];
                    }
                    tn.set(i, j, m, 0, acc);
                }
            }
        }
        tensors[li] = tn;
        let l = CVector::from_vec(vec![c(1.0, 0.0)]);
        let r = CVector::from_vec(vec![c(1.0, 0.0)]);
        MpoChain {
            tensors,
            left_boundary: l,
            right_boundary: r,
        }
    }
}

/// Uniform-bulk MPU: one repeated tensor plus either boundary vectors or a
/// boundary operator `b` (the traced form).
#[derive(Clone, Debug)]
pub enum UniformBoundary {
    Vectors { l: CVector, r: CVector },
    Operator { b: CMatrix },
}

#[derive(Clone, Debug)]
pub struct UniformMpu {
    pub bulk: MpoTensor,
    pub boundary: UniformBoundary,
}

impl UniformMpu {
    pub fn open(bulk: MpoTensor, l: CVector, r: CVector) -> Result<Self> {
        if bulk.d_left != bulk.d_right {
            return Err(Error::Shape(
                "uniform bulk must have equal bond dims".into(),
            ));
        }
        if l.len() != bulk.d_left || r.len() != bulk.d_right {
            return Err(Error::Shape(
                "boundary vector length != bond dimension".into(),
            ));
        }
        Ok(Self {
            bulk,
            boundary: UniformBoundary::Vectors { l, r },
        })
    }

    pub fn traced(bulk: MpoTensor, b: CMatrix) -> Result<Self> {
        if bulk.d_left != bulk.d_right || b.nrows() != bulk.d_left || !b.is_square() {
            return Err(Error::Shape("boundary operator must be DxD".into()));
        }
        Ok(Self {
            bulk,
            boundary: UniformBoundary::Operator { b },
        })
    }

    pub fn bond_dim(&self) -> usize {
        self.bulk.d_left
    }

    pub fn phys_dim(&self) -> usize {
        self.bulk.d_out
    }

    pub fn is_open(&self) -> bool {
        matches!(self.boundary, UniformBoundary::Vectors { .. })
    }

    /// The N-site chain (open form required).
    pub fn chain(&self, n: usize) -> Result<MpoChain> {
        match &self.boundary {
            UniformBoundary::Vectors { l, r } => {
                MpoChain::new(vec![self.bulk.clone(); n], l.clone(), r.clone())
            }
            UniformBoundary::Operator { .. } => Err(Error::Validation(
                "traced-boundary MPU: convert with boundary_to_open first".into(),
            )),
        }
    }

    /// Dense contraction of the traced form `sum Tr[b A.. A] |i..><j..|`.
    pub fn contract_traced(&self, n: usize, dim_cap: usize) -> Result<CMatrix> {
        let b = match &self.boundary {
            UniformBoundary::Operator { b } => b,
            UniformBoundary::Vectors { .. } => {
                return Err(Error::Validation("contract_traced needs the b-form".into()))
            }
        };
        let d = self.bulk.d_out;
        check_cap(d, self.bulk.d_in, n, dim_cap)?;
        let dd = self.bulk.d_left;
        // cur[x, I, J, y] built site by site starting from b
        let mut cur: Vec<Complex64> = vec![Complex64::ZERO; dd * dd];
        let mut dim_out = 1usize;
        let mut dim_in = 1usize;
        for x in 0..dd {
            for y in 0..dd {
                cur[x * dd + y] = b[(x, y)];
            }
        }
        for _ in 0..n {
            let t = &self.bulk;
            let mut next = vec![Complex64::ZERO; dd * dim_out * d * dim_in * d * dd];
            for x in 0..dd {
                for big_i in 0..dim_out {
                    for big_j in 0..dim_in {
                        for m in 0..dd {
                            let cv = cur[((x * dim_out + big_i) * dim_in + big_j) * dd + m];
                            if cv == Complex64::ZERO {
                                continue;
                            }
                            for i in 0..d {
                                for j in 0..d {
                                    for nn in 0..dd {
                                        let av = t.get(i, j, m, nn);
                                        if av == Complex64::ZERO {
                                            continue;
                                        }
                                        let io = big_i * d + i;
                                        let jo = big_j * d + j;
                                        next[((x * (dim_out * d) + io) * (dim_in * d) + jo)
                                            * dd
                                            + nn] += cv * av;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            cur = next;
            dim_out *= d;
            dim_in *= d;
        }
        let mut u = CMatrix::zeros(dim_out, dim_in);
        for big_i in 0..dim_out {
            for big_j in 0..dim_in {
                let mut acc = Complex64::ZERO;
                for x in 0..dd {
                    acc += cur[((x * dim_out + big_i) * dim_in + big_j) * dd + x];
                }
                u[(big_i, big_j)] = acc;
            }
        }
        Ok(u)
    }
}

fn check_cap(d_out: usize, d_in: usize, n: usize, dim_cap: usize) -> Result<()> {
    let mut total: usize = 1;
    for _ in 0..n {
        total = total
            .checked_mul(d_out.max(d_in))
            .ok_or_else(|| Error::Resource("dense dimension overflow".into()))?;
        if total > dim_cap {
            return Err(Error::Resource(format!(
                "dense dimension {total} exceeds cap {dim_cap}"
            )));
        }
    }
    Ok(())
}

/// Dense contraction of an open chain.
pub fn contract(chain: &MpoChain, dim_cap: usize) -> Result<CMatrix> {
    let (d_out, d_in) = chain.phys_dims();
    if d_out.max(d_in) > dim_cap {
        return Err(Error::Resource(format!(
            "dense dimension {} exceeds cap {dim_cap}",
            d_out.max(d_in)
        )));
    }
    // cur[I, J, n] accumulated left to right
    let mut dim_out = 1usize;
    let mut dim_in = 1usize;
    let mut bond = chain.left_boundary.len();
    let mut cur: Vec<Complex64> = chain.left_boundary.iter().cloned().collect();
    for t in &chain.tensors {
        let mut next = vec![Complex64::ZERO; dim_out * t.d_out * dim_in * t.d_in * t.d_right];
        for big_i in 0..dim_out {
            for big_j in 0..dim_in {
                for m in 0..bond {
                    let cv = cur[(big_i * dim_in + big_j) * bond + m];
                    if cv == Complex64::ZERO {
                        continue;
                    }
                    for i in 0..t.d_out {
                        for j in 0..t.d_in {
                            for n in 0..t.d_right {
                                let av = t.get(i, j, m, n);
                                if av == Complex64::ZERO {
                                    continue;
                                }
                                let io = big_i * t.d_out + i;
                                let jo = big_j * t.d_in + j;
                                next[(io * (dim_in * t.d_in) + jo) * t.d_right + n] += cv * av;
                            }
                        }
                    }
                }
            }
        }
        cur = next;
        dim_out *= t.d_out;
        dim_in *= t.d_in;
        bond = t.d_right;
    }
    let mut u = CMatrix::zeros(dim_out, dim_in);
    for big_i in 0..dim_out {
        for big_j in 0..dim_in {
            let mut acc = Complex64::ZERO;
            for n in 0..bond {
                acc += cur[(big_i * dim_in + big_j) * bond + n] * chain.right_boundary[n];
            }
            u[(big_i, big_j)] = acc;
        }
    }
    Ok(u)
}

/// `(is_unitary, residual)` with `residual = max |(U†U - 1)_{ij}|`.
pub fn is_unitary(chain: &MpoChain, tol: f64, dim_cap: usize) -> Result<(bool, f64)> {
    let u = contract(chain, dim_cap)?;
    if u.nrows() != u.ncols() {
        return Ok((false, f64::INFINITY));
    }
    let r = linalg::unitarity_residual(&u);
    Ok((r <= tol, r))
}

/// Left-capped tensor, flattened to a `d_out*d_in x D_right` matrix with rows
/// indexed by `(i, j)` row-major.
pub fn left_capped_matrix(bulk: &MpoTensor, l: &CVector) -> CMatrix {
    CMatrix::from_fn(bulk.d_out * bulk.d_in, bulk.d_right, |row, n| {
        let i = row / bulk.d_in;
        let j = row % bulk.d_in;
        (0..bulk.d_left).map(|m| l[m] * bulk.get(i, j, m, n)).sum()
    })
}

/// Right-capped tensor as a `D_left x d_out*d_in` matrix.
pub fn right_capped_matrix(bulk: &MpoTensor, r: &CVector) -> CMatrix {
    CMatrix::from_fn(bulk.d_left, bulk.d_out * bulk.d_in, |m, col| {
        let i = col / bulk.d_in;
        let j = col % bulk.d_in;
        (0..bulk.d_right).map(|n| bulk.get(i, j, m, n) * r[n]).sum()
    })
}

/// Single-site full-bond-rank check: both boundary-capped tensors must have
/// numerical rank `D`.
pub fn check_assumption1(mpu: &UniformMpu, tol: f64) -> Result<bool> {
    let (l, r) = match &mpu.boundary {
        UniformBoundary::Vectors { l, r } => (l, r),
        UniformBoundary::Operator { .. } => {
            return Err(Error::Validation(
                "check_assumption1 needs the open (l, r) form".into(),
            ))
        }
    };
    let d = mpu.bond_dim();
    let rank_l = numerical_rank(&left_capped_matrix(&mpu.bulk, l), tol);
    let rank_r = numerical_rank(&right_capped_matrix(&mpu.bulk, r), tol);
    Ok(rank_l == d && rank_r == d)
}

/// Blocking-aware variant: returns the smallest window `m <= max_m` for which
/// the `m`-site capped tensors reach full bond rank. Single-site rank can be
/// deficient for block-diagonal bulks whose inverse tensors only exist after
/// blocking; the merge construction needs full-rank caps, which is exactly
/// what this witnesses.
pub fn assumption1_blocking(mpu: &UniformMpu, tol: f64, max_m: usize) -> Result<Option<usize>> {
    let (l, r) = match &mpu.boundary {
        UniformBoundary::Vectors { l, r } => (l.clone(), r.clone()),
        UniformBoundary::Operator { .. } => {
            return Err(Error::Validation(
                "assumption1_blocking needs the open (l, r) form".into(),
            ))
        }
    };
    let d = mpu.bond_dim();
    let mut blocked = mpu.bulk.clone();
    for m in 1..=max_m {
        let rank_l = numerical_rank(&left_capped_matrix(&blocked, &l), tol);
        let rank_r = numerical_rank(&right_capped_matrix(&blocked, &r), tol);
        if rank_l == d && rank_r == d {
            return Ok(Some(m));
        }
        if m < max_m {
            blocked = block_tensors(&blocked, &mpu.bulk);
        }
    }
    Ok(None)
}

/// Two site tensors contracted into one (physical dims multiply).
pub fn block_tensors(a: &MpoTensor, b: &MpoTensor) -> MpoTensor {
    assert_eq!(a.d_right, b.d_left);
    let mut out = MpoTensor::zeros(a.d_out * b.d_out, a.d_in * b.d_in, a.d_left, b.d_right);
    for i1 in 0..a.d_out {
        for j1 in 0..a.d_in {
            for i2 in 0..b.d_out {
                for j2 in 0..b.d_in {
                    for m in 0..a.d_left {
                        for n in 0..b.d_right {
                            let mut acc = Complex64::ZERO;
                            for k in 0..a.d_right {
                                acc += a.get(i1, j1, m, k) * b.get(i2, j2, k, n);
                            }
                            out.set(i1 * b.d_out + i2, j1 * b.d_in + j2, m, n, acc);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Generic traced-to-open conversion: bulk `1_D (x) A` over a `D^2` bond,
/// `l = vec(b)`, `r = vec(1)`. The right boundary must be `sum_a |a,a>` for
/// the contraction to reproduce `Tr[b A..A]`; see the crate tests for the
/// oracle equivalence.
pub fn boundary_to_open(mpu: &UniformMpu) -> Result<UniformMpu> {
    let b = match &mpu.boundary {
        UniformBoundary::Operator { b } => b,
        UniformBoundary::Vectors { .. } => {
            return Err(Error::Validation(
                "boundary_to_open expects the b-form".into(),
            ))
        }
    };
    let dd = mpu.bond_dim();
    let t = &mpu.bulk;
    let mut bulk = MpoTensor::zeros(t.d_out, t.d_in, dd * dd, dd * dd);
    for i in 0..t.d_out {
        for j in 0..t.d_in {
            for a in 0..dd {
                for be in 0..dd {
                    for ga in 0..dd {
                        bulk.set(i, j, a * dd + be, a * dd + ga, t.get(i, j, be, ga));
                    }
                }
            }
        }
    }
    let mut l = CVector::zeros(dd * dd);
    let mut r = CVector::zeros(dd * dd);
    for a in 0..dd {
        for be in 0..dd {
            l[a * dd + be] = b[(a, be)];
        }
        r[a * dd + a] = c(1.0, 0.0);
    }
    UniformMpu::open(bulk, l, r)
}

/// Block-wise traced-to-open conversion for bulks of the form
/// `A = ⊕_k A_k`, `b = ⊕_k b_k`: the open bond is `⊕_k C^{D_k} ⊗ C^{D_k}`
/// of dimension `Σ D_k²` instead of `D²`.
pub fn boundary_to_open_blocked(
    blocks: &[MpoTensor],
    boundary_blocks: &[CMatrix],
) -> Result<UniformMpu> {
    if blocks.is_empty() || blocks.len() != boundary_blocks.len() {
        return Err(Error::Shape("block list mismatch".into()));
    }
    let d = blocks[0].d_out;
    let total: usize = blocks.iter().map(|t| t.d_left * t.d_left).sum();
    let mut bulk = MpoTensor::zeros(d, d, total, total);
    let mut l = CVector::zeros(total);
    let mut r = CVector::zeros(total);
    let mut off = 0usize;
    for (t, bk) in blocks.iter().zip(boundary_blocks) {
        if t.d_out != d || t.d_in != d || t.d_left != t.d_right || bk.nrows() != t.d_left {
            return Err(Error::Shape("inconsistent block shapes".into()));
        }
        let dk = t.d_left;
        for i in 0..d {
            for j in 0..d {
                for a in 0..dk {
                    for be in 0..dk {
                        for ga in 0..dk {
                            bulk.set(
                                i,
                                j,
                                off + a * dk + be,
                                off + a * dk + ga,
                                t.get(i, j, be, ga),
                            );
                        }
                    }
                }
            }
        }
        for a in 0..dk {
            for be in 0..dk {
                l[off + a * dk + be] = bk[(a, be)];
            }
            r[off + a * dk + a] = c(1.0, 0.0);
        }
        off += dk * dk;
    }
    UniformMpu::open(bulk, l, r)
}

/// Canonical-form output: the left-canonical gauge chain plus per-cut
/// Schmidt values of the normalized Choi state.
#[derive(Clone, Debug)]
pub struct SchmidtData {
    /// Schmidt values per internal cut `k = 1..N-1`, each sorted descending.
    pub per_cut: Vec<Vec<f64>>,
    pub s_min: f64,
    /// Chain in left-canonical gauge with the right environment at every cut
    /// equal to `diag(s_k^2)`.
    pub canonical_tensors: MpoChain,
}

impl SchmidtData {
    pub fn max_bond(&self) -> usize {
        self.per_cut.iter().map(|s| s.len()).max().unwrap_or(1)
    }
}

/// Bring the Choi state of the chain to MPS left-canonical form, truncating
/// numerically-zero Schmidt directions, then gauge every bond so the right
/// environment is `diag(s_k^2)` with descending `s_k`.
pub fn choi_canonicalize(chain: &MpoChain, tol: f64) -> Result<SchmidtData> {
    let n = chain.len();
    let d_phys: Vec<(usize, usize)> = chain.tensors.iter().map(|t| (t.d_out, t.d_in)).collect();
    let absorbed = chain.absorb_boundaries();
    // Site matrices of the Choi MPS: physical index is the (i, j) pair,
    // entries scaled by 1/sqrt(d) each to normalize by d^{-N/2}.
    let mut sites: Vec<Vec<CMatrix>> = Vec::with_capacity(n);
    for t in &absorbed.tensors {
        let scale = 1.0 / (t.d_out as f64).sqrt();
        let per_phys: Vec<CMatrix> = (0..t.d_out * t.d_in)
            .map(|p| {
                let i = p / t.d_in;
                let j = p % t.d_in;
                t.bond_matrix(i, j).scale(scale)
            })
            .collect();
        sites.push(per_phys);
    }

    // Left sweep: thin SVD at each site, truncating zero singular values.
    let mut carry = CMatrix::identity(1, 1);
    let mut new_sites: Vec<Vec<CMatrix>> = Vec::with_capacity(n);
    for (k, phys) in sites.iter().enumerate() {
        let dl = carry.nrows();
        let p = phys.len();
        let dr = phys[0].ncols();
        // rows (dl * p), cols dr
        let mut mat = CMatrix::zeros(dl * p, dr);
        for (pi, b) in phys.iter().enumerate() {
            let eff = &carry * b;
            for x in 0..dl {
                for y in 0..dr {
                    mat[(x * p + pi, y)] = eff[(x, y)];
                }
            }
        }
        let dec = linalg::svd(&mat)?;
        let smax = dec.singular_values.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return Err(Error::Validation(
                "choi_canonicalize: chain contracts to zero".into(),
            ));
        }
        let keep = dec
            .singular_values
            .iter()
            .filter(|&&s| s > tol * smax)
            .count()
            .max(1);
        let u = dec.u.columns(0, keep).into_owned();
        if k + 1 < n {
            let mut sv = CMatrix::zeros(keep, dec.v.nrows());
            for r_ in 0..keep {
                for c_ in 0..dec.v.nrows() {
                    sv[(r_, c_)] = c(dec.singular_values[r_], 0.0) * dec.v[(c_, r_)].conj();
                }
            }
            carry = sv;
            let mut per_phys = Vec::with_capacity(p);
            for pi in 0..p {
                per_phys.push(CMatrix::from_fn(dl, keep, |x, y| u[(x * p + pi, y)]));
            }
            new_sites.push(per_phys);
        } else {
            // fold the final scalar (norm and phase) back into the last site
            let mut tail = CMatrix::zeros(keep, 1);
            for r_ in 0..keep {
                tail[(r_, 0)] = c(dec.singular_values[r_], 0.0) * dec.v[(0, r_)].conj();
            }
            let full = &u * &tail;
            let norm = full.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!(
                    "choi_canonicalize: state norm {norm:.6} != 1; is the chain unitary?"
                )));
            }
            let mut per_phys = Vec::with_capacity(p);
            for pi in 0..p {
                per_phys.push(CMatrix::from_fn(dl, 1, |x, _| full[(x * p + pi, 0)]));
            }
            new_sites.push(per_phys);
        }
    }

    // Right environments E_k (cut after site k); gauge each bond by the
    // eigenbasis of E_k so R_k = diag(s_k) exactly.
    let mut envs: Vec<CMatrix> = vec![CMatrix::identity(1, 1); n + 1];
    #[allow(clippy::needless_range_loop)]
    for k in (1..n).rev() {
        // E_k = sum_p B_{k+1,p} E_{k+1} B_{k+1,p}†
        let phys = &new_sites[k];
        let next = envs[k + 1].clone();
        let dl = phys[0].nrows();
        let mut e = CMatrix::zeros(dl, dl);
        for b in phys {
            e += b * &next * b.adjoint();
        }
        envs[k] = e;
    }
    let mut gauges: Vec<CMatrix> = Vec::with_capacity(n + 1);
    let mut per_cut = Vec::with_capacity(n - 1);
    gauges.push(CMatrix::identity(1, 1));
    #[allow(clippy::needless_range_loop)]
    for k in 1..n {
        let (vals, vecs) = hermitian_eigen(&envs[k]);
        // the left sweep truncates the left matricization rank, which can
        // still exceed the Schmidt rank; environment eigenvalues at the
        // squared-roundoff floor are numerical zeros and get cut here
        let lmax = vals.first().cloned().unwrap_or(0.0).max(0.0);
        let keep = vals
            .iter()
            .filter(|&&v| v > (1e-14 * lmax).max(tol * tol * lmax))
            .count()
            .max(1);
        let s: Vec<f64> = vals[..keep].iter().map(|&v| v.max(0.0).sqrt()).collect();
        let total: f64 = s.iter().map(|x| x * x).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "choi_canonicalize: Schmidt normalization {total:.6} != 1 at cut {k}"
            )));
        }
        per_cut.push(s);
        gauges.push(vecs.columns(0, keep).into_owned());
    }
    gauges.push(CMatrix::identity(1, 1));

    let mut tensors = Vec::with_capacity(n);
    for k in 0..n {
        let phys = &new_sites[k];
        let (d_out, d_in) = d_phys[k];
        let wl = gauges[k].adjoint();
        let wr = &gauges[k + 1];
        // gauge isometries shrink bonds where the environment was singular
        let dl = wl.nrows();
        let dr = wr.ncols();
        let mut t = MpoTensor::zeros(d_out, d_in, dl, dr);
        let scale = (d_out as f64).sqrt();
        for (pi, b) in phys.iter().enumerate() {
            let i = pi / d_in;
            let j = pi % d_in;
            let g = &wl * b * wr;
            for m in 0..dl {
                for nn in 0..dr {
                    t.set(i, j, m, nn, g[(m, nn)] * c(scale, 0.0));
                }
            }
        }
        tensors.push(t);
    }
    let canonical = MpoChain::new(
        tensors,
        CVector::from_vec(vec![c(1.0, 0.0)]),
        CVector::from_vec(vec![c(1.0, 0.0)]),
    )?;

    let s_min = per_cut
        .iter()
        .flat_map(|s| s.iter().cloned())
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    Ok(SchmidtData {
        per_cut,
        s_min,
        canonical_tensors: canonical,
    })
}

/// Residual of the left-canonical gauge condition at one site:
/// `(1/d) Σ_{ij} A† (1 ⊗ ..) A = 1` on the right bond.
pub fn left_gauge_residual(t: &MpoTensor) -> f64 {
    let mut acc = CMatrix::zeros(t.d_right, t.d_right);
    for i in 0..t.d_out {
        for j in 0..t.d_in {
            let b = t.bond_matrix(i, j);
            acc += b.adjoint() * b;
        }
    }
    acc /= c(t.d_out as f64, 0.0);
    max_abs_diff(&acc, &linalg::identity(t.d_right))
}

/// Conditioning number from the canonical choice `L = 1`, `R = diag(s_k)`:
/// `max_k sqrt(Σ_i s_{k,i}^{-2})`, plus the cruder `sqrt(D)/s_min` bound.
pub struct SchmidtBound {
    pub q: f64,
    pub per_cut_q: Vec<f64>,
    pub crude_bound: f64,
}

pub fn schmidt_bound_q(data: &SchmidtData) -> SchmidtBound {
    let per_cut_q: Vec<f64> = data
        .per_cut
        .iter()
        .map(|s| s.iter().map(|x| 1.0 / (x * x)).sum::<f64>().sqrt())
        .collect();
    let q = per_cut_q.iter().cloned().fold(1.0, f64::max);
    let d = data.max_bond() as f64;
    let crude = d.sqrt() / data.s_min;
    debug_assert!(q <= crude + 1e-9 * crude.max(1.0));
    SchmidtBound {
        q,
        per_cut_q,
        crude_bound: crude,
    }
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SiteJson {
    d_out: usize,
    d_in: usize,
    #[serde(rename = "D_left")]
    d_left: usize,
    #[serde(rename = "D_right")]
    d_right: usize,
    /// complex entries as [re, im], index order (i, j, m, n) row-major
    entries: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ChainJson {
    sites: Vec<SiteJson>,
    l: Vec<[f64; 2]>,
    r: Vec<[f64; 2]>,
}

pub fn chain_to_json(chain: &MpoChain) -> String {
    let doc = ChainJson {
        sites: chain
            .tensors
            .iter()
            .map(|t| SiteJson {
                d_out: t.d_out,
                d_in: t.d_in,
                d_left: t.d_left,
                d_right: t.d_right,
                entries: t.entries().iter().map(|v| [v.re, v.im]).collect(),
            })
            .collect(),
        l: chain.left_boundary.iter().map(|v| [v.re, v.im]).collect(),
        r: chain.right_boundary.iter().map(|v| [v.re, v.im]).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("chain serialization")
}

pub fn chain_from_json(text: &str) -> Result<MpoChain> {
    let doc: ChainJson = serde_json::from_str(text)
        .map_err(|e| Error::Validation(format!("bad chain JSON: {e}")))?;
    let mut tensors = Vec::with_capacity(doc.sites.len());
    for s in doc.sites {
        let entries: Vec<Complex64> = s.entries.iter().map(|&[re, im]| c(re, im)).collect();
        tensors.push(MpoTensor::from_entries(
            s.d_out, s.d_in, s.d_left, s.d_right, entries,
        )?);
    }
    let l = CVector::from_vec(doc.l.iter().map(|&[re, im]| c(re, im)).collect());
    let r = CVector::from_vec(doc.r.iter().map(|&[re, im]| c(re, im)).collect());
    MpoChain::new(tensors, l, r)
}

#[allow(unused)]
fn default_tol() -> f64 {
    DEFAULT_TOL
}
