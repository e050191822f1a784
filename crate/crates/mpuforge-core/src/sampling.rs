//! Seeded random generators used by the property suites and tests.
//! Everything is replayable from a `u64` seed.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, svd, CMatrix, CVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. standard complex Gaussian (Box-Muller on uniform pairs).
pub fn random_cmatrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let r = (-2.0 * u1.ln()).sqrt();
        c(r * u2.cos(), r * u2.sin())
    })
}

/// Haar-ish random unitary from the SVD factors of a Gaussian matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = random_cmatrix(rng, n, n);
    let s = svd(&g).expect("svd of random matrix");
    s.u * s.v.adjoint()
}

/// Random density matrix (PSD, unit trace).
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = random_cmatrix(rng, n, n);
    let p = &g * g.adjoint();
    let tr = p.trace().re;
    p.scale(1.0 / tr)
}

/// Random invertible matrix with condition kept moderate (for gauge tests).
pub fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let u = random_unitary(rng, n);
    let v = random_unitary(rng, n);
    let d = CMatrix::from_diagonal(&CVector::from_vec(
        (0..n).map(|_| c(rng.gen_range(0.5..2.0), 0.0)).collect(),
    ));
    u * d * v
}

/// Random normalized state vector.
pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = DVector::<Complex64>::from_fn(n, |_, _| {
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        c(re, im)
    });
    let norm = v.norm();
    v / c(norm, 0.0)
}
