//! Dense complex kernels on top of nalgebra storage.

use matrixmultiply::{zgemm, CGemmOption};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Fixed seed so every probe-based estimate is reproducible.
pub const PROBE_SEED: u64 = 0x005e_ed0f_9e11;

/// `C = A B` via the blocked complex gemm kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // Complex64 is repr(C) {re, im}, identical in layout to [f64; 2].
    unsafe {
        zgemm(
            CGemmOption::Standard,
            CGemmOption::Standard,
            m,
            k,
            n,
            [1.0, 0.0],
            a.as_ptr() as *const [f64; 2],
            1,
            m as isize,
            b.as_ptr() as *const [f64; 2],
            1,
            k as isize,
            [0.0, 0.0],
            c.as_mut_ptr() as *mut [f64; 2],
            1,
            m as isize,
        );
    }
    c
}

/// Frobenius norm.
pub fn fro(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest |entry|.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Deterministic complex Gaussian-ish probe vectors (columns).
pub fn probes(n: usize, count: usize, seed: u64) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMat::from_fn(n, count, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    })
}

/// Spectral norm estimate by power iteration on `AᴴA`.
pub fn spectral_norm(a: &CMat, iters: usize) -> f64 {
    let n = a.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut v = probes(n, 1, PROBE_SEED).column(0).into_owned();
    let mut est = 0.0;
    for _ in 0..iters {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        v /= C64::new(nv, 0.0);
        let w = a * &v;
        est = w.norm();
        v = a.adjoint() * w;
    }
    est
}

/// Hermitian part `(A + Aᴴ)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eig_hermitian(a: &CMat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `f(A)` for Hermitian `A`, applied through its eigenvalues.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| C64::new(f(l), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

/// Eigenvalues of a general complex matrix, read off the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<C64> {
    match nalgebra::linalg::Schur::try_new(a.clone(), 1e-13, 20_000) {
        Some(s) => s.unpack().1.diagonal().iter().cloned().collect(),
        None => Vec::new(),
    }
}

/// LU factorisation reusable for several right-hand sides.
pub struct Lu {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Lu {
    /// Returns `None` if the matrix is numerically singular.
    pub fn new(a: CMat) -> Option<Self> {
        let lu = a.lu();
        if !lu.is_invertible() {
            return None;
        }
        let u = lu.u();
        let d: Vec<f64> = u.diagonal().iter().map(|z| z.norm()).collect();
        let mx = d.iter().cloned().fold(0.0, f64::max);
        let mn = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(mn > 1e-14 * mx) || !mx.is_finite() {
            return None;
        }
        Some(Self { lu })
    }

    pub fn solve(&self, b: &CVec) -> Option<CVec> {
        self.lu.solve(b)
    }

    pub fn inverse(&self) -> Option<CMat> {
        self.lu.try_inverse()
    }
}
