//! Small dense complex linear-algebra kit.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>` (column-major, so a grid's
//! storage order is its canonical delay-fastest vectorization). The Hermitian
//! factorizations here are hand-written so their floating-point work can be
//! metered with a [`FlopCounter`].

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Real floating-point operations: a complex multiply-add counts as 8.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct FlopCounter(pub u64);

impl FlopCounter {
    #[inline]
    pub fn cmac(&mut self, n: u64) {
        self.0 += 8 * n;
    }

    #[inline]
    pub fn real(&mut self, n: u64) {
        self.0 += n;
    }
}

/// `AᴴA`, exploiting Hermitian symmetry.
pub fn gram(a: &CMatrix, flops: &mut FlopCounter) -> CMatrix {
    let n = a.ncols();
    let rows = a.nrows();
    let mut g = CMatrix::zeros(n, n);
    for j in 0..n {
        let cj = a.column(j);
        let cj = cj.as_slice();
        for i in 0..=j {
            let ci = a.column(i);
            let v = cdot_conj(ci.as_slice(), cj);
            g[(i, j)] = v;
            g[(j, i)] = v.conj();
        }
    }
    flops.cmac((rows * n * (n + 1) / 2) as u64);
    g
}

/// `Σ conj(a_i)·b_i`
#[inline]
pub fn cdot_conj(a: &[C64], b: &[C64]) -> C64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C64::new(re, im)
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖a − b‖² / ‖b‖²`; returns the raw squared error when `b` is zero.
pub fn nmse(estimate: &[C64], truth: &[C64]) -> f64 {
    let err: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    let den = norm_sqr(truth);
    if den > 0.0 {
        err / den
    } else {
        err
    }
}

/// Cholesky factor of a Hermitian positive-definite matrix, stored as the
/// upper triangle `U` with `A = UᴴU` so that every inner loop runs down a
/// contiguous column.
#[derive(Debug, Clone)]
pub struct Cholesky {
    u: CMatrix,
}

impl Cholesky {
    pub fn factor(a: &CMatrix, flops: &mut FlopCounter) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::dim(format!("{n}x{n}"), format!("{}x{}", n, a.ncols())));
        }
        let mut u = CMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..j {
                let (ci, cj) = (u.column(i), u.column(j));
                let s = a[(i, j)] - cdot_conj(&ci.as_slice()[..i], &cj.as_slice()[..i]);
                u[(i, j)] = s / u[(i, i)].re;
            }
            flops.cmac((j * j.saturating_sub(1) / 2) as u64);
            let cj = u.column(j);
            let d = a[(j, j)].re - norm_sqr(&cj.as_slice()[..j]);
            flops.real(2 * j as u64);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:.3e} at column {j}"
                )));
            }
            u[(j, j)] = C64::new(d.sqrt(), 0.0);
        }
        Ok(Self { u })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64], flops: &mut FlopCounter) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        // forward: Uᴴ y = b
        for i in 0..n {
            let ci = self.u.column(i);
            let s = b[i] - cdot_conj(&ci.as_slice()[..i], &b[..i]);
            b[i] = s / self.u[(i, i)].re;
        }
        // backward: U x = y, column sweep
        for i in (0..n).rev() {
            let xi = b[i] / self.u[(i, i)].re;
            b[i] = xi;
            let ci = self.u.column(i);
            for (bk, uk) in b[..i].iter_mut().zip(&ci.as_slice()[..i]) {
                *bk -= uk * xi;
            }
        }
        flops.cmac((n * n) as u64);
    }

    pub fn solve(&self, b: &[C64], flops: &mut FlopCounter) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x, flops);
        x
    }
}

/// Factorization of `AᴴA + ρI` for a dense `A`, with `Aᴴ` applied on demand.
#[derive(Debug, Clone)]
pub struct RidgeSolver {
    chol: Cholesky,
    pub rho: f64,
}

impl RidgeSolver {
    pub fn new(a: &CMatrix, rho: f64, flops: &mut FlopCounter) -> Result<Self> {
        let g = gram(a, flops);
        Self::from_gram(g, rho, flops)
    }

    pub fn from_gram(mut g: CMatrix, rho: f64, flops: &mut FlopCounter) -> Result<Self> {
        if rho < 0.0 || !rho.is_finite() {
            return Err(Error::InvalidParameter(format!("ridge rho must be >= 0, got {rho}")));
        }
        for i in 0..g.nrows() {
            g[(i, i)] += rho;
        }
        Ok(Self {
            chol: Cholesky::factor(&g, flops)?,
            rho,
        })
    }

    pub fn solve(&self, rhs: &[C64], flops: &mut FlopCounter) -> Vec<C64> {
        self.chol.solve(rhs, flops)
    }
}

/// `Aᴴ v`
pub fn adjoint_mul(a: &CMatrix, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.nrows(), v.len());
    (0..a.ncols())
        .map(|j| cdot_conj(a.column(j).as_slice(), v))
        .collect()
}

/// `A v`
pub fn mat_vec(a: &CMatrix, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), v.len());
    let mut out = vec![C64::new(0.0, 0.0); a.nrows()];
    for (j, &vj) in v.iter().enumerate() {
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(a.column(j).iter()) {
            *o += aij * vj;
        }
    }
    out
}

/// Unitary DFT matrix `F[k,n] = e^{-j2πkn/N}/√N`.
pub fn dft_matrix(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, m| {
        let phase = -2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64;
        C64::from_polar(scale, phase)
    })
}

/// How a length-`n` unitary DFT is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DftBackend {
    /// Explicit matrix product; exact reference path.
    #[default]
    Matrix,
    /// FFT via `rustfft`.
    Fast,
}

/// Unitary DFT of a fixed length, applied either by matrix or FFT.
#[derive(Clone)]
pub struct UnitaryDft {
    n: usize,
    matrix: CMatrix,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    backend: DftBackend,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft")
            .field("n", &self.n)
            .field("backend", &self.backend)
            .finish()
    }
}

impl UnitaryDft {
    pub fn new(n: usize, backend: DftBackend) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            matrix: dft_matrix(n),
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            backend,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// In-place transform of a contiguous length-`n` buffer.
    pub fn apply(&self, buf: &mut [C64], inverse: bool) {
        debug_assert_eq!(buf.len(), self.n);
        match self.backend {
            DftBackend::Matrix => {
                let out: Vec<C64> = (0..self.n)
                    .map(|k| {
                        let mut s = C64::new(0.0, 0.0);
                        for (m, &x) in buf.iter().enumerate() {
                            let f = self.matrix[(k, m)];
                            s += if inverse { f.conj() } else { f } * x;
                        }
                        s
                    })
                    .collect();
                buf.copy_from_slice(&out);
            }
            DftBackend::Fast => {
                if inverse {
                    self.inv.process(buf);
                } else {
                    self.fwd.process(buf);
                }
                let scale = 1.0 / (self.n as f64).sqrt();
                buf.iter_mut().for_each(|z| *z *= scale);
            }
        }
    }

    /// `(F ⊗ I_inner) v` (or `Fᴴ ⊗ I_inner` when `inverse`), `v[i + inner·n]`.
    pub fn apply_kron_identity(
        &self,
        v: &[C64],
        inner: usize,
        inverse: bool,
        flops: &mut FlopCounter,
    ) -> Vec<C64> {
        assert_eq!(v.len(), inner * self.n);
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        let mut line = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..inner {
            for (t, slot) in line.iter_mut().enumerate() {
                *slot = v[i + inner * t];
            }
            self.apply(&mut line, inverse);
            for (t, &z) in line.iter().enumerate() {
                out[i + inner * t] = z;
            }
        }
        flops.cmac((inner * self.n * self.n) as u64);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(9, 6, &mut rng);
        let mut flops = FlopCounter::default();
        let solver = RidgeSolver::new(&a, 0.3, &mut flops).unwrap();
        let b: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 1.0)).collect();
        let x = solver.solve(&b, &mut flops);
        let w = a.adjoint() * &a + CMatrix::identity(6, 6) * C64::new(0.3, 0.0);
        let back = mat_vec(&w, &x);
        for (p, q) in back.iter().zip(&b) {
            assert!((p - q).norm() < 1e-12);
        }
        assert!(flops.0 > 0);
    }

    #[test]
    fn cholesky_rejects_singular() {
        let a = CMatrix::zeros(3, 3);
        assert!(matches!(
            Cholesky::factor(&a, &mut FlopCounter::default()),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn fast_dft_matches_matrix_dft() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1, 2, 5, 8, 20, 64] {
            let x: Vec<C64> = (0..n)
                .map(|_| C64::new(rng.random(), rng.random()))
                .collect();
            let slow = UnitaryDft::new(n, DftBackend::Matrix);
            let fast = UnitaryDft::new(n, DftBackend::Fast);
            for inverse in [false, true] {
                let mut a = x.clone();
                let mut b = x.clone();
                slow.apply(&mut a, inverse);
                fast.apply(&mut b, inverse);
                for (p, q) in a.iter().zip(&b) {
                    assert!((p - q).norm() < 1e-12, "n={n}");
                }
            }
        }
    }

    #[test]
    fn dft_is_unitary() {
        let f = dft_matrix(7);
        let id = f.adjoint() * &f;
        for i in 0..7 {
            for j in 0..7 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - C64::new(e, 0.0)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn gram_matches_nalgebra_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(7, 5, &mut rng);
        let g = gram(&a, &mut FlopCounter::default());
        let reference = a.adjoint() * &a;
        assert!((g - reference).norm() < 1e-13);
    }
}
