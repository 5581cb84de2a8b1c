//! Reference DFT math: the direct O(N²) transform used as the oracle, twiddle
//! factors, and the single-node two-step Cooley-Tukey split.
//!
//! Convention: ω_N = exp(−2πi/N). The input vector fills the N₁×N₂ matrix X
//! column-major (`X[n1][n2] = x[n2·N1 + n1]`), and the output is read back with
//! `k = k1·N2 + k2`, i.e. the row-major flattening of Z.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Float;

use crate::matrix::ComplexMatrix;
use crate::{ceil_log2, Error};

/// ω_N^k, with the exponent reduced mod N first so large products stay accurate.
pub fn omega(n: usize, k: usize) -> Complex64 {
    let k = k % n;
    let theta = -2.0 * PI * (k as f64) / (n as f64);
    Complex64::new(Float::cos(theta), Float::sin(theta))
}

/// The N×N DFT matrix, `F[j][k] = ω_N^{jk}`.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |j, k| omega(n, j * k))
}

pub fn dft_direct(x: &[Complex64]) -> Result<Vec<Complex64>, Error> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, xj) in x.iter().enumerate() {
            acc += omega(n, j * k) * xj;
        }
        out.push(acc);
    }
    Ok(out)
}

/// Problem geometry shared by the pipelines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DftPlan {
    pub n: usize,
    pub n1: usize,
    pub n2: usize,
    pub k: usize,
    pub p: usize,
}

impl DftPlan {
    pub fn new(n: usize, n1: usize, n2: usize, k: usize, p: usize) -> Result<Self, Error> {
        let plan = Self { n, n1, n2, k, p };
        plan.validate()?;
        Ok(plan)
    }

    /// Square-ish split of N chosen by the caller's convenience: N₁ = 2^⌈log₂N / 2⌉.
    pub fn square(n: usize, k: usize, p: usize) -> Result<Self, Error> {
        if !crate::is_pow2(n) {
            return Err(Error::InvalidPlan(format!("square split needs a power-of-two N, got {n}")));
        }
        let n1 = 1usize << ceil_log2(n).div_ceil(2);
        Self::new(n, n1, n / n1, k, p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let Self { n, n1, n2, k, p } = *self;
        if n == 0 || n1 == 0 || n2 == 0 {
            return Err(Error::InvalidPlan(format!("sizes must be positive (N={n}, N1={n1}, N2={n2})")));
        }
        if n1.checked_mul(n2) != Some(n) {
            return Err(Error::InvalidPlan(format!("N1·N2 = {}·{} ≠ N = {n}", n1, n2)));
        }
        // K | N1 and K | N2 already give K² ≤ N; K² = N (one symbol per tile) is allowed.
        if k == 0 || n1 % k != 0 || n2 % k != 0 {
            return Err(Error::InvalidPlan(format!("K = {k} must divide N1 = {n1} and N2 = {n2}")));
        }
        if k >= p {
            return Err(Error::InvalidPlan(format!("need K < P, got K = {k}, P = {p}")));
        }
        Ok(())
    }

    /// Symbols held per systematic node (N/K).
    pub fn per_node(&self) -> usize {
        self.n / self.k
    }
}

/// `X[n1][n2] = x[n2·N1 + n1]`.
pub fn input_matrix(x: &[Complex64], plan: &DftPlan) -> Result<ComplexMatrix, Error> {
    if x.len() != plan.n {
        return Err(Error::Shape { expected: (plan.n, 1), found: (x.len(), 1) });
    }
    Ok(ComplexMatrix::from_fn(plan.n1, plan.n2, |i, j| x[j * plan.n1 + i]))
}

/// Inverse of [`input_matrix`].
pub fn input_vector(m: &ComplexMatrix) -> Vec<Complex64> {
    let (n1, n2) = m.shape();
    let mut x = alloc::vec![Complex64::new(0.0, 0.0); n1 * n2];
    for i in 0..n1 {
        for j in 0..n2 {
            x[j * n1 + i] = m[(i, j)];
        }
    }
    x
}

/// `z[k1·N2 + k2] = Z[k1][k2]`.
pub fn output_vector(z: &ComplexMatrix) -> Vec<Complex64> {
    z.as_slice().to_vec()
}

/// Entry (n1, k2) is ω_N^{n1·k2}.
pub fn twiddle_matrix(plan: &DftPlan) -> Result<ComplexMatrix, Error> {
    plan.validate()?;
    Ok(twiddle_block(plan, 0, plan.n2))
}

/// Columns `c0..c0+nc` of the twiddle matrix.
pub fn twiddle_block(plan: &DftPlan, c0: usize, nc: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(plan.n1, nc, |n1, j| omega(plan.n, n1 * (c0 + j)))
}

pub fn hadamard(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, Error> {
    a.check_same_shape(b)?;
    let data = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).collect();
    ComplexMatrix::from_vec(a.rows(), a.cols(), data)
}

/// DFT of every row: `M · F_cols`.
pub fn row_ffts(m: &ComplexMatrix) -> ComplexMatrix {
    m.matmul(&dft_matrix(m.cols())).expect("square DFT matrix always conforms")
}

/// DFT of every column: `F_rows · M`.
pub fn col_ffts(m: &ComplexMatrix) -> ComplexMatrix {
    dft_matrix(m.rows()).matmul(m).expect("square DFT matrix always conforms")
}

/// Rearrange → row FFTs → twiddle → column FFTs → output map, on one node.
pub fn cooley_tukey_reference(x: &[Complex64], plan: &DftPlan) -> Result<Vec<Complex64>, Error> {
    plan.validate()?;
    let xm = input_matrix(x, plan)?;
    let y = row_ffts(&xm);
    let w = hadamard(&twiddle_matrix(plan)?, &y)?;
    Ok(output_vector(&col_ffts(&w)))
}

/// `max |A∘(BC) − (A∘B)C|`.
pub fn twiddle_order_difference(a: &ComplexMatrix, b: &ComplexMatrix, c: &ComplexMatrix) -> Result<f64, Error> {
    let left = hadamard(a, &b.matmul(c)?)?;
    let right = hadamard(a, b)?.matmul(c)?;
    left.max_abs_diff(&right)
}

pub const WITNESS_SEED: u64 = 0x7769_646c;

/// Fixed-seed 4×4 triple showing the Hadamard product does not commute with a
/// right matrix product, so a row-wise encoding cannot be hoisted in front of
/// the twiddle step.
pub fn twiddle_order_witness() -> (ComplexMatrix, ComplexMatrix, ComplexMatrix, f64) {
    let mat = |seed| ComplexMatrix::from_vec(4, 4, crate::random_input(16, seed)).expect("16 entries");
    let (a, b, c) = (mat(WITNESS_SEED), mat(WITNESS_SEED + 1), mat(WITNESS_SEED + 2));
    let d = twiddle_order_difference(&a, &b, &c).expect("4×4 shapes");
    (a, b, c, d)
}
