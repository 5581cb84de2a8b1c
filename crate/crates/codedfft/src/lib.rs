//! Coded distributed FFT on a simulated one-port cluster.
//!
//! The crate is `no_std` (it needs `alloc`). It contains the reference DFT
//! math, complex-valued systematic MDS codes, the α-β cost model, a round-based
//! network simulator with the collectives the FFT needs, and the uncoded and
//! coded transpose-FFT pipelines built on top of them.

#![no_std]

extern crate alloc;

use alloc::string::String;

pub mod cost;
pub mod dft;
pub mod matrix;
pub mod mds;
pub mod pipeline;
pub mod sim;

pub use num_complex::Complex64;

pub use cost::{CostBound, CostLedger, CostParams};
pub use dft::DftPlan;
pub use matrix::ComplexMatrix;
pub use mds::{BlockCode, MdsCodeSpec};
pub use sim::{FaultScenario, NodeId, NodeStore, RoundSchedule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape { expected: (usize, usize), found: (usize, usize) },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("invalid code parameters: {0}")]
    InvalidCode(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("unsupported size: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("schedule error: {0}")]
    Schedule(String),
}

/// Seeded input vector with entries uniform in the unit square `[0,1) + i[0,1)`.
pub fn random_input(n: usize, seed: u64) -> alloc::vec::Vec<Complex64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Complex64::new(rng.gen::<f64>(), rng.gen::<f64>())).collect()
}

pub(crate) fn is_pow2(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// ⌈log₂ n⌉ for n ≥ 1; 0 for n ≤ 1.
pub fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_log2_values() {
        let got: alloc::vec::Vec<u32> = [1, 2, 3, 4, 5, 8, 9, 66].iter().map(|&n| ceil_log2(n)).collect();
        assert_eq!(got, [0, 1, 2, 2, 3, 3, 4, 7]);
    }

    #[test]
    fn random_input_is_seeded() {
        let a = random_input(8, 7);
        assert_eq!(a, random_input(8, 7));
        assert_ne!(a, random_input(8, 8));
        assert!(a.iter().all(|z| (0.0..1.0).contains(&z.re) && (0.0..1.0).contains(&z.im)));
    }
}
