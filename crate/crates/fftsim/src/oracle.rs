//! Reference DFT for checking pipeline output.

use codedfft::dft::dft_direct;
use codedfft::Complex64;
use rustfft::FftPlanner;

/// Up to this length the O(N²) direct product is the reference; beyond it
/// a library FFT takes over.
pub const DIRECT_LIMIT: usize = 4096;

pub fn reference_dft(x: &[Complex64]) -> Vec<Complex64> {
    if x.len() <= DIRECT_LIMIT {
        return dft_direct(x).unwrap_or_default();
    }
    let mut buf = x.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use codedfft::matrix::rel_err;

    #[test]
    fn library_fft_agrees_with_direct() {
        let x = codedfft::random_input(2048, 11);
        let mut buf = x.clone();
        FftPlanner::<f64>::new().plan_fft_forward(x.len()).process(&mut buf);
        assert!(rel_err(&buf, &dft_direct(&x).unwrap()) < 1e-10);
    }
}
