//! Systematic (P,K) MDS codes over the complex numbers.
//!
//! Generators have the form `[I_K | 𝒫]`. A codeword of K data blocks is the P
//! blocks `c_j = Σ_i G[i][j]·d_i`; applying the scalar code block-wise is the
//! same as multiplying by `Gᵀ ⊗ I_b`.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::dft::omega;
use crate::matrix::ComplexMatrix;
use crate::Error;

/// Minors below this modulus count as singular.
pub const MINOR_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct MdsCodeSpec {
    p: usize,
    k: usize,
    generator: ComplexMatrix,
}

impl MdsCodeSpec {
    /// Wrap an explicit `[I_K | 𝒫]` generator after checking its shape and
    /// identity prefix.
    pub fn from_generator(generator: ComplexMatrix) -> Result<Self, Error> {
        let (k, p) = generator.shape();
        if k == 0 || k >= p {
            return Err(Error::InvalidCode(format!("need 1 ≤ K < P, got K = {k}, P = {p}")));
        }
        if generator.submatrix(0, k, 0, k) != ComplexMatrix::identity(k) {
            return Err(Error::InvalidCode("generator is not in systematic form".into()));
        }
        Ok(Self { p, k, generator })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn parity_count(&self) -> usize {
        self.p - self.k
    }

    pub fn generator(&self) -> &ComplexMatrix {
        &self.generator
    }

    /// Coefficient of data block `i` in parity block `j` (0-based among parities).
    pub fn parity_coeff(&self, i: usize, j: usize) -> Complex64 {
        self.generator[(i, self.k + j)]
    }

    /// The K×(P−K) parity section 𝒫.
    pub fn parity(&self) -> ComplexMatrix {
        self.generator.submatrix(0, self.k, self.k, self.p - self.k)
    }

    /// Smallest |det| over all K-column minors, computed through the parity
    /// section: picking systematic columns A and parity columns B leaves
    /// `|det| = |det 𝒫[[K]∖A, B]|`, so only square parity submatrices of size
    /// ≤ P−K need visiting.
    pub fn min_minor(&self) -> f64 {
        let par = self.parity();
        let r = self.p - self.k;
        let mut min = f64::INFINITY;
        for size in 1..=r.min(self.k) {
            for_each_subset(self.k, size, |rows| {
                for_each_subset(r, size, |cols| {
                    let sub = ComplexMatrix::from_fn(size, size, |a, b| par[(rows[a], cols[b])]);
                    min = min.min(determinant(&sub).norm());
                });
            });
        }
        min
    }
}

/// Vandermonde code at the P-th roots of unity, reduced to `[I_K | 𝒫]`.
///
/// The full minor check runs when P ≤ 64 and P−K ≤ 4; larger codes only get
/// their single entries checked, since the exhaustive scan grows as C(K, P−K).
pub fn make_systematic_mds(p: usize, k: usize) -> Result<MdsCodeSpec, Error> {
    if k == 0 || k >= p {
        return Err(Error::InvalidCode(format!("need 1 ≤ K < P, got K = {k}, P = {p}")));
    }
    let v = ComplexMatrix::from_fn(k, p, |i, j| omega(p, (p - (i * j) % p) % p));
    let head = v.submatrix(0, k, 0, k);
    let parity =
        solve(&head, &v.submatrix(0, k, k, p - k)).ok_or_else(|| Error::InvalidCode(format!("Vandermonde head singular for ({p},{k})")))?;
    let mut g = ComplexMatrix::zeros(k, p);
    g.set_submatrix(0, 0, &ComplexMatrix::identity(k));
    g.set_submatrix(0, k, &parity);
    let spec = MdsCodeSpec { p, k, generator: g };
    let worst =
        if p <= 64 && p - k <= 4 { spec.min_minor() } else { parity.as_slice().iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min) };
    if worst.is_nan() || worst <= MINOR_TOLERANCE {
        return Err(Error::InvalidCode(format!("({p},{k}) code has a minor of modulus {worst:e}")));
    }
    Ok(spec)
}

/// `[I_K | 1]`: a single parity node holding the plain sum.
pub fn make_checksum_code(k: usize) -> Result<MdsCodeSpec, Error> {
    if k == 0 {
        return Err(Error::InvalidCode("checksum code needs K ≥ 1".into()));
    }
    let g = ComplexMatrix::from_fn(k, k + 1, |i, j| if j == k || i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) });
    MdsCodeSpec::from_generator(g)
}

/// A scalar code applied block-wise to blocks of `block` symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCode {
    pub spec: MdsCodeSpec,
    pub block: usize,
}

impl BlockCode {
    pub fn new(spec: MdsCodeSpec, block: usize) -> Self {
        Self { spec, block }
    }

    /// `G ⊗ I_b`, (K·b) × (P·b).
    pub fn expanded_generator(&self) -> ComplexMatrix {
        let (b, g) = (self.block, self.spec.generator());
        ComplexMatrix::from_fn(g.rows() * b, g.cols() * b, |r, c| if r % b == c % b { g[(r / b, c / b)] } else { Complex64::new(0.0, 0.0) })
    }

    fn check_block(&self, m: &ComplexMatrix, shape: (usize, usize)) -> Result<(), Error> {
        if m.shape() != shape || m.len() != self.block {
            return Err(Error::Shape { expected: shape, found: m.shape() });
        }
        Ok(())
    }

    /// Systematic blocks are passed through untouched; parity `j` is
    /// `Σ_i 𝒫[i][j]·d_i`, summed in ascending i.
    pub fn encode_blocks(&self, data: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>, Error> {
        let k = self.spec.k();
        if data.len() != k {
            return Err(Error::InvalidArgument(format!("expected {k} data blocks, got {}", data.len())));
        }
        let shape = data[0].shape();
        for d in data {
            self.check_block(d, shape)?;
        }
        let mut out: Vec<ComplexMatrix> = data.to_vec();
        for j in 0..self.spec.parity_count() {
            let mut acc = ComplexMatrix::zeros(shape.0, shape.1);
            for (i, d) in data.iter().enumerate() {
                acc.axpy(self.spec.parity_coeff(i, j), d)?;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Recover the K data blocks from exactly K distinct surviving codeword
    /// blocks. Surviving systematic blocks are returned verbatim; only the
    /// missing ones are solved for, from the surviving parities.
    pub fn decode_from_surviving(&self, surviving: &[(usize, ComplexMatrix)]) -> Result<Vec<ComplexMatrix>, Error> {
        let (k, p) = (self.spec.k(), self.spec.p());
        if surviving.len() != k {
            return Err(Error::InvalidArgument(format!("need exactly {k} survivors, got {}", surviving.len())));
        }
        let shape = surviving[0].1.shape();
        let mut seen = alloc::vec![false; p];
        for (idx, m) in surviving {
            if *idx >= p || seen[*idx] {
                return Err(Error::InvalidArgument(format!("survivor index {idx} out of range or repeated")));
            }
            seen[*idx] = true;
            self.check_block(m, shape)?;
        }
        let mut out: Vec<Option<ComplexMatrix>> = alloc::vec![None; k];
        let mut parities = Vec::new();
        for (idx, m) in surviving {
            if *idx < k {
                out[*idx] = Some(m.clone());
            } else {
                parities.push((*idx - k, m));
            }
        }
        let missing: Vec<usize> = (0..k).filter(|&i| out[i].is_none()).collect();
        if !missing.is_empty() {
            parities.sort_by_key(|(j, _)| *j);
            // Row t: c_{j_t} − Σ_{known i} 𝒫[i][j_t] d_i = Σ_{missing i} 𝒫[i][j_t] d_i.
            let m = missing.len();
            let a = ComplexMatrix::from_fn(m, m, |t, u| self.spec.parity_coeff(missing[u], parities[t].0));
            let rhs = ComplexMatrix::from_fn(m, self.block, |t, s| {
                let j = parities[t].0;
                let mut v = parities[t].1.as_slice()[s];
                for (i, d) in out.iter().enumerate() {
                    if let Some(d) = d {
                        v -= self.spec.parity_coeff(i, j) * d.as_slice()[s];
                    }
                }
                v
            });
            let sol = solve(&a, &rhs)
                .ok_or_else(|| Error::Singular(format!("surviving parities {:?}", parities.iter().map(|p| p.0).collect::<Vec<_>>())))?;
            for (u, &i) in missing.iter().enumerate() {
                let row = sol.row(u).to_vec();
                out[i] = Some(ComplexMatrix::from_vec(shape.0, shape.1, row)?);
            }
        }
        Ok(out.into_iter().map(|m| m.expect("all blocks filled")).collect())
    }
}

/// Solve `A X = B` by Gaussian elimination with partial pivoting; `None` when a
/// pivot vanishes.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Option<ComplexMatrix> {
    let n = a.rows();
    assert_eq!(a.cols(), n);
    assert_eq!(b.rows(), n);
    let mut a = a.clone();
    let mut b = b.clone();
    let w = b.cols();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm()))?;
        if a[(piv, col)].norm() < 1e-14 {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            for j in 0..w {
                let t = b[(col, j)];
                b[(col, j)] = b[(piv, j)];
                b[(piv, j)] = t;
            }
        }
        let inv = a[(col, col)].inv();
        for i in col + 1..n {
            let f = a[(i, col)] * inv;
            if f.norm() == 0.0 {
                continue;
            }
            for j in col..n {
                let v = a[(col, j)];
                a[(i, j)] -= f * v;
            }
            for j in 0..w {
                let v = b[(col, j)];
                b[(i, j)] -= f * v;
            }
        }
    }
    let mut x = ComplexMatrix::zeros(n, w);
    for i in (0..n).rev() {
        for j in 0..w {
            let mut v = b[(i, j)];
            for t in i + 1..n {
                v -= a[(i, t)] * x[(t, j)];
            }
            x[(i, j)] = v / a[(i, i)];
        }
    }
    Some(x)
}

/// Determinant by partial-pivot elimination.
pub fn determinant(a: &ComplexMatrix) -> Complex64 {
    let n = a.rows();
    let mut a = a.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm())).expect("non-empty");
        if a[(piv, col)].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            for j in 0..n {
                let t = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = t;
            }
            det = -det;
        }
        det *= a[(col, col)];
        for i in col + 1..n {
            let f = a[(i, col)] / a[(col, col)];
            for j in col..n {
                let v = a[(col, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    det
}

/// Calls `f` on every increasing `size`-subset of `0..n`, in lexicographic order.
pub fn for_each_subset(n: usize, size: usize, mut f: impl FnMut(&[usize])) {
    if size > n {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - size {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn scalar(x: f64) -> ComplexMatrix {
        ComplexMatrix::from_vec(1, 1, vec![c(x)]).unwrap()
    }

    #[test]
    fn subsets_enumerate() {
        let mut all = Vec::new();
        for_each_subset(4, 2, |s| all.push(s.to_vec()));
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut n = 0;
        for_each_subset(3, 0, |_| n += 1);
        assert_eq!(n, 1);
        for_each_subset(2, 3, |_| panic!());
    }

    #[test]
    fn checksum_generators() {
        let g = make_checksum_code(2).unwrap();
        assert_eq!(g.generator().as_slice(), &[c(1.0), c(0.0), c(1.0), c(0.0), c(1.0), c(1.0)]);
        assert_eq!(make_checksum_code(1).unwrap().generator().as_slice(), &[c(1.0), c(1.0)]);
        assert!(make_checksum_code(0).is_err());
    }

    #[test]
    fn systematic_rejects_degenerate() {
        assert!(make_systematic_mds(4, 4).is_err());
        assert!(make_systematic_mds(4, 0).is_err());
    }

    #[test]
    fn vandermonde_3_2_parity() {
        // Interpolating the data at ω⁰, ω¹ and evaluating at ω² (ω = e^{2πi/3})
        // gives the parity column (−ω, −ω²).
        let g = make_systematic_mds(3, 2).unwrap();
        let w = Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI / 3.0);
        assert!((g.parity_coeff(0, 0) + w).norm() < 1e-12);
        assert!((g.parity_coeff(1, 0) + w * w).norm() < 1e-12);
    }

    #[test]
    fn code_4_2_minors() {
        let g = make_systematic_mds(4, 2).unwrap();
        let mut count = 0;
        for_each_subset(4, 2, |s| {
            let sub = ComplexMatrix::from_fn(2, 2, |i, j| g.generator()[(i, s[j])]);
            assert!(determinant(&sub).norm() > 1e-8);
            count += 1;
        });
        assert_eq!(count, 6);
    }

    #[test]
    fn codes_up_to_64_construct() {
        for p in 2..=64 {
            for r in 1..=4.min(p - 1) {
                let g = make_systematic_mds(p, p - r).unwrap();
                assert!(g.min_minor() > 1e-8);
            }
        }
    }

    #[test]
    fn checksum_encode_decode() {
        let code = BlockCode::new(make_checksum_code(2).unwrap(), 1);
        let cw = code.encode_blocks(&[scalar(1.0), scalar(2.0)]).unwrap();
        assert_eq!(cw, vec![scalar(1.0), scalar(2.0), scalar(3.0)]);
        let dec = code.decode_from_surviving(&[(1, scalar(2.0)), (2, scalar(3.0))]).unwrap();
        assert_eq!(dec, vec![scalar(1.0), scalar(2.0)]);
        let zero = code.encode_blocks(&[scalar(0.0), scalar(0.0)]).unwrap();
        assert!(zero.iter().all(|m| m.max_abs() == 0.0));
    }

    #[test]
    fn passthrough_is_verbatim() {
        let code = BlockCode::new(make_systematic_mds(5, 3).unwrap(), 4);
        let data: Vec<_> = (0..3).map(|i| ComplexMatrix::from_vec(2, 2, crate::random_input(4, i)).unwrap()).collect();
        let surv: Vec<_> = vec![(2, data[2].clone()), (0, data[0].clone()), (1, data[1].clone())];
        assert_eq!(code.decode_from_surviving(&surv).unwrap(), data);
    }

    #[test]
    fn kronecker_matches_blockwise() {
        let code = BlockCode::new(make_systematic_mds(4, 2).unwrap(), 4);
        let data: Vec<_> = (0..2).map(|i| ComplexMatrix::from_vec(2, 2, crate::random_input(4, 40 + i)).unwrap()).collect();
        let cw = code.encode_blocks(&data).unwrap();
        let flat: Vec<Complex64> = data.iter().flat_map(|m| m.as_slice().to_vec()).collect();
        let d = ComplexMatrix::from_vec(8, 1, flat).unwrap();
        let full = code.expanded_generator().transpose().matmul(&d).unwrap();
        for (j, blk) in cw.iter().enumerate() {
            for s in 0..4 {
                assert!((full.as_slice()[j * 4 + s] - blk.as_slice()[s]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn all_subsets_decode_5_3() {
        let code = BlockCode::new(make_systematic_mds(5, 3).unwrap(), 6);
        let data: Vec<_> = (0..3).map(|i| ComplexMatrix::from_vec(2, 3, crate::random_input(6, 90 + i)).unwrap()).collect();
        let cw = code.encode_blocks(&data).unwrap();
        let mut n = 0;
        for_each_subset(5, 3, |s| {
            let surv: Vec<_> = s.iter().map(|&i| (i, cw[i].clone())).collect();
            let dec = code.decode_from_surviving(&surv).unwrap();
            for (a, b) in dec.iter().zip(&data) {
                assert!(a.max_abs_diff(b).unwrap() <= 1e-8 * b.max_abs());
            }
            n += 1;
        });
        assert_eq!(n, 10);
    }

    #[test]
    fn decode_rejects_bad_survivor_sets() {
        let code = BlockCode::new(make_checksum_code(2).unwrap(), 1);
        assert!(code.decode_from_surviving(&[(0, scalar(1.0))]).is_err());
        assert!(code.decode_from_surviving(&[(0, scalar(1.0)), (0, scalar(1.0))]).is_err());
        assert!(code.encode_blocks(&[scalar(1.0), ComplexMatrix::zeros(1, 2)]).is_err());
    }
}
