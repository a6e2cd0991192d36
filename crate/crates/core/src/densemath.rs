//! Dense complex linear algebra for Hilbert spaces up to a few thousand
//! dimensions.
//!
//! Matrices are stored row-major in a plain [`ComplexMatrix`]. The Hermitian
//! eigensolver delegates to `nalgebra`; everything else is written directly
//! against the row-major layout.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances::{Tolerances, DEFAULT_DIM_CAP};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows.saturating_mul(cols),
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Projector `|ψ⟩⟨ψ|`.
    pub fn outer(psi: &[Complex64]) -> Self {
        let n = psi.len();
        Self::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.cols != v.len() {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Largest entry modulus, `‖A‖_max`.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖A − B‖_max`; shapes must agree.
    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        Ok(self.sub(rhs)?.max_abs())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `‖A†A − I‖_max`.
    pub fn unitarity_residual(&self) -> f64 {
        match self.adjoint().matmul(self) {
            Ok(p) => p.sub(&Self::identity(self.cols)).map(|d| d.max_abs()).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        }
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product with the default dimension cap.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron_with_cap(a, b, DEFAULT_DIM_CAP)
}

pub fn kron_with_cap(a: &ComplexMatrix, b: &ComplexMatrix, cap: usize) -> Result<ComplexMatrix> {
    let rows = a.rows.checked_mul(b.rows).ok_or(Error::CapExceeded { dim: usize::MAX, cap })?;
    let cols = a.cols.checked_mul(b.cols).ok_or(Error::CapExceeded { dim: usize::MAX, cap })?;
    if rows.max(cols) > cap {
        return Err(Error::CapExceeded { dim: rows.max(cols), cap });
    }
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..b.rows {
                let base = (ia * b.rows + ib) * cols + ja * b.cols;
                for (o, &y) in out.data[base..base + b.cols].iter_mut().zip(b.row(ib)) {
                    *o = x * y;
                }
            }
        }
    }
    Ok(out)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct HermitianEigensystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEigensystem {
    /// `V Λ V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.spectral_map(|l| Complex64::new(l, 0.0))
    }

    /// `V f(Λ) V†`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let fl: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)].conj()).sum()
        })
    }
}

pub fn hermitian_eigensystem(h: &ComplexMatrix) -> Result<HermitianEigensystem> {
    hermitian_eigensystem_with(h, &Tolerances::DEFAULT)
}

pub fn hermitian_eigensystem_with(h: &ComplexMatrix, tol: &Tolerances) -> Result<HermitianEigensystem> {
    if !h.is_square() {
        return Err(Error::Dimension(format!("eigensystem of non-square {}x{} matrix", h.rows, h.cols)));
    }
    let scale = h.max_abs().max(1.0);
    let residual = h.hermiticity_residual();
    if residual > tol.hermitian_input * scale {
        return Err(Error::Contract(format!("matrix is not Hermitian (residual {residual:e})")));
    }
    let n = h.rows;
    if n == 0 {
        return Ok(HermitianEigensystem { eigenvalues: vec![], eigenvectors: ComplexMatrix::zeros(0, 0) });
    }
    let eig = nalgebra::SymmetricEigen::new(h.to_nalgebra());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = ComplexMatrix::from_nalgebra(&eig.eigenvectors);
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    Ok(HermitianEigensystem { eigenvalues, eigenvectors })
}

/// `exp(−i·s·h)` through the eigendecomposition of `h`.
pub fn unitary_from_generator(h: &ComplexMatrix, s: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eigensystem(h)?;
    Ok(eig.spectral_map(|l| Complex64::from_polar(1.0, -s * l)))
}

fn check_dims(rho: &ComplexMatrix, dims: &[usize]) -> Result<()> {
    if !rho.is_square() {
        return Err(Error::Dimension("expected a square matrix".into()));
    }
    let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    if dims.iter().any(|&d| d == 0) || total != Some(rho.rows) {
        return Err(Error::Dimension(format!(
            "subsystem dims {dims:?} do not multiply to matrix dimension {}",
            rho.rows
        )));
    }
    Ok(())
}

/// Flat-index offsets of every multi-index over `subsystems`, enumerated in
/// row-major order of those subsystems.
fn offsets(dims: &[usize], strides: &[usize], subsystems: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    for &s in subsystems {
        let mut next = Vec::with_capacity(out.len() * dims[s]);
        for &o in &out {
            for d in 0..dims[s] {
                next.push(o + d * strides[s]);
            }
        }
        out = next;
    }
    out
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// Reduced matrix over the subsystems in `keep` (order of `keep` is ignored:
/// kept factors stay in their original relative order).
pub fn partial_trace(rho: &ComplexMatrix, dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    check_dims(rho, dims)?;
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::Dimension(format!("subsystem {bad} out of range for {} factors", dims.len())));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|k| keep.contains(k)).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let strides = strides(dims);
    let keep_off = offsets(dims, &strides, &kept);
    let trace_off = offsets(dims, &strides, &traced);
    let m = keep_off.len();
    let mut out = ComplexMatrix::zeros(m, m);
    for (i, &oi) in keep_off.iter().enumerate() {
        for (j, &oj) in keep_off.iter().enumerate() {
            out.data[i * m + j] = trace_off.iter().map(|&t| rho[(oi + t, oj + t)]).sum();
        }
    }
    Ok(out)
}

/// Transposes the indices of one tensor factor.
pub fn partial_transpose(rho: &ComplexMatrix, dims: &[usize], subsystem: usize) -> Result<ComplexMatrix> {
    check_dims(rho, dims)?;
    if subsystem >= dims.len() {
        return Err(Error::Dimension(format!("subsystem {subsystem} out of range")));
    }
    let stride = strides(dims)[subsystem];
    let d = dims[subsystem];
    let digit = |idx: usize| (idx / stride) % d;
    Ok(ComplexMatrix::from_fn(rho.rows, rho.cols, |i, j| {
        let (di, dj) = (digit(i), digit(j));
        let i2 = i - di * stride + dj * stride;
        let j2 = j - dj * stride + di * stride;
        rho[(i2, j2)]
    }))
}

/// Diagnostics of a candidate density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCheck {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateCheck {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.trace_error <= tol && self.hermiticity <= tol && self.min_eigenvalue >= -tol
    }
}

pub fn check_state(rho: &ComplexMatrix) -> Result<StateCheck> {
    if !rho.is_square() {
        return Err(Error::Dimension("density matrix must be square".into()));
    }
    let tr = rho.trace();
    let hermiticity = rho.hermiticity_residual();
    let sym = rho.add(&rho.adjoint())?.scale(Complex64::new(0.5, 0.0));
    let eig = hermitian_eigensystem_with(&sym, &Tolerances { hermitian_input: f64::INFINITY, ..Tolerances::DEFAULT })?;
    Ok(StateCheck {
        trace_error: (tr - ONE).norm(),
        hermiticity,
        min_eigenvalue: eig.eigenvalues.first().copied().unwrap_or(0.0),
    })
}

/// All four eigenvalues (ascending) of the partial transpose over the system
/// qubit of a 4×4 ancilla ⊗ system state.
pub fn pt_spectrum(rho_as: &ComplexMatrix) -> Result<Vec<f64>> {
    pt_spectrum_with(rho_as, &Tolerances::DEFAULT)
}

pub fn pt_spectrum_with(rho_as: &ComplexMatrix, tol: &Tolerances) -> Result<Vec<f64>> {
    let pt = checked_pt(rho_as, tol)?;
    match x_blocks(&pt) {
        Some(mut eig) => {
            eig.sort_by(f64::total_cmp);
            Ok(eig)
        }
        None => Ok(hermitian_eigensystem(&pt)?.eigenvalues),
    }
}

/// Same spectrum, always through the general Hermitian eigensolver.
pub fn pt_spectrum_dense(rho_as: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigensystem(&checked_pt(rho_as, &Tolerances::DEFAULT)?)?.eigenvalues)
}

fn checked_pt(rho_as: &ComplexMatrix, tol: &Tolerances) -> Result<ComplexMatrix> {
    if rho_as.rows != 4 || rho_as.cols != 4 {
        return Err(Error::Dimension(format!("expected a 4x4 two-qubit state, got {}x{}", rho_as.rows, rho_as.cols)));
    }
    let check = check_state(rho_as)?;
    if !check.is_valid(tol.state) {
        return Err(Error::Contract(format!("not a density matrix: {check:?}")));
    }
    let pt = partial_transpose(rho_as, &[2, 2], 1)?;
    pt.add(&pt.adjoint()).map(|m| m.scale(Complex64::new(0.5, 0.0)))
}

/// Eigenvalues of a Hermitian 4×4 matrix that splits exactly into the
/// `{0,3}` and `{1,2}` blocks, from the 2×2 formula.
fn x_blocks(m: &ComplexMatrix) -> Option<Vec<f64>> {
    let outside = [(0, 1), (0, 2), (1, 3), (2, 3)];
    if outside.iter().any(|&(i, j)| m[(i, j)] != ZERO || m[(j, i)] != ZERO) {
        return None;
    }
    let pair = |i: usize, j: usize| {
        let (a, d, b) = (m[(i, i)].re, m[(j, j)].re, m[(i, j)].norm());
        let mean = 0.5 * (a + d);
        let r = (0.5 * (a - d)).hypot(b);
        [mean - r, mean + r]
    };
    let [a, b] = pair(0, 3);
    let [c, d] = pair(1, 2);
    Some(vec![a, b, c, d])
}

/// Smallest eigenvalue of the system-qubit partial transpose.
pub fn pt_min_eigenvalue(rho_as: &ComplexMatrix) -> Result<f64> {
    Ok(pt_spectrum(rho_as)?[0])
}

/// A unitary that acts as the identity outside a (small) set of basis
/// indices, stored as the dense block on that support.
///
/// Conjugating a large density matrix by `I_k ⊗ U` then costs
/// `O(|support|² · dim)` instead of `O(dim³)`.
#[derive(Debug, Clone)]
pub struct SupportedUnitary {
    dim: usize,
    support: Vec<usize>,
    block: Vec<Complex64>,
}

impl SupportedUnitary {
    /// `block` is row-major over `support × support`.
    pub fn new(dim: usize, support: Vec<usize>, block: Vec<Complex64>) -> Result<Self> {
        let s = support.len();
        if block.len() != s * s {
            return Err(Error::Dimension(format!("block of {} entries for support of {s}", block.len())));
        }
        let mut seen = vec![false; dim];
        for &i in &support {
            if i >= dim || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Dimension(format!("support index {i} repeated or outside dimension {dim}")));
            }
        }
        Ok(Self { dim, support, block })
    }

    /// Finds every index whose row or column differs from the identity.
    pub fn from_dense(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::Dimension("unitary must be square".into()));
        }
        let n = u.rows;
        let mut active = vec![false; n];
        for i in 0..n {
            for j in 0..n {
                let expected = if i == j { ONE } else { ZERO };
                if u[(i, j)] != expected {
                    active[i] = true;
                    active[j] = true;
                }
            }
        }
        let support: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        let block = support
            .iter()
            .flat_map(|&i| support.iter().map(move |&j| (i, j)))
            .map(|(i, j)| u[(i, j)])
            .collect();
        Ok(Self { dim: n, support, block })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `ρ ← (I_prefix ⊗ U) ρ (I_prefix ⊗ U)†` in place.
    pub fn conjugate_embedded(&self, rho: &mut ComplexMatrix, prefix: usize) -> Result<()> {
        let total = prefix * self.dim;
        if rho.rows != total || rho.cols != total {
            return Err(Error::Dimension(format!(
                "cannot conjugate {}x{} matrix by I_{prefix} ⊗ U_{}",
                rho.rows, rho.cols, self.dim
            )));
        }
        let s = self.support.len();
        if s == 0 {
            return Ok(());
        }
        let mut scratch = vec![ZERO; s];
        for a in 0..prefix {
            let idx: Vec<usize> = self.support.iter().map(|&i| a * self.dim + i).collect();
            // rows: ρ[S,:] ← U_SS ρ[S,:]
            for col in 0..total {
                for (r, out) in scratch.iter_mut().enumerate() {
                    *out = (0..s).map(|k| self.block[r * s + k] * rho[(idx[k], col)]).sum();
                }
                for (r, &v) in scratch.iter().enumerate() {
                    rho[(idx[r], col)] = v;
                }
            }
            // columns: ρ[:,S] ← ρ[:,S] U_SS†
            for row in 0..total {
                for (c, out) in scratch.iter_mut().enumerate() {
                    *out = (0..s).map(|k| rho[(row, idx[k])] * self.block[c * s + k].conj()).sum();
                }
                for (c, &v) in scratch.iter().enumerate() {
                    rho[(row, idx[c])] = v;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).unwrap()
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let a = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        a.add(&a.adjoint()).unwrap()
    }

    fn random_pure(dim: usize, rng: &mut impl Rng) -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..dim).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / norm).collect()
    }

    fn bell() -> ComplexMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        ComplexMatrix::outer(&[c(s, 0.0), ZERO, ZERO, c(s, 0.0)])
    }

    #[test]
    fn new_rejects_wrong_entry_count_and_nan() {
        assert!(matches!(ComplexMatrix::new(2, 2, vec![ZERO; 3]), Err(Error::Dimension(_))));
        assert!(matches!(
            ComplexMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn kron_identity_and_diagonal() {
        let i4 = kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(2)).unwrap();
        assert_eq!(i4, ComplexMatrix::identity(4));

        let p = 0.7;
        let d = ComplexMatrix::from_real_diagonal(&[p, 1.0 - p]);
        let dd = kron(&d, &d).unwrap();
        let expect = ComplexMatrix::from_real_diagonal(&[p * p, p * (1.0 - p), (1.0 - p) * p, (1.0 - p) * (1.0 - p)]);
        assert!(dd.max_abs_diff(&expect).unwrap() < 1e-15);

        let big = kron(&ComplexMatrix::zeros(2, 2), &ComplexMatrix::zeros(8, 8)).unwrap();
        assert_eq!((big.rows(), big.cols()), (16, 16));
    }

    #[test]
    fn kron_respects_cap() {
        let a = ComplexMatrix::identity(64);
        assert_eq!(
            kron_with_cap(&a, &a, 1024).unwrap_err(),
            Error::CapExceeded { dim: 4096, cap: 1024 }
        );
    }

    #[test]
    fn pauli_x_eigensystem() {
        let eig = hermitian_eigensystem(&pauli_x()).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
        let v = &eig.eigenvectors;
        // eigenvector for -1 is (1,-1)/√2 up to phase
        let ratio = v[(1, 0)] / v[(0, 0)];
        assert_abs_diff_eq!(ratio.re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[(0, 0)].norm(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn zero_matrix_eigenvalues() {
        let eig = hermitian_eigensystem(&ComplexMatrix::zeros(5, 5)).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = ComplexMatrix::new(2, 2, vec![ZERO, ONE, ZERO, ZERO]).unwrap();
        assert!(matches!(hermitian_eigensystem(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn eigensystem_invariants_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [1, 3, 8, 17] {
            let h = random_hermitian(n, &mut rng);
            let eig = hermitian_eigensystem(&h).unwrap();
            assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let scale = h.max_abs().max(1.0);
            assert!(eig.reconstruct().max_abs_diff(&h).unwrap() <= 1e-10 * scale);
            assert!(eig.eigenvectors.unitarity_residual() <= 1e-10);
        }
    }

    #[test]
    fn unitary_from_generator_cases() {
        let u0 = unitary_from_generator(&ComplexMatrix::zeros(3, 3), 1.3).unwrap();
        assert!(u0.max_abs_diff(&ComplexMatrix::identity(3)).unwrap() < 1e-15);

        let u = unitary_from_generator(&pauli_x(), std::f64::consts::FRAC_PI_2).unwrap();
        let expect = pauli_x().scale(c(0.0, -1.0));
        assert!(u.max_abs_diff(&expect).unwrap() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(8, &mut rng);
        let u = unitary_from_generator(&h, 0.9).unwrap();
        assert!(u.unitarity_residual() <= 1e-10);
    }

    #[test]
    fn partial_trace_of_product_and_bell() {
        let rho = ComplexMatrix::from_real_diagonal(&[0.3, 0.7]);
        let sigma = ComplexMatrix::outer(&[c(0.6, 0.0), c(0.0, 0.8)]);
        let prod = kron(&rho, &sigma).unwrap();
        let reduced = partial_trace(&prod, &[2, 2], &[0]).unwrap();
        assert!(reduced.max_abs_diff(&rho).unwrap() < 1e-15);

        let half = ComplexMatrix::from_real_diagonal(&[0.5, 0.5]);
        for keep in [0, 1] {
            let r = partial_trace(&bell(), &[2, 2], &[keep]).unwrap();
            assert!(r.max_abs_diff(&half).unwrap() < 1e-15);
        }
    }

    /// Element-wise summation over explicit bit indices, written independently
    /// of the stride machinery used by `partial_trace`.
    fn trace_last_qubit_oracle(rho: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_fn(4, 4, |i, j| {
            let mut acc = ZERO;
            for b in 0..2 {
                acc += rho[(i * 2 + b, j * 2 + b)];
            }
            acc
        })
    }

    #[test]
    fn partial_trace_matches_summation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = ComplexMatrix::outer(&random_pure(8, &mut rng));
        let fast = partial_trace(&rho, &[2, 2, 2], &[0, 1]).unwrap();
        assert!(fast.max_abs_diff(&trace_last_qubit_oracle(&rho)).unwrap() < 1e-12);
        assert_abs_diff_eq!(fast.trace().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = ComplexMatrix::identity(8);
        assert!(matches!(partial_trace(&rho, &[2, 3], &[0]), Err(Error::Dimension(_))));
        assert!(matches!(partial_trace(&rho, &[2, 2, 2], &[5]), Err(Error::Dimension(_))));
    }

    #[test]
    fn partial_trace_composes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rho = ComplexMatrix::outer(&random_pure(24, &mut rng));
        let dims = [2, 3, 4];
        let joint = partial_trace(&rho, &dims, &[0]).unwrap();
        let step = partial_trace(&rho, &dims, &[0, 1]).unwrap();
        let step = partial_trace(&step, &[2, 3], &[0]).unwrap();
        assert!(joint.max_abs_diff(&step).unwrap() < 1e-12);
    }

    #[test]
    fn pt_of_bell_product_and_werner() {
        assert_abs_diff_eq!(pt_min_eigenvalue(&bell()).unwrap(), -0.5, epsilon = 1e-12);

        let a = ComplexMatrix::outer(&[c(0.6, 0.0), c(0.0, 0.8)]);
        let b = ComplexMatrix::from_real_diagonal(&[0.25, 0.75]);
        let prod = kron(&a, &b).unwrap();
        assert!(pt_min_eigenvalue(&prod).unwrap() >= -1e-12);

        let q = 0.6;
        let werner = bell()
            .scale(c(q, 0.0))
            .add(&ComplexMatrix::identity(4).scale(c((1.0 - q) / 4.0, 0.0)))
            .unwrap();
        assert_abs_diff_eq!(pt_min_eigenvalue(&werner).unwrap(), (1.0 - 3.0 * q) / 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!((1.0 - 3.0 * q) / 4.0, -0.2, epsilon = 1e-15);
    }

    #[test]
    fn pt_rejects_non_states() {
        let not_psd = ComplexMatrix::from_real_diagonal(&[1.5, -0.5, 0.0, 0.0]);
        assert!(matches!(pt_min_eigenvalue(&not_psd), Err(Error::Contract(_))));
        assert!(matches!(pt_min_eigenvalue(&ComplexMatrix::identity(2)), Err(Error::Dimension(_))));
    }

    #[test]
    fn random_two_qubit_states_have_at_most_one_negative_pt_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            // mix of pure and rank-2 states
            let psi = random_pure(4, &mut rng);
            let phi = random_pure(4, &mut rng);
            let w: f64 = rng.gen_range(0.0..1.0);
            let rho = ComplexMatrix::outer(&psi)
                .scale(c(w, 0.0))
                .add(&ComplexMatrix::outer(&phi).scale(c(1.0 - w, 0.0)))
                .unwrap();
            let spec = pt_spectrum(&rho).unwrap();
            assert!(spec.iter().filter(|&&l| l < -1e-9).count() <= 1);
        }
    }

    #[test]
    fn supported_unitary_matches_dense_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // unitary acting on indices {1, 4, 6} of an 8-dim space
        let block = unitary_from_generator(&random_hermitian(3, &mut rng), 0.7).unwrap();
        let idx = [1usize, 4, 6];
        let mut u = ComplexMatrix::identity(8);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                u[(i, j)] = block[(a, b)];
            }
        }
        let sup = SupportedUnitary::from_dense(&u).unwrap();
        assert_eq!(sup.support(), &idx);

        let rho = ComplexMatrix::outer(&random_pure(16, &mut rng));
        let w = kron(&ComplexMatrix::identity(2), &u).unwrap();
        let dense = w.matmul(&rho).unwrap().matmul(&w.adjoint()).unwrap();
        let mut fast = rho.clone();
        sup.conjugate_embedded(&mut fast, 2).unwrap();
        assert!(fast.max_abs_diff(&dense).unwrap() < 1e-14);
    }

    #[test]
    fn supported_unitary_rejects_bad_support() {
        assert!(SupportedUnitary::new(4, vec![1, 1], vec![ONE; 4]).is_err());
        assert!(SupportedUnitary::new(4, vec![5], vec![ONE]).is_err());
        assert!(SupportedUnitary::new(4, vec![0, 2], vec![ONE; 3]).is_err());
        assert!(SupportedUnitary::new(4, vec![], vec![]).is_ok());
    }

    #[test]
    fn x_state_spectrum_matches_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let mut d: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let total: f64 = d.iter().sum();
            d.iter_mut().for_each(|x| *x /= total);
            let mut rho = ComplexMatrix::from_real_diagonal(&d);
            let c = Complex64::from_polar(rng.gen_range(0.0..1.0) * (d[0] * d[3]).sqrt(), rng.gen_range(0.0..6.3));
            rho[(0, 3)] = c;
            rho[(3, 0)] = c.conj();
            let fast = pt_spectrum(&rho).unwrap();
            let dense = pt_spectrum_dense(&rho).unwrap();
            for (a, b) in fast.iter().zip(&dense) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-13);
            }
        }
        let mut bell = ComplexMatrix::from_real_diagonal(&[0.5, 0.0, 0.0, 0.5]);
        bell[(0, 3)] = c(0.5, 0.0);
        bell[(3, 0)] = c(0.5, 0.0);
        assert_eq!(pt_spectrum(&bell).unwrap(), vec![-0.5, 0.5, 0.5, 0.5]);
    }
}
