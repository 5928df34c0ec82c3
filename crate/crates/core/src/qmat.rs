//! Dense complex matrices with explicit tensor-factor bookkeeping.
//!
//! Everything here is row-major and small (the largest operators in this crate
//! are 64x64), so the kernels favour clarity over blocking or SIMD. Hermitian
//! matrix functions all go through a single eigendecomposition routine.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Inputs within this distance of Hermitian are symmetrized silently.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Negative eigenvalues above `-PSD_TOL` are treated as rounding noise.
pub const PSD_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![ZERO; nrows * ncols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    /// Builds a matrix from row-major data. Rejects ragged shapes and non-finite entries.
    pub fn from_vec(nrows: usize, ncols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::DimensionMismatch(format!("{} entries for a {nrows}x{ncols} matrix", data.len())));
        }
        let m = Self { nrows, ncols, data };
        if !m.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(nrows, ncols, rows.concat())
    }

    /// Real matrix from row-major entries.
    pub fn from_real(nrows: usize, ncols: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), nrows * ncols, "entry count does not match shape");
        Self { nrows, ncols, data: entries.iter().map(|&x| re(x)).collect() }
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        Self::diag(&entries.iter().map(|&x| re(x)).collect::<Vec<_>>())
    }

    /// Column vector.
    pub fn ket(v: &[C64]) -> Self {
        Self { nrows: v.len(), ncols: 1, data: v.to_vec() }
    }

    /// `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    /// `|u><u|`.
    pub fn projector(u: &[C64]) -> Self {
        Self::outer(u, u)
    }

    /// Unnormalized maximally entangled projector `|I>><<I|` on `d x d`.
    pub fn max_entangled(d: usize) -> Self {
        Self::from_fn(d * d, d * d, |r, s| if r % (d + 1) == 0 && s % (d + 1) == 0 { ONE } else { ZERO })
    }

    /// Single matrix unit `|i><j|`.
    pub fn unit(nrows: usize, ncols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        m[(i, j)] = ONE;
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { nrows: self.nrows, ncols: self.ncols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.nrows.min(self.ncols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { nrows: self.nrows, ncols: self.ncols, data: self.data.iter().map(|&z| z * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(re(s))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "matmul shape mismatch");
        let mut out = Self::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            let orow = &mut out.data[i * rhs.ncols..(i + 1) * rhs.ncols];
            for k in 0..self.ncols {
                let a = self.data[i * self.ncols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &rhs.data[k * rhs.ncols..(k + 1) * rhs.ncols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `A X A^dag`.
    pub fn sandwich(&self, x: &Self) -> Self {
        self.matmul(x).matmul(&self.adjoint())
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.ncols, v.len(), "matrix-vector shape mismatch");
        (0..self.nrows).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `max |M - M^dag|`.
    pub fn hermiticity_violation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.nrows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(M + M^dag) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.nrows, self.ncols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Entrywise max-norm distance. Infinite if the shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    /// `max |U^dag U - 1|`; zero iff the columns are orthonormal.
    pub fn isometry_residual(&self) -> f64 {
        self.adjoint().matmul(self).max_abs_diff(&Self::identity(self.ncols))
    }

    /// `max |U U^dag - 1|`; zero iff the rows are orthonormal.
    pub fn co_isometry_residual(&self) -> f64 {
        self.matmul(&self.adjoint()).max_abs_diff(&Self::identity(self.nrows))
    }

    pub fn unitarity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.isometry_residual().max(self.co_isometry_residual())
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.nrows, self.ncols, |i, j| self[(i, j)])
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[i * self.ncols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;

    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        CMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        CMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;

    fn neg(self) -> CMatrix {
        self.scale_re(-1.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs)
    }
}

impl AddAssign<&CMatrix> for CMatrix {
    fn add_assign(&mut self, rhs: &CMatrix) {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.nrows, self.ncols)?;
        for i in 0..self.nrows {
            write!(f, "  ")?;
            for z in self.row(i) {
                write!(f, "{:>9.5}{:+.5}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Standard Kronecker product `a (x) b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = s * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a sequence, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors.into_iter().fold(CMatrix::identity(1), |acc, m| kron(&acc, m))
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

pub fn basis_vec(d: usize, i: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[i] = ONE;
    v
}

/// Ordered tensor factors with unique labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemDims {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl SystemDims {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>, dims: &[usize]) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != dims.len() {
            return Err(Error::InvalidDims(format!("{} labels for {} dims", labels.len(), dims.len())));
        }
        if let Some(d) = dims.iter().find(|&&d| d == 0) {
            return Err(Error::InvalidDims(format!("factor dimension {d}")));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidDims(format!("duplicate label `{l}`")));
            }
        }
        Ok(Self { dims: dims.to_vec(), labels })
    }

    pub fn empty() -> Self {
        Self { dims: Vec::new(), labels: Vec::new() }
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Self {
        Self::new([label.into()], &[dim]).expect("single factor with positive dim")
    }

    pub fn qubits(labels: &[&str]) -> Self {
        Self::new(labels.iter().copied(), &vec![2; labels.len()]).expect("qubit labels must be unique")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Product of the factor dimensions (1 for no factors).
    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| Error::UnknownLabel(label.into()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.labels.iter().chain(&other.labels).cloned(), &[self.dims.clone(), other.dims.clone()].concat())
    }

    /// The named factors, in the order given.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mut dims = Vec::with_capacity(labels.len());
        for l in labels {
            dims.push(self.dim_of(l.as_ref())?);
        }
        Self::new(labels.iter().map(|l| l.as_ref().to_string()), &dims)
    }

    /// All factors except the named ones, original order kept.
    pub fn without<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        for l in labels {
            self.position(l.as_ref())?;
        }
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| !labels.iter().any(|l| l.as_ref() == self.labels[i])).collect();
        Ok(Self {
            dims: keep.iter().map(|&i| self.dims[i]).collect(),
            labels: keep.iter().map(|&i| self.labels[i].clone()).collect(),
        })
    }

    /// Appends `suffix` to every label.
    pub fn with_suffix(&self, suffix: &str) -> Self {
        Self { dims: self.dims.clone(), labels: self.labels.iter().map(|l| format!("{l}{suffix}")).collect() }
    }

    /// Collapses all factors into one named factor of the total dimension.
    pub fn fused(&self, label: impl Into<String>) -> Self {
        Self::single(label, self.total())
    }

    fn check_matrix(&self, m: &CMatrix) -> Result<()> {
        if !m.is_square() || m.nrows() != self.total() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix annotated with dims {:?}",
                m.nrows(),
                m.ncols(),
                self.dims
            )));
        }
        Ok(())
    }
}

/// Traces out the factors whose flag in `traced` is set.
pub fn trace_out(m: &CMatrix, dims: &[usize], traced: &[bool]) -> CMatrix {
    debug_assert_eq!(dims.len(), traced.len());
    let n: usize = dims.iter().product();
    assert!(m.is_square() && m.nrows() == n, "partial trace shape mismatch");
    let kept_total: usize = dims.iter().zip(traced).filter(|(_, &t)| !t).map(|(d, _)| d).product();
    // Split every full index into (kept index, traced index).
    let mut kept_idx = vec![0usize; n];
    let mut traced_idx = vec![0usize; n];
    for (full, (k_slot, t_slot)) in kept_idx.iter_mut().zip(traced_idx.iter_mut()).enumerate() {
        let mut rem = full;
        let (mut k, mut t, mut ks, mut ts) = (0, 0, 1, 1);
        for (&d, &tr) in dims.iter().zip(traced).rev() {
            let digit = rem % d;
            rem /= d;
            if tr {
                t += digit * ts;
                ts *= d;
            } else {
                k += digit * ks;
                ks *= d;
            }
        }
        *k_slot = k;
        *t_slot = t;
    }
    let mut out = CMatrix::zeros(kept_total, kept_total);
    for i in 0..n {
        for j in 0..n {
            if traced_idx[i] == traced_idx[j] {
                out[(kept_idx[i], kept_idx[j])] += m[(i, j)];
            }
        }
    }
    out
}

/// Trace over the named factors; the remaining factors keep their order.
pub fn partial_trace<S: AsRef<str>>(m: &CMatrix, dims: &SystemDims, traced: &[S]) -> Result<CMatrix> {
    dims.check_matrix(m)?;
    let mut mask = vec![false; dims.len()];
    for l in traced {
        mask[dims.position(l.as_ref())?] = true;
    }
    Ok(trace_out(m, &dims.dims, &mask))
}

/// Reorders tensor factors: factor `order[k]` of the input becomes factor `k` of the output.
pub fn permute_factors(m: &CMatrix, dims: &[usize], order: &[usize]) -> CMatrix {
    let n: usize = dims.iter().product();
    assert!(m.is_square() && m.nrows() == n, "permutation shape mismatch");
    let new_dims: Vec<usize> = order.iter().map(|&k| dims[k]).collect();
    // Stride of each old factor inside the new layout.
    let mut new_stride = vec![0usize; dims.len()];
    let mut s = 1;
    for pos in (0..order.len()).rev() {
        new_stride[order[pos]] = s;
        s *= new_dims[pos];
    }
    let map: Vec<usize> = (0..n)
        .map(|full| {
            let mut rem = full;
            let mut idx = 0;
            for k in (0..dims.len()).rev() {
                idx += (rem % dims[k]) * new_stride[k];
                rem /= dims[k];
            }
            idx
        })
        .collect();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    out
}

/// Conjugation by the factor permutation taking `dims` to `new_order`.
pub fn permute_systems<S: AsRef<str>>(m: &CMatrix, dims: &SystemDims, new_order: &[S]) -> Result<CMatrix> {
    dims.check_matrix(m)?;
    let order = permutation_indices(dims, new_order)?;
    Ok(permute_factors(m, &dims.dims, &order))
}

pub(crate) fn permutation_indices<S: AsRef<str>>(dims: &SystemDims, new_order: &[S]) -> Result<Vec<usize>> {
    let names = || new_order.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
    if new_order.len() != dims.len() {
        return Err(Error::NotAPermutation(names()));
    }
    let mut order = Vec::with_capacity(dims.len());
    for l in new_order {
        let k = dims.position(l.as_ref()).map_err(|_| Error::NotAPermutation(names()))?;
        if order.contains(&k) {
            return Err(Error::NotAPermutation(names()));
        }
        order.push(k);
    }
    Ok(order)
}

/// Eigendecomposition of the Hermitian part of `m`: ascending eigenvalues and
/// the matching orthonormal eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    assert!(m.is_square(), "eigh needs a square matrix");
    let h = m.hermitian_part();
    if let Some(found) = symmetric_eigen(&h) {
        return found;
    }
    // The complex tridiagonalization breaks down on exactly vanishing pivots,
    // which block-sparse Choi operators hit. A fixed dense rotation removes them.
    let q = mixing_unitary(h.nrows());
    let (values, vecs) = symmetric_eigen(&q.sandwich(&h)).expect("eigendecomposition of a rotated Hermitian matrix");
    (values, q.adjoint().matmul(&vecs))
}

fn symmetric_eigen(h: &CMatrix) -> Option<(Vec<f64>, CMatrix)> {
    let eig = SymmetricEigen::new(h.to_nalgebra());
    if !eig.eigenvalues.iter().all(|v| v.is_finite()) || !eig.eigenvectors.iter().all(|z| z.is_finite()) {
        return None;
    }
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMatrix::from_fn(h.nrows(), h.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
    Some((values, vecs))
}

/// Dense unitary `F D1 F D2` from Fourier matrices and irrational phases.
fn mixing_unitary(n: usize) -> CMatrix {
    let tau = std::f64::consts::TAU;
    let norm = 1.0 / (n as f64).sqrt();
    let fourier = CMatrix::from_fn(n, n, |j, k| C64::from_polar(norm, tau * (j * k) as f64 / n as f64));
    let phases = |seed: f64| {
        CMatrix::diag(&(0..n).map(|k| C64::from_polar(1.0, seed * ((k * k + 1) as f64).sqrt())).collect::<Vec<_>>())
    };
    fourier.matmul(&phases(1.618_033_988_75)).matmul(&fourier).matmul(&phases(std::f64::consts::E))
}

pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

/// `f(M)` for Hermitian `M`, via the eigendecomposition.
pub fn herm_fn(m: &CMatrix, f: impl Fn(f64) -> C64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let n = m.nrows();
    let fv: Vec<C64> = vals.iter().map(|&x| f(x)).collect();
    let mut out = CMatrix::zeros(n, n);
    for (k, &w) in fv.iter().enumerate() {
        if w == ZERO {
            continue;
        }
        for i in 0..n {
            let a = vecs[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] += a * vecs[(j, k)].conj();
            }
        }
    }
    out
}

fn check_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let violation = m.hermiticity_violation();
    if violation > tol.max(HERMITIAN_TOL) {
        return Err(Error::NotHermitian { violation });
    }
    Ok(())
}

/// PSD square root. Eigenvalues in `[-tol, 0)` are clamped to zero.
pub fn herm_sqrt(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    check_hermitian(m, tol)?;
    let (vals, _) = eigh(m);
    if let Some(&min) = vals.first() {
        if min < -tol {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(herm_fn(m, |x| re(x.max(0.0).sqrt())))
}

/// Inverse square root on the support; eigenvalues below `tol` are treated as kernel.
pub fn pinv_sqrt(m: &CMatrix, tol: f64) -> CMatrix {
    herm_fn(m, |x| if x > tol { re(1.0 / x.sqrt()) } else { ZERO })
}

/// `exp(iH)` for Hermitian `H`; unitary to rounding.
pub fn expi_hermitian(h: &CMatrix) -> CMatrix {
    herm_fn(h, |x| C64::from_polar(1.0, x))
}

/// Number of eigenvalues above `rel_tol * max eigenvalue`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let vals = eigvalsh(m);
    let top = vals.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if top == 0.0 {
        return 0;
    }
    vals.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Trace distance `||a - b||_1 / 2` of Hermitian operators.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * eigvalsh(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Closest unitary in Frobenius norm (polar factor via SVD).
pub fn nearest_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.to_nalgebra().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^dag");
    CMatrix::from_nalgebra(&(u * v_t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(seed: u64, n: usize) -> CMatrix {
        // Small LCG keeps these unit tests free of RNG plumbing.
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    fn random_psd(seed: u64, n: usize) -> CMatrix {
        let g = random_matrix(seed, n);
        g.matmul(&g.adjoint())
    }

    #[test]
    fn kron_identities_and_basis_projectors() {
        assert_eq!(kron(&CMatrix::identity(2), &CMatrix::identity(2)), CMatrix::identity(4));
        let p0 = CMatrix::diag_real(&[1.0, 0.0]);
        let p1 = CMatrix::diag_real(&[0.0, 1.0]);
        assert_eq!(kron(&p0, &p1), CMatrix::diag_real(&[0.0, 1.0, 0.0, 0.0]));
        let a = CMatrix::diag_real(&[1.0, 2.0]);
        let b = CMatrix::diag_real(&[3.0, 4.0]);
        assert_eq!(kron(&a, &b), CMatrix::diag_real(&[3.0, 4.0, 6.0, 8.0]));
    }

    #[test]
    fn kron_is_associative() {
        let (a, b, d) = (random_matrix(1, 2), random_matrix(2, 3), random_matrix(3, 2));
        let lhs = kron(&kron(&a, &b), &d);
        let rhs = kron(&a, &kron(&b, &d));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_and_bell_states() {
        let dims = SystemDims::qubits(&["A", "B"]);
        let p00 = CMatrix::diag_real(&[1.0, 0.0, 0.0, 0.0]);
        let out = partial_trace(&p00, &dims, &["B"]).unwrap();
        assert_eq!(out, CMatrix::diag_real(&[1.0, 0.0]));

        let bell = CMatrix::max_entangled(2).scale_re(0.5);
        let out = partial_trace(&bell, &dims, &["B"]).unwrap();
        assert!(out.max_abs_diff(&CMatrix::identity(2).scale_re(0.5)) < 1e-15);
    }

    #[test]
    fn partial_trace_of_kron_scales_by_trace() {
        let a = random_matrix(7, 3);
        let b = random_matrix(8, 2);
        let dims = SystemDims::new(["A", "B"], &[3, 2]).unwrap();
        let out = partial_trace(&kron(&a, &b), &dims, &["B"]).unwrap();
        assert!(out.max_abs_diff(&a.scale(b.trace())) < 1e-12);
    }

    #[test]
    fn joint_trace_equals_nested_traces() {
        let m = random_psd(11, 16);
        let dims = SystemDims::qubits(&["W", "X", "Y", "Z"]);
        let joint = partial_trace(&m, &dims, &["Y", "Z"]).unwrap();
        let after_y = partial_trace(&m, &dims, &["Y"]).unwrap();
        let nested = partial_trace(&after_y, &dims.without(&["Y"]).unwrap(), &["Z"]).unwrap();
        assert!(joint.max_abs_diff(&nested) < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_unknown_label_and_bad_dims() {
        let dims = SystemDims::qubits(&["A", "B"]);
        assert!(matches!(partial_trace(&CMatrix::identity(4), &dims, &["C"]), Err(Error::UnknownLabel(_))));
        assert!(matches!(partial_trace(&CMatrix::identity(3), &dims, &["A"]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn permutations() {
        let dims = SystemDims::qubits(&["A", "B"]);
        let m = random_matrix(5, 4);
        assert_eq!(permute_systems(&m, &dims, &["A", "B"]).unwrap(), m);

        let p01 = CMatrix::diag_real(&[0.0, 1.0, 0.0, 0.0]);
        let swapped = permute_systems(&p01, &dims, &["B", "A"]).unwrap();
        assert_eq!(swapped, CMatrix::diag_real(&[0.0, 0.0, 1.0, 0.0]));

        assert!(matches!(permute_systems(&m, &dims, &["A", "A"]), Err(Error::NotAPermutation(_))));
        assert!(matches!(permute_systems(&m, &dims, &["A"]), Err(Error::NotAPermutation(_))));
    }

    #[test]
    fn three_cycle_and_inverse_compose_to_identity() {
        let dims = SystemDims::new(["A", "B", "C"], &[2, 3, 2]).unwrap();
        let m = random_psd(9, 12);
        let cycled = permute_systems(&m, &dims, &["B", "C", "A"]).unwrap();
        let cdims = dims.select(&["B", "C", "A"]).unwrap();
        let back = permute_systems(&cycled, &cdims, &["A", "B", "C"]).unwrap();
        assert!(back.max_abs_diff(&m) < 1e-15);

        // Oracle: explicit permutation matrix P|a b c> = |b c a>.
        let p = CMatrix::from_fn(12, 12, |row, col| {
            let (a, b, cc) = (col / 6, (col / 2) % 3, col % 2);
            if row == b * 4 + cc * 2 + a {
                ONE
            } else {
                ZERO
            }
        });
        assert!(cycled.max_abs_diff(&p.sandwich(&m)) < 1e-15);
    }

    #[test]
    fn matrix_functions() {
        let s = herm_sqrt(&CMatrix::diag_real(&[4.0, 9.0]), PSD_TOL).unwrap();
        assert!(s.max_abs_diff(&CMatrix::diag_real(&[2.0, 3.0])) < 1e-14);
        assert!(herm_sqrt(&CMatrix::identity(3), PSD_TOL).unwrap().max_abs_diff(&CMatrix::identity(3)) < 1e-14);

        let p = pinv_sqrt(&CMatrix::diag_real(&[4.0, 0.0]), PSD_TOL);
        assert!(p.max_abs_diff(&CMatrix::diag_real(&[0.5, 0.0])) < 1e-14);
        assert!(pinv_sqrt(&CMatrix::identity(2), PSD_TOL).max_abs_diff(&CMatrix::identity(2)) < 1e-14);

        let a = random_psd(3, 6);
        let r = herm_sqrt(&a, PSD_TOL).unwrap();
        assert!(r.matmul(&r).max_abs_diff(&a) < 1e-10);
        let q = pinv_sqrt(&a, PSD_TOL);
        assert!(q.matmul(&a).matmul(&q).max_abs_diff(&CMatrix::identity(6)) < 1e-9);
    }

    #[test]
    fn eigh_survives_block_sparse_choi_operators() {
        let m = kron(&kron(&CMatrix::max_entangled(2), &CMatrix::identity(4)), &CMatrix::max_entangled(2));
        let (vals, vecs) = eigh(&m);
        assert!(vals.iter().all(|v| v.is_finite()));
        let rebuilt = vecs.matmul(&CMatrix::diag_real(&vals)).matmul(&vecs.adjoint());
        assert!(rebuilt.max_abs_diff(&m) < 1e-12);
        assert!(vecs.unitarity_residual() < 1e-12);
        assert!((vals[63] - 4.0).abs() < 1e-12 && vals[0].abs() < 1e-12);
    }

    #[test]
    fn herm_sqrt_error_paths() {
        let neg = CMatrix::diag_real(&[1.0, -0.1]);
        assert!(matches!(herm_sqrt(&neg, PSD_TOL), Err(Error::NotPsd { .. })));
        let clamped = herm_sqrt(&CMatrix::diag_real(&[1.0, -1e-12]), PSD_TOL).unwrap();
        assert_eq!(clamped[(1, 1)], ZERO);
        let skew = CMatrix::from_real(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(herm_sqrt(&skew, PSD_TOL), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn exponential_is_unitary() {
        let h = random_matrix(4, 8).hermitian_part();
        let u = expi_hermitian(&h);
        assert!(u.unitarity_residual() < 1e-13);
    }

    #[test]
    fn system_dims_validation() {
        assert!(SystemDims::new(["A", "A"], &[2, 2]).is_err());
        assert!(SystemDims::new(["A"], &[0]).is_err());
        assert!(SystemDims::new(["A", "B"], &[2]).is_err());
        let d = SystemDims::new(["X", "Z", "A"], &[2, 3, 4]).unwrap();
        assert_eq!(d.total(), 24);
        assert_eq!(d.without(&["Z"]).unwrap().labels(), ["X", "A"]);
        assert_eq!(d.select(&["A", "X"]).unwrap().dims(), [4, 2]);
    }
}
