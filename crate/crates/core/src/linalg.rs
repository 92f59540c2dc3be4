//! Dense complex linear-algebra kernel.
//!
//! All vectorization in this crate is column stacking: `vec(M)` lists the
//! first column of `M`, then the second, and so on. The Kronecker identity
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)` only holds under this convention, and every
//! superoperator built elsewhere relies on it.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative rank tolerance applied to the largest singular value.
pub const DEFAULT_RTOL: f64 = 1e-9;
/// Below this largest singular value a matrix is treated as zero.
pub const ABS_RANK_FLOOR: f64 = 1e-12;
/// Largest relative asymmetry accepted when building a [`Hermitian`].
pub const HERMITIAN_REJECT_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(m: &CMatrix) -> CVector {
    // nalgebra stores dense matrices column-major, so the storage is vec(M).
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Position of entry `(row, col)` inside `vec(M)` for an `rows`-row matrix.
#[inline]
pub fn vec_index(row: usize, col: usize, rows: usize) -> usize {
    col * rows + row
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// `‖M − M†‖_F / ‖M‖_F`, or the absolute asymmetry when `M` vanishes.
pub fn relative_asymmetry(m: &CMatrix) -> f64 {
    let diff = (m - m.adjoint()).norm();
    let scale = m.norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Square complex matrix with `M = M†`.
///
/// Construction symmetrizes the input to `(M + M†)/2` after rejecting
/// anything whose relative asymmetry exceeds [`HERMITIAN_REJECT_TOL`], so
/// round-off from file I/O never leaks into the invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct Hermitian(CMatrix);

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, HERMITIAN_REJECT_TOL)
    }

    pub fn with_tolerance(m: CMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let asymmetry = relative_asymmetry(&m);
        if asymmetry > tol {
            return Err(Error::NotHermitian { asymmetry });
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without checking; for matrices Hermitian by construction.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let mut h = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..h.nrows() {
            h[(i, i)] = C64::new(h[(i, i)].re, 0.0);
        }
        Hermitian(h)
    }

    pub fn from_real(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(real_to_complex(m))
    }

    pub fn zeros(dim: usize) -> Self {
        Hermitian(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Hermitian(CMatrix::identity(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        Hermitian(CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Hermitian(&self.0 * C64::new(s, 0.0))
    }

    /// Traceless part `H − tr(H)/d · I`.
    pub fn traceless(&self) -> Self {
        let shift = self.trace() / self.dim() as f64;
        let mut m = self.0.clone();
        for i in 0..self.dim() {
            m[(i, i)] -= C64::new(shift, 0.0);
        }
        Hermitian(m)
    }
}

impl std::ops::Add for &Hermitian {
    type Output = Hermitian;
    fn add(self, rhs: &Hermitian) -> Hermitian {
        Hermitian(&self.0 + &rhs.0)
    }
}

/// Hermitian matrix with an exactly zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct Admissible(Hermitian);

impl Admissible {
    /// Accepts a Hermitian matrix whose diagonal is zero up to `1e-10·‖M‖_F`,
    /// then clears the diagonal.
    pub fn new(m: CMatrix) -> Result<Self> {
        let h = Hermitian::new(m)?;
        let scale = h.matrix().norm().max(f64::MIN_POSITIVE);
        let mut m = h.into_matrix();
        for i in 0..m.nrows() {
            if m[(i, i)].norm() > 1e-10 * scale {
                return Err(Error::InvalidArgument(format!(
                    "admissible matrix needs a zero diagonal, entry ({i},{i}) = {}",
                    m[(i, i)]
                )));
            }
            m[(i, i)] = ZERO;
        }
        Ok(Admissible(Hermitian(m)))
    }

    pub fn zeros(dim: usize) -> Self {
        Admissible(Hermitian::zeros(dim))
    }

    /// Builds from the strict upper triangle, listed row by row.
    pub fn from_upper(dim: usize, upper: &[C64]) -> Result<Self> {
        let expected = dim * dim.saturating_sub(1) / 2;
        if upper.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} strict-upper entries for d={dim}, got {}",
                upper.len()
            )));
        }
        let mut m = CMatrix::zeros(dim, dim);
        let mut it = upper.iter();
        for i in 0..dim {
            for j in (i + 1)..dim {
                let z = *it.next().expect("length checked");
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        Ok(Admissible(Hermitian(m)))
    }

    pub(crate) fn from_hermitian_unchecked(h: Hermitian) -> Self {
        Admissible(h)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.0.matrix()
    }

    pub fn as_hermitian(&self) -> &Hermitian {
        &self.0
    }

    pub fn into_hermitian(self) -> Hermitian {
        self.0
    }
}

/// Eigendecomposition `H = V diag(λ) V†` with ascending `λ`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let d = self.values.len();
        let lam = CMatrix::from_fn(d, d, |i, j| {
            if i == j {
                C64::new(self.values[i], 0.0)
            } else {
                ZERO
            }
        });
        &self.vectors * lam * self.vectors.adjoint()
    }
}

pub fn eig_hermitian(h: &Hermitian) -> HermitianEigen {
    let eig = h.matrix().clone().symmetric_eigen();
    let d = h.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = CMatrix::from_fn(d, d, |i, j| eig.eigenvectors[(i, order[j])]);
    HermitianEigen { values, vectors }
}

/// Thin SVD with descending singular values and the numerical rank used to
/// truncate it.
#[derive(Clone, Debug)]
pub struct SvdResult<T: ComplexField<RealField = f64>> {
    pub singular_values: Vec<f64>,
    pub u: DMatrix<T>,
    pub v_t: DMatrix<T>,
    pub rank: usize,
    pub tol: f64,
}

impl<T: ComplexField<RealField = f64>> SvdResult<T> {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min_retained(&self) -> Option<f64> {
        self.rank.checked_sub(1).map(|k| self.singular_values[k])
    }

    pub fn sigma_max_discarded(&self) -> Option<f64> {
        self.singular_values.get(self.rank).copied()
    }

    /// Dimension of the numerical null space of the `cols`-column input.
    pub fn nullity(&self) -> usize {
        self.v_t.ncols() - self.rank
    }

    pub fn pinv(&self) -> DMatrix<T> {
        let r = self.rank;
        let mut vs = self.v_t.rows(0, r).adjoint();
        for (k, mut col) in vs.column_iter_mut().enumerate() {
            col.scale_mut(1.0 / self.singular_values[k]);
        }
        vs * self.u.columns(0, r).adjoint()
    }

    /// Minimum-norm least-squares solution restricted to the retained
    /// singular triplets.
    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let r = self.rank;
        let mut coeff = self.u.columns(0, r).adjoint() * b;
        for (k, c) in coeff.iter_mut().enumerate() {
            *c = c.clone().unscale(self.singular_values[k]);
        }
        self.v_t.rows(0, r).adjoint() * coeff
    }
}

fn rank_of(sorted: &[f64], rtol: f64) -> (usize, f64) {
    let smax = sorted.first().copied().unwrap_or(0.0);
    if smax < ABS_RANK_FLOOR {
        return (0, ABS_RANK_FLOOR);
    }
    let tol = rtol * smax;
    (sorted.iter().take_while(|&&s| s > tol).count(), tol)
}

pub fn svd<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, rtol: f64) -> SvdResult<T> {
    let dec = a.clone().svd(true, true);
    let sv = dec.singular_values;
    let u = dec.u.expect("u requested");
    let v_t = dec.v_t.expect("v_t requested");
    let k = sv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| sv[y].total_cmp(&sv[x]));
    let singular_values: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])].clone());
    let v_t = DMatrix::from_fn(k, v_t.ncols(), |i, j| v_t[(order[i], j)].clone());
    let (rank, tol) = rank_of(&singular_values, rtol);
    SvdResult {
        singular_values,
        u,
        v_t,
        rank,
        tol,
    }
}

/// Returns the SVD (with its numerical rank) and the truncated
/// Moore–Penrose pseudoinverse.
pub fn svd_rank_pinv<T: ComplexField<RealField = f64>>(
    a: &DMatrix<T>,
    rtol: f64,
) -> Result<(SvdResult<T>, DMatrix<T>)> {
    if !(rtol > 0.0) {
        return Err(Error::InvalidArgument(format!("rtol must be positive, got {rtol}")));
    }
    let s = svd(a, rtol);
    let p = s.pinv();
    Ok((s, p))
}

pub fn singular_values<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> Vec<f64> {
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

pub fn numerical_rank<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, rtol: f64) -> usize {
    rank_of(&singular_values(a), rtol).0
}

/// Largest singular value.
pub fn spectral_norm<T: ComplexField<RealField = f64>>(a: &DMatrix<T>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a)[0]
}
