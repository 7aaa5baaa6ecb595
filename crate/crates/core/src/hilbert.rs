//! Dense complex linear algebra for small Hilbert spaces.
//!
//! Joint two-party indices are flattened A-major: basis state `|i⟩_A|j⟩_B` of a
//! `dA × dB` system sits at index `i·dB + j`. Every joint state, projector and
//! density matrix in the crate follows this layout.

use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance for exact algebraic identities.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for quantities produced by iterative numerics.
pub const NUMERIC_TOL: f64 = 1e-9;
/// Maximum anti-Hermitian part accepted by the eigensolver and projector.
pub const HERMITIAN_INPUT_TOL: f64 = 1e-8;

const EIGEN_MAX_SWEEPS: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entry-wise modulus of `a − b`.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entry-wise modulus of `m − m†`.
pub fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

fn symmetrize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// A ket over a finite-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: DVector<C64>,
}

impl PureState {
    /// Wraps raw amplitudes without normalizing them.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidArgument("state must have dimension ≥ 1".into()));
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("state amplitudes"));
        }
        Ok(PureState {
            amps: DVector::from_vec(amplitudes),
        })
    }

    /// Wraps raw amplitudes and rescales them to unit norm.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = Self::new(amplitudes)?;
        s.normalize()?;
        Ok(s)
    }

    /// Computational basis ket `|k⟩` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut amps = DVector::zeros(dim);
        amps[k] = C64::new(1.0, 0.0);
        PureState { amps }
    }

    pub(crate) fn from_vector(amps: DVector<C64>) -> Self {
        PureState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 {
            return Err(Error::EmptyState("cannot normalize the zero vector".into()));
        }
        self.amps.unscale_mut(n);
        Ok(())
    }

    pub fn scaled(&self, factor: C64) -> PureState {
        PureState {
            amps: self.amps.map(|a| a * factor),
        }
    }

    /// `⟨self|other⟩`, conjugating `self`.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let db = other.dim();
        let mut out = DVector::zeros(self.dim() * db);
        for (i, a) in self.amps.iter().enumerate() {
            for (j, b) in other.amps.iter().enumerate() {
                out[i * db + j] = a * b;
            }
        }
        PureState { amps: out }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> DMatrix<C64> {
        &self.amps * self.amps.adjoint()
    }
}

/// `a ⊗ b` under the A-major index convention.
pub fn tensor_product(a: &PureState, b: &PureState) -> PureState {
    a.tensor(b)
}

/// `⟨a|b⟩`.
pub fn inner_product(a: &PureState, b: &PureState) -> Result<C64> {
    a.inner(b)
}

/// Square complex matrix used for gates and projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "operator must be a non-empty square matrix, got {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Operator { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Operator {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        Operator {
            mat: DMatrix::from_diagonal(&DVector::from_column_slice(entries)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            mat: self.mat.adjoint(),
        }
    }

    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Operator {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn pow(&self, exp: u32) -> Operator {
        (0..exp).fold(Operator::identity(self.dim()), |acc, _| Operator {
            mat: &acc.mat * &self.mat,
        })
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Operator {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    pub fn scaled(&self, factor: C64) -> Operator {
        Operator {
            mat: self.mat.map(|a| a * factor),
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        if self.dim() != state.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: state.dim(),
            });
        }
        Ok(PureState::from_vector(&self.mat * &state.amps))
    }

    /// `max |U†U − I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs_diff(&(self.mat.adjoint() * &self.mat), &DMatrix::identity(n, n))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = NUMERIC_TOL;
    pub const EIGEN_FLOOR: f64 = -NUMERIC_TOL;

    /// Validates and wraps `mat`.
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}×{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::NonFinite("density matrix"));
        }
        let defect = hermitian_defect(&mat);
        if defect > Self::HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("Hermitian defect {defect:e}")));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let eig = hermitian_eigendecomposition(&mat)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < Self::EIGEN_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!("minimum eigenvalue {min:e}")));
        }
        Ok(DensityMatrix { mat })
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`. Panics on the zero vector.
    pub fn from_pure(state: &PureState) -> Self {
        let n = state.norm_sqr();
        assert!(n > 0.0, "density matrix from the zero vector");
        DensityMatrix {
            mat: state.projector().unscale(n),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            mat: DMatrix::identity(dim, dim).unscale(dim as f64),
        }
    }

    /// Wraps `mat` after symmetrizing, skipping validation. Callers guarantee
    /// the matrix is already a state up to rounding.
    pub(crate) fn from_matrix_unchecked(mat: DMatrix<C64>) -> Self {
        DensityMatrix { mat: symmetrize(&mat) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `⟨v|ρ|v⟩`, real for Hermitian ρ.
    pub fn expectation(&self, v: &DVector<C64>) -> f64 {
        expectation(&self.mat, v)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(hermitian_eigendecomposition(&self.mat)?.values)
    }

    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).trace().re
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<DensityMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("mixing weight {w} outside [0, 1]")));
        }
        Ok(DensityMatrix {
            mat: self.mat.scale(w) + other.mat.scale(1.0 - w),
        })
    }

    /// Reduced state of party A for a `dA·dB` joint state.
    pub fn partial_trace_b(&self, d_a: usize, d_b: usize) -> Result<DensityMatrix> {
        if d_a * d_b != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: d_a * d_b,
                found: self.dim(),
            });
        }
        let mut out = DMatrix::zeros(d_a, d_a);
        for i in 0..d_a {
            for j in 0..d_a {
                out[(i, j)] = (0..d_b).map(|k| self.mat[(i * d_b + k, j * d_b + k)]).sum();
            }
        }
        Ok(DensityMatrix { mat: out })
    }

    /// Reduced state of party B for a `dA·dB` joint state.
    pub fn partial_trace_a(&self, d_a: usize, d_b: usize) -> Result<DensityMatrix> {
        if d_a * d_b != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: d_a * d_b,
                found: self.dim(),
            });
        }
        let mut out = DMatrix::zeros(d_b, d_b);
        for i in 0..d_b {
            for j in 0..d_b {
                out[(i, j)] = (0..d_a).map(|k| self.mat[(k * d_b + i, k * d_b + j)]).sum();
            }
        }
        Ok(DensityMatrix { mat: out })
    }
}

/// `Re ⟨v|M|v⟩`.
pub fn expectation(m: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    let mv = m * v;
    v.dotc(&mv).re
}

/// Spectrum of a Hermitian matrix, eigenvalues sorted descending with the
/// matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// `V·diag(λ)·V†`.
    pub fn reconstruct_with(&self, values: &[f64]) -> DMatrix<C64> {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &l) in values.iter().enumerate() {
            for i in 0..n {
                scaled[(i, j)] *= l;
            }
        }
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.reconstruct_with(&self.values)
    }
}

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized as
/// `(M + M†)/2` first; inputs further than [`HERMITIAN_INPUT_TOL`] from
/// Hermitian are rejected. Within a degenerate eigenspace the basis returned is
/// arbitrary.
pub fn hermitian_eigendecomposition(m: &DMatrix<C64>) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!(
            "non-square {}×{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::NonFinite("eigendecomposition input"));
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_INPUT_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let sym = symmetrize(m);
    let eig = nalgebra::linalg::SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_SWEEPS)
        .ok_or(Error::EigenNoConvergence)?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sort descending, find the largest prefix whose uniform shift keeps every
/// entry positive, subtract that shift and clip at zero. The output keeps the
/// input's ordering.
pub fn project_onto_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - shift).max(0.0)).collect();
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        out.iter_mut().for_each(|x| *x /= total);
    }
    out
}

/// Nearest density matrix in Frobenius norm to a Hermitian matrix.
pub fn project_to_state_space(m: &DMatrix<C64>) -> Result<DensityMatrix> {
    if m.iter().all(|a| *a == C64::new(0.0, 0.0)) {
        return Err(Error::Degenerate("cannot project the zero matrix".into()));
    }
    let eig = hermitian_eigendecomposition(m)?;
    let values = project_onto_simplex(&eig.values);
    Ok(DensityMatrix::from_matrix_unchecked(eig.reconstruct_with(&values)))
}
