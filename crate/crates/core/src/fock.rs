//! Dense linear algebra on a truncated Fock space.
//!
//! The basis is `{|0>, ..., |dim-1>}`. All entropies are in bits; the
//! binning machinery in [`crate::idcode`] works in nats, and the only
//! conversion between the two goes through [`NATS_PER_BIT`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Absolute tolerance for Hermiticity and eigenvalue sign checks.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Eigenvalues below this contribute nothing to the entropy (0 log 0 := 0).
pub const EIGENVALUE_FLOOR: f64 = 1e-15;

/// Multiply an information quantity in bits by this to obtain nats.
pub const NATS_PER_BIT: f64 = std::f64::consts::LN_2;

/// Default cap on the dimension of an explicitly materialized tensor product.
pub const DEFAULT_TENSOR_CAP: usize = 10_000;

/// A square complex matrix acting on the first `dim` Fock levels.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    m: DMatrix<C64>,
}

impl FockOperator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::BadShape { rows: m.nrows(), cols: m.ncols() });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { m })
    }

    /// Wraps a matrix produced by this crate's own arithmetic.
    pub(crate) fn from_matrix(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(DMatrix::identity(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0)));
        Self::from_matrix(DMatrix::from_diagonal(&d))
    }

    /// `|v><v|`.
    pub fn outer(v: &DVector<C64>) -> Self {
        Self::from_matrix(v * v.adjoint())
    }

    /// `sum_{k <= max_level} |k><k|` on a space of dimension `dim`.
    pub fn number_projector(max_level: usize, dim: usize) -> Self {
        let vals: Vec<f64> = (0..dim).map(|k| if k <= max_level { 1.0 } else { 0.0 }).collect();
        Self::diagonal(&vals)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.m.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// `max |A_ij - conj(A_ji)|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Upper-left `dim x dim` block.
    pub fn crop(&self, dim: usize) -> Self {
        let d = dim.min(self.dim());
        Self::from_matrix(self.m.view((0, 0), (d, d)).into_owned())
    }

    /// Pads with zeros to `dim` (no-op when already at least that large).
    pub fn embed(&self, dim: usize) -> Self {
        if dim <= self.dim() {
            return self.clone();
        }
        let mut m = DMatrix::zeros(dim, dim);
        m.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.m);
        Self::from_matrix(m)
    }

    pub fn mul(&self, other: &FockOperator) -> Result<Self> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::from_matrix(&self.m * &other.m))
    }

    /// `self - other`, zero-padding the smaller operand.
    pub fn difference(&self, other: &FockOperator) -> Self {
        let d = self.dim().max(other.dim());
        Self::from_matrix(self.embed(d).m - other.embed(d).m)
    }

    /// `u * self * u^dagger`.
    pub fn conjugate_by(&self, u: &FockOperator) -> Result<Self> {
        check_dims(self.dim(), u.dim())?;
        Ok(Self::from_matrix(&u.m * &self.m * u.m.adjoint()))
    }

    /// Expectation `<v|A|v>`.
    pub fn expectation(&self, v: &DVector<C64>) -> C64 {
        v.dotc(&(&self.m * v))
    }

    fn hermitian_part(&self) -> DMatrix<C64> {
        (&self.m + self.m.adjoint()).scale(0.5)
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::DimensionMismatch { left, right });
    }
    Ok(())
}

/// A validated density operator. `subnormalized` marks truncations whose
/// trace falls short of one.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: FockOperator,
    subnormalized: bool,
}

impl DensityOperator {
    pub fn new(op: FockOperator) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let eig = hermitian_eig(&op)?;
        if let Some(&min) = eig.values.last() {
            if min < -HERMITIAN_TOL {
                return Err(Error::NegativeEigenvalue { value: min });
            }
        }
        let tr = op.trace().re;
        if (tr - 1.0).abs() <= 1e-8 {
            Ok(Self { op, subnormalized: false })
        } else if tr <= 1.0 + 1e-8 && tr > 0.0 {
            Ok(Self { op, subnormalized: true })
        } else {
            Err(Error::InvalidState(format!("trace {tr} outside (0, 1]")))
        }
    }

    /// Skips validation; used for states built by closed-form construction.
    pub(crate) fn from_parts(op: FockOperator) -> Self {
        let tr = op.trace().re;
        Self { subnormalized: (tr - 1.0).abs() > 1e-8, op }
    }

    pub fn pure(v: &DVector<C64>) -> Result<Self> {
        Self::new(FockOperator::outer(v))
    }

    pub fn basis_state(k: usize, dim: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self::from_parts(FockOperator::diagonal(&v))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_parts(FockOperator::diagonal(&vec![1.0 / dim as f64; dim]))
    }

    pub fn op(&self) -> &FockOperator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    pub fn is_subnormalized(&self) -> bool {
        self.subnormalized
    }

    /// Mean photon number `tr(rho n)`.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|k| k as f64 * self.op.m[(k, k)].re).sum()
    }

    pub fn crop(&self, dim: usize) -> Self {
        Self::from_parts(self.op.crop(dim))
    }

    pub fn embed(&self, dim: usize) -> Self {
        Self::from_parts(self.op.embed(dim))
    }

    /// Convex combination `sum_k w_k rho_k` of equally sized states.
    pub fn mixture(weights: &[f64], states: &[DensityOperator]) -> Result<Self> {
        let dim = states
            .first()
            .map(|s| s.dim())
            .ok_or_else(|| Error::param("states", "empty mixture"))?;
        let mut acc = DMatrix::<C64>::zeros(dim, dim);
        for (w, s) in weights.iter().zip(states) {
            check_dims(dim, s.dim())?;
            acc += s.matrix().scale(*w);
        }
        Ok(Self::from_parts(FockOperator::from_matrix(acc)))
    }
}

/// Eigendecomposition with eigenvalues in descending order and the matching
/// orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }

    pub fn reconstruct(&self) -> FockOperator {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&v| C64::new(v, 0.0)));
        FockOperator::from_matrix(&self.vectors * DMatrix::from_diagonal(&d) * self.vectors.adjoint())
    }
}

pub fn hermitian_eig(op: &FockOperator) -> Result<Eigen> {
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Ok(hermitian_eig_matrix(op.hermitian_part()))
}

/// Eigendecomposition of a matrix already known to be Hermitian.
pub(crate) fn hermitian_eig_matrix(m: DMatrix<C64>) -> Eigen {
    let n = m.nrows();
    let se = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    Eigen { values, vectors }
}

/// Shannon entropy (bits) of a spectrum with the `0 log 0 = 0` convention.
pub(crate) fn spectrum_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&l| l > EIGENVALUE_FLOOR)
        .map(|&l| -l * l.log2())
        .sum()
}

/// Von Neumann entropy `-tr(rho log2 rho)` in bits.
pub fn von_neumann_entropy(rho: &DensityOperator) -> Result<f64> {
    let eig = hermitian_eig(rho.op())?;
    if let Some(&min) = eig.values.last() {
        if min < -HERMITIAN_TOL {
            return Err(Error::NegativeEigenvalue { value: min });
        }
    }
    Ok(spectrum_entropy(&eig.values))
}

/// `tr sqrt(A^dagger A)`.
pub fn trace_norm(a: &FockOperator) -> f64 {
    if a.hermiticity_defect() <= HERMITIAN_TOL {
        let eig = hermitian_eig_matrix(a.hermitian_part());
        eig.values.iter().map(|v| v.abs()).sum()
    } else {
        a.matrix().clone().svd(false, false).singular_values.iter().sum()
    }
}

/// `(1/2) ||a - b||_1`, zero-padding the smaller operand.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> f64 {
    0.5 * trace_norm(&a.op().difference(b.op()))
}

pub fn tensor(a: &FockOperator, b: &FockOperator) -> Result<FockOperator> {
    tensor_with_cap(a, b, DEFAULT_TENSOR_CAP)
}

pub fn tensor_with_cap(a: &FockOperator, b: &FockOperator, cap: usize) -> Result<FockOperator> {
    let dim = a
        .dim()
        .checked_mul(b.dim())
        .ok_or(Error::DimensionCap { dim: usize::MAX, cap })?;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(FockOperator::from_matrix(a.matrix().kronecker(b.matrix())))
}

/// Which tensor factor of a bipartite operator survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Partial trace of an operator on `C^da (x) C^db`.
pub fn partial_trace(op: &FockOperator, da: usize, db: usize, keep: Keep) -> Result<FockOperator> {
    check_dims(op.dim(), da * db)?;
    let m = op.matrix();
    let out = match keep {
        Keep::First => DMatrix::from_fn(da, da, |i, j| (0..db).map(|k| m[(i * db + k, j * db + k)]).sum()),
        Keep::Second => DMatrix::from_fn(db, db, |i, j| (0..da).map(|k| m[(k * db + i, k * db + j)]).sum()),
    };
    Ok(FockOperator::from_matrix(out))
}

/// Two-outcome measurement `{1 - accept, accept}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryPovm {
    accept: FockOperator,
}

impl BinaryPovm {
    pub fn new(accept: FockOperator) -> Result<Self> {
        let eig = hermitian_eig(&accept)?;
        for &v in &eig.values {
            if !(-HERMITIAN_TOL..=1.0 + HERMITIAN_TOL).contains(&v) {
                return Err(Error::InvalidPovm { value: v });
            }
        }
        Ok(Self { accept })
    }

    /// Accepts when the photon number is at most `max_level`.
    pub fn number_cutoff(max_level: usize, dim: usize) -> Self {
        Self { accept: FockOperator::number_projector(max_level, dim) }
    }

    pub fn accept(&self) -> &FockOperator {
        &self.accept
    }

    pub fn dim(&self) -> usize {
        self.accept.dim()
    }

    /// `sqrt(accept)` via the spectral decomposition.
    pub fn sqrt_accept(&self) -> FockOperator {
        let mut eig = hermitian_eig_matrix(self.accept.hermitian_part());
        for v in eig.values.iter_mut() {
            *v = v.max(0.0).sqrt();
        }
        eig.reconstruct()
    }
}

/// Acceptance probability `tr(Pi rho)`, clamped to `[0, 1]`.
pub fn povm_probability(povm: &BinaryPovm, rho: &DensityOperator) -> Result<f64> {
    check_dims(povm.dim(), rho.dim())?;
    let p = (povm.accept().matrix() * rho.matrix()).trace().re;
    Ok(p.clamp(0.0, 1.0))
}
