//! Seeded random operators for property checks.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::fock::{BinaryPovm, DensityOperator, FockOperator, C64};

fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> FockOperator {
    let g = ginibre(dim, dim, rng);
    FockOperator::from_matrix((&g + g.adjoint()).scale(0.5))
}

/// Haar-distributed unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> FockOperator {
    let qr = ginibre(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    FockOperator::from_matrix(q)
}

/// Full-rank mixed state `G G^dagger / tr(G G^dagger)` (Hilbert-Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityOperator {
    let g = ginibre(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut m = m.unscale(tr);
    // exact Hermitian symmetry
    m = (&m + m.adjoint()).scale(0.5);
    DensityOperator::from_parts(FockOperator::from_matrix(m))
}

/// `U diag(lambda) U^dagger` with eigenvalues drawn uniformly from `[lo, hi]`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, lo: f64, hi: f64, rng: &mut R) -> BinaryPovm {
    let u = random_unitary(dim, rng);
    let vals: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..=hi)).collect();
    let d = FockOperator::diagonal(&vals);
    let m = d.conjugate_by(&u).expect("same dimension").into_matrix();
    let m = (&m + m.adjoint()).scale(0.5);
    BinaryPovm::new(FockOperator::from_matrix(m)).expect("eigenvalues in [0, 1]")
}
