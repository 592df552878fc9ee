#![allow(dead_code)]

use dephimetry::covariance::CovarianceMatrix;
use dephimetry::linalg::{CMatrix, CVector, DensityMatrix};
use dephimetry::Povm;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_pure<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let v: CVector = ginibre(rng, dim, 1).column(0).into_owned();
    DensityMatrix::pure(&v).unwrap()
}

/// Full-rank Hilbert–Schmidt random state.
pub fn random_mixed<R: Rng>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, dim);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m.unscale(tr)).unwrap()
}

pub fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> CMatrix {
    ginibre(rng, dim, dim).qr().q()
}

pub fn random_projective<R: Rng>(rng: &mut R, dim: usize) -> Povm {
    Povm::projective(&random_unitary(rng, dim)).unwrap()
}

/// Rank-one effects `S^{-1/2} v v† S^{-1/2}` from `outcomes` random vectors.
pub fn random_povm<R: Rng>(rng: &mut R, dim: usize, outcomes: usize) -> Povm {
    let vs = ginibre(rng, dim, outcomes);
    let s = &vs * vs.adjoint();
    let eig = s.clone().symmetric_eigen();
    let inv_sqrt = &eig.eigenvectors
        * CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.powf(-0.5), 0.0)))
        * eig.eigenvectors.adjoint();
    let effects = (0..outcomes)
        .map(|k| {
            let w = &inv_sqrt * vs.column(k);
            &w * w.adjoint()
        })
        .collect();
    Povm::new(effects).unwrap()
}

/// Wishart-type PSD covariance with entries of order `scale`.
pub fn random_covariance<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CovarianceMatrix {
    let a = DMatrix::<f64>::from_fn(n, n + 1, |_, _| rng.sample(StandardNormal));
    let m = (&a * a.transpose()).scale(scale / (n + 1) as f64) + DMatrix::identity(n, n).scale(1e-3 * scale);
    CovarianceMatrix::new(m).unwrap()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
