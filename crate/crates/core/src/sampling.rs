//! Seeded sampling shared by the Monte Carlo routines.
//!
//! Partition policy: shots are split into consecutive chunks of
//! [`CHUNK_SHOTS`]; chunk `k` draws from a ChaCha8 stream keyed by
//! `(seed, k)`. Chunks may run on any worker, and results are folded in chunk
//! order, so outputs depend only on `(seed, shots)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::CovarianceMatrix;
use crate::{Error, Result};

pub const CHUNK_SHOTS: usize = 4096;

/// `(chunk index, shots in chunk)` covering `shots`.
pub(crate) fn chunks(shots: usize) -> Vec<(usize, usize)> {
    (0..shots.div_ceil(CHUNK_SHOTS))
        .map(|k| (k, CHUNK_SHOTS.min(shots - k * CHUNK_SHOTS)))
        .collect()
}

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Draws from `N(mean·1, C)` through the symmetric PSD square root of `C`.
#[derive(Debug, Clone)]
pub(crate) struct GaussianSampler {
    root: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &CovarianceMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(cov.matrix().clone());
        let scale = cov.matrix().amax().max(1.0);
        if eig.eigenvalues.min() < -1e-10 * scale {
            return Err(Error::InvalidCovariance(
                "covariance is not positive semidefinite".into(),
            ));
        }
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose();
        Ok(GaussianSampler { root })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, mean: f64) -> DVector<f64> {
        let n = self.root.nrows();
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (&self.root * z).add_scalar(mean)
    }
}

/// Inverse-CDF draw from a probability vector.
///
/// Negative entries down to −1e−12 are clamped to zero and the vector is
/// renormalised; anything worse is a consistency failure.
pub(crate) fn sample_outcome<R: Rng>(rng: &mut R, probs: &[f64]) -> Result<usize> {
    let mut total = 0.0;
    for &p in probs {
        if !(p >= -1e-12) {
            return Err(Error::NumericalConsistency(format!(
                "outcome probability {p:.3e} is negative"
            )));
        }
        total += p.max(0.0);
    }
    if !(total > 0.0) {
        return Err(Error::NumericalConsistency(
            "outcome probabilities sum to zero".into(),
        ));
    }
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        let p = p.max(0.0);
        if p > 0.0 {
            last = k;
        }
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(last)
}
