//! Correlated Gaussian dephasing.
//!
//! With zero-mean Gaussian phases of covariance `C` acting through diagonal
//! local generators, the channel multiplies entry `(m,n)` of the state by the
//! characteristic function `exp(−½ δᵀCδ)`, `δ_j = h_j(m_j) − h_j(n_j)`.
//! [`dephase`] applies that factor directly; [`dephase_monte_carlo`] averages
//! randomly rotated copies of the state and serves as an oracle for it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::covariance::CovarianceMatrix;
use crate::linalg::{commutator_derivative, encode_phase, CMatrix, DensityMatrix, GeneratorSpec, HermitianOperator, I};
use crate::sampling::{chunk_rng, chunks, GaussianSampler};
use crate::{Error, Result};

fn check_inputs(rho: &DensityMatrix, gen: &GeneratorSpec, cov: &CovarianceMatrix) -> Result<()> {
    gen.check_dim(rho.dim())?;
    if cov.dim() != gen.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: gen.num_sites(),
            actual: cov.dim(),
        });
    }
    Ok(())
}

/// Entrywise decay factors `exp(−½ δᵀCδ)`.
pub fn decay_factors(gen: &GeneratorSpec, cov: &CovarianceMatrix) -> Result<DMatrix<f64>> {
    if cov.dim() != gen.num_sites() {
        return Err(Error::DimensionMismatch {
            expected: gen.num_sites(),
            actual: cov.dim(),
        });
    }
    let u = gen.local_energies();
    let w = &u * cov.matrix();
    // δᵀCδ = u_mᵀCu_m + u_nᵀCu_n − 2u_mᵀCu_n
    let diag: Vec<f64> = (0..u.nrows()).map(|m| u.row(m).dot(&w.row(m))).collect();
    let cross = &w * u.transpose();
    let dim = u.nrows();
    Ok(DMatrix::from_fn(dim, dim, |m, n| {
        let q = diag[m] + diag[n] - 2.0 * cross[(m, n)];
        (-0.5 * q.max(0.0)).exp()
    }))
}

/// Exact dephased state `Λ(ρ)`.
pub fn dephase(rho: &DensityMatrix, gen: &GeneratorSpec, cov: &CovarianceMatrix) -> Result<DensityMatrix> {
    check_inputs(rho, gen, cov)?;
    let factors = decay_factors(gen, cov)?;
    let mat = rho.matrix();
    let mut out = mat.clone();
    for n in 0..mat.ncols() {
        for m in 0..mat.nrows() {
            if m != n {
                out[(m, n)] = mat[(m, n)] * factors[(m, n)];
            }
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Monte Carlo estimate of `Λ(ρ)` with per-entry standard errors.
#[derive(Debug, Clone)]
pub struct SampledDephasing {
    pub state: DensityMatrix,
    /// Standard error of the real part of each entry.
    pub std_err_re: DMatrix<f64>,
    /// Standard error of the imaginary part of each entry.
    pub std_err_im: DMatrix<f64>,
    pub shots: usize,
}

#[derive(Clone)]
struct Moments {
    sum: CMatrix,
    sq_re: DMatrix<f64>,
    sq_im: DMatrix<f64>,
}

impl Moments {
    fn zeros(dim: usize) -> Self {
        Moments {
            sum: CMatrix::zeros(dim, dim),
            sq_re: DMatrix::zeros(dim, dim),
            sq_im: DMatrix::zeros(dim, dim),
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        self.sum += &other.sum;
        self.sq_re += &other.sq_re;
        self.sq_im += &other.sq_im;
        self
    }
}

/// Averages `e^{−iΣφ_jH_j} ρ e^{iΣφ_jH_j}` over `shots` Gaussian draws.
pub fn dephase_monte_carlo_detailed(
    rho: &DensityMatrix,
    gen: &GeneratorSpec,
    cov: &CovarianceMatrix,
    shots: usize,
    seed: u64,
) -> Result<SampledDephasing> {
    check_inputs(rho, gen, cov)?;
    if shots == 0 {
        return Err(Error::invalid("shots must be >= 1"));
    }
    let sampler = GaussianSampler::new(cov)?;
    let u = gen.local_energies();
    let mat = rho.matrix();
    let dim = rho.dim();

    let partials: Vec<Moments> = chunks(shots)
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = chunk_rng(seed, chunk);
            let mut acc = Moments::zeros(dim);
            for _ in 0..count {
                let phases = sampler.sample(&mut rng, 0.0);
                let theta: DVector<f64> = &u * phases;
                let v: Vec<Complex64> = theta.iter().map(|&t| (-I * t).exp()).collect();
                for n in 0..dim {
                    for m in 0..dim {
                        let s = mat[(m, n)] * v[m] * v[n].conj();
                        acc.sum[(m, n)] += s;
                        acc.sq_re[(m, n)] += s.re * s.re;
                        acc.sq_im[(m, n)] += s.im * s.im;
                    }
                }
            }
            acc
        })
        .collect();
    let total = partials.iter().fold(Moments::zeros(dim), Moments::merge);

    let k = shots as f64;
    let mean = total.sum.unscale(k);
    let stderr = |sq: &DMatrix<f64>, part: fn(&Complex64) -> f64| {
        DMatrix::from_fn(dim, dim, |m, n| {
            if shots < 2 {
                return f64::NAN;
            }
            let mu = part(&mean[(m, n)]);
            let var = ((sq[(m, n)] - k * mu * mu) / (k - 1.0)).max(0.0);
            (var / k).sqrt()
        })
    };
    let std_err_re = stderr(&total.sq_re, |z| z.re);
    let std_err_im = stderr(&total.sq_im, |z| z.im);
    Ok(SampledDephasing {
        state: DensityMatrix::from_matrix_unchecked(mean),
        std_err_re,
        std_err_im,
        shots,
    })
}

pub fn dephase_monte_carlo(
    rho: &DensityMatrix,
    gen: &GeneratorSpec,
    cov: &CovarianceMatrix,
    shots: usize,
    seed: u64,
) -> Result<DensityMatrix> {
    Ok(dephase_monte_carlo_detailed(rho, gen, cov, shots, seed)?.state)
}

/// `−i[H, ρ̄]`, the phase derivative of `ρ̄_φ` at `φ = 0`.
pub fn derivative_state(rho_bar: &DensityMatrix, gen: &GeneratorSpec) -> Result<HermitianOperator> {
    gen.check_dim(rho_bar.dim())?;
    Ok(HermitianOperator::from_matrix_unchecked(commutator_derivative(
        rho_bar.matrix(),
        &gen.energies(),
    )))
}

/// `−i[H_j, ρ̄]` for a single site.
pub fn site_derivative_state(rho_bar: &DensityMatrix, gen: &GeneratorSpec, site: usize) -> Result<HermitianOperator> {
    gen.check_dim(rho_bar.dim())?;
    if site >= gen.num_sites() {
        return Err(Error::invalid(format!("site {site} out of range")));
    }
    Ok(HermitianOperator::from_matrix_unchecked(commutator_derivative(
        rho_bar.matrix(),
        &gen.site_energies(site),
    )))
}

/// State of the system conditioned on the weighted phase average `φ_C = φ`.
///
/// Given `φ_C`, the phases are Gaussian with mean `φ·1` and covariance
/// `C − Δ²_C·11ᵀ`, independent of the prior mean, so the conditional state is
/// `encode_phase(dephase(ρ, C − Δ²_C·11ᵀ), φ)`.
pub fn conditional_dephased_state(
    rho: &DensityMatrix,
    gen: &GeneratorSpec,
    cov: &CovarianceMatrix,
    phi: f64,
) -> Result<DensityMatrix> {
    check_inputs(rho, gen, cov)?;
    let conditional = cov.conditional_on_average()?;
    encode_phase(&dephase(rho, gen, &conditional)?, gen, phi)
}
