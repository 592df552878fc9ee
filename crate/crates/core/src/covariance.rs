//! Covariance matrices of the random phases, the effective variance of the
//! optimally weighted phase average and the two analytic families.
//!
//! For an invertible `C` the weighted average `φ_C = Σ γ_j φ_j` with
//! `γ = Δ²_C · C⁻¹1` has the smallest variance among unit-sum weightings, and
//! that variance is `Δ²_C = (1ᵀC⁻¹1)⁻¹`.
//!
//! Two singular shapes are accepted as limits instead of errors:
//! collective dephasing `C = c·11ᵀ` (`Δ²_C = c`) and the noiseless `C = 0`
//! (`Δ²_C = 0`). Both have uniform weights.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::{Error, Result};

/// Symmetry tolerance on the raw input.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue.
pub const PSD_TOL: f64 = 1e-10;
/// `λ_min < SINGULAR_RATIO · λ_max` marks a matrix as singular.
pub const SINGULAR_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Regular,
    /// `c·11ᵀ` with `c > 0`.
    Collective { variance: f64 },
    /// All entries zero.
    Noiseless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    mat: DMatrix<f64>,
    structure: Structure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    pub gamma: Vec<f64>,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.gamma.iter().sum()
    }
}

impl CovarianceMatrix {
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        let n = mat.nrows();
        if n == 0 || mat.ncols() != n {
            return Err(Error::InvalidCovariance(format!(
                "expected a nonempty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = mat.amax().max(1.0);
        let asym = (&mat - mat.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidCovariance(format!(
                "not symmetric (deviation {asym:.3e})"
            )));
        }
        let mat = (&mat + mat.transpose()).scale(0.5);
        let eig = SymmetricEigen::new(mat.clone());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if lmin < -PSD_TOL * scale {
            return Err(Error::InvalidCovariance(format!(
                "not positive semidefinite (eigenvalue {lmin:.3e})"
            )));
        }
        let structure = if mat.amax() == 0.0 {
            Structure::Noiseless
        } else if lmin < SINGULAR_RATIO * lmax && is_constant(&mat) {
            Structure::Collective {
                variance: mat[(0, 0)],
            }
        } else {
            Structure::Regular
        };
        Ok(CovarianceMatrix { mat, structure })
    }

    /// `2β²·I`: independent dephasing.
    pub fn independent(n: usize, two_beta2: f64) -> Result<Self> {
        check_family_args(n, two_beta2, 0.0)?;
        Self::new(DMatrix::identity(n, n).scale(two_beta2))
    }

    /// `2β²·11ᵀ`: collective dephasing.
    pub fn collective(n: usize, two_beta2: f64) -> Result<Self> {
        check_family_args(n, two_beta2, 1.0)?;
        Self::new(DMatrix::from_element(n, n, two_beta2))
    }

    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("covariance needs n >= 1"));
        }
        Self::new(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn is_singular(&self) -> bool {
        !matches!(self.structure, Structure::Regular)
    }

    pub fn add(&self, other: &CovarianceMatrix) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other.dim(),
            });
        }
        Self::new(&self.mat + &other.mat)
    }

    /// `C⁻¹1` for regular matrices.
    fn inverse_times_ones(&self) -> Result<DVector<f64>> {
        let eig = SymmetricEigen::new(self.mat.clone());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if lmax <= 0.0 || lmin < SINGULAR_RATIO * lmax {
            return Err(Error::SingularCovariance {
                ratio: if lmax > 0.0 { lmin / lmax } else { 0.0 },
            });
        }
        let ones = DVector::from_element(self.dim(), 1.0);
        let proj = eig.eigenvectors.transpose() * ones;
        let scaled = proj.component_div(&eig.eigenvalues);
        Ok(&eig.eigenvectors * scaled)
    }

    /// `Δ²_C = (1ᵀC⁻¹1)⁻¹`.
    pub fn delta2_c(&self) -> Result<f64> {
        match self.structure {
            Structure::Noiseless => Ok(0.0),
            Structure::Collective { variance } => Ok(variance),
            Structure::Regular => Ok(1.0 / self.inverse_times_ones()?.sum()),
        }
    }

    /// `γ = Δ²_C·C⁻¹1`.
    pub fn weights(&self) -> Result<WeightVector> {
        let n = self.dim();
        match self.structure {
            Structure::Noiseless | Structure::Collective { .. } => Ok(WeightVector {
                gamma: vec![1.0 / n as f64; n],
            }),
            Structure::Regular => {
                let v = self.inverse_times_ones()?;
                let total = v.sum();
                Ok(WeightVector {
                    gamma: v.iter().map(|x| x / total).collect(),
                })
            }
        }
    }

    /// `γᵀCγ` for an arbitrary weighting.
    pub fn quadratic_form(&self, gamma: &[f64]) -> Result<f64> {
        if gamma.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: gamma.len(),
            });
        }
        let g = DVector::from_column_slice(gamma);
        Ok(g.dot(&(&self.mat * &g)))
    }

    /// `C − Δ²_C·11ᵀ`: covariance of the phases conditioned on `φ_C`.
    pub fn conditional_on_average(&self) -> Result<CovarianceMatrix> {
        let d2 = self.delta2_c()?;
        let n = self.dim();
        let cond = &self.mat - DMatrix::from_element(n, n, d2);
        let scale = self.mat.amax().max(1.0);
        let lmin = SymmetricEigen::new(cond.clone()).eigenvalues.min();
        if lmin < -PSD_TOL * scale {
            return Err(Error::InternalConsistency(format!(
                "conditional covariance has eigenvalue {lmin:.3e}"
            )));
        }
        // Round-off can leave eigenvalues of order −1e−16 which `new` accepts.
        CovarianceMatrix::new(cond)
    }
}

fn is_constant(mat: &DMatrix<f64>) -> bool {
    let c = mat[(0, 0)];
    let tol = 1e-12 * c.abs().max(1e-300);
    c > 0.0 && mat.iter().all(|x| (x - c).abs() <= tol)
}

fn check_family_args(n: usize, two_beta2: f64, alpha: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("covariance needs n >= 1"));
    }
    if !(two_beta2.is_finite() && two_beta2 >= 0.0) {
        return Err(Error::invalid(format!(
            "variance 2β² must be finite and nonnegative, got {two_beta2}"
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0,1]")));
    }
    Ok(())
}

/// Constant correlations: diagonal `2β²`, every off-diagonal `2β²α`.
pub fn build_c1(n: usize, two_beta2: f64, alpha: f64) -> Result<CovarianceMatrix> {
    check_family_args(n, two_beta2, alpha)?;
    CovarianceMatrix::new(DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            two_beta2
        } else {
            two_beta2 * alpha
        }
    }))
}

/// Exponentially decaying correlations: entries `2β²α^{|j−k|}`.
pub fn build_c2(n: usize, two_beta2: f64, alpha: f64) -> Result<CovarianceMatrix> {
    check_family_args(n, two_beta2, alpha)?;
    CovarianceMatrix::new(DMatrix::from_fn(n, n, |j, k| {
        two_beta2 * alpha.powi(j.abs_diff(k) as i32)
    }))
}

pub fn delta2_c(cov: &CovarianceMatrix) -> Result<f64> {
    cov.delta2_c()
}

pub fn weights(cov: &CovarianceMatrix) -> Result<WeightVector> {
    cov.weights()
}

/// `2β²(α + (1−α)/n)`.
pub fn delta2_c1_closed(n: usize, two_beta2: f64, alpha: f64) -> Result<f64> {
    check_family_args(n, two_beta2, alpha)?;
    Ok(two_beta2 * (alpha + (1.0 - alpha) / n as f64))
}

/// `2β²(1+α) / (n(1−α) + 2α)`.
///
/// The exponential family has a tridiagonal inverse, giving
/// `1ᵀC⁻¹1 = (n(1−α) + 2α) / (2β²(1+α))`. For large `n` this behaves as
/// `2β²n⁻¹(1+α)/(1−α)`.
pub fn delta2_c2_closed(n: usize, two_beta2: f64, alpha: f64) -> Result<f64> {
    check_family_args(n, two_beta2, alpha)?;
    if alpha >= 1.0 {
        return Err(Error::invalid(
            "closed form for the exponential family requires alpha < 1",
        ));
    }
    let n = n as f64;
    Ok(two_beta2 * (1.0 + alpha) / (n * (1.0 - alpha) + 2.0 * alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Gauss–Jordan inverse, independent of the eigen route used above.
    fn inverse_oracle(mat: &DMatrix<f64>) -> DMatrix<f64> {
        let n = mat.nrows();
        let mut a = mat.clone();
        let mut inv = DMatrix::<f64>::identity(n, n);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            a.swap_rows(col, piv);
            inv.swap_rows(col, piv);
            let p = a[(col, col)];
            for k in 0..n {
                a[(col, k)] /= p;
                inv[(col, k)] /= p;
            }
            for r in 0..n {
                if r != col {
                    let f = a[(r, col)];
                    for k in 0..n {
                        a[(r, k)] -= f * a[(col, k)];
                        inv[(r, k)] -= f * inv[(col, k)];
                    }
                }
            }
        }
        inv
    }

    fn delta2_oracle(mat: &DMatrix<f64>) -> f64 {
        1.0 / inverse_oracle(mat).sum()
    }

    #[test]
    fn c1_examples() {
        let c = build_c1(2, 1.0, 0.0).unwrap();
        assert_eq!(c.matrix(), &DMatrix::identity(2, 2));
        let c = build_c1(3, 0.5, 0.2).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let want = if j == k { 0.5 } else { 0.1 };
                assert!((c.matrix()[(j, k)] - want).abs() < 1e-15);
            }
        }
        let c = build_c1(2, 1.0, 1.0).unwrap();
        assert!(c.is_singular());
        assert_eq!(c.structure(), Structure::Collective { variance: 1.0 });
    }

    #[test]
    fn alpha_out_of_range() {
        assert!(matches!(build_c1(3, 1.0, 1.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_c2(3, 1.0, -0.1), Err(Error::InvalidArgument(_))));
        assert!(delta2_c2_closed(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn c2_examples() {
        let c = build_c2(2, 1.0, 0.5).unwrap();
        assert_eq!(c.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let c = build_c2(3, 0.7, 0.0).unwrap();
        assert_eq!(c.matrix(), &DMatrix::identity(3, 3).scale(0.7));
        let c = build_c2(4, 2.0, 0.9).unwrap();
        assert!((c.matrix()[(0, 3)] - 2.0 * 0.729).abs() < 1e-15);
        assert!(!c.is_singular());
    }

    #[test]
    fn delta2_examples() {
        let c = CovarianceMatrix::independent(5, 0.5).unwrap();
        assert!((c.delta2_c().unwrap() - 0.1).abs() < 1e-15);
        let c1 = build_c1(2, 1.0, 0.5).unwrap();
        assert!((c1.delta2_c().unwrap() - 0.75).abs() < 1e-14);
        assert!((delta2_oracle(c1.matrix()) - 0.75).abs() < 1e-14);
        let collective = build_c1(4, 0.3, 1.0).unwrap();
        assert_eq!(collective.delta2_c().unwrap(), 0.3);
        let collective2 = build_c2(4, 0.3, 1.0).unwrap();
        assert_eq!(collective2.delta2_c().unwrap(), 0.3);
    }

    #[test]
    fn singular_non_collective_rejected() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let c = CovarianceMatrix::new(m).unwrap();
        assert!(matches!(c.delta2_c(), Err(Error::SingularCovariance { .. })));
        assert!(c.weights().is_err());
    }

    #[test]
    fn non_psd_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            CovarianceMatrix::new(m),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn closed_forms_match_inversion_oracle() {
        for n in 2..=12 {
            for &alpha in &[0.0, 0.2, 0.5, 0.9, 0.99] {
                let c1 = build_c1(n, 0.5, alpha).unwrap();
                let c2 = build_c2(n, 0.5, alpha).unwrap();
                let o1 = delta2_oracle(c1.matrix());
                let o2 = delta2_oracle(c2.matrix());
                let f1 = delta2_c1_closed(n, 0.5, alpha).unwrap();
                let f2 = delta2_c2_closed(n, 0.5, alpha).unwrap();
                assert!((f1 - o1).abs() <= 1e-10 * (1.0 + o1.abs()), "c1 n={n} a={alpha}");
                assert!((f2 - o2).abs() <= 1e-10 * (1.0 + o2.abs()), "c2 n={n} a={alpha}");
                assert!((c1.delta2_c().unwrap() - o1).abs() <= 1e-10 * (1.0 + o1));
                assert!((c2.delta2_c().unwrap() - o2).abs() <= 1e-10 * (1.0 + o2));
            }
        }
    }

    #[test]
    fn closed_form_limits() {
        assert!((delta2_c1_closed(7, 0.5, 0.0).unwrap() - 0.5 / 7.0).abs() < 1e-16);
        assert_eq!(delta2_c1_closed(7, 0.5, 1.0).unwrap(), 0.5);
        assert!((delta2_c2_closed(7, 0.5, 0.0).unwrap() - 0.5 / 7.0).abs() < 1e-16);
        let n = 1_000_000;
        let scaled = n as f64 * delta2_c2_closed(n, 1.0, 0.5).unwrap();
        assert!((scaled - 3.0).abs() < 1e-5);
        // 2×2 oracle: [[1,.5],[.5,1]]⁻¹ sums to 4/3.
        assert!((delta2_c2_closed(2, 1.0, 0.5).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn weights_examples() {
        let w = CovarianceMatrix::independent(4, 3.0).unwrap().weights().unwrap();
        assert!(w.gamma.iter().all(|g| (g - 0.25).abs() < 1e-15));
        let w = build_c1(5, 0.5, 0.7).unwrap().weights().unwrap();
        assert!(w.gamma.iter().all(|g| (g - 0.2).abs() < 1e-13));
        let c2 = build_c2(3, 1.0, 0.5).unwrap();
        let w = c2.weights().unwrap();
        // Row sums of the inverted matrix, normalised.
        let inv = inverse_oracle(c2.matrix());
        let row: Vec<f64> = (0..3).map(|j| inv.row(j).sum()).collect();
        let total: f64 = row.iter().sum();
        for (g, r) in w.gamma.iter().zip(&row) {
            assert!((g - r / total).abs() < 1e-14);
        }
        assert!((w.gamma[0] - w.gamma[2]).abs() < 1e-14);
        assert!((w.gamma[1] - w.gamma[0]).abs() > 0.1);
        assert!((w.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn conditional_covariance_independent_pair() {
        let c = CovarianceMatrix::independent(2, 0.8).unwrap();
        let cond = c.conditional_on_average().unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.4, -0.4, -0.4, 0.4]);
        assert!((cond.matrix() - expected).amax() < 1e-15);
        let eig = SymmetricEigen::new(cond.matrix().clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-15 && (ev[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn conditional_covariance_collective_is_zero() {
        let c = CovarianceMatrix::collective(3, 0.5).unwrap();
        let cond = c.conditional_on_average().unwrap();
        assert_eq!(cond.structure(), Structure::Noiseless);
    }
}
