//! Complex linear algebra substrate: density matrices, Hermitian operators,
//! diagonal local generators and phase encoding.
//!
//! Basis convention: the computational product basis with site 0 as the most
//! significant digit, so for qubits index `m` is the bit string
//! `m_0 m_1 … m_{N-1}`. Every generator is diagonal in this basis; for qubits
//! the default `H_j = σ^z_j / 2` gives `h_j(0) = +½`, `h_j(1) = −½`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Deviation from Hermiticity tolerated before symmetrisation.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace-one tolerance.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest admissible eigenvalue of a state.
pub const PSD_TOL: f64 = 1e-10;

pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Eigendecomposition of a Hermitian matrix, eigenvalues in ascending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    /// Columns are the normalised eigenvectors matching `values`.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(mat: &CMatrix) -> Self {
        let eig = mat.clone().symmetric_eigen();
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        HermitianEigen { values, vectors }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn max_abs(mat: &CMatrix) -> f64 {
    mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn hermitian_deviation(mat: &CMatrix) -> f64 {
    max_abs(&(mat - mat.adjoint()))
}

fn symmetrize(mat: &CMatrix) -> CMatrix {
    (mat + mat.adjoint()).scale(0.5)
}

fn check_square(mat: &CMatrix) -> Result<usize> {
    if mat.nrows() != mat.ncols() {
        return Err(Error::invalid(format!(
            "matrix is {}x{}, expected square",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if mat.nrows() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    Ok(mat.nrows())
}

/// Commuting local generators `H = Σ_j H_j`, each diagonal in the product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    sites: Vec<Vec<f64>>,
}

impl GeneratorSpec {
    pub fn new(sites: Vec<Vec<f64>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("generator needs at least one site"));
        }
        if let Some(j) = sites.iter().position(|h| h.len() < 2) {
            return Err(Error::invalid(format!("site {j} has fewer than two levels")));
        }
        if sites.iter().flatten().any(|h| !h.is_finite()) {
            return Err(Error::invalid("generator eigenvalues must be finite"));
        }
        Ok(GeneratorSpec { sites })
    }

    /// `n` qubits with `H_j = σ^z_j / 2`.
    pub fn qubits(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one qubit"));
        }
        Self::new(vec![vec![0.5, -0.5]; n])
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site_levels(&self, site: usize) -> &[f64] {
        &self.sites[site]
    }

    pub fn dim(&self) -> usize {
        self.sites.iter().map(Vec::len).product()
    }

    /// Per-site level indices of basis state `index`.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.sites.len()];
        for (j, levels) in self.sites.iter().enumerate().rev() {
            out[j] = index % levels.len();
            index /= levels.len();
        }
        out
    }

    /// `h_j(m_j)` for every basis index `m`: row `m`, column `j`.
    pub fn local_energies(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let n = self.num_sites();
        let mut out = DMatrix::zeros(dim, n);
        for m in 0..dim {
            for (j, d) in self.digits(m).into_iter().enumerate() {
                out[(m, j)] = self.sites[j][d];
            }
        }
        out
    }

    /// Diagonal of the total generator `H`.
    pub fn energies(&self) -> DVector<f64> {
        let local = self.local_energies();
        DVector::from_iterator(local.nrows(), local.row_iter().map(|r| r.sum()))
    }

    /// Diagonal of the site generator `H_j`.
    pub fn site_energies(&self, site: usize) -> DVector<f64> {
        self.local_energies().column(site).into_owned()
    }

    pub fn hamiltonian(&self) -> HermitianOperator {
        HermitianOperator::from_diagonal(&self.energies())
    }

    pub fn site_hamiltonian(&self, site: usize) -> HermitianOperator {
        HermitianOperator::from_diagonal(&self.site_energies(site))
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: dim,
            });
        }
        Ok(())
    }
}

/// Hermitian operator on the full Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
}

impl HermitianOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        check_square(&mat)?;
        let dev = hermitian_deviation(&mat);
        if dev > HERMITIAN_TOL * (1.0 + max_abs(&mat)) {
            return Err(Error::invalid(format!(
                "operator is not Hermitian (deviation {dev:.3e})"
            )));
        }
        Ok(HermitianOperator {
            mat: symmetrize(&mat),
        })
    }

    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        HermitianOperator {
            mat: symmetrize(&mat),
        }
    }

    pub fn from_diagonal(diag: &DVector<f64>) -> Self {
        HermitianOperator {
            mat: CMatrix::from_diagonal(&diag.map(|x| Complex64::new(x, 0.0))),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn eigen(&self) -> HermitianEigen {
        HermitianEigen::new(&self.mat)
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.mat)
    }
}

/// A valid quantum state: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validates and symmetrises `mat`.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let dim = check_square(&mat)?;
        let dev = hermitian_deviation(&mat);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        let mat = symmetrize(&mat);
        let tr = mat.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        // λ_min ≥ −PSD_TOL  ⇔  ρ + PSD_TOL·1 admits a Cholesky factor.
        let shifted = &mat + CMatrix::identity(dim, dim).scale(PSD_TOL);
        if !has_cholesky(shifted) {
            return Err(Error::InvalidState(
                "has eigenvalues below -1e-10".to_string(),
            ));
        }
        Ok(DensityMatrix { mat })
    }

    /// Trusted constructor for outputs of trace- and positivity-preserving maps.
    pub(crate) fn from_matrix_unchecked(mat: CMatrix) -> Self {
        DensityMatrix {
            mat: symmetrize(&mat),
        }
    }

    /// Projector onto the normalised `psi`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        let norm = psi.norm();
        if psi.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(Error::invalid("state vector must be nonzero and finite"));
        }
        let v = psi.unscale(norm);
        Ok(DensityMatrix {
            mat: &v * v.adjoint(),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(DensityMatrix {
            mat: CMatrix::identity(dim, dim).unscale(dim as f64),
        })
    }

    /// `t·a + (1−t)·b`.
    pub fn mix(a: &DensityMatrix, b: &DensityMatrix, t: f64) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                actual: b.dim(),
            });
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("mixing weight {t} outside [0,1]")));
        }
        Ok(DensityMatrix {
            mat: a.mat.scale(t) + b.mat.scale(1.0 - t),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigen(&self) -> HermitianEigen {
        HermitianEigen::new(&self.mat)
    }

    /// `Tr(ρ·op)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<f64> {
        if op.nrows() != self.dim() || op.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: op.nrows(),
            });
        }
        Ok(trace_product(&self.mat, op).re)
    }

    /// Largest absolute entry of `self − other`.
    pub fn distance_max(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.mat - &other.mat))
    }
}

/// In-place Cholesky of a Hermitian matrix; false once a pivot is not
/// strictly positive.
fn has_cholesky(mut a: CMatrix) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= a[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let d = d.sqrt();
        a[(j, j)] = Complex64::new(d, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= a[(i, k)] * a[(j, k)].conj();
            }
            a[(i, j)] = s / d;
        }
    }
    true
}

/// `Tr(a·b)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `(|0…0⟩ + |1…1⟩)/√2` on `n` qubits.
pub fn ghz_state(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::invalid("GHZ state needs n >= 1"));
    }
    if n >= usize::BITS as usize {
        return Err(Error::invalid(format!("{n} qubits exceed addressable dimension")));
    }
    let dim = 1usize << n;
    let mut mat = CMatrix::zeros(dim, dim);
    for (m, n) in [(0, 0), (0, dim - 1), (dim - 1, 0), (dim - 1, dim - 1)] {
        mat[(m, n)] = Complex64::new(0.5, 0.0);
    }
    Ok(DensityMatrix { mat })
}

/// `(|+⟩⟨+|)^⊗n`.
pub fn product_plus_state(n: usize) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(Error::invalid("product state needs n >= 1"));
    }
    if n >= usize::BITS as usize {
        return Err(Error::invalid(format!("{n} qubits exceed addressable dimension")));
    }
    let dim = 1usize << n;
    Ok(DensityMatrix {
        mat: CMatrix::from_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0)),
    })
}

/// `e^{−iφH} ρ e^{iφH}`: entry `(m,n)` picks up `e^{−iφ(E_m − E_n)}`.
pub fn encode_phase(rho: &DensityMatrix, gen: &GeneratorSpec, phi: f64) -> Result<DensityMatrix> {
    gen.check_dim(rho.dim())?;
    let energies = gen.energies();
    Ok(DensityMatrix::from_matrix_unchecked(encode_with_energies(
        rho.matrix(),
        &energies.scale(phi),
    )))
}

/// Entrywise `mat_{mn} · e^{−i(θ_m − θ_n)}`.
pub(crate) fn encode_with_energies(mat: &CMatrix, theta: &DVector<f64>) -> CMatrix {
    let phases: Vec<Complex64> = theta.iter().map(|&t| (-I * t).exp()).collect();
    CMatrix::from_fn(mat.nrows(), mat.ncols(), |m, n| {
        mat[(m, n)] * phases[m] * phases[n].conj()
    })
}

/// `−i[H, ρ]` for diagonal `H` with the given diagonal.
pub(crate) fn commutator_derivative(mat: &CMatrix, diag: &DVector<f64>) -> CMatrix {
    CMatrix::from_fn(mat.nrows(), mat.ncols(), |m, n| {
        -I * (diag[m] - diag[n]) * mat[(m, n)]
    })
}

/// `Tr(ρ·op²) − Tr(ρ·op)²`.
pub fn variance(op: &HermitianOperator, rho: &DensityMatrix) -> Result<f64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            actual: op.dim(),
        });
    }
    let mean = rho.expectation(op.matrix())?;
    let sq = op.matrix() * op.matrix();
    Ok(rho.expectation(&sq)? - mean * mean)
}

pub fn pauli_x() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

pub fn pauli_y() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[o, -I, I, o])
}

pub fn pauli_z() -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    CMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}
