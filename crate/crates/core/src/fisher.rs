//! Quantum and classical Fisher information for unitary phase encoding.
//!
//! The symmetric logarithmic derivative solves `Lρ + ρL = 2∂ρ` with
//! `∂ρ = −i[H, ρ]`. In the eigenbasis `ρ = Σ λ_m |m⟩⟨m|` it is
//! `L_{mn} = 2∂ρ_{mn}/(λ_m + λ_n)`, restricted to pairs with
//! `λ_m + λ_n` above [`rank_tolerance`].

use nalgebra::DVector;
use num_complex::Complex64;

use crate::linalg::{
    commutator_derivative, pauli_x, pauli_y, pauli_z, trace_product, CMatrix, DensityMatrix, GeneratorSpec,
    HermitianEigen, HermitianOperator,
};
use crate::{Error, Result};

/// Relative eigenvalue floor for the SLD support.
pub const RANK_TOL_REL: f64 = 1e-10;
/// Outcomes with probability at or below this carry no Fisher information.
pub const PROB_FLOOR: f64 = 1e-12;
/// Tolerance on effect positivity and completeness.
pub const POVM_TOL: f64 = 1e-10;

pub fn rank_tolerance(eig: &HermitianEigen) -> f64 {
    RANK_TOL_REL * eig.max().max(0.0)
}

/// A finite POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    effects: Vec<CMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidPovm("no effects".into()));
        };
        let dim = first.nrows();
        let mut total = CMatrix::zeros(dim, dim);
        let mut sym = Vec::with_capacity(effects.len());
        for (x, e) in effects.into_iter().enumerate() {
            if e.nrows() != dim || e.ncols() != dim {
                return Err(Error::InvalidPovm(format!("effect {x} has wrong shape")));
            }
            let dev = (&e - e.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if dev > POVM_TOL {
                return Err(Error::InvalidPovm(format!("effect {x} is not Hermitian")));
            }
            let e = (&e + e.adjoint()).scale(0.5);
            if HermitianEigen::new(&e).min() < -POVM_TOL {
                return Err(Error::InvalidPovm(format!("effect {x} is not positive")));
            }
            total += &e;
            sym.push(e);
        }
        let dev = (total - CMatrix::identity(dim, dim))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > POVM_TOL {
            return Err(Error::InvalidPovm(format!(
                "effects do not sum to identity (deviation {dev:.3e})"
            )));
        }
        Ok(Povm { effects: sym })
    }

    /// The trivial single-outcome measurement.
    pub fn identity(dim: usize) -> Self {
        Povm {
            effects: vec![CMatrix::identity(dim, dim)],
        }
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn projective(basis: &CMatrix) -> Result<Self> {
        let effects = (0..basis.ncols())
            .map(|k| {
                let v = basis.column(k);
                v * v.adjoint()
            })
            .collect();
        Self::new(effects)
    }

    /// Single-qubit projective measurement along a Pauli axis (`'x'`, `'y'` or `'z'`),
    /// outcome 0 being the +1 eigenvector.
    pub fn qubit_axis(axis: char) -> Result<Self> {
        let pauli = match axis {
            'x' => pauli_x(),
            'y' => pauli_y(),
            'z' => pauli_z(),
            _ => return Err(Error::invalid(format!("unknown axis {axis:?}"))),
        };
        let id = CMatrix::identity(2, 2);
        Self::new(vec![(&id + &pauli).scale(0.5), (&id - &pauli).scale(0.5)])
    }

    /// Product measurement; outcome index is big-endian over the factors.
    pub fn tensor(parts: &[Povm]) -> Result<Self> {
        let Some((first, rest)) = parts.split_first() else {
            return Err(Error::InvalidPovm("no factors".into()));
        };
        let mut effects = first.effects.clone();
        for p in rest {
            effects = effects
                .iter()
                .flat_map(|a| p.effects.iter().map(move |b| a.kronecker(b)))
                .collect();
        }
        Self::new(effects)
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn effects(&self) -> &[CMatrix] {
        &self.effects
    }

    /// `Tr(ρΠ_x)` for every outcome.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.check_dim(rho.dim())?;
        Ok(self
            .effects
            .iter()
            .map(|e| trace_product(rho.matrix(), e).re)
            .collect())
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

struct SldParts {
    eig: HermitianEigen,
    /// `∂ρ` in the eigenbasis of ρ.
    deriv: CMatrix,
    tol: f64,
}

fn sld_parts(rho: &DensityMatrix, gen: &GeneratorSpec) -> Result<SldParts> {
    gen.check_dim(rho.dim())?;
    let eig = rho.eigen();
    let d = commutator_derivative(rho.matrix(), &gen.energies());
    let deriv = eig.vectors.adjoint() * d * &eig.vectors;
    let tol = rank_tolerance(&eig);
    Ok(SldParts { eig, deriv, tol })
}

/// Symmetric logarithmic derivative in the computational basis.
pub fn sld(rho: &DensityMatrix, gen: &GeneratorSpec) -> Result<HermitianOperator> {
    let SldParts { eig, deriv, tol } = sld_parts(rho, gen)?;
    let dim = rho.dim();
    let lam = &eig.values;
    let inner = CMatrix::from_fn(dim, dim, |m, n| {
        let s = lam[m] + lam[n];
        if s > tol {
            deriv[(m, n)].scale(2.0 / s)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let l = &eig.vectors * inner * eig.vectors.adjoint();
    Ok(HermitianOperator::from_matrix_unchecked(l))
}

/// Quantum Fisher information `Tr(ρL²) = 2 Σ |∂ρ_{mn}|²/(λ_m+λ_n)`.
pub fn qfi(rho: &DensityMatrix, gen: &GeneratorSpec) -> Result<f64> {
    let SldParts { eig, deriv, tol } = sld_parts(rho, gen)?;
    let lam = &eig.values;
    let dim = rho.dim();
    let mut total = 0.0;
    for n in 0..dim {
        for m in 0..dim {
            let s = lam[m] + lam[n];
            if s > tol {
                total += 2.0 * deriv[(m, n)].norm_sqr() / s;
            }
        }
    }
    Ok(total)
}

/// Classical Fisher information of measuring `povm` on `ρ_φ` at the given state.
pub fn classical_fi(rho: &DensityMatrix, gen: &GeneratorSpec, povm: &Povm) -> Result<f64> {
    gen.check_dim(rho.dim())?;
    povm.check_dim(rho.dim())?;
    let d = commutator_derivative(rho.matrix(), &gen.energies());
    Ok(povm
        .effects()
        .iter()
        .filter_map(|e| {
            let p = trace_product(rho.matrix(), e).re;
            (p > PROB_FLOOR).then(|| {
                let dp = trace_product(&d, e).re;
                dp * dp / p
            })
        })
        .sum())
}

/// Projective measurement in the SLD eigenbasis.
///
/// Projectors are ordered by ascending SLD eigenvalue. Inside a degenerate
/// eigenspace the basis diagonalises `H` restricted to it, ordered by
/// ascending energy; each vector's phase is fixed so its first significant
/// component is real and positive.
pub fn optimal_povm(rho: &DensityMatrix, gen: &GeneratorSpec) -> Result<Povm> {
    let l = sld(rho, gen)?;
    let eig = l.eigen();
    let dim = rho.dim();
    let h = gen.hamiltonian();
    let scale = eig.values.amax().max(1.0);
    let degenerate_tol = 1e-9 * scale;

    let mut basis = CMatrix::zeros(dim, dim);
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && eig.values[end] - eig.values[end - 1] <= degenerate_tol {
            end += 1;
        }
        let block = eig.vectors.columns(start, end - start).into_owned();
        let resolved = if end - start > 1 {
            let restricted = block.adjoint() * h.matrix() * &block;
            let sub = HermitianEigen::new(&restricted);
            &block * sub.vectors
        } else {
            block
        };
        for (k, col) in resolved.column_iter().enumerate() {
            basis.set_column(start + k, &fix_phase(col.into_owned()));
        }
        start = end;
    }
    Povm::projective(&basis)
}

fn fix_phase(v: DVector<Complex64>) -> DVector<Complex64> {
    let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let Some(lead) = v.iter().find(|z| z.norm() > 1e-8 * peak) else {
        return v;
    };
    let phase = lead.conj() / lead.norm();
    v.map(|z| z * phase)
}
