//! Shared construction of states, covariances and bound evaluations.

use std::fmt;
use std::str::FromStr;

use dephimetry::bounds::{heisenberg_cap, verify_bound};
use dephimetry::linalg::{ghz_state, product_plus_state};
use dephimetry::{BoundReport, DensityMatrix, Error, Family, GeneratorSpec};

/// Largest qubit count for which explicit density matrices are built.
pub const MAX_EXPLICIT_SITES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StateKind {
    Ghz,
    ProductPlus,
    /// No explicit state: `F_ρ = N²` and no dephased-state evaluation.
    HeisenbergCap,
}

impl StateKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StateKind::Ghz => "ghz",
            StateKind::ProductPlus => "product-plus",
            StateKind::HeisenbergCap => "heisenberg-cap",
        }
    }
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ghz" => Ok(StateKind::Ghz),
            "product-plus" => Ok(StateKind::ProductPlus),
            "heisenberg-cap" => Ok(StateKind::HeisenbergCap),
            other => Err(format!("unknown state {other:?} (expected ghz, product-plus or heisenberg-cap)")),
        }
    }
}

/// Accepts the families that have a generator: identity, c1, c2.
pub fn parse_family(s: &str) -> Result<Family, String> {
    match s.parse::<Family>() {
        Ok(Family::Custom) | Err(_) => Err(format!("unknown family {s:?} (expected identity, c1 or c2)")),
        Ok(f) => Ok(f),
    }
}

pub fn explicit_state(kind: StateKind, n: usize) -> Result<(DensityMatrix, GeneratorSpec), Error> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if n > MAX_EXPLICIT_SITES {
        return Err(Error::invalid(format!(
            "explicit states are limited to n <= {MAX_EXPLICIT_SITES}; use --state heisenberg-cap for larger n"
        )));
    }
    let rho = match kind {
        StateKind::Ghz => ghz_state(n)?,
        StateKind::ProductPlus => product_plus_state(n)?,
        StateKind::HeisenbergCap => return Err(Error::invalid("heisenberg-cap has no explicit state")),
    };
    Ok((rho, GeneratorSpec::qubits(n)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub family: Family,
    pub state: StateKind,
    pub n: usize,
    pub alpha: f64,
    pub two_beta2: f64,
}

pub fn check_noise(alpha: f64, two_beta2: f64) -> Result<(), Error> {
    if !(two_beta2 >= 0.0) || !two_beta2.is_finite() {
        return Err(Error::invalid(format!("two_beta2 must be finite and >= 0, got {two_beta2}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(())
}

/// Report for one point; the flag is set when `F_ρ̄` exceeds the bound.
pub fn evaluate(p: &Point) -> Result<(BoundReport, bool), Error> {
    check_noise(p.alpha, p.two_beta2)?;
    if p.state == StateKind::HeisenbergCap {
        if p.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        let delta2 = p.family.delta2_closed(p.n, p.two_beta2, p.alpha)?;
        let report = BoundReport::from_values(p.family, p.n, p.alpha, p.two_beta2, delta2, heisenberg_cap(p.n))?;
        return Ok((report, false));
    }
    let (rho, gen) = explicit_state(p.state, p.n)?;
    let cov = p.family.covariance(p.n, p.two_beta2, p.alpha)?;
    match verify_bound(&rho, &gen, &cov) {
        Ok(r) => Ok((r.with_family(p.family, p.alpha, p.two_beta2)?, false)),
        Err(Error::BoundViolation(r)) => Ok(((*r).with_family(p.family, p.alpha, p.two_beta2)?, true)),
        Err(e) => Err(e),
    }
}
