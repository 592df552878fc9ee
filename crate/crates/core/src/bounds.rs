//! Upper bound on the Fisher information under correlated dephasing,
//!
//! ```text
//! F_ρ̄ ≤ (Δ²_C + 1/F_ρ)⁻¹,      Δ²_φ₀ φ̂ ≥ Δ²_C + 1/F_ρ,
//! ```
//!
//! its collective / independent specialisations, the `(e^{2β²} − 1)/N`
//! comparison bound for independent dephasing and large-`N` scaling.

use serde::Serialize;

use crate::covariance::{build_c1, build_c2, delta2_c1_closed, delta2_c2_closed, CovarianceMatrix};
use crate::dephasing::dephase;
use crate::fisher::qfi;
use crate::linalg::{DensityMatrix, GeneratorSpec};
use crate::{Error, Result};

/// Slack allowed when checking `F_ρ̄` against the bound.
pub const BOUND_TOL: f64 = 1e-8;

/// Covariance family tag carried by reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Independent dephasing, `2β²·I`.
    Identity,
    /// Constant correlations.
    C1,
    /// Exponentially decaying correlations.
    C2,
    Custom,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::C1 => "c1",
            Family::C2 => "c2",
            Family::Custom => "custom",
        }
    }

    pub fn covariance(self, n: usize, two_beta2: f64, alpha: f64) -> Result<CovarianceMatrix> {
        match self {
            Family::Identity => CovarianceMatrix::independent(n, two_beta2),
            Family::C1 => build_c1(n, two_beta2, alpha),
            Family::C2 => build_c2(n, two_beta2, alpha),
            Family::Custom => Err(Error::invalid("custom family has no generator")),
        }
    }

    /// Closed-form `Δ²_C`; `α = 1` is collective dephasing for both families.
    pub fn delta2_closed(self, n: usize, two_beta2: f64, alpha: f64) -> Result<f64> {
        match self {
            Family::Identity => delta2_c1_closed(n, two_beta2, 0.0),
            Family::C1 => delta2_c1_closed(n, two_beta2, alpha),
            Family::C2 if alpha >= 1.0 => delta2_c1_closed(n, two_beta2, 1.0),
            Family::C2 => delta2_c2_closed(n, two_beta2, alpha),
            Family::Custom => Err(Error::invalid("custom family has no closed form")),
        }
    }

    /// Effective correlation: the identity family is `α = 0`.
    pub fn effective_alpha(self, alpha: f64) -> f64 {
        if self == Family::Identity {
            0.0
        } else {
            alpha
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "independent" => Ok(Family::Identity),
            "c1" => Ok(Family::C1),
            "c2" => Ok(Family::C2),
            "custom" => Ok(Family::Custom),
            other => Err(Error::invalid(format!("unknown covariance family {other:?}"))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `(Δ²_C + 1/F_ρ)⁻¹`. `f_rho = ∞` gives the noise-only value `1/Δ²_C`.
pub fn main_bound(delta2_c: f64, f_rho: f64) -> Result<f64> {
    if !(delta2_c >= 0.0) || delta2_c.is_infinite() {
        return Err(Error::invalid(format!("Δ²_C must be finite and >= 0, got {delta2_c}")));
    }
    if !(f_rho >= 0.0) {
        return Err(Error::invalid(format!("F_ρ must be >= 0, got {f_rho}")));
    }
    if delta2_c == 0.0 && f_rho == 0.0 {
        return Err(Error::invalid("Δ²_C and F_ρ cannot both vanish"));
    }
    if f_rho == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (delta2_c + 1.0 / f_rho))
}

/// `Δ²_C + 1/F_ρ`, the matching lower bound on the local error.
pub fn error_bound(delta2_c: f64, f_rho: f64) -> Result<f64> {
    if !(f_rho > 0.0) {
        return Err(Error::invalid(format!("F_ρ must be > 0, got {f_rho}")));
    }
    if !(delta2_c >= 0.0) || delta2_c.is_infinite() {
        return Err(Error::invalid(format!("Δ²_C must be finite and >= 0, got {delta2_c}")));
    }
    Ok(delta2_c + 1.0 / f_rho)
}

/// Maximal QFI of `n` qubits with `H = Σσ^z/2`.
pub fn heisenberg_cap(n: usize) -> f64 {
    (n as f64).powi(2)
}

/// QFI cap of a single-mode Gaussian state with mean photon number `n̄`.
pub fn gaussian_mode_cap(mean_photons: f64) -> f64 {
    8.0 * mean_photons * (mean_photons + 1.0)
}

/// Comparison bound `(e^{2β²} − 1)/N` for independent dephasing.
pub fn reference_bound_g(n: usize, two_beta2: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    if !(two_beta2 >= 0.0) {
        return Err(Error::invalid(format!("2β² must be >= 0, got {two_beta2}")));
    }
    Ok(two_beta2.exp_m1() / n as f64)
}

/// Error bound for independent dephasing with `F_ρ = N²`: `N⁻¹(2β² + 1/N)`.
pub fn independent_heisenberg_error_bound(n: usize, two_beta2: f64) -> Result<f64> {
    error_bound(delta2_c1_closed(n, two_beta2, 0.0)?, heisenberg_cap(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossoverPoint {
    pub n: usize,
    pub two_beta2: f64,
    pub independent_bound: f64,
    pub reference_g: f64,
    /// True where the independent-dephasing bound is the larger (tighter) one.
    pub independent_tighter: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub n: usize,
    /// `2β²` at which both bounds coincide.
    pub two_beta2: f64,
    /// `(2N)^{−1/2}`.
    pub approximation: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverRegion {
    pub grid: Vec<CrossoverPoint>,
    pub boundary: Vec<BoundaryPoint>,
}

/// Relative bisection tolerance for the crossover boundary.
pub const BOUNDARY_REL_TOL: f64 = 1e-12;

/// Root in `x = 2β²` of `x + 1/N = e^x − 1`.
///
/// The difference `x + 1/N − (e^x − 1)` is concave, positive at `x = 0` and
/// eventually negative, so the root is unique; below it the independent bound
/// is tighter.
pub fn crossover_boundary(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be >= 1"));
    }
    let inv_n = 1.0 / n as f64;
    let diff = |x: f64| x + inv_n - x.exp_m1();
    let mut lo = 0.0;
    let mut hi = 1.0;
    while diff(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > BOUNDARY_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Compares both bounds over an `(N, 2β²)` grid and extracts the boundary.
pub fn crossover(ns: &[usize], two_beta2s: &[f64]) -> Result<CrossoverRegion> {
    if ns.is_empty() || two_beta2s.is_empty() {
        return Err(Error::invalid("crossover grids must be nonempty"));
    }
    let mut grid = Vec::with_capacity(ns.len() * two_beta2s.len());
    for &n in ns {
        for &x in two_beta2s {
            let independent_bound = independent_heisenberg_error_bound(n, x)?;
            let reference_g = reference_bound_g(n, x)?;
            grid.push(CrossoverPoint {
                n,
                two_beta2: x,
                independent_bound,
                reference_g,
                independent_tighter: independent_bound > reference_g,
            });
        }
    }
    let boundary = ns
        .iter()
        .map(|&n| {
            let root = crossover_boundary(n)?;
            let approximation = (2.0 * n as f64).powf(-0.5);
            Ok(BoundaryPoint {
                n,
                two_beta2: root,
                approximation,
                ratio: root / approximation,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CrossoverRegion { grid, boundary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub delta2_c: f64,
    pub error_bound: f64,
    pub scaled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRecord {
    pub family: Family,
    pub alpha: f64,
    pub two_beta2: f64,
    pub points: Vec<ScalingPoint>,
    /// Whether the tracked quantity is `N·bound` (shot-noise scaling) rather than the bound.
    pub tracks_scaled: bool,
    /// Tracked quantity at the largest `N`.
    pub last_value: f64,
    /// Intercept of a least-squares fit of the tracked quantity in `1/N`.
    pub fitted_limit: f64,
    /// RMS residual of that fit.
    pub fit_residual: f64,
    /// `2β²α` for constant correlations, `2β²(1+α)/(1−α)` otherwise.
    pub predicted_limit: f64,
}

/// Error bound with `F_ρ = N²` along `ns` and its large-`N` limit.
///
/// Constant correlations with `α > 0` plateau at `2β²α`; otherwise the bound
/// decays as `N⁻¹` and `N·bound → 2β²(1+α)/(1−α)`.
pub fn asymptotics(family: Family, alpha: f64, two_beta2: f64, ns: &[usize]) -> Result<ScalingRecord> {
    if ns.is_empty() {
        return Err(Error::invalid("need at least one N"));
    }
    let alpha = family.effective_alpha(alpha);
    if family == Family::C2 && alpha >= 1.0 {
        return Err(Error::invalid("exponential family requires alpha < 1"));
    }
    let points: Vec<ScalingPoint> = ns
        .iter()
        .map(|&n| {
            let delta2_c = family.delta2_closed(n, two_beta2, alpha)?;
            let bound = error_bound(delta2_c, heisenberg_cap(n))?;
            Ok(ScalingPoint {
                n,
                delta2_c,
                error_bound: bound,
                scaled: n as f64 * bound,
            })
        })
        .collect::<Result<_>>()?;
    let tracks_scaled = !(family == Family::C1 && alpha > 0.0);
    let predicted_limit = if tracks_scaled {
        two_beta2 * (1.0 + alpha) / (1.0 - alpha)
    } else {
        two_beta2 * alpha
    };
    let tracked: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (1.0 / p.n as f64, if tracks_scaled { p.scaled } else { p.error_bound }))
        .collect();
    let (fitted_limit, fit_residual) = fit_intercept(&tracked);
    Ok(ScalingRecord {
        family,
        alpha,
        two_beta2,
        last_value: tracked.last().map(|t| t.1).unwrap_or(f64::NAN),
        points,
        tracks_scaled,
        fitted_limit,
        fit_residual,
        predicted_limit,
    })
}

/// Least-squares line through `(x, y)`; returns `(intercept, rms residual)`.
fn fit_intercept(data: &[(f64, f64)]) -> (f64, f64) {
    let k = data.len() as f64;
    let mx = data.iter().map(|d| d.0).sum::<f64>() / k;
    let my = data.iter().map(|d| d.1).sum::<f64>() / k;
    let sxx: f64 = data.iter().map(|d| (d.0 - mx).powi(2)).sum();
    let sxy: f64 = data.iter().map(|d| (d.0 - mx) * (d.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = data.iter().map(|d| (d.1 - intercept - slope * d.0).powi(2)).sum();
    (intercept, (rss / k).sqrt())
}

/// One `(state, C)` evaluation of the bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub family: Family,
    pub n: usize,
    pub alpha: Option<f64>,
    pub two_beta2: Option<f64>,
    pub delta2_c: f64,
    pub f_rho: f64,
    pub f_rho_bar: Option<f64>,
    pub main_bound: f64,
    pub error_bound: f64,
    pub reference_g: Option<f64>,
}

impl BoundReport {
    /// Report from known `Δ²_C` and `F_ρ` without a dephased-state evaluation.
    pub fn from_values(family: Family, n: usize, alpha: f64, two_beta2: f64, delta2_c: f64, f_rho: f64) -> Result<Self> {
        let alpha = family.effective_alpha(alpha);
        let reference_g = if alpha == 0.0 {
            Some(reference_bound_g(n, two_beta2)?)
        } else {
            None
        };
        Ok(BoundReport {
            family,
            n,
            alpha: Some(alpha),
            two_beta2: Some(two_beta2),
            delta2_c,
            f_rho,
            f_rho_bar: None,
            main_bound: main_bound(delta2_c, f_rho)?,
            error_bound: error_bound(delta2_c, f_rho)?,
            reference_g,
        })
    }

    /// Attaches family metadata; the comparison bound is filled for independent dephasing.
    pub fn with_family(mut self, family: Family, alpha: f64, two_beta2: f64) -> Result<Self> {
        let alpha = family.effective_alpha(alpha);
        self.family = family;
        self.alpha = Some(alpha);
        self.two_beta2 = Some(two_beta2);
        self.reference_g = if alpha == 0.0 {
            Some(reference_bound_g(self.n, two_beta2)?)
        } else {
            None
        };
        Ok(self)
    }

    pub fn violates(&self) -> bool {
        self.f_rho_bar
            .is_some_and(|f| f > self.main_bound + BOUND_TOL * (1.0 + self.main_bound))
    }
}

/// Computes `F_ρ`, `F_ρ̄`, `Δ²_C` and checks `F_ρ̄ ≤ (Δ²_C + 1/F_ρ)⁻¹`.
pub fn verify_bound(rho: &DensityMatrix, gen: &GeneratorSpec, cov: &CovarianceMatrix) -> Result<BoundReport> {
    let f_rho = qfi(rho, gen)?;
    let rho_bar = dephase(rho, gen, cov)?;
    let f_rho_bar = qfi(&rho_bar, gen)?;
    let delta2_c = cov.delta2_c()?;
    let (main, err) = if f_rho > 0.0 {
        (main_bound(delta2_c, f_rho)?, error_bound(delta2_c, f_rho)?)
    } else {
        (0.0, f64::INFINITY)
    };
    let report = BoundReport {
        family: Family::Custom,
        n: gen.num_sites(),
        alpha: None,
        two_beta2: None,
        delta2_c,
        f_rho,
        f_rho_bar: Some(f_rho_bar),
        main_bound: main,
        error_bound: err,
        reference_g: None,
    };
    if report.violates() {
        return Err(Error::BoundViolation(Box::new(report)));
    }
    Ok(report)
}
