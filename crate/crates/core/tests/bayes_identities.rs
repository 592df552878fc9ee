mod common;

use common::*;
use dephimetry::bayes::{
    averaged_probabilities, bayes_estimators, bayes_mse, best_estimator, local_error, qbcr_gap, simulate,
    ExperimentConfig,
};
use dephimetry::covariance::CovarianceMatrix;
use dephimetry::fisher::{classical_fi, optimal_povm};
use dephimetry::linalg::{encode_phase, ghz_state, product_plus_state, CMatrix, CVector, DensityMatrix, GeneratorSpec};
use dephimetry::Povm;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

fn random_config(r: &mut ChaCha8Rng, n: usize) -> ExperimentConfig {
    let dim = 1 << n;
    let state = if r.random_bool(0.5) { random_pure(r, dim) } else { random_mixed(r, dim) };
    let scale = r.random_range(0.05..0.8);
    let cov = random_covariance(r, n, scale);
    let outcomes = dim + r.random_range(0..3);
    let povm = random_povm(r, dim, outcomes);
    let phi0 = r.random_range(-1.0..1.0);
    ExperimentConfig::new(state, GeneratorSpec::qubits(n).unwrap(), cov, povm, phi0, 0.0).unwrap()
}

fn configs(seed: u64, count: usize) -> Vec<ExperimentConfig> {
    let mut r = rng(seed);
    (0..count).map(|k| random_config(&mut r, 1 + k % 3)).collect()
}

/// Central difference of `p̄_φ(x)` in `φ` at `φ₀`.
fn probability_slopes(cfg: &ExperimentConfig) -> Vec<f64> {
    let plus = averaged_probabilities(cfg, cfg.phi0 + STEP).unwrap();
    let minus = averaged_probabilities(cfg, cfg.phi0 - STEP).unwrap();
    plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * STEP)).collect()
}

/// Gauss–Hermite nodes and weights for the standard normal density (Golub–Welsch).
fn gauss_hermite(points: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(points, points, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let weights = (0..points).map(|k| eig.eigenvectors[(0, k)].powi(2)).collect();
    (eig.eigenvalues.iter().copied().collect(), weights)
}

/// `φ̂_j(x) = ∫ φ_j p(x|φ) g(φ) dφ / ∫ p(x|φ) g(φ) dφ` by tensor quadrature.
fn quadrature_estimates(cfg: &ExperimentConfig, points: usize) -> Vec<Vec<f64>> {
    let n = cfg.generator.num_sites();
    let (nodes, weights) = gauss_hermite(points);
    let chol = cfg.covariance.matrix().clone().cholesky().unwrap().l();
    let outcomes = cfg.povm.len();
    let mut mass = vec![0.0; outcomes];
    let mut moments = vec![vec![0.0; n]; outcomes];
    let total = points.pow(n as u32);
    for flat in 0..total {
        let mut idx = flat;
        let mut z = DVector::zeros(n);
        let mut w = 1.0;
        for k in 0..n {
            z[k] = nodes[idx % points];
            w *= weights[idx % points];
            idx /= points;
        }
        let phases = DVector::from_element(n, cfg.phi0) + &chol * z;
        let rho = encode_sites(&cfg.state, &cfg.generator, &phases);
        let probs = cfg.povm.probabilities(&rho).unwrap();
        for x in 0..outcomes {
            mass[x] += w * probs[x];
            for j in 0..n {
                moments[x][j] += w * probs[x] * phases[j];
            }
        }
    }
    moments
        .into_iter()
        .zip(mass)
        .map(|(m, p)| m.into_iter().map(|v| v / p).collect())
        .collect()
}

/// `e^{−iΣφ_jH_j} ρ e^{iΣφ_jH_j}` built from explicit diagonal unitaries.
fn encode_sites(rho: &DensityMatrix, gen: &GeneratorSpec, phases: &DVector<f64>) -> DensityMatrix {
    let dim = rho.dim();
    let mut theta = vec![0.0; dim];
    for (j, &phi) in phases.iter().enumerate() {
        let e = gen.site_energies(j);
        for k in 0..dim {
            theta[k] += phi * e[k];
        }
    }
    let u = CMatrix::from_diagonal(&CVector::from_iterator(
        dim,
        theta.iter().map(|t| Complex64::new(0.0, -t).exp()),
    ));
    DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap()
}

#[test]
fn quadrature_matches_analytic_estimators() {
    let mut r = rng(101);
    for _ in 0..10 {
        let state = random_mixed(&mut r, 4);
        // Seven nodes resolve e^{iδᵀφ} to ~1e−8 only while the phase spread stays small.
        let cov = random_covariance(&mut r, 2, 0.15);
        let povm = random_povm(&mut r, 4, 5);
        let cfg = ExperimentConfig::new(state, GeneratorSpec::qubits(2).unwrap(), cov, povm, 0.3, 0.0).unwrap();
        let table = bayes_estimators(&cfg).unwrap();
        let oracle = quadrature_estimates(&cfg, 7);
        for row in &table.rows {
            for (j, (a, b)) in row.site_estimates.iter().zip(&oracle[row.outcome]).enumerate() {
                let d = (a - b).abs();
                assert!(d <= 1e-6, "outcome {} site {j}: {d:e}", row.outcome);
            }
        }
    }
}

#[test]
fn estimator_is_scaled_log_derivative() {
    for (k, cfg) in configs(1, 100).iter().enumerate() {
        let table = bayes_estimators(cfg).unwrap();
        let slopes = probability_slopes(cfg);
        let probs = averaged_probabilities(cfg, cfg.phi0).unwrap();
        for row in &table.rows {
            let fd = slopes[row.outcome] / probs[row.outcome];
            let analytic = (row.estimate - cfg.phi0) / table.delta2_c;
            assert!((fd - analytic).abs() <= 1e-6, "config {k} outcome {}: {fd} vs {analytic}", row.outcome);
        }
    }
}

#[test]
fn local_error_is_scaled_classical_fisher() {
    for (k, cfg) in configs(2, 100).iter().enumerate() {
        let d2 = cfg.covariance.delta2_c().unwrap();
        let lhs = local_error(cfg).unwrap() / (d2 * d2);
        let rho_bar = cfg.dephased_state(cfg.phi0).unwrap();
        let f = classical_fi(&rho_bar, &cfg.generator, &cfg.povm).unwrap();
        assert!((lhs - f).abs() <= 1e-8 * f.max(1.0), "config {k}: {lhs} vs {f}");
    }
}

#[test]
fn local_error_is_direct_sum() {
    for cfg in configs(3, 20) {
        let table = bayes_estimators(&cfg).unwrap();
        let direct: f64 = table.rows.iter().map(|r| r.probability * (r.estimate - cfg.phi0).powi(2)).sum();
        assert!((direct - local_error(&cfg).unwrap()).abs() <= 1e-15);
    }
}

#[test]
fn error_decomposes_into_prior_variance() {
    for (k, cfg) in configs(4, 100).iter().enumerate() {
        let d2 = cfg.covariance.delta2_c().unwrap();
        let sum = bayes_mse(cfg).unwrap() + local_error(cfg).unwrap();
        assert!((sum - d2).abs() <= 1e-10, "config {k}");
    }
}

#[test]
fn best_estimator_is_locally_unbiased() {
    for (k, cfg) in configs(5, 100).iter().enumerate() {
        let table = best_estimator(cfg).unwrap();
        let slopes = probability_slopes(cfg);
        let derivative: f64 = table.rows.iter().map(|r| slopes[r.outcome] * (r.best.unwrap() - cfg.phi0)).sum();
        assert!((derivative - 1.0).abs() <= 1e-5, "config {k}: {derivative}");
        let rho_bar = cfg.dephased_state(cfg.phi0).unwrap();
        let f = classical_fi(&rho_bar, &cfg.generator, &cfg.povm).unwrap();
        assert!((table.best_local_error().unwrap() * f - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn optimal_weights_give_smallest_unbiased_error() {
    let mut r = rng(6);
    for _ in 0..5 {
        let cfg = random_config(&mut r, 3);
        let table = best_estimator(&cfg).unwrap();
        let best = table.best_local_error().unwrap();
        let slopes = probability_slopes(&cfg);
        for _ in 0..50 {
            let mut g: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..2.0)).collect();
            let s: f64 = g.iter().sum();
            g.iter_mut().for_each(|v| *v /= s);
            let shift = |row: &dephimetry::bayes::EstimatorRow| -> f64 {
                g.iter().zip(&row.site_estimates).map(|(w, e)| w * (e - cfg.phi0)).sum()
            };
            let gain: f64 = table.rows.iter().map(|row| slopes[row.outcome] * shift(row)).sum();
            let spread: f64 = table.rows.iter().map(|row| row.probability * shift(row).powi(2)).sum();
            let unbiased = spread / (gain * gain);
            assert!(unbiased >= best * (1.0 - 1e-6), "{unbiased} < {best}");
        }
    }
}

#[test]
fn bayesian_cramer_rao_holds() {
    for (k, cfg) in configs(7, 100).iter().enumerate() {
        let g = qbcr_gap(cfg).unwrap();
        assert!(g.gap >= -1e-8, "config {k}: {g:?}");
    }
}

#[test]
fn bayesian_cramer_rao_ghz_pipeline() {
    let gen = GeneratorSpec::qubits(2).unwrap();
    let rho = ghz_state(2).unwrap();
    let cov = CovarianceMatrix::independent(2, 0.5).unwrap();
    let rho_bar = dephimetry::dephasing::dephase(&rho, &gen, &cov).unwrap();
    let povm = optimal_povm(&rho_bar, &gen).unwrap();
    let cfg = ExperimentConfig::new(rho, gen, cov, povm, 0.0, 0.0).unwrap();
    assert!(qbcr_gap(&cfg).unwrap().gap >= 0.0);
}

#[test]
fn uninformative_measurement_keeps_prior_variance() {
    let mut r = rng(8);
    let cfg = random_config(&mut r, 2);
    let cfg = ExperimentConfig { povm: Povm::identity(4), ..cfg };
    let d2 = cfg.covariance.delta2_c().unwrap();
    assert!((bayes_mse(&cfg).unwrap() - d2).abs() < 1e-15);
    let g = qbcr_gap(&cfg).unwrap();
    assert!(g.lhs >= g.rhs);
}

#[test]
fn bayesian_cramer_rao_tight_under_weak_dephasing() {
    for n in [2, 3] {
        let gen = GeneratorSpec::qubits(n).unwrap();
        let rho = ghz_state(n).unwrap();
        let cov = CovarianceMatrix::independent(n, 1e-8).unwrap();
        let rho_bar = dephimetry::dephasing::dephase(&rho, &gen, &cov).unwrap();
        let povm = optimal_povm(&rho_bar, &gen).unwrap();
        let cfg = ExperimentConfig::new(rho, gen, cov, povm, 0.0, 0.0).unwrap();
        let g = qbcr_gap(&cfg).unwrap();
        assert!((g.lhs / g.rhs - 1.0).abs() <= 1e-5, "N={n}: {g:?}");
    }
}

#[test]
fn probabilities_match_sampled_frequencies() {
    let mut r = rng(9);
    let state = random_mixed(&mut r, 2);
    let povm = random_povm(&mut r, 2, 3);
    let cov = CovarianceMatrix::independent(1, 0.7).unwrap();
    let cfg = ExperimentConfig::new(state, GeneratorSpec::qubits(1).unwrap(), cov, povm, 0.2, 0.0).unwrap();
    let shots = 1_000_000;
    let rec = simulate(&cfg, shots, 10).unwrap();
    let probs = averaged_probabilities(&cfg, cfg.phi0).unwrap();
    for (x, p) in probs.iter().enumerate() {
        let freq = rec.log.iter().filter(|s| s.outcome == x).count() as f64 / shots as f64;
        let se = (p * (1.0 - p) / shots as f64).sqrt();
        assert!((freq - p).abs() <= 3.0 * se, "outcome {x}: {freq} vs {p}");
    }
}

#[test]
fn bayes_error_matches_sampled_error() {
    let gen = GeneratorSpec::qubits(2).unwrap();
    let y = Povm::qubit_axis('y').unwrap();
    let povm = Povm::tensor(&[y.clone(), y]).unwrap();
    let cov = CovarianceMatrix::independent(2, 0.5).unwrap();
    let cfg = ExperimentConfig::new(product_plus_state(2).unwrap(), gen, cov, povm, 0.0, 0.0).unwrap();
    let rec = simulate(&cfg, 1_000_000, 11).unwrap();
    let want = bayes_mse(&cfg).unwrap();
    let se = rec.bayes_mse_std_err.unwrap();
    assert!((rec.empirical_bayes_mse - want).abs() <= 3.0 * se, "{} vs {want} (se {se})", rec.empirical_bayes_mse);
}

#[test]
fn collective_noise_reduces_to_single_mode() {
    for n in [2, 3, 4] {
        let dim = 1 << n;
        let c = 0.6;
        let gen = GeneratorSpec::qubits(n).unwrap();
        let cov = CovarianceMatrix::collective(n, c).unwrap();
        let mut plus = CVector::zeros(dim);
        plus[0] = Complex64::new(1.0, 0.0);
        plus[dim - 1] = Complex64::new(1.0, 0.0);
        let mut minus = plus.clone();
        minus[dim - 1] = Complex64::new(-1.0, 0.0);
        let p_plus = (&plus * plus.adjoint()).unscale(2.0);
        let p_minus = (&minus * minus.adjoint()).unscale(2.0);
        let rest = CMatrix::identity(dim, dim) - &p_plus - &p_minus;
        let povm = Povm::new(vec![p_plus, p_minus, rest]).unwrap();
        let full = ExperimentConfig::new(ghz_state(n).unwrap(), gen, cov, povm, 0.1, 0.0).unwrap();

        let half = n as f64 / 2.0;
        let eff_gen = GeneratorSpec::new(vec![vec![half, -half]]).unwrap();
        let eff = ExperimentConfig::new(
            product_plus_state(1).unwrap(),
            eff_gen,
            CovarianceMatrix::independent(1, c).unwrap(),
            Povm::qubit_axis('x').unwrap(),
            0.1,
            0.0,
        )
        .unwrap();

        for phi in [-0.4, 0.1, 0.9] {
            let a = averaged_probabilities(&full, phi).unwrap();
            let b = averaged_probabilities(&eff, phi).unwrap();
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
            assert!(a[2].abs() < 1e-14);
        }
        let tf = bayes_estimators(&full).unwrap();
        let te = bayes_estimators(&eff).unwrap();
        assert_eq!(tf.excluded, vec![2]);
        for x in 0..2 {
            assert!((tf.row(x).unwrap().estimate - te.row(x).unwrap().estimate).abs() < 1e-12);
        }
        assert!((local_error(&full).unwrap() - local_error(&eff).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn collective_encoding_is_a_global_rotation() {
    let mut r = rng(12);
    let rho = random_mixed(&mut r, 8);
    let gen = GeneratorSpec::qubits(3).unwrap();
    let phases = DVector::from_element(3, 0.37);
    let a = encode_sites(&rho, &gen, &phases);
    let b = encode_phase(&rho, &gen, 0.37).unwrap();
    assert!(a.distance_max(&b) < 1e-14);
}
