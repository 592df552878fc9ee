use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dephimetry::bayes::{simulate, ExperimentConfig};
use dephimetry::bounds::{crossover, heisenberg_cap};
use dephimetry::dephasing::{dephase, dephase_monte_carlo_detailed};
use dephimetry::fisher::{classical_fi, optimal_povm, qfi};
use dephimetry::report::{format_float, to_csv};
use dephimetry::{BoundReport, CovarianceMatrix, DensityMatrix, Error, Family, GeneratorSpec, Povm};
use rayon::prelude::*;
use serde_json::json;

use crate::config;
use crate::setup::{check_noise, evaluate, explicit_state, parse_family, Point, StateKind};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Violation(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Violation(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Violation(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BoundViolation(_) => Failure::Violation(e.to_string()),
            Error::InternalConsistency(_)
            | Error::NumericalConsistency(_)
            | Error::DegenerateMeasurement
            | Error::UninformativeMeasurement => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct Output {
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
}

impl Output {
    fn format_or(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    fn write(&self, text: &str) -> Result<(), Failure> {
        match &self.out {
            Some(path) => write_file(path, text),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }

    /// Uses `--seed` or draws one and reports it on stderr.
    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        })
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    #[arg(long, value_enum, default_value = "ghz")]
    pub state: StateKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_family, default_value = "identity")]
    pub family: Family,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long = "two-beta2", default_value_t = 0.5)]
    pub two_beta2: f64,
}

impl NoiseArgs {
    fn point(&self) -> Point {
        Point {
            family: self.family,
            state: self.state,
            n: self.n,
            alpha: self.alpha,
            two_beta2: self.two_beta2,
        }
    }

    fn explicit(&self) -> Result<(DensityMatrix, GeneratorSpec, CovarianceMatrix), Failure> {
        check_noise(self.alpha, self.two_beta2)?;
        let (rho, gen) = explicit_state(self.state, self.n)?;
        let cov = self.family.covariance(self.n, self.two_beta2, self.alpha)?;
        Ok((rho, gen, cov))
    }
}

fn reports_json(reports: &[BoundReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialise");
    s.push('\n');
    s
}

fn reports_text(reports: &[BoundReport], format: Format) -> String {
    match format {
        Format::Csv => to_csv(reports),
        Format::Json => reports_json(reports),
    }
}

pub fn bound(args: &NoiseArgs, out: &Output) -> Result<(), Failure> {
    let (report, violated) = evaluate(&args.point())?;
    let text = match out.format_or(Format::Csv) {
        Format::Csv => to_csv(std::slice::from_ref(&report)),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serialises");
            s.push('\n');
            s
        }
    };
    out.write(&text)?;
    if violated {
        return Err(Failure::Violation(format!(
            "bound violated: F_rho_bar = {} > {}",
            report.f_rho_bar.unwrap_or(f64::NAN),
            report.main_bound
        )));
    }
    Ok(())
}

pub fn qfi_cmd(args: &NoiseArgs, out: &Output) -> Result<(), Failure> {
    let (rho, gen, cov) = args.explicit()?;
    let f_rho = qfi(&rho, &gen)?;
    let rho_bar = dephase(&rho, &gen, &cov)?;
    let f_rho_bar = qfi(&rho_bar, &gen)?;
    let optimal = classical_fi(&rho_bar, &gen, &optimal_povm(&rho_bar, &gen)?)?;
    let cap = heisenberg_cap(args.n);
    let text = match out.format_or(Format::Json) {
        Format::Json => {
            let v = json!({
                "state": args.state.as_str(),
                "n": args.n,
                "family": args.family.as_str(),
                "alpha": args.family.effective_alpha(args.alpha),
                "two_beta2": args.two_beta2,
                "f_rho": f_rho,
                "f_rho_bar": f_rho_bar,
                "optimal_classical_fi": optimal,
                "heisenberg_cap": cap,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Format::Csv => format!(
            "state,n,family,alpha,two_beta2,f_rho,f_rho_bar,optimal_classical_fi,heisenberg_cap\n{},{},{},{},{},{},{},{},{}\n",
            args.state,
            args.n,
            args.family,
            format_float(args.family.effective_alpha(args.alpha)),
            format_float(args.two_beta2),
            format_float(f_rho),
            format_float(f_rho_bar),
            format_float(optimal),
            format_float(cap)
        ),
    };
    out.write(&text)
}

#[derive(Debug, Clone, Args)]
pub struct DephaseArgs {
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Estimate the channel by sampling phases instead of applying it exactly.
    #[arg(long)]
    pub shots: Option<usize>,
}

pub fn dephase_cmd(args: &DephaseArgs, out: &Output) -> Result<(), Failure> {
    let (rho, gen, cov) = args.noise.explicit()?;
    let (state, std_err, seed) = match args.shots {
        None => (dephase(&rho, &gen, &cov)?, None, None),
        Some(shots) => {
            let seed = out.seed();
            let mc = dephase_monte_carlo_detailed(&rho, &gen, &cov, shots, seed)?;
            let se = mc.std_err_re.zip_map(&mc.std_err_im, f64::max);
            (mc.state, Some(se), Some(seed))
        }
    };
    let m = state.matrix();
    let dim = state.dim();
    let text = match out.format_or(Format::Json) {
        Format::Json => {
            let rows = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
                (0..dim).map(|i| (0..dim).map(|j| f(i, j)).collect()).collect()
            };
            let mut v = json!({
                "state": args.noise.state.as_str(),
                "n": args.noise.n,
                "dim": dim,
                "re": rows(&|i, j| m[(i, j)].re),
                "im": rows(&|i, j| m[(i, j)].im),
            });
            if let (Some(se), Some(seed)) = (&std_err, seed) {
                v["shots"] = json!(args.shots);
                v["seed"] = json!(seed);
                v["std_err"] = json!(rows(&|i, j| se[(i, j)]));
            }
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Format::Csv => {
            let mut s = String::from(if std_err.is_some() { "row,col,re,im,std_err\n" } else { "row,col,re,im\n" });
            for i in 0..dim {
                for j in 0..dim {
                    let _ = write!(s, "{i},{j},{},{}", format_float(m[(i, j)].re), format_float(m[(i, j)].im));
                    if let Some(se) = &std_err {
                        let _ = write!(s, ",{}", format_float(se[(i, j)]));
                    }
                    s.push('\n');
                }
            }
            s
        }
    };
    out.write(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Measurement {
    /// Eigenbasis of the symmetric logarithmic derivative of the dephased state.
    Optimal,
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "ghz")]
    pub state: StateKind,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, value_parser = parse_family, default_value = "identity")]
    pub family: Family,
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[arg(long = "two-beta2", default_value_t = 0.5)]
    pub two_beta2: f64,
    #[arg(long, default_value_t = 100_000)]
    pub shots: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi0: f64,
    #[arg(long = "delta-phi", default_value_t = 0.0, allow_hyphen_values = true)]
    pub delta_phi: f64,
    #[arg(long, value_enum, default_value = "optimal")]
    pub measurement: Measurement,
    /// Per-shot CSV log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

/// Relative floor on the standard error: summation rounding when every shot
/// contributes the same squared error.
const ROUNDING_FLOOR: f64 = 1e-10;

fn z_score(value: f64, target: f64, std_err: Option<f64>) -> Option<f64> {
    std_err.map(|se| {
        let se = se.hypot(ROUNDING_FLOOR * target.abs());
        if se > 0.0 {
            (value - target) / se
        } else {
            0.0
        }
    })
}

pub fn simulate_cmd(args: &SimulateArgs, out: &Output) -> Result<(), Failure> {
    if args.shots == 0 {
        return Err(Failure::Usage("shots must be >= 1".into()));
    }
    let noise = NoiseArgs {
        state: args.state,
        n: args.n,
        family: args.family,
        alpha: args.alpha,
        two_beta2: args.two_beta2,
    };
    let (rho, gen, cov) = noise.explicit()?;
    let povm = match args.measurement {
        Measurement::Optimal => {
            let rho_bar = dephimetry::linalg::encode_phase(&dephase(&rho, &gen, &cov)?, &gen, args.phi0)?;
            optimal_povm(&rho_bar, &gen)?
        }
        axis => {
            let c = match axis {
                Measurement::X => 'x',
                Measurement::Y => 'y',
                _ => 'z',
            };
            let single = Povm::qubit_axis(c)?;
            Povm::tensor(&vec![single; args.n])?
        }
    };
    let cfg = ExperimentConfig::new(rho, gen, cov, povm, args.phi0, args.delta_phi)?;
    let seed = out.seed();
    let rec = simulate(&cfg, args.shots, seed)?;

    if let Some(path) = &args.log {
        let mut s = String::from("shot,outcome,estimate,bayes_estimate,weighted_phase");
        for j in 0..args.n {
            let _ = write!(s, ",phase_{j}");
        }
        s.push('\n');
        for r in &rec.log {
            let _ = write!(
                s,
                "{},{},{},{},{}",
                r.shot,
                r.outcome,
                format_float(r.estimate),
                format_float(r.bayes_estimate),
                format_float(r.weighted_phase)
            );
            for p in &r.phases {
                let _ = write!(s, ",{}", format_float(*p));
            }
            s.push('\n');
        }
        write_file(path, &s)?;
    }

    let z_mse = z_score(rec.empirical_mse_best, rec.predicted_mse, rec.mse_std_err);
    let z_mean = z_score(rec.empirical_mean, rec.true_phase, rec.mean_std_err);
    let variance_undefined = rec.mse_std_err.is_none();
    let text = match out.format_or(Format::Json) {
        Format::Json => {
            let v = json!({
                "seed": seed,
                "shots": rec.shots,
                "state": args.state.as_str(),
                "n": args.n,
                "family": args.family.as_str(),
                "alpha": args.family.effective_alpha(args.alpha),
                "two_beta2": args.two_beta2,
                "phi0": args.phi0,
                "true_phase": rec.true_phase,
                "empirical_mean": rec.empirical_mean,
                "mean_std_err": rec.mean_std_err,
                "z_mean": z_mean,
                "empirical_mse": rec.empirical_mse_best,
                "mse_std_err": rec.mse_std_err,
                "predicted_mse": rec.predicted_mse,
                "z_score": z_mse,
                "empirical_bayes_mse": rec.empirical_bayes_mse,
                "bayes_mse_std_err": rec.bayes_mse_std_err,
                "variance_undefined": variance_undefined,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).expect("json"))
        }
        Format::Csv => {
            let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
            format!(
                "seed,shots,true_phase,empirical_mean,mean_std_err,empirical_mse,mse_std_err,predicted_mse,z_score,variance_undefined\n{seed},{},{},{},{},{},{},{},{},{variance_undefined}\n",
                rec.shots,
                format_float(rec.true_phase),
                format_float(rec.empirical_mean),
                opt(rec.mean_std_err),
                format_float(rec.empirical_mse_best),
                opt(rec.mse_std_err),
                format_float(rec.predicted_mse),
                opt(z_mse),
            )
        }
    };
    out.write(&text)
}

pub fn sweep(path: &Path, out: &Output) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let cfg = config::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let points = cfg.points();
    let results: Vec<Result<(BoundReport, bool), Error>> = points.par_iter().map(evaluate).collect();
    let mut reports = Vec::with_capacity(results.len());
    let mut violations = 0;
    for r in results {
        let (report, bad) = r?;
        violations += bad as usize;
        reports.push(report);
    }
    out.write(&reports_text(&reports, out.format_or(Format::Csv)))?;
    if violations > 0 {
        return Err(Failure::Violation(format!("{violations} grid points violate the bound")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    #[value(alias = "scaling-panel")]
    Scaling,
    #[value(alias = "comparison-panel")]
    Comparison,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub panel: Panel,
    #[arg(long = "two-beta2", default_value_t = 0.5)]
    pub two_beta2: f64,
    #[arg(long = "n-max", default_value_t = 10_000)]
    pub n_max: usize,
    #[arg(long = "points-per-decade", default_value_t = 10)]
    pub points_per_decade: usize,
}

/// Integers `round(10^(k/ppd))` from 1 to `max`, deduplicated.
pub fn log_grid(max: usize, per_decade: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0;
    loop {
        let v = 10f64.powf(k as f64 / per_decade as f64).round() as usize;
        if v > max {
            break;
        }
        if out.last() != Some(&v) {
            out.push(v);
        }
        k += 1;
    }
    if out.last() != Some(&max) {
        out.push(max);
    }
    out
}

/// Curves of the scaling panel: independent, collective, constant and
/// exponentially decaying correlations.
pub const SCALING_CURVES: [(Family, f64); 4] = [
    (Family::Identity, 0.0),
    (Family::C1, 1.0),
    (Family::C1, 0.2),
    (Family::C2, 0.9),
];

pub fn scaling_points(two_beta2: f64, ns: &[usize]) -> Vec<Point> {
    SCALING_CURVES
        .iter()
        .flat_map(|&(family, alpha)| {
            ns.iter().map(move |&n| Point {
                family,
                state: StateKind::HeisenbergCap,
                n,
                alpha,
                two_beta2,
            })
        })
        .collect()
}

pub fn figure(args: &FigureArgs, out: &Output) -> Result<(), Failure> {
    if args.n_max == 0 || args.points_per_decade == 0 {
        return Err(Failure::Usage("n-max and points-per-decade must be >= 1".into()));
    }
    match args.panel {
        Panel::Scaling => {
            let ns = log_grid(args.n_max, args.points_per_decade);
            let reports = scaling_points(args.two_beta2, &ns)
                .par_iter()
                .map(|p| evaluate(p).map(|r| r.0))
                .collect::<Result<Vec<_>, Error>>()?;
            out.write(&reports_text(&reports, out.format_or(Format::Csv)))
        }
        Panel::Comparison => {
            let ns = log_grid(args.n_max, args.points_per_decade);
            let mut xs: Vec<f64> = (0..=3 * args.points_per_decade)
                .map(|k| 10f64.powf(-3.0 + k as f64 / args.points_per_decade as f64))
                .collect();
            if !xs.contains(&args.two_beta2) {
                xs.push(args.two_beta2);
                xs.sort_by(f64::total_cmp);
            }
            let region = crossover(&ns, &xs)?;
            match out.format_or(Format::Csv) {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&region).expect("json");
                    s.push('\n');
                    out.write(&s)
                }
                Format::Csv => {
                    let mut grid = String::from("n,two_beta2,independent_bound,reference_g,independent_tighter\n");
                    for p in &region.grid {
                        let _ = writeln!(
                            grid,
                            "{},{},{},{},{}",
                            p.n,
                            format_float(p.two_beta2),
                            format_float(p.independent_bound),
                            format_float(p.reference_g),
                            p.independent_tighter
                        );
                    }
                    let mut boundary = String::from("n,two_beta2,approximation,ratio\n");
                    for b in &region.boundary {
                        let _ = writeln!(
                            boundary,
                            "{},{},{},{}",
                            b.n,
                            format_float(b.two_beta2),
                            format_float(b.approximation),
                            format_float(b.ratio)
                        );
                    }
                    match &out.out {
                        Some(dir) => {
                            fs::create_dir_all(dir)?;
                            write_file(&dir.join("grid.csv"), &grid)?;
                            write_file(&dir.join("boundary.csv"), &boundary)
                        }
                        None => out.write(&format!("{grid}\n{boundary}")),
                    }
                }
            }
        }
    }
}
