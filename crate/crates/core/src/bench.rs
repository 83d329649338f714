//! Test-tensor generators and the multi-start experiment harness.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::greedy::GreedyReport;
use crate::nepv::{build_j, BuildConfig, JBuilder};
use crate::solvers::{solve, uniform_factors, Algorithm, SolveOptions};
use crate::tensor::DenseTensor;

/// i.i.d. standard normal entries.
pub fn gen_gaussian(dims: &[usize], seed: u64) -> Result<DenseTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(dims.to_vec(), |_| StandardNormal.sample(&mut rng))
}

/// `Σⱼ (−1)^{j+1} j·exp(−iⱼ)`, indices from 1.
pub fn gen_exp(dims: &[usize]) -> Result<DenseTensor> {
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| alternating(k + 1) * (k + 1) as f64 * (-((i + 1) as f64)).exp())
            .sum()
    })
}

/// `Σⱼ arcsin((−1)^{iⱼ} j/iⱼ)` when `iⱼ ≥ j` for every `j`, otherwise 0.
pub fn gen_arcsin(dims: &[usize]) -> Result<DenseTensor> {
    gen_arcsin_with(dims, ArcsinGrouping::SignTimesRatio)
}

/// How the sign and ratio combine in the arcsin argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArcsinGrouping {
    /// `(−1)^{iⱼ} · (j/iⱼ)`.
    SignTimesRatio,
    /// The whole product in the exponent: `(−1)^{iⱼ·j/iⱼ} = (−1)^j`.
    SignOfProduct,
}

pub fn gen_arcsin_with(dims: &[usize], grouping: ArcsinGrouping) -> Result<DenseTensor> {
    let mut bad = None;
    let t = DenseTensor::from_fn(dims.to_vec(), |idx| {
        if idx.iter().enumerate().any(|(k, &i)| i < k) {
            return 0.0;
        }
        idx.iter()
            .enumerate()
            .map(|(k, &i)| {
                let (j, i) = ((k + 1) as f64, (i + 1) as f64);
                let arg = match grouping {
                    ArcsinGrouping::SignTimesRatio => alternating(idx[k] + 2) * j / i,
                    ArcsinGrouping::SignOfProduct => alternating(k + 2),
                };
                if arg.abs() > 1.0 {
                    bad = Some(arg);
                }
                arg.asin()
            })
            .sum()
    })?;
    match bad {
        Some(arg) => Err(Error::Domain(arg)),
        None => Ok(t),
    }
}

/// `tan(Σⱼ (−1)^{j+1} iⱼ/j)`, indices from 1.
pub fn gen_tan(dims: &[usize]) -> Result<DenseTensor> {
    DenseTensor::from_fn(dims.to_vec(), |idx| {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| alternating(k + 1) * (i + 1) as f64 / (k + 1) as f64)
            .sum::<f64>()
            .tan()
    })
}

/// `(−1)^{p+1}`: `+1` for odd `p`.
fn alternating(p: usize) -> f64 {
    if p % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Generator {
    Gaussian,
    Exp,
    Arcsin,
    Tan,
    File(std::path::PathBuf),
}

impl Generator {
    pub fn name(&self) -> &str {
        match self {
            Generator::Gaussian => "gaussian",
            Generator::Exp => "exp",
            Generator::Arcsin => "arcsin",
            Generator::Tan => "tan",
            Generator::File(_) => "file",
        }
    }

    /// Shapes used for the reference ratios: 30³, 20⁴ and 10⁵.
    pub fn default_dims(&self) -> Option<Vec<usize>> {
        match self {
            Generator::Exp => Some(vec![30; 3]),
            Generator::Arcsin => Some(vec![20; 4]),
            Generator::Tan => Some(vec![10; 5]),
            Generator::Gaussian => Some(vec![10; 3]),
            Generator::File(_) => None,
        }
    }

    /// Materializes the tensor; `seed` only affects the Gaussian generator.
    pub fn generate(&self, dims: &[usize], seed: u64) -> Result<DenseTensor> {
        match self {
            Generator::Gaussian => gen_gaussian(dims, seed),
            Generator::Exp => gen_exp(dims),
            Generator::Arcsin => gen_arcsin(dims),
            Generator::Tan => gen_tan(dims),
            Generator::File(path) => {
                let t = crate::tensor::read_dt1(path)?;
                if !dims.is_empty() && t.dims() != dims {
                    return Err(Error::ShapeMismatch(format!(
                        "{} has dims {:?}, expected {:?}",
                        path.display(),
                        t.dims(),
                        dims
                    )));
                }
                Ok(t)
            }
        }
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Generator::Gaussian),
            "exp" => Ok(Generator::Exp),
            "arcsin" => Ok(Generator::Arcsin),
            "tan" => Ok(Generator::Tan),
            other => match other.strip_prefix("file:") {
                Some(path) => Ok(Generator::File(path.into())),
                None => Err(Error::InvalidOption(format!("unknown generator '{s}'"))),
            },
        }
    }
}

/// A multi-start run of several algorithms on one tensor.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub generator: Generator,
    /// Empty means the generator default (or the file's own shape).
    pub dims: Vec<usize>,
    /// Number of starts; start `k` uses seed `opts.seed + k`.
    pub seeds: usize,
    pub algorithms: Vec<Algorithm>,
    pub opts: SolveOptions,
    /// Concurrent solves; timings are only meaningful at 1.
    pub jobs: usize,
}

impl ExperimentSpec {
    pub fn new(generator: Generator) -> Self {
        Self {
            generator,
            dims: Vec::new(),
            seeds: 50,
            algorithms: vec![Algorithm::Hoscf, Algorithm::Ihoscf],
            opts: SolveOptions::default(),
            jobs: 1,
        }
    }

    pub fn resolved_dims(&self) -> Vec<usize> {
        if self.dims.is_empty() {
            self.generator.default_dims().unwrap_or_default()
        } else {
            self.dims.clone()
        }
    }

    /// The tensor under test; Gaussian entries use `opts.seed`.
    pub fn tensor(&self) -> Result<DenseTensor> {
        self.generator
            .generate(&self.resolved_dims(), self.opts.seed)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub generator: String,
    pub dims: Vec<usize>,
    pub algo: Algorithm,
    pub seed: u64,
    pub lambda: f64,
    pub rho: f64,
    pub iters: usize,
    pub converged: bool,
    /// Absent when determinism is requested, so output is reproducible.
    pub wall_s: Option<f64>,
    pub phase_j_s: Option<f64>,
    pub phase_eig_s: Option<f64>,
}

pub const EXPERIMENT_HEADER: [&str; 11] = [
    "generator",
    "dims",
    "algo",
    "seed",
    "lambda",
    "rho",
    "iters",
    "converged",
    "wall_s",
    "phase_j_s",
    "phase_eig_s",
];

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>> {
    let a = spec.tensor()?;
    run_experiment_on(&a, spec)
}

/// Rows ordered by algorithm (as listed in the spec) then seed.
pub fn run_experiment_on(a: &DenseTensor, spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>> {
    if spec.seeds == 0 || spec.algorithms.is_empty() {
        return Err(Error::InvalidOption(
            "need at least one seed and one algorithm".into(),
        ));
    }
    let cells: Vec<(usize, Algorithm, u64)> = spec
        .algorithms
        .iter()
        .enumerate()
        .flat_map(|(k, &algo)| {
            (0..spec.seeds as u64).map(move |s| (k, algo, spec.opts.seed.wrapping_add(s)))
        })
        .collect();
    let norm = a.frobenius_norm();
    let run = |&(_, algo, seed): &(usize, Algorithm, u64)| -> Result<ExperimentRow> {
        let opts = SolveOptions {
            seed,
            ..spec.opts.clone()
        };
        let start = Instant::now();
        let report = solve(a, algo, &opts)?;
        let wall = start.elapsed();
        let timed = !spec.opts.determinism;
        let phases = report.phase_totals();
        Ok(ExperimentRow {
            generator: spec.generator.name().to_string(),
            dims: a.dims().to_vec(),
            algo,
            seed,
            lambda: report.result.lambda,
            rho: report.result.lambda.abs() / norm,
            iters: report.iterations,
            converged: report.converged,
            wall_s: timed.then(|| wall.as_secs_f64()),
            phase_j_s: timed.then(|| phases.j.as_secs_f64()),
            phase_eig_s: timed.then(|| phases.eig.as_secs_f64()),
        })
    };
    let rows: Vec<ExperimentRow> = if spec.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.jobs)
            .build()
            .map_err(|e| Error::InvalidOption(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect::<Result<_>>())?
    } else {
        cells.iter().map(run).collect::<Result<_>>()?
    };
    Ok(rows)
}

pub fn format_dims(dims: &[usize]) -> String {
    dims.iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

/// Seconds rounded to three significant digits.
pub fn format_seconds(s: f64) -> String {
    if s == 0.0 || !s.is_finite() {
        return format!("{s}");
    }
    let decimals = (2 - s.abs().log10().floor() as i32).max(0) as usize;
    format!("{s:.decimals$}")
}

fn opt_seconds(s: Option<f64>) -> String {
    s.map(format_seconds).unwrap_or_default()
}

pub fn write_experiment_csv<W: Write>(out: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EXPERIMENT_HEADER)?;
    for r in rows {
        w.write_record([
            r.generator.clone(),
            format_dims(&r.dims),
            r.algo.name().to_string(),
            r.seed.to_string(),
            r.lambda.to_string(),
            r.rho.to_string(),
            r.iters.to_string(),
            r.converged.to_string(),
            opt_seconds(r.wall_s),
            opt_seconds(r.phase_j_s),
            opt_seconds(r.phase_eig_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sample mean and `n−1` standard deviation; the deviation of one value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub algo: Algorithm,
    pub runs: usize,
    pub converged: usize,
    pub lambda: (f64, f64),
    pub rho: (f64, f64),
    pub iters: (f64, f64),
    pub wall_s: Option<(f64, f64)>,
}

/// One row per algorithm, in first-appearance order.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut algos: Vec<Algorithm> = Vec::new();
    for r in rows {
        if !algos.contains(&r.algo) {
            algos.push(r.algo);
        }
    }
    algos
        .into_iter()
        .map(|algo| {
            let group: Vec<&ExperimentRow> = rows.iter().filter(|r| r.algo == algo).collect();
            let col = |f: &dyn Fn(&ExperimentRow) -> f64| {
                mean_std(&group.iter().map(|r| f(r)).collect::<Vec<_>>())
            };
            let walls: Option<Vec<f64>> = group.iter().map(|r| r.wall_s).collect();
            SummaryRow {
                algo,
                runs: group.len(),
                converged: group.iter().filter(|r| r.converged).count(),
                lambda: col(&|r| r.lambda),
                rho: col(&|r| r.rho),
                iters: col(&|r| r.iters as f64),
                wall_s: walls.map(|w| mean_std(&w)),
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "algo",
    "runs",
    "converged",
    "lambda_mean",
    "lambda_std",
    "rho_mean",
    "rho_std",
    "iters_mean",
    "iters_std",
    "wall_mean_s",
    "wall_std_s",
];

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.algo.name().to_string(),
            r.runs.to_string(),
            r.converged.to_string(),
            r.lambda.0.to_string(),
            r.lambda.1.to_string(),
            r.rho.0.to_string(),
            r.rho.1.to_string(),
            format!("{:.2}", r.iters.0),
            format!("{:.2}", r.iters.1),
            opt_seconds(r.wall_s.map(|w| w.0)),
            opt_seconds(r.wall_s.map(|w| w.1)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// HOSCF timed at several thread counts on one tensor.
#[derive(Clone, Debug)]
pub struct ScalingSpec {
    pub generator: Generator,
    pub dims: Vec<usize>,
    pub threads: Vec<usize>,
    /// `max_iters` bounds the timed iterations; `threads` is overridden.
    pub opts: SolveOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub threads: usize,
    pub iterations: usize,
    pub wall_s: f64,
    pub phase_j_s: f64,
    pub phase_eig_s: f64,
    pub phase_other_s: f64,
    /// Share of iteration time spent building `J`.
    pub j_fraction: f64,
    pub lambda: f64,
    /// `|λ − λ_serial|`.
    pub lambda_diff: f64,
    /// Largest entry difference of `J` at the starting point versus one thread.
    pub j_max_diff: f64,
}

pub const SCALING_HEADER: [&str; 10] = [
    "threads",
    "iterations",
    "wall_s",
    "phase_j_s",
    "phase_eig_s",
    "phase_other_s",
    "j_fraction",
    "lambda",
    "lambda_diff",
    "j_max_diff",
];

pub fn run_scaling(spec: &ScalingSpec) -> Result<Vec<ScalingRow>> {
    let dims = if spec.dims.is_empty() {
        spec.generator.default_dims().unwrap_or_default()
    } else {
        spec.dims.clone()
    };
    let a = spec.generator.generate(&dims, spec.opts.seed)?;
    run_scaling_on(&a, &spec.threads, &spec.opts)
}

pub fn run_scaling_on(
    a: &DenseTensor,
    threads: &[usize],
    opts: &SolveOptions,
) -> Result<Vec<ScalingRow>> {
    if threads.is_empty() {
        return Err(Error::InvalidOption(
            "need at least one thread count".into(),
        ));
    }
    let f0 = uniform_factors(a.dims(), opts.seed, 0);
    let serial_j = build_j(a, &f0, 1)?;
    let serial = solve(
        a,
        Algorithm::Hoscf,
        &SolveOptions {
            threads: 1,
            ..opts.clone()
        },
    )?;
    threads
        .iter()
        .map(|&t| {
            let o = SolveOptions {
                threads: t,
                ..opts.clone()
            };
            let j = JBuilder::new(BuildConfig {
                threads: t,
                deterministic: opts.determinism,
                reuse_intermediates: false,
            })?
            .build(a, &f0)?;
            let start = Instant::now();
            let report = solve(a, Algorithm::Hoscf, &o)?;
            let wall = start.elapsed().as_secs_f64();
            let p = report.phase_totals();
            let total = p.total().as_secs_f64();
            Ok(ScalingRow {
                threads: t,
                iterations: report.iterations,
                wall_s: wall,
                phase_j_s: p.j.as_secs_f64(),
                phase_eig_s: p.eig.as_secs_f64(),
                phase_other_s: (p.rqi + p.other).as_secs_f64(),
                j_fraction: if total > 0.0 {
                    p.j.as_secs_f64() / total
                } else {
                    0.0
                },
                lambda: report.result.lambda,
                lambda_diff: (report.result.lambda - serial.result.lambda).abs(),
                j_max_diff: j.max_abs_diff(&serial_j),
            })
        })
        .collect()
}

pub fn write_scaling_csv<W: Write>(out: W, rows: &[ScalingRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCALING_HEADER)?;
    for r in rows {
        w.write_record([
            r.threads.to_string(),
            r.iterations.to_string(),
            format_seconds(r.wall_s),
            format_seconds(r.phase_j_s),
            format_seconds(r.phase_eig_s),
            format_seconds(r.phase_other_s),
            format!("{:.4}", r.j_fraction),
            r.lambda.to_string(),
            format!("{:e}", r.lambda_diff),
            format!("{:e}", r.j_max_diff),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const GREEDY_HEADER: [&str; 5] = ["term", "lambda", "residual_ratio", "iters", "converged"];

/// One row per term; `residual_ratio` is the ratio after that term.
pub fn write_greedy_csv<W: Write>(out: W, report: &GreedyReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GREEDY_HEADER)?;
    for (r, (term, ratio)) in report.terms.iter().zip(&report.residual_ratios).enumerate() {
        let solved = &report.reports[r];
        w.write_record([
            (r + 1).to_string(),
            term.lambda.to_string(),
            ratio.to_string(),
            solved.iterations.to_string(),
            solved.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests;
