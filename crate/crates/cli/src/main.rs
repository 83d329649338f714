//! `rank1`: best rank-one approximation from the command line.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rank1_core::bench::{
    format_dims, run_experiment_on, run_scaling_on, summarize, write_experiment_csv,
    write_greedy_csv, write_scaling_csv, write_summary_csv, ExperimentRow, ExperimentSpec,
    Generator,
};
use rank1_core::greedy::greedy_rank_r;
use rank1_core::solvers::{solve, Algorithm, AsvdPairs, RqiAcceptRule, SolveOptions, StopRule};
use rank1_core::tensor::write_dt1;
use rank1_core::DenseTensor;

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser, Debug)]
#[command(name = "rank1", version, about = "Best rank-one tensor approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once and print λ, ρ and the iteration count.
    Solve {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "hoscf")]
        algo: Algorithm,
        /// Write the result as one experiment CSV row.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also print the factor vectors.
        #[arg(long)]
        factors: bool,
    },
    /// Multi-start comparison; one CSV row per (algorithm, seed).
    Experiment {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, value_delimiter = ',', default_value = "hoscf,ihoscf")]
        algo: Vec<Algorithm>,
        /// Number of random starts.
        #[arg(long, default_value_t = 50)]
        seeds: usize,
        /// Solves run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Mean ± sample std per algorithm; printed to stderr when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Time HOSCF phases over several thread counts.
    Scaling {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        threads: Vec<usize>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 5)]
        max_iters: usize,
        #[arg(long)]
        determinism: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Greedy rank-R approximation by deflation.
    Greedy {
        #[command(flatten)]
        tensor: TensorArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "hoscf")]
        algo: Algorithm,
        #[arg(long, default_value_t = 5)]
        rank: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Write a generated tensor to a `.dt1` file.
    Gen {
        #[command(flatten)]
        tensor: TensorArgs,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TensorArgs {
    /// gaussian, exp, arcsin or tan.
    #[arg(long = "gen", default_value = "exp", conflicts_with = "input")]
    generator: Generator,
    /// Read the tensor from a `.dt1` file instead of generating it.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Mode sizes such as `30,30,30` or `30x30x30`; defaults per generator.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<Dims>,
    /// Seeds the Gaussian generator and the first random start.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TensorArgs {
    fn generator(&self) -> Generator {
        match &self.input {
            Some(path) => Generator::File(path.clone()),
            None => self.generator.clone(),
        }
    }

    fn load(&self) -> CliResult<(Generator, DenseTensor)> {
        let generator = self.generator();
        let dims = match &self.dims {
            Some(d) => d.0.clone(),
            None => generator.default_dims().unwrap_or_default(),
        };
        let a = generator.generate(&dims, self.seed)?;
        Ok((generator, a))
    }
}

#[derive(Args, Debug)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Worker threads for building `J`.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// kkt, lambda or eq11; defaults to eq11 for the SCF solvers, kkt otherwise.
    #[arg(long)]
    stop_rule: Option<StopRule>,
    /// Fixed summation order; also drops timings from CSV output.
    #[arg(long)]
    determinism: bool,
    /// ASVD pair schedule: adjacent or disjoint.
    #[arg(long, default_value = "adjacent")]
    pairs: AsvdPairs,
    /// Accept an iHOSCF Rayleigh step on a signed rather than magnitude increase.
    #[arg(long)]
    signed_rqi: bool,
}

impl SolverArgs {
    fn options(&self, seed: u64) -> SolveOptions {
        SolveOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            seed,
            threads: self.threads,
            stop_rule: self.stop_rule,
            determinism: self.determinism,
            asvd_pairs: self.pairs,
            rqi_accept_rule: if self.signed_rqi {
                RqiAcceptRule::Signed
            } else {
                RqiAcceptRule::Magnitude
            },
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug)]
struct Dims(Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    let dims: Vec<usize> = s
        .split([',', 'x', 'X'])
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| format!("bad mode size '{p}': {e}"))
        })
        .collect::<Result<_, _>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(format!("need at least two positive mode sizes, got '{s}'"));
    }
    Ok(Dims(dims))
}

fn sink(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve {
            tensor,
            solver,
            algo,
            output,
            factors,
        } => {
            let (generator, a) = tensor.load()?;
            let opts = solver.options(tensor.seed);
            let report = solve(&a, algo, &opts)?;
            let rho = report.rho(&a);
            println!("algo       {algo}");
            println!("dims       {}", format_dims(a.dims()));
            println!("lambda     {}", report.result.lambda);
            println!("rho        {rho}");
            println!("iterations {}", report.iterations);
            println!("converged  {}", report.converged);
            println!("residual   {:e}", report.eq11);
            if factors {
                for (n, u) in report.result.factors.iter().enumerate() {
                    let text: Vec<String> = u.iter().map(|v| v.to_string()).collect();
                    println!("u{} {}", n + 1, text.join(" "));
                }
            }
            if let Some(path) = output {
                let phases = report.phase_totals();
                let timed = !opts.determinism;
                let row = ExperimentRow {
                    generator: generator.name().to_string(),
                    dims: a.dims().to_vec(),
                    algo,
                    seed: tensor.seed,
                    lambda: report.result.lambda,
                    rho,
                    iters: report.iterations,
                    converged: report.converged,
                    wall_s: timed.then(|| phases.total().as_secs_f64()),
                    phase_j_s: timed.then(|| phases.j.as_secs_f64()),
                    phase_eig_s: timed.then(|| phases.eig.as_secs_f64()),
                };
                write_experiment_csv(File::create(path)?, &[row])?;
            }
        }
        Command::Experiment {
            tensor,
            solver,
            algo,
            seeds,
            jobs,
            output,
            summary,
        } => {
            let (generator, a) = tensor.load()?;
            let spec = ExperimentSpec {
                generator,
                dims: a.dims().to_vec(),
                seeds,
                algorithms: algo,
                opts: solver.options(tensor.seed),
                jobs,
            };
            let rows = run_experiment_on(&a, &spec)?;
            write_experiment_csv(sink(&output)?, &rows)?;
            let stats = summarize(&rows);
            match summary {
                Some(path) => write_summary_csv(File::create(path)?, &stats)?,
                None => {
                    for s in stats {
                        eprintln!(
                            "{:12} rho {:.4} ± {:.4}  iters {:.2} ± {:.2}  converged {}/{}",
                            s.algo.name(),
                            s.rho.0,
                            s.rho.1,
                            s.iters.0,
                            s.iters.1,
                            s.converged,
                            s.runs
                        );
                    }
                }
            }
        }
        Command::Scaling {
            tensor,
            threads,
            tol,
            max_iters,
            determinism,
            output,
        } => {
            let (_, a) = tensor.load()?;
            let opts = SolveOptions {
                tol,
                max_iters,
                seed: tensor.seed,
                determinism,
                ..SolveOptions::default()
            };
            let rows = run_scaling_on(&a, &threads, &opts)?;
            write_scaling_csv(sink(&output)?, &rows)?;
        }
        Command::Greedy {
            tensor,
            solver,
            algo,
            rank,
            output,
        } => {
            let (_, a) = tensor.load()?;
            let report = match greedy_rank_r(&a, rank, algo, &solver.options(tensor.seed)) {
                Ok(r) => r,
                Err(e) => {
                    write_greedy_csv(sink(&output)?, &e.partial)?;
                    return Err(e.into());
                }
            };
            write_greedy_csv(sink(&output)?, &report)?;
        }
        Command::Gen { tensor, output } => {
            let (_, a) = tensor.load()?;
            write_dt1(&output, &a)?;
            eprintln!(
                "wrote {} tensor to {}",
                format_dims(a.dims()),
                output.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
