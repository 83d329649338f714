//! Rank-one iteration drivers sharing one options and trace format.
//!
//! [`hoscf`] and [`ihoscf`] iterate on the largest-magnitude eigenpair of
//! `J(x)`. The baselines are the Gauss–Seidel and Jacobi forms of the power
//! method and of the alternating two-factor SVD update.

mod baselines;
mod scf;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nepv::{scf_stopping_value, stack_factors, BuildConfig, JBuilder};
use crate::tensor::{DenseTensor, FactorSet};

pub use baselines::{asvd, hopm, jacobi_asvd, jacobi_hopm};
pub use scf::{hoscf, ihoscf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Hoscf,
    Ihoscf,
    Hopm,
    JacobiHopm,
    Asvd,
    JacobiAsvd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Hoscf,
        Algorithm::Ihoscf,
        Algorithm::Hopm,
        Algorithm::JacobiHopm,
        Algorithm::Asvd,
        Algorithm::JacobiAsvd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Hoscf => "hoscf",
            Algorithm::Ihoscf => "ihoscf",
            Algorithm::Hopm => "hopm",
            Algorithm::JacobiHopm => "jacobi_hopm",
            Algorithm::Asvd => "asvd",
            Algorithm::JacobiAsvd => "jacobi_asvd",
        }
    }

    /// The stopping rule used when [`SolveOptions::stop_rule`] is unset.
    pub fn default_stop_rule(self) -> StopRule {
        match self {
            Algorithm::Hoscf | Algorithm::Ihoscf => StopRule::Eq11,
            _ => StopRule::Kkt,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || (key == "als" && *a == Algorithm::Hopm))
            .ok_or_else(|| Error::InvalidOption(format!("unknown algorithm '{s}'")))
    }
}

/// When an iteration counts as converged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// Largest per-mode KKT residual divided by `‖A‖_F`.
    Kkt,
    /// `|λ_k − λ_{k−1}| ≤ tol·|λ_{k−1}|`.
    LambdaChange,
    /// Eigen-residual of the current iterate against `J` at that iterate,
    /// `‖Jx − ρx‖/(‖J‖_F + |λ|)`.
    Eq11,
}

impl FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "kkt" => Ok(StopRule::Kkt),
            "lambda" | "lambda_change" => Ok(StopRule::LambdaChange),
            "eq11" | "residual" => Ok(StopRule::Eq11),
            _ => Err(Error::InvalidOption(format!("unknown stop rule '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    /// Entries drawn uniformly from `[0, 1)` and normalized per mode.
    Uniform01,
    /// Used as given after normalization.
    Provided(Vec<Vec<f64>>),
}

/// When an iHOSCF Rayleigh-quotient update replaces the eigenvector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RqiAcceptRule {
    /// `|new quotient| > |λ_k|`.
    Magnitude,
    /// `new quotient > λ_k`.
    Signed,
}

/// Which `J` the iHOSCF Rayleigh-quotient step is taken against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RqiMatrix {
    /// The matrix whose eigenpair produced `x_k`.
    Previous,
    /// `J(x_k)`, the matrix the next iteration would diagonalize.
    Current,
}

/// Mode pairs visited by one ASVD cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AsvdPairs {
    /// `(1,2), (2,3), …, (d,1)`.
    Adjacent,
    /// `(1,2), (3,4), …`; an odd last mode gets a single power update.
    Disjoint,
}

impl FromStr for AsvdPairs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adjacent" => Ok(AsvdPairs::Adjacent),
            "disjoint" => Ok(AsvdPairs::Disjoint),
            _ => Err(Error::InvalidOption(format!("unknown pair schedule '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub init: Init,
    /// Fixes the summation order of parallel contractions.
    pub determinism: bool,
    pub threads: usize,
    /// `None` picks [`Algorithm::default_stop_rule`].
    pub stop_rule: Option<StopRule>,
    pub rqi_accept_rule: RqiAcceptRule,
    pub rqi_matrix: RqiMatrix,
    pub asvd_pairs: AsvdPairs,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iters: 500,
            seed: 0,
            init: Init::Uniform01,
            determinism: true,
            threads: 1,
            stop_rule: None,
            rqi_accept_rule: RqiAcceptRule::Magnitude,
            rqi_matrix: RqiMatrix::Current,
            asvd_pairs: AsvdPairs::Adjacent,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidOption("max_iters must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidOption("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn builder(&self) -> Result<JBuilder> {
        JBuilder::new(BuildConfig {
            threads: self.threads,
            deterministic: self.determinism,
            reuse_intermediates: false,
        })
    }
}

/// Wall time per phase of one iteration.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimes {
    pub j: Duration,
    pub eig: Duration,
    pub rqi: Duration,
    pub other: Duration,
}

impl PhaseTimes {
    pub fn total(&self) -> Duration {
        self.j + self.eig + self.rqi + self.other
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    /// λ after the iteration's update.
    pub lambda: f64,
    /// λ from the eigenpair step, before any Rayleigh-quotient update.
    /// Equal to `lambda` for the other solvers.
    pub eig_lambda: f64,
    /// The quantity compared against `tol`.
    pub stop_value: f64,
    pub kkt_residual: f64,
    pub rqi_accepted: bool,
    pub timings: PhaseTimes,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub result: FactorSet,
    pub converged: bool,
    pub iterations: usize,
    /// Full contraction of the starting factors.
    pub lambda0: f64,
    pub trace: Vec<IterRecord>,
    pub stop_rule: StopRule,
    /// The residual `‖Jx − ρx‖/(‖J‖_F + |λ|)` at the returned iterate.
    pub eq11: f64,
    /// Random restarts taken after a degenerate iterate.
    pub restarts: usize,
    /// Final eigenvector of `J` for the eigenvector-based solvers.
    pub eigenvector: Option<Vec<f64>>,
}

impl SolveReport {
    /// `|λ|/‖A‖_F`.
    pub fn rho(&self, a: &DenseTensor) -> f64 {
        self.result.lambda.abs() / a.frobenius_norm()
    }

    pub fn phase_totals(&self) -> PhaseTimes {
        self.trace
            .iter()
            .fold(PhaseTimes::default(), |acc, r| PhaseTimes {
                j: acc.j + r.timings.j,
                eig: acc.eig + r.timings.eig,
                rqi: acc.rqi + r.timings.rqi,
                other: acc.other + r.timings.other,
            })
    }
}

pub fn solve(a: &DenseTensor, algorithm: Algorithm, opts: &SolveOptions) -> Result<SolveReport> {
    match algorithm {
        Algorithm::Hoscf => hoscf(a, opts),
        Algorithm::Ihoscf => ihoscf(a, opts),
        Algorithm::Hopm => hopm(a, opts),
        Algorithm::JacobiHopm => jacobi_hopm(a, opts),
        Algorithm::Asvd => asvd(a, opts),
        Algorithm::JacobiAsvd => jacobi_asvd(a, opts),
    }
}

/// Uniform `[0,1)` unit factors; `attempt` selects an independent stream.
pub fn uniform_factors(dims: &[usize], seed: u64, attempt: u64) -> FactorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt);
    let factors = dims
        .iter()
        .map(|&n| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    FactorSet::from_unnormalized(0.0, factors)
}

pub(crate) fn initial_factors(
    a: &DenseTensor,
    opts: &SolveOptions,
    attempt: u64,
) -> Result<FactorSet> {
    let f = match (&opts.init, attempt) {
        (Init::Provided(factors), 0) => {
            let f = FactorSet::from_unnormalized(0.0, factors.clone());
            if f.dims() != a.dims() {
                return Err(Error::ShapeMismatch(format!(
                    "initial factors {:?} for tensor {:?}",
                    f.dims(),
                    a.dims()
                )));
            }
            f
        }
        _ => uniform_factors(a.dims(), opts.seed, attempt),
    };
    match f.first_degenerate() {
        Some(n) => Err(Error::Degenerate(n)),
        None => Ok(f),
    }
}

pub(crate) fn check_input(a: &DenseTensor, opts: &SolveOptions) -> Result<()> {
    opts.validate()?;
    if a.order() < 2 {
        return Err(Error::OrderTooSmall(a.order()));
    }
    Ok(())
}

/// Runs `attempt` once, and once more from a fresh random start if it hit a
/// degenerate iterate.
pub(crate) fn with_restart(
    a: &DenseTensor,
    opts: &SolveOptions,
    mut attempt: impl FnMut(FactorSet) -> Result<SolveReport>,
) -> Result<SolveReport> {
    check_input(a, opts)?;
    let first = attempt(initial_factors(a, opts, 0)?);
    match first {
        Err(Error::Degenerate(_)) => {
            let mut report = attempt(initial_factors(a, opts, 1)?).map_err(|e| match e {
                Error::Degenerate(n) => {
                    Error::SolverFailed(format!("factor {n} vanished again after a random restart"))
                }
                e => e,
            })?;
            report.restarts = 1;
            Ok(report)
        }
        other => other,
    }
}

/// Final λ as the full contraction, sign moved into the first factor.
pub(crate) fn finalize(a: &DenseTensor, mut f: FactorSet) -> Result<FactorSet> {
    f.lambda = a.multilinear(&f.factors)?;
    f.absorb_sign();
    Ok(f)
}

/// Eq.-11 residual of an equal-block-norm iterate, which needs a fresh `J`.
pub(crate) fn stacked_residual(a: &DenseTensor, f: &FactorSet, builder: &JBuilder) -> Result<f64> {
    let j = builder.build(a, f)?;
    let x = stack_factors(f)?;
    let lambda = a.multilinear(&f.factors)?;
    Ok(scf_stopping_value(&j, x.as_slice(), lambda))
}
