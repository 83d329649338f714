//! Greedy rank-R approximation by repeated rank-one deflation.

use crate::error::{Error, Result};
use crate::solvers::{solve, Algorithm, SolveOptions, SolveReport};
use crate::tensor::{rank_one_expand, DenseTensor, FactorSet};

#[derive(Clone, Debug, Default)]
pub struct GreedyReport {
    pub terms: Vec<FactorSet>,
    /// `‖A⁽ʳ⁺¹⁾‖_F/‖A‖_F` after each deflation, so entry `r−1` is `res_{r+1}`.
    pub residual_ratios: Vec<f64>,
    pub reports: Vec<SolveReport>,
}

/// A failed inner solve together with everything computed before it.
#[derive(Debug, thiserror::Error)]
#[error("greedy term {} failed: {source}", .partial.terms.len() + 1)]
pub struct GreedyError {
    pub partial: GreedyReport,
    #[source]
    pub source: Error,
}

/// Solves for `rank` terms one after another, each on the residual left by
/// the previous ones. Term `r` (from 0) uses seed `opts.seed + r`.
pub fn greedy_rank_r(
    a: &DenseTensor,
    rank: usize,
    algorithm: Algorithm,
    opts: &SolveOptions,
) -> std::result::Result<GreedyReport, GreedyError> {
    let mut report = GreedyReport::default();
    if rank == 0 {
        return Err(GreedyError {
            partial: report,
            source: Error::InvalidOption("rank must be at least 1".into()),
        });
    }
    let norm = a.frobenius_norm();
    let mut residual = a.clone();
    for r in 0..rank {
        let step = |residual: &DenseTensor| -> Result<(SolveReport, DenseTensor)> {
            let term_opts = SolveOptions {
                seed: opts.seed.wrapping_add(r as u64),
                ..opts.clone()
            };
            let solved = solve(residual, algorithm, &term_opts)?;
            let next = residual.sub(&rank_one_expand(&solved.result, residual.dims())?)?;
            Ok((solved, next))
        };
        match step(&residual) {
            Ok((solved, next)) => {
                residual = next;
                report
                    .residual_ratios
                    .push(residual.frobenius_norm() / norm);
                report.terms.push(solved.result.clone());
                report.reports.push(solved);
            }
            Err(source) => {
                return Err(GreedyError {
                    partial: report,
                    source,
                })
            }
        }
    }
    Ok(report)
}
