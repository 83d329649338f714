use std::time::Instant;

use super::*;
use crate::eig::{largest_magnitude_eigenpair, rayleigh_quotient_step, RqiOutcome};
use crate::matrix::dot;
use crate::nepv::{kkt_from_blocks, split_factors, StackedVector};

/// Self-consistent field iteration on `J(x)x = λx`.
pub fn hoscf(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, false))
}

/// HOSCF plus one Rayleigh-quotient step per iteration, kept only when it
/// increases λ under [`SolveOptions::rqi_accept_rule`].
pub fn ihoscf(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, true))
}

fn factors_of(x: &StackedVector) -> Result<FactorSet> {
    let f = split_factors(x);
    match f.first_degenerate() {
        Some(n) => Err(Error::Degenerate(n)),
        None => Ok(f),
    }
}

fn run(a: &DenseTensor, opts: &SolveOptions, f0: FactorSet, improved: bool) -> Result<SolveReport> {
    let algorithm = if improved {
        Algorithm::Ihoscf
    } else {
        Algorithm::Hoscf
    };
    let rule = opts.stop_rule.unwrap_or(algorithm.default_stop_rule());
    let builder = opts.builder()?;
    let norm_a = a.frobenius_norm();
    let lambda0 = a.multilinear(&f0.factors)?;

    let t = Instant::now();
    let mut j_prev = builder.build(a, &f0)?;
    let mut pending_j = t.elapsed();

    let mut trace = Vec::new();
    let mut converged = false;
    let mut lambda_prev = lambda0;
    let mut last = None;
    for _ in 0..opts.max_iters {
        let mut times = PhaseTimes {
            j: pending_j,
            ..Default::default()
        };
        let t = Instant::now();
        let dense_prev = j_prev.to_dense();
        let pair = largest_magnitude_eigenpair(&dense_prev)?;
        times.eig = t.elapsed();

        let t = Instant::now();
        let eig_lambda = pair.value;
        let mut lambda = eig_lambda;
        let mut x = StackedVector::new(a.dims().to_vec(), pair.vector)?;
        let mut f = factors_of(&x)?;
        times.other += t.elapsed();

        let t = Instant::now();
        let mut j_cur = builder.build(a, &f)?;
        times.j += t.elapsed();

        let mut rqi_accepted = false;
        if improved {
            let t = Instant::now();
            let dense_cur;
            let target = match opts.rqi_matrix {
                RqiMatrix::Previous => &dense_prev,
                RqiMatrix::Current => {
                    dense_cur = j_cur.to_dense();
                    &dense_cur
                }
            };
            if let RqiOutcome::Accepted { vector, .. } =
                rayleigh_quotient_step(target, x.as_slice())?
            {
                let q = dot(&vector, &target.matvec(&vector));
                let better = match opts.rqi_accept_rule {
                    RqiAcceptRule::Magnitude => q.abs() > lambda.abs(),
                    RqiAcceptRule::Signed => q > lambda,
                };
                if better {
                    let y = StackedVector::new(a.dims().to_vec(), vector)?;
                    let g = factors_of(&y)?;
                    times.rqi += t.elapsed();
                    let t = Instant::now();
                    j_cur = builder.build(a, &g)?;
                    times.j += t.elapsed();
                    x = y;
                    f = g;
                    lambda = q;
                    rqi_accepted = true;
                }
            }
            if !rqi_accepted {
                times.rqi += t.elapsed();
            }
        }

        let t = Instant::now();
        let kkt = kkt_from_blocks(&j_cur, &f);
        let eq11 = scf_stopping_value(&j_cur, x.as_slice(), lambda);
        let stop_value = match rule {
            StopRule::Eq11 => eq11,
            StopRule::Kkt => kkt.max_residual / norm_a,
            StopRule::LambdaChange => (lambda - lambda_prev).abs() / lambda_prev.abs(),
        };
        times.other += t.elapsed();
        trace.push(IterRecord {
            lambda,
            eig_lambda,
            stop_value,
            kkt_residual: kkt.max_residual,
            rqi_accepted,
            timings: times,
        });
        last = Some((f, eq11, x));
        if stop_value <= opts.tol {
            converged = true;
            break;
        }
        lambda_prev = lambda;
        j_prev = j_cur;
        pending_j = Default::default();
    }

    let (f, eq11, x) = last.expect("max_iters is at least 1");
    Ok(SolveReport {
        algorithm,
        result: finalize(a, f)?,
        converged,
        iterations: trace.len(),
        lambda0,
        trace,
        stop_rule: rule,
        eq11,
        restarts: 0,
        eigenvector: Some(x.into_vec()),
    })
}
