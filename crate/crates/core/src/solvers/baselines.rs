use std::time::Instant;

use super::*;
use crate::eig::largest_magnitude_eigenpair;
use crate::matrix::{dot, normalize, Matrix};
use crate::nepv::{build_block, JBuilder, KktReport};

/// Higher-order power method (ALS): Gauss–Seidel sweep over the modes.
pub fn hopm(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, Algorithm::Hopm))
}

/// Power-method sweep in which every mode is updated from the previous
/// iterate.
pub fn jacobi_hopm(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, Algorithm::JacobiHopm))
}

/// Alternating update of mode pairs from the top singular pair of the
/// pair's intermediate matrix.
pub fn asvd(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, Algorithm::Asvd))
}

/// [`asvd`] with every pair computed from the previous iterate; where pairs
/// overlap, the later pair's vector is kept.
pub fn jacobi_asvd(a: &DenseTensor, opts: &SolveOptions) -> Result<SolveReport> {
    with_restart(a, opts, |f0| run(a, opts, f0, Algorithm::JacobiAsvd))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Pair(usize, usize),
    Single(usize),
}

fn schedule(d: usize, pairs: AsvdPairs) -> Vec<Step> {
    match pairs {
        _ if d == 2 => vec![Step::Pair(0, 1)],
        AsvdPairs::Adjacent => (0..d).map(|n| Step::Pair(n, (n + 1) % d)).collect(),
        AsvdPairs::Disjoint => {
            let mut steps: Vec<Step> = (0..d / 2).map(|k| Step::Pair(2 * k, 2 * k + 1)).collect();
            if d % 2 == 1 {
                steps.push(Step::Single(d - 1));
            }
            steps
        }
    }
}

fn unit_or_degenerate(mut v: Vec<f64>, mode: usize) -> Result<Vec<f64>> {
    if normalize(&mut v) == 0.0 {
        return Err(Error::Degenerate(mode));
    }
    Ok(v)
}

fn gradients(a: &DenseTensor, f: &FactorSet) -> Result<Vec<Vec<f64>>> {
    (0..a.order())
        .map(|n| a.contract_all_but(&f.factors, n))
        .collect()
}

/// Top singular pair of `m`, signed so that `⟨p, reference⟩ ≥ 0`.
fn top_singular_pair(
    m: &Matrix,
    modes: (usize, usize),
    reference: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (r, c) = (m.rows(), m.cols());
    let aug = Matrix::from_fn(r + c, r + c, |i, j| match (i < r, j < r) {
        (true, false) => m[(i, j - r)],
        (false, true) => m[(j, i - r)],
        _ => 0.0,
    });
    let pair = largest_magnitude_eigenpair(&aug)?;
    let mut p = unit_or_degenerate(pair.vector[..r].to_vec(), modes.0)?;
    let mut q = unit_or_degenerate(pair.vector[r..].to_vec(), modes.1)?;
    if pair.value < 0.0 {
        q.iter_mut().for_each(|v| *v = -*v);
    }
    if dot(&p, reference) < 0.0 {
        p.iter_mut().for_each(|v| *v = -*v);
        q.iter_mut().for_each(|v| *v = -*v);
    }
    Ok((p, q))
}

fn power_sweep(a: &DenseTensor, f: &mut FactorSet, grads: &[Vec<f64>], jacobi: bool) -> Result<()> {
    if jacobi {
        for (n, g) in grads.iter().enumerate() {
            f.factors[n] = unit_or_degenerate(g.clone(), n)?;
        }
        return Ok(());
    }
    for n in 0..a.order() {
        f.factors[n] = unit_or_degenerate(a.contract_all_but(&f.factors, n)?, n)?;
    }
    Ok(())
}

fn svd_sweep(
    a: &DenseTensor,
    f: &mut FactorSet,
    steps: &[Step],
    jacobi: bool,
    times: &mut PhaseTimes,
) -> Result<()> {
    let old = f.clone();
    for &step in steps {
        let src = if jacobi { &old } else { &*f };
        match step {
            Step::Single(n) => {
                let g = src.factors.clone();
                f.factors[n] = unit_or_degenerate(a.contract_all_but(&g, n)?, n)?;
            }
            Step::Pair(m, n) => {
                let t = Instant::now();
                let block = build_block(a, src, m, n)?;
                times.j += t.elapsed();
                let t = Instant::now();
                let (p, q) = top_singular_pair(&block, (m, n), &src.factors[m])?;
                times.eig += t.elapsed();
                f.factors[m] = p;
                f.factors[n] = q;
            }
        }
    }
    Ok(())
}

fn run(
    a: &DenseTensor,
    opts: &SolveOptions,
    f0: FactorSet,
    algorithm: Algorithm,
) -> Result<SolveReport> {
    let rule = opts.stop_rule.unwrap_or(algorithm.default_stop_rule());
    let builder: JBuilder = opts.builder()?;
    let norm_a = a.frobenius_norm();
    let lambda0 = a.multilinear(&f0.factors)?;
    let steps = schedule(a.order(), opts.asvd_pairs);

    let mut f = f0;
    let mut grads = if algorithm == Algorithm::JacobiHopm {
        gradients(a, &f)?
    } else {
        Vec::new()
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut lambda_prev = lambda0;
    for _ in 0..opts.max_iters {
        let mut times = PhaseTimes::default();
        let t = Instant::now();
        match algorithm {
            Algorithm::Hopm => power_sweep(a, &mut f, &grads, false)?,
            Algorithm::JacobiHopm => power_sweep(a, &mut f, &grads, true)?,
            Algorithm::Asvd => svd_sweep(a, &mut f, &steps, false, &mut times)?,
            Algorithm::JacobiAsvd => svd_sweep(a, &mut f, &steps, true, &mut times)?,
            Algorithm::Hoscf | Algorithm::Ihoscf => unreachable!("not a baseline"),
        }
        grads = gradients(a, &f)?;
        let lambda = dot(&grads[0], &f.factors[0]);
        let kkt = KktReport::from_gradients(&grads, &f, lambda);
        times.other = t.elapsed().saturating_sub(times.j + times.eig);

        let stop_value = match rule {
            StopRule::Kkt => kkt.max_residual / norm_a,
            StopRule::LambdaChange => (lambda - lambda_prev).abs() / lambda_prev.abs(),
            StopRule::Eq11 => {
                let t = Instant::now();
                let v = stacked_residual(a, &f, &builder)?;
                times.j += t.elapsed();
                v
            }
        };
        trace.push(IterRecord {
            lambda,
            eig_lambda: lambda,
            stop_value,
            kkt_residual: kkt.max_residual,
            rqi_accepted: false,
            timings: times,
        });
        if stop_value <= opts.tol {
            converged = true;
            break;
        }
        lambda_prev = lambda;
    }

    let eq11 = match (rule, trace.last()) {
        (StopRule::Eq11, Some(r)) => r.stop_value,
        _ => stacked_residual(a, &f, &builder)?,
    };
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
        eigenvector: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        use Step::*;
        assert_eq!(schedule(2, AsvdPairs::Adjacent), vec![Pair(0, 1)]);
        assert_eq!(
            schedule(3, AsvdPairs::Adjacent),
            vec![Pair(0, 1), Pair(1, 2), Pair(2, 0)]
        );
        assert_eq!(
            schedule(4, AsvdPairs::Disjoint),
            vec![Pair(0, 1), Pair(2, 3)]
        );
        assert_eq!(
            schedule(5, AsvdPairs::Disjoint),
            vec![Pair(0, 1), Pair(2, 3), Single(4)]
        );
    }
}
