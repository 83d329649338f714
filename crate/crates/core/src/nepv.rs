//! The block matrix `J(x)` and the quantities built from it.
//!
//! For a stacked vector `x = [x₁; …; x_d]` with block `n` of length `Iₙ`,
//! `J(x)` is the symmetric `ΣIₙ × ΣIₙ` matrix with zero diagonal blocks and
//! off-diagonal block `(m, n)` equal to `A_{m,n}(x)/(d−1)`, where
//! `A_{m,n}(x)` contracts the tensor with every normalized block except `m`
//! and `n`. A fixed point `J(x)x = λx` is a singular pair of the tensor.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, Matrix};
use crate::tensor::{contract_steps, DenseTensor, FactorSet};

/// Stacking refuses factors further than this from unit length.
pub const STACK_UNIT_TOL: f64 = 1e-8;

/// A flat vector of length `ΣIₙ` partitioned into `d` consecutive blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedVector {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl StackedVector {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let offsets = offsets(&dims);
        if *offsets.last().unwrap_or(&0) != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "block sizes {:?} need {} entries, got {}",
                dims,
                offsets.last().unwrap_or(&0),
                data.len()
            )));
        }
        Ok(Self {
            dims,
            offsets,
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Index range of block `n` in the flat vector.
    pub fn range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    pub fn block(&self, n: usize) -> &[f64] {
        &self.data[self.range(n)]
    }

    pub fn block_norms(&self) -> Vec<f64> {
        (0..self.order()).map(|n| norm2(self.block(n))).collect()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn negated(&self) -> StackedVector {
        StackedVector {
            data: self.data.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(dims.len() + 1);
    out.push(0);
    for &d in dims {
        out.push(out.last().unwrap() + d);
    }
    out
}

/// Normalizes every block. Zero blocks become zero vectors and are flagged
/// in [`FactorSet::degenerate`]; `lambda` is left at 0.
pub fn split_factors(x: &StackedVector) -> FactorSet {
    let factors = (0..x.order()).map(|n| x.block(n).to_vec()).collect();
    FactorSet::from_unnormalized(0.0, factors)
}

/// `[u⁽¹⁾; …; u⁽ᵈ⁾]/√d`, a unit vector with equal block norms.
pub fn stack_factors(f: &FactorSet) -> Result<StackedVector> {
    let scale = 1.0 / (f.order() as f64).sqrt();
    let mut data = Vec::with_capacity(f.dims().iter().sum());
    for (mode, u) in f.factors.iter().enumerate() {
        let norm = norm2(u);
        if (norm - 1.0).abs() > STACK_UNIT_TOL {
            return Err(Error::NonUnitFactor { mode, norm });
        }
        data.extend(u.iter().map(|v| v * scale));
    }
    StackedVector::new(f.dims(), data)
}

/// Negates block 1 and copies the rest.
pub fn flip_first_block(x: &StackedVector) -> StackedVector {
    let mut out = x.clone();
    for i in x.range(0) {
        out.data[i] = -out.data[i];
    }
    out
}

/// The symmetric matrix `J(x)`, kept as its unscaled upper blocks `A_{m,n}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymBlockMatrix {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    /// `A_{m,n}` for `m < n`, ordered `(0,1), (0,2), …, (1,2), …`.
    blocks: Vec<Matrix>,
    scale: f64,
}

pub fn block_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d)
        .flat_map(|m| (m + 1..d).map(move |n| (m, n)))
        .collect()
}

fn pair_index(d: usize, m: usize, n: usize) -> usize {
    debug_assert!(m < n && n < d);
    // pairs before row m, then offset within row
    m * d - m * (m + 1) / 2 + (n - m - 1)
}

impl SymBlockMatrix {
    fn from_blocks(dims: Vec<usize>, blocks: Vec<Matrix>) -> Self {
        let d = dims.len();
        Self {
            offsets: offsets(&dims),
            scale: 1.0 / (d as f64 - 1.0),
            dims,
            blocks,
        }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// `ΣIₙ`
    pub fn size(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `1/(d−1)`
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Unscaled `A_{m,n}` for `m < n`.
    pub fn block(&self, m: usize, n: usize) -> &Matrix {
        assert!(m < n, "upper blocks only");
        &self.blocks[pair_index(self.order(), m, n)]
    }

    pub fn to_dense(&self) -> Matrix {
        let mut s = Matrix::zeros(self.size(), self.size());
        for (m, n) in block_pairs(self.order()) {
            let b = self.block(m, n);
            let (om, on) = (self.offsets[m], self.offsets[n]);
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    let v = self.scale * b[(i, j)];
                    s[(om + i, on + j)] = v;
                    s[(on + j, om + i)] = v;
                }
            }
        }
        s
    }

    /// `J x` computed block by block.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.size());
        let mut out = vec![0.0; self.size()];
        for (m, n) in block_pairs(self.order()) {
            let b = self.block(m, n);
            let (rm, rn) = (
                self.offsets[m]..self.offsets[m + 1],
                self.offsets[n]..self.offsets[n + 1],
            );
            let top = b.matvec(&x[rn.clone()]);
            let bottom = b.tr_matvec(&x[rm.clone()]);
            for (o, v) in out[rm].iter_mut().zip(top) {
                *o += self.scale * v;
            }
            for (o, v) in out[rn].iter_mut().zip(bottom) {
                *o += self.scale * v;
            }
        }
        out
    }

    /// `‖J‖_F = √(2·Σ_{m<n}‖A_{m,n}‖²_F)/(d−1)`, without materializing `J`.
    pub fn frobenius_norm(&self) -> f64 {
        let sq: f64 = self
            .blocks
            .iter()
            .map(|b| b.as_slice().iter().map(|v| v * v).sum::<f64>())
            .sum();
        self.scale * (2.0 * sq).sqrt()
    }

    pub fn max_abs_diff(&self, other: &SymBlockMatrix) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b).max_abs())
            .fold(0.0, f64::max)
    }
}

fn check_usable(a: &DenseTensor, f: &FactorSet) -> Result<()> {
    if a.order() != f.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors for an order-{} tensor",
            f.order(),
            a.order()
        )));
    }
    a.check_factor_shapes(&f.factors)
}

fn is_zero_mode(f: &FactorSet, mode: usize) -> bool {
    f.degenerate.get(mode).copied().unwrap_or(false) || f.factors[mode].iter().all(|&v| v == 0.0)
}

/// Largest remaining mode first; ties go to the higher mode index.
fn contraction_plan<'a>(
    a: &DenseTensor,
    f: &'a FactorSet,
    modes: impl Iterator<Item = usize>,
) -> Vec<(usize, &'a [f64])> {
    let mut plan: Vec<usize> = modes.collect();
    plan.sort_by(|&x, &y| a.dims()[y].cmp(&a.dims()[x]).then(y.cmp(&x)));
    plan.into_iter()
        .map(|k| (k, f.factors[k].as_slice()))
        .collect()
}

fn block_from_data(dims: &[usize], m: usize, n: usize, data: &[f64]) -> Matrix {
    let (im, in_) = (dims[m], dims[n]);
    // column-major (i_m fastest) → row-major I_m × I_n
    Matrix::from_fn(im, in_, |i, j| data[i + j * im])
}

fn compute_block(
    a: &DenseTensor,
    f: &FactorSet,
    m: usize,
    n: usize,
    parallel_first: bool,
) -> Result<Matrix> {
    let d = a.order();
    if let Some(k) = (0..d).find(|&k| k != m && k != n && is_zero_mode(f, k)) {
        return Err(Error::Degenerate(k));
    }
    let plan = contraction_plan(a, f, (0..d).filter(|&k| k != m && k != n));
    let (_, data) = contract_steps(a.data(), a.dims(), &plan, parallel_first);
    Ok(block_from_data(a.dims(), m, n, &data))
}

/// `A_{m,n}(x)`: the tensor contracted with every factor except `m` and `n`,
/// returned with mode `m` as rows.
pub fn build_block(a: &DenseTensor, f: &FactorSet, m: usize, n: usize) -> Result<Matrix> {
    check_usable(a, f)?;
    let d = a.order();
    for mode in [m, n] {
        if mode >= d {
            return Err(Error::ModeOutOfRange { mode, order: d });
        }
    }
    if m == n {
        return Err(Error::InvalidOption(format!(
            "block ({m}, {n}) is on the diagonal"
        )));
    }
    if m < n {
        compute_block(a, f, m, n, false)
    } else {
        Ok(compute_block(a, f, n, m, false)?.transpose())
    }
}

/// How `J(x)` blocks are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildConfig {
    pub threads: usize,
    /// Parallelize only across blocks, never inside a block's summation.
    pub deterministic: bool,
    /// Share the trailing contractions between blocks with the same `n`.
    pub reuse_intermediates: bool,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            threads: 1,
            deterministic: true,
            reuse_intermediates: false,
        }
    }
}

/// Builds `J(x)` repeatedly with a fixed worker pool.
pub struct JBuilder {
    config: BuildConfig,
    pool: Option<rayon::ThreadPool>,
}

impl JBuilder {
    pub fn new(config: BuildConfig) -> Result<Self> {
        if config.threads == 0 {
            return Err(Error::InvalidOption(
                "thread count must be at least 1".into(),
            ));
        }
        let pool = if config.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.threads)
                    .build()
                    .map_err(|e| Error::InvalidOption(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { config, pool })
    }

    pub fn config(&self) -> BuildConfig {
        self.config
    }

    pub fn build(&self, a: &DenseTensor, f: &FactorSet) -> Result<SymBlockMatrix> {
        check_usable(a, f)?;
        let d = a.order();
        if d < 2 {
            return Err(Error::OrderTooSmall(d));
        }
        if let Some(k) = (0..d).find(|&k| is_zero_mode(f, k)) {
            return Err(Error::Degenerate(k));
        }
        let blocks = match &self.pool {
            None => self.build_serial(a, f)?,
            Some(pool) => pool.install(|| self.build_parallel(a, f))?,
        };
        Ok(SymBlockMatrix::from_blocks(a.dims().to_vec(), blocks))
    }

    fn build_serial(&self, a: &DenseTensor, f: &FactorSet) -> Result<Vec<Matrix>> {
        if self.config.reuse_intermediates {
            let mut out = Vec::new();
            for n in 1..a.order() {
                out.extend(reuse_row(a, f, n, false)?);
            }
            return Ok(sort_pairs(a.order(), out));
        }
        block_pairs(a.order())
            .into_iter()
            .map(|(m, n)| compute_block(a, f, m, n, false))
            .collect()
    }

    fn build_parallel(&self, a: &DenseTensor, f: &FactorSet) -> Result<Vec<Matrix>> {
        let inner = !self.config.deterministic;
        if self.config.reuse_intermediates {
            let rows: Vec<Vec<((usize, usize), Matrix)>> = (1..a.order())
                .into_par_iter()
                .map(|n| reuse_row(a, f, n, inner))
                .collect::<Result<_>>()?;
            return Ok(sort_pairs(a.order(), rows.into_iter().flatten().collect()));
        }
        block_pairs(a.order())
            .into_par_iter()
            .map(|(m, n)| compute_block(a, f, m, n, inner))
            .collect()
    }
}

/// All blocks `(m, n)` with `m < n` for one `n`, sharing the contraction of
/// modes `n+1..d`.
fn reuse_row(
    a: &DenseTensor,
    f: &FactorSet,
    n: usize,
    parallel_first: bool,
) -> Result<Vec<((usize, usize), Matrix)>> {
    let d = a.order();
    let tail: Vec<(usize, &[f64])> = (n + 1..d)
        .rev()
        .map(|k| (k, f.factors[k].as_slice()))
        .collect();
    let (pdims, pdata) = contract_steps(a.data(), a.dims(), &tail, parallel_first);
    let partial = DenseTensor::new_unchecked(pdims, pdata);
    (0..n)
        .map(|m| {
            let plan = contraction_plan(&partial, f, (0..n).filter(|&k| k != m));
            let (_, data) = contract_steps(partial.data(), partial.dims(), &plan, false);
            Ok(((m, n), block_from_data(a.dims(), m, n, &data)))
        })
        .collect()
}

fn sort_pairs(d: usize, mut blocks: Vec<((usize, usize), Matrix)>) -> Vec<Matrix> {
    blocks.sort_by_key(|&((m, n), _)| pair_index(d, m, n));
    blocks.into_iter().map(|(_, b)| b).collect()
}

/// `J(x)` for the factors of `x`; `threads > 1` spreads blocks over a pool.
pub fn build_j(a: &DenseTensor, f: &FactorSet, threads: usize) -> Result<SymBlockMatrix> {
    JBuilder::new(BuildConfig {
        threads,
        ..BuildConfig::default()
    })?
    .build(a, f)
}

/// Residuals of the stationarity system at a factor set.
#[derive(Clone, Debug, PartialEq)]
pub struct KktReport {
    /// The multilinear form value `A ×₁ u⁽¹⁾ ⋯ ×_d u⁽ᵈ⁾`.
    pub lambda: f64,
    /// `‖A ×_{−n} u − λ u⁽ⁿ⁾‖₂` for each mode.
    pub per_mode_residuals: Vec<f64>,
    pub max_residual: f64,
}

impl KktReport {
    pub(crate) fn from_gradients(grads: &[Vec<f64>], f: &FactorSet, lambda: f64) -> Self {
        let per_mode_residuals: Vec<f64> = grads
            .iter()
            .zip(&f.factors)
            .map(|(g, u)| {
                norm2(
                    &g.iter()
                        .zip(u)
                        .map(|(a, b)| a - lambda * b)
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let max_residual = per_mode_residuals.iter().copied().fold(0.0, f64::max);
        Self {
            lambda,
            per_mode_residuals,
            max_residual,
        }
    }
}

pub fn kkt_report(a: &DenseTensor, f: &FactorSet) -> Result<KktReport> {
    check_usable(a, f)?;
    if let Some(k) = f.first_degenerate() {
        return Err(Error::Degenerate(k));
    }
    let lambda = a.multilinear(&f.factors)?;
    let grads: Vec<Vec<f64>> = (0..a.order())
        .map(|n| a.contract_all_but(&f.factors, n))
        .collect::<Result<_>>()?;
    Ok(KktReport::from_gradients(&grads, f, lambda))
}

/// KKT residuals from an already built `J(x)` whose factors are `f`:
/// `A ×_{−n} u = A_{n,m} u⁽ᵐ⁾` for any `m ≠ n`.
pub fn kkt_from_blocks(j: &SymBlockMatrix, f: &FactorSet) -> KktReport {
    let d = j.order();
    let grads: Vec<Vec<f64>> = (0..d)
        .map(|n| {
            let m = if n == 0 { 1 } else { 0 };
            if m < n {
                j.block(m, n).tr_matvec(&f.factors[m])
            } else {
                j.block(n, m).matvec(&f.factors[m])
            }
        })
        .collect();
    let lambda = dot(&grads[0], &f.factors[0]);
    KktReport::from_gradients(&grads, f, lambda)
}

/// `‖Jx − ρx‖₂ / (‖J‖_F + |λ|)` with `ρ = xᵀJx` and unit `x`.
pub fn scf_stopping_value(j: &SymBlockMatrix, x: &[f64], lambda: f64) -> f64 {
    let jx = j.matvec(x);
    let rho = dot(x, &jx);
    let resid = norm2(
        &jx.iter()
            .zip(x)
            .map(|(a, b)| a - rho * b)
            .collect::<Vec<_>>(),
    );
    resid / (j.frobenius_norm() + lambda.abs())
}
