//! Dense tensor storage and contraction kernels.
//!
//! Entries are stored in generalized column-major order: the first index
//! varies fastest. With that layout, contracting mode `n` views the data as a
//! `left × Iₙ × right` block where `left = ∏_{k<n} I_k` and
//! `right = ∏_{k>n} I_k`, which is what every kernel below relies on.

mod io;

pub use io::{read_dt1, write_dt1, DT1_MAGIC};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{norm2, Matrix};

/// Dense tensors at or above this many entries use the expansion-free
/// residual formula.
pub const DEFAULT_EXPANSION_THRESHOLD: usize = 1 << 24;

/// Tolerance on `‖u‖₂ - 1` for factors that claim to be unit vectors.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

/// Result of a multi-mode contraction.
#[derive(Clone, Debug, PartialEq)]
pub enum Contraction {
    Scalar(f64),
    Tensor(DenseTensor),
}

impl Contraction {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            Contraction::Scalar(v) => Some(*v),
            Contraction::Tensor(_) => None,
        }
    }

    pub fn tensor(self) -> Option<DenseTensor> {
        match self {
            Contraction::Scalar(_) => None,
            Contraction::Tensor(t) => Some(t),
        }
    }
}

impl DenseTensor {
    /// Builds an input tensor of order ≥ 2.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::OrderTooSmall(dims.len()));
        }
        Self::with_any_order(dims, data)
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let n = checked_len(&dims)?;
        Self::new(dims, vec![0.0; n])
    }

    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let n = checked_len(&dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for (i, &d) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Self::new(dims, data)
    }

    pub(crate) fn new_unchecked(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    /// Contraction results may legitimately be order 1.
    fn with_any_order(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n = checked_len(&dims)?;
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                n,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a multi-index.
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            debug_assert!(i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[self.offset(idx)]
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn scaled(&self, c: f64) -> DenseTensor {
        DenseTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(Error::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(DenseTensor {
            dims: self.dims.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Reorders modes so that result mode `k` is input mode `perm[k]`.
    pub fn permute_modes(&self, perm: &[usize]) -> Result<DenseTensor> {
        let d = self.order();
        let mut seen = vec![false; d];
        if perm.len() != d
            || perm
                .iter()
                .any(|&p| p >= d || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidOption(format!(
                "{perm:?} is not a permutation of 0..{d}"
            )));
        }
        let dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut src = vec![0usize; d];
        DenseTensor::from_fn(dims, |idx| {
            for (k, &p) in perm.iter().enumerate() {
                src[p] = idx[k];
            }
            self.get(&src)
        })
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: self.order(),
            });
        }
        Ok(())
    }

    /// Mode-`n` unfolding: an `Iₙ × ∏_{k≠n} I_k` matrix whose column index
    /// enumerates the remaining modes with the lowest mode fastest.
    pub fn matricize(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let (left, len, right) = split_at_mode(&self.dims, mode);
        let cols = left * right;
        let mut m = Matrix::zeros(len, cols);
        for r in 0..right {
            for i in 0..len {
                let src = &self.data[(r * len + i) * left..][..left];
                for (l, &v) in src.iter().enumerate() {
                    m[(i, l + r * left)] = v;
                }
            }
        }
        Ok(m)
    }

    /// Inverse of [`DenseTensor::matricize`].
    pub fn dematricize(m: &Matrix, dims: &[usize], mode: usize) -> Result<DenseTensor> {
        if mode >= dims.len() {
            return Err(Error::ModeOutOfRange {
                mode,
                order: dims.len(),
            });
        }
        let (left, len, right) = split_at_mode(dims, mode);
        if m.rows() != len || m.cols() != left * right {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix cannot fold into {:?} along mode {}",
                m.rows(),
                m.cols(),
                dims,
                mode
            )));
        }
        let mut data = vec![0.0; len * left * right];
        for r in 0..right {
            for i in 0..len {
                let dst = &mut data[(r * len + i) * left..][..left];
                for (l, v) in dst.iter_mut().enumerate() {
                    *v = m[(i, l + r * left)];
                }
            }
        }
        DenseTensor::with_any_order(dims.to_vec(), data)
    }

    /// Tensor-times-vector along one mode; the result has order `d - 1`.
    pub fn ttv(&self, v: &[f64], mode: usize) -> Result<DenseTensor> {
        self.check_mode(mode)?;
        if self.order() < 2 {
            return Err(Error::OrderTooSmall(self.order()));
        }
        check_len(v, self.dims[mode], mode)?;
        let data = contract_mode(&self.data, &self.dims, mode, v);
        let mut dims = self.dims.clone();
        dims.remove(mode);
        DenseTensor::with_any_order(dims, data)
    }

    /// Tensor-times-vector chain over distinct modes, applied in descending
    /// mode order. Contracting every mode yields [`Contraction::Scalar`].
    pub fn ttvc(&self, vs: &[&[f64]], modes: &[usize]) -> Result<Contraction> {
        if vs.len() != modes.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} vectors for {} modes",
                vs.len(),
                modes.len()
            )));
        }
        let mut steps: Vec<(usize, &[f64])> = Vec::with_capacity(modes.len());
        for (&m, &v) in modes.iter().zip(vs) {
            self.check_mode(m)?;
            if steps.iter().any(|&(s, _)| s == m) {
                return Err(Error::DuplicateMode(m));
            }
            check_len(v, self.dims[m], m)?;
            steps.push((m, v));
        }
        steps.sort_by(|a, b| b.0.cmp(&a.0));
        let (dims, data) = contract_steps(&self.data, &self.dims, &steps, false);
        if dims.is_empty() {
            Ok(Contraction::Scalar(data[0]))
        } else {
            Ok(Contraction::Tensor(DenseTensor::with_any_order(
                dims, data,
            )?))
        }
    }

    /// `A ×₁ u⁽¹⁾ ⋯ ×_d u⁽ᵈ⁾`.
    pub fn multilinear(&self, factors: &[Vec<f64>]) -> Result<f64> {
        self.check_factor_shapes(factors)?;
        let steps: Vec<(usize, &[f64])> = factors
            .iter()
            .enumerate()
            .rev()
            .map(|(m, v)| (m, v.as_slice()))
            .collect();
        Ok(contract_steps(&self.data, &self.dims, &steps, false).1[0])
    }

    /// Contraction with every factor except `keep`: `A ×_{-n} u`.
    pub fn contract_all_but(&self, factors: &[Vec<f64>], keep: usize) -> Result<Vec<f64>> {
        self.check_factor_shapes(factors)?;
        self.check_mode(keep)?;
        let steps: Vec<(usize, &[f64])> = factors
            .iter()
            .enumerate()
            .rev()
            .filter(|&(m, _)| m != keep)
            .map(|(m, v)| (m, v.as_slice()))
            .collect();
        Ok(contract_steps(&self.data, &self.dims, &steps, false).1)
    }

    pub(crate) fn check_factor_shapes(&self, factors: &[Vec<f64>]) -> Result<()> {
        if factors.len() != self.order() {
            return Err(Error::ShapeMismatch(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                self.order()
            )));
        }
        for (m, f) in factors.iter().enumerate() {
            check_len(f, self.dims[m], m)?;
        }
        Ok(())
    }
}

/// A rank-one candidate `λ·u⁽¹⁾∘⋯∘u⁽ᵈ⁾`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    pub lambda: f64,
    pub factors: Vec<Vec<f64>>,
    /// Modes whose factor is the zero vector because its source block vanished.
    pub degenerate: Vec<bool>,
}

impl FactorSet {
    /// Validates that every factor has unit norm.
    pub fn new(lambda: f64, factors: Vec<Vec<f64>>) -> Result<Self> {
        for (mode, f) in factors.iter().enumerate() {
            let norm = norm2(f);
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::NonUnitFactor { mode, norm });
            }
        }
        let d = factors.len();
        Ok(Self {
            lambda,
            factors,
            degenerate: vec![false; d],
        })
    }

    /// Normalizes each vector; zero vectors are flagged degenerate.
    pub fn from_unnormalized(lambda: f64, mut factors: Vec<Vec<f64>>) -> Self {
        let degenerate = factors
            .iter_mut()
            .map(|f| crate::matrix::normalize(f) == 0.0)
            .collect();
        Self {
            lambda,
            factors,
            degenerate,
        }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(Vec::len).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    pub fn first_degenerate(&self) -> Option<usize> {
        self.degenerate.iter().position(|&d| d)
    }

    /// Makes `lambda` non-negative by moving its sign into the first factor.
    pub fn absorb_sign(&mut self) {
        if self.lambda < 0.0 {
            self.lambda = -self.lambda;
            if let Some(f) = self.factors.first_mut() {
                f.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
}

/// Materializes `λ·u⁽¹⁾∘⋯∘u⁽ᵈ⁾`.
pub fn rank_one_expand(f: &FactorSet, dims: &[usize]) -> Result<DenseTensor> {
    if f.dims() != dims {
        return Err(Error::ShapeMismatch(format!(
            "factor lengths {:?} vs dims {:?}",
            f.dims(),
            dims
        )));
    }
    // Build by repeated outer products so mode 1 stays fastest.
    let mut data = vec![f.lambda];
    for u in &f.factors {
        let mut next = Vec::with_capacity(data.len() * u.len());
        for &ui in u {
            next.extend(data.iter().map(|&v| v * ui));
        }
        data = next;
    }
    DenseTensor::new(dims.to_vec(), data)
}

/// `‖A − λ·u⁽¹⁾∘⋯∘u⁽ᵈ⁾‖_F`.
pub fn residual_norm(a: &DenseTensor, f: &FactorSet) -> Result<f64> {
    residual_norm_with_threshold(a, f, DEFAULT_EXPANSION_THRESHOLD)
}

/// Below `threshold` entries the expansion is materialized and subtracted;
/// at or above it `‖A‖² − 2λ⟨A, ∘u⟩ + λ²` is used, which assumes unit factors.
pub fn residual_norm_with_threshold(
    a: &DenseTensor,
    f: &FactorSet,
    threshold: usize,
) -> Result<f64> {
    a.check_factor_shapes(&f.factors)?;
    if a.len() < threshold {
        let b = rank_one_expand(f, a.dims())?;
        return Ok(a.sub(&b)?.frobenius_norm());
    }
    let norm_a = a.frobenius_norm();
    let inner = a.multilinear(&f.factors)?;
    let sq = norm_a * norm_a - 2.0 * f.lambda * inner + f.lambda * f.lambda;
    Ok(sq.max(0.0).sqrt())
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if let Some(m) = dims.iter().position(|&d| d == 0) {
        return Err(Error::ShapeMismatch(format!("mode {m} has zero length")));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::ShapeMismatch(format!("dims {dims:?} overflow")))
}

fn check_len(v: &[f64], expected: usize, mode: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::ShapeMismatch(format!(
            "vector for mode {} has length {}, expected {}",
            mode,
            v.len(),
            expected
        )));
    }
    Ok(())
}

pub(crate) fn split_at_mode(dims: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = dims[..mode].iter().product();
    let right = dims[mode + 1..].iter().product();
    (left, dims[mode], right)
}

/// Contracts position `pos` of a column-major array with `v`.
pub(crate) fn contract_mode(data: &[f64], dims: &[usize], pos: usize, v: &[f64]) -> Vec<f64> {
    let (left, len, right) = split_at_mode(dims, pos);
    let mut out = vec![0.0; left * right];
    if left == 1 {
        for (r, o) in out.iter_mut().enumerate() {
            let src = &data[r * len..][..len];
            *o = src.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        return out;
    }
    for (r, dst) in out.chunks_exact_mut(left).enumerate() {
        contract_slab(&data[r * len * left..][..len * left], left, v, dst);
    }
    out
}

/// Same values as [`contract_mode`], with output slabs spread over the
/// current rayon pool. Each output entry is summed in the same order.
pub(crate) fn contract_mode_par(data: &[f64], dims: &[usize], pos: usize, v: &[f64]) -> Vec<f64> {
    let (left, len, right) = split_at_mode(dims, pos);
    let mut out = vec![0.0; left * right];
    if left == 1 {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            let src = &data[r * len..][..len];
            *o = src.iter().zip(v).map(|(a, b)| a * b).sum();
        });
        return out;
    }
    if right == 1 {
        // Split along `left` instead so a single slab still parallelizes.
        const CHUNK: usize = 4096;
        out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, dst)| {
            let start = c * CHUNK;
            dst.iter_mut().for_each(|x| *x = 0.0);
            for (i, &vi) in v.iter().enumerate() {
                let src = &data[i * left + start..][..dst.len()];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += vi * s;
                }
            }
        });
        return out;
    }
    out.par_chunks_exact_mut(left)
        .enumerate()
        .for_each(|(r, dst)| {
            contract_slab(&data[r * len * left..][..len * left], left, v, dst);
        });
    out
}

#[inline]
fn contract_slab(slab: &[f64], left: usize, v: &[f64], dst: &mut [f64]) {
    for (i, &vi) in v.iter().enumerate() {
        let src = &slab[i * left..][..left];
        for (d, &s) in dst.iter_mut().zip(src) {
            *d += vi * s;
        }
    }
}

/// Applies `(original_mode, vector)` contractions in the given order.
/// Returns the remaining dims (original order) and data.
pub(crate) fn contract_steps(
    data: &[f64],
    dims: &[usize],
    steps: &[(usize, &[f64])],
    parallel_first: bool,
) -> (Vec<usize>, Vec<f64>) {
    let mut modes: Vec<usize> = (0..dims.len()).collect();
    let mut cur_dims = dims.to_vec();
    let mut owned: Option<Vec<f64>> = None;
    for (k, &(mode, v)) in steps.iter().enumerate() {
        let pos = modes
            .iter()
            .position(|&m| m == mode)
            .expect("contraction step names a live mode");
        let src = owned.as_deref().unwrap_or(data);
        let next = if k == 0 && parallel_first {
            contract_mode_par(src, &cur_dims, pos, v)
        } else {
            contract_mode(src, &cur_dims, pos, v)
        };
        owned = Some(next);
        modes.remove(pos);
        cur_dims.remove(pos);
    }
    (cur_dims, owned.unwrap_or_else(|| data.to_vec()))
}

#[cfg(test)]
mod tests;
