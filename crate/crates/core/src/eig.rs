//! Dense symmetric eigensolver utilities.
//!
//! Householder reduction to tridiagonal form followed by implicit-shift QL
//! with accumulated transforms (the EISPACK `tred2`/`tql2` pair). Matrices
//! here are `ΣIₙ × ΣIₙ`, tens to a few hundred rows.

use crate::error::{Error, Result};
use crate::matrix::{dot, norm2, normalize, Matrix};

/// Maximum QL sweeps spent on a single eigenvalue.
const MAX_QL_SWEEPS: usize = 64;
const RQI_MAX_CONDITION: f64 = 1e14;
const RQI_SHIFT_NUDGE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Full decomposition: `values` ascending, `vectors` holds the matching
/// orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl SymEig {
    pub fn pair(&self, k: usize) -> EigPair {
        EigPair {
            value: self.values[k],
            vector: self.vectors.column(k),
        }
    }
}

fn check_symmetric(s: &Matrix) -> Result<()> {
    if s.rows() != s.cols() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} matrix is not square",
            s.rows(),
            s.cols()
        )));
    }
    let asym = s.asymmetry();
    if asym > 1e-10 * s.max_abs() {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn sym_eig_full(s: &Matrix) -> Result<SymEig> {
    check_symmetric(s)?;
    let n = s.rows();
    if n == 0 {
        return Ok(SymEig {
            values: vec![],
            vectors: Matrix::zeros(0, 0),
        });
    }
    // symmetrize exactly; the lower triangle drives tred2
    let mut v = Matrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymEig { values, vectors })
}

/// Eigenpair with the largest `|value|`. A `±μ` tie goes to `+μ`, and the
/// vector's largest-magnitude entry is made positive.
pub fn largest_magnitude_eigenpair(s: &Matrix) -> Result<EigPair> {
    let eig = sym_eig_full(s)?;
    Ok(largest_magnitude_of(&eig))
}

pub fn largest_magnitude_of(eig: &SymEig) -> EigPair {
    let n = eig.values.len();
    assert!(n > 0, "empty spectrum");
    let lo = eig.values[0];
    let hi = eig.values[n - 1];
    let tie = 8.0 * f64::EPSILON * lo.abs().max(hi.abs());
    let k = if hi.abs() + tie >= lo.abs() { n - 1 } else { 0 };
    let mut pair = eig.pair(k);
    canonicalize_sign(&mut pair.vector);
    pair
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RqiOutcome {
    /// Normalized `(S − ρI)⁻¹x`, sign-aligned with `x`.
    Accepted {
        vector: Vec<f64>,
        shift: f64,
    },
    Rejected(RqiRejection),
}

#[derive(Clone, Debug, PartialEq)]
pub enum RqiRejection {
    Singular,
    IllConditioned(f64),
    NonFinite,
}

/// One Rayleigh quotient iteration step: `ρ = xᵀSx/xᵀx`, `y = (S − ρI)⁻¹x`,
/// `y ← y/‖y‖`. A singular or badly conditioned shift is retried once with
/// `ρ(1 + 1e−10)`; a second failure rejects the step.
pub fn rayleigh_quotient_step(s: &Matrix, x: &[f64]) -> Result<RqiOutcome> {
    check_symmetric(s)?;
    if x.len() != s.rows() {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} for {}x{} matrix",
            x.len(),
            s.rows(),
            s.cols()
        )));
    }
    let rho = dot(x, &s.matvec(x)) / dot(x, x);
    let nudged = if rho == 0.0 {
        RQI_SHIFT_NUDGE * s.max_abs()
    } else {
        rho * (1.0 + RQI_SHIFT_NUDGE)
    };
    let mut last = RqiRejection::Singular;
    for shift in [rho, nudged] {
        match shifted_solve(s, shift, x) {
            Ok(mut y) => {
                if dot(&y, x) < 0.0 {
                    y.iter_mut().for_each(|v| *v = -*v);
                }
                return Ok(RqiOutcome::Accepted { vector: y, shift });
            }
            Err(why) => last = why,
        }
    }
    Ok(RqiOutcome::Rejected(last))
}

fn shifted_solve(s: &Matrix, shift: f64, x: &[f64]) -> std::result::Result<Vec<f64>, RqiRejection> {
    let n = s.rows();
    let mut m = s.clone();
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let norm1 = m.norm_1();
    let ldl = LdlFactor::factor(m).ok_or(RqiRejection::Singular)?;
    let mut y = ldl.solve(x);
    if y.iter().any(|v| !v.is_finite()) {
        return Err(RqiRejection::NonFinite);
    }
    // ‖M‖₁‖y‖₁/‖x‖₁ is a lower bound on κ₁(M)
    let cond =
        norm1 * y.iter().map(|v| v.abs()).sum::<f64>() / x.iter().map(|v| v.abs()).sum::<f64>();
    if !(cond <= RQI_MAX_CONDITION) {
        return Err(RqiRejection::IllConditioned(cond));
    }
    if normalize(&mut y) == 0.0 {
        return Err(RqiRejection::Singular);
    }
    Ok(y)
}

/// Bunch–Kaufman `P M Pᵀ = L D Lᵀ` with 1×1 and 2×2 pivots.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    /// Strict lower part holds `L`; diagonal (and sub-diagonal inside 2×2
    /// blocks) holds `D`.
    a: Matrix,
    swaps: Vec<(usize, usize)>,
    /// Start index and size of each pivot block.
    blocks: Vec<(usize, usize)>,
}

impl LdlFactor {
    /// Returns `None` when an exactly zero pivot column is met.
    pub fn factor(mut a: Matrix) -> Option<Self> {
        let n = a.rows();
        let alpha = (1.0 + 17f64.sqrt()) / 8.0;
        let mut swaps = Vec::new();
        let mut blocks = Vec::new();
        let mut k = 0;
        while k < n {
            let absakk = a[(k, k)].abs();
            let (imax, colmax) = (k + 1..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });
            if absakk.max(colmax) == 0.0 || !absakk.max(colmax).is_finite() {
                return None;
            }
            let (kp, step) = if absakk >= alpha * colmax {
                (k, 1)
            } else {
                let rowmax = (k..n)
                    .filter(|&j| j != imax)
                    .map(|j| a[(imax, j)].abs())
                    .fold(0.0, f64::max);
                if absakk * rowmax >= alpha * colmax * colmax {
                    (k, 1)
                } else if a[(imax, imax)].abs() >= alpha * rowmax {
                    (imax, 1)
                } else {
                    (imax, 2)
                }
            };
            let kk = k + step - 1;
            if kp != kk {
                swap_sym(&mut a, kk, kp);
                swaps.push((kk, kp));
            } else {
                swaps.push((kk, kk));
            }
            if step == 1 {
                let d = a[(k, k)];
                let l: Vec<f64> = (k + 1..n).map(|i| a[(i, k)] / d).collect();
                for (ii, i) in (k + 1..n).enumerate() {
                    for j in k + 1..n {
                        a[(i, j)] -= l[ii] * a[(j, k)];
                    }
                }
                for (ii, i) in (k + 1..n).enumerate() {
                    a[(i, k)] = l[ii];
                    a[(k, i)] = 0.0;
                }
            } else {
                let (p, q, r) = (a[(k, k)], a[(k + 1, k)], a[(k + 1, k + 1)]);
                let det = p * r - q * q;
                if det == 0.0 || !det.is_finite() {
                    return None;
                }
                // rows of [c_k, c_{k+1}] D⁻¹
                let l: Vec<(f64, f64)> = (k + 2..n)
                    .map(|i| {
                        let (x, y) = (a[(i, k)], a[(i, k + 1)]);
                        ((x * r - y * q) / det, (y * p - x * q) / det)
                    })
                    .collect();
                for (ii, i) in (k + 2..n).enumerate() {
                    for j in k + 2..n {
                        a[(i, j)] -= l[ii].0 * a[(j, k)] + l[ii].1 * a[(j, k + 1)];
                    }
                }
                for (ii, i) in (k + 2..n).enumerate() {
                    a[(i, k)] = l[ii].0;
                    a[(i, k + 1)] = l[ii].1;
                    a[(k, i)] = 0.0;
                    a[(k + 1, i)] = 0.0;
                }
            }
            blocks.push((k, step));
            k += step;
        }
        Some(Self { a, swaps, blocks })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.a.rows();
        let a = &self.a;
        let mut x = b.to_vec();
        // Pb, applied in factorization order
        for &(i, j) in &self.swaps {
            x.swap(i, j);
        }
        for &(k, s) in &self.blocks {
            for i in k + s..n {
                let mut acc = a[(i, k)] * x[k];
                if s == 2 {
                    acc += a[(i, k + 1)] * x[k + 1];
                }
                x[i] -= acc;
            }
        }
        for &(k, s) in &self.blocks {
            if s == 1 {
                x[k] /= a[(k, k)];
            } else {
                let (p, q, r) = (a[(k, k)], a[(k + 1, k)], a[(k + 1, k + 1)]);
                let det = p * r - q * q;
                let (u, v) = (x[k], x[k + 1]);
                x[k] = (r * u - q * v) / det;
                x[k + 1] = (p * v - q * u) / det;
            }
        }
        for &(k, s) in self.blocks.iter().rev() {
            for c in k..k + s {
                let acc: f64 = (k + s..n).map(|i| a[(i, c)] * x[i]).sum();
                x[c] -= acc;
            }
        }
        for &(i, j) in self.swaps.iter().rev() {
            x.swap(i, j);
        }
        x
    }
}

fn swap_sym(a: &mut Matrix, p: usize, q: usize) {
    let n = a.rows();
    for j in 0..n {
        let t = a[(p, j)];
        a[(p, j)] = a[(q, j)];
        a[(q, j)] = t;
    }
    for i in 0..n {
        let t = a[(i, p)];
        a[(i, p)] = a[(i, q)];
        a[(i, q)] = t;
    }
}

/// Residual `‖Sx − (xᵀSx)x‖₂` for a unit `x`.
pub fn eigen_residual(s: &Matrix, x: &[f64]) -> f64 {
    let sx = s.matvec(x);
    let rho = dot(x, &sx);
    norm2(
        &sx.iter()
            .zip(x)
            .map(|(a, b)| a - rho * b)
            .collect::<Vec<_>>(),
    )
}

fn tred2(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn tql2(v: &mut Matrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(Error::NoConvergence(MAX_QL_SWEEPS));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
