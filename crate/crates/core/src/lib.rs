//! Best rank-one approximation of dense higher-order tensors.
//!
//! The stationarity conditions of `max A×₁u⁽¹⁾⋯×_d u⁽ᵈ⁾` over unit vectors are
//! rewritten as an eigenvector-dependent eigenproblem `J(x)x = λx`, where `J(x)`
//! is a symmetric block matrix whose off-diagonal blocks are partial
//! contractions of the tensor. The self-consistent field solvers in
//! [`solvers`] iterate on that eigenproblem; the classical alternating
//! schemes are provided next to them as baselines.
//!
//! Module map:
//! - [`tensor`]: dense storage, matricization, tensor-times-vector kernels, `.dt1` files
//! - [`nepv`]: stacked vectors, the block matrix `J(x)`, KKT residuals, stopping values
//! - [`eig`]: dense symmetric eigensolver and a Rayleigh quotient step
//! - [`solvers`]: HOSCF, iHOSCF, HOPM, Jacobi-HOPM, ASVD, Jacobi-ASVD
//! - [`greedy`]: greedy rank-R deflation
//! - [`bench`]: tensor generators, multi-start experiments, thread scaling

pub mod bench;
pub mod eig;
mod error;
pub mod greedy;
pub mod matrix;
pub mod nepv;
pub mod solvers;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tensor::{DenseTensor, FactorSet};
