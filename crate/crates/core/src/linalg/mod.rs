//! Dense and matrix-free complex linear algebra shared by every module.

mod matrix;
mod random;
mod spectral;

pub use matrix::{
    inner_product, partial_trace, tensor, tensor_power, tensor_with_caps, vector_norm, vectorize,
    ComplexMatrix, C64, ONE, ZERO,
};
pub use random::{ginibre, haar_sample, mc_accumulate, GroupTag, Rng, ScalarStats, MC_CHUNK};
pub use spectral::{
    eigh, eigvalsh, hermitian_norm, lanczos_extremes, matrix_norm, matrix_norm_with, power_opnorm,
    singular_values, Extremes, LanczosOptions, NormKind, POWER_MAX_ITER, POWER_TOL,
};
