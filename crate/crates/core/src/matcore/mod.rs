//! Dense matrices, permutations, seeded randomness and matrix files.

pub mod io;
mod matrix;
mod perm;
mod rng;

pub use matrix::{mat_mul_naive, DenseMatrix, MAX_ELEMENTS};
pub use perm::{gen_permutation, Permutation};
pub use rng::Rng;
