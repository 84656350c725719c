//! Outsourcing of matrix multiplication, linear regression and PCA to an
//! untrusted server.
//!
//! The client hides its matrices with single-use keys `M = P + H` (a scaled
//! permutation plus a rank-one perturbation), the server works on the
//! ciphertexts, and the client checks and unmasks the result. A
//! permutation-only baseline is kept for comparison, along with a small lab
//! that measures how much each scheme leaks through zero entries.

pub mod error;
pub mod fastmul;
pub mod gauntlet;
pub mod harness;
pub mod keyforge;
pub mod matcore;
pub mod mmc;
pub mod oracle;
pub mod regress;
pub mod spectra;

pub use error::{Error, ParseError, Result};
pub use fastmul::Side;
pub use matcore::{DenseMatrix, Permutation, Rng};

/// Outcome of a result check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
        }
    }
}
