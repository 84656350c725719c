use crate::error::{dim_err, Error, Result};
use crate::matcore::Rng;

/// A bijection on `0..n` stored with its inverse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    /// Builds from the forward map, rejecting anything that is not a bijection.
    pub fn from_forward(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        if n == 0 {
            return dim_err("empty permutation");
        }
        let mut inverse = vec![usize::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if f >= n || inverse[f] != usize::MAX {
                return Err(Error::InvalidKey(format!(
                    "index {f} at position {i} breaks bijection on 0..{n}"
                )));
            }
            inverse[f] = i;
        }
        Ok(Self { forward, inverse })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_forward((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    /// `π(i)`
    pub fn apply(&self, i: usize) -> usize {
        self.forward[i]
    }

    /// `π⁻¹(i)`
    pub fn apply_inv(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> &[usize] {
        &self.inverse
    }
}

/// Uniform random permutation of `0..n` by Fisher–Yates.
pub fn gen_permutation(n: usize, rng: &mut Rng) -> Result<Permutation> {
    if n == 0 {
        return dim_err("permutation of size 0");
    }
    let mut s: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.below(i + 1);
        s.swap(i, j);
    }
    Permutation::from_forward(s)
}
