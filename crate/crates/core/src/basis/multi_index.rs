use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuple of nonnegative polynomial degrees, one per germ variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// Index with a single 1 at position `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// The same index padded with zeros up to length `n`.
    pub fn extended(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n, 0);
        MultiIndex(v)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Total-degree multi-index set in graded-lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiIndexSet {
    n: usize,
    p: usize,
    indices: Vec<MultiIndex>,
}

impl MultiIndexSet {
    pub fn total_degree(n: usize, p: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("multi-index dimension must be >= 1".into()));
        }
        let mut indices = Vec::new();
        for degree in 0..=p {
            let mut current = vec![0u32; n];
            push_compositions(degree as u32, 0, &mut current, &mut indices);
        }
        Ok(Self { n, p, indices })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn into_indices(self) -> Vec<MultiIndex> {
        self.indices
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }
}

// Within one degree, larger leading entries come first: (2,0),(1,1),(0,2).
fn push_compositions(remaining: u32, pos: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    let n = current.len();
    if pos == n - 1 {
        current[pos] = remaining;
        out.push(MultiIndex(current.clone()));
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        push_compositions(remaining - first, pos + 1, current, out);
    }
    current[pos] = 0;
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
