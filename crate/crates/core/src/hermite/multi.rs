use std::fmt;

use serde::{Deserialize, Serialize};

use super::recurrence::hermite_values;
use crate::error::{Error, Result};

/// Multi-index `xi` in `N_0^n`, ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn new(entries: Vec<usize>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// `k e_axis`.
    pub fn axis(dim: usize, axis: usize, k: usize) -> Self {
        let mut v = vec![0; dim];
        v[axis] = k;
        MultiIndex(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|xi|`.
    pub fn degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[usize] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// All multi-indices of dimension `dim` with `|xi| = k`.
    pub fn of_degree(dim: usize, k: usize) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        let mut cur = vec![0; dim];
        fill(&mut cur, 0, k, &mut out);
        out
    }

    /// All multi-indices with `|xi| <= k_max`, grouped by degree.
    pub fn up_to_degree(dim: usize, k_max: usize) -> Vec<MultiIndex> {
        (0..=k_max).flat_map(|k| Self::of_degree(dim, k)).collect()
    }

    /// Number of multi-indices of dimension `dim` and degree `k`.
    pub fn count_of_degree(dim: usize, k: usize) -> usize {
        if dim == 0 {
            return usize::from(k == 0);
        }
        super::difference::binomial(k + dim - 1, dim - 1).round() as usize
    }
}

fn fill(cur: &mut Vec<usize>, pos: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    if cur.is_empty() {
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        fill(cur, pos + 1, remaining - v, out);
    }
    cur[pos] = 0;
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

impl From<Vec<usize>> for MultiIndex {
    fn from(v: Vec<usize>) -> Self {
        MultiIndex(v)
    }
}

/// `h_xi(x) = prod_i h_{xi_i}(x_i)`.
pub fn eval_hermite_nd(xi: &MultiIndex, x: &[f64]) -> Result<f64> {
    if xi.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: xi.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("hermite argument"));
    }
    Ok(xi
        .0
        .iter()
        .zip(x)
        .map(|(&k, &t)| hermite_values(k, t)[k])
        .product())
}
