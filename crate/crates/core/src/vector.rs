//! Per-type particle counts.

use std::fmt;
use std::ops::{Add, Index};

/// Nonnegative particle counts, one entry per type in `TypeTable` order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountVector(Vec<u32>);

impl CountVector {
    pub fn zeros(dim: usize) -> Self {
        CountVector(vec![0; dim])
    }

    /// Unit vector `e_ty`.
    pub fn unit(dim: usize, ty: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[ty] = 1;
        v
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        CountVector(counts)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn increment(&mut self, ty: usize) {
        self.0[ty] += 1;
    }

    /// Componentwise `self <= other`.
    pub fn le(&self, other: &CountVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `self - other` when `other <= self`.
    pub fn checked_sub(&self, other: &CountVector) -> Option<CountVector> {
        if !other.le(self) {
            return None;
        }
        Some(CountVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Type indices with multiplicity, ascending.
    pub fn expand(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(ty, &c)| std::iter::repeat(ty).take(c as usize))
            .collect()
    }

    /// Index of the single nonzero entry when the total is one.
    pub fn single(&self) -> Option<usize> {
        if self.total() != 1 {
            return None;
        }
        self.0.iter().position(|&c| c == 1)
    }
}

impl Add for &CountVector {
    type Output = CountVector;

    fn add(self, rhs: &CountVector) -> CountVector {
        assert_eq!(self.dim(), rhs.dim(), "count vectors of different dimension");
        CountVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Index<usize> for CountVector {
    type Output = u32;

    fn index(&self, ty: usize) -> &u32 {
        &self.0[ty]
    }
}

impl From<Vec<u32>> for CountVector {
    fn from(v: Vec<u32>) -> Self {
        CountVector(v)
    }
}

/// Comma-joined counts, e.g. `1,0,1,1`.
impl fmt::Display for CountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}
