use crate::vector::CountVector;

/// Particle counts observed at one time in a process started from a single `root`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub root: usize,
    pub x: CountVector,
}

impl Observation {
    pub fn new(root: usize, x: impl Into<CountVector>) -> Self {
        Observation { root, x: x.into() }
    }
}
