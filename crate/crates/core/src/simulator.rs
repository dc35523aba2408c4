//! Seeded sampling of derivation trees and their observations.
//!
//! Each tree draws from its own ChaCha8 stream keyed by `(seed, draw index)`,
//! so rejection sampling never shifts the randomness of later draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{OffspringModel, ProductionKind};
use crate::observation::Observation;
use crate::trees::{yield_vector, DerivationTree};

/// Consecutive rejected draws before bounds are declared infeasible.
pub const MAX_CONSECUTIVE_DISCARDS: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("nonterminal `{0}` has no emission production to fall back on at the depth cap")]
    NoEmission(String),
    #[error("no tree within leaf bounds [{min}, {max}] after {discards} consecutive draws")]
    BoundsInfeasible { min: u64, max: u64, discards: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    /// Nonterminal type of the single initial particle.
    pub root: usize,
    /// Nodes at this depth (root = 1) must emit.
    pub max_depth: u32,
    /// Inclusive leaf-count bounds for rejection sampling.
    pub size_bounds: Option<(u64, u64)>,
    pub seed: u64,
    pub count: usize,
}

impl SimConfig {
    pub fn new(root: usize, seed: u64, count: usize) -> Self {
        SimConfig {
            root,
            max_depth: 64,
            size_bounds: None,
            seed,
            count,
        }
    }

    pub fn with_bounds(mut self, min: u64, max: u64) -> Self {
        self.size_bounds = Some((min, max));
        self
    }

    pub fn with_max_depth(mut self, depth: u32) -> Self {
        self.max_depth = depth;
        self
    }
}

/// Cumulative tables for drawing a rule per parent.
struct Sampler<'a> {
    model: &'a OffspringModel,
    all: Vec<Vec<(usize, f64)>>,
    emissions: Vec<Vec<(usize, f64)>>,
    max_depth: u32,
}

fn cumulative(items: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc = 0.0;
    items
        .filter(|&(_, p)| p > 0.0)
        .map(|(i, p)| {
            acc += p;
            (i, acc)
        })
        .collect()
}

fn draw(table: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let total = table.last().expect("nonempty table").1;
    let u = rng.gen::<f64>() * total;
    table
        .iter()
        .find(|&&(_, c)| u < c)
        .unwrap_or_else(|| table.last().unwrap())
        .0
}

fn take_leaf(ty: usize, leaves_left: &mut Option<u64>) -> Option<DerivationTree> {
    if let Some(left) = leaves_left {
        *left = left.checked_sub(1)?;
    }
    Some(DerivationTree::leaf(ty))
}

impl<'a> Sampler<'a> {
    fn new(model: &'a OffspringModel, cfg: &SimConfig) -> Result<Self, SimError> {
        let types = model.types();
        let m = types.num_nonterminals();
        if cfg.root >= m {
            return Err(SimError::InvalidConfig(format!(
                "root type index {} is not a nonterminal",
                cfg.root
            )));
        }
        if cfg.max_depth < 1 {
            return Err(SimError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if let Some((lo, hi)) = cfg.size_bounds {
            if lo < 1 || lo > hi {
                return Err(SimError::InvalidConfig(format!(
                    "leaf bounds [{lo}, {hi}] must satisfy 1 <= min <= max"
                )));
            }
        }
        let s = model.structure();
        let p = model.probabilities();
        let all: Vec<_> = (0..m)
            .map(|v| cumulative(s.rules_of(v).map(|i| (i, p[i]))))
            .collect();
        let emissions: Vec<_> = (0..m)
            .map(|v| {
                cumulative(
                    s.rules_of(v)
                        .filter(|&i| matches!(s.rule(i).kind(), ProductionKind::Emission(_)))
                        .map(|i| (i, p[i])),
                )
            })
            .collect();

        // Every nonterminal reachable from the root must be able to emit.
        let mut reachable = vec![false; m];
        let mut stack = vec![cfg.root];
        reachable[cfg.root] = true;
        while let Some(v) = stack.pop() {
            if emissions[v].is_empty() {
                return Err(SimError::NoEmission(types.name(v).into()));
            }
            for &(i, _) in &all[v] {
                for child in s.rule(i).offspring.expand() {
                    if child < m && !reachable[child] {
                        reachable[child] = true;
                        stack.push(child);
                    }
                }
            }
        }
        Ok(Sampler {
            model,
            all,
            emissions,
            max_depth: cfg.max_depth,
        })
    }

    /// Grows a subtree; `None` once the leaf budget is exhausted.
    fn grow(
        &self,
        v: usize,
        depth: u32,
        rng: &mut ChaCha8Rng,
        leaves_left: &mut Option<u64>,
    ) -> Option<DerivationTree> {
        let table = if depth >= self.max_depth {
            &self.emissions[v]
        } else {
            &self.all[v]
        };
        let rule = self.model.structure().rule(draw(table, rng));
        let m = self.model.types().num_nonterminals();
        let children = match rule.kind() {
            ProductionKind::Emission(u) => vec![take_leaf(u, leaves_left)?],
            ProductionKind::Branching => {
                let mut children = Vec::new();
                for ty in rule.offspring.expand() {
                    let child = if ty < m {
                        self.grow(ty, depth + 1, rng, leaves_left)?
                    } else {
                        take_leaf(ty, leaves_left)?
                    };
                    children.push(child);
                }
                children
            }
        };
        Some(DerivationTree::node(v, children))
    }

    fn tree(&self, cfg: &SimConfig, draw_index: u64, budget: Option<u64>) -> Option<DerivationTree> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(draw_index);
        let mut left = budget;
        self.grow(cfg.root, 1, &mut rng, &mut left)
    }
}

/// Samples one tree; a pure function of `(model, cfg, draw_index)`.
pub fn simulate_tree(
    model: &OffspringModel,
    cfg: &SimConfig,
    draw_index: u64,
) -> Result<DerivationTree, SimError> {
    let sampler = Sampler::new(model, cfg)?;
    Ok(sampler
        .tree(cfg, draw_index, None)
        .expect("unbounded growth always completes"))
}

/// Draws `cfg.count` trees, rejecting those outside `cfg.size_bounds`.
pub fn simulate_sample(
    model: &OffspringModel,
    cfg: &SimConfig,
) -> Result<(Vec<DerivationTree>, Vec<Observation>), SimError> {
    let sampler = Sampler::new(model, cfg)?;
    let d = model.types().dim();
    let mut trees = Vec::with_capacity(cfg.count);
    let mut draw_index = 0u64;
    let mut discards = 0u64;
    while trees.len() < cfg.count {
        let budget = cfg.size_bounds.map(|(_, hi)| hi);
        let candidate = sampler.tree(cfg, draw_index, budget);
        draw_index += 1;
        let accepted = match (candidate, cfg.size_bounds) {
            (Some(t), Some((lo, _))) if t.num_leaves() as u64 >= lo => Some(t),
            (Some(t), None) => Some(t),
            _ => None,
        };
        match accepted {
            Some(t) => {
                discards = 0;
                trees.push(t);
            }
            None => {
                discards += 1;
                if discards >= MAX_CONSECUTIVE_DISCARDS {
                    let (min, max) = cfg.size_bounds.expect("only bounded sampling discards");
                    return Err(SimError::BoundsInfeasible { min, max, discards });
                }
            }
        }
    }
    let observations = trees
        .iter()
        .map(|t| Observation::new(cfg.root, yield_vector(t, d)))
        .collect();
    Ok((trees, observations))
}
