//! Estimation of the offspring distribution of a multitype branching process
//! with terminal types, from counts of particles observed at a single time.
//!
//! The hidden derivation tree is integrated out with an inside-outside
//! recursion over sub-vectors of the observed counts ([`inside_outside`]);
//! the resulting expected production counts drive a closed-form EM update
//! ([`em`]). A seeded [`simulator`] and an exhaustive tree enumerator
//! ([`oracle`]) make every stage checkable at small scale.

pub mod em;
pub mod fixtures;
pub mod inside_outside;
pub mod model;
pub mod numfmt;
pub mod observation;
pub mod oracle;
pub mod simulator;
pub mod trees;
pub mod vector;

pub use em::{em_step, fit, EmConfig, EmError, EmResult, ImpossiblePolicy, TraceEntry};
pub use inside_outside::{
    aggregate_counts, expected_counts, inner_probabilities, observation_counts,
    outer_probabilities, CountingMode, ExpectedCounts, InnerTable, InsideOutsideError, Lattice,
    OuterTable,
};
pub use model::{
    parse_model, parse_structure, random_init, serialize_model, serialize_structure,
    uniform_init, ModelError, ModelStructure, OffspringModel, ProductionKind, Rule, TypeTable,
};
pub use observation::Observation;
pub use oracle::{enumerate_trees, oracle_expected_counts, OracleError, WeightedTree};
pub use simulator::{simulate_sample, simulate_tree, SimConfig, SimError};
pub use trees::{
    complete_data_mle, count_occurrences, parse_tree, parse_tree_list, serialize_tree,
    yield_vector, DerivationTree, TreeCounts, TreeError,
};
pub use vector::CountVector;
