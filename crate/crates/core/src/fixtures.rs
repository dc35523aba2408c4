//! Built-in models used by the worked example and the simulation study, and
//! seeded random models for property checks.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    parse_model, parse_structure, random_init, ModelStructure, OffspringModel, Rule, TypeTable,
};
use crate::observation::Observation;
use crate::simulator::{simulate_sample, SimConfig};
use crate::vector::CountVector;

/// Two nonterminals with survivor emissions, uniform probabilities.
pub const WORKED_EXAMPLE_MODEL: &str = "\
nonterminals: T1 T2
terminals: T1t T2t
T1 -> T1 T1 : 0.25
T1 -> T1 T2 : 0.25
T1 -> T1 : 0.25
T1 -> T1t : 0.25
T2 -> T2 T2 : 0.3333333333333333
T2 -> T2 : 0.3333333333333333
T2 -> T2t : 0.3333333333333334
";

/// Generating model of the simulation study: no survivor emissions.
pub const STUDY_TRUTH_MODEL: &str = "\
nonterminals: T1 T2
terminals: T1t T2t
T1 -> T1 T1 : 0.3333333333333333
T1 -> T1 T2 : 0.3333333333333333
T1 -> T1t : 0.3333333333333334
T2 -> T2 T2 : 0.5
T2 -> T2t : 0.5
";

pub fn worked_example_structure() -> Arc<ModelStructure> {
    parse_structure(WORKED_EXAMPLE_MODEL).expect("built-in structure")
}

/// Uniform start of the worked example, 1/4 for each `T1` rule and 1/3 for each `T2` rule.
pub fn worked_example_model() -> OffspringModel {
    crate::model::uniform_init(&worked_example_structure()).expect("built-in model")
}

/// One `T1` survivor, one `T1t`, one `T2t`, from a `T1` root.
pub fn worked_example_observation() -> Observation {
    Observation::new(0, vec![1, 0, 1, 1])
}

pub fn study_truth_model() -> OffspringModel {
    parse_model(STUDY_TRUTH_MODEL).expect("built-in model")
}

pub fn study_structure() -> Arc<ModelStructure> {
    parse_structure(STUDY_TRUTH_MODEL).expect("built-in structure")
}

/// A random model with one or two nonterminals, at most four types, and
/// productions of arity at most three. Every nonterminal has an emission and a
/// branching rule that reproduces itself, so observations of any size are
/// derivable.
pub fn random_model(seed: u64) -> OffspringModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=2usize);
    let t = rng.gen_range(1..=4 - m);
    let d = m + t;
    let types = TypeTable::new(
        (1..=m).map(|i| format!("N{i}")),
        (1..=t).map(|i| format!("t{i}")),
    )
    .expect("generated names are valid");
    let mut offspring = BTreeSet::new();
    let mut rules = Vec::new();
    for v in 0..m {
        offspring.clear();
        offspring.insert((v, CountVector::unit(d, rng.gen_range(0..d))));
        if rng.gen_bool(0.4) {
            offspring.insert((v, CountVector::unit(d, rng.gen_range(0..d))));
        }
        for k in 0..rng.gen_range(1..=3) {
            let mut o = CountVector::zeros(d);
            if k == 0 {
                o.increment(v);
            }
            while o.total() < rng.gen_range(2..=3) {
                o.increment(rng.gen_range(0..d));
            }
            offspring.insert((v, o));
        }
        rules.extend(offspring.iter().map(|(parent, o)| Rule {
            parent: *parent,
            offspring: o.clone(),
        }));
    }
    let structure = Arc::new(ModelStructure::new(types, rules).expect("generated rules are valid"));
    random_init(&structure, rng.gen()).expect("every parent has rules")
}

/// `count` observations derivable under `model`, with at most `max_leaves`
/// (at least two) leaves and varying lower bounds.
///
/// Trees are drawn from the uniform model on the same structure, so rare
/// rules do not starve the rejection sampler. A self-reproducing rule of
/// arity at most three adds one or two leaves per use, so every window of
/// two consecutive sizes is reachable.
pub fn random_observations(
    model: &OffspringModel,
    seed: u64,
    count: usize,
    max_leaves: u64,
) -> Vec<Observation> {
    let m = model.types().num_nonterminals() as u64;
    let uniform = crate::model::uniform_init(model.structure()).expect("every parent has rules");
    (0..count as u64)
        .map(|i| {
            let root = ((seed + i) % m) as usize;
            let min = 1 + (seed + i) % (max_leaves - 1);
            let cfg = SimConfig::new(root, seed.wrapping_add(i << 32), 1)
                .with_bounds(min, max_leaves)
                .with_max_depth(8);
            let (_, mut obs) = simulate_sample(&uniform, &cfg).expect("every size is reachable");
            obs.pop().expect("one observation")
        })
        .collect()
}
