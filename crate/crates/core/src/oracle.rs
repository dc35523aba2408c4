//! Exhaustive enumeration of the derivation trees behind an observation.
//!
//! Slow and exact: it walks ordered compositions of the yield and dedupes
//! canonical trees, sharing no code with the inner/outer recursions, so it
//! serves as an independent check of likelihoods and expected counts on
//! small observations.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use thiserror::Error;

use crate::inside_outside::{check_observation, CountingMode, ExpectedCounts, InsideOutsideError};
use crate::model::{OffspringModel, ProductionKind};
use crate::observation::Observation;
use crate::trees::{count_occurrences, serialize_tree, DerivationTree};
use crate::vector::CountVector;

/// Largest observation (in leaves) enumerated unless the caller says otherwise.
pub const DEFAULT_GUARD: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("observation has {total} leaves, enumeration guard is {guard}")]
    GuardExceeded { total: u64, guard: u64 },
    #[error(transparent)]
    Invalid(#[from] InsideOutsideError),
}

/// An unordered derivation tree with its probability under the model.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTree {
    pub tree: DerivationTree,
    /// Product of the applied production probabilities.
    pub probability: f64,
    /// Number of distinct child orderings over the whole tree.
    pub multiplicity: u64,
}

impl WeightedTree {
    pub fn weight(&self, mode: CountingMode) -> f64 {
        match mode {
            CountingMode::Multiset => self.probability,
            CountingMode::Ordered => self.probability * self.multiplicity as f64,
        }
    }
}

type Memo = HashMap<(usize, CountVector), Rc<Vec<(DerivationTree, f64)>>>;

struct Enumerator<'a> {
    model: &'a OffspringModel,
    memo: Memo,
}

impl Enumerator<'_> {
    /// All trees rooted at `v` with yield `target`, each once.
    fn trees(&mut self, v: usize, target: &CountVector) -> Rc<Vec<(DerivationTree, f64)>> {
        if let Some(hit) = self.memo.get(&(v, target.clone())) {
            return Rc::clone(hit);
        }
        let model = self.model;
        let structure = model.structure();
        let m = model.types().num_nonterminals();
        let mut found: BTreeMap<DerivationTree, f64> = BTreeMap::new();
        for r in structure.rules_of(v) {
            let p = model.probability(r);
            if p == 0.0 {
                continue;
            }
            let rule = structure.rule(r);
            if let ProductionKind::Emission(u) = rule.kind() {
                if target.single() == Some(u) {
                    found.insert(DerivationTree::node(v, vec![DerivationTree::leaf(u)]), p);
                }
                continue;
            }
            let mut terminal = CountVector::zeros(target.dim());
            let mut slots = Vec::new();
            let mut leaves = Vec::new();
            for ty in rule.offspring.expand() {
                if ty < m {
                    slots.push(ty);
                } else {
                    terminal.increment(ty);
                    leaves.push(DerivationTree::leaf(ty));
                }
            }
            let Some(rest) = target.checked_sub(&terminal) else {
                continue;
            };
            let mut parts = Vec::new();
            compositions(&rest, slots.len(), &mut Vec::new(), &mut parts);
            for part in parts {
                let lists: Vec<_> = slots
                    .iter()
                    .zip(&part)
                    .map(|(&ty, yv)| self.trees(ty, yv))
                    .collect();
                product(&lists, &mut Vec::new(), &mut |picks| {
                    let mut children = leaves.clone();
                    let mut prob = p;
                    for (list, &k) in lists.iter().zip(picks) {
                        children.push(list[k].0.clone());
                        prob *= list[k].1;
                    }
                    found.insert(DerivationTree::node(v, children), prob);
                });
            }
        }
        let out = Rc::new(found.into_iter().collect::<Vec<_>>());
        self.memo.insert((v, target.clone()), Rc::clone(&out));
        out
    }
}

/// Ordered splits of `rest` into `n` parts, each with at least one particle.
fn compositions(rest: &CountVector, n: usize, acc: &mut Vec<CountVector>, out: &mut Vec<Vec<CountVector>>) {
    if n == 0 {
        if rest.total() == 0 {
            out.push(acc.clone());
        }
        return;
    }
    if rest.total() < n as u64 {
        return;
    }
    for part in sub_vectors(rest) {
        if part.total() == 0 {
            continue;
        }
        let left = rest.checked_sub(&part).expect("part is a sub-vector");
        acc.push(part);
        compositions(&left, n - 1, acc, out);
        acc.pop();
    }
}

fn sub_vectors(upper: &CountVector) -> Vec<CountVector> {
    let mut out = vec![Vec::new()];
    for &bound in upper.counts() {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=bound).map(move |c| {
                    let mut next = prefix.clone();
                    next.push(c);
                    next
                })
            })
            .collect();
    }
    out.into_iter().map(CountVector::from).collect()
}

/// Every choice of one entry per list.
fn product(
    lists: &[Rc<Vec<(DerivationTree, f64)>>],
    picks: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    let k = picks.len();
    if k == lists.len() {
        f(picks);
        return;
    }
    for i in 0..lists[k].len() {
        picks.push(i);
        product(lists, picks, f);
        picks.pop();
    }
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Orderings of the children at every node, multiplied down the tree.
pub fn multiplicity(tree: &DerivationTree) -> u64 {
    let children = tree.children();
    let mut total = 1u64;
    let mut i = 0;
    while i < children.len() {
        let ty = children[i].ty();
        let mut j = i;
        let mut group = factorial(0);
        while j < children.len() && children[j].ty() == ty {
            let mut run = j;
            while run < children.len() && children[run] == children[j] {
                run += 1;
            }
            group *= factorial(run - j);
            j = run;
        }
        total *= factorial(j - i) / group;
        i = j;
    }
    children.iter().map(multiplicity).product::<u64>() * total
}

/// Every distinct unordered tree rooted at `obs.root` with yield `obs.x` and
/// positive probability, sorted by serialized form.
pub fn enumerate_trees(
    model: &OffspringModel,
    obs: &Observation,
    guard: u64,
) -> Result<Vec<WeightedTree>, OracleError> {
    check_observation(model, obs)?;
    let total = obs.x.total();
    if total > guard {
        return Err(OracleError::GuardExceeded { total, guard });
    }
    let mut e = Enumerator {
        model,
        memo: HashMap::new(),
    };
    let found = e.trees(obs.root, &obs.x);
    let mut out: Vec<(String, WeightedTree)> = found
        .iter()
        .map(|(tree, p)| {
            (
                serialize_tree(tree, model.types()),
                WeightedTree {
                    multiplicity: multiplicity(tree),
                    tree: tree.clone(),
                    probability: *p,
                },
            )
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out.into_iter().map(|(_, t)| t).collect())
}

/// Posterior-weighted occurrence counts over the enumerated trees.
pub fn oracle_expected_counts(
    model: &OffspringModel,
    obs: &Observation,
    mode: CountingMode,
    guard: u64,
) -> Result<ExpectedCounts, OracleError> {
    let trees = enumerate_trees(model, obs, guard)?;
    let total: f64 = trees.iter().map(|t| t.weight(mode)).sum();
    if !(total > 0.0) {
        return Err(InsideOutsideError::Underivable {
            observation: obs.clone(),
        }
        .into());
    }
    let structure = model.structure();
    let d = model.types().dim();
    let mut types = vec![0.0; model.types().num_nonterminals()];
    let mut rules = vec![0.0; structure.len()];
    for t in &trees {
        let w = t.weight(mode) / total;
        let counts = count_occurrences(&t.tree, d);
        for (&v, &c) in &counts.type_counts {
            types[v] += w * c as f64;
        }
        for ((parent, offspring), &c) in &counts.production_counts {
            let r = structure
                .find(*parent, offspring)
                .expect("enumerated trees use model rules");
            rules[r] += w * c as f64;
        }
    }
    Ok(ExpectedCounts {
        likelihood: total,
        log_likelihood: total.ln(),
        type_expectations: types,
        production_expectations: rules,
    })
}
