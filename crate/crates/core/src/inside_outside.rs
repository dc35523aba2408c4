//! Inner and outer probabilities over the lattice of sub-vectors of an
//! observation, and the expected type and production counts they yield.
//!
//! `alpha(I, v)` is the probability that a subtree rooted at nonterminal `v`
//! has leaf counts exactly `I`. `beta(I, v)` is the mass of everything
//! outside such a subtree, given the whole observation `X`. With
//! `P = alpha(X, root)`:
//!
//! ```text
//! E c(v)      = (1/P) * sum_I alpha(I, v) * beta(I, v)
//! E c(v -> A) = (1/P) * sum_I beta(I, v) * [contribution of v -> A to alpha(I, v)]
//! ```
//!
//! Splits of `I` among a production's children are enumerated in one of two
//! [`CountingMode`]s. `Ordered` sums over every ordered composition, which
//! is the likelihood of the branching process itself. `Multiset` counts each
//! unordered assignment to identical-type children once.
//!
//! `beta` is accumulated top-down by pushing each parent's mass through the
//! same split enumeration the inner pass used. This makes `beta(I, v)` the
//! derivative of `P` with respect to `alpha(I, v)` in both modes. The
//! expected counts are therefore exact posterior expectations for the chosen
//! mode, and the EM update built on them never decreases that mode's
//! likelihood.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::model::{OffspringModel, ProductionKind, TypeTable};
use crate::numfmt::sig17;
use crate::observation::Observation;
use crate::vector::CountVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CountingMode {
    /// One term per unordered assignment among identical-type children.
    #[default]
    Multiset,
    /// One term per ordered composition.
    Ordered,
}

impl CountingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CountingMode::Multiset => "multiset",
            CountingMode::Ordered => "ordered",
        }
    }
}

impl FromStr for CountingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "multiset" => Ok(CountingMode::Multiset),
            "ordered" => Ok(CountingMode::Ordered),
            other => Err(format!("unknown counting mode `{other}` (multiset|ordered)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InsideOutsideError {
    #[error("observation has {got} types, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("root type index {0} is not a nonterminal")]
    RootNotNonterminal(usize),
    #[error("observation has no particles")]
    EmptyObservation,
    #[error("table built in {built:?} mode, requested {requested:?}")]
    ModeMismatch {
        built: CountingMode,
        requested: CountingMode,
    },
    #[error("tables were built for a different observation")]
    ObservationMismatch,
    #[error("observation {observation:?} has zero likelihood under the model")]
    Underivable { observation: Observation },
}

/// All sub-vectors `I <= X`, indexed row-major so index order is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    bounds: Vec<u32>,
    strides: Vec<usize>,
    components: Vec<u32>,
    totals: Vec<u32>,
    by_total: Vec<Vec<usize>>,
}

impl Lattice {
    pub fn new(x: &CountVector) -> Self {
        let bounds = x.counts().to_vec();
        let d = bounds.len();
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * (bounds[k + 1] as usize + 1);
        }
        let len: usize = bounds.iter().map(|&b| b as usize + 1).product();
        let mut components = Vec::with_capacity(len * d);
        let mut totals = Vec::with_capacity(len);
        let mut cur = vec![0u32; d];
        for _ in 0..len {
            components.extend_from_slice(&cur);
            totals.push(cur.iter().sum());
            for k in (0..d).rev() {
                if cur[k] < bounds[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = 0;
            }
        }
        let top = x.total() as usize;
        let mut by_total = vec![Vec::new(); top + 1];
        for (idx, &t) in totals.iter().enumerate() {
            by_total[t as usize].push(idx);
        }
        Lattice {
            bounds,
            strides,
            components,
            totals,
            by_total,
        }
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Index of `X` itself.
    pub fn top(&self) -> usize {
        self.len() - 1
    }

    pub fn total(&self, idx: usize) -> u32 {
        self.totals[idx]
    }

    pub fn components(&self, idx: usize) -> &[u32] {
        let d = self.dim();
        &self.components[idx * d..(idx + 1) * d]
    }

    pub fn vector(&self, idx: usize) -> CountVector {
        CountVector::from(self.components(idx).to_vec())
    }

    pub fn index_of(&self, v: &CountVector) -> Option<usize> {
        if v.dim() != self.dim() {
            return None;
        }
        let mut idx = 0;
        for k in 0..self.dim() {
            if v[k] > self.bounds[k] {
                return None;
            }
            idx += v[k] as usize * self.strides[k];
        }
        Some(idx)
    }

    /// Indices with the given total, in lexicographic order.
    pub fn with_total(&self, total: usize) -> &[usize] {
        self.by_total.get(total).map_or(&[], Vec::as_slice)
    }

    pub fn le(&self, a: usize, b: usize) -> bool {
        self.components(a)
            .iter()
            .zip(self.components(b))
            .all(|(x, y)| x <= y)
    }

    /// Calls `f` for every `J <= I`, in increasing index order.
    fn for_each_sub(&self, i: usize, mut f: impl FnMut(usize)) {
        let d = self.dim();
        let upper = self.components(i);
        let mut cur = vec![0u32; d];
        let mut idx = 0usize;
        loop {
            f(idx);
            let mut k = d;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if cur[k] < upper[k] {
                    cur[k] += 1;
                    idx += self.strides[k];
                    break;
                }
                idx -= cur[k] as usize * self.strides[k];
                cur[k] = 0;
            }
        }
    }
}

/// A rule specialized to one lattice.
#[derive(Debug, Clone)]
enum Plan {
    /// Contributes only at the lattice index of the emitted unit vector.
    Emission { at: Option<usize> },
    /// Terminal children are pinned to `terminal_idx`; nonterminal children
    /// (ascending type) split the rest. `None` when the terminals exceed `X`.
    Branching {
        terminal_idx: Option<usize>,
        slots: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
struct RulePlan {
    rule: usize,
    parent: usize,
    probability: f64,
    plan: Plan,
}

fn compile(model: &OffspringModel, lattice: &Lattice) -> Vec<RulePlan> {
    let types = model.types();
    let m = types.num_nonterminals();
    let d = types.dim();
    model
        .structure()
        .rules()
        .iter()
        .enumerate()
        .filter(|&(i, _)| model.probability(i) > 0.0)
        .map(|(i, rule)| {
            let plan = match rule.kind() {
                ProductionKind::Emission(u) => Plan::Emission {
                    at: lattice.index_of(&CountVector::unit(d, u)),
                },
                ProductionKind::Branching => {
                    let mut terminal = CountVector::zeros(d);
                    let mut slots = Vec::new();
                    for ty in rule.offspring.expand() {
                        if ty < m {
                            slots.push(ty);
                        } else {
                            terminal.increment(ty);
                        }
                    }
                    Plan::Branching {
                        terminal_idx: lattice.index_of(&terminal),
                        slots,
                    }
                }
            };
            RulePlan {
                rule: i,
                parent: rule.parent,
                probability: model.probability(i),
                plan,
            }
        })
        .collect()
}

/// Enumerates assignments of lattice vectors to `slots` summing to `rem`,
/// each of total at least one. In multiset mode consecutive slots of equal
/// type take nondecreasing indices.
pub(crate) fn for_each_split(
    lattice: &Lattice,
    slots: &[usize],
    mode: CountingMode,
    rem: usize,
    assigned: &mut Vec<usize>,
    f: &mut dyn FnMut(&[usize]),
) {
    let k = assigned.len();
    let left = slots.len() - k;
    let lower = if mode == CountingMode::Multiset && k > 0 && slots[k] == slots[k - 1] {
        assigned[k - 1]
    } else {
        0
    };
    if left == 1 {
        if lattice.total(rem) >= 1 && rem >= lower {
            assigned.push(rem);
            f(assigned);
            assigned.pop();
        }
        return;
    }
    let rem_total = lattice.total(rem) as usize;
    lattice.for_each_sub(rem, |j| {
        let t = lattice.total(j) as usize;
        if j < lower || t == 0 || rem_total - t < left - 1 {
            return;
        }
        assigned.push(j);
        for_each_split(lattice, slots, mode, rem - j, assigned, f);
        assigned.pop();
    });
}

/// Lattice index left for the nonterminal slots of a branching rule at `idx`.
pub(crate) fn remainder(lattice: &Lattice, idx: usize, terminal_idx: Option<usize>) -> Option<usize> {
    let t = terminal_idx?;
    lattice.le(t, idx).then(|| idx - t)
}

pub(crate) fn check_observation(model: &OffspringModel, obs: &Observation) -> Result<(), InsideOutsideError> {
    let types = model.types();
    if obs.x.dim() != types.dim() {
        return Err(InsideOutsideError::DimensionMismatch {
            expected: types.dim(),
            got: obs.x.dim(),
        });
    }
    if obs.root >= types.num_nonterminals() {
        return Err(InsideOutsideError::RootNotNonterminal(obs.root));
    }
    if obs.x.total() == 0 {
        return Err(InsideOutsideError::EmptyObservation);
    }
    Ok(())
}

/// Inner probabilities, with each rule's contribution kept for the E-step.
#[derive(Debug, Clone)]
pub struct InnerTable {
    mode: CountingMode,
    observation: Observation,
    lattice: Lattice,
    nonterminals: usize,
    num_rules: usize,
    alpha: Vec<f64>,
    /// `[idx * num_rules + rule]`: `p(rule) * split sum` at `idx`.
    contributions: Vec<f64>,
    plans: Vec<RulePlan>,
}

impl InnerTable {
    pub fn mode(&self) -> CountingMode {
        self.mode
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn observation(&self) -> &Observation {
        &self.observation
    }

    /// `alpha(X, root)`.
    pub fn likelihood(&self) -> f64 {
        self.alpha_at(self.lattice.top(), self.observation.root)
    }

    pub fn alpha_at(&self, idx: usize, v: usize) -> f64 {
        self.alpha[idx * self.nonterminals + v]
    }

    /// Zero for vectors outside the lattice.
    pub fn alpha(&self, i: &CountVector, v: usize) -> f64 {
        self.lattice.index_of(i).map_or(0.0, |idx| self.alpha_at(idx, v))
    }

    fn contribution(&self, idx: usize, rule: usize) -> f64 {
        self.contributions[idx * self.num_rules + rule]
    }
}

/// Builds `alpha` bottom-up by total, ties in lexicographic order.
pub fn inner_probabilities(
    model: &OffspringModel,
    obs: &Observation,
    mode: CountingMode,
) -> Result<InnerTable, InsideOutsideError> {
    check_observation(model, obs)?;
    let lattice = Lattice::new(&obs.x);
    let m = model.types().num_nonterminals();
    let num_rules = model.structure().len();
    let plans = compile(model, &lattice);
    let mut table = InnerTable {
        mode,
        observation: obs.clone(),
        nonterminals: m,
        num_rules,
        alpha: vec![0.0; lattice.len() * m],
        contributions: vec![0.0; lattice.len() * num_rules],
        plans: Vec::new(),
        lattice,
    };
    let mut assigned = Vec::new();
    for total in 1..=obs.x.total() as usize {
        for &idx in table.lattice.with_total(total) {
            for plan in &plans {
                let value = match &plan.plan {
                    Plan::Emission { at } => {
                        if *at == Some(idx) {
                            plan.probability
                        } else {
                            0.0
                        }
                    }
                    Plan::Branching {
                        terminal_idx,
                        slots,
                    } => {
                        let Some(rem) = remainder(&table.lattice, idx, *terminal_idx) else {
                            continue;
                        };
                        if slots.is_empty() {
                            if rem == 0 {
                                plan.probability
                            } else {
                                0.0
                            }
                        } else {
                            let mut sum = 0.0;
                            let t = &table;
                            for_each_split(&t.lattice, slots, mode, rem, &mut assigned, &mut |a| {
                                let mut prod = 1.0;
                                for (&ty, &j) in slots.iter().zip(a) {
                                    prod *= t.alpha_at(j, ty);
                                    if prod == 0.0 {
                                        return;
                                    }
                                }
                                sum += prod;
                            });
                            plan.probability * sum
                        }
                    }
                };
                if value != 0.0 {
                    table.contributions[idx * num_rules + plan.rule] = value;
                    table.alpha[idx * m + plan.parent] += value;
                }
            }
        }
    }
    table.plans = plans;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct OuterTable {
    mode: CountingMode,
    nonterminals: usize,
    lattice: Lattice,
    beta: Vec<f64>,
}

impl OuterTable {
    pub fn mode(&self) -> CountingMode {
        self.mode
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn beta_at(&self, idx: usize, v: usize) -> f64 {
        self.beta[idx * self.nonterminals + v]
    }

    pub fn beta(&self, i: &CountVector, v: usize) -> f64 {
        self.lattice.index_of(i).map_or(0.0, |idx| self.beta_at(idx, v))
    }
}

/// Builds `beta` top-down from `beta(X, root) = 1`.
pub fn outer_probabilities(
    model: &OffspringModel,
    obs: &Observation,
    inner: &InnerTable,
    mode: CountingMode,
) -> Result<OuterTable, InsideOutsideError> {
    if inner.mode != mode {
        return Err(InsideOutsideError::ModeMismatch {
            built: inner.mode,
            requested: mode,
        });
    }
    if &inner.observation != obs || inner.num_rules != model.structure().len() {
        return Err(InsideOutsideError::ObservationMismatch);
    }
    let lattice = &inner.lattice;
    let m = inner.nonterminals;
    let mut beta = vec![0.0; lattice.len() * m];
    beta[lattice.top() * m + obs.root] = 1.0;
    let mut assigned = Vec::new();
    let mut others = Vec::new();
    for total in (2..=obs.x.total() as usize).rev() {
        for &idx in lattice.with_total(total) {
            for plan in &inner.plans {
                let Plan::Branching {
                    terminal_idx,
                    slots,
                } = &plan.plan
                else {
                    continue;
                };
                let outer = beta[idx * m + plan.parent];
                if outer == 0.0 || slots.is_empty() {
                    continue;
                }
                let Some(rem) = remainder(lattice, idx, *terminal_idx) else {
                    continue;
                };
                let scale = outer * plan.probability;
                let mut pushes: Vec<(usize, f64)> = Vec::new();
                for_each_split(lattice, slots, mode, rem, &mut assigned, &mut |a| {
                    others.clear();
                    others.extend(slots.iter().zip(a).map(|(&ty, &j)| inner.alpha_at(j, ty)));
                    let zeros = others.iter().filter(|&&x| x == 0.0).count();
                    if zeros >= 2 {
                        return;
                    }
                    for (k, (&ty, &j)) in slots.iter().zip(a).enumerate() {
                        if zeros == 1 && others[k] != 0.0 {
                            continue;
                        }
                        let rest: f64 = others
                            .iter()
                            .enumerate()
                            .filter(|&(q, _)| q != k)
                            .map(|(_, &x)| x)
                            .product();
                        pushes.push((j * m + ty, scale * rest));
                    }
                });
                for (at, value) in pushes {
                    beta[at] += value;
                }
            }
        }
    }
    Ok(OuterTable {
        mode,
        nonterminals: m,
        lattice: lattice.clone(),
        beta,
    })
}

/// Expected counts for one observation, or a sum over several.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpectedCounts {
    /// `P(x | p)`; the product over observations after aggregation.
    pub likelihood: f64,
    /// `ln P(x | p)`; the sum over observations after aggregation.
    pub log_likelihood: f64,
    /// Indexed by nonterminal.
    pub type_expectations: Vec<f64>,
    /// Indexed by rule, in model order.
    pub production_expectations: Vec<f64>,
}

impl ExpectedCounts {
    /// Sum of the rule expectations of parent `v`.
    pub fn production_total(&self, model: &OffspringModel, v: usize) -> f64 {
        self.production_expectations[model.structure().rules_of(v)]
            .iter()
            .sum()
    }
}

pub fn expected_counts(
    model: &OffspringModel,
    obs: &Observation,
    inner: &InnerTable,
    outer: &OuterTable,
    mode: CountingMode,
) -> Result<ExpectedCounts, InsideOutsideError> {
    for built in [inner.mode, outer.mode] {
        if built != mode {
            return Err(InsideOutsideError::ModeMismatch {
                built,
                requested: mode,
            });
        }
    }
    if &inner.observation != obs || outer.lattice != inner.lattice {
        return Err(InsideOutsideError::ObservationMismatch);
    }
    let p = inner.likelihood();
    if !(p > 0.0) {
        return Err(InsideOutsideError::Underivable {
            observation: obs.clone(),
        });
    }
    let m = inner.nonterminals;
    let mut types = vec![0.0; m];
    let mut rules = vec![0.0; model.structure().len()];
    for idx in 0..inner.lattice.len() {
        for (v, slot) in types.iter_mut().enumerate() {
            *slot += inner.alpha_at(idx, v) * outer.beta_at(idx, v);
        }
        for plan in &inner.plans {
            let c = inner.contribution(idx, plan.rule);
            if c != 0.0 {
                rules[plan.rule] += outer.beta_at(idx, plan.parent) * c;
            }
        }
    }
    types.iter_mut().for_each(|e| *e /= p);
    rules.iter_mut().for_each(|e| *e /= p);
    Ok(ExpectedCounts {
        likelihood: p,
        log_likelihood: p.ln(),
        type_expectations: types,
        production_expectations: rules,
    })
}

/// Inner, outer, and expected counts in one call.
pub fn observation_counts(
    model: &OffspringModel,
    obs: &Observation,
    mode: CountingMode,
) -> Result<ExpectedCounts, InsideOutsideError> {
    let inner = inner_probabilities(model, obs, mode)?;
    if !(inner.likelihood() > 0.0) {
        return Err(InsideOutsideError::Underivable {
            observation: obs.clone(),
        });
    }
    let outer = outer_probabilities(model, obs, &inner, mode)?;
    expected_counts(model, obs, &inner, &outer, mode)
}

/// Componentwise sums, in input order.
pub fn aggregate_counts(per_observation: &[ExpectedCounts]) -> ExpectedCounts {
    let Some((first, rest)) = per_observation.split_first() else {
        return ExpectedCounts {
            likelihood: 1.0,
            ..ExpectedCounts::default()
        };
    };
    let mut acc = first.clone();
    for e in rest {
        acc.likelihood *= e.likelihood;
        acc.log_likelihood += e.log_likelihood;
        for (a, b) in acc.type_expectations.iter_mut().zip(&e.type_expectations) {
            *a += b;
        }
        for (a, b) in acc
            .production_expectations
            .iter_mut()
            .zip(&e.production_expectations)
        {
            *a += b;
        }
    }
    acc
}

/// TSV of both tables: `kind type vector value`, zeros included.
pub fn table_dump(inner: &InnerTable, outer: &OuterTable, types: &TypeTable) -> String {
    let mut out = String::from("kind\ttype\tvector\tvalue\n");
    let lattice = &inner.lattice;
    let alpha = |idx, v| inner.alpha_at(idx, v);
    let beta = |idx, v| outer.beta_at(idx, v);
    let tables: [(&str, &dyn Fn(usize, usize) -> f64); 2] = [("alpha", &alpha), ("beta", &beta)];
    for (kind, get) in tables {
        for total in 1..=lattice.total(lattice.top()) as usize {
            for &idx in lattice.with_total(total) {
                for v in 0..inner.nonterminals {
                    let _ = writeln!(
                        out,
                        "{kind}\t{}\t{}\t{}",
                        types.name(v),
                        lattice.vector(idx),
                        sig17(get(idx, v))
                    );
                }
            }
        }
    }
    out
}
