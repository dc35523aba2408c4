//! Particle types, productions, and validated offspring models.
//!
//! Type indices follow declaration order with nonterminals first, so a
//! [`CountVector`] over a model always has the layout
//! `(nonterminals..., terminals...)`.
//!
//! The model file is line oriented:
//!
//! ```text
//! nonterminals: T1 T2
//! terminals: T1t T2t
//! T1 -> T1 T2 : 0.25
//! ```
//!
//! `#` starts a comment. Offspring order on a production line is irrelevant.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::numfmt::sig17;
use crate::vector::CountVector;

/// Per-parent probability sums must be within this of one on input.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown type `{name}` at line {line}, column {column}")]
    UnknownType {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("invalid type name `{0}`")]
    InvalidTypeName(String),
    #[error("type `{0}` declared more than once")]
    DuplicateType(String),
    #[error("at least one nonterminal type is required")]
    NoNonterminals,
    #[error("terminal type `{name}` cannot be a parent (line {line})")]
    TerminalParent { name: String, line: usize },
    #[error("duplicate production `{production}`")]
    DuplicateProduction { production: String },
    #[error("production for `{parent}` has no offspring")]
    EmptyOffspring { parent: String },
    #[error("invalid probability {value} for `{production}`")]
    InvalidProbability { production: String, value: f64 },
    #[error("probabilities for `{parent}` sum to {sum}, expected 1")]
    ProbabilitySum { parent: String, sum: f64 },
    #[error("nonterminal `{parent}` has no productions")]
    NoProductions { parent: String },
    #[error("expected {expected} probabilities, got {got}")]
    ParameterCount { expected: usize, got: usize },
}

/// Ordered type names split into nonterminals (first) and terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeTable {
    names: Vec<String>,
    nonterminals: usize,
}

fn valid_type_name(name: &str) -> bool {
    !name.is_empty()
        && !name.contains("->")
        && !name
            .chars()
            .any(|c| c.is_whitespace() || matches!(c, ':' | '#' | '(' | ')' | ','))
}

impl TypeTable {
    pub fn new<S: Into<String>>(
        nonterminals: impl IntoIterator<Item = S>,
        terminals: impl IntoIterator<Item = S>,
    ) -> Result<Self, ModelError> {
        let mut names: Vec<String> = nonterminals.into_iter().map(Into::into).collect();
        let m = names.len();
        names.extend(terminals.into_iter().map(Into::into));
        if m == 0 {
            return Err(ModelError::NoNonterminals);
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !valid_type_name(name) {
                return Err(ModelError::InvalidTypeName(name.clone()));
            }
            if !seen.insert(name.as_str()) {
                return Err(ModelError::DuplicateType(name.clone()));
            }
        }
        Ok(TypeTable {
            names,
            nonterminals: m,
        })
    }

    /// Total number of types `d`.
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    /// Number of nonterminal types `m`.
    pub fn num_nonterminals(&self) -> usize {
        self.nonterminals
    }

    pub fn is_terminal(&self, ty: usize) -> bool {
        ty >= self.nonterminals
    }

    pub fn name(&self, ty: usize) -> &str {
        &self.names[ty]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Whether a production ends a lineage in an observed leaf or branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProductionKind {
    /// One child, observed as a leaf of the given type.
    Emission(usize),
    /// Two or more children.
    Branching,
}

/// A production `parent -> offspring` without a probability.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub parent: usize,
    pub offspring: CountVector,
}

impl Rule {
    pub fn kind(&self) -> ProductionKind {
        match self.offspring.single() {
            Some(child) => ProductionKind::Emission(child),
            None => ProductionKind::Branching,
        }
    }

    /// `T1->T1+T2`, used for trace column names.
    pub fn label(&self, types: &TypeTable) -> String {
        let children: Vec<&str> = self
            .offspring
            .expand()
            .into_iter()
            .map(|t| types.name(t))
            .collect();
        format!("{}->{}", types.name(self.parent), children.join("+"))
    }

    /// `T1 -> T1 T2`, as written in model files.
    pub fn display(&self, types: &TypeTable) -> String {
        let mut s = format!("{} ->", types.name(self.parent));
        for t in self.offspring.expand() {
            s.push(' ');
            s.push_str(types.name(t));
        }
        s
    }
}

/// The set of allowed productions, sorted by `(parent, offspring)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelStructure {
    types: TypeTable,
    rules: Vec<Rule>,
    by_parent: Vec<Range<usize>>,
    lookup: HashMap<(usize, CountVector), usize>,
}

impl ModelStructure {
    pub fn new(types: TypeTable, mut rules: Vec<Rule>) -> Result<Self, ModelError> {
        let d = types.dim();
        for rule in &rules {
            assert_eq!(rule.offspring.dim(), d, "offspring vector dimension");
            if types.is_terminal(rule.parent) {
                return Err(ModelError::TerminalParent {
                    name: types.name(rule.parent).to_string(),
                    line: 0,
                });
            }
            if rule.offspring.total() == 0 {
                return Err(ModelError::EmptyOffspring {
                    parent: types.name(rule.parent).to_string(),
                });
            }
        }
        rules.sort_by(|a, b| (a.parent, &a.offspring).cmp(&(b.parent, &b.offspring)));
        let mut lookup = HashMap::with_capacity(rules.len());
        for (i, rule) in rules.iter().enumerate() {
            if lookup
                .insert((rule.parent, rule.offspring.clone()), i)
                .is_some()
            {
                return Err(ModelError::DuplicateProduction {
                    production: rule.display(&types),
                });
            }
        }
        let mut by_parent = Vec::with_capacity(types.num_nonterminals());
        let mut start = 0;
        for v in 0..types.num_nonterminals() {
            let end = start + rules[start..].iter().take_while(|r| r.parent == v).count();
            by_parent.push(start..end);
            start = end;
        }
        Ok(ModelStructure {
            types,
            rules,
            by_parent,
            lookup,
        })
    }

    pub fn types(&self) -> &TypeTable {
        &self.types
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Rule {
        &self.rules[index]
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Indices of the rules whose parent is nonterminal `v`.
    pub fn rules_of(&self, v: usize) -> Range<usize> {
        self.by_parent[v].clone()
    }

    pub fn find(&self, parent: usize, offspring: &CountVector) -> Option<usize> {
        self.lookup.get(&(parent, offspring.clone())).copied()
    }

    fn check_every_parent_has_rules(&self) -> Result<(), ModelError> {
        for v in 0..self.types.num_nonterminals() {
            if self.by_parent[v].is_empty() {
                return Err(ModelError::NoProductions {
                    parent: self.types.name(v).to_string(),
                });
            }
        }
        Ok(())
    }
}

/// A structure with one probability per rule; each parent's probabilities sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringModel {
    structure: Arc<ModelStructure>,
    probabilities: Vec<f64>,
}

impl OffspringModel {
    pub fn new(
        structure: Arc<ModelStructure>,
        probabilities: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if probabilities.len() != structure.len() {
            return Err(ModelError::ParameterCount {
                expected: structure.len(),
                got: probabilities.len(),
            });
        }
        structure.check_every_parent_has_rules()?;
        for (rule, &p) in structure.rules().iter().zip(&probabilities) {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidProbability {
                    production: rule.display(structure.types()),
                    value: p,
                });
            }
        }
        for v in 0..structure.types().num_nonterminals() {
            let sum: f64 = probabilities[structure.rules_of(v)].iter().sum();
            if (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(ModelError::ProbabilitySum {
                    parent: structure.types().name(v).to_string(),
                    sum,
                });
            }
        }
        Ok(OffspringModel {
            structure,
            probabilities,
        })
    }

    pub fn structure(&self) -> &Arc<ModelStructure> {
        &self.structure
    }

    pub fn types(&self) -> &TypeTable {
        self.structure.types()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, rule: usize) -> f64 {
        self.probabilities[rule]
    }

    /// Probability of `parent -> offspring`, zero when the rule is absent.
    pub fn probability_of(&self, parent: usize, offspring: &CountVector) -> f64 {
        self.structure
            .find(parent, offspring)
            .map_or(0.0, |i| self.probabilities[i])
    }

    /// Largest absolute probability difference against a model of the same structure.
    pub fn max_abs_diff(&self, other: &OffspringModel) -> f64 {
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Every parent's rules get equal probability.
pub fn uniform_init(structure: &Arc<ModelStructure>) -> Result<OffspringModel, ModelError> {
    structure.check_every_parent_has_rules()?;
    let mut probs = vec![0.0; structure.len()];
    for v in 0..structure.types().num_nonterminals() {
        let range = structure.rules_of(v);
        let p = 1.0 / range.len() as f64;
        probs[range].fill(p);
    }
    OffspringModel::new(Arc::clone(structure), probs)
}

/// Positive random probabilities per parent, normalized; deterministic in `seed`.
pub fn random_init(
    structure: &Arc<ModelStructure>,
    seed: u64,
) -> Result<OffspringModel, ModelError> {
    structure.check_every_parent_has_rules()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probs = vec![0.0; structure.len()];
    for v in 0..structure.types().num_nonterminals() {
        let range = structure.rules_of(v);
        if range.len() == 1 {
            probs[range.start] = 1.0;
            continue;
        }
        // 1 - U lies in (0, 1], so every weight is positive.
        let weights: Vec<f64> = range.clone().map(|_| 1.0 - rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for (slot, w) in probs[range].iter_mut().zip(weights) {
            *slot = w / total;
        }
    }
    OffspringModel::new(Arc::clone(structure), probs)
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..i],
                    column: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            column: line[..s].chars().count() + 1,
        });
    }
    tokens
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ModelError {
    ModelError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

struct ParsedFile {
    structure: ModelStructure,
    probabilities: Vec<Option<f64>>,
}

fn parse_file(text: &str, require_probabilities: bool) -> Result<ParsedFile, ModelError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
        .filter(|(_, l)| !l.trim().is_empty());

    let mut header = |key: &str| -> Result<Vec<String>, ModelError> {
        let (line_no, line) = lines
            .next()
            .ok_or_else(|| syntax(1, 1, format!("missing `{key}` header")))?;
        let tokens = tokenize(line);
        if tokens[0].text != key {
            return Err(syntax(
                line_no,
                tokens[0].column,
                format!("expected `{key}`, found `{}`", tokens[0].text),
            ));
        }
        Ok(tokens[1..].iter().map(|t| t.text.to_string()).collect())
    };
    let nonterminals = header("nonterminals:")?;
    let terminals = header("terminals:")?;
    let types = TypeTable::new(nonterminals, terminals)?;
    let d = types.dim();

    let mut parsed: Vec<(Rule, Option<f64>, usize)> = Vec::new();
    for (line_no, line) in lines {
        let tokens = tokenize(line);
        let resolve = |tok: &Token<'_>| {
            types.index_of(tok.text).ok_or_else(|| ModelError::UnknownType {
                name: tok.text.to_string(),
                line: line_no,
                column: tok.column,
            })
        };
        if tokens.len() < 3 || tokens[1].text != "->" {
            let col = tokens.get(1).map_or(tokens[0].column, |t| t.column);
            return Err(syntax(line_no, col, "expected `PARENT -> CHILD ... : PROBABILITY`"));
        }
        let parent = resolve(&tokens[0])?;
        if types.is_terminal(parent) {
            return Err(ModelError::TerminalParent {
                name: tokens[0].text.to_string(),
                line: line_no,
            });
        }
        let colon = tokens.iter().position(|t| t.text == ":");
        let child_end = colon.unwrap_or(tokens.len());
        let mut offspring = CountVector::zeros(d);
        for tok in &tokens[2..child_end] {
            offspring.increment(resolve(tok)?);
        }
        if offspring.total() == 0 {
            return Err(syntax(line_no, tokens[1].column, "production has no offspring"));
        }
        let probability = match colon {
            Some(c) => {
                let tok = tokens
                    .get(c + 1)
                    .ok_or_else(|| syntax(line_no, tokens[c].column, "missing probability"))?;
                if let Some(extra) = tokens.get(c + 2) {
                    return Err(syntax(line_no, extra.column, "unexpected token after probability"));
                }
                let p: f64 = tok.text.parse().map_err(|_| {
                    syntax(line_no, tok.column, format!("invalid number `{}`", tok.text))
                })?;
                Some(p)
            }
            None if require_probabilities => {
                let col = tokens.last().map_or(1, |t| t.column + t.text.chars().count());
                return Err(syntax(line_no, col, "missing `: PROBABILITY`"));
            }
            None => None,
        };
        parsed.push((Rule { parent, offspring }, probability, line_no));
    }

    let mut seen = HashSet::new();
    for (rule, _, _) in &parsed {
        if !seen.insert((rule.parent, rule.offspring.clone())) {
            return Err(ModelError::DuplicateProduction {
                production: rule.display(&types),
            });
        }
    }
    let mut lookup: HashMap<(usize, CountVector), Option<f64>> = parsed
        .iter()
        .map(|(r, p, _)| ((r.parent, r.offspring.clone()), *p))
        .collect();
    let structure = ModelStructure::new(types, parsed.into_iter().map(|(r, _, _)| r).collect())?;
    let probabilities = structure
        .rules()
        .iter()
        .map(|r| lookup.remove(&(r.parent, r.offspring.clone())).flatten())
        .collect();
    Ok(ParsedFile {
        structure,
        probabilities,
    })
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<OffspringModel, ModelError> {
    let parsed = parse_file(text, true)?;
    let probs = parsed
        .probabilities
        .into_iter()
        .map(|p| p.expect("probabilities are required"))
        .collect();
    OffspringModel::new(Arc::new(parsed.structure), probs)
}

/// Parses a model file whose probabilities, if present, are ignored.
pub fn parse_structure(text: &str) -> Result<Arc<ModelStructure>, ModelError> {
    Ok(Arc::new(parse_file(text, false)?.structure))
}

fn write_header(out: &mut String, types: &TypeTable) {
    let m = types.num_nonterminals();
    out.push_str("nonterminals:");
    for name in &types.names()[..m] {
        out.push(' ');
        out.push_str(name);
    }
    out.push_str("\nterminals:");
    for name in &types.names()[m..] {
        out.push(' ');
        out.push_str(name);
    }
    out.push('\n');
}

/// Canonical model text.
pub fn serialize_model(model: &OffspringModel) -> String {
    let mut out = String::new();
    write_header(&mut out, model.types());
    for (rule, &p) in model.structure.rules().iter().zip(&model.probabilities) {
        let _ = writeln!(out, "{} : {}", rule.display(model.types()), sig17(p));
    }
    out
}

/// Canonical structure text (no probabilities).
pub fn serialize_structure(structure: &ModelStructure) -> String {
    let mut out = String::new();
    write_header(&mut out, structure.types());
    for rule in structure.rules() {
        out.push_str(&rule.display(structure.types()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn parses_worked_example_model() {
        let model = parse_model(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
        assert_eq!(model.types().dim(), 4);
        assert_eq!(model.types().num_nonterminals(), 2);
        assert_eq!(model.structure().len(), 7);
        assert_eq!(model.structure().rules_of(0).len(), 4);
        assert_eq!(model.structure().rules_of(1).len(), 3);
        for i in model.structure().rules_of(0) {
            assert_eq!(model.probability(i), 0.25);
        }
    }

    #[test]
    fn empty_text_is_a_syntax_error() {
        assert!(matches!(parse_model(""), Err(ModelError::Syntax { .. })));
        assert!(matches!(parse_model("# only a comment\n"), Err(ModelError::Syntax { .. })));
    }

    #[test]
    fn probability_sum_violation_names_parent() {
        let text = "nonterminals: T1\nterminals: T1t\nT1 -> T1t : 0.25\nT1 -> T1 T1 : 0.25\n";
        match parse_model(text) {
            Err(ModelError::ProbabilitySum { parent, sum }) => {
                assert_eq!(parent, "T1");
                assert!((sum - 0.5).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_each_error_class() {
        let head = "nonterminals: A\nterminals: a\n";
        let unknown = format!("{head}A -> B : 1\n");
        assert!(matches!(
            parse_model(&unknown),
            Err(ModelError::UnknownType { line: 3, column: 6, .. })
        ));
        let dup = format!("{head}A -> a : 0.5\nA -> a : 0.5\n");
        assert!(matches!(parse_model(&dup), Err(ModelError::DuplicateProduction { .. })));
        // multiset equality: `A a` and `a A` are the same production
        let dup_order = format!("{head}A -> A a : 0.5\nA -> a A : 0.5\n");
        assert!(matches!(parse_model(&dup_order), Err(ModelError::DuplicateProduction { .. })));
        let term_parent = format!("{head}a -> A : 1\nA -> a : 1\n");
        assert!(matches!(
            parse_model(&term_parent),
            Err(ModelError::TerminalParent { line: 3, .. })
        ));
        let missing_arrow = format!("{head}A a : 1\n");
        assert!(matches!(
            parse_model(&missing_arrow),
            Err(ModelError::Syntax { line: 3, column: 3, .. })
        ));
        let no_rules = head.to_string();
        assert!(matches!(parse_model(&no_rules), Err(ModelError::NoProductions { .. })));
        let bad_p = format!("{head}A -> a : 1.5\n");
        assert!(matches!(parse_model(&bad_p), Err(ModelError::InvalidProbability { .. })));
        let headers_late = "A -> a : 1\nnonterminals: A\nterminals: a\n";
        assert!(matches!(parse_model(headers_late), Err(ModelError::Syntax { line: 1, .. })));
        let bad_name = "nonterminals: A:B\nterminals: a\n";
        assert!(matches!(parse_model(bad_name), Err(ModelError::InvalidTypeName(_))));
        let dup_type = "nonterminals: A\nterminals: A\n";
        assert!(matches!(parse_model(dup_type), Err(ModelError::DuplicateType(_))));
        let missing_p = format!("{head}A -> a\n");
        assert!(matches!(parse_model(&missing_p), Err(ModelError::Syntax { .. })));
        assert!(parse_structure(&missing_p).is_ok());
    }

    #[test]
    fn sum_tolerance_accepts_sixteen_digit_thirds() {
        // 0.3333333333333333 * 2 + 0.3333333333333334 is within 1e-9 of one
        let model = parse_model(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
        let sum: f64 = model.probabilities()[model.structure().rules_of(1)].iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_serialization() {
        let model = parse_model(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
        let text = serialize_model(&model);
        assert!(text.starts_with("nonterminals: T1 T2\nterminals: T1t T2t\nT1 -> T1t : 0.25\n"));
        let again = parse_model(&text).unwrap();
        assert_eq!(again, model);
        assert_eq!(serialize_model(&again), text);

        // shuffled, commented, differently spaced input gives identical bytes
        let shuffled = "# header\nnonterminals:   T1 T2\nterminals: T1t T2t\n\
            T2 -> T2t : 0.3333333333333334\nT1 -> T2 T1 : 0.25 # reversed\n\
            T1 -> T1t : 0.25\nT1 -> T1 : 0.25\nT1 -> T1 T1 : 0.25\n\
            T2 -> T2 : 0.3333333333333333\nT2 -> T2 T2 : 0.3333333333333333\n";
        assert_eq!(serialize_model(&parse_model(shuffled).unwrap()), text);
    }

    #[test]
    fn thirds_survive_round_trip_bit_exactly() {
        let structure = parse_structure(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
        let model = uniform_init(&structure).unwrap();
        let back = parse_model(&serialize_model(&model)).unwrap();
        for (a, b) in model.probabilities().iter().zip(back.probabilities()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn uniform_init_matches_worked_example() {
        let structure = parse_structure(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
        let model = uniform_init(&structure).unwrap();
        for i in structure.rules_of(0) {
            assert_eq!(model.probability(i), 0.25);
        }
        for i in structure.rules_of(1) {
            assert_eq!(model.probability(i), 1.0 / 3.0);
        }
    }

    #[test]
    fn uniform_init_small_cases() {
        let one = parse_structure("nonterminals: A\nterminals: a\nA -> a\n").unwrap();
        assert_eq!(uniform_init(&one).unwrap().probabilities(), &[1.0]);
        let five = parse_structure(
            "nonterminals: A\nterminals: a b\nA -> a\nA -> b\nA -> A a\nA -> A b\nA -> A A\n",
        )
        .unwrap();
        assert!(uniform_init(&five).unwrap().probabilities().iter().all(|&p| p == 0.2));
        let missing = parse_structure("nonterminals: A B\nterminals: a\nA -> a\n").unwrap();
        assert!(matches!(
            uniform_init(&missing),
            Err(ModelError::NoProductions { parent }) if parent == "B"
        ));
        assert!(random_init(&missing, 3).is_err());
    }

    #[test]
    fn random_init_single_rule_parent_gets_one() {
        let s = parse_structure("nonterminals: A B\nterminals: a\nA -> a\nA -> A B\nB -> a\n")
            .unwrap();
        for seed in 0..20 {
            let m = random_init(&s, seed).unwrap();
            assert_eq!(m.probability(s.rules_of(1).start), 1.0);
        }
    }

    proptest! {
        #[test]
        fn random_init_is_deterministic_and_normalized(seed in any::<u64>()) {
            let s = parse_structure(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
            let a = random_init(&s, seed).unwrap();
            let b = random_init(&s, seed).unwrap();
            prop_assert_eq!(&a, &b);
            for v in 0..2 {
                let sum: f64 = a.probabilities()[s.rules_of(v)].iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(a.probabilities()[s.rules_of(v)].iter().all(|&p| p > 0.0));
            }
        }

        #[test]
        fn parse_serialize_is_identity(seed in any::<u64>()) {
            let s = parse_structure(fixtures::WORKED_EXAMPLE_MODEL).unwrap();
            let model = random_init(&s, seed).unwrap();
            let text = serialize_model(&model);
            let back = parse_model(&text).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert_eq!(serialize_model(&back), text);
        }
    }
}
